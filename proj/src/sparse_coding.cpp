#include "eegsrc/sparse_coding.hpp"

#include "eegsrc/errors.hpp"
#include "parallel.hpp"

#include <cmath>

namespace eegsrc {

// --- Dictionary -----------------------------------------------------------

Dictionary::Dictionary(Eigen::MatrixXd atoms, std::optional<int> class_tag, LearnMeta meta)
    : atoms_(std::move(atoms)), class_tag_(class_tag), meta_(std::move(meta)) {
  if (atoms_.cols() < 1 || atoms_.rows() < 1) throw ArgumentError("dictionary must be non-empty");
  if (!atoms_.allFinite()) throw ArgumentError("dictionary contains non-finite entries");
  const double dev = max_norm_deviation();
  if (dev > kNormTolerance)
    throw ArgumentError("dictionary atoms are not unit norm (max deviation " +
                        std::to_string(dev) + ")");
}

Dictionary Dictionary::normalized(Eigen::MatrixXd atoms, std::optional<int> class_tag,
                                  LearnMeta meta) {
  for (Index j = 0; j < atoms.cols(); ++j) {
    const double n = atoms.col(j).norm();
    if (!(n > 0.0)) throw ArgumentError("atom " + std::to_string(j) + " is the zero vector");
    atoms.col(j) /= n;
  }
  return Dictionary(std::move(atoms), class_tag, std::move(meta));
}

double Dictionary::max_norm_deviation() const {
  if (atoms_.cols() == 0) return 0.0;
  return (atoms_.colwise().norm().array() - 1.0).abs().maxCoeff();
}

void Dictionary::set_atoms(const std::vector<Index>& cols, const Eigen::MatrixXd& values) {
  if (static_cast<Index>(cols.size()) != values.cols() || values.rows() != signal_len())
    throw ArgumentError("set_atoms: shape mismatch");
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto v = values.col(static_cast<Index>(i));
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > kNormTolerance)
      throw ArgumentError("set_atoms: replacement atom is not unit norm");
    if (cols[i] < 0 || cols[i] >= n_atoms()) throw ArgumentError("set_atoms: index out of range");
  }
  for (std::size_t i = 0; i < cols.size(); ++i) atoms_.col(cols[i]) = values.col(static_cast<Index>(i));
}

Eigen::VectorXd SparseCode::dense() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_atoms);
  for (std::size_t i = 0; i < support.size(); ++i) x[support[i]] = values[i];
  return x;
}

void CodingConfig::validate(Index n_atoms) const {
  if (max_sparsity < 1) throw ArgumentError("max_sparsity must be positive");
  if (max_sparsity > n_atoms)
    throw ArgumentError("max_sparsity " + std::to_string(max_sparsity) + " exceeds n_atoms " +
                        std::to_string(n_atoms));
  if (!(residual_tol >= 0.0)) throw ArgumentError("residual_tol must be nonnegative");
}

std::string to_string(StopRule rule) {
  return rule == StopRule::fixed_k ? "fixed_k" : "residual_or_k";
}

StopRule stop_rule_from_string(const std::string& s) {
  if (s == "fixed_k") return StopRule::fixed_k;
  if (s == "residual_or_k") return StopRule::residual_or_k;
  throw ArgumentError("unknown stop rule '" + s + "'");
}

// --- OMP ------------------------------------------------------------------

namespace {

// Squared pivot below this (relative to the atom's squared norm) means the
// new atom lies in the span of those already selected.
constexpr double kCollinearTol = 1e-10;
// Correlations at or below this fraction of ||y|| are treated as zero.
constexpr double kZeroCorrelation = 1e-14;

}  // namespace

SparseCode omp(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& signal,
               const CodingConfig& cfg) {
  cfg.validate(dict.n_atoms());
  const Eigen::MatrixXd& D = dict.atoms();
  const Index n = D.rows();
  const Index m = D.cols();
  if (signal.size() != n)
    throw ArgumentError("signal length " + std::to_string(signal.size()) +
                        " does not match dictionary signal length " + std::to_string(n));
  if (!signal.allFinite()) throw ArgumentError("signal contains non-finite samples");

  SparseCode code;
  code.n_atoms = m;
  const int k = cfg.max_sparsity;
  const double zero_corr = kZeroCorrelation * signal.norm();

  Eigen::VectorXd residual = signal;
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(k, k);  // lower factor of the selected Gram
  Eigen::MatrixXd selected(n, k);
  Eigen::VectorXd projections(k);  // selected atoms dotted with the signal
  Eigen::VectorXd coef;
  std::vector<char> in_support(static_cast<std::size_t>(m), 0);
  Index s = 0;

  const auto solve = [&](const Eigen::VectorXd& rhs) {
    const auto lower = chol.topLeftCorner(s, s).triangularView<Eigen::Lower>();
    Eigen::VectorXd z = lower.solve(rhs);
    return Eigen::VectorXd(lower.transpose().solve(z));
  };

  while (s < k) {
    if (cfg.stop_rule == StopRule::residual_or_k && residual.norm() <= cfg.residual_tol) break;

    const Eigen::VectorXd corr = D.transpose() * residual;
    Index best = -1;
    double best_abs = zero_corr;
    for (Index j = 0; j < m; ++j) {
      if (in_support[static_cast<std::size_t>(j)]) continue;
      const double a = std::abs(corr[j]);
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0) break;

    const auto atom = D.col(best);
    const double atom_sq = atom.squaredNorm();
    double pivot_sq = atom_sq;
    if (s > 0) {
      const Eigen::VectorXd cross = selected.leftCols(s).transpose() * atom;
      const Eigen::VectorXd w =
          chol.topLeftCorner(s, s).triangularView<Eigen::Lower>().solve(cross);
      pivot_sq -= w.squaredNorm();
      if (pivot_sq <= kCollinearTol * atom_sq) {
        code.rank_deficient = true;
        break;
      }
      chol.row(s).head(s) = w.transpose();
    }
    chol(s, s) = std::sqrt(pivot_sq);
    selected.col(s) = atom;
    projections[s] = atom.dot(signal);
    in_support[static_cast<std::size_t>(best)] = 1;
    code.support.push_back(best);
    ++s;

    coef = solve(projections.head(s));
    residual = signal - selected.leftCols(s) * coef;
  }

  if (s > 0) {
    // One step of iterative refinement tightens residual orthogonality.
    coef += solve(selected.leftCols(s).transpose() * residual);
    code.values.assign(coef.data(), coef.data() + s);
  }
  return code;
}

Eigen::VectorXd reconstruct(const Dictionary& dict, const SparseCode& code) {
  if (code.n_atoms != dict.n_atoms())
    throw ArgumentError("code refers to " + std::to_string(code.n_atoms) +
                        " atoms, dictionary has " + std::to_string(dict.n_atoms()));
  if (code.support.size() != code.values.size())
    throw ArgumentError("code support and values differ in length");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dict.signal_len());
  for (std::size_t i = 0; i < code.support.size(); ++i) {
    const Index j = code.support[i];
    if (j < 0 || j >= dict.n_atoms()) throw ArgumentError("code index out of range");
    y += code.values[i] * dict.atom(j);
  }
  return y;
}

double reconstruction_error(const Eigen::Ref<const Eigen::VectorXd>& signal,
                            const Dictionary& dict, const SparseCode& code) {
  if (signal.size() != dict.signal_len()) throw ArgumentError("signal length mismatch");
  return (signal - reconstruct(dict, code)).squaredNorm();
}

double normalized_error(const Eigen::Ref<const Eigen::VectorXd>& signal,
                        const Eigen::Ref<const Eigen::VectorXd>& approx) {
  if (signal.size() != approx.size()) throw ArgumentError("length mismatch");
  const double denom = signal.norm();
  if (!(denom > 0.0)) throw ArgumentError("normalized error of a zero-norm signal");
  return (signal - approx).norm() / denom;
}

// --- batch kernels --------------------------------------------------------

std::vector<SparseCode> batch_code(const Dictionary& dict, const Eigen::MatrixXd& signals,
                                   const CodingConfig& cfg) {
  cfg.validate(dict.n_atoms());
  if (signals.cols() > 0 && signals.rows() != dict.signal_len())
    throw ArgumentError("signal length mismatch in batch_code");
  std::vector<SparseCode> out(static_cast<std::size_t>(signals.cols()));
  detail::ExceptionSlot errors;
  const Index count = signals.cols();
#pragma omp parallel for schedule(dynamic, 4)
  for (Index j = 0; j < count; ++j)
    errors.run([&] { out[static_cast<std::size_t>(j)] = omp(dict, signals.col(j), cfg); });
  errors.rethrow();
  return out;
}

std::vector<SparseCode> batch_code(const Dictionary& dict, const EpochMatrix& epochs,
                                   const CodingConfig& cfg) {
  return batch_code(dict, epochs.samples(), cfg);
}

double mean_normalized_error(const Dictionary& dict, const Eigen::MatrixXd& signals,
                             const CodingConfig& cfg) {
  if (signals.cols() == 0) return 0.0;
  const auto codes = batch_code(dict, signals, cfg);
  double total = 0.0;
  Index counted = 0;
  for (Index j = 0; j < signals.cols(); ++j) {
    if (!(signals.col(j).norm() > 0.0)) continue;
    total += normalized_error(signals.col(j), reconstruct(dict, codes[static_cast<std::size_t>(j)]));
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

namespace serial {

std::vector<SparseCode> batch_code(const Dictionary& dict, const Eigen::MatrixXd& signals,
                                   const CodingConfig& cfg) {
  cfg.validate(dict.n_atoms());
  if (signals.cols() > 0 && signals.rows() != dict.signal_len())
    throw ArgumentError("signal length mismatch in batch_code");
  std::vector<SparseCode> out;
  out.reserve(static_cast<std::size_t>(signals.cols()));
  for (Index j = 0; j < signals.cols(); ++j) out.push_back(omp(dict, signals.col(j), cfg));
  return out;
}

}  // namespace serial

}  // namespace eegsrc
