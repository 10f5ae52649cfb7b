#include "eegsrc/dictionary_learning.hpp"

#include "eegsrc/errors.hpp"
#include "eegsrc/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eegsrc {

std::string to_string(InitStrategy s) {
  return s == InitStrategy::data_columns ? "data_columns" : "gaussian";
}

InitStrategy init_strategy_from_string(const std::string& s) {
  if (s == "data_columns") return InitStrategy::data_columns;
  if (s == "gaussian") return InitStrategy::gaussian;
  throw ArgumentError("unknown init strategy '" + s + "'");
}

void LearnConfig::validate() const {
  if (n_atoms < 1) throw ArgumentError("n_atoms must be positive");
  coding.validate(n_atoms);
  if (passes < 1) throw ArgumentError("passes must be >= 1");
  if (!(c_inverse_init_scale > 0.0) || !std::isfinite(c_inverse_init_scale))
    throw ArgumentError("c_inverse_init_scale must be positive");
  if (!(weight_floor >= 0.0 && weight_floor <= 1.0))
    throw ArgumentError("weight_floor must lie in [0, 1]");
  if (mod_iters < 1) throw ArgumentError("mod_iters must be >= 1");
}

// --- initialization -------------------------------------------------------

Dictionary init_dictionary(const Eigen::MatrixXd& train, const LearnConfig& cfg) {
  cfg.validate();
  if (train.cols() == 0) throw ArgumentError("cannot initialize a dictionary from an empty training set");
  const Index n = train.rows();
  const Index m = cfg.n_atoms;
  Rng rng = Rng::stream(cfg.init_seed, 0);

  const auto gaussian_column = [&](Eigen::Ref<Eigen::VectorXd> col) {
    do {
      for (Index i = 0; i < n; ++i) col[i] = rng.normal();
    } while (!(col.norm() > 0.0));
    col.normalize();
  };

  Eigen::MatrixXd atoms(n, m);
  Index filled = 0;
  if (cfg.init_strategy == InitStrategy::data_columns) {
    const Index from_data = std::min(m, train.cols());
    for (; filled < from_data; ++filled) {
      const auto src = train.col(static_cast<Index>(rng.below(static_cast<std::size_t>(train.cols()))));
      const double norm = src.norm();
      if (norm > 0.0)
        atoms.col(filled) = src / norm;
      else
        gaussian_column(atoms.col(filled));
    }
  }
  for (; filled < m; ++filled) gaussian_column(atoms.col(filled));

  LearnMeta meta;
  meta.algorithm = "init:" + to_string(cfg.init_strategy);
  meta.seed = cfg.init_seed;
  meta.n_train = train.cols();
  return Dictionary(std::move(atoms), std::nullopt, meta);
}

Dictionary init_dictionary(const EpochMatrix& train, const LearnConfig& cfg) {
  return init_dictionary(train.samples(), cfg);
}

double correction_weight(const Eigen::Ref<const Eigen::VectorXd>& a,
                         const Eigen::Ref<const Eigen::VectorXd>& b, double weight_floor) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ArgumentError("correction weight of a zero-norm signal");
  const double cosine = std::min(1.0, std::abs(a.dot(b)) / (na * nb));
  return std::max(weight_floor, cosine);
}

// --- learner --------------------------------------------------------------

CbwrlsuLearner::CbwrlsuLearner(Dictionary init, LearnConfig cfg)
    : dict_(std::move(init)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (dict_.n_atoms() != cfg_.n_atoms)
    throw ArgumentError("initial dictionary has " + std::to_string(dict_.n_atoms()) +
                        " atoms, config asks for " + std::to_string(cfg_.n_atoms));
  const auto m = static_cast<std::size_t>(dict_.n_atoms());
  usage_.resize(m);
  gram_diag_ = Eigen::VectorXd::Constant(dict_.n_atoms(), cfg_.c_inverse_init_scale);
  gram_off_.resize(m);
  touched_.assign(m, 0);
}

const SparseCode& CbwrlsuLearner::stored_code(Index signal_id) const {
  if (signal_id < 0 || signal_id >= history_size()) throw ArgumentError("unknown signal id");
  return codes_[static_cast<std::size_t>(signal_id)];
}

CorrelatedSet CbwrlsuLearner::find_correlated(const std::vector<Index>& support,
                                              std::optional<Index> exclude) const {
  std::set<Index> omega;
  for (Index a : support)
    for (Index j : usage_[static_cast<std::size_t>(a)])
      if (!exclude || j != *exclude) omega.insert(j);

  std::set<Index> atoms(support.begin(), support.end());
  for (Index j : omega)
    for (Index a : codes_[static_cast<std::size_t>(j)].support) atoms.insert(a);

  return {std::vector<Index>(omega.begin(), omega.end()),
          std::vector<Index>(atoms.begin(), atoms.end())};
}

double CbwrlsuLearner::correction_weight(const Eigen::Ref<const Eigen::VectorXd>& y,
                                         Index old_index) const {
  if (old_index < 0 || old_index >= history_size())
    throw ArgumentError("correction weight: signal " + std::to_string(old_index) +
                        " is not in the history");
  return eegsrc::correction_weight(y, signals_[static_cast<std::size_t>(old_index)],
                                   cfg_.weight_floor);
}

Eigen::MatrixXd CbwrlsuLearner::gram_block(const std::vector<Index>& atoms) const {
  const auto n = static_cast<Index>(atoms.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  std::unordered_map<Index, Index> local;
  for (Index i = 0; i < n; ++i) local[atoms[static_cast<std::size_t>(i)]] = i;
  for (Index i = 0; i < n; ++i) {
    const Index a = atoms[static_cast<std::size_t>(i)];
    g(i, i) = gram_diag_[a];
    for (const auto& [b, v] : gram_off_[static_cast<std::size_t>(a)]) {
      auto it = local.find(b);
      if (it != local.end()) g(i, it->second) = v;
    }
  }
  return g;
}

void CbwrlsuLearner::reset_block(const std::vector<Index>& atoms) {
  const std::set<Index> block(atoms.begin(), atoms.end());
  for (Index a : atoms) {
    gram_diag_[a] = cfg_.c_inverse_init_scale;
    auto& row = gram_off_[static_cast<std::size_t>(a)];
    for (auto it = row.begin(); it != row.end();) {
      if (block.count(it->first)) {
        gram_off_[static_cast<std::size_t>(it->first)].erase(a);
        it = row.erase(it);
      } else {
        ++it;
      }
    }
  }
  const auto n = static_cast<Index>(atoms.size());
  cached_atoms_ = atoms;
  cached_inverse_ = Eigen::MatrixXd::Identity(n, n) / cfg_.c_inverse_init_scale;
  ++reset_count_;
}

void CbwrlsuLearner::load_inverse(const std::vector<Index>& atoms) {
  if (atoms == cached_atoms_ && cached_inverse_.rows() == static_cast<Index>(atoms.size())) return;
  const Eigen::MatrixXd g = gram_block(atoms);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  Eigen::MatrixXd inv;
  if (llt.info() == Eigen::Success)
    inv = llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
  if (llt.info() != Eigen::Success || !inv.allFinite()) {
    reset_block(atoms);
    return;
  }
  cached_atoms_ = atoms;
  cached_inverse_ = std::move(inv);
}

void CbwrlsuLearner::add_to_gram(const SparseCode& code, double weight) {
  for (std::size_t p = 0; p < code.support.size(); ++p) {
    const Index a = code.support[p];
    gram_diag_[a] += weight * code.values[p] * code.values[p];
    for (std::size_t q = 0; q < code.support.size(); ++q) {
      if (q == p) continue;
      gram_off_[static_cast<std::size_t>(a)][code.support[q]] +=
          weight * code.values[p] * code.values[q];
    }
  }
}

void CbwrlsuLearner::set_code(Index signal_id, SparseCode code) {
  auto& slot = codes_[static_cast<std::size_t>(signal_id)];
  for (Index a : slot.support) usage_[static_cast<std::size_t>(a)].erase(signal_id);
  for (Index a : code.support) usage_[static_cast<std::size_t>(a)].insert(signal_id);
  slot = std::move(code);
}

StepReport CbwrlsuLearner::step(const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != dict_.signal_len())
    throw ArgumentError("training signal length " + std::to_string(y.size()) +
                        " does not match dictionary signal length " +
                        std::to_string(dict_.signal_len()));
  signals_.emplace_back(y);
  codes_.emplace_back();
  codes_.back().n_atoms = dict_.n_atoms();
  return run_step(y, history_size() - 1);
}

StepReport CbwrlsuLearner::step(const Eigen::Ref<const Eigen::VectorXd>& y, Index signal_id) {
  if (signal_id < 0 || signal_id >= history_size())
    throw ArgumentError("unknown signal id " + std::to_string(signal_id));
  if (y.size() != dict_.signal_len()) throw ArgumentError("training signal length mismatch");
  signals_[static_cast<std::size_t>(signal_id)] = y;
  return run_step(y, signal_id);
}

StepReport CbwrlsuLearner::run_step(const Eigen::Ref<const Eigen::VectorXd>& y, Index signal_id) {
  StepReport report;
  report.signal_id = signal_id;
  report.first_code = omp(dict_, y, cfg_.coding);
  report.correlated = find_correlated(report.first_code.support, signal_id);
  const std::vector<Index>& active = report.correlated.atoms;
  const auto n_active = static_cast<Index>(active.size());
  ++active_hist_[n_active];

  for (Index j : report.correlated.signals) {
    report.pairs.push_back(
        {j, correction_weight(y, j), codes_[static_cast<std::size_t>(j)]});
  }
  report.pairs.push_back({signal_id, 1.0, report.first_code});

  if (n_active > 0) {
    for (Index a : active) touched_[static_cast<std::size_t>(a)] = 1;
    const int resets_before = reset_count_;
    load_inverse(active);

    std::unordered_map<Index, Index> local;
    for (Index i = 0; i < n_active; ++i) local[active[static_cast<std::size_t>(i)]] = i;

    Eigen::MatrixXd sub(dict_.signal_len(), n_active);
    for (Index i = 0; i < n_active; ++i) sub.col(i) = dict_.atom(active[static_cast<std::size_t>(i)]);

    Eigen::VectorXd u(n_active);
    Eigen::VectorXd e(dict_.signal_len());
    for (const ReplayPair& pair : report.pairs) {
      const SparseCode& code = pair.code;
      if (code.empty()) continue;
      const double sw = std::sqrt(pair.weight);
      const Eigen::VectorXd& target = signals_[static_cast<std::size_t>(pair.signal_id)];

      // e = sw*y - D_A (sw*x), u = Ginv (sw*x); x has at most k nonzeros.
      e = sw * target;
      u.setZero();
      for (std::size_t p = 0; p < code.support.size(); ++p) {
        const Index li = local.at(code.support[p]);
        const double xv = sw * code.values[p];
        e.noalias() -= xv * sub.col(li);
        u.noalias() += xv * cached_inverse_.col(li);
      }
      double xu = 0.0;
      for (std::size_t p = 0; p < code.support.size(); ++p)
        xu += sw * code.values[p] * u[local.at(code.support[p])];
      double beta = 1.0 / (1.0 + xu);

      if (!std::isfinite(beta) || !u.allFinite()) {
        reset_block(active);
        u.setZero();
        for (std::size_t p = 0; p < code.support.size(); ++p)
          u[local.at(code.support[p])] = sw * code.values[p] / cfg_.c_inverse_init_scale;
        xu = 0.0;
        for (std::size_t p = 0; p < code.support.size(); ++p)
          xu += sw * code.values[p] * u[local.at(code.support[p])];
        beta = 1.0 / (1.0 + xu);
      }

      sub.noalias() += (beta * e) * u.transpose();
      cached_inverse_.noalias() -= (beta * u) * u.transpose();
      add_to_gram(code, pair.weight);

      if (!cached_inverse_.allFinite()) {
        // Rebuild from the Gram, which now includes this pair.
        cached_atoms_.clear();
        load_inverse(active);
      }
    }
    report.inverse_reset = reset_count_ != resets_before;

    for (Index i = 0; i < n_active; ++i) {
      const double norm = sub.col(i).norm();
      if (norm > 0.0 && std::isfinite(norm))
        sub.col(i) /= norm;
      else
        sub.col(i) = dict_.atom(active[static_cast<std::size_t>(i)]);
    }
    dict_.set_atoms(active, sub);
  }

  report.final_code = omp(dict_, y, cfg_.coding);
  set_code(signal_id, report.final_code);
  ++seen_count_;
  return report;
}

void CbwrlsuLearner::recode_all() {
  for (Index j = 0; j < history_size(); ++j)
    set_code(j, omp(dict_, signals_[static_cast<std::size_t>(j)], cfg_.coding));
}

// --- training drivers -----------------------------------------------------

std::string training_log_json(const TrainingLog& log) {
  nlohmann::ordered_json j;
  j["algorithm"] = log.algorithm;
  j["pass_mean_normalized_error"] = log.pass_errors;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [size, count] : log.active_size_histogram) hist[std::to_string(size)] = count;
  j["active_set_size_histogram"] = hist;
  j["reset_count"] = log.reset_count;
  j["touched_atoms"] = log.touched_atoms;
  return j.dump(2);
}

Dictionary train_cbwrlsu_from(const Eigen::MatrixXd& train, Dictionary init,
                              const LearnConfig& cfg, TrainingLog* log) {
  cfg.validate();
  if (train.cols() == 0) throw ArgumentError("empty training set");
  if (train.rows() != init.signal_len()) throw ArgumentError("training signal length mismatch");

  if (log) {
    log->algorithm = "cbwrlsu";
    log->pass_errors = {mean_normalized_error(init, train, cfg.coding)};
  }
  CbwrlsuLearner learner(std::move(init), cfg);
  std::vector<Index> signal_id(static_cast<std::size_t>(train.cols()), -1);
  std::vector<Index> order(static_cast<std::size_t>(train.cols()));
  for (int pass = 1; pass <= cfg.passes; ++pass) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = Rng::stream(cfg.init_seed, 0x9A55ULL + static_cast<std::uint64_t>(pass));
    rng.shuffle(order.begin(), order.end());
    for (Index idx : order) {
      Index& id = signal_id[static_cast<std::size_t>(idx)];
      if (id < 0)
        id = learner.step(train.col(idx)).signal_id;
      else
        learner.step(train.col(idx), id);
    }
    if (cfg.recode_each_pass) learner.recode_all();
    if (log) log->pass_errors.push_back(mean_normalized_error(learner.dictionary(), train, cfg.coding));
  }

  if (log) {
    log->active_size_histogram = learner.active_size_histogram();
    log->reset_count = learner.reset_count();
    log->touched_atoms = std::count(learner.touched().begin(), learner.touched().end(), 1);
  }
  Dictionary out = learner.dictionary();
  out.set_learn_meta({"cbwrlsu", cfg.passes, cfg.init_seed, train.cols()});
  return out;
}

Dictionary train_cbwrlsu(const Eigen::MatrixXd& train, const LearnConfig& cfg, TrainingLog* log) {
  return train_cbwrlsu_from(train, init_dictionary(train, cfg), cfg, log);
}

Dictionary train_cbwrlsu(const EpochMatrix& train, const LearnConfig& cfg, TrainingLog* log) {
  return train_cbwrlsu(train.samples(), cfg, log);
}

Eigen::MatrixXd mod_update(const Eigen::MatrixXd& signals, const Eigen::MatrixXd& codes,
                           double lambda) {
  if (signals.cols() != codes.cols()) throw ArgumentError("mod_update: column count mismatch");
  Eigen::MatrixXd gram = codes * codes.transpose();
  gram.diagonal().array() += lambda;
  // D G = Y X'  <=>  G D' = X Y'  (G symmetric)
  return gram.ldlt().solve(codes * signals.transpose()).transpose();
}

Dictionary train_mod_from(const Eigen::MatrixXd& train, Dictionary init, const LearnConfig& cfg,
                          int iters, TrainingLog* log) {
  cfg.validate();
  if (iters < 1) throw ArgumentError("MOD needs at least one iteration");
  if (train.cols() == 0) throw ArgumentError("empty training set");
  if (train.rows() != init.signal_len()) throw ArgumentError("training signal length mismatch");

  Dictionary dict = std::move(init);
  const Index m = dict.n_atoms();
  if (log) {
    log->algorithm = "mod";
    log->pass_errors = {mean_normalized_error(dict, train, cfg.coding)};
  }
  for (int it = 0; it < iters; ++it) {
    const auto codes = batch_code(dict, train, cfg.coding);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, train.cols());
    for (Index j = 0; j < train.cols(); ++j) x.col(j) = codes[static_cast<std::size_t>(j)].dense();
    const double trace = x.squaredNorm();
    if (!(trace > 0.0)) break;
    const double lambda = 1e-6 * trace / static_cast<double>(m);
    Eigen::MatrixXd atoms = mod_update(train, x, lambda);
    if (!atoms.allFinite()) throw NumericError("MOD update produced non-finite atoms");
    for (Index a = 0; a < m; ++a) {
      const double norm = atoms.col(a).norm();
      if (x.row(a).squaredNorm() == 0.0 || !(norm > 0.0))
        atoms.col(a) = dict.atom(a);
      else
        atoms.col(a) /= norm;
    }
    dict = Dictionary(std::move(atoms));
    if (log) log->pass_errors.push_back(mean_normalized_error(dict, train, cfg.coding));
  }
  dict.set_learn_meta({"mod", iters, cfg.init_seed, train.cols()});
  return dict;
}

Dictionary train_mod(const Eigen::MatrixXd& train, const LearnConfig& cfg, int iters,
                     TrainingLog* log) {
  return train_mod_from(train, init_dictionary(train, cfg), cfg, iters, log);
}

Dictionary train_mod(const EpochMatrix& train, const LearnConfig& cfg, int iters,
                     TrainingLog* log) {
  return train_mod(train.samples(), cfg, iters, log);
}

}  // namespace eegsrc
