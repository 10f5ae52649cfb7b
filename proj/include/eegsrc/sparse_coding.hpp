#pragma once

#include "eegsrc/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eegsrc {

struct LearnMeta {
  std::string algorithm = "none";
  int passes = 0;
  std::uint64_t seed = 0;
  Index n_train = 0;
};

/// Column-atom matrix (signal_len x n_atoms) with unit-norm atoms.
class Dictionary {
 public:
  static constexpr double kNormTolerance = 1e-9;

  Dictionary() = default;
  /// Throws ArgumentError unless every column has unit norm within kNormTolerance.
  explicit Dictionary(Eigen::MatrixXd atoms, std::optional<int> class_tag = std::nullopt,
                      LearnMeta meta = {});
  /// Normalizes the columns first; zero columns are rejected.
  static Dictionary normalized(Eigen::MatrixXd atoms, std::optional<int> class_tag = std::nullopt,
                               LearnMeta meta = {});

  Index signal_len() const { return atoms_.rows(); }
  Index n_atoms() const { return atoms_.cols(); }
  const Eigen::MatrixXd& atoms() const { return atoms_; }
  Eigen::MatrixXd::ConstColXpr atom(Index j) const { return atoms_.col(j); }
  const std::optional<int>& class_tag() const { return class_tag_; }
  const LearnMeta& learn_meta() const { return meta_; }

  void set_class_tag(std::optional<int> tag) { class_tag_ = tag; }
  void set_learn_meta(LearnMeta meta) { meta_ = std::move(meta); }
  /// Overwrites columns `cols` with the columns of `values`, which must be unit norm.
  void set_atoms(const std::vector<Index>& cols, const Eigen::MatrixXd& values);

  /// Largest deviation of a column norm from 1.
  double max_norm_deviation() const;

 private:
  Eigen::MatrixXd atoms_;
  std::optional<int> class_tag_;
  LearnMeta meta_;
};

struct SparseCode {
  std::vector<Index> support;  // in selection order
  std::vector<double> values;  // aligned with support
  Index n_atoms = 0;
  /// Set when a selected atom was collinear with the ones before it; the
  /// atom was dropped and coding stopped early.
  bool rank_deficient = false;

  std::size_t size() const { return support.size(); }
  bool empty() const { return support.empty(); }
  Eigen::VectorXd dense() const;
};

enum class StopRule { fixed_k, residual_or_k };

struct CodingConfig {
  int max_sparsity = 10;
  double residual_tol = 0.0;
  StopRule stop_rule = StopRule::fixed_k;

  void validate(Index n_atoms) const;
};

std::string to_string(StopRule rule);
StopRule stop_rule_from_string(const std::string& s);

/// Orthogonal matching pursuit. Each iteration picks the atom with the
/// largest |<atom, residual>| (lowest index on ties), then refits all
/// selected coefficients by least squares through an incrementally grown
/// Cholesky factor of the selected Gram matrix.
SparseCode omp(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& signal,
               const CodingConfig& cfg);

Eigen::VectorXd reconstruct(const Dictionary& dict, const SparseCode& code);

/// ||signal - dict * code||^2
double reconstruction_error(const Eigen::Ref<const Eigen::VectorXd>& signal,
                            const Dictionary& dict, const SparseCode& code);

/// ||signal - approx|| / ||signal||
double normalized_error(const Eigen::Ref<const Eigen::VectorXd>& signal,
                        const Eigen::Ref<const Eigen::VectorXd>& approx);

/// OMP over every column, OpenMP-parallel, output in column order.
std::vector<SparseCode> batch_code(const Dictionary& dict, const Eigen::MatrixXd& signals,
                                   const CodingConfig& cfg);
std::vector<SparseCode> batch_code(const Dictionary& dict, const EpochMatrix& epochs,
                                   const CodingConfig& cfg);

/// Mean normalized coding error over the nonzero columns of `signals`.
double mean_normalized_error(const Dictionary& dict, const Eigen::MatrixXd& signals,
                             const CodingConfig& cfg);

namespace serial {
/// Single-threaded reference for batch_code.
std::vector<SparseCode> batch_code(const Dictionary& dict, const Eigen::MatrixXd& signals,
                                   const CodingConfig& cfg);
}  // namespace serial

// --- serialization --------------------------------------------------------

/// Writes <stem>.json (metadata + SHA-256 of the payload) and <stem>.bin
/// (float64 little-endian, column-major).
void save_dictionary(const Dictionary& dict, const std::filesystem::path& stem);
/// Verifies the checksum, shape, and unit norms.
Dictionary load_dictionary(const std::filesystem::path& stem);

}  // namespace eegsrc
