#pragma once

#include "eegsrc/dataset.hpp"
#include "eegsrc/sparse_coding.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace eegsrc {

enum class InitStrategy { data_columns, gaussian };

std::string to_string(InitStrategy s);
InitStrategy init_strategy_from_string(const std::string& s);

struct LearnConfig {
  Index n_atoms = 1024;
  CodingConfig coding{};
  int passes = 3;
  InitStrategy init_strategy = InitStrategy::data_columns;
  std::uint64_t init_seed = 0;
  /// Regularizer of the coefficient Gram: G starts as delta * I.
  double c_inverse_init_scale = 1e-2;
  /// Lower bound on the replay weight of a correlated past signal.
  double weight_floor = 0.0;
  /// Re-code every stored signal at the end of each pass (off by default).
  bool recode_each_pass = false;
  /// MOD iterations when the batch baseline is used.
  int mod_iters = 20;

  void validate() const;
};

/// Draws the starting dictionary. data_columns: min(n_atoms, L) training
/// signals sampled with replacement, the rest Gaussian; gaussian: all
/// Gaussian. Columns are unit-normalized.
Dictionary init_dictionary(const EpochMatrix& train, const LearnConfig& cfg);
Dictionary init_dictionary(const Eigen::MatrixXd& train, const LearnConfig& cfg);

/// max(floor, |cos angle(a, b)|).
double correction_weight(const Eigen::Ref<const Eigen::VectorXd>& a,
                         const Eigen::Ref<const Eigen::VectorXd>& b, double weight_floor);

struct CorrelatedSet {
  std::vector<Index> signals;  // Omega, ascending signal ids
  std::vector<Index> atoms;    // active set A, ascending atom ids
};

/// One (signal, code) pair presented to the restricted RLS sweep.
struct ReplayPair {
  Index signal_id = -1;
  double weight = 1.0;
  SparseCode code;  // over the full dictionary; support lies inside A
};

struct StepReport {
  Index signal_id = -1;
  CorrelatedSet correlated;
  std::vector<ReplayPair> pairs;  // replayed history first, the new signal last
  SparseCode first_code;          // code before the update
  SparseCode final_code;          // code stored after the update
  bool inverse_reset = false;
};

/// Online correlation-based weighted RLS dictionary learner.
///
/// Per step: code the new signal, collect every stored signal whose support
/// shares an atom with it (Omega), and form the active atom set A from the
/// union of those supports. The sub-dictionary D[:, A] is then swept with
/// the standard RLS dictionary identities over the pairs
/// (sqrt(w_j) y_j, sqrt(w_j) x_j) for j in Omega followed by (y, x):
///
///     u    = Ginv x
///     beta = 1 / (1 + x'u)
///     e    = y - D_A x
///     D_A += beta e u'
///     Ginv -= beta u u'
///
/// where Ginv is the inverse of the A-block of the coefficient Gram
/// G = delta I + sum of weighted x x'. The updated columns are renormalized
/// and written back, and the new signal is re-coded and stored.
///
/// The Gram is kept sparse (only co-used atoms have off-diagonal entries).
/// The inverse of the most recent A-block is cached; a different active set
/// rebuilds it from the Gram, so atoms never touched before enter with
/// diagonal delta.
class CbwrlsuLearner {
 public:
  CbwrlsuLearner(Dictionary init, LearnConfig cfg);

  /// Presents a signal not seen before; it gets the next signal id.
  StepReport step(const Eigen::Ref<const Eigen::VectorXd>& y);
  /// Presents signal `signal_id` again (a later pass). Its stored code is
  /// replaced and it is excluded from its own correlated set.
  StepReport step(const Eigen::Ref<const Eigen::VectorXd>& y, Index signal_id);

  CorrelatedSet find_correlated(const std::vector<Index>& support,
                                std::optional<Index> exclude = std::nullopt) const;
  double correction_weight(const Eigen::Ref<const Eigen::VectorXd>& y, Index old_index) const;

  /// Re-codes every stored signal against the current dictionary.
  void recode_all();

  const Dictionary& dictionary() const { return dict_; }
  const LearnConfig& config() const { return cfg_; }
  Index seen_count() const { return seen_count_; }
  Index history_size() const { return static_cast<Index>(signals_.size()); }
  const SparseCode& stored_code(Index signal_id) const;
  const std::vector<std::set<Index>>& usage() const { return usage_; }
  int reset_count() const { return reset_count_; }

  /// Atom set and inverse of its Gram block from the last step.
  const std::vector<Index>& active_atoms() const { return cached_atoms_; }
  const Eigen::MatrixXd& active_inverse() const { return cached_inverse_; }
  /// Dense copy of G restricted to `atoms`.
  Eigen::MatrixXd gram_block(const std::vector<Index>& atoms) const;

  /// Atoms that have been in some active set.
  const std::vector<char>& touched() const { return touched_; }
  /// Histogram of active-set sizes over all steps.
  const std::map<Index, Index>& active_size_histogram() const { return active_hist_; }

 private:
  StepReport run_step(const Eigen::Ref<const Eigen::VectorXd>& y, Index signal_id);
  void load_inverse(const std::vector<Index>& atoms);
  void reset_block(const std::vector<Index>& atoms);
  void add_to_gram(const SparseCode& code, double weight);
  void set_code(Index signal_id, SparseCode code);

  Dictionary dict_;
  LearnConfig cfg_;
  std::vector<Eigen::VectorXd> signals_;
  std::vector<SparseCode> codes_;
  std::vector<std::set<Index>> usage_;  // atom -> signal ids using it

  Eigen::VectorXd gram_diag_;
  std::vector<std::unordered_map<Index, double>> gram_off_;  // symmetric

  std::vector<Index> cached_atoms_;
  Eigen::MatrixXd cached_inverse_;

  std::vector<char> touched_;
  std::map<Index, Index> active_hist_;
  Index seen_count_ = 0;
  int reset_count_ = 0;
};

struct TrainingLog {
  std::string algorithm;
  /// Mean normalized coding error of the training set: entry 0 is the
  /// initial dictionary, entry p is after pass (or iteration) p.
  std::vector<double> pass_errors;
  std::map<Index, Index> active_size_histogram;
  int reset_count = 0;
  Index touched_atoms = 0;
};

std::string training_log_json(const TrainingLog& log);

Dictionary train_cbwrlsu(const EpochMatrix& train, const LearnConfig& cfg,
                         TrainingLog* log = nullptr);
Dictionary train_cbwrlsu(const Eigen::MatrixXd& train, const LearnConfig& cfg,
                         TrainingLog* log = nullptr);
/// Same as train_cbwrlsu but starting from a given dictionary.
Dictionary train_cbwrlsu_from(const Eigen::MatrixXd& train, Dictionary init,
                              const LearnConfig& cfg, TrainingLog* log = nullptr);

/// Unnormalized MOD update: Y X' (X X' + lambda I)^-1.
Eigen::MatrixXd mod_update(const Eigen::MatrixXd& signals, const Eigen::MatrixXd& codes,
                           double lambda);

/// Batch baseline: alternate OMP coding and the MOD update `iters` times,
/// with ridge lambda = 1e-6 trace(XX')/M. Atoms no signal uses keep their
/// previous value.
Dictionary train_mod(const EpochMatrix& train, const LearnConfig& cfg, int iters,
                     TrainingLog* log = nullptr);
Dictionary train_mod(const Eigen::MatrixXd& train, const LearnConfig& cfg, int iters,
                     TrainingLog* log = nullptr);
Dictionary train_mod_from(const Eigen::MatrixXd& train, Dictionary init, const LearnConfig& cfg,
                          int iters, TrainingLog* log = nullptr);

}  // namespace eegsrc
