#pragma once

#include "eegsrc/dataset.hpp"
#include "eegsrc/dictionary_learning.hpp"
#include "eegsrc/src_classifier.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace eegsrc {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int n_classes);
  explicit ConfusionMatrix(Eigen::MatrixXi counts);

  int n_classes() const { return static_cast<int>(counts_.rows()); }
  const Eigen::MatrixXi& counts() const { return counts_; }
  long total() const { return counts_.sum(); }
  void add(int truth, int predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const { return counts_ == other.counts_; }

 private:
  Eigen::MatrixXi counts_;
};

/// Fractions in [0, 1]. A ratio with a zero denominator is NaN and its
/// flag is raised; for multi-class matrices those classes are left out of
/// the macro average.
struct Metrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  bool sensitivity_undefined = false;
  bool specificity_undefined = false;
};

/// Binary: positive_class is the positive label. More than two classes:
/// macro-averaged one-vs-rest sensitivity and specificity.
Metrics metrics(const ConfusionMatrix& cm, int positive_class);

struct FoldResult {
  ConfusionMatrix confusion;
  Metrics metrics;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

struct CaseReport {
  CaseId case_id = CaseId::I;
  std::vector<std::string> class_names;
  int positive_class = 0;
  std::vector<FoldResult> per_fold;
  ConfusionMatrix pooled;
  Metrics aggregate;   // from the pooled confusion
  Metrics fold_mean;   // mean of per-fold metrics
  std::string config_snapshot;
};

struct SweepPoint {
  double snr_db = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix pooled;
  Metrics metrics;
};

struct NoiseSweepReport {
  CaseId case_id = CaseId::I;
  std::vector<SweepPoint> points;
  std::uint64_t seed = 0;
  std::string config_snapshot;
};

struct EvalConfig {
  LearnConfig learn;
  Algorithm algorithm = Algorithm::cbwrlsu;
  int k_folds = 10;
  std::uint64_t seed = 0;
  /// Extra preprocessing applied to every subset before the case is assembled.
  Preprocessing preprocessing;
  std::string snapshot;  // verbatim config text embedded in reports
};

/// Trains on one split and predicts labels for the other. The default runs
/// train_model + classify_batch; tests substitute stubs.
using FoldPredictor =
    std::function<std::vector<int>(const LabeledDataset& train, const LabeledDataset& test)>;

FoldPredictor src_predictor(const LearnConfig& learn, Algorithm algorithm);

/// Class holding subset E when present, else 0.
int positive_class_for(CaseId id);

/// 10-fold (by default) cross-validation of one case. Folds run in parallel;
/// the report is identical whatever the completion order.
CaseReport run_case(CaseId id, const SubsetMap& data, const EvalConfig& cfg);
CaseReport run_case(CaseId id, const SubsetMap& data, const EvalConfig& cfg,
                    const FoldPredictor& predictor);

std::vector<CaseReport> run_all_cases(const SubsetMap& data, const EvalConfig& cfg);

/// Default grid: -20..20 dB in steps of 2.
std::vector<double> default_snr_grid();

/// Trains once per fold on clean data and classifies the test fold
/// corrupted at each grid point. Noise for fold f, point p is seeded with
/// (seed, f, p).
NoiseSweepReport noise_sweep(CaseId id, const SubsetMap& data, const EvalConfig& cfg,
                             const std::vector<double>& snr_grid);

// --- output ---------------------------------------------------------------

std::string case_report_json(const CaseReport& report);
std::string sweep_report_json(const NoiseSweepReport& report);

/// Flat rows: case,fold,snr,accuracy,sensitivity,specificity (percent).
/// Lines starting with '#' carry the config snapshot.
void write_case_csv(const std::filesystem::path& file, const std::vector<CaseReport>& reports);
void write_sweep_csv(const std::filesystem::path& file, const std::vector<NoiseSweepReport>& reports);

/// Case / Accuracy / Sensitivity / Specificity table, pooled metrics in percent.
std::string summary_table(const std::vector<CaseReport>& reports);
std::string sweep_table(const std::vector<NoiseSweepReport>& reports);

}  // namespace eegsrc
