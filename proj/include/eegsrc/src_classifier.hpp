#pragma once

#include "eegsrc/dataset.hpp"
#include "eegsrc/dictionary_learning.hpp"
#include "eegsrc/sparse_coding.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eegsrc {

enum class Algorithm { cbwrlsu, mod };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

/// How raw epochs were turned into model inputs.
struct Preprocessing {
  Index decimation = 1;
  bool remove_mean = false;
  /// Raw epoch length the model expects; 0 means "same as signal_len".
  Index input_len = 0;

  EpochMatrix apply(const EpochMatrix& raw) const;
};

struct SrcModel {
  std::vector<Dictionary> dictionaries;  // class i -> dictionary with class_tag i
  CodingConfig coding;
  std::vector<std::string> class_names;
  std::optional<CaseId> case_id;
  Preprocessing preprocessing;

  int n_classes() const { return static_cast<int>(dictionaries.size()); }
  Index signal_len() const { return dictionaries.empty() ? 0 : dictionaries.front().signal_len(); }
  void validate() const;
};

struct ClassificationResult {
  int label = -1;
  std::vector<double> residuals;  // squared reconstruction error per class
  std::vector<SparseCode> codes;  // per class; empty for joint results
};

/// One dictionary per class, each trained on that class's epochs only, all
/// with the same LearnConfig (equal atom counts whatever the class sizes).
SrcModel train_model(const LabeledDataset& train, const LearnConfig& learn, Algorithm algorithm,
                     std::vector<TrainingLog>* logs = nullptr);

ClassificationResult classify(const SrcModel& model, const Eigen::Ref<const Eigen::VectorXd>& signal);

/// Element-wise classify, OpenMP-parallel over epochs.
std::vector<ClassificationResult> classify_batch(const SrcModel& model, const EpochMatrix& epochs);
std::vector<ClassificationResult> classify_batch(const SrcModel& model, const Eigen::MatrixXd& signals);

/// One label for the whole matrix: argmin_i ||Y - D_i Z_i||_F. The
/// residuals hold the squared Frobenius norms.
ClassificationResult classify_joint(const SrcModel& model, const Eigen::MatrixXd& signals);

namespace serial {
std::vector<ClassificationResult> classify_batch(const SrcModel& model, const Eigen::MatrixXd& signals);
}  // namespace serial

struct ResidualEntry {
  double residual = 0.0;
  double normalized_error = 0.0;
};

std::vector<ResidualEntry> residual_profile(const SrcModel& model,
                                            const Eigen::Ref<const Eigen::VectorXd>& signal);

/// Index of the smallest value, lowest index on ties.
int argmin_label(const std::vector<double>& residuals);

/// Bundle directory: model.json plus class_<i>.json / class_<i>.bin.
void save_model(const SrcModel& model, const std::filesystem::path& dir);
SrcModel load_model(const std::filesystem::path& dir);

}  // namespace eegsrc
