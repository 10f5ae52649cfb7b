#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eegsrc {

using Index = Eigen::Index;

inline constexpr Index kBonnSegmentLen = 4097;
inline constexpr int kBonnEpochsPerSubset = 100;
inline constexpr double kBonnSampleRateHz = 173.61;

enum class Subset { A, B, C, D, E };
inline constexpr std::array<Subset, 5> kAllSubsets{Subset::A, Subset::B, Subset::C, Subset::D,
                                                   Subset::E};

char subset_letter(Subset s);
Subset subset_from_letter(char c);
// Public archive file prefix: A->Z, B->O, C->N, D->F, E->S.
char subset_file_prefix(Subset s);

struct EpochInfo {
  Subset subset = Subset::A;
  int source_index = 0;
};

/// Equal-length signal segments stored one epoch per column.
class EpochMatrix {
 public:
  EpochMatrix() = default;
  explicit EpochMatrix(Index segment_len, double sample_rate_hz = kBonnSampleRateHz);
  EpochMatrix(Eigen::MatrixXd samples, std::vector<EpochInfo> info,
              double sample_rate_hz = kBonnSampleRateHz);

  Index segment_len() const { return samples_.rows(); }
  Index size() const { return samples_.cols(); }
  bool empty() const { return samples_.cols() == 0; }
  double sample_rate_hz() const { return sample_rate_hz_; }

  const Eigen::MatrixXd& samples() const { return samples_; }
  Eigen::MatrixXd::ConstColXpr epoch(Index i) const { return samples_.col(i); }
  const EpochInfo& info(Index i) const { return info_[static_cast<std::size_t>(i)]; }
  const std::vector<EpochInfo>& info() const { return info_; }

  void append(const Eigen::Ref<const Eigen::VectorXd>& samples, EpochInfo info);
  void append(const EpochMatrix& other);
  EpochMatrix select(const std::vector<Index>& indices) const;

 private:
  Eigen::MatrixXd samples_;
  std::vector<EpochInfo> info_;
  double sample_rate_hz_ = kBonnSampleRateHz;
};

using SubsetMap = std::map<Subset, EpochMatrix>;

enum class CaseId { I = 1, II, III, IV, V, VI, VII, VIII, IX };
inline constexpr std::array<CaseId, 9> kAllCases{CaseId::I,  CaseId::II,  CaseId::III,
                                                 CaseId::IV, CaseId::V,   CaseId::VI,
                                                 CaseId::VII, CaseId::VIII, CaseId::IX};

std::string case_name(CaseId id);
CaseId case_from_name(std::string_view name);
/// Class composition: one subset list per class, class 0 first.
std::vector<std::vector<Subset>> case_classes(CaseId id);
std::string case_description(CaseId id);

struct LabeledDataset {
  EpochMatrix epochs;
  std::vector<int> labels;
  std::optional<CaseId> case_id;
  std::vector<std::string> class_names;

  int n_classes() const { return static_cast<int>(class_names.size()); }
  Index size() const { return epochs.size(); }
  std::vector<Index> class_counts() const;
  LabeledDataset select(const std::vector<Index>& indices) const;
  /// Epochs of one class, in dataset order.
  EpochMatrix class_epochs(int label) const;
  void validate() const;
};

struct FoldSplit {
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
};

// --- Bonn ingestion -------------------------------------------------------

/// Reads one Bonn text file: one number per line, LF or CRLF.
Eigen::VectorXd load_bonn_file(const std::filesystem::path& file, Index expected_len);
void write_bonn_file(const std::filesystem::path& file, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Directory holding the files of one subset. Tries <root>/<letter>,
/// <root>/<prefix> in both cases, then <root> itself.
std::filesystem::path resolve_subset_dir(const std::filesystem::path& root, Subset s);

/// Bonn file name for epoch `index` (0-based); the archive's own 1-based
/// numbering (Z001..Z100) is detected and accepted.
std::filesystem::path bonn_file_path(const std::filesystem::path& dir, Subset s, int index);

EpochMatrix load_bonn_subset(const std::filesystem::path& dir, Subset s,
                             Index segment_len = kBonnSegmentLen,
                             int n_epochs = kBonnEpochsPerSubset);
void write_bonn_subset(const std::filesystem::path& dir, Subset s, const EpochMatrix& epochs);

struct ManifestEntry {
  std::filesystem::path dir;
  std::map<std::string, std::string> sha256;  // file name -> hex digest
};
using Manifest = std::map<Subset, ManifestEntry>;

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const Manifest& manifest);
/// Builds a manifest with checksums for every subset directory found under root.
Manifest build_manifest(const std::filesystem::path& root, const std::filesystem::path& relative_to);
/// Loads the requested subsets. If a manifest is given, checksums are verified first.
SubsetMap load_bonn_dataset(const std::filesystem::path& root, const std::vector<Subset>& subsets,
                            const std::optional<std::filesystem::path>& manifest = std::nullopt);

// --- transforms -----------------------------------------------------------

/// Block-mean downsampling; trailing samples that do not fill a block are dropped.
EpochMatrix decimate(const EpochMatrix& epochs, Index factor);
EpochMatrix remove_mean(const EpochMatrix& epochs);

/// Sentinel for "no noise".
inline constexpr double kCleanSnr = std::numeric_limits<double>::infinity();

/// Adds white Gaussian noise per epoch at the requested SNR; epoch i draws
/// from Rng::stream(seed, i).
EpochMatrix add_awgn(const EpochMatrix& epochs, double snr_db, std::uint64_t seed);
double signal_power(const Eigen::Ref<const Eigen::VectorXd>& x);

// --- scenarios and splits -------------------------------------------------

LabeledDataset assemble_scenario(CaseId id, const SubsetMap& subsets);
std::vector<FoldSplit> stratified_kfold(const LabeledDataset& dataset, int k, std::uint64_t seed);

void write_dataset_csv(const std::filesystem::path& file, const LabeledDataset& dataset);

// --- synthetic planted-dictionary data ------------------------------------

struct SyntheticData {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<Eigen::MatrixXd> dictionaries;  // ground truth per class
  std::vector<Eigen::MatrixXd> train_codes;   // per class, n_atoms x n_train
  std::vector<Eigen::MatrixXd> test_codes;
};

SyntheticData generate_synthetic_dataset(int n_classes, Index signal_len, Index n_atoms,
                                         int sparsity, int n_train, int n_test,
                                         std::uint64_t seed);

/// Planted-dictionary stand-ins for the five Bonn subsets, one ground-truth
/// dictionary per subset, `per_subset` epochs each.
SubsetMap synthetic_subsets(Index signal_len, Index n_atoms, int sparsity, int per_subset,
                            std::uint64_t seed);

}  // namespace eegsrc
