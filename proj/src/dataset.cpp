#include "eegsrc/dataset.hpp"

#include "eegsrc/checksum.hpp"
#include "eegsrc/errors.hpp"
#include "eegsrc/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace eegsrc {

char subset_letter(Subset s) { return static_cast<char>('A' + static_cast<int>(s)); }

Subset subset_from_letter(char c) {
  if (c >= 'a' && c <= 'e') c = static_cast<char>(c - 'a' + 'A');
  if (c < 'A' || c > 'E') throw ArgumentError(std::string("unknown subset '") + c + "'");
  return static_cast<Subset>(c - 'A');
}

char subset_file_prefix(Subset s) {
  switch (s) {
    case Subset::A: return 'Z';
    case Subset::B: return 'O';
    case Subset::C: return 'N';
    case Subset::D: return 'F';
    case Subset::E: return 'S';
  }
  return '?';
}

// --- EpochMatrix ----------------------------------------------------------

EpochMatrix::EpochMatrix(Index segment_len, double sample_rate_hz)
    : samples_(segment_len, 0), sample_rate_hz_(sample_rate_hz) {
  if (segment_len < 1) throw ArgumentError("segment length must be positive");
}

EpochMatrix::EpochMatrix(Eigen::MatrixXd samples, std::vector<EpochInfo> info,
                         double sample_rate_hz)
    : samples_(std::move(samples)), info_(std::move(info)), sample_rate_hz_(sample_rate_hz) {
  if (static_cast<Index>(info_.size()) != samples_.cols())
    throw ArgumentError("epoch info count does not match epoch count");
}

void EpochMatrix::append(const Eigen::Ref<const Eigen::VectorXd>& samples, EpochInfo info) {
  if (samples.size() != segment_len())
    throw ArgumentError("epoch length " + std::to_string(samples.size()) +
                        " does not match segment length " + std::to_string(segment_len()));
  samples_.conservativeResize(Eigen::NoChange, samples_.cols() + 1);
  samples_.col(samples_.cols() - 1) = samples;
  info_.push_back(info);
}

void EpochMatrix::append(const EpochMatrix& other) {
  if (other.empty()) return;
  if (other.segment_len() != segment_len())
    throw ArgumentError("segment length mismatch: " + std::to_string(other.segment_len()) +
                        " vs " + std::to_string(segment_len()));
  const Index old = samples_.cols();
  samples_.conservativeResize(Eigen::NoChange, old + other.size());
  samples_.rightCols(other.size()) = other.samples_;
  info_.insert(info_.end(), other.info_.begin(), other.info_.end());
}

EpochMatrix EpochMatrix::select(const std::vector<Index>& indices) const {
  Eigen::MatrixXd out(segment_len(), static_cast<Index>(indices.size()));
  std::vector<EpochInfo> info;
  info.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const Index i = indices[j];
    if (i < 0 || i >= size()) throw ArgumentError("epoch index out of range");
    out.col(static_cast<Index>(j)) = samples_.col(i);
    info.push_back(info_[static_cast<std::size_t>(i)]);
  }
  return EpochMatrix(std::move(out), std::move(info), sample_rate_hz_);
}

// --- cases ----------------------------------------------------------------

std::string case_name(CaseId id) {
  static const char* kNames[] = {"I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX"};
  return kNames[static_cast<int>(id) - 1];
}

CaseId case_from_name(std::string_view name) {
  for (CaseId id : kAllCases)
    if (case_name(id) == name) return id;
  throw ArgumentError("unknown case id '" + std::string(name) + "'");
}

std::vector<std::vector<Subset>> case_classes(CaseId id) {
  using S = Subset;
  switch (id) {
    case CaseId::I: return {{S::E}, {S::A}};
    case CaseId::II: return {{S::E}, {S::B}};
    case CaseId::III: return {{S::E}, {S::B}, {S::D}};
    case CaseId::IV: return {{S::E}, {S::C}};
    case CaseId::V: return {{S::E}, {S::D}};
    case CaseId::VI: return {{S::E}, {S::A, S::B}};
    case CaseId::VII: return {{S::E}, {S::C, S::D}};
    case CaseId::VIII: return {{S::A, S::B}, {S::C, S::D}};
    case CaseId::IX: return {{S::E}, {S::A, S::B, S::C, S::D}};
  }
  throw ArgumentError("unknown case id");
}

std::string case_description(CaseId id) {
  switch (id) {
    case CaseId::I: return "Seizure and Healthy (eyes-open)";
    case CaseId::II: return "Seizure and Healthy (eyes-closed)";
    case CaseId::III: return "Ictal, Healthy (eyes-closed) and Inter-Ictal";
    case CaseId::IV:
    case CaseId::V:
    case CaseId::VII: return "Ictal and Inter-Ictal";
    case CaseId::VI: return "Seizure and Healthy (eyes-open and eyes-closed)";
    case CaseId::VIII: return "Healthy (eyes-open and eyes-closed) and Inter-Ictal";
    case CaseId::IX: return "Healthy (eyes-open and eyes-closed) with Inter-Ictal and Ictal";
  }
  return {};
}

std::vector<Index> LabeledDataset::class_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(n_classes()), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledDataset LabeledDataset::select(const std::vector<Index>& indices) const {
  LabeledDataset out;
  out.epochs = epochs.select(indices);
  out.labels.reserve(indices.size());
  for (Index i : indices) out.labels.push_back(labels[static_cast<std::size_t>(i)]);
  out.case_id = case_id;
  out.class_names = class_names;
  return out;
}

EpochMatrix LabeledDataset::class_epochs(int label) const {
  std::vector<Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) idx.push_back(static_cast<Index>(i));
  return epochs.select(idx);
}

void LabeledDataset::validate() const {
  if (static_cast<Index>(labels.size()) != epochs.size())
    throw ArgumentError("label count does not match epoch count");
  for (int l : labels)
    if (l < 0 || l >= n_classes()) throw ArgumentError("label out of range");
}

// --- Bonn files -----------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string read_all(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing input file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string bonn_stem(Subset s, int number) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03d", subset_file_prefix(s), number);
  return buf;
}

std::optional<fs::path> existing_variant(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".txt", ".TXT"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

}  // namespace

Eigen::VectorXd load_bonn_file(const fs::path& file, Index expected_len) {
  const std::string text = read_all(file);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(std::max<Index>(expected_len, 0)));
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    double v = 0.0;
    const char* first = line.data();
    const char* last = line.data() + line.size();
    if (!line.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (line.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": non-numeric sample '" +
                      std::string(line) + "'");
    values.push_back(v);
    pos = end + 1;
  }
  if (static_cast<Index>(values.size()) != expected_len)
    throw DataError(file.string() + ": expected " + std::to_string(expected_len) +
                    " samples, found " + std::to_string(values.size()));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

void write_bonn_file(const fs::path& file, const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  char buf[64];
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v == std::trunc(v) && std::abs(v) < 9.0e15)
      std::snprintf(buf, sizeof buf, "%lld\n", static_cast<long long>(v));
    else
      std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

fs::path resolve_subset_dir(const fs::path& root, Subset s) {
  const char letter = subset_letter(s);
  const char prefix = subset_file_prefix(s);
  const std::string candidates[] = {std::string(1, letter),
                                    std::string(1, static_cast<char>(letter - 'A' + 'a')),
                                    std::string(1, prefix),
                                    std::string(1, static_cast<char>(prefix - 'A' + 'a'))};
  for (const auto& c : candidates)
    if (fs::is_directory(root / c)) return root / c;
  return root;
}

fs::path bonn_file_path(const fs::path& dir, Subset s, int index) {
  // The public archive numbers files 001..100; accept that when 000 is absent.
  int offset = 0;
  if (!existing_variant(dir, bonn_stem(s, 0)) && existing_variant(dir, bonn_stem(s, 100)))
    offset = 1;
  const std::string stem = bonn_stem(s, index + offset);
  if (auto p = existing_variant(dir, stem)) return *p;
  return dir / (stem + ".txt");
}

EpochMatrix load_bonn_subset(const fs::path& dir, Subset s, Index segment_len, int n_epochs) {
  EpochMatrix out(segment_len);
  Eigen::MatrixXd samples(segment_len, n_epochs);
  std::vector<EpochInfo> info;
  for (int i = 0; i < n_epochs; ++i) {
    const fs::path file = bonn_file_path(dir, s, i);
    if (!fs::exists(file)) throw DataError("missing input file " + file.string());
    samples.col(i) = load_bonn_file(file, segment_len);
    info.push_back({s, i});
  }
  return EpochMatrix(std::move(samples), std::move(info), kBonnSampleRateHz);
}

void write_bonn_subset(const fs::path& dir, Subset s, const EpochMatrix& epochs) {
  fs::create_directories(dir);
  for (Index i = 0; i < epochs.size(); ++i)
    write_bonn_file(dir / (bonn_stem(s, static_cast<int>(i)) + ".txt"), epochs.epoch(i));
}

// --- manifest -------------------------------------------------------------

Manifest read_manifest(const fs::path& file) {
  nlohmann::json j;
  try {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open manifest " + file.string());
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + file.string() + ": " + e.what());
  }
  Manifest m;
  const fs::path base = file.parent_path();
  if (!j.contains("subsets") || !j["subsets"].is_object())
    throw DataError("manifest " + file.string() + " has no 'subsets' object");
  for (const auto& [key, entry] : j["subsets"].items()) {
    if (key.size() != 1) throw DataError("manifest: bad subset key '" + key + "'");
    ManifestEntry e;
    e.dir = base / entry.value("dir", std::string(1, key[0]));
    if (entry.contains("sha256"))
      for (const auto& [name, digest] : entry["sha256"].items())
        e.sha256[name] = digest.get<std::string>();
    m[subset_from_letter(key[0])] = std::move(e);
  }
  return m;
}

void write_manifest(const fs::path& file, const Manifest& manifest) {
  nlohmann::ordered_json j;
  j["subsets"] = nlohmann::ordered_json::object();
  for (const auto& [s, e] : manifest) {
    nlohmann::ordered_json entry;
    entry["dir"] = e.dir.generic_string();
    entry["sha256"] = nlohmann::ordered_json::object();
    for (const auto& [name, digest] : e.sha256) entry["sha256"][name] = digest;
    j["subsets"][std::string(1, subset_letter(s))] = entry;
  }
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

Manifest build_manifest(const fs::path& root, const fs::path& relative_to) {
  Manifest m;
  for (Subset s : kAllSubsets) {
    const fs::path dir = resolve_subset_dir(root, s);
    ManifestEntry e;
    for (int i = 0; i < kBonnEpochsPerSubset; ++i) {
      const fs::path f = bonn_file_path(dir, s, i);
      if (fs::exists(f)) e.sha256[f.filename().string()] = sha256_file(f);
    }
    if (e.sha256.empty()) continue;
    e.dir = fs::relative(dir, relative_to);
    m[s] = std::move(e);
  }
  return m;
}

SubsetMap load_bonn_dataset(const fs::path& root, const std::vector<Subset>& subsets,
                            const std::optional<fs::path>& manifest) {
  SubsetMap out;
  std::optional<Manifest> m;
  if (manifest) m = read_manifest(*manifest);
  for (Subset s : subsets) {
    fs::path dir;
    if (m) {
      auto it = m->find(s);
      if (it == m->end())
        throw DataError(std::string("manifest lists no directory for subset ") + subset_letter(s));
      dir = it->second.dir;
      for (const auto& [name, digest] : it->second.sha256) {
        const std::string actual = sha256_file(dir / name);
        if (actual != digest)
          throw DataError("checksum mismatch for " + (dir / name).string() + ": expected " +
                          digest + ", got " + actual);
      }
    } else {
      dir = resolve_subset_dir(root, s);
    }
    out[s] = load_bonn_subset(dir, s);
  }
  return out;
}

// --- transforms -----------------------------------------------------------

EpochMatrix decimate(const EpochMatrix& epochs, Index factor) {
  if (factor < 1) throw ArgumentError("decimation factor must be >= 1");
  if (epochs.segment_len() < factor)
    throw ArgumentError("segment length " + std::to_string(epochs.segment_len()) +
                        " is shorter than decimation factor " + std::to_string(factor));
  if (factor == 1) return epochs;
  const Index out_len = epochs.segment_len() / factor;
  Eigen::MatrixXd out(out_len, epochs.size());
  for (Index j = 0; j < epochs.size(); ++j)
    for (Index i = 0; i < out_len; ++i)
      out(i, j) = epochs.samples().col(j).segment(i * factor, factor).mean();
  return EpochMatrix(std::move(out), epochs.info(), epochs.sample_rate_hz() / factor);
}

EpochMatrix remove_mean(const EpochMatrix& epochs) {
  Eigen::MatrixXd out = epochs.samples();
  out.rowwise() -= out.colwise().mean();
  return EpochMatrix(std::move(out), epochs.info(), epochs.sample_rate_hz());
}

double signal_power(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.size() == 0 ? 0.0 : x.squaredNorm() / static_cast<double>(x.size());
}

EpochMatrix add_awgn(const EpochMatrix& epochs, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db)) throw ArgumentError("SNR must not be NaN");
  if (snr_db == kCleanSnr) return epochs;
  Eigen::MatrixXd out = epochs.samples();
  for (Index j = 0; j < out.cols(); ++j) {
    const double power = signal_power(out.col(j));
    if (!(power > 0.0))
      throw ArgumentError("epoch " + std::to_string(j) + " has zero power; SNR undefined");
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(j));
    for (Index i = 0; i < out.rows(); ++i) out(i, j) += sigma * rng.normal();
  }
  return EpochMatrix(std::move(out), epochs.info(), epochs.sample_rate_hz());
}

// --- scenarios ------------------------------------------------------------

LabeledDataset assemble_scenario(CaseId id, const SubsetMap& subsets) {
  const auto classes = case_classes(id);
  std::optional<Index> seg_len;
  for (const auto& members : classes)
    for (Subset s : members) {
      auto it = subsets.find(s);
      if (it == subsets.end())
        throw ArgumentError("case " + case_name(id) + " requires subset " + subset_letter(s));
      if (seg_len && *seg_len != it->second.segment_len())
        throw ArgumentError("case " + case_name(id) + ": segment length mismatch between subsets");
      seg_len = it->second.segment_len();
    }

  LabeledDataset ds;
  ds.case_id = id;
  ds.epochs = EpochMatrix(*seg_len, subsets.at(classes[0][0]).sample_rate_hz());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::string name;
    for (Subset s : classes[c]) {
      const EpochMatrix& em = subsets.at(s);
      ds.epochs.append(em);
      ds.labels.insert(ds.labels.end(), static_cast<std::size_t>(em.size()), static_cast<int>(c));
      name.push_back(subset_letter(s));
    }
    ds.class_names.push_back(name);
  }
  return ds;
}

std::vector<FoldSplit> stratified_kfold(const LabeledDataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("k-fold requires k >= 2");
  dataset.validate();
  const auto counts = dataset.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < k)
      throw ArgumentError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                          " members, fewer than k=" + std::to_string(k));

  std::vector<int> fold_of(static_cast<std::size_t>(dataset.size()), -1);
  Index offset = 0;
  for (int c = 0; c < dataset.n_classes(); ++c) {
    std::vector<Index> members;
    for (std::size_t i = 0; i < dataset.labels.size(); ++i)
      if (dataset.labels[i] == c) members.push_back(static_cast<Index>(i));
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(c));
    rng.shuffle(members.begin(), members.end());
    // Round-robin continues across classes so fold sizes also stay within one.
    for (std::size_t j = 0; j < members.size(); ++j)
      fold_of[static_cast<std::size_t>(members[j])] =
          static_cast<int>((offset + static_cast<Index>(j)) % k);
    offset += static_cast<Index>(members.size());
  }

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    for (int f = 0; f < k; ++f)
      (f == fold_of[i] ? folds[f].test_indices : folds[f].train_indices)
          .push_back(static_cast<Index>(i));
  return folds;
}

void write_dataset_csv(const fs::path& file, const LabeledDataset& dataset) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << "epoch_index,case_id,class_index,subset_id,source_index\n";
  const std::string cid = dataset.case_id ? case_name(*dataset.case_id) : "";
  for (Index i = 0; i < dataset.size(); ++i) {
    const auto& info = dataset.epochs.info(i);
    out << i << ',' << cid << ',' << dataset.labels[static_cast<std::size_t>(i)] << ','
        << subset_letter(info.subset) << ',' << info.source_index << '\n';
  }
}

// --- synthetic ------------------------------------------------------------

namespace {

Eigen::MatrixXd gaussian_unit_columns(Index rows, Index cols, Rng& rng) {
  Eigen::MatrixXd d(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) d(i, j) = rng.normal();
    d.col(j).normalize();
  }
  return d;
}

Eigen::MatrixXd sparse_codes(Index n_atoms, int sparsity, int count, Rng& rng) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_atoms, count);
  std::vector<Index> pool(static_cast<std::size_t>(n_atoms));
  for (int j = 0; j < count; ++j) {
    std::iota(pool.begin(), pool.end(), Index{0});
    // Partial Fisher-Yates: the first `sparsity` slots are a uniform subset.
    for (int t = 0; t < sparsity; ++t) {
      const std::size_t r =
          static_cast<std::size_t>(t) + rng.below(static_cast<std::size_t>(n_atoms - t));
      std::swap(pool[static_cast<std::size_t>(t)], pool[r]);
      x(pool[static_cast<std::size_t>(t)], j) = rng.normal();
    }
  }
  return x;
}

}  // namespace

SyntheticData generate_synthetic_dataset(int n_classes, Index signal_len, Index n_atoms,
                                         int sparsity, int n_train, int n_test,
                                         std::uint64_t seed) {
  if (n_classes < 1 || signal_len < 1 || n_atoms < 1 || sparsity < 1 || sparsity > n_atoms ||
      n_train < 0 || n_test < 0)
    throw ArgumentError("invalid synthetic dataset parameters");

  SyntheticData out;
  out.train.epochs = EpochMatrix(signal_len, 1.0);
  out.test.epochs = EpochMatrix(signal_len, 1.0);
  for (int c = 0; c < n_classes; ++c) {
    const std::string name = "class" + std::to_string(c);
    out.train.class_names.push_back(name);
    out.test.class_names.push_back(name);

    Rng dict_rng = Rng::stream(seed, static_cast<std::uint64_t>(c));
    out.dictionaries.push_back(gaussian_unit_columns(signal_len, n_atoms, dict_rng));

    Rng code_rng = Rng::stream(seed, 1000003ULL + static_cast<std::uint64_t>(c));
    out.train_codes.push_back(sparse_codes(n_atoms, sparsity, n_train, code_rng));
    out.test_codes.push_back(sparse_codes(n_atoms, sparsity, n_test, code_rng));

    const Eigen::MatrixXd ytr = out.dictionaries.back() * out.train_codes.back();
    const Eigen::MatrixXd yte = out.dictionaries.back() * out.test_codes.back();
    const Subset tag = static_cast<Subset>(c % 5);
    for (int j = 0; j < n_train; ++j) {
      out.train.epochs.append(ytr.col(j), {tag, j});
      out.train.labels.push_back(c);
    }
    for (int j = 0; j < n_test; ++j) {
      out.test.epochs.append(yte.col(j), {tag, j});
      out.test.labels.push_back(c);
    }
  }
  return out;
}

SubsetMap synthetic_subsets(Index signal_len, Index n_atoms, int sparsity, int per_subset,
                            std::uint64_t seed) {
  SyntheticData data =
      generate_synthetic_dataset(5, signal_len, n_atoms, sparsity, per_subset, 0, seed);
  SubsetMap out;
  for (int c = 0; c < 5; ++c) out[kAllSubsets[static_cast<std::size_t>(c)]] = data.train.class_epochs(c);
  return out;
}

}  // namespace eegsrc
