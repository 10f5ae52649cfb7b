#include "eegsrc/evaluation.hpp"

#include "eegsrc/errors.hpp"
#include "eegsrc/rng.hpp"
#include "parallel.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace eegsrc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(long num, long den) {
  return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
}

std::string percent(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", 100.0 * v);
  return buf;
}

std::string snr_label(double snr) {
  if (snr == kCleanSnr) return "clean";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

nlohmann::ordered_json metric_json(const Metrics& m) {
  const auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json() : nlohmann::ordered_json(v); };
  return {{"accuracy", num(m.accuracy)},
          {"sensitivity", num(m.sensitivity)},
          {"specificity", num(m.specificity)},
          {"sensitivity_undefined", m.sensitivity_undefined},
          {"specificity_undefined", m.specificity_undefined}};
}

nlohmann::ordered_json confusion_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int i = 0; i < cm.n_classes(); ++i) {
    std::vector<int> row;
    for (int j = 0; j < cm.n_classes(); ++j) row.push_back(cm.counts()(i, j));
    rows.push_back(row);
  }
  return rows;
}

void write_snapshot(std::ostream& out, const std::string& snapshot) {
  std::istringstream in(snapshot);
  std::string line;
  while (std::getline(in, line)) out << "# " << line << '\n';
}

std::uint64_t noise_seed(std::uint64_t seed, std::size_t fold, std::size_t point) {
  return splitmix64(splitmix64(seed) ^ ((static_cast<std::uint64_t>(fold) << 32) | point));
}

SubsetMap preprocess_subsets(CaseId id, const SubsetMap& data, const Preprocessing& pre) {
  SubsetMap out;
  for (const auto& members : case_classes(id))
    for (Subset s : members) {
      auto it = data.find(s);
      if (it == data.end())
        throw ArgumentError("case " + case_name(id) + " requires subset " + subset_letter(s));
      out[s] = pre.apply(it->second);
    }
  return out;
}

Metrics mean_metrics(const std::vector<FoldResult>& folds) {
  const auto mean_of = [&](auto field) {
    double sum = 0.0;
    int n = 0;
    for (const auto& f : folds) {
      const double v = field(f.metrics);
      if (!std::isnan(v)) {
        sum += v;
        ++n;
      }
    }
    return n == 0 ? kNaN : sum / n;
  };
  Metrics m;
  m.accuracy = mean_of([](const Metrics& x) { return x.accuracy; });
  m.sensitivity = mean_of([](const Metrics& x) { return x.sensitivity; });
  m.specificity = mean_of([](const Metrics& x) { return x.specificity; });
  m.sensitivity_undefined = std::isnan(m.sensitivity);
  m.specificity_undefined = std::isnan(m.specificity);
  return m;
}

}  // namespace

// --- confusion and metrics ------------------------------------------------

ConfusionMatrix::ConfusionMatrix(int n_classes) : counts_(Eigen::MatrixXi::Zero(n_classes, n_classes)) {
  if (n_classes < 1) throw ArgumentError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(Eigen::MatrixXi counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols()) throw ArgumentError("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw ArgumentError("confusion counts must be nonnegative");
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= n_classes() || predicted < 0 || predicted >= n_classes())
    throw ArgumentError("class index out of range in confusion matrix");
  ++counts_(truth, predicted);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (counts_.size() == 0) {
    counts_ = other.counts_;
    return *this;
  }
  if (other.n_classes() != n_classes()) throw ArgumentError("confusion matrix size mismatch");
  counts_ += other.counts_;
  return *this;
}

Metrics metrics(const ConfusionMatrix& cm, int positive_class) {
  const int c = cm.n_classes();
  if (c < 2) throw ArgumentError("metrics need at least two classes");
  if (positive_class < 0 || positive_class >= c) throw ArgumentError("positive class out of range");
  const long total = cm.total();
  if (total <= 0) throw ArgumentError("metrics of an empty confusion matrix");

  const auto& n = cm.counts();
  const auto one_vs_rest = [&](int p) {
    const long tp = n(p, p);
    const long fn = static_cast<long>(n.row(p).sum()) - tp;
    const long fp = static_cast<long>(n.col(p).sum()) - tp;
    const long tn = total - tp - fn - fp;
    return std::pair{ratio(tp, tp + fn), ratio(tn, tn + fp)};
  };

  Metrics m;
  m.accuracy = static_cast<double>(n.trace()) / static_cast<double>(total);
  if (c == 2) {
    std::tie(m.sensitivity, m.specificity) = one_vs_rest(positive_class);
    m.sensitivity_undefined = std::isnan(m.sensitivity);
    m.specificity_undefined = std::isnan(m.specificity);
    return m;
  }
  double sens = 0.0, spec = 0.0;
  int n_sens = 0, n_spec = 0;
  for (int p = 0; p < c; ++p) {
    const auto [se, sp] = one_vs_rest(p);
    if (std::isnan(se)) m.sensitivity_undefined = true; else { sens += se; ++n_sens; }
    if (std::isnan(sp)) m.specificity_undefined = true; else { spec += sp; ++n_spec; }
  }
  m.sensitivity = n_sens == 0 ? kNaN : sens / n_sens;
  m.specificity = n_spec == 0 ? kNaN : spec / n_spec;
  return m;
}

// --- protocol -------------------------------------------------------------

int positive_class_for(CaseId id) {
  const auto classes = case_classes(id);
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (Subset s : classes[c])
      if (s == Subset::E) return static_cast<int>(c);
  return 0;
}

FoldPredictor src_predictor(const LearnConfig& learn, Algorithm algorithm) {
  return [learn, algorithm](const LabeledDataset& train, const LabeledDataset& test) {
    const SrcModel model = train_model(train, learn, algorithm);
    const auto results = classify_batch(model, test.epochs);
    std::vector<int> labels;
    labels.reserve(results.size());
    for (const auto& r : results) labels.push_back(r.label);
    return labels;
  };
}

CaseReport run_case(CaseId id, const SubsetMap& data, const EvalConfig& cfg) {
  return run_case(id, data, cfg, src_predictor(cfg.learn, cfg.algorithm));
}

CaseReport run_case(CaseId id, const SubsetMap& data, const EvalConfig& cfg,
                    const FoldPredictor& predictor) {
  const LabeledDataset ds = assemble_scenario(id, preprocess_subsets(id, data, cfg.preprocessing));
  const auto folds = stratified_kfold(ds, cfg.k_folds, cfg.seed);

  CaseReport report;
  report.case_id = id;
  report.class_names = ds.class_names;
  report.positive_class = positive_class_for(id);
  report.config_snapshot = cfg.snapshot;
  report.per_fold.resize(folds.size());

  detail::ExceptionSlot errors;
  const int n_folds = static_cast<int>(folds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int f = 0; f < n_folds; ++f) {
    errors.run([&] {
      const auto start = std::chrono::steady_clock::now();
      const LabeledDataset train = ds.select(folds[f].train_indices);
      const LabeledDataset test = ds.select(folds[f].test_indices);
      const auto mid = std::chrono::steady_clock::now();
      const std::vector<int> predicted = predictor(train, test);
      if (predicted.size() != test.labels.size())
        throw ArgumentError("predictor returned the wrong number of labels");
      const auto end = std::chrono::steady_clock::now();

      FoldResult& fr = report.per_fold[static_cast<std::size_t>(f)];
      fr.confusion = ConfusionMatrix(ds.n_classes());
      for (std::size_t i = 0; i < predicted.size(); ++i) fr.confusion.add(test.labels[i], predicted[i]);
      fr.metrics = metrics(fr.confusion, report.positive_class);
      fr.train_seconds = std::chrono::duration<double>(mid - start).count();
      fr.test_seconds = std::chrono::duration<double>(end - mid).count();
    });
  }
  errors.rethrow();

  report.pooled = ConfusionMatrix(ds.n_classes());
  for (const auto& fr : report.per_fold) report.pooled += fr.confusion;
  report.aggregate = metrics(report.pooled, report.positive_class);
  report.fold_mean = mean_metrics(report.per_fold);
  return report;
}

std::vector<CaseReport> run_all_cases(const SubsetMap& data, const EvalConfig& cfg) {
  std::vector<CaseReport> out;
  for (CaseId id : kAllCases) out.push_back(run_case(id, data, cfg));
  return out;
}

std::vector<double> default_snr_grid() {
  std::vector<double> grid;
  for (int s = -20; s <= 20; s += 2) grid.push_back(s);
  return grid;
}

NoiseSweepReport noise_sweep(CaseId id, const SubsetMap& data, const EvalConfig& cfg,
                             const std::vector<double>& snr_grid) {
  if (snr_grid.empty()) throw ArgumentError("SNR grid is empty");
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    if (std::isnan(snr_grid[i])) throw ArgumentError("SNR grid contains NaN");
    if (i > 0 && !(snr_grid[i] > snr_grid[i - 1]))
      throw ArgumentError("SNR grid must be strictly increasing");
  }

  const LabeledDataset ds = assemble_scenario(id, preprocess_subsets(id, data, cfg.preprocessing));
  const auto folds = stratified_kfold(ds, cfg.k_folds, cfg.seed);
  const int c = ds.n_classes();
  const int positive = positive_class_for(id);

  // confusion[f][p]
  std::vector<std::vector<ConfusionMatrix>> confusion(
      folds.size(), std::vector<ConfusionMatrix>(snr_grid.size(), ConfusionMatrix(c)));

  detail::ExceptionSlot errors;
  const int n_folds = static_cast<int>(folds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int f = 0; f < n_folds; ++f) {
    errors.run([&] {
      const LabeledDataset train = ds.select(folds[f].train_indices);
      const LabeledDataset test = ds.select(folds[f].test_indices);
      const SrcModel model = train_model(train, cfg.learn, cfg.algorithm);
      for (std::size_t p = 0; p < snr_grid.size(); ++p) {
        const EpochMatrix noisy =
            add_awgn(test.epochs, snr_grid[p], noise_seed(cfg.seed, static_cast<std::size_t>(f), p));
        const auto results = classify_batch(model, noisy);
        for (std::size_t i = 0; i < results.size(); ++i)
          confusion[static_cast<std::size_t>(f)][p].add(test.labels[i], results[i].label);
      }
    });
  }
  errors.rethrow();

  NoiseSweepReport report;
  report.case_id = id;
  report.seed = cfg.seed;
  report.config_snapshot = cfg.snapshot;
  for (std::size_t p = 0; p < snr_grid.size(); ++p) {
    SweepPoint pt;
    pt.snr_db = snr_grid[p];
    pt.pooled = ConfusionMatrix(c);
    for (std::size_t f = 0; f < folds.size(); ++f) pt.pooled += confusion[f][p];
    pt.metrics = metrics(pt.pooled, positive);
    pt.accuracy = pt.metrics.accuracy;
    report.points.push_back(std::move(pt));
  }
  return report;
}

// --- output ---------------------------------------------------------------

std::string case_report_json(const CaseReport& r) {
  nlohmann::ordered_json j;
  j["case_id"] = case_name(r.case_id);
  j["description"] = case_description(r.case_id);
  j["class_names"] = r.class_names;
  j["positive_class"] = r.positive_class;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < r.per_fold.size(); ++f) {
    const auto& fr = r.per_fold[f];
    folds.push_back({{"fold", f + 1},
                     {"confusion", confusion_json(fr.confusion)},
                     {"metrics", metric_json(fr.metrics)},
                     {"train_seconds", fr.train_seconds},
                     {"test_seconds", fr.test_seconds}});
  }
  j["per_fold"] = folds;
  j["pooled_confusion"] = confusion_json(r.pooled);
  j["aggregate"] = metric_json(r.aggregate);
  j["fold_mean"] = metric_json(r.fold_mean);
  j["config"] = r.config_snapshot;
  return j.dump(2);
}

std::string sweep_report_json(const NoiseSweepReport& r) {
  nlohmann::ordered_json j;
  j["case_id"] = case_name(r.case_id);
  j["seed"] = r.seed;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& p : r.points)
    pts.push_back({{"snr_db", snr_label(p.snr_db)},
                   {"accuracy", p.accuracy},
                   {"metrics", metric_json(p.metrics)},
                   {"pooled_confusion", confusion_json(p.pooled)}});
  j["points"] = pts;
  j["config"] = r.config_snapshot;
  return j.dump(2);
}

void write_case_csv(const std::filesystem::path& file, const std::vector<CaseReport>& reports) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  if (!reports.empty()) write_snapshot(out, reports.front().config_snapshot);
  out << "case,fold,snr,accuracy,sensitivity,specificity\n";
  const auto row = [&](const CaseReport& r, const std::string& fold, const Metrics& m) {
    out << case_name(r.case_id) << ',' << fold << ",clean," << percent(m.accuracy) << ','
        << percent(m.sensitivity) << ',' << percent(m.specificity) << '\n';
  };
  for (const auto& r : reports) {
    for (std::size_t f = 0; f < r.per_fold.size(); ++f) row(r, std::to_string(f + 1), r.per_fold[f].metrics);
    row(r, "pooled", r.aggregate);
    row(r, "mean", r.fold_mean);
  }
}

void write_sweep_csv(const std::filesystem::path& file, const std::vector<NoiseSweepReport>& reports) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  if (!reports.empty()) write_snapshot(out, reports.front().config_snapshot);
  out << "case,fold,snr,accuracy,sensitivity,specificity\n";
  for (const auto& r : reports)
    for (const auto& p : r.points)
      out << case_name(r.case_id) << ",pooled," << snr_label(p.snr_db) << ',' << percent(p.accuracy)
          << ',' << percent(p.metrics.sensitivity) << ',' << percent(p.metrics.specificity) << '\n';
}

std::string summary_table(const std::vector<CaseReport>& reports) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %-10s %12s %15s %15s\n", "Case", "Classes", "Accuracy(%)",
                "Sensitivity(%)", "Specificity(%)");
  out << buf;
  for (const auto& r : reports) {
    std::string classes;
    for (std::size_t i = 0; i < r.class_names.size(); ++i)
      classes += (i ? "-" : "") + r.class_names[i];
    std::snprintf(buf, sizeof buf, "%-6s %-10s %12s %15s %15s\n", case_name(r.case_id).c_str(),
                  classes.c_str(), percent(r.aggregate.accuracy).c_str(),
                  percent(r.aggregate.sensitivity).c_str(), percent(r.aggregate.specificity).c_str());
    out << buf;
  }
  return out.str();
}

std::string sweep_table(const std::vector<NoiseSweepReport>& reports) {
  std::ostringstream out;
  char buf[96];
  for (const auto& r : reports) {
    out << "Case " << case_name(r.case_id) << '\n';
    std::snprintf(buf, sizeof buf, "  %8s %12s\n", "SNR(dB)", "Accuracy(%)");
    out << buf;
    for (const auto& p : r.points) {
      std::snprintf(buf, sizeof buf, "  %8s %12s\n", snr_label(p.snr_db).c_str(),
                    percent(p.accuracy).c_str());
      out << buf;
    }
  }
  return out.str();
}

}  // namespace eegsrc
