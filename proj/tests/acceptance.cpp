// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            synthetic criteria 1, 5, 6, 7, 8
//   acceptance --bonn     Bonn criteria 2, 3, 4; needs EEGSRC_BONN_DIR (or
//                         --data-dir) and exits 77 when the data is absent
#include "eegsrc/commands.hpp"
#include "eegsrc/dataset.hpp"
#include "eegsrc/dictionary_learning.hpp"
#include "eegsrc/evaluation.hpp"
#include "eegsrc/rng.hpp"
#include "eegsrc/sparse_coding.hpp"
#include "eegsrc/src_classifier.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace eegsrc;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("[%s] %-4s %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
}

void not_run(const std::string& id, const std::string& what, const std::string& why) {
  std::printf("[NOT RUN] %-4s %s (%s)\n", id.c_str(), what.c_str(), why.c_str());
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

std::string secs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", s);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

double accuracy(const SrcModel& model, const EpochMatrix& epochs, const std::vector<int>& labels) {
  const auto results = classify_batch(model, epochs);
  int correct = 0;
  for (std::size_t i = 0; i < results.size(); ++i) correct += results[i].label == labels[i];
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

// --- 1: planted-dictionary oracle ---------------------------------------

void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticData data = generate_synthetic_dataset(3, 64, 128, 5, 100, 50, 2024);

  LearnConfig learn;
  learn.n_atoms = 128;
  learn.coding.max_sparsity = 5;
  const SrcModel model = train_model(data.train, learn, Algorithm::cbwrlsu);

  const double clean = accuracy(model, data.test.epochs, data.test.labels);
  const double noisy = accuracy(model, add_awgn(data.test.epochs, 0.0, 77), data.test.labels);
  const double runtime = elapsed(start);

  report("1a", clean == 1.0, "planted oracle, learned CBWRLSU dictionaries, clean test accuracy " + pct(clean) +
                                 " (required 100%)");
  report("1b", noisy >= 0.90, "planted oracle, learned CBWRLSU dictionaries, 0 dB test accuracy " + pct(noisy) +
                                  " (required >= 90%)");
  report("1c", runtime < 120.0, "planted oracle runtime " + secs(runtime) + " (required < 120 s)");

  // Reference point, not a criterion: the same test data against the true dictionaries.
  SrcModel truth;
  for (std::size_t c = 0; c < data.dictionaries.size(); ++c)
    truth.dictionaries.emplace_back(data.dictionaries[c], static_cast<int>(c));
  truth.class_names = data.train.class_names;
  truth.coding = learn.coding;
  std::printf("       info: true dictionaries give %s clean, %s at 0 dB\n",
              pct(accuracy(truth, data.test.epochs, data.test.labels)).c_str(),
              pct(accuracy(truth, add_awgn(data.test.epochs, 0.0, 77), data.test.labels)).c_str());
}

// --- 2, 3, 4: Bonn desk preset ------------------------------------------

RunConfig desk_config(const std::string& data_dir) {
  RunConfig cfg;
  cfg.data_dir = data_dir;
  cfg.decimation = 8;
  cfg.n_atoms = 1024;
  cfg.sparsity = 10;
  cfg.passes = 3;
  cfg.k_folds = 10;
  cfg.seed = 0;
  return cfg;
}

void bonn_criteria(const std::string& data_dir) {
  const RunConfig cfg = desk_config(data_dir);
  const SubsetMap data = load_case_data(cfg, {CaseId::I, CaseId::VIII});
  const EvalConfig eval = cfg.eval_config();

  auto start = std::chrono::steady_clock::now();
  const CaseReport one = run_case(CaseId::I, data, eval);
  const double runtime = elapsed(start);
  report("2a", one.aggregate.accuracy >= 0.97,
         "Bonn case I desk preset, pooled accuracy " + pct(one.aggregate.accuracy) + " (required >= 97%)");
  report("2b", runtime < 900.0, "Bonn case I runtime " + secs(runtime) + " (required < 900 s)");

  const CaseReport eight = run_case(CaseId::VIII, data, eval);
  report("3", eight.aggregate.accuracy >= 0.85,
         "Bonn case VIII desk preset, pooled accuracy " + pct(eight.aggregate.accuracy) + " (required >= 85%)");

  const NoiseSweepReport sweep = noise_sweep(CaseId::I, data, eval, default_snr_grid());
  double worst = 1.0, low = 0.0, high = 0.0;
  std::string curve;
  for (const auto& p : sweep.points) {
    char buf[48];
    std::snprintf(buf, sizeof buf, " %g:%.1f", p.snr_db, 100.0 * p.accuracy);
    curve += buf;
    if (p.snr_db >= -4.0 && p.snr_db <= 20.0) worst = std::min(worst, p.accuracy);
    if (p.snr_db == -20.0 || p.snr_db == -16.0) low += p.accuracy / 2.0;
    if (p.snr_db == 16.0 || p.snr_db == 20.0) high += p.accuracy / 2.0;
  }
  std::printf("       info: sweep (dB:%%)%s\n", curve.c_str());
  report("4a", worst >= 0.80, "Bonn case I noise sweep, worst accuracy in [-4, 20] dB " + pct(worst) +
                                  " (required >= 80%)");
  report("4b", low <= high, "Bonn case I noise sweep, mean{-20,-16 dB} " + pct(low) + " <= mean{16,20 dB} " +
                                pct(high));
}

// --- 5: OMP exact recovery ----------------------------------------------

void criterion_5() {
  const int trials = 1000;
  int recovered = 0, orthogonal = 0;
  CodingConfig coding;
  coding.max_sparsity = 3;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::stream(5005, static_cast<std::uint64_t>(t));
    Eigen::MatrixXd phi(64, 128);
    for (Index j = 0; j < phi.cols(); ++j)
      for (Index i = 0; i < phi.rows(); ++i) phi(i, j) = rng.normal();
    const Dictionary dict = Dictionary::normalized(phi);

    std::vector<Index> atoms(128);
    for (Index i = 0; i < 128; ++i) atoms[static_cast<std::size_t>(i)] = i;
    rng.shuffle(atoms.begin(), atoms.end());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(128);
    for (int p = 0; p < 3; ++p) x[atoms[static_cast<std::size_t>(p)]] = rng.normal();
    const Eigen::VectorXd y = dict.atoms() * x;

    const SparseCode code = omp(dict, y, coding);
    const std::set<Index> found(code.support.begin(), code.support.end());
    const std::set<Index> planted(atoms.begin(), atoms.begin() + 3);
    recovered += found == planted;

    const Eigen::VectorXd r = y - reconstruct(dict, code);
    double worst = 0.0;
    for (Index a : code.support) worst = std::max(worst, std::abs(dict.atom(a).dot(r)));
    orthogonal += worst <= 1e-6;
  }
  report("5a", recovered >= 990, "OMP planted 3-sparse support recovered in " + std::to_string(recovered) +
                                     "/1000 trials (required >= 990)");
  report("5b", orthogonal == trials, "OMP residual orthogonal to the chosen atoms (1e-6) in " +
                                         std::to_string(orthogonal) + "/1000 trials (required 1000)");
}

// --- 6: inverse maintenance ---------------------------------------------

void criterion_6() {
  const Index n = 16, m = 12;
  const int steps = 50;
  LearnConfig cfg;
  cfg.n_atoms = m;
  cfg.coding.max_sparsity = 3;
  cfg.weight_floor = 0.05;
  cfg.init_seed = 606;

  Rng rng(6006);
  Eigen::MatrixXd y(n, steps);
  for (Index j = 0; j < steps; ++j)
    for (Index i = 0; i < n; ++i) y(i, j) = rng.normal();
  CbwrlsuLearner learner(init_dictionary(y, cfg), cfg);

  Eigen::MatrixXd gram = cfg.c_inverse_init_scale * Eigen::MatrixXd::Identity(m, m);
  int matched = 0;
  double worst = 0.0;
  std::size_t largest_active = 0;
  for (Index j = 0; j < steps; ++j) {
    const StepReport r = learner.step(y.col(j));
    for (const ReplayPair& p : r.pairs) {
      const Eigen::VectorXd x = p.code.dense();
      gram += p.weight * x * x.transpose();
    }
    const auto& atoms = learner.active_atoms();
    largest_active = std::max(largest_active, atoms.size());
    Eigen::MatrixXd block(atoms.size(), atoms.size());
    for (std::size_t a = 0; a < atoms.size(); ++a)
      for (std::size_t b = 0; b < atoms.size(); ++b) block(a, b) = gram(atoms[a], atoms[b]);
    const Eigen::MatrixXd direct = block.inverse();
    const double rel = (learner.active_inverse() - direct).norm() / direct.norm();
    worst = std::max(worst, rel);
    matched += !r.inverse_reset && rel <= 1e-8;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", worst);
  report("6", matched == steps && largest_active <= 12,
         "maintained inverse vs direct inverse: " + std::to_string(matched) + "/50 steps within 1e-8 relative (worst " +
             buf + ", max |A| " + std::to_string(largest_active) + ")");
}

// --- 7: harness correctness ---------------------------------------------

void criterion_7() {
  const SubsetMap data = synthetic_subsets(8, 16, 2, 100, 707);
  EvalConfig cfg;
  cfg.seed = 7;
  const FoldPredictor echo = [](const LabeledDataset&, const LabeledDataset& test) { return test.labels; };
  int perfect = 0;
  for (CaseId id : kAllCases) {
    const CaseReport r = run_case(id, data, cfg, echo);
    perfect += r.aggregate.accuracy == 1.0 && r.aggregate.sensitivity == 1.0 && r.aggregate.specificity == 1.0;
  }
  report("7a", perfect == 9, "true-label echo scores 100/100/100 on " + std::to_string(perfect) + "/9 cases");

  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const CaseId id = kAllCases[seed % kAllCases.size()];
    const LabeledDataset ds = assemble_scenario(id, data);
    const auto counts = ds.class_counts();
    const auto folds = stratified_kfold(ds, 10, seed);
    bool ok = folds.size() == 10;
    std::vector<int> covered(static_cast<std::size_t>(ds.size()), 0);
    for (const auto& f : folds) {
      std::set<Index> train(f.train_indices.begin(), f.train_indices.end());
      ok = ok && train.size() + f.test_indices.size() == static_cast<std::size_t>(ds.size());
      std::vector<double> per_class(counts.size(), 0.0);
      for (Index t : f.test_indices) {
        ok = ok && !train.count(t);
        ++covered[static_cast<std::size_t>(t)];
        per_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(t)])] += 1.0;
      }
      for (std::size_t c = 0; c < counts.size(); ++c)
        ok = ok && std::abs(per_class[c] - static_cast<double>(counts[c]) / 10.0) <= 1.0;
    }
    for (int c : covered) ok = ok && c == 1;
    good += ok;
  }
  report("7b", good == 100, "stratified 10-fold partition, disjointness and +-1 stratification hold in " +
                                std::to_string(good) + "/100 seeded trials");
}

// --- 8: determinism -----------------------------------------------------

void criterion_8() {
  const fs::path root = fs::temp_directory_path() / ("eegsrc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::vector<std::string> args{"evaluate",        "--case", "I",   "--output-dir", root.string(),
                                      "--set",           "n_atoms=128", "--set",   "sparsity=5"};
  std::ostringstream out, err;
  std::string first, second;
  bool ran = run_cli(args, out, err) == 0;
  fs::path csv;
  for (const auto& e : fs::directory_iterator(root)) csv = e.path() / "report.csv";
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  first = slurp(csv);
  fs::remove_all(csv.parent_path());
  ran = ran && run_cli(args, out, err) == 0;
  second = slurp(csv);
  fs::remove_all(root);
  report("8", ran && !first.empty() && first == second,
         "evaluate twice with the same config: CSV reports " +
             std::string(first == second ? "byte-identical" : "differ") + " (" + std::to_string(first.size()) +
             " bytes)");
  if (!ran) std::cerr << err.str();
}

}  // namespace

int main(int argc, char** argv) {
  bool bonn = false;
  std::string data_dir;
  if (const char* env = std::getenv("EEGSRC_BONN_DIR")) data_dir = env;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--bonn") bonn = true;
    else if (a == "--data-dir" && i + 1 < argc) data_dir = argv[++i];
  }

  if (bonn) {
    std::ostringstream quiet;
    if (data_dir.empty() || cmd_validate_data(data_dir, "", quiet) != 0) {
      const std::string why = data_dir.empty() ? "EEGSRC_BONN_DIR not set" : "Bonn data incomplete at " + data_dir;
      not_run("2", "Bonn case I desk accuracy >= 97%, runtime < 15 min", why);
      not_run("3", "Bonn case VIII desk accuracy >= 85%", why);
      not_run("4", "Bonn case I noise sweep >= 80% on [-4, 20] dB, monotone trend", why);
      return kSkip;
    }
    bonn_criteria(data_dir);
  } else {
    criterion_1();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    std::printf("[NOT RUN] 2-4  Bonn criteria run under 'acceptance --bonn' (ctest: acceptance_bonn)\n");
  }
  std::printf("%s: %d failing line(s)\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
