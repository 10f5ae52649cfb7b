#pragma once

#include "eegsrc/dataset.hpp"
#include "eegsrc/evaluation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eegsrc {

/// Flat `key = value` run configuration. Lines starting with '#' and blank
/// lines are ignored. Keys are listed in config_keys().
struct RunConfig {
  std::string data_dir;  // empty: synthetic planted-dictionary subsets
  std::string manifest;
  std::string output_dir = "runs";
  std::string case_name = "I";  // I..IX or "all"
  Algorithm algorithm = Algorithm::cbwrlsu;

  Index n_atoms = 1024;
  int sparsity = 10;
  double residual_tol = 0.0;
  StopRule stop_rule = StopRule::fixed_k;
  int passes = 3;
  int mod_iters = 20;
  InitStrategy init_strategy = InitStrategy::data_columns;
  std::uint64_t init_seed = 0;
  double delta = 1e-2;
  double weight_floor = 0.0;
  bool recode_each_pass = false;

  Index decimation = 1;
  bool remove_mean = false;

  int k_folds = 10;
  std::uint64_t seed = 0;
  std::vector<double> snr_grid = default_snr_grid();
  int fold = -1;  // train: -1 uses every epoch, otherwise that fold's training split

  Index synthetic_signal_len = 64;
  Index synthetic_n_atoms = 128;
  int synthetic_sparsity = 5;
  int synthetic_per_subset = 100;
  std::uint64_t synthetic_seed = 0;

  bool synthetic() const { return data_dir.empty(); }
  std::vector<CaseId> cases() const;
  LearnConfig learn_config() const;
  /// Preprocessing for raw epochs of the configured source.
  Preprocessing preprocessing() const;
  EvalConfig eval_config() const;
};

const std::vector<std::string>& config_keys();

/// Throws ArgumentError naming the key for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
/// "key=value" form used by --set.
void apply_override(RunConfig& cfg, const std::string& assignment);

RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& file);

/// Canonical text of the effective configuration, one key per line, in
/// config_keys() order. Parsing it yields the same configuration.
std::string render_config(const RunConfig& cfg);

/// First 12 hex digits of the SHA-256 of render_config(cfg).
std::string run_id(const RunConfig& cfg);

/// Checks ranges and that referenced paths exist.
void validate_config(const RunConfig& cfg);

}  // namespace eegsrc
