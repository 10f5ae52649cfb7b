#include "eegsrc/config.hpp"

#include "eegsrc/checksum.hpp"
#include "eegsrc/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace eegsrc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ArgumentError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ArgumentError("config key '" + key + "': expected a finite number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ArgumentError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> parse_grid(const std::string& key, const std::string& v) {
  if (v == "default") return default_snr_grid();
  std::vector<double> grid;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item == "clean" || item == "inf")
      grid.push_back(kCleanSnr);
    else
      grid.push_back(parse_real(key, item));
  }
  if (grid.empty()) throw ArgumentError("config key '" + key + "': empty SNR grid");
  return grid;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // prefer the shortest form that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    char shortest[40];
    std::snprintf(shortest, sizeof shortest, "%.*g", prec, v);
    if (std::strtod(shortest, nullptr) == v) return shortest;
  }
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    const auto add = [&](std::string key, auto set, auto get) { t.push_back({std::move(key), Field{set, get}}); };
    using C = RunConfig;
    using S = const std::string&;
    add("data_dir", [](C& c, S, S v) { c.data_dir = v; }, [](const C& c) { return c.data_dir; });
    add("manifest", [](C& c, S, S v) { c.manifest = v; }, [](const C& c) { return c.manifest; });
    add("output_dir", [](C& c, S, S v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; });
    add("case", [](C& c, S, S v) {
          if (v != "all") case_from_name(v);
          c.case_name = v;
        },
        [](const C& c) { return c.case_name; });
    add("algorithm", [](C& c, S, S v) { c.algorithm = algorithm_from_string(v); },
        [](const C& c) { return to_string(c.algorithm); });
    add("n_atoms", [](C& c, S k, S v) { c.n_atoms = parse_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.n_atoms); });
    add("sparsity", [](C& c, S k, S v) { c.sparsity = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.sparsity); });
    add("residual_tol", [](C& c, S k, S v) { c.residual_tol = parse_real(k, v); },
        [](const C& c) { return real_text(c.residual_tol); });
    add("stop_rule", [](C& c, S, S v) { c.stop_rule = stop_rule_from_string(v); },
        [](const C& c) { return to_string(c.stop_rule); });
    add("passes", [](C& c, S k, S v) { c.passes = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.passes); });
    add("mod_iters", [](C& c, S k, S v) { c.mod_iters = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.mod_iters); });
    add("init_strategy", [](C& c, S, S v) { c.init_strategy = init_strategy_from_string(v); },
        [](const C& c) { return to_string(c.init_strategy); });
    add("init_seed", [](C& c, S k, S v) { c.init_seed = parse_int<std::uint64_t>(k, v); },
        [](const C& c) { return std::to_string(c.init_seed); });
    add("delta", [](C& c, S k, S v) { c.delta = parse_real(k, v); },
        [](const C& c) { return real_text(c.delta); });
    add("weight_floor", [](C& c, S k, S v) { c.weight_floor = parse_real(k, v); },
        [](const C& c) { return real_text(c.weight_floor); });
    add("recode_each_pass", [](C& c, S k, S v) { c.recode_each_pass = parse_bool(k, v); },
        [](const C& c) { return std::string(c.recode_each_pass ? "true" : "false"); });
    add("decimation", [](C& c, S k, S v) { c.decimation = parse_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.decimation); });
    add("remove_mean", [](C& c, S k, S v) { c.remove_mean = parse_bool(k, v); },
        [](const C& c) { return std::string(c.remove_mean ? "true" : "false"); });
    add("k_folds", [](C& c, S k, S v) { c.k_folds = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.k_folds); });
    add("seed", [](C& c, S k, S v) { c.seed = parse_int<std::uint64_t>(k, v); },
        [](const C& c) { return std::to_string(c.seed); });
    add("snr_grid", [](C& c, S k, S v) { c.snr_grid = parse_grid(k, v); },
        [](const C& c) {
          std::string s;
          for (std::size_t i = 0; i < c.snr_grid.size(); ++i) {
            if (i) s += ',';
            s += c.snr_grid[i] == kCleanSnr ? std::string("clean") : real_text(c.snr_grid[i]);
          }
          return s;
        });
    add("fold", [](C& c, S k, S v) { c.fold = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.fold); });
    add("synthetic.signal_len", [](C& c, S k, S v) { c.synthetic_signal_len = parse_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.synthetic_signal_len); });
    add("synthetic.n_atoms", [](C& c, S k, S v) { c.synthetic_n_atoms = parse_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.synthetic_n_atoms); });
    add("synthetic.sparsity", [](C& c, S k, S v) { c.synthetic_sparsity = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.synthetic_sparsity); });
    add("synthetic.per_subset", [](C& c, S k, S v) { c.synthetic_per_subset = parse_int<int>(k, v); },
        [](const C& c) { return std::to_string(c.synthetic_per_subset); });
    add("synthetic.seed", [](C& c, S k, S v) { c.synthetic_seed = parse_int<std::uint64_t>(k, v); },
        [](const C& c) { return std::to_string(c.synthetic_seed); });
    return t;
  }();
  return table;
}

}  // namespace

std::vector<CaseId> RunConfig::cases() const {
  if (case_name == "all") return {kAllCases.begin(), kAllCases.end()};
  return {case_from_name(case_name)};
}

LearnConfig RunConfig::learn_config() const {
  LearnConfig l;
  l.n_atoms = n_atoms;
  l.coding.max_sparsity = sparsity;
  l.coding.residual_tol = residual_tol;
  l.coding.stop_rule = stop_rule;
  l.passes = passes;
  l.mod_iters = mod_iters;
  l.init_strategy = init_strategy;
  l.init_seed = init_seed;
  l.c_inverse_init_scale = delta;
  l.weight_floor = weight_floor;
  l.recode_each_pass = recode_each_pass;
  return l;
}

Preprocessing RunConfig::preprocessing() const {
  Preprocessing p;
  p.decimation = decimation;
  p.remove_mean = remove_mean;
  p.input_len = synthetic() ? synthetic_signal_len : kBonnSegmentLen;
  return p;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.learn = learn_config();
  e.algorithm = algorithm;
  e.k_folds = k_folds;
  e.seed = seed;
  e.preprocessing = preprocessing();
  e.snapshot = render_config(*this);
  return e;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields())
    if (name == key) {
      field.set(cfg, key, value);
      return;
    }
  throw ArgumentError("unknown config key '" + key + "'");
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ArgumentError("expected key=value, got '" + assignment + "'");
  set_config_value(cfg, trim(std::string_view(assignment).substr(0, eq)),
                   trim(std::string_view(assignment).substr(eq + 1)));
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ArgumentError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const ArgumentError& e) {
      throw ArgumentError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read config " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), file.string());
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

std::string run_id(const RunConfig& cfg) { return sha256_hex(render_config(cfg)).substr(0, 12); }

void validate_config(const RunConfig& cfg) {
  if (!cfg.data_dir.empty() && !std::filesystem::is_directory(cfg.data_dir))
    throw DataError("data_dir does not exist: " + cfg.data_dir);
  if (!cfg.manifest.empty() && !std::filesystem::is_regular_file(cfg.manifest))
    throw DataError("manifest does not exist: " + cfg.manifest);
  if (cfg.output_dir.empty()) throw ArgumentError("output_dir must not be empty");
  cfg.cases();
  cfg.learn_config().validate();
  if (cfg.decimation < 1) throw ArgumentError("decimation must be at least 1");
  if (cfg.k_folds < 2) throw ArgumentError("k_folds must be at least 2");
  if (cfg.fold < -1 || cfg.fold >= cfg.k_folds)
    throw ArgumentError("fold must be -1 or in [0, k_folds)");
  if (cfg.synthetic()) {
    if (cfg.synthetic_signal_len < 1 || cfg.synthetic_n_atoms < 1 || cfg.synthetic_per_subset < 1)
      throw ArgumentError("synthetic sizes must be positive");
    if (cfg.synthetic_sparsity < 1 || cfg.synthetic_sparsity > cfg.synthetic_n_atoms)
      throw ArgumentError("synthetic.sparsity must be in [1, synthetic.n_atoms]");
  }
}

}  // namespace eegsrc
