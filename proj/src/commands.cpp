#include "eegsrc/commands.hpp"

#include "eegsrc/checksum.hpp"
#include "eegsrc/errors.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace eegsrc {

namespace {

constexpr int kMaxListedProblems = 10;

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
}

fs::path prepare_run_dir(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.output_dir) / run_id(cfg);
  fs::create_directories(dir);
  write_text(dir / "config.txt", render_config(cfg));
  return dir;
}

std::vector<Subset> subsets_for(const std::vector<CaseId>& cases) {
  std::set<Subset> needed;
  for (CaseId id : cases)
    for (const auto& members : case_classes(id)) needed.insert(members.begin(), members.end());
  return {needed.begin(), needed.end()};
}

LabeledDataset prepared_case(const RunConfig& cfg, CaseId id, const SubsetMap& raw) {
  const Preprocessing pre = cfg.preprocessing();
  SubsetMap ready;
  for (const auto& [s, epochs] : raw) ready[s] = pre.apply(epochs);
  return assemble_scenario(id, ready);
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool blank_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  char c;
  while (in.get(c))
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') return false;
  return true;
}

Eigen::MatrixXd read_csv_epochs(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      const std::string t = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw DataError(file.string() + ":" + std::to_string(line_no) + ": non-numeric value '" + t + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(rows.front().size()) + " values, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.empty() ? 0 : static_cast<Index>(rows.front().size()), static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    m.col(static_cast<Index>(j)) = Eigen::Map<const Eigen::VectorXd>(rows[j].data(), m.rows());
  return m;
}

nlohmann::ordered_json parsed(const std::string& text) { return nlohmann::ordered_json::parse(text); }

}  // namespace

// --- data commands --------------------------------------------------------

int cmd_layout(const fs::path& data_dir, std::ostream& out) {
  out << "data_dir: " << data_dir.string() << '\n';
  for (Subset s : kAllSubsets) {
    const fs::path dir = resolve_subset_dir(data_dir, s);
    int found = 0;
    for (int i = 0; i < kBonnEpochsPerSubset; ++i)
      if (fs::is_regular_file(bonn_file_path(dir, s, i))) ++found;
    out << subset_letter(s) << ": " << dir.string() << "  files " << bonn_file_path(dir, s, 0).filename().string()
        << " .. " << bonn_file_path(dir, s, kBonnEpochsPerSubset - 1).filename().string() << "  found "
        << found << '/' << kBonnEpochsPerSubset << '\n';
  }
  return kExitOk;
}

int cmd_validate_data(const fs::path& data_dir, const std::string& manifest, std::ostream& out) {
  std::optional<Manifest> sums;
  if (!manifest.empty()) sums = read_manifest(manifest);
  int ok = 0;
  for (Subset s : kAllSubsets) {
    const fs::path dir = resolve_subset_dir(data_dir, s);
    std::vector<std::string> problems;
    for (int i = 0; i < kBonnEpochsPerSubset; ++i) {
      const fs::path file = bonn_file_path(dir, s, i);
      if (!fs::is_regular_file(file)) {
        problems.push_back("missing " + file.string());
        continue;
      }
      try {
        load_bonn_file(file, kBonnSegmentLen);
      } catch (const DataError& e) {
        problems.push_back(e.what());
        continue;
      }
      if (sums) {
        const auto entry = sums->find(s);
        const std::string name = file.filename().string();
        if (entry == sums->end() || !entry->second.sha256.count(name))
          problems.push_back("no checksum for " + file.string());
        else if (entry->second.sha256.at(name) != sha256_file(file))
          problems.push_back("checksum mismatch for " + file.string());
      }
    }
    if (problems.empty()) {
      ++ok;
      out << subset_letter(s) << ": OK (" << kBonnEpochsPerSubset << " files)\n";
      continue;
    }
    out << subset_letter(s) << ": FAIL (" << problems.size() << " problems)\n";
    for (std::size_t i = 0; i < problems.size() && i < kMaxListedProblems; ++i) out << "  " << problems[i] << '\n';
    if (problems.size() > kMaxListedProblems)
      out << "  ... " << problems.size() - kMaxListedProblems << " more\n";
  }
  out << ok << '/' << kAllSubsets.size() << " subsets OK\n";
  return ok == static_cast<int>(kAllSubsets.size()) ? kExitOk : kExitDataError;
}

void cmd_manifest(const fs::path& data_dir, const fs::path& file, std::ostream& out) {
  const fs::path parent = file.has_parent_path() ? file.parent_path() : fs::path(".");
  const Manifest m = build_manifest(data_dir, parent);
  write_manifest(file, m);
  out << "wrote " << file.string() << " (" << m.size() << " subsets)\n";
}

SubsetMap load_case_data(const RunConfig& cfg, const std::vector<CaseId>& cases) {
  const auto needed = subsets_for(cases);
  if (cfg.synthetic()) {
    SubsetMap all = synthetic_subsets(cfg.synthetic_signal_len, cfg.synthetic_n_atoms, cfg.synthetic_sparsity,
                                      cfg.synthetic_per_subset, cfg.synthetic_seed);
    SubsetMap out;
    for (Subset s : needed) out[s] = std::move(all.at(s));
    return out;
  }
  std::optional<fs::path> manifest;
  if (!cfg.manifest.empty()) manifest = cfg.manifest;
  return load_bonn_dataset(cfg.data_dir, needed, manifest);
}

// --- model commands -------------------------------------------------------

fs::path cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto cases = cfg.cases();
  if (cases.size() != 1) throw ArgumentError("train needs a single case, not 'all'");
  const CaseId id = cases.front();
  const LabeledDataset all = prepared_case(cfg, id, load_case_data(cfg, cases));
  LabeledDataset train = all;
  if (cfg.fold >= 0) {
    const auto folds = stratified_kfold(all, cfg.k_folds, cfg.seed);
    train = all.select(folds[static_cast<std::size_t>(cfg.fold)].train_indices);
  }

  std::vector<TrainingLog> logs;
  SrcModel model = train_model(train, cfg.learn_config(), cfg.algorithm, &logs);
  model.preprocessing = cfg.preprocessing();

  const fs::path dir = prepare_run_dir(cfg);
  save_model(model, dir / "model");
  nlohmann::ordered_json log_json = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < logs.size(); ++c) {
    auto entry = parsed(training_log_json(logs[c]));
    entry["class"] = model.class_names[c];
    log_json.push_back(entry);
  }
  nlohmann::ordered_json doc;
  doc["case_id"] = case_name(id);
  doc["n_train"] = train.epochs.size();
  doc["classes"] = log_json;
  doc["config"] = render_config(cfg);
  write_text(dir / "training_log.json", doc.dump(2) + "\n");

  out << "case " << case_name(id) << ": trained " << model.n_classes() << " dictionaries ("
      << cfg.n_atoms << " atoms, signal length " << model.signal_len() << ") on " << train.epochs.size()
      << " epochs\n";
  out << "model: " << (dir / "model").string() << '\n';
  return dir;
}

void cmd_classify(const fs::path& model_dir, const fs::path& input, const std::string& format,
                  std::ostream& out) {
  const SrcModel model = load_model(model_dir);
  std::string fmt = format;
  if (fmt == "auto") {
    std::string ext = input.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    fmt = ext == ".csv" ? "csv" : "bonn";
  }
  if (fmt != "csv" && fmt != "bonn") throw ArgumentError("unknown input format '" + format + "'");
  if (blank_file(input)) return;

  const Index raw_len = model.preprocessing.input_len > 0 ? model.preprocessing.input_len
                                                          : model.signal_len() * model.preprocessing.decimation;
  EpochMatrix raw(raw_len);
  if (fmt == "bonn") {
    raw.append(load_bonn_file(input, raw_len), EpochInfo{});
  } else {
    const Eigen::MatrixXd m = read_csv_epochs(input);
    if (m.rows() != raw_len)
      throw DataError(input.string() + ": expected " + std::to_string(raw_len) + " samples per epoch, found " +
                      std::to_string(m.rows()));
    for (Index j = 0; j < m.cols(); ++j) raw.append(m.col(j), EpochInfo{});
  }
  const EpochMatrix ready = model.preprocessing.apply(raw);
  const auto results = classify_batch(model, ready);

  out << "epoch,label,class";
  for (const auto& name : model.class_names) out << ",residual_" << name;
  for (const auto& name : model.class_names) out << ",normalized_error_" << name;
  out << '\n';
  for (std::size_t j = 0; j < results.size(); ++j) {
    const auto& r = results[j];
    out << j << ',' << r.label << ',' << model.class_names[static_cast<std::size_t>(r.label)];
    for (double v : r.residuals) out << ',' << number(v);
    const auto y = ready.epoch(static_cast<Index>(j));
    for (std::size_t c = 0; c < r.codes.size(); ++c)
      out << ',' << number(normalized_error(y, reconstruct(model.dictionaries[c], r.codes[c])));
    out << '\n';
  }
}

// --- evaluation commands --------------------------------------------------

fs::path cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto cases = cfg.cases();
  const SubsetMap data = load_case_data(cfg, cases);
  const EvalConfig eval = cfg.eval_config();
  std::vector<CaseReport> reports;
  for (CaseId id : cases) reports.push_back(run_case(id, data, eval));

  const fs::path dir = prepare_run_dir(cfg);
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : reports) doc.push_back(parsed(case_report_json(r)));
  write_text(dir / "report.json", doc.dump(2) + "\n");
  write_case_csv(dir / "report.csv", reports);
  const std::string table = summary_table(reports);
  write_text(dir / "summary.txt", table);
  out << table << "report: " << (dir / "report.csv").string() << '\n';
  return dir;
}

fs::path cmd_noise_sweep(const RunConfig& cfg, std::ostream& out) {
  const auto cases = cfg.cases();
  const SubsetMap data = load_case_data(cfg, cases);
  const EvalConfig eval = cfg.eval_config();
  std::vector<NoiseSweepReport> reports;
  for (CaseId id : cases) reports.push_back(noise_sweep(id, data, eval, cfg.snr_grid));

  const fs::path dir = prepare_run_dir(cfg);
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : reports) doc.push_back(parsed(sweep_report_json(r)));
  write_text(dir / "sweep.json", doc.dump(2) + "\n");
  write_sweep_csv(dir / "sweep.csv", reports);
  const std::string table = sweep_table(reports);
  write_text(dir / "sweep.txt", table);
  out << table << "report: " << (dir / "sweep.csv").string() << '\n';
  return dir;
}

fs::path cmd_export_case(const RunConfig& cfg, std::ostream& out) {
  const auto cases = cfg.cases();
  const SubsetMap data = load_case_data(cfg, cases);
  const fs::path dir = prepare_run_dir(cfg);
  for (CaseId id : cases) {
    const fs::path file = dir / ("case_" + case_name(id) + ".csv");
    write_dataset_csv(file, prepared_case(cfg, id, data));
    out << "wrote " << file.string() << '\n';
  }
  return dir;
}

// --- command line ---------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-representation EEG seizure classifier"};
  app.name("eegsrc");
  app.require_subcommand(1);

  struct ConfigFlags {
    std::string config;
    std::vector<std::string> sets;
    std::vector<std::pair<std::string, std::string>> direct;  // key, value in flag order
  };
  ConfigFlags flags;
  std::string data_dir, manifest, output, model_dir, input, format = "auto";

  const auto add_config_options = [&](CLI::App* sub) {
    sub->add_option("-c,--config", flags.config, "Run configuration file");
    sub->add_option("--set", flags.sets, "Override a config key (key=value), repeatable");
    for (const char* key : {"data_dir", "output_dir", "case", "algorithm", "seed", "manifest"}) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      sub->add_option_function<std::string>(
          flag, [&flags, key](const std::string& v) { flags.direct.emplace_back(key, v); },
          std::string("Same as --set ") + key + "=...");
    }
  };

  auto* layout = app.add_subcommand("layout", "Show where Bonn files are looked up");
  layout->add_option("--data-dir", data_dir, "Bonn data root")->required();
  auto* validate = app.add_subcommand("validate-data", "Check Bonn files (counts, lengths, checksums)");
  validate->add_option("--data-dir", data_dir, "Bonn data root")->required();
  validate->add_option("--manifest", manifest, "Checksum manifest");
  auto* manifest_cmd = app.add_subcommand("manifest", "Write a checksum manifest for a Bonn data root");
  manifest_cmd->add_option("--data-dir", data_dir, "Bonn data root")->required();
  manifest_cmd->add_option("-o,--out", output, "Manifest file")->required();
  auto* train = app.add_subcommand("train", "Train a model bundle for one case");
  add_config_options(train);
  auto* classify_cmd = app.add_subcommand("classify", "Classify epochs with a trained bundle");
  classify_cmd->add_option("-m,--model", model_dir, "Model bundle directory")->required();
  classify_cmd->add_option("-i,--input", input, "Bonn text file or CSV (one epoch per row)")->required();
  classify_cmd->add_option("--format", format, "auto, bonn or csv");
  classify_cmd->add_option("-o,--out", output, "Output CSV (default stdout)");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate the configured case(s)");
  add_config_options(evaluate);
  auto* sweep = app.add_subcommand("noise-sweep", "Accuracy versus test-noise SNR");
  add_config_options(sweep);
  auto* export_cmd = app.add_subcommand("export-case", "Write the assembled case dataset as CSV");
  add_config_options(export_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitDataError;
  }

  const auto config = [&] {
    RunConfig cfg = flags.config.empty() ? RunConfig{} : load_config(flags.config);
    for (const auto& s : flags.sets) apply_override(cfg, s);
    for (const auto& [key, value] : flags.direct) set_config_value(cfg, key, value);
    validate_config(cfg);
    return cfg;
  };

  try {
    if (*layout) return cmd_layout(data_dir, out);
    if (*validate) return cmd_validate_data(data_dir, manifest, out);
    if (*manifest_cmd) {
      cmd_manifest(data_dir, output, out);
    } else if (*train) {
      cmd_train(config(), out);
    } else if (*classify_cmd) {
      if (output.empty()) {
        cmd_classify(model_dir, input, format, out);
      } else {
        std::ostringstream buffer;
        cmd_classify(model_dir, input, format, buffer);
        write_text(output, buffer.str());
      }
    } else if (*evaluate) {
      cmd_evaluate(config(), out);
    } else if (*sweep) {
      cmd_noise_sweep(config(), out);
    } else if (*export_cmd) {
      cmd_export_case(config(), out);
    }
    return kExitOk;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumericError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace eegsrc
