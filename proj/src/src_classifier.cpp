#include "eegsrc/src_classifier.hpp"

#include "eegsrc/errors.hpp"
#include "parallel.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace fs = std::filesystem;

namespace eegsrc {

std::string to_string(Algorithm a) { return a == Algorithm::cbwrlsu ? "cbwrlsu" : "mod"; }

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "cbwrlsu") return Algorithm::cbwrlsu;
  if (s == "mod") return Algorithm::mod;
  throw ArgumentError("unknown algorithm '" + s + "' (expected cbwrlsu or mod)");
}

EpochMatrix Preprocessing::apply(const EpochMatrix& raw) const {
  if (input_len > 0 && raw.size() > 0 && raw.segment_len() != input_len)
    throw ArgumentError("expected " + std::to_string(input_len) + " samples per epoch, got " +
                        std::to_string(raw.segment_len()));
  EpochMatrix out = decimate(raw, decimation);
  if (remove_mean) out = eegsrc::remove_mean(out);
  return out;
}

void SrcModel::validate() const {
  if (dictionaries.size() < 2) throw ArgumentError("a model needs at least two classes");
  if (class_names.size() != dictionaries.size())
    throw ArgumentError("class name count does not match dictionary count");
  for (std::size_t i = 0; i < dictionaries.size(); ++i) {
    if (dictionaries[i].signal_len() != signal_len())
      throw ArgumentError("class dictionaries disagree on signal length");
    if (dictionaries[i].class_tag() != static_cast<int>(i))
      throw ArgumentError("dictionary " + std::to_string(i) + " has the wrong class tag");
    coding.validate(dictionaries[i].n_atoms());
  }
}

SrcModel train_model(const LabeledDataset& train, const LearnConfig& learn, Algorithm algorithm,
                     std::vector<TrainingLog>* logs) {
  train.validate();
  learn.validate();
  const int n_classes = train.n_classes();
  if (n_classes < 2) throw ArgumentError("training set must have at least two classes");
  const auto counts = train.class_counts();
  for (int c = 0; c < n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw ArgumentError("class " + std::to_string(c) + " (" +
                          train.class_names[static_cast<std::size_t>(c)] +
                          ") is absent from the training set");

  SrcModel model;
  model.coding = learn.coding;
  model.class_names = train.class_names;
  model.case_id = train.case_id;
  model.dictionaries.resize(static_cast<std::size_t>(n_classes));
  std::vector<TrainingLog> local_logs(static_cast<std::size_t>(n_classes));

  detail::ExceptionSlot errors;
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < n_classes; ++c) {
    errors.run([&] {
      const EpochMatrix epochs = train.class_epochs(c);
      TrainingLog& log = local_logs[static_cast<std::size_t>(c)];
      Dictionary d = algorithm == Algorithm::cbwrlsu
                         ? train_cbwrlsu(epochs, learn, &log)
                         : train_mod(epochs, learn, learn.mod_iters, &log);
      d.set_class_tag(c);
      model.dictionaries[static_cast<std::size_t>(c)] = std::move(d);
    });
  }
  errors.rethrow();
  if (logs) *logs = std::move(local_logs);
  return model;
}

int argmin_label(const std::vector<double>& residuals) {
  int best = -1;
  for (std::size_t i = 0; i < residuals.size(); ++i)
    if (best < 0 || residuals[i] < residuals[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

ClassificationResult classify(const SrcModel& model, const Eigen::Ref<const Eigen::VectorXd>& signal) {
  if (signal.size() != model.signal_len())
    throw ArgumentError("expected signal length " + std::to_string(model.signal_len()) + ", got " +
                        std::to_string(signal.size()));
  ClassificationResult r;
  r.residuals.reserve(model.dictionaries.size());
  r.codes.reserve(model.dictionaries.size());
  for (const Dictionary& d : model.dictionaries) {
    SparseCode code = omp(d, signal, model.coding);
    r.residuals.push_back(reconstruction_error(signal, d, code));
    r.codes.push_back(std::move(code));
  }
  r.label = argmin_label(r.residuals);
  return r;
}

std::vector<ClassificationResult> classify_batch(const SrcModel& model, const Eigen::MatrixXd& signals) {
  if (signals.cols() > 0 && signals.rows() != model.signal_len())
    throw ArgumentError("expected signal length " + std::to_string(model.signal_len()) + ", got " +
                        std::to_string(signals.rows()));
  std::vector<ClassificationResult> out(static_cast<std::size_t>(signals.cols()));
  detail::ExceptionSlot errors;
  const Index count = signals.cols();
#pragma omp parallel for schedule(dynamic, 2)
  for (Index j = 0; j < count; ++j)
    errors.run([&] { out[static_cast<std::size_t>(j)] = classify(model, signals.col(j)); });
  errors.rethrow();
  return out;
}

std::vector<ClassificationResult> classify_batch(const SrcModel& model, const EpochMatrix& epochs) {
  return classify_batch(model, epochs.samples());
}

ClassificationResult classify_joint(const SrcModel& model, const Eigen::MatrixXd& signals) {
  if (signals.cols() == 0) throw ArgumentError("joint classification of an empty matrix");
  if (signals.rows() != model.signal_len())
    throw ArgumentError("expected signal length " + std::to_string(model.signal_len()));
  ClassificationResult r;
  for (const Dictionary& d : model.dictionaries) {
    const auto codes = batch_code(d, signals, model.coding);
    Eigen::MatrixXd approx(signals.rows(), signals.cols());
    for (Index j = 0; j < signals.cols(); ++j)
      approx.col(j) = reconstruct(d, codes[static_cast<std::size_t>(j)]);
    r.residuals.push_back((signals - approx).squaredNorm());
  }
  r.label = argmin_label(r.residuals);
  return r;
}

namespace serial {

std::vector<ClassificationResult> classify_batch(const SrcModel& model, const Eigen::MatrixXd& signals) {
  std::vector<ClassificationResult> out;
  out.reserve(static_cast<std::size_t>(signals.cols()));
  for (Index j = 0; j < signals.cols(); ++j) out.push_back(classify(model, signals.col(j)));
  return out;
}

}  // namespace serial

std::vector<ResidualEntry> residual_profile(const SrcModel& model,
                                            const Eigen::Ref<const Eigen::VectorXd>& signal) {
  const ClassificationResult r = classify(model, signal);
  std::vector<ResidualEntry> out;
  for (std::size_t i = 0; i < r.residuals.size(); ++i) {
    const Eigen::VectorXd approx = reconstruct(model.dictionaries[i], r.codes[i]);
    out.push_back({r.residuals[i], normalized_error(signal, approx)});
  }
  return out;
}

// --- bundle ---------------------------------------------------------------

void save_model(const SrcModel& model, const fs::path& dir) {
  model.validate();
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["format"] = "eegsrc-model";
  j["version"] = 1;
  j["class_names"] = model.class_names;
  j["case_id"] = model.case_id ? nlohmann::ordered_json(case_name(*model.case_id)) : nlohmann::ordered_json();
  j["coding"] = {{"max_sparsity", model.coding.max_sparsity},
                 {"residual_tol", model.coding.residual_tol},
                 {"stop_rule", to_string(model.coding.stop_rule)}};
  j["preprocessing"] = {{"decimation", model.preprocessing.decimation},
                        {"remove_mean", model.preprocessing.remove_mean},
                        {"input_len", model.preprocessing.input_len}};
  j["signal_len"] = model.signal_len();
  nlohmann::ordered_json dicts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < model.dictionaries.size(); ++i) {
    const std::string stem = "class_" + std::to_string(i);
    save_dictionary(model.dictionaries[i], dir / stem);
    dicts.push_back(stem);
  }
  j["dictionaries"] = dicts;
  std::ofstream out(dir / "model.json");
  if (!out) throw DataError("cannot write " + (dir / "model.json").string());
  out << j.dump(2) << '\n';
}

SrcModel load_model(const fs::path& dir) {
  const fs::path file = dir / "model.json";
  std::ifstream in(file);
  if (!in) throw DataError("missing model bundle " + file.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "eegsrc-model")
      throw DataError(file.string() + ": not a model bundle");
    SrcModel m;
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (!j.at("case_id").is_null()) m.case_id = case_from_name(j["case_id"].get<std::string>());
    const auto& c = j.at("coding");
    m.coding.max_sparsity = c.at("max_sparsity").get<int>();
    m.coding.residual_tol = c.at("residual_tol").get<double>();
    m.coding.stop_rule = stop_rule_from_string(c.at("stop_rule").get<std::string>());
    const auto& p = j.at("preprocessing");
    m.preprocessing.decimation = p.at("decimation").get<Index>();
    m.preprocessing.remove_mean = p.at("remove_mean").get<bool>();
    m.preprocessing.input_len = p.at("input_len").get<Index>();
    for (const auto& stem : j.at("dictionaries"))
      m.dictionaries.push_back(load_dictionary(dir / stem.get<std::string>()));
    try {
      m.validate();
    } catch (const ArgumentError& e) {
      throw DataError(file.string() + ": " + e.what());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model bundle " + file.string() + ": " + e.what());
  }
}

}  // namespace eegsrc
