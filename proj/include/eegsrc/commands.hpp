#pragma once

#include "eegsrc/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace eegsrc {

enum ExitCode : int { kExitOk = 0, kExitDataError = 1, kExitNumericError = 2 };

/// Prints where each subset's files are expected and which were found.
int cmd_layout(const std::filesystem::path& data_dir, std::ostream& out);

/// File counts, sample counts, numeric content and (with a manifest)
/// checksums. Returns 0 iff every subset passes.
int cmd_validate_data(const std::filesystem::path& data_dir, const std::string& manifest,
                      std::ostream& out);

void cmd_manifest(const std::filesystem::path& data_dir, const std::filesystem::path& file,
                  std::ostream& out);

/// The configured case's raw subsets: Bonn files, or planted synthetic
/// subsets when data_dir is empty.
SubsetMap load_case_data(const RunConfig& cfg, const std::vector<CaseId>& cases);

/// Each command below writes under <output_dir>/<run_id>/ and returns that directory.
std::filesystem::path cmd_train(const RunConfig& cfg, std::ostream& out);
std::filesystem::path cmd_evaluate(const RunConfig& cfg, std::ostream& out);
std::filesystem::path cmd_noise_sweep(const RunConfig& cfg, std::ostream& out);
std::filesystem::path cmd_export_case(const RunConfig& cfg, std::ostream& out);

/// Input is a Bonn text file (one sample per line, one epoch) or a CSV file
/// with one epoch per row; format "auto" picks CSV by the .csv extension.
/// Writes one CSV row per epoch to `out`.
void cmd_classify(const std::filesystem::path& model_dir, const std::filesystem::path& input,
                  const std::string& format, std::ostream& out);

/// Full command-line entry point; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eegsrc
