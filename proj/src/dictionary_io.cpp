#include "eegsrc/checksum.hpp"
#include "eegsrc/errors.hpp"
#include "eegsrc/sparse_coding.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace eegsrc {

namespace {

constexpr const char* kFormat = "eegsrc-dictionary";
constexpr int kVersion = 1;

std::uint64_t byteswap64(std::uint64_t v) {
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | ((v >> (8 * i)) & 0xFF);
  return out;
}

std::string encode_le(const Eigen::MatrixXd& m) {
  std::string bytes(static_cast<std::size_t>(m.size()) * 8, '\0');
  for (Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    std::memcpy(bytes.data() + 8 * i, &bits, 8);
  }
  return bytes;
}

Eigen::MatrixXd decode_le(const std::string& bytes, Index rows, Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    m.data()[i] = std::bit_cast<double>(bits);
  }
  return m;
}

fs::path with_suffix(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_dictionary(const Dictionary& dict, const fs::path& stem) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const std::string payload = encode_le(dict.atoms());
  const fs::path bin = with_suffix(stem, ".bin");
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw DataError("cannot write " + bin.string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }

  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["signal_len"] = dict.signal_len();
  j["n_atoms"] = dict.n_atoms();
  j["class_tag"] = dict.class_tag() ? nlohmann::ordered_json(*dict.class_tag()) : nlohmann::ordered_json();
  const LearnMeta& meta = dict.learn_meta();
  j["learn_meta"] = {{"algorithm", meta.algorithm},
                     {"passes", meta.passes},
                     {"seed", meta.seed},
                     {"n_train", meta.n_train}};
  j["dtype"] = "float64-le";
  j["layout"] = "column-major";
  j["payload"] = bin.filename().string();
  j["sha256"] = sha256_hex(payload);

  const fs::path meta_path = with_suffix(stem, ".json");
  std::ofstream out(meta_path);
  if (!out) throw DataError("cannot write " + meta_path.string());
  out << j.dump(2) << '\n';
}

Dictionary load_dictionary(const fs::path& stem) {
  const fs::path meta_path = with_suffix(stem, ".json");
  nlohmann::json j;
  {
    std::ifstream in(meta_path);
    if (!in) throw DataError("missing dictionary metadata " + meta_path.string());
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed dictionary metadata " + meta_path.string() + ": " + e.what());
    }
  }
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw DataError(meta_path.string() + ": not a dictionary file");
    const Index rows = j.at("signal_len").get<Index>();
    const Index cols = j.at("n_atoms").get<Index>();
    const fs::path bin = meta_path.parent_path() / j.at("payload").get<std::string>();

    std::ifstream in(bin, std::ios::binary);
    if (!in) throw DataError("missing dictionary payload " + bin.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string payload = ss.str();
    if (static_cast<Index>(payload.size()) != rows * cols * 8)
      throw DataError(bin.string() + ": payload has " + std::to_string(payload.size()) +
                      " bytes, expected " + std::to_string(rows * cols * 8));
    const std::string digest = sha256_hex(payload);
    if (digest != j.at("sha256").get<std::string>())
      throw DataError(bin.string() + ": checksum mismatch");

    LearnMeta meta;
    const auto& lm = j.at("learn_meta");
    meta.algorithm = lm.value("algorithm", std::string("none"));
    meta.passes = lm.value("passes", 0);
    meta.seed = lm.value("seed", std::uint64_t{0});
    meta.n_train = lm.value("n_train", Index{0});
    std::optional<int> tag;
    if (!j.at("class_tag").is_null()) tag = j["class_tag"].get<int>();
    try {
      return Dictionary(decode_le(payload, rows, cols), tag, meta);
    } catch (const ArgumentError& e) {
      throw DataError(bin.string() + ": " + e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dictionary metadata " + meta_path.string() + ": " + e.what());
  }
}

}  // namespace eegsrc
