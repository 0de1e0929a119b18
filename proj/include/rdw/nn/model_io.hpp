#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdw/kinematics.hpp"
#include "rdw/nn/saccadenet.hpp"
#include "rdw/nn/train.hpp"
#include "rdw/schema.hpp"

namespace rdw::nn {

/// A trained network together with the input normalizer and the config it was trained with.
struct Model {
  SaccadeNet<double> net;
  Normalizer normalizer;
  TrainConfig config;

  /// Probability for one raw (unnormalized) 9 x 10 window.
  double predict(std::span<const double> raw_window) const {
    require(raw_window.size() == SaccadeNet<double>::kInputSize, "predict: window must hold 90 values");
    std::array<double, SaccadeNet<double>::kInputSize> z{};
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = normalizer.apply(k % kFeatureCount, raw_window[k]);
    return net.predict(z);
  }

  /// Probabilities for raw windows stored one per column (90 x B).
  std::vector<double> predict_batch(Mat<double> raw) const {
    if (raw.rows() != static_cast<Eigen::Index>(SaccadeNet<double>::kInputSize))
      fail(ErrorKind::shape, "predict_batch: windows must have 90 rows");
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
      for (Eigen::Index k = 0; k < raw.rows(); ++k)
        raw(k, j) = normalizer.apply(static_cast<std::size_t>(k) % kFeatureCount, raw(k, j));
    const Mat<double> p = net.forward(raw);
    return {p.data(), p.data() + p.size()};
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"split", c.split},
          {"seed", c.seed},               {"leaky_slope", c.leaky_slope},
          {"adam_beta1", c.adam_beta1},   {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},       {"pos_weight", c.pos_weight},
          {"session_split", c.session_split}, {"head_relu", c.head_relu}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.split = j.at("split").get<std::array<double, 3>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.pos_weight = j.at("pos_weight").get<double>();
  c.session_split = j.at("session_split").get<bool>();
  c.head_relu = j.at("head_relu").get<bool>();
  return c;
}

namespace detail {

inline constexpr std::array<char, 8> kModelMagic{'S', 'A', 'C', 'N', 'E', 'T', '\0', '\0'};
inline constexpr std::uint32_t kModelMajor = 1;
inline constexpr std::uint32_t kModelMinor = 0;

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) fail(ErrorKind::schema, "model file is truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace detail

/// Serialized bytes: magic, u32 major, u32 minor, u64 metadata length, JSON metadata,
/// then every tensor as little-endian f64 in metadata order.
inline std::string serialize_model(const Model& m) {
  using Net = SaccadeNet<double>;
  nlohmann::json meta;
  meta["schema_version"] = schema_version();
  meta["architecture"] = {{"conv_channels", Net::kConvChannels},
                          {"dense_sizes", Net::kDenseSizes},
                          {"kernel", kKernel},
                          {"leaky_slope", m.net.options.leaky_slope},
                          {"head_relu", m.net.options.head_relu},
                          {"parameter_count", Net::parameter_count()}};
  meta["normalizer"] = {{"mean", m.normalizer.mean}, {"stddev", m.normalizer.stddev}};
  meta["train_config"] = to_json(m.config);
  const auto params = m.net.parameters();
  const auto names = Net::parameter_names();
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i)
    table.push_back({{"name", names[i]}, {"shape", params[i]->shape}});
  meta["tensors"] = table;

  const std::string text = meta.dump();
  std::string out(detail::kModelMagic.begin(), detail::kModelMagic.end());
  detail::put_le<std::uint32_t>(out, detail::kModelMajor);
  detail::put_le<std::uint32_t>(out, detail::kModelMinor);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto* p : params)
    for (double v : p->data) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Model deserialize_model(const std::string& bytes) {
  using Net = SaccadeNet<double>;
  if (bytes.size() < 24 || !std::equal(detail::kModelMagic.begin(), detail::kModelMagic.end(), bytes.begin()))
    fail(ErrorKind::schema, "not a model file (bad magic)");
  std::size_t pos = 8;
  const auto major = detail::get_le<std::uint32_t>(bytes, pos);
  detail::get_le<std::uint32_t>(bytes, pos);
  if (major != detail::kModelMajor)
    fail(ErrorKind::schema, "unsupported model file major version " + std::to_string(major));
  const auto len = detail::get_le<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) fail(ErrorKind::schema, "model metadata is truncated");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(pos, len));
    pos += len;
    check_schema_version(meta.at("schema_version").get<std::string>(), "model");
    const auto& arch = meta.at("architecture");
    if (arch.at("conv_channels").get<std::vector<std::size_t>>() !=
            std::vector<std::size_t>(Net::kConvChannels.begin(), Net::kConvChannels.end()) ||
        arch.at("dense_sizes").get<std::vector<std::size_t>>() !=
            std::vector<std::size_t>(Net::kDenseSizes.begin(), Net::kDenseSizes.end()))
      fail(ErrorKind::schema, "model architecture does not match this build");

    Model m;
    m.net = Net(Net::Options{arch.at("leaky_slope").get<double>(), arch.at("head_relu").get<bool>()});
    m.normalizer.mean = meta.at("normalizer").at("mean").get<std::array<double, kFeatureCount>>();
    m.normalizer.stddev = meta.at("normalizer").at("stddev").get<std::array<double, kFeatureCount>>();
    m.config = train_config_from_json(meta.at("train_config"));

    auto params = m.net.parameters();
    const auto& table = meta.at("tensors");
    if (table.size() != params.size()) fail(ErrorKind::schema, "model tensor table has the wrong length");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (table[i].at("shape").get<Shape>() != params[i]->shape)
        fail(ErrorKind::schema, "model tensor " + table[i].at("name").get<std::string>() + " has shape " +
                                    shape_str(table[i].at("shape").get<Shape>()) + ", expected " +
                                    shape_str(params[i]->shape));
      for (auto& v : params[i]->data) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos));
    }
    if (pos != bytes.size()) fail(ErrorKind::schema, "model file has trailing bytes");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("model metadata: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const Model& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot write model file " + path.string());
  const auto bytes = serialize_model(m);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::io, "failed writing model file " + path.string());
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open model file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace rdw::nn
