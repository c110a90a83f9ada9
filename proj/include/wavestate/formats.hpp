#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavestate/errors.hpp"
#include "wavestate/io.hpp"
#include "wavestate/models.hpp"
#include "wavestate/state.hpp"
#include "wavestate/synthwave.hpp"

// Binary containers for synthetic datasets (WSDS) and trained networks
// (WSCK). All integers and reals are little-endian.
namespace wavestate {

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

// ---------------------------------------------------------------- datasets

struct DatasetFile {
  std::string config_echo;  // generator settings as key = value text
  std::vector<synth::TimeSeriesRecord> records;

  friend bool operator==(const DatasetFile&, const DatasetFile&) = default;
};

// "WSDS", u16 version, u32 echo length, echo, u32 record count, records.
inline io::Bytes encode_dataset(const DatasetFile& d) {
  io::Writer w;
  w.text("WSDS");
  w.le<std::uint16_t>(kDatasetVersion);
  if (d.config_echo.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("config echo too long");
  w.le<std::uint32_t>(static_cast<std::uint32_t>(d.config_echo.size()));
  w.text(d.config_echo);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(d.records.size()));
  for (const auto& r : d.records) {
    if (!r.state.on_grid() || !r.path.valid()) throw InvalidArgument("record state " + to_string(r.state) + " is off the grid");
    w.le<std::uint8_t>(static_cast<std::uint8_t>(r.state.level));
    w.le<std::uint8_t>(static_cast<std::uint8_t>(load_index(r.state.load_kn)));
    w.le<std::uint8_t>(static_cast<std::uint8_t>(r.path.index()));
    w.le<std::uint16_t>(r.trial);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(r.samples.size()));
    for (double v : r.samples) w.f64(v);
  }
  return w.take();
}

inline DatasetFile decode_dataset(const io::Bytes& bytes, const std::string& what = "dataset") {
  io::Reader r(bytes, what);
  r.expect_magic("WSDS");
  const auto version = r.le<std::uint16_t>();
  if (version != kDatasetVersion)
    throw FormatError(what + ": unsupported dataset version " + std::to_string(version));
  DatasetFile d;
  d.config_echo = r.text(r.le<std::uint32_t>());
  const auto count = r.le<std::uint32_t>();
  d.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    synth::TimeSeriesRecord rec;
    const int level = r.le<std::uint8_t>();
    const int load_idx = r.le<std::uint8_t>();
    const int path = r.le<std::uint8_t>();
    if (!is_valid_level(level) || load_idx > 4 || path < 1 || path > 9)
      throw FormatError(what + ": record " + std::to_string(i) + " has an invalid state");
    rec.state = {level, load_idx * kLoadStepKn, std::nullopt};
    rec.path = SensorPath::from_index(path);
    rec.trial = r.le<std::uint16_t>();
    const auto n = r.le<std::uint32_t>();
    r.need(static_cast<std::size_t>(n) * 8);
    rec.samples.resize(n);
    for (auto& v : rec.samples) v = r.f64();
    d.records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw FormatError(what + ": trailing bytes after " + std::to_string(count) + " records");
  return d;
}

inline void save_dataset(const std::filesystem::path& path, const DatasetFile& d) {
  io::atomic_write(path, encode_dataset(d));
}

inline DatasetFile load_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path), path.string());
}

// ------------------------------------------------------------- checkpoints

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw FormatError("checkpoint has no tensor '" + name + "'");
  }
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// "WSCK", u16 version, u32 metadata length, JSON, then tensor blocks until
// the end of the file.
inline io::Bytes encode_checkpoint(const Checkpoint& c) {
  io::Writer w;
  w.text("WSCK");
  w.le<std::uint16_t>(kCheckpointVersion);
  const std::string meta = c.metadata.dump();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  w.text(meta);
  for (const auto& [name, t] : c.tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidArgument("tensor name too long");
    if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw InvalidArgument("tensor rank too large");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("tensor dimension too large");
      w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    }
    for (double v : t.values()) w.f64(v);
  }
  return w.take();
}

inline Checkpoint decode_checkpoint(const io::Bytes& bytes, const std::string& what = "checkpoint") {
  io::Reader r(bytes, what);
  r.expect_magic("WSCK");
  const auto version = r.le<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  const std::string meta = r.text(r.le<std::uint32_t>());
  try {
    c.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": metadata is not valid JSON: " + e.what());
  }
  while (!r.at_end()) {
    std::string name = r.text(r.le<std::uint16_t>());
    Shape shape(r.le<std::uint8_t>());
    for (auto& d : shape) d = r.le<std::uint32_t>();
    const std::size_t n = shape_size(shape);
    r.need(n * 8);
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::atomic_write(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

namespace detail {

inline void append_params(Checkpoint& c, const std::string& prefix, const nn::ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].weight.empty() && params[i].bias.empty()) continue;
    c.tensors.emplace_back(prefix + "." + std::to_string(i) + ".weight", params[i].weight);
    c.tensors.emplace_back(prefix + "." + std::to_string(i) + ".bias", params[i].bias);
  }
}

// Fills a freshly shaped parameter set from named blocks, insisting that
// every expected block is present with the expected shape.
inline nn::ParameterSet read_params(const Checkpoint& c, const std::string& prefix, const nn::Network& net,
                                    std::size_t& consumed) {
  nn::ParameterSet params = nn::zero_parameters(net);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (auto [slot, suffix] : {std::pair{&params[i].weight, ".weight"}, std::pair{&params[i].bias, ".bias"}}) {
      if (slot->empty()) continue;
      const std::string name = prefix + "." + std::to_string(i) + suffix;
      const Tensor& t = c.tensor(name);
      if (t.shape() != slot->shape())
        throw FormatError("tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                          shape_string(slot->shape()));
      *slot = t;
      ++consumed;
    }
  }
  return params;
}

inline void check_all_consumed(const Checkpoint& c, std::size_t consumed) {
  if (consumed != c.tensors.size())
    throw FormatError("checkpoint holds " + std::to_string(c.tensors.size()) + " tensors, model uses " +
                      std::to_string(consumed));
}

template <typename T>
T meta_get(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("checkpoint metadata lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata field '") + key + "': " + e.what());
  }
}

inline std::string role_of(const Checkpoint& c) { return meta_get<std::string>(c.metadata, "role"); }

}  // namespace detail

// Extra run facts (seed, epochs, version string) merge into the metadata.
inline Checkpoint cae_checkpoint(const CaeModel& m, const nlohmann::json& extra = nlohmann::json::object()) {
  Checkpoint c;
  c.metadata = extra;
  c.metadata["role"] = "cae";
  c.metadata["model_type"] = static_cast<int>(m.spec.model_type);
  c.metadata["spec"] = {{"latent_width", m.spec.latent_width},
                        {"filters", m.spec.first_filters},
                        {"dense_width", m.spec.dense_width},
                        {"signal_length", m.spec.signal_length}};
  detail::append_params(c, "encoder", m.encoder_params);
  detail::append_params(c, "decoder", m.decoder_params);
  return c;
}

inline CaeModel cae_from_checkpoint(const Checkpoint& c) {
  if (detail::role_of(c) != "cae") throw FormatError("checkpoint does not hold an autoencoder");
  const auto& s = detail::meta_get<nlohmann::json>(c.metadata, "spec");
  CaeSpec spec;
  try {
    spec.model_type = model_type_from_int(detail::meta_get<int>(c.metadata, "model_type"));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  spec.latent_width = detail::meta_get<std::size_t>(s, "latent_width");
  spec.first_filters = detail::meta_get<std::size_t>(s, "filters");
  spec.dense_width = detail::meta_get<std::size_t>(s, "dense_width");
  spec.signal_length = detail::meta_get<std::size_t>(s, "signal_length");
  CaeModel m;
  m.spec = spec;
  m.networks = build_cae(spec);
  std::size_t consumed = 0;
  m.encoder_params = detail::read_params(c, "encoder", m.networks.encoder, consumed);
  m.decoder_params = detail::read_params(c, "decoder", m.networks.decoder, consumed);
  detail::check_all_consumed(c, consumed);
  return m;
}

inline Checkpoint ffnn_checkpoint(const FfnnModel& m, const std::string& role,
                                  const nlohmann::json& extra = nlohmann::json::object()) {
  Checkpoint c;
  c.metadata = extra;
  c.metadata["role"] = role;
  c.metadata["spec"] = {{"input_width", m.spec.input_width},
                        {"output_width", m.spec.output_width},
                        {"hidden_width", m.spec.hidden_width},
                        {"hidden_depth", m.spec.hidden_depth},
                        {"activation", std::string(nn::to_string(m.spec.hidden_activation))}};
  detail::append_params(c, "layers", m.params);
  auto vec = [](const std::vector<double>& v) { return Tensor({v.size()}, v); };
  c.tensors.emplace_back("input_scaling.offset", vec(m.input_scaling.offset));
  c.tensors.emplace_back("input_scaling.scale", vec(m.input_scaling.scale));
  c.tensors.emplace_back("output_scaling.offset", vec(m.output_scaling.offset));
  c.tensors.emplace_back("output_scaling.scale", vec(m.output_scaling.scale));
  return c;
}

inline FfnnModel ffnn_from_checkpoint(const Checkpoint& c, const std::string& role) {
  if (detail::role_of(c) != role) throw FormatError("checkpoint role is '" + detail::role_of(c) + "', expected '" + role + "'");
  const auto& s = detail::meta_get<nlohmann::json>(c.metadata, "spec");
  FfnnSpec spec;
  spec.input_width = detail::meta_get<std::size_t>(s, "input_width");
  spec.output_width = detail::meta_get<std::size_t>(s, "output_width");
  spec.hidden_width = detail::meta_get<std::size_t>(s, "hidden_width");
  spec.hidden_depth = detail::meta_get<std::size_t>(s, "hidden_depth");
  try {
    spec.hidden_activation = nn::activation_from_string(detail::meta_get<std::string>(s, "activation"));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  FfnnModel m;
  m.spec = spec;
  m.network = build_ffnn(spec);
  std::size_t consumed = 0;
  m.params = detail::read_params(c, "layers", m.network, consumed);
  auto vec = [&](const std::string& name, std::size_t n) {
    const Tensor& t = c.tensor(name);
    if (t.shape() != Shape{n}) throw FormatError("tensor '" + name + "' has shape " + shape_string(t.shape()));
    ++consumed;
    return t.to_vector();
  };
  m.input_scaling = {vec("input_scaling.offset", spec.input_width), vec("input_scaling.scale", spec.input_width)};
  m.output_scaling = {vec("output_scaling.offset", spec.output_width), vec("output_scaling.scale", spec.output_width)};
  detail::check_all_consumed(c, consumed);
  return m;
}

}  // namespace wavestate
