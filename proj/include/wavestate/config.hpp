#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "wavestate/analysis.hpp"
#include "wavestate/errors.hpp"
#include "wavestate/models.hpp"
#include "wavestate/pipeline.hpp"
#include "wavestate/synthwave.hpp"
#include "wavestate/trainer.hpp"

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Every key has a default; unknown keys are errors.
namespace wavestate {

struct ReportThresholds {
  double min_accuracy = 0.95;
  double max_mean_rss_sss = 5.0;  // percent, autoencoder branch

  friend bool operator==(const ReportThresholds&, const ReportThresholds&) = default;
};

struct RunConfig {
  std::uint64_t seed = 20240601;
  std::optional<std::uint64_t> synth_seed;  // defaults to `seed`
  std::string output_dir = "out";
  synth::SynthConfig synth;
  std::size_t downsample_factor = 10;
  CaeSpec cae;
  FfnnSpec ffnn;
  TrainConfig cae_train{60, 4, 1e-3, 20240601, std::nullopt, 0};
  TrainConfig ffnn_train{300, 4, 1e-3, 20240601, std::nullopt, 0};
  SplitSpec split = SplitSpec::paper_default();
  bool split_explicit = false;  // false: derived from the trial multiplier
  SpectrogramSpec spectrogram;
  ReportThresholds report;

  // Propagates the shared seed and derived values; call after edits.
  void resolve() {
    synth.seed = synth_seed.value_or(seed);
    cae_train.seed = seed;
    ffnn_train.seed = seed;
    cae.signal_length = synth.record_length / downsample_factor;
    spectrogram.sample_rate = synth.sample_rate / static_cast<double>(downsample_factor);
    if (!split_explicit) {
      const auto excluded = split.excluded_train_loads;
      split = SplitSpec::scaled(synth.trial_multiplier);
      split.excluded_train_loads = excluded;
    }
  }

  void validate() const {
    synth.validate();
    if (downsample_factor == 0 || synth.record_length % downsample_factor)
      throw ConfigError(0, "record_length must be divisible by downsample_factor");
    cae.validate();
    cae_train.validate();
    ffnn_train.validate();
    spectrogram.validate();
    for (int l : split.excluded_train_loads)
      if (!is_valid_load(l)) throw ConfigError(0, "excluded load " + std::to_string(l) + " kN is not on the grid");
  }

  FrameworkConfig framework() const { return {cae, ffnn, cae_train, ffnn_train}; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

template <typename T>
T parse_number(std::string_view s) {
  s = trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument("'" + std::string(s) + "' is not a valid number");
  return v;
}

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string format_points(const std::array<synth::Point, 3>& pts) {
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ",";
    out += format_double(p.x) + ":" + format_double(p.y);
  }
  return out;
}

inline synth::Point parse_point(std::string_view s) {
  const auto xy = split_list(s, ':');
  if (xy.size() != 2) throw InvalidArgument("expected x:y, got '" + std::string(s) + "'");
  return {parse_number<double>(xy[0]), parse_number<double>(xy[1])};
}

inline std::array<synth::Point, 3> parse_points(std::string_view s) {
  const auto items = split_list(s, ',');
  if (items.size() != 3) throw InvalidArgument("expected three x:y points");
  return {parse_point(items[0]), parse_point(items[1]), parse_point(items[2])};
}

struct ConfigKey {
  std::string_view name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
ConfigKey number_key(std::string_view name, T RunConfig::*member) {
  return {name, [member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

// Keys for fields nested one level down, e.g. synth.noise_std.
template <typename Outer, typename T>
ConfigKey nested_key(std::string_view name, Outer RunConfig::*outer, T Outer::*member) {
  return {name, [outer, member](RunConfig& c, std::string_view v) { (c.*outer).*member = parse_number<T>(v); },
          [outer, member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          }};
}

inline const std::vector<ConfigKey>& config_keys() {
  using synth::SynthConfig;
  static const std::vector<ConfigKey> keys = {
      number_key("seed", &RunConfig::seed),
      {"output_dir", [](RunConfig& c, std::string_view v) { c.output_dir = std::string(v); },
       [](const RunConfig& c) { return c.output_dir; }},

      {"synth.seed", [](RunConfig& c, std::string_view v) { c.synth_seed = parse_number<std::uint64_t>(v); },
       [](const RunConfig& c) { return std::to_string(c.synth_seed.value_or(c.seed)); }},
      nested_key("synth.sample_rate", &RunConfig::synth, &SynthConfig::sample_rate),
      nested_key("synth.record_length", &RunConfig::synth, &SynthConfig::record_length),
      nested_key("synth.center_frequency", &RunConfig::synth, &SynthConfig::center_frequency),
      nested_key("synth.n_peaks", &RunConfig::synth, &SynthConfig::n_peaks),
      nested_key("synth.plate_width", &RunConfig::synth, &SynthConfig::plate_width),
      nested_key("synth.plate_length", &RunConfig::synth, &SynthConfig::plate_length),
      {"synth.actuators", [](RunConfig& c, std::string_view v) { c.synth.actuators = parse_points(v); },
       [](const RunConfig& c) { return format_points(c.synth.actuators); }},
      {"synth.receivers", [](RunConfig& c, std::string_view v) { c.synth.receivers = parse_points(v); },
       [](const RunConfig& c) { return format_points(c.synth.receivers); }},
      {"synth.damage_site", [](RunConfig& c, std::string_view v) { c.synth.damage_site = parse_point(v); },
       [](const RunConfig& c) { return format_double(c.synth.damage_site.x) + ":" + format_double(c.synth.damage_site.y); }},
      nested_key("synth.base_speed", &RunConfig::synth, &SynthConfig::base_speed),
      nested_key("synth.damage_speed_coeff", &RunConfig::synth, &SynthConfig::damage_speed_coeff),
      nested_key("synth.load_speed_coeff", &RunConfig::synth, &SynthConfig::load_speed_coeff),
      nested_key("synth.damage_scatter_gain", &RunConfig::synth, &SynthConfig::damage_scatter_gain),
      nested_key("synth.n_reflections", &RunConfig::synth, &SynthConfig::n_reflections),
      nested_key("synth.reflection_decay", &RunConfig::synth, &SynthConfig::reflection_decay),
      nested_key("synth.noise_std", &RunConfig::synth, &SynthConfig::noise_std),
      nested_key("synth.trial_multiplier", &RunConfig::synth, &SynthConfig::trial_multiplier),

      number_key("pipeline.downsample_factor", &RunConfig::downsample_factor),

      {"cae.model_type",
       [](RunConfig& c, std::string_view v) { c.cae.model_type = model_type_from_int(parse_number<int>(v)); },
       [](const RunConfig& c) { return std::to_string(static_cast<int>(c.cae.model_type)); }},
      nested_key("cae.latent_width", &RunConfig::cae, &CaeSpec::latent_width),
      nested_key("cae.filters", &RunConfig::cae, &CaeSpec::first_filters),
      nested_key("cae.dense_width", &RunConfig::cae, &CaeSpec::dense_width),

      nested_key("ffnn.hidden_width", &RunConfig::ffnn, &FfnnSpec::hidden_width),
      nested_key("ffnn.hidden_depth", &RunConfig::ffnn, &FfnnSpec::hidden_depth),
      {"ffnn.activation", [](RunConfig& c, std::string_view v) { c.ffnn.hidden_activation = nn::activation_from_string(v); },
       [](const RunConfig& c) { return std::string(nn::to_string(c.ffnn.hidden_activation)); }},

      nested_key("train.cae_epochs", &RunConfig::cae_train, &TrainConfig::epochs),
      nested_key("train.cae_batch_size", &RunConfig::cae_train, &TrainConfig::batch_size),
      nested_key("train.cae_learning_rate", &RunConfig::cae_train, &TrainConfig::learning_rate),
      nested_key("train.ffnn_epochs", &RunConfig::ffnn_train, &TrainConfig::epochs),
      nested_key("train.ffnn_batch_size", &RunConfig::ffnn_train, &TrainConfig::batch_size),
      nested_key("train.ffnn_learning_rate", &RunConfig::ffnn_train, &TrainConfig::learning_rate),
      {"train.patience",
       [](RunConfig& c, std::string_view v) {
         const auto p = v == "none" ? std::nullopt : std::optional<std::size_t>(parse_number<std::size_t>(v));
         c.cae_train.patience = c.ffnn_train.patience = p;
       },
       [](const RunConfig& c) { return c.cae_train.patience ? std::to_string(*c.cae_train.patience) : std::string("none"); }},
      {"train.threads",
       [](RunConfig& c, std::string_view v) { c.cae_train.threads = c.ffnn_train.threads = parse_number<std::size_t>(v); },
       [](const RunConfig& c) { return std::to_string(c.cae_train.threads); }},

      {"split.train_trials",
       [](RunConfig& c, std::string_view v) {
         c.split.train_trials = parse_number<std::size_t>(v);
         c.split_explicit = true;
       },
       [](const RunConfig& c) { return std::to_string(c.split.train_trials); }},
      {"split.test_trials",
       [](RunConfig& c, std::string_view v) {
         c.split.test_trials = parse_number<std::size_t>(v);
         c.split_explicit = true;
       },
       [](const RunConfig& c) { return std::to_string(c.split.test_trials); }},
      {"split.per_load",  // load:train:test,...
       [](RunConfig& c, std::string_view v) {
         c.split.per_load.clear();
         for (auto item : split_list(v, ',')) {
           const auto f = split_list(item, ':');
           if (f.size() != 3) throw InvalidArgument("expected load:train:test, got '" + std::string(item) + "'");
           c.split.per_load[parse_number<int>(f[0])] = {parse_number<std::size_t>(f[1]), parse_number<std::size_t>(f[2])};
         }
         c.split_explicit = true;
       },
       [](const RunConfig& c) {
         std::string out;
         for (const auto& [load, tt] : c.split.per_load) {
           if (!out.empty()) out += ",";
           out += std::to_string(load) + ":" + std::to_string(tt.first) + ":" + std::to_string(tt.second);
         }
         return out;
       }},
      {"split.exclude_loads",
       [](RunConfig& c, std::string_view v) {
         c.split.excluded_train_loads.clear();
         for (auto item : split_list(v, ',')) c.split.excluded_train_loads.insert(parse_number<int>(item));
       },
       [](const RunConfig& c) {
         std::string out;
         for (int l : c.split.excluded_train_loads) out += (out.empty() ? "" : ",") + std::to_string(l);
         return out;
       }},

      nested_key("spectrogram.segment_length", &RunConfig::spectrogram, &SpectrogramSpec::segment_length),
      nested_key("spectrogram.overlap", &RunConfig::spectrogram, &SpectrogramSpec::overlap),

      nested_key("report.min_accuracy", &RunConfig::report, &ReportThresholds::min_accuracy),
      nested_key("report.max_mean_rss_sss", &RunConfig::report, &ReportThresholds::max_mean_rss_sss),
  };
  return keys;
}

inline const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace detail

// Applies `text` on top of the defaults. Errors carry the 1-based line.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
  RunConfig c = std::move(base);
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    const auto* k = detail::find_key(key);
    if (!k) throw ConfigError(line_no, "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) throw ConfigError(line_no, "duplicate key '" + std::string(key) + "'");
    try {
      k->set(c, value);
    } catch (const Error& e) {
      throw ConfigError(line_no, std::string(key) + ": " + e.what());
    }
  }
  c.resolve();
  c.validate();
  return c;
}

// Every key with its resolved value; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  out << "# resolved configuration\n";
  for (const auto& k : detail::config_keys()) out << k.name << " = " << k.get(c) << "\n";
  return out.str();
}

// Only the keys that shape the synthetic data, for the dataset header.
inline std::string synth_text(const RunConfig& c) {
  std::ostringstream out;
  for (const auto& k : detail::config_keys())
    if (k.name.starts_with("synth.")) out << k.name << " = " << k.get(c) << "\n";
  return out.str();
}

}  // namespace wavestate
