#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/metrics.hpp"
#include "wavestate/models.hpp"
#include "wavestate/parallel.hpp"
#include "wavestate/pipeline.hpp"
#include "wavestate/state.hpp"
#include "wavestate/trainer.hpp"

namespace wavestate {

// Nearest grid value; exact halves go to the larger neighbour.
inline int round_level(double raw) { return std::clamp(static_cast<int>(std::floor(raw + 0.5)), 0, 4); }
inline int round_load(double raw_kn) {
  return std::clamp(static_cast<int>(std::floor(raw_kn / kLoadStepKn + 0.5)), 0, 4) * kLoadStepKn;
}
inline int round_path(double raw) { return std::clamp(static_cast<int>(std::floor(raw + 0.5)), 1, 9); }

struct StateEstimate {
  std::vector<double> raw;  // level, load kN[, path]
  StateVector rounded;
};

inline StateVector round_state(std::span<const double> raw) {
  if (raw.size() != 2 && raw.size() != 3) throw InvalidArgument("a raw state has 2 or 3 components");
  StateVector s{round_level(raw[0]), round_load(raw[1]), std::nullopt};
  if (raw.size() == 3) s.path = round_path(raw[2]);
  return s;
}

inline StateEstimate estimate_state(const CaeModel& cae, const FfnnModel& estimator, const Tensor& row) {
  StateEstimate e;
  e.raw = predict(estimator, encode(cae, row).flat());
  e.rounded = round_state(e.raw);
  return e;
}

inline StateEstimate estimate_state(const Framework& f, const Tensor& row) {
  return estimate_state(f.cae, f.estimator, row);
}

inline std::vector<StateEstimate> estimate_all(const Framework& f, const InputTensor& t, std::size_t threads = 0) {
  std::vector<StateEstimate> out(t.rows());
  parallel_for(t.rows(), [&](std::size_t i) { out[i] = estimate_state(f, t.row(i)); }, threads);
  return out;
}

// Generation branch: state -> latent -> signal row in the model's layout.
inline Tensor reconstruct_signal(const CaeModel& cae, const FfnnModel& generator, const StateVector& state) {
  if (!state.on_grid()) throw InvalidArgument("state off the grid: " + to_string(state));
  const bool single_path = cae.spec.model_type == ModelType::TypeI;
  if (single_path && !state.path) throw InvalidArgument("Type I reconstruction needs a path");
  if (!single_path && state.path)
    throw InvalidArgument("Type " + to_string(cae.spec.model_type) + " reconstructs all paths at once; drop the path");
  const auto z = predict(generator, state_row(state, cae.spec.model_type));
  return decode(cae, {Tensor(latent_shape(cae.spec), z)});
}

inline Tensor reconstruct_signal(const Framework& f, const StateVector& state) {
  return reconstruct_signal(f.cae, f.generator, state);
}

// ---------------------------------------------------------------------------
// Estimation summary

struct MomentCell {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

inline MomentCell moments(std::span<const double> v) {
  const auto s = sample_stats(v);
  return {s.n, s.mean, s.stddev};
}

struct EstimationSummary {
  std::map<int, MomentCell> level_columns;  // true level -> raw level predictions
  std::map<int, MomentCell> load_columns;   // true load kN -> raw load predictions
  std::map<std::pair<int, int>, double> state_accuracy;  // (level, load kN) -> exact-match rate
  std::map<int, double> load_accuracy;
  std::map<int, double> level_accuracy;
  std::size_t n = 0;
  double accuracy = 0.0;
};

// Exact match means level and load agree, plus the path when the truth has one.
inline EstimationSummary summarize(const std::vector<StateEstimate>& estimates, const std::vector<StateVector>& truth) {
  if (estimates.empty()) throw InvalidArgument("cannot summarise an empty test set");
  if (estimates.size() != truth.size()) throw InvalidArgument("estimate and truth counts differ");
  std::map<int, std::vector<double>> levels, loads;
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> states;
  std::map<int, std::pair<std::size_t, std::size_t>> by_load, by_level;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    const auto& t = truth[i];
    levels[t.level].push_back(e.raw.at(0));
    loads[t.load_kn].push_back(e.raw.at(1));
    const bool hit = e.rounded.level == t.level && e.rounded.load_kn == t.load_kn && (!t.path || e.rounded.path == t.path);
    hits += hit;
    for (auto* cell : {&states[{t.level, t.load_kn}], &by_load[t.load_kn], &by_level[t.level]}) {
      cell->first += hit;
      ++cell->second;
    }
  }
  EstimationSummary s;
  for (const auto& [k, v] : levels) s.level_columns[k] = moments(v);
  for (const auto& [k, v] : loads) s.load_columns[k] = moments(v);
  auto rate = [](const std::pair<std::size_t, std::size_t>& c) { return static_cast<double>(c.first) / static_cast<double>(c.second); };
  for (const auto& [k, c] : states) s.state_accuracy[k] = rate(c);
  for (const auto& [k, c] : by_load) s.load_accuracy[k] = rate(c);
  for (const auto& [k, c] : by_level) s.level_accuracy[k] = rate(c);
  s.n = estimates.size();
  s.accuracy = static_cast<double>(hits) / static_cast<double>(s.n);
  return s;
}

// ---------------------------------------------------------------------------
// Reconstruction report

struct RecordError {
  int level = 0;
  int load_kn = 0;
  int path = 1;
  std::uint16_t trial = 0;
  double rss_sss = 0.0;
  double rmse = 0.0;
};

struct ReconstructionReport {
  std::vector<RecordError> records;
  std::map<std::pair<int, int>, MomentCell> by_level_path;  // (level, path) -> RSS/SSS %
  std::map<std::pair<int, int>, MomentCell> by_load_path;   // (load kN, path) -> RSS/SSS %

  double mean_rss_sss() const {
    if (records.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : records) s += r.rss_sss;
    return s / static_cast<double>(records.size());
  }
};

inline ReconstructionReport make_report(std::vector<RecordError> records) {
  ReconstructionReport rep;
  std::map<std::pair<int, int>, std::vector<double>> lp, dp;
  for (const auto& r : records) {
    lp[{r.level, r.path}].push_back(r.rss_sss);
    dp[{r.load_kn, r.path}].push_back(r.rss_sss);
  }
  for (const auto& [k, v] : lp) rep.by_level_path[k] = moments(v);
  for (const auto& [k, v] : dp) rep.by_load_path[k] = moments(v);
  rep.records = std::move(records);
  return rep;
}

// Compares every path signal of `t` against the matching column of the
// row produced by `make_row(i)`.
template <typename MakeRow>
ReconstructionReport compare_rows(const InputTensor& t, MakeRow&& make_row, std::size_t threads) {
  const std::size_t paths = paths_per_row(t.layout);
  std::vector<RecordError> records(t.rows() * paths);
  parallel_for(
      t.rows(),
      [&](std::size_t i) {
        const Tensor original = t.row(i);
        const Tensor rebuilt = make_row(i);
        if (rebuilt.size() != original.size()) throw ShapeError(-1, "reconstructed row size differs from the input");
        for (std::size_t c = 0; c < paths; ++c) {
          const auto y = path_signal(original.values(), t.layout, c);
          const auto yh = path_signal(rebuilt.values(), t.layout, c);
          const int path = t.layout == ModelType::TypeI ? t.labels[i].path.value_or(1) : static_cast<int>(c) + 1;
          records[i * paths + c] = {t.labels[i].level, t.labels[i].load_kn, path, t.trials[i], rss_sss(y, yh), rmse(yh, y)};
        }
      },
      threads);
  return make_report(std::move(records));
}

// Autoencoder branch: encode then decode each test row.
inline ReconstructionReport autoencoder_report(const CaeModel& cae, const InputTensor& t, std::size_t threads = 0) {
  if (t.layout != cae.spec.model_type) throw ShapeError(-1, "layout mismatch between tensor and model");
  return compare_rows(t, [&](std::size_t i) { return decode(cae, encode(cae, t.row(i))); }, threads);
}

// Generation branch: each test row is compared with the signal generated
// from its true state.
inline ReconstructionReport generator_report(const Framework& f, const InputTensor& t, std::size_t threads = 0) {
  if (t.layout != f.cae.spec.model_type) throw ShapeError(-1, "layout mismatch between tensor and model");
  return compare_rows(t, [&](std::size_t i) { return reconstruct_signal(f, t.labels[i]); }, threads);
}

// Share of grid states s for which estimate_state(reconstruct_signal(s))
// rounds back to s. Type I visits every path of every state.
inline double round_trip_accuracy(const Framework& f) {
  std::vector<StateVector> states;
  for (int level : kDamageLevels)
    for (int load : kLoadsKn) {
      if (f.cae.spec.model_type == ModelType::TypeI) {
        for (int p = 1; p <= 9; ++p) states.push_back({level, load, p});
      } else {
        states.push_back({level, load, std::nullopt});
      }
    }
  std::size_t hits = 0;
  for (const auto& s : states) hits += estimate_state(f, reconstruct_signal(f, s)).rounded == s;
  return static_cast<double>(hits) / static_cast<double>(states.size());
}

}  // namespace wavestate
