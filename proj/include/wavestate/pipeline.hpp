#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/models.hpp"
#include "wavestate/state.hpp"
#include "wavestate/synthwave.hpp"
#include "wavestate/tensor.hpp"

namespace wavestate {

using synth::TimeSeriesRecord;

// Decimation by stride: out[i] = in[i * factor]. No anti-alias filter.
inline TimeSeriesRecord downsample(const TimeSeriesRecord& rec, std::size_t factor) {
  if (factor == 0) throw InvalidArgument("downsample factor must be positive");
  if (rec.samples.size() % factor)
    throw InvalidArgument("record length " + std::to_string(rec.samples.size()) + " is not divisible by " +
                          std::to_string(factor));
  TimeSeriesRecord out = rec;
  out.samples.resize(rec.samples.size() / factor);
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = rec.samples[i * factor];
  return out;
}

// y' = (y - mean) / std with the record's own population statistics.
inline std::vector<double> standardize(const std::vector<double>& y) {
  if (y.empty()) throw DegenerateInput("cannot standardize an empty record");
  const auto n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DegenerateInput("record has zero variance");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - mean) / sd;
  return out;
}

inline TimeSeriesRecord standardize(const TimeSeriesRecord& rec) {
  TimeSeriesRecord out = rec;
  out.samples = standardize(rec.samples);
  return out;
}

// Downsample, then standardise each record.
inline std::vector<TimeSeriesRecord> preprocess(const std::vector<TimeSeriesRecord>& records, std::size_t factor = 10) {
  std::vector<TimeSeriesRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(standardize(downsample(r, factor)));
  return out;
}

// A batch of model rows in one of the three layouts. `data` has shape
// (B, N), (B, N, 9) or (B, N, 3, 3); row() adds the trailing channel axis
// the CAE expects.
struct InputTensor {
  ModelType layout = ModelType::TypeII;
  Tensor data;
  std::vector<StateVector> labels;  // path set only for Type I
  std::vector<std::uint16_t> trials;

  std::size_t rows() const { return labels.size(); }
  std::size_t signal_length() const { return data.rank() > 1 ? data.shape()[1] : 0; }
  std::size_t row_size() const { return rows() ? data.size() / rows() : 0; }

  Tensor row(std::size_t i) const {
    const std::size_t n = row_size();
    AlignedVector v(data.data() + i * n, data.data() + (i + 1) * n);
    return Tensor(input_row_shape(layout, signal_length()), std::move(v));
  }
};

// Number of single-path signals carried by one row of a layout.
inline std::size_t paths_per_row(ModelType layout) { return layout == ModelType::TypeI ? 1 : kPathCount; }

// The signal of one path column (0-based) out of a model row. Types II and
// III share the time-major, path-minor storage order.
inline std::vector<double> path_signal(std::span<const double> row, ModelType layout, std::size_t column) {
  const std::size_t paths = paths_per_row(layout);
  if (column >= paths) throw InvalidArgument("path column out of range");
  if (row.size() % paths) throw ShapeError(-1, "row size is not a multiple of the path count");
  std::vector<double> out(row.size() / paths);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = row[i * paths + column];
  return out;
}

namespace detail {

using StateTrial = std::tuple<int, int, std::uint16_t>;  // level, load, trial

inline std::map<StateTrial, std::map<int, const TimeSeriesRecord*>> group_by_state_trial(
    const std::vector<TimeSeriesRecord>& records) {
  std::map<StateTrial, std::map<int, const TimeSeriesRecord*>> groups;
  for (const auto& r : records) groups[{r.state.level, r.state.load_kn, r.trial}][r.path.index()] = &r;
  return groups;
}

}  // namespace detail

inline InputTensor build_tensor(const std::vector<TimeSeriesRecord>& records, ModelType layout) {
  InputTensor t;
  t.layout = layout;
  if (records.empty()) throw InvalidArgument("cannot build a tensor from zero records");
  const std::size_t n = records.front().samples.size();
  for (const auto& r : records)
    if (r.samples.size() != n) throw ShapeError(-1, "records of unequal length");

  if (layout == ModelType::TypeI) {
    AlignedVector data;
    data.reserve(records.size() * n);
    for (const auto& r : records) {
      data.insert(data.end(), r.samples.begin(), r.samples.end());
      t.labels.push_back({r.state.level, r.state.load_kn, r.path.index()});
      t.trials.push_back(r.trial);
    }
    t.data = Tensor({records.size(), n}, std::move(data));
    return t;
  }

  const auto groups = detail::group_by_state_trial(records);
  AlignedVector data;
  data.reserve(groups.size() * n * kPathCount);
  for (const auto& [key, paths] : groups) {
    const auto& [level, load, trial] = key;
    for (int p = 1; p <= 9; ++p)
      if (!paths.count(p))
        throw InvalidArgument("missing path " + SensorPath::from_index(p).label() + " for state " +
                              to_string(StateVector{level, load, std::nullopt}) + " trial " + std::to_string(trial));
    const std::size_t base = data.size();
    data.resize(base + n * kPathCount);
    // Path index p = (actuator - 1) * 3 + (receiver - 4) + 1, so the same
    // ordering fills N x 9 and N x 3 x 3 (actuator, receiver).
    for (int p = 1; p <= 9; ++p) {
      const auto& s = paths.at(p)->samples;
      for (std::size_t i = 0; i < n; ++i) data[base + i * kPathCount + static_cast<std::size_t>(p - 1)] = s[i];
    }
    t.labels.push_back({level, load, std::nullopt});
    t.trials.push_back(trial);
  }
  const std::size_t b = t.labels.size();
  t.data = layout == ModelType::TypeII ? Tensor({b, n, 9}, std::move(data)) : Tensor({b, n, 3, 3}, std::move(data));
  return t;
}

struct SplitSpec {
  std::size_t train_trials = 8;
  std::size_t test_trials = 12;
  std::map<int, std::pair<std::size_t, std::size_t>> per_load;  // load kN -> (train, test)
  std::set<int> excluded_train_loads;

  static SplitSpec paper_default() {
    SplitSpec s;
    s.per_load[20] = {1, 1};
    return s;
  }

  // Same 8:12 proportion for a data set generated with a trial multiplier.
  static SplitSpec scaled(double multiplier) {
    SplitSpec s = paper_default();
    const auto full = std::max<long long>(2, std::llround(20.0 * multiplier));
    const auto train = std::clamp<long long>(std::llround(8.0 * multiplier), 1, full - 1);
    s.train_trials = static_cast<std::size_t>(train);
    s.test_trials = static_cast<std::size_t>(full - train);
    return s;
  }

  std::pair<std::size_t, std::size_t> counts_for(int load_kn) const {
    if (auto it = per_load.find(load_kn); it != per_load.end()) return it->second;
    return {train_trials, test_trials};
  }

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitResult {
  std::vector<TimeSeriesRecord> train;
  std::vector<TimeSeriesRecord> test;
};

// Lowest trial indices of each state go to training, the next ones to
// testing. Loads in `excluded_train_loads` contribute nothing to training
// but keep their test trials.
inline SplitResult split(const std::vector<TimeSeriesRecord>& records, const SplitSpec& spec) {
  std::map<std::pair<int, int>, std::set<std::uint16_t>> trials;
  for (const auto& r : records) trials[{r.state.level, r.state.load_kn}].insert(r.trial);
  std::map<std::pair<int, int>, std::pair<std::set<std::uint16_t>, std::set<std::uint16_t>>> assignment;
  for (const auto& [state, ts] : trials) {
    const auto [n_train, n_test] = spec.counts_for(state.second);
    if (n_train < 1 || n_test < 1 || n_train + n_test > ts.size())
      throw InvalidArgument("infeasible split for state " + to_string(StateVector{state.first, state.second, {}}) +
                            ": " + std::to_string(n_train) + " train + " + std::to_string(n_test) + " test of " +
                            std::to_string(ts.size()) + " trials");
    auto it = ts.begin();
    auto& [train, test] = assignment[state];
    for (std::size_t i = 0; i < n_train; ++i) train.insert(*it++);
    for (std::size_t i = 0; i < n_test; ++i) test.insert(*it++);
  }
  SplitResult out;
  for (const auto& r : records) {
    const auto& [train, test] = assignment.at({r.state.level, r.state.load_kn});
    if (train.count(r.trial) && !spec.excluded_train_loads.count(r.state.load_kn))
      out.train.push_back(r);
    else if (test.count(r.trial))
      out.test.push_back(r);
  }
  return out;
}

}  // namespace wavestate
