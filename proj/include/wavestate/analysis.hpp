#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "wavestate/errors.hpp"
#include "wavestate/inspect.hpp"
#include "wavestate/metrics.hpp"
#include "wavestate/models.hpp"
#include "wavestate/pipeline.hpp"
#include "wavestate/trainer.hpp"

namespace wavestate {

// ---------------------------------------------------------------------------
// Spectrograms of time-varying latents

struct SpectrogramSpec {
  std::size_t segment_length = 256;
  std::size_t overlap = 243;  // round(0.95 * 256)
  double sample_rate = 2.4e6;  // rate of the downsampled rows

  std::size_t hop() const { return segment_length - overlap; }

  void validate() const {
    if (segment_length < 2) throw InvalidArgument("segment length must be >= 2");
    if (overlap >= segment_length) throw InvalidArgument("overlap must be smaller than the segment length");
    if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  }

  std::size_t frame_count(std::size_t n) const {
    if (n < segment_length) return 0;
    return (n - segment_length) / hop() + 1;
  }

  friend bool operator==(const SpectrogramSpec&, const SpectrogramSpec&) = default;
};

// Row-major frames x bins matrix; bins cover 0 .. fs/2.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  double sample_rate = 0.0;
  std::size_t segment_length = 0;
  std::vector<double> values;

  double at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
  double frequency(std::size_t bin) const {
    return static_cast<double>(bin) * sample_rate / static_cast<double>(segment_length);
  }
  std::size_t peak_bin(std::size_t frame) const {
    const auto* row = values.data() + frame * bins;
    return static_cast<std::size_t>(std::max_element(row, row + bins) - row);
  }
  // 20 log10(|X|), floored at `floor_db`.
  Spectrogram decibels(double floor_db = -200.0) const {
    Spectrogram out = *this;
    for (auto& v : out.values) v = v > 0.0 ? std::max(floor_db, 20.0 * std::log10(v)) : floor_db;
    return out;
  }
};

// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

// One-sided short-time Fourier magnitude.
inline Spectrogram spectrogram(std::span<const double> x, const SpectrogramSpec& spec = {}) {
  spec.validate();
  if (x.size() < spec.segment_length)
    throw InvalidArgument("signal of " + std::to_string(x.size()) + " samples is shorter than one segment (" +
                          std::to_string(spec.segment_length) + ")");
  Spectrogram s;
  s.frames = spec.frame_count(x.size());
  s.bins = spec.segment_length / 2 + 1;
  s.sample_rate = spec.sample_rate;
  s.segment_length = spec.segment_length;
  s.values.resize(s.frames * s.bins);
  const auto window = hann_window(spec.segment_length);
  Eigen::FFT<double> fft;
  std::vector<double> segment(spec.segment_length);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t f = 0; f < s.frames; ++f) {
    const std::size_t start = f * spec.hop();
    for (std::size_t i = 0; i < spec.segment_length; ++i) segment[i] = x[start + i] * window[i];
    fft.fwd(spectrum, segment);
    for (std::size_t b = 0; b < s.bins; ++b) s.values[f * s.bins + b] = std::abs(spectrum[b]);
  }
  return s;
}

struct SpectrogramDiff {
  Spectrogram difference;  // S(target) - S(baseline)
  double max_abs = 0.0;
};

inline SpectrogramDiff spectrogram_diff(std::span<const double> target, std::span<const double> baseline,
                                        const SpectrogramSpec& spec = {}) {
  if (target.size() != baseline.size())
    throw ShapeError(-1, "target has " + std::to_string(target.size()) + " samples, baseline " +
                             std::to_string(baseline.size()));
  SpectrogramDiff d{spectrogram(target, spec), 0.0};
  const auto base = spectrogram(baseline, spec);
  for (std::size_t i = 0; i < d.difference.values.size(); ++i) {
    d.difference.values[i] -= base.values[i];
    d.max_abs = std::max(d.max_abs, std::abs(d.difference.values[i]));
  }
  return d;
}

// Variable `var` (1-based) of an N x D time-varying latent.
inline std::vector<double> latent_signal(const LatentVector& z, std::size_t var) {
  if (z.values.rank() != 2) throw InvalidArgument("latent is not time-varying");
  const std::size_t n = z.values.shape()[0], d = z.values.shape()[1];
  if (var < 1 || var > d) throw InvalidArgument("latent variable index out of range 1.." + std::to_string(d));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = z.values[i * d + (var - 1)];
  return out;
}

// Largest max-abs spectrogram difference over all latent variables, with
// the 1-based variable that attains it.
inline std::pair<double, std::size_t> latent_disparity_at(const LatentVector& target, const LatentVector& baseline,
                                                          const SpectrogramSpec& spec = {}) {
  if (target.values.shape() != baseline.values.shape()) throw ShapeError(-1, "latent shapes differ");
  double worst = 0.0;
  std::size_t at = 1;
  for (std::size_t v = 1; v <= target.values.shape().at(1); ++v) {
    const double d = spectrogram_diff(latent_signal(target, v), latent_signal(baseline, v), spec).max_abs;
    if (d > worst) {
      worst = d;
      at = v;
    }
  }
  return {worst, at};
}

inline double latent_disparity(const LatentVector& target, const LatentVector& baseline,
                               const SpectrogramSpec& spec = {}) {
  return latent_disparity_at(target, baseline, spec).first;
}

struct LevelDisparity {
  int level = 0;
  std::size_t n = 0;        // rows averaged into the level's mean latent
  double disparity = 0.0;  // against the level-0 mean latent at the same load
  std::size_t variable = 1;  // 1-based latent variable attaining it
  LatentVector mean_latent;
};

// Trial-averaged Type III latent of each damage level at `load_kn`,
// compared with the undamaged one, in ascending level order.
inline std::vector<LevelDisparity> damage_disparities(const CaeModel& cae, const InputTensor& t, int load_kn,
                                                      const SpectrogramSpec& spec = {}, std::size_t threads = 0) {
  if (cae.spec.model_type != ModelType::TypeIII) throw InvalidArgument("damage disparities need time-varying latents");
  std::map<int, std::vector<std::size_t>> rows;
  for (std::size_t r = 0; r < t.rows(); ++r)
    if (t.labels[r].load_kn == load_kn) rows[t.labels[r].level].push_back(r);
  if (!rows.count(0)) throw InvalidArgument("no undamaged rows at " + std::to_string(load_kn) + " kN");
  std::vector<LatentVector> z(t.rows());
  parallel_for(
      t.rows(), [&](std::size_t r) { if (t.labels[r].load_kn == load_kn) z[r] = encode(cae, t.row(r)); }, threads);
  std::map<int, LatentVector> means;
  for (const auto& [level, idx] : rows) {
    LatentVector m{Tensor(z[idx.front()].values.shape())};
    for (std::size_t r : idx)
      for (std::size_t k = 0; k < m.values.size(); ++k) m.values[k] += z[r].values[k];
    for (auto& v : m.values.values()) v /= static_cast<double>(idx.size());
    means.emplace(level, std::move(m));
  }
  std::vector<LevelDisparity> out;
  for (const auto& [level, m] : means) {
    const auto [d, var] = latent_disparity_at(m, means.at(0), spec);
    out.push_back({level, rows[level].size(), d, var, m});
  }
  return out;
}

// Number of level steps at which the disparity decreases.
inline std::size_t monotonicity_violations(const std::vector<LevelDisparity>& d) {
  std::size_t v = 0;
  for (std::size_t i = 1; i < d.size(); ++i) v += d[i].disparity < d[i - 1].disparity;
  return v;
}

// ---------------------------------------------------------------------------
// Time-invariant latents

struct LatentPairRow {
  int level = 0;
  int load_kn = 0;
  std::optional<int> path;
  std::uint16_t trial = 0;
  double zi = 0.0;
  double zj = 0.0;
};

// One row per test row, ordered by state then trial. i and j are 1-based
// indices into the flattened latents `z` of the rows of `t`.
inline std::vector<LatentPairRow> export_latent_pairs(const std::vector<std::vector<double>>& z, const InputTensor& t,
                                                      std::size_t i, std::size_t j) {
  if (z.size() != t.rows()) throw InvalidArgument("latent and row counts differ");
  const std::size_t d = z.empty() ? 0 : z.front().size();
  if (i == j) throw InvalidArgument("latent pair needs two distinct variables");
  if (i < 1 || j < 1 || i > d || j > d) throw InvalidArgument("latent index out of range 1.." + std::to_string(d));
  std::vector<LatentPairRow> rows;
  rows.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r)
    rows.push_back({t.labels[r].level, t.labels[r].load_kn, t.labels[r].path, t.trials[r], z[r][i - 1], z[r][j - 1]});
  std::stable_sort(rows.begin(), rows.end(), [](const LatentPairRow& a, const LatentPairRow& b) {
    return std::tie(a.level, a.load_kn, a.path, a.trial) < std::tie(b.level, b.load_kn, b.path, b.trial);
  });
  return rows;
}

inline std::vector<LatentPairRow> export_latent_pairs(const CaeModel& cae, const InputTensor& t, std::size_t i,
                                                      std::size_t j, std::size_t threads = 0) {
  if (cae.spec.model_type == ModelType::TypeIII)
    throw InvalidArgument("Type III latents are time-varying; use the spectrogram exports");
  const std::size_t d = cae.spec.latent_width;
  if (i == j) throw InvalidArgument("latent pair needs two distinct variables");
  if (i < 1 || j < 1 || i > d || j > d) throw InvalidArgument("latent index out of range 1.." + std::to_string(d));
  return export_latent_pairs(compute_latents(cae, t, threads), t, i, j);
}

// Every unordered pair (i, j), i < j, of a width-d latent; d(d-1)/2 pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> latent_pairs(std::size_t d) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 1; i <= d; ++i)
    for (std::size_t j = i + 1; j <= d; ++j) out.emplace_back(i, j);
  return out;
}

enum class SweptVariable { Level, Load };

struct TrajectoryPoint {
  int level = 0;
  int load_kn = 0;
  std::size_t n = 0;
  std::vector<double> mean;
};

// Per-state latent means, one trajectory per fixed value of the other
// variable, points ordered by the swept variable.
struct Trajectory {
  SweptVariable swept = SweptVariable::Load;
  int fixed = 0;
  std::vector<TrajectoryPoint> points;
};

inline std::vector<Trajectory> latent_trajectories(const std::vector<std::vector<double>>& latents,
                                                   const std::vector<StateVector>& labels, SweptVariable swept) {
  if (latents.size() != labels.size()) throw InvalidArgument("latent and label counts differ");
  std::map<std::pair<int, int>, TrajectoryPoint> means;
  for (std::size_t r = 0; r < latents.size(); ++r) {
    auto& p = means[{labels[r].level, labels[r].load_kn}];
    p.level = labels[r].level;
    p.load_kn = labels[r].load_kn;
    if (p.mean.empty()) p.mean.assign(latents[r].size(), 0.0);
    for (std::size_t k = 0; k < p.mean.size(); ++k) p.mean[k] += latents[r][k];
    ++p.n;
  }
  std::map<int, Trajectory> out;
  for (auto& [key, p] : means) {
    for (auto& v : p.mean) v /= static_cast<double>(p.n);
    const int fixed = swept == SweptVariable::Load ? p.level : p.load_kn;
    auto& t = out[fixed];
    t.swept = swept;
    t.fixed = fixed;
    t.points.push_back(p);
  }
  std::vector<Trajectory> result;
  for (auto& [k, t] : out) {
    std::stable_sort(t.points.begin(), t.points.end(), [&](const TrajectoryPoint& a, const TrajectoryPoint& b) {
      return swept == SweptVariable::Load ? a.load_kn < b.load_kn : a.level < b.level;
    });
    result.push_back(std::move(t));
  }
  return result;
}

struct ClusterSeparation {
  double mean_intra = 0.0;  // rows sharing a (level, load) state
  double mean_inter = 0.0;  // rows of different states
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;
};

inline ClusterSeparation cluster_separation(const std::vector<std::vector<double>>& latents,
                                            const std::vector<StateVector>& labels) {
  if (latents.size() != labels.size()) throw InvalidArgument("latent and label counts differ");
  ClusterSeparation c;
  double intra = 0.0, inter = 0.0;
  for (std::size_t a = 0; a < latents.size(); ++a)
    for (std::size_t b = a + 1; b < latents.size(); ++b) {
      double d = 0.0;
      for (std::size_t k = 0; k < latents[a].size(); ++k) d += (latents[a][k] - latents[b][k]) * (latents[a][k] - latents[b][k]);
      d = std::sqrt(d);
      if (labels[a].level == labels[b].level && labels[a].load_kn == labels[b].load_kn) {
        intra += d;
        ++c.intra_pairs;
      } else {
        inter += d;
        ++c.inter_pairs;
      }
    }
  if (c.intra_pairs) c.mean_intra = intra / static_cast<double>(c.intra_pairs);
  if (c.inter_pairs) c.mean_inter = inter / static_cast<double>(c.inter_pairs);
  return c;
}

// ---------------------------------------------------------------------------
// Robustness to a missing load

// Box covering the central 95% of raw predictions under a normal model,
// mean +/- 1.96 std, plus the observed extremes.
struct PredictionBox {
  std::size_t n = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double min = 0.0;
  double max = 0.0;

  double width() const { return upper - lower; }
};

inline PredictionBox prediction_box(std::span<const double> v) {
  if (v.empty()) return {};
  const auto s = sample_stats(v);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {s.n, s.mean, s.mean - 1.96 * s.stddev, s.mean + 1.96 * s.stddev, *lo, *hi};
}

// Raw load predictions grouped by true load.
inline std::map<int, PredictionBox> load_boxes(const std::vector<StateEstimate>& est, const std::vector<StateVector>& truth) {
  std::map<int, std::vector<double>> by_load;
  for (std::size_t i = 0; i < est.size(); ++i) by_load[truth[i].load_kn].push_back(est[i].raw.at(1));
  std::map<int, PredictionBox> out;
  for (const auto& [k, v] : by_load) out[k] = prediction_box(v);
  return out;
}

struct ModelEvaluation {
  EstimationSummary estimation;
  std::map<int, PredictionBox> load_boxes;
  ReconstructionReport reconstruction;  // autoencoder branch
  std::map<int, std::size_t> train_rows_by_load;
};

struct RobustnessReport {
  int excluded_load_kn = 10;
  ModelEvaluation full;
  ModelEvaluation reduced;
  std::vector<std::uint16_t> test_trials;  // shared by both evaluations
  std::vector<StateVector> test_labels;
  FrameworkTrainResult full_model;
  FrameworkTrainResult reduced_model;
};

inline ModelEvaluation evaluate_framework(const Framework& f, const InputTensor& train, const InputTensor& test,
                                          std::size_t threads = 0) {
  ModelEvaluation e;
  const auto est = estimate_all(f, test, threads);
  e.estimation = summarize(est, test.labels);
  e.load_boxes = load_boxes(est, test.labels);
  e.reconstruction = autoencoder_report(f.cae, test, threads);
  for (const auto& s : train.labels) ++e.train_rows_by_load[s.load_kn];
  return e;
}

// Trains the same configuration twice, once on the full training split and
// once without `excluded_load_kn`, and evaluates both on one test split.
inline RobustnessReport robustness_experiment(const std::vector<TimeSeriesRecord>& records, const SplitSpec& split_spec,
                                              const FrameworkConfig& cfg, int excluded_load_kn = 10) {
  if (!is_valid_load(excluded_load_kn)) throw InvalidArgument("excluded load must be on the 5 kN grid");
  SplitSpec reduced_spec = split_spec;
  reduced_spec.excluded_train_loads.insert(excluded_load_kn);
  const auto full_split = split(records, split_spec);
  const auto reduced_split = split(records, reduced_spec);
  const ModelType layout = cfg.cae.model_type;
  const auto test = build_tensor(full_split.test, layout);
  const auto full_train = build_tensor(full_split.train, layout);
  const auto reduced_train = build_tensor(reduced_split.train, layout);

  RobustnessReport r;
  r.excluded_load_kn = excluded_load_kn;
  r.full_model = train_framework(full_train, cfg);
  r.reduced_model = train_framework(reduced_train, cfg);
  r.full = evaluate_framework(r.full_model.framework, full_train, test, cfg.cae_train.threads);
  r.reduced = evaluate_framework(r.reduced_model.framework, reduced_train, test, cfg.cae_train.threads);
  r.test_trials = test.trials;
  r.test_labels = test.labels;
  return r;
}

}  // namespace wavestate
