#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/parallel.hpp"
#include "wavestate/rng.hpp"
#include "wavestate/state.hpp"

// Deterministic stand-in for a pitch-catch guided-wave data set on a
// rectangular plate: a tone-burst excitation travels along each
// actuator-receiver path, echoes off the plate edges, and scatters off a
// damage site whose severity lowers the wave speed and raises the scattered
// amplitude. Applied load lowers the wave speed as well.
namespace wavestate::synth {

struct Point {
  double x = 0.0;  // mm
  double y = 0.0;  // mm
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct SynthConfig {
  double sample_rate = 24e6;        // Hz
  std::size_t record_length = 8000;  // samples
  double center_frequency = 250e3;  // Hz
  std::size_t n_peaks = 5;

  double plate_width = 152.4;   // mm, x extent
  double plate_length = 304.8;  // mm, y extent
  std::array<Point, 3> actuators{{{38.1, 75.0}, {76.2, 75.0}, {114.3, 75.0}}};
  std::array<Point, 3> receivers{{{38.1, 225.0}, {76.2, 225.0}, {114.3, 225.0}}};
  Point damage_site{76.2, 152.4};

  double base_speed = 5000.0;         // m/s
  double damage_speed_coeff = 0.001;  // fractional speed drop per damage level
  double load_speed_coeff = 0.0025;   // fractional speed drop per 5 kN
  double damage_scatter_gain = 0.5;   // scattered amplitude per damage level
  std::size_t n_reflections = 8;
  double reflection_decay = 0.7;      // amplitude factor per edge bounce
  double noise_std = 0.02;            // relative to the clean record's RMS
  double trial_multiplier = 1.0;
  std::uint64_t seed = 20240601;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw InvalidArgument(std::string(name) + " must be positive");
    };
    positive(sample_rate, "sample_rate");
    positive(center_frequency, "center_frequency");
    positive(base_speed, "base_speed");
    positive(plate_width, "plate_width");
    positive(plate_length, "plate_length");
    positive(trial_multiplier, "trial_multiplier");
    if (record_length == 0) throw InvalidArgument("record_length must be positive");
    if (n_peaks < 1) throw InvalidArgument("n_peaks must be >= 1");
    for (double c : {damage_speed_coeff, load_speed_coeff})
      if (!(c >= 0.0 && c < 0.2)) throw InvalidArgument("speed coefficients must lie in [0, 0.2)");
    if (!(damage_scatter_gain >= 0.0)) throw InvalidArgument("damage_scatter_gain must be >= 0");
    if (!(reflection_decay >= 0.0)) throw InvalidArgument("reflection_decay must be >= 0");
    if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");
  }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct TimeSeriesRecord {
  std::vector<double> samples;
  StateVector state;  // level and load; path is kept separately
  SensorPath path;
  std::uint16_t trial = 0;

  friend bool operator==(const TimeSeriesRecord&, const TimeSeriesRecord&) = default;
};

// Hann-windowed sine, x(t) = 0.5 (1 - cos(2 pi f t / n)) sin(2 pi f t) on
// [0, n / f], zero elsewhere.
inline double burst_value(double t, double f, std::size_t n_peaks) {
  const double duration = static_cast<double>(n_peaks) / f;
  if (t < 0.0 || t > duration) return 0.0;
  const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * f * t / static_cast<double>(n_peaks)));
  return w * std::sin(2.0 * std::numbers::pi * f * t);
}

// Number of sample intervals covered by the burst: n_peaks / f * fs.
inline std::size_t burst_support_samples(const SynthConfig& c) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(c.n_peaks) / c.center_frequency * c.sample_rate));
}

// The sampled excitation, both endpoints included.
inline std::vector<double> tone_burst(const SynthConfig& c) {
  if (c.n_peaks < 1) throw InvalidArgument("n_peaks must be >= 1");
  const std::size_t n = burst_support_samples(c);
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = burst_value(static_cast<double>(i) / c.sample_rate, c.center_frequency, c.n_peaks);
  x.front() = 0.0;
  x.back() = 0.0;
  return x;
}

// Group speed at a state, v = v0 (1 - a k1 - b k2 / 5 kN).
inline double wave_speed(const SynthConfig& c, int level, int load_kn) {
  return c.base_speed *
         (1.0 - c.damage_speed_coeff * level - c.load_speed_coeff * static_cast<double>(load_kn) / kLoadStepKn);
}

// Sample index at which a packet travelling `distance_m` at `speed` starts.
inline double arrival_sample(double distance_m, double speed, double sample_rate) {
  return distance_m / speed * sample_rate;
}

inline Point actuator_position(const SynthConfig& c, const SensorPath& p) { return c.actuators[static_cast<std::size_t>(p.actuator - 1)]; }
inline Point receiver_position(const SynthConfig& c, const SensorPath& p) { return c.receivers[static_cast<std::size_t>(p.receiver - 4)]; }

struct Packet {
  double path_length_mm = 0.0;
  double amplitude = 0.0;
};

// Edge echoes from mirror-image sources one plate length either side,
// nearest first; amplitude decays geometrically with the bounce count.
inline std::vector<Packet> reflection_packets(const SynthConfig& c, const SensorPath& path) {
  const Point a = actuator_position(c, path), r = receiver_position(c, path);
  auto axis_images = [](double s, double extent) {
    std::vector<std::pair<double, int>> out;
    for (int n = -1; n <= 1; ++n) {
      out.emplace_back(s + 2.0 * n * extent, 2 * std::abs(n));
      out.emplace_back(-s + 2.0 * n * extent, std::abs(2 * n - 1));
    }
    return out;
  };
  const auto xs = axis_images(a.x, c.plate_width);
  const auto ys = axis_images(a.y, c.plate_length);
  std::vector<Packet> packets;
  for (const auto& [x, bx] : xs)
    for (const auto& [y, by] : ys) {
      const int b = bx + by;
      if (b == 0) continue;
      packets.push_back({distance({x, y}, r), std::pow(c.reflection_decay, b)});
    }
  std::stable_sort(packets.begin(), packets.end(),
                   [](const Packet& p, const Packet& q) { return p.path_length_mm < q.path_length_mm; });
  if (packets.size() > c.n_reflections) packets.resize(c.n_reflections);
  return packets;
}

inline std::uint64_t record_seed(const SynthConfig& c, const StateVector& s, const SensorPath& p, std::uint16_t trial) {
  return hash_seed(c.seed, {static_cast<std::uint64_t>(s.level), static_cast<std::uint64_t>(s.load_kn),
                            static_cast<std::uint64_t>(p.index()), trial});
}

// Noise-free part of a record: direct arrival, edge echoes and the
// damage-scattered packet.
inline std::vector<double> clean_signal(const SynthConfig& c, const StateVector& state, const SensorPath& path) {
  const double v = wave_speed(c, state.level, state.load_kn);
  const Point a = actuator_position(c, path), r = receiver_position(c, path);
  std::vector<Packet> packets{{distance(a, r), 1.0}};
  for (const auto& p : reflection_packets(c, path)) packets.push_back(p);
  packets.push_back({distance(a, c.damage_site) + distance(c.damage_site, r), c.damage_scatter_gain * state.level});

  std::vector<double> y(c.record_length, 0.0);
  const double duration = static_cast<double>(c.n_peaks) / c.center_frequency;
  for (const auto& p : packets) {
    if (p.amplitude == 0.0) continue;
    const double delay = p.path_length_mm * 1e-3 / v;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(delay * c.sample_rate)));
    const auto last = std::min<std::size_t>(c.record_length, static_cast<std::size_t>(std::floor((delay + duration) * c.sample_rate)) + 1);
    for (std::size_t i = first; i < last; ++i)
      y[i] += p.amplitude * burst_value(static_cast<double>(i) / c.sample_rate - delay, c.center_frequency, c.n_peaks);
  }
  return y;
}

inline TimeSeriesRecord synth_record(const StateVector& state, const SensorPath& path, std::uint16_t trial,
                                     const SynthConfig& c) {
  if (!is_valid_level(state.level) || !is_valid_load(state.load_kn))
    throw InvalidArgument("state off the 5x5 grid: " + to_string(state));
  if (!path.valid()) throw InvalidArgument("invalid sensor path " + path.label());
  TimeSeriesRecord rec{clean_signal(c, state, path), state.without_path(), path, trial};
  if (c.noise_std > 0.0) {
    // Noise is specified in standardised units, i.e. relative to the
    // clean record's RMS, so the SNR does not depend on path geometry.
    double energy = 0.0;
    for (double v : rec.samples) energy += v * v;
    const double sigma = c.noise_std * std::sqrt(energy / static_cast<double>(rec.samples.size()));
    Rng rng(record_seed(c, state, path, trial));
    for (auto& v : rec.samples) v += rng.normal(0.0, sigma);
  }
  return rec;
}

// Trials per (state, path): 20 everywhere except 2 at 20 kN, with the 20
// scaled by the trial multiplier (at least one). The 20 kN count stays at
// two unless the scaled count drops below it, or the multiplier exceeds 1.
inline std::size_t trials_per_state(const SynthConfig& c, int load_kn) {
  const auto full = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(20.0 * c.trial_multiplier)));
  if (load_kn != 20) return full;
  const auto sparse = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(2.0 * c.trial_multiplier)));
  return std::min(full, sparse);
}

inline std::size_t expected_record_count(const SynthConfig& c) {
  std::size_t total = 0;
  for (int load : kLoadsKn) total += trials_per_state(c, load) * kPathCount * kDamageLevels.size();
  return total;
}

// Records ordered by level, load, trial, then path index.
inline std::vector<TimeSeriesRecord> synth_dataset(const SynthConfig& c, std::size_t threads = 0) {
  c.validate();
  struct Job {
    StateVector state;
    SensorPath path;
    std::uint16_t trial;
  };
  std::vector<Job> jobs;
  for (int level : kDamageLevels)
    for (int load : kLoadsKn) {
      const auto n = trials_per_state(c, load);
      for (std::size_t t = 0; t < n; ++t)
        for (int p = 1; p <= 9; ++p)
          jobs.push_back({{level, load, std::nullopt}, SensorPath::from_index(p), static_cast<std::uint16_t>(t)});
    }
  std::vector<TimeSeriesRecord> records(jobs.size());
  parallel_for(
      jobs.size(), [&](std::size_t i) { records[i] = synth_record(jobs[i].state, jobs[i].path, jobs[i].trial, c); },
      threads);
  return records;
}

}  // namespace wavestate::synth
