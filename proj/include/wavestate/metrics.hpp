#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wavestate/errors.hpp"

namespace wavestate {

// Residual over signal sum of squares, in percent.
inline double rss_sss(std::span<const double> original, std::span<const double> reconstructed) {
  if (original.size() != reconstructed.size())
    throw InvalidArgument("rss_sss: length mismatch (" + std::to_string(original.size()) + " vs " +
                          std::to_string(reconstructed.size()) + ")");
  double rss = 0.0, sss = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = original[i] - reconstructed[i];
    rss += d * d;
    sss += original[i] * original[i];
  }
  if (!(sss > 0.0)) throw DegenerateInput("rss_sss: original signal has zero energy");
  return 100.0 * rss / sss;
}

inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw InvalidArgument("rmse: length mismatch");
  if (predicted.empty()) throw InvalidArgument("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) form; 0 when n < 2

  // Half-width of the normal-approximation 95% confidence interval of the mean.
  double ci95_half_width() const { return n == 0 ? 0.0 : 1.96 * stddev / std::sqrt(static_cast<double>(n)); }
};

inline SampleStats sample_stats(std::span<const double> v) {
  SampleStats s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace wavestate
