#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "wavestate/synthwave.hpp"

using namespace wavestate;
using namespace wavestate::synth;

namespace {

// Lag (in samples, sub-sample via a parabola through the peak) maximising
// the cross-correlation of `x` against `ref`.
double xcorr_lag(const std::vector<double>& x, const std::vector<double>& ref, int max_lag) {
  std::vector<double> c;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const auto j = static_cast<long>(i) + lag;
      if (j >= 0 && j < static_cast<long>(x.size())) s += ref[i] * x[static_cast<std::size_t>(j)];
    }
    c.push_back(s);
  }
  const auto k = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  double frac = 0.0;
  if (k > 0 && k + 1 < c.size()) {
    const double den = c[k - 1] - 2.0 * c[k] + c[k + 1];
    if (den != 0.0) frac = 0.5 * (c[k - 1] - c[k + 1]) / den;
  }
  return static_cast<double>(k) - max_lag + frac;
}

}  // namespace

TEST(ToneBurst, SupportSpansFivePeriods) {
  SynthConfig c;
  EXPECT_EQ(burst_support_samples(c), 480u);
  const auto x = tone_burst(c);
  EXPECT_EQ(x.size(), 481u);
  EXPECT_EQ(x.front(), 0.0);
  EXPECT_EQ(burst_value(0.0, 250e3, 5), 0.0);
  for (double v : x) EXPECT_LE(std::abs(v), 1.0);
  EXPECT_GT(*std::max_element(x.begin(), x.end()), 0.9);
}

TEST(ToneBurst, RejectsZeroPeaks) {
  SynthConfig c;
  c.n_peaks = 0;
  EXPECT_THROW(tone_burst(c), InvalidArgument);
}

TEST(Propagation, DirectArrivalSample) {
  EXPECT_DOUBLE_EQ(arrival_sample(0.150, 5000.0, 24e6), 720.0);
}

TEST(Propagation, HealthyStateHasNoScatteredPacket) {
  SynthConfig with, without;
  with.damage_scatter_gain = 0.5;
  without.damage_scatter_gain = 0.0;
  const SensorPath p{2, 5};
  EXPECT_EQ(clean_signal(with, {0, 5, {}}, p), clean_signal(without, {0, 5, {}}, p));
  EXPECT_NE(clean_signal(with, {3, 5, {}}, p), clean_signal(without, {3, 5, {}}, p));
}

TEST(Records, SameArgumentsGiveIdenticalRecords) {
  SynthConfig c;
  const auto a = synth_record({2, 10, {}}, {1, 6}, 3, c);
  const auto b = synth_record({2, 10, {}}, {1, 6}, 3, c);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.samples, synth_record({2, 10, {}}, {1, 6}, 4, c).samples);
  EXPECT_EQ(a.samples.size(), 8000u);
}

TEST(Records, NoiseIsRelativeToSignalLevel) {
  SynthConfig c;
  const SensorPath p{1, 4};
  const auto clean = clean_signal(c, {1, 0, {}}, p);
  const auto noisy = synth_record({1, 0, {}}, p, 0, c);
  double e_clean = 0.0, e_noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    e_clean += clean[i] * clean[i];
    e_noise += (noisy.samples[i] - clean[i]) * (noisy.samples[i] - clean[i]);
  }
  EXPECT_NEAR(std::sqrt(e_noise / e_clean), c.noise_std, 0.1 * c.noise_std);
}

TEST(Records, RejectsOffGridStates) {
  SynthConfig c;
  EXPECT_THROW(synth_record({5, 0, {}}, {1, 4}, 0, c), InvalidArgument);
  EXPECT_THROW(synth_record({0, 7, {}}, {1, 4}, 0, c), InvalidArgument);
  EXPECT_THROW(synth_record({0, 0, {}}, {1, 3}, 0, c), InvalidArgument);
}

TEST(Census, DefaultDatasetHas3690Records) {
  SynthConfig c;
  EXPECT_EQ(expected_record_count(c), 3690u);
  EXPECT_EQ(trials_per_state(c, 20), 2u);
  EXPECT_EQ(trials_per_state(c, 15), 20u);
}

TEST(Census, GeneratedDatasetMatchesTheCount) {
  SynthConfig c;
  c.trial_multiplier = 0.5;
  const auto d = synth_dataset(c);
  EXPECT_EQ(d.size(), 1890u);
  EXPECT_EQ(expected_record_count(c), 1890u);
  std::map<std::tuple<int, int, int>, int> per_state_path;
  for (const auto& r : d) ++per_state_path[{r.state.level, r.state.load_kn, r.path.index()}];
  for (const auto& [k, n] : per_state_path) EXPECT_EQ(n, std::get<1>(k) == 20 ? 2 : 10);
}

TEST(Census, TenthScaleKeepsTwoTrialsPerState) {
  SynthConfig c;
  c.trial_multiplier = 0.1;
  EXPECT_EQ(expected_record_count(c), 450u);
}

TEST(Census, DatasetIsDeterministic) {
  SynthConfig c;
  c.trial_multiplier = 0.1;
  EXPECT_EQ(synth_dataset(c, 1), synth_dataset(c, 4));
}

// Wave speed falls with damage and with load, so the arrival lag against
// the (0, 0 kN) baseline must grow along both axes. The scattered packet is
// disabled to isolate the travel-time effect.
TEST(Signature, ArrivalLagGrowsWithDamageAndLoad) {
  SynthConfig c;
  c.noise_std = 0.0;
  c.damage_scatter_gain = 0.0;
  const SensorPath p{1, 4};
  const auto base = clean_signal(c, {0, 0, {}}, p);
  double prev = -1.0;
  for (int level : kDamageLevels) {
    const double lag = xcorr_lag(clean_signal(c, {level, 0, {}}, p), base, 40);
    EXPECT_GT(lag, prev) << "level " << level;
    prev = lag;
  }
  prev = -1.0;
  for (int load : kLoadsKn) {
    const double lag = xcorr_lag(clean_signal(c, {0, load, {}}, p), base, 40);
    EXPECT_GT(lag, prev) << "load " << load;
    prev = lag;
  }
}

TEST(Config, ValidationRejectsBadValues) {
  SynthConfig c;
  c.sample_rate = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.trial_multiplier = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.noise_std = -0.1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}
