#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "wavestate/errors.hpp"
#include "wavestate/inspect.hpp"
#include "wavestate/metrics.hpp"
#include "wavestate/models.hpp"
#include "wavestate/pipeline.hpp"
#include "wavestate/trainer.hpp"

// Single-variable hyperparameter sweeps: one axis varies, everything else
// stays at the base configuration.
namespace wavestate {

enum class SweepAxis { LatentWidth, Filters, HiddenWidth, HiddenDepth };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::LatentWidth: return "latent_width";
    case SweepAxis::Filters: return "filters";
    case SweepAxis::HiddenWidth: return "hidden_width";
    case SweepAxis::HiddenDepth: return "hidden_depth";
  }
  return "?";
}

inline SweepAxis sweep_axis_from_string(std::string_view s) {
  for (auto a : {SweepAxis::LatentWidth, SweepAxis::Filters, SweepAxis::HiddenWidth, SweepAxis::HiddenDepth})
    if (to_string(a) == s) return a;
  throw InvalidArgument("unknown sweep axis '" + std::string(s) + "'");
}

inline std::vector<std::size_t> default_sweep_values(SweepAxis a) {
  switch (a) {
    case SweepAxis::LatentWidth: return {2, 3, 4, 5, 6, 7};
    case SweepAxis::Filters: return {8, 16, 32, 64, 128};
    case SweepAxis::HiddenWidth: return {8, 16, 32, 64, 128};
    case SweepAxis::HiddenDepth: return {1, 2, 3, 4, 5, 6};
  }
  return {};
}

// Mean test error of one configuration (RSS/SSS % for CAE sweeps, RMSE for
// FFNN sweeps) with the half-width of its 95% confidence interval.
struct SweepResult {
  SweepAxis axis = SweepAxis::LatentWidth;
  std::size_t value = 0;
  double mean = 0.0;
  double ci_half_width = 0.0;
  std::size_t n = 0;
  double seconds_per_epoch = 0.0;  // wall time; kept out of the CSV
};

inline SweepResult sweep_result(SweepAxis axis, std::size_t value, std::span<const double> errors, double sec) {
  const auto s = sample_stats(errors);
  return {axis, value, s.mean, s.ci95_half_width(), s.n, sec};
}

inline CaeSpec with_axis(CaeSpec spec, SweepAxis axis, std::size_t v) {
  switch (axis) {
    case SweepAxis::LatentWidth: spec.latent_width = v; break;
    case SweepAxis::Filters: spec.first_filters = v; break;
    default: throw InvalidArgument("axis " + std::string(to_string(axis)) + " does not apply to the CAE");
  }
  return spec;
}

inline FfnnSpec with_axis(FfnnSpec spec, SweepAxis axis, std::size_t v) {
  switch (axis) {
    case SweepAxis::HiddenWidth: spec.hidden_width = v; break;
    case SweepAxis::HiddenDepth: spec.hidden_depth = v; break;
    default: throw InvalidArgument("axis " + std::string(to_string(axis)) + " does not apply to the FFNN");
  }
  return spec;
}

// Trains one CAE per value and scores it by per-record test RSS/SSS.
inline std::vector<SweepResult> sweep_cae(const CaeSpec& base, SweepAxis axis, const std::vector<std::size_t>& values,
                                          const InputTensor& train, const InputTensor& test, const TrainConfig& cfg) {
  std::vector<SweepResult> out;
  for (std::size_t v : values) {
    const auto trained = train_cae(with_axis(base, axis, v), train, cfg);
    const auto report = autoencoder_report(trained.model, test, cfg.threads);
    std::vector<double> errors;
    errors.reserve(report.records.size());
    for (const auto& r : report.records) errors.push_back(r.rss_sss);
    out.push_back(sweep_result(axis, v, errors, trained.fit.seconds_per_epoch));
  }
  return out;
}

// Trains one latent -> state regressor per value on fixed latents and
// scores it by the per-row RMSE of its held-out predictions.
inline std::vector<SweepResult> sweep_ffnn(const FfnnSpec& base, SweepAxis axis, const std::vector<std::size_t>& values,
                                           const std::vector<std::vector<double>>& train_x,
                                           const std::vector<std::vector<double>>& train_y,
                                           const std::vector<std::vector<double>>& test_x,
                                           const std::vector<std::vector<double>>& test_y, const TrainConfig& cfg) {
  if (train_x.empty() || test_x.empty()) throw InvalidArgument("sweep needs training and test rows");
  std::vector<SweepResult> out;
  for (std::size_t v : values) {
    FfnnSpec spec = with_axis(base, axis, v);
    spec.input_width = train_x.front().size();
    spec.output_width = train_y.front().size();
    const auto trained = train_ffnn(spec, train_x, train_y, cfg);
    std::vector<double> errors;
    errors.reserve(test_x.size());
    for (std::size_t i = 0; i < test_x.size(); ++i) errors.push_back(rmse(predict(trained.model, test_x[i]), test_y[i]));
    out.push_back(sweep_result(axis, v, errors, trained.fit.seconds_per_epoch));
  }
  return out;
}

}  // namespace wavestate
