#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wavestate/analysis.hpp"
#include "wavestate/config.hpp"
#include "wavestate/formats.hpp"
#include "wavestate/inspect.hpp"
#include "wavestate/io.hpp"
#include "wavestate/pipeline.hpp"
#include "wavestate/sweep.hpp"
#include "wavestate/synthwave.hpp"
#include "wavestate/trainer.hpp"

#ifndef WAVESTATE_GIT_DESCRIBE
#define WAVESTATE_GIT_DESCRIBE "unknown"
#endif

namespace ws = wavestate;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kDivergence = 3, kThreshold = 4 };

class UsageError : public ws::Error {
 public:
  using Error::Error;
};

struct Options {
  std::string config;
  std::string dataset;
  std::string models;
  std::string out;
  std::optional<int> model_type;
  std::optional<std::uint64_t> seed;
  std::vector<int> exclude_load;
  std::optional<double> trial_multiplier;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> latent_width;
  std::optional<std::size_t> filters;
  std::string split = "test";
  std::vector<std::string> states;
  std::string axis;
  std::string values;
  std::string latent_pair = "all";
  int baseline_load = 0;
};

const char* kResolvedConfig = "resolved.cfg";
const char* kDatasetFile = "dataset.wsds";
const char* kCaeFile = "cae.wsck";
const char* kEstimatorFile = "estimator.wsck";
const char* kGeneratorFile = "generator.wsck";

std::string num(double v) { return ws::detail::format_double(v); }

// Small CSV builder; every value goes through the shortest round-trip
// formatting so files are reproducible.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << "\n";
  }
  Csv& cell(const std::string& s) {
    out_ << (fresh_ ? "" : ",") << s;
    fresh_ = false;
    return *this;
  }
  Csv& cell(double v) { return cell(num(v)); }
  Csv& cell(int v) { return cell(std::to_string(v)); }
  Csv& cell(std::size_t v) { return cell(std::to_string(v)); }
  void end() {
    out_ << "\n";
    fresh_ = true;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  bool fresh_ = true;
};

void write_text(const fs::path& path, const std::string& text) { ws::io::atomic_write(path, text); }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string path_cell(const std::optional<int>& p) { return p ? std::to_string(*p) : std::string(); }

// ------------------------------------------------------------ configuration

void apply_overrides(ws::RunConfig& c, const Options& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.trial_multiplier) c.synth.trial_multiplier = *o.trial_multiplier;
  if (o.model_type) c.cae.model_type = ws::model_type_from_int(*o.model_type);
  if (o.epochs) c.cae_train.epochs = c.ffnn_train.epochs = *o.epochs;
  if (o.latent_width) c.cae.latent_width = *o.latent_width;
  if (o.filters) c.cae.first_filters = *o.filters;
  for (int l : o.exclude_load) c.split.excluded_train_loads.insert(l);
  if (!o.out.empty()) c.output_dir = o.out;
  c.resolve();
  c.validate();
}

ws::RunConfig load_config(const Options& o) {
  ws::RunConfig c;
  if (!o.config.empty()) c = ws::parse_config(ws::io::read_text(o.config));
  apply_overrides(c, o);
  return c;
}

struct Data {
  ws::DatasetFile file;
  std::vector<ws::synth::TimeSeriesRecord> processed;
};

// Takes the generator settings (and hence the trial split) from the
// dataset header rather than from the run config.
Data load_data(const std::string& path, ws::RunConfig& cfg) {
  if (path.empty()) throw UsageError("--dataset is required");
  Data d{ws::load_dataset(path), {}};
  ws::RunConfig echo;
  try {
    echo = ws::parse_config(d.file.config_echo);
  } catch (const ws::ConfigError& e) {
    throw ws::FormatError(path + ": unreadable generator settings: " + e.what());
  }
  cfg.synth = echo.synth;
  cfg.synth_seed = echo.synth.seed;
  cfg.resolve();
  cfg.validate();
  for (const auto& r : d.file.records)
    if (r.samples.size() != cfg.synth.record_length)
      throw ws::FormatError(path + ": record length differs from its header");
  d.processed = ws::preprocess(d.file.records, cfg.downsample_factor);
  return d;
}

std::vector<ws::synth::TimeSeriesRecord> select_rows(const std::vector<ws::synth::TimeSeriesRecord>& records,
                                                     const ws::SplitSpec& split, const std::string& which) {
  if (which == "all") return records;
  auto s = ws::split(records, split);
  if (which == "train") return s.train;
  if (which == "test") return s.test;
  throw UsageError("--split must be train, test or all");
}

// --------------------------------------------------------------- checkpoints

struct Models {
  ws::RunConfig cfg;
  ws::Framework framework;
};

Models load_models(const Options& o) {
  if (o.models.empty()) throw UsageError("--models is required");
  const fs::path dir = o.models;
  Models m;
  m.cfg = ws::parse_config(ws::io::read_text(dir / kResolvedConfig));
  m.framework.cae = ws::cae_from_checkpoint(ws::load_checkpoint(dir / kCaeFile));
  m.framework.estimator = ws::ffnn_from_checkpoint(ws::load_checkpoint(dir / kEstimatorFile), "estimator");
  m.framework.generator = ws::ffnn_from_checkpoint(ws::load_checkpoint(dir / kGeneratorFile), "generator");
  const auto type = m.framework.cae.spec.model_type;
  if (o.model_type && ws::model_type_from_int(*o.model_type) != type)
    throw ws::FormatError("checkpoint holds a Type " + ws::to_string(type) + " model, --model-type asked for Type " +
                          ws::to_string(ws::model_type_from_int(*o.model_type)));
  if (type != m.cfg.cae.model_type) throw ws::FormatError("resolved config and checkpoint disagree on the model type");
  const auto latent = ws::shape_size(ws::latent_shape(m.framework.cae.spec));
  if (m.framework.estimator.spec.input_width != latent || m.framework.generator.spec.output_width != latent ||
      m.framework.estimator.spec.output_width != ws::state_width(type))
    throw ws::FormatError("estimator/generator widths do not match the autoencoder");
  return m;
}

json run_metadata(const ws::RunConfig& c, const ws::TrainConfig& t, std::size_t rows) {
  return {{"model_type", static_cast<int>(c.cae.model_type)},
          {"seed", c.seed},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"train_rows", rows},
          {"git_describe", WAVESTATE_GIT_DESCRIBE}};
}

std::string loss_csv(const ws::FitResult& fit) {
  Csv csv{"epoch", "loss", "best_loss"};
  for (std::size_t e = 0; e < fit.loss.size(); ++e) {
    csv.cell(e).cell(fit.loss[e]).cell(fit.best_loss[e]);
    csv.end();
  }
  return csv.str();
}

ws::StateVector parse_state(const std::string& s) {
  const auto f = ws::detail::split_list(s, ',');
  if (f.size() < 2 || f.size() > 3) throw UsageError("--state expects level,load[,path], got '" + s + "'");
  try {
    ws::StateVector v{ws::detail::parse_number<int>(f[0]), ws::detail::parse_number<int>(f[1]), std::nullopt};
    if (f.size() == 3) v.path = ws::detail::parse_number<int>(f[2]);
    return v;
  } catch (const ws::InvalidArgument& e) {
    throw UsageError("--state: " + std::string(e.what()));
  }
}

std::string state_tag(const ws::StateVector& s) {
  std::string tag = "L" + std::to_string(s.level) + "_" + std::to_string(s.load_kn) + "kN";
  if (s.path) tag += "_P" + std::to_string(*s.path);
  return tag;
}

json boxes_json(const std::map<int, ws::PredictionBox>& boxes) {
  json j = json::object();
  for (const auto& [load, b] : boxes)
    j[std::to_string(load)] = {{"n", b.n}, {"mean", b.mean}, {"lower", b.lower}, {"upper", b.upper},
                               {"min", b.min}, {"max", b.max}};
  return j;
}

json summary_json(const ws::EstimationSummary& s) {
  json acc_by_load = json::object(), acc_by_level = json::object();
  for (const auto& [k, v] : s.load_accuracy) acc_by_load[std::to_string(k)] = v;
  for (const auto& [k, v] : s.level_accuracy) acc_by_level[std::to_string(k)] = v;
  return {{"n", s.n}, {"accuracy", s.accuracy}, {"accuracy_by_load_kn", acc_by_load}, {"accuracy_by_level", acc_by_level}};
}

// Writes per-record and aggregated RSS/SSS tables under `prefix`.
double write_reconstruction(const fs::path& out, const std::string& prefix, const ws::ReconstructionReport& rep) {
  Csv rec{"level", "load_kn", "path", "trial", "rss_sss_pct", "rmse"};
  for (const auto& r : rep.records) {
    rec.cell(r.level).cell(r.load_kn).cell(r.path).cell(static_cast<std::size_t>(r.trial)).cell(r.rss_sss).cell(r.rmse);
    rec.end();
  }
  write_text(out / (prefix + "_records.csv"), rec.str());
  auto table = [&](const char* key, const auto& cells, const std::string& file) {
    Csv csv{key, "path", "n", "mean_rss_sss_pct", "std_rss_sss_pct"};
    for (const auto& [k, c] : cells) {
      csv.cell(k.first).cell(k.second).cell(c.n).cell(c.mean).cell(c.stddev);
      csv.end();
    }
    write_text(out / file, csv.str());
  };
  table("level", rep.by_level_path, prefix + "_by_level_path.csv");
  table("load_kn", rep.by_load_path, prefix + "_by_load_path.csv");
  return rep.mean_rss_sss();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  return o.out;
}

// ------------------------------------------------------------------ commands

int cmd_synth(const Options& o) {
  const fs::path out = require_out(o);
  const auto cfg = load_config(o);
  Stopwatch sw;
  ws::DatasetFile d{ws::synth_text(cfg), ws::synth::synth_dataset(cfg.synth, cfg.cae_train.threads)};
  ws::save_dataset(out / kDatasetFile, d);
  write_text(out / kResolvedConfig, ws::to_text(cfg));
  std::cout << "wrote " << d.records.size() << " records to " << (out / kDatasetFile).string() << "\n";
  std::cerr << "synth: " << num(sw.seconds()) << " s\n";
  return kOk;
}

int cmd_train(const Options& o) {
  const fs::path out = require_out(o);
  if (!o.model_type) throw UsageError("--model-type is required");
  auto cfg = load_config(o);
  const auto data = load_data(o.dataset, cfg);
  const auto parts = ws::split(data.processed, cfg.split);
  const auto train = ws::build_tensor(parts.train, cfg.cae.model_type);
  std::cerr << "train: Type " << ws::to_string(cfg.cae.model_type) << ", " << train.rows() << " rows\n";

  Stopwatch sw;
  const auto result = ws::train_framework(train, cfg.framework());
  std::cerr << "train: CAE " << num(result.cae_fit.seconds_per_epoch) << " s/epoch, estimator "
            << num(result.estimator_fit.fit.seconds_per_epoch) << " s/epoch, generator "
            << num(result.generator_fit.fit.seconds_per_epoch) << " s/epoch, total " << num(sw.seconds()) << " s\n";

  const auto& f = result.framework;
  ws::save_checkpoint(out / kCaeFile, ws::cae_checkpoint(f.cae, run_metadata(cfg, cfg.cae_train, train.rows())));
  ws::save_checkpoint(out / kEstimatorFile,
                      ws::ffnn_checkpoint(f.estimator, "estimator", run_metadata(cfg, cfg.ffnn_train, train.rows())));
  ws::save_checkpoint(out / kGeneratorFile,
                      ws::ffnn_checkpoint(f.generator, "generator", run_metadata(cfg, cfg.ffnn_train, train.rows())));
  write_text(out / "cae_loss.csv", loss_csv(result.cae_fit));
  write_text(out / "estimator_loss.csv", loss_csv(result.estimator_fit.fit));
  write_text(out / "generator_loss.csv", loss_csv(result.generator_fit.fit));

  std::map<std::pair<int, int>, std::size_t> census;
  for (const auto& s : train.labels) ++census[{s.level, s.load_kn}];
  Csv csv{"level", "load_kn", "rows"};
  for (const auto& [k, n] : census) {
    csv.cell(k.first).cell(k.second).cell(n);
    csv.end();
  }
  write_text(out / "train_census.csv", csv.str());
  write_text(out / kResolvedConfig, ws::to_text(cfg));
  std::cout << "CAE loss " << num(result.cae_fit.loss[result.cae_fit.best_epoch]) << " (epoch "
            << result.cae_fit.best_epoch << "), estimator train RMSE " << num(result.estimator_fit.train_rmse) << "\n";
  return kOk;
}

int cmd_estimate(const Options& o) {
  const fs::path out = require_out(o);
  auto m = load_models(o);
  const auto data = load_data(o.dataset, m.cfg);
  const auto rows = select_rows(data.processed, m.cfg.split, o.split);
  const auto t = ws::build_tensor(rows, m.framework.cae.spec.model_type);
  const auto est = ws::estimate_all(m.framework, t, m.cfg.cae_train.threads);
  const bool type1 = m.framework.cae.spec.model_type == ws::ModelType::TypeI;

  Csv csv{"level", "load_kn", "path", "trial", "raw_level", "raw_load_kn", "raw_path",
          "est_level", "est_load_kn", "est_path", "match"};
  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto& truth = t.labels[i];
    const auto& e = est[i];
    const bool hit = e.rounded.level == truth.level && e.rounded.load_kn == truth.load_kn &&
                     (!truth.path || e.rounded.path == truth.path);
    csv.cell(truth.level).cell(truth.load_kn).cell(path_cell(truth.path)).cell(static_cast<std::size_t>(t.trials[i]));
    csv.cell(e.raw[0]).cell(e.raw[1]).cell(type1 ? num(e.raw[2]) : std::string());
    csv.cell(e.rounded.level).cell(e.rounded.load_kn).cell(path_cell(e.rounded.path)).cell(hit ? 1 : 0);
    csv.end();
  }
  write_text(out / "estimates.csv", csv.str());

  const auto s = ws::summarize(est, t.labels);
  auto moments = [&](const char* key, const std::map<int, ws::MomentCell>& cells, const std::string& file) {
    Csv c{key, "n", "mean", "std"};
    for (const auto& [k, v] : cells) {
      c.cell(k).cell(v.n).cell(v.mean).cell(v.stddev);
      c.end();
    }
    write_text(out / file, c.str());
  };
  moments("level", s.level_columns, "level_summary.csv");
  moments("load_kn", s.load_columns, "load_summary.csv");
  Csv acc{"level", "load_kn", "accuracy"};
  for (const auto& [k, v] : s.state_accuracy) {
    acc.cell(k.first).cell(k.second).cell(v);
    acc.end();
  }
  write_text(out / "state_accuracy.csv", acc.str());
  json j = summary_json(s);
  j["split"] = o.split;
  j["load_boxes"] = boxes_json(ws::load_boxes(est, t.labels));
  write_json(out / "estimate_summary.json", j);
  std::cout << "accuracy " << num(s.accuracy) << " over " << s.n << " rows\n";
  return kOk;
}

int cmd_reconstruct(const Options& o) {
  const fs::path out = require_out(o);
  if (o.states.empty() && o.dataset.empty()) throw UsageError("reconstruct needs --state and/or --dataset");
  auto m = load_models(o);
  const auto& f = m.framework;
  const auto type = f.cae.spec.model_type;
  for (const auto& text : o.states) {
    const auto state = parse_state(text);
    ws::Tensor signal;
    try {
      signal = ws::reconstruct_signal(f, state);
    } catch (const ws::InvalidArgument& e) {
      throw UsageError(e.what());
    }
    const std::size_t paths = ws::paths_per_row(type);
    std::vector<std::vector<double>> columns;
    for (std::size_t c = 0; c < paths; ++c) columns.push_back(ws::path_signal(signal.values(), type, c));
    std::ostringstream head;
    head << "sample";
    for (std::size_t c = 0; c < paths; ++c) {
      const int p = type == ws::ModelType::TypeI ? *state.path : static_cast<int>(c) + 1;
      head << ",path_" << ws::SensorPath::from_index(p).label();
    }
    std::string body = head.str() + "\n";
    for (std::size_t i = 0; i < columns.front().size(); ++i) {
      body += std::to_string(i);
      for (const auto& col : columns) body += "," + num(col[i]);
      body += "\n";
    }
    write_text(out / ("signal_" + state_tag(state) + ".csv"), body);
    std::cout << "state " << ws::to_string(state) << ": " << paths << " signal" << (paths == 1 ? "" : "s") << "\n";
  }
  if (!o.dataset.empty()) {
    const auto data = load_data(o.dataset, m.cfg);
    const auto rows = select_rows(data.processed, m.cfg.split, o.split);
    const auto t = ws::build_tensor(rows, type);
    const double ae = write_reconstruction(out, "autoencoder", ws::autoencoder_report(f.cae, t, m.cfg.cae_train.threads));
    const double gen = write_reconstruction(out, "generator", ws::generator_report(f, t, m.cfg.cae_train.threads));
    write_json(out / "reconstruction_summary.json",
               {{"split", o.split}, {"autoencoder_mean_rss_sss_pct", ae}, {"generator_mean_rss_sss_pct", gen}});
    std::cout << "mean RSS/SSS " << num(ae) << "% (autoencoder), " << num(gen) << "% (generator)\n";
  }
  return kOk;
}

std::vector<std::size_t> parse_values(const std::string& s, ws::SweepAxis axis) {
  if (s.empty()) return ws::default_sweep_values(axis);
  std::vector<std::size_t> v;
  try {
    for (auto item : ws::detail::split_list(s, ',')) v.push_back(ws::detail::parse_number<std::size_t>(item));
  } catch (const ws::InvalidArgument& e) {
    throw UsageError("--values: " + std::string(e.what()));
  }
  if (v.empty()) throw UsageError("--values is empty");
  return v;
}

int cmd_sweep(const Options& o) {
  const fs::path out = require_out(o);
  if (!o.model_type) throw UsageError("--model-type is required");
  if (o.axis.empty()) throw UsageError("--axis is required");
  ws::SweepAxis axis;
  try {
    axis = ws::sweep_axis_from_string(o.axis);
  } catch (const ws::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto values = parse_values(o.values, axis);
  auto cfg = load_config(o);
  const auto data = load_data(o.dataset, cfg);
  const auto parts = ws::split(data.processed, cfg.split);
  const auto train = ws::build_tensor(parts.train, cfg.cae.model_type);
  const auto test = ws::build_tensor(parts.test, cfg.cae.model_type);

  std::vector<ws::SweepResult> results;
  if (axis == ws::SweepAxis::LatentWidth || axis == ws::SweepAxis::Filters) {
    results = ws::sweep_cae(cfg.cae, axis, values, train, test, cfg.cae_train);
  } else {
    const auto cae = ws::train_cae(cfg.cae, train, cfg.cae_train);
    ws::TrainConfig tc = cfg.ffnn_train;
    tc.seed = ws::hash_seed(cfg.ffnn_train.seed, {1});
    results = ws::sweep_ffnn(cfg.ffnn, axis, values, ws::compute_latents(cae.model, train, tc.threads), ws::state_rows(train),
                             ws::compute_latents(cae.model, test, tc.threads), ws::state_rows(test), tc);
  }
  Csv csv{"axis", "value", "n", "mean", "ci95_half_width"};
  for (const auto& r : results) {
    csv.cell(std::string(ws::to_string(r.axis))).cell(r.value).cell(r.n).cell(r.mean).cell(r.ci_half_width);
    csv.end();
    std::cerr << "sweep: " << ws::to_string(r.axis) << "=" << r.value << " " << num(r.seconds_per_epoch) << " s/epoch\n";
  }
  write_text(out / "sweep.csv", csv.str());
  write_text(out / kResolvedConfig, ws::to_text(cfg));
  std::cout << csv.str();
  return kOk;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s) {
  const auto f = ws::detail::split_list(s, ',');
  try {
    if (f.size() == 2) return {ws::detail::parse_number<std::size_t>(f[0]), ws::detail::parse_number<std::size_t>(f[1])};
  } catch (const ws::InvalidArgument&) {
  }
  throw UsageError("--latent-pair expects i,j");
}

int cmd_analyze(const Options& o) {
  const fs::path out = require_out(o);
  auto m = load_models(o);
  const auto& cae = m.framework.cae;
  const auto data = load_data(o.dataset, m.cfg);
  const auto rows = select_rows(data.processed, m.cfg.split, o.split);
  const auto t = ws::build_tensor(rows, cae.spec.model_type);
  const std::size_t threads = m.cfg.cae_train.threads;
  json j{{"split", o.split}, {"model_type", static_cast<int>(cae.spec.model_type)}};

  if (cae.spec.model_type == ws::ModelType::TypeIII) {
    const auto d = ws::damage_disparities(cae, t, o.baseline_load, m.cfg.spectrogram, threads);
    Csv csv{"level", "load_kn", "rows", "disparity", "latent_variable"};
    for (const auto& l : d) {
      csv.cell(l.level).cell(o.baseline_load).cell(l.n).cell(l.disparity).cell(l.variable);
      csv.end();
      const auto& base = d.front().mean_latent;
      const auto diff = ws::spectrogram_diff(ws::latent_signal(l.mean_latent, l.variable),
                                             ws::latent_signal(base, l.variable), m.cfg.spectrogram);
      Csv sg{"frame", "bin", "frequency_hz", "magnitude_diff"};
      for (std::size_t fr = 0; fr < diff.difference.frames; ++fr)
        for (std::size_t b = 0; b < diff.difference.bins; ++b) {
          sg.cell(fr).cell(b).cell(diff.difference.frequency(b)).cell(diff.difference.at(fr, b));
          sg.end();
        }
      write_text(out / ("spectrogram_diff_L" + std::to_string(l.level) + ".csv"), sg.str());
    }
    write_text(out / "disparity.csv", csv.str());
    j["baseline_load_kn"] = o.baseline_load;
    j["monotonicity_violations"] = ws::monotonicity_violations(d);
  } else {
    const auto z = ws::compute_latents(cae, t, threads);
    const auto pairs = o.latent_pair == "all" ? ws::latent_pairs(cae.spec.latent_width)
                                              : std::vector<std::pair<std::size_t, std::size_t>>{parse_pair(o.latent_pair)};
    for (const auto& [i, k] : pairs) {
      Csv csv{"level", "load_kn", "path", "trial", "z_i", "z_j"};
      for (const auto& r : ws::export_latent_pairs(z, t, i, k)) {
        csv.cell(r.level).cell(r.load_kn).cell(path_cell(r.path)).cell(static_cast<std::size_t>(r.trial)).cell(r.zi).cell(r.zj);
        csv.end();
      }
      write_text(out / ("latent_pair_" + std::to_string(i) + "_" + std::to_string(k) + ".csv"), csv.str());
    }
    for (auto swept : {ws::SweptVariable::Load, ws::SweptVariable::Level}) {
      const bool by_load = swept == ws::SweptVariable::Load;
      Csv csv{by_load ? "level" : "load_kn", "level_point", "load_kn_point", "n", "latent"};
      for (const auto& tr : ws::latent_trajectories(z, t.labels, swept))
        for (const auto& p : tr.points) {
          std::string latent;
          for (std::size_t q = 0; q < p.mean.size(); ++q) latent += (q ? " " : "") + num(p.mean[q]);
          csv.cell(tr.fixed).cell(p.level).cell(p.load_kn).cell(p.n).cell(latent);
          csv.end();
        }
      write_text(out / (by_load ? "trajectories_by_load.csv" : "trajectories_by_level.csv"), csv.str());
    }
    const auto sep = ws::cluster_separation(z, t.labels);
    j["cluster"] = {{"mean_intra", sep.mean_intra}, {"mean_inter", sep.mean_inter},
                    {"intra_pairs", sep.intra_pairs}, {"inter_pairs", sep.inter_pairs}};
  }
  write_json(out / "analysis.json", j);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_report(const Options& o) {
  const fs::path out = require_out(o);
  auto m = load_models(o);
  ws::ReportThresholds thresholds = m.cfg.report;
  if (!o.config.empty()) thresholds = ws::parse_config(ws::io::read_text(o.config)).report;
  const auto& f = m.framework;
  const auto data = load_data(o.dataset, m.cfg);
  const auto rows = select_rows(data.processed, m.cfg.split, o.split);
  const auto t = ws::build_tensor(rows, f.cae.spec.model_type);
  const std::size_t threads = m.cfg.cae_train.threads;

  const auto est = ws::estimate_all(f, t, threads);
  const auto summary = ws::summarize(est, t.labels);
  const double ae = ws::autoencoder_report(f.cae, t, threads).mean_rss_sss();
  const double gen = ws::generator_report(f, t, threads).mean_rss_sss();

  json j{{"model_type", static_cast<int>(f.cae.spec.model_type)},
         {"split", o.split},
         {"estimation", summary_json(summary)},
         {"load_boxes", boxes_json(ws::load_boxes(est, t.labels))},
         {"autoencoder_mean_rss_sss_pct", ae},
         {"generator_mean_rss_sss_pct", gen},
         {"round_trip_accuracy", ws::round_trip_accuracy(f)}};
  if (f.cae.spec.model_type == ws::ModelType::TypeIII) {
    json d = json::array();
    const auto dis = ws::damage_disparities(f.cae, t, 0, m.cfg.spectrogram, threads);
    for (const auto& l : dis) d.push_back({{"level", l.level}, {"disparity", l.disparity}});
    j["disparity_at_0kN"] = d;
    j["monotonicity_violations"] = ws::monotonicity_violations(dis);
  } else {
    const auto sep = ws::cluster_separation(ws::compute_latents(f.cae, t, threads), t.labels);
    j["cluster"] = {{"mean_intra", sep.mean_intra}, {"mean_inter", sep.mean_inter}};
  }
  const bool acc_ok = summary.accuracy >= thresholds.min_accuracy;
  const bool rss_ok = ae <= thresholds.max_mean_rss_sss;
  j["thresholds"] = {{"min_accuracy", thresholds.min_accuracy},
                     {"max_mean_rss_sss_pct", thresholds.max_mean_rss_sss},
                     {"accuracy_met", acc_ok},
                     {"rss_sss_met", rss_ok}};
  j["passed"] = acc_ok && rss_ok;
  write_json(out / "report.json", j);
  std::cout << j.dump(2) << "\n";
  return acc_ok && rss_ok ? kOk : kThreshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavestate: guided-wave state estimation and signal generation with autoencoders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", WAVESTATE_GIT_DESCRIBE);
  Options o;

  auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "key = value run configuration")->check(CLI::ExistingFile); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory"); };
  auto add_dataset = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--dataset", o.dataset, "WSDS dataset file");
    if (required) opt->required();
  };
  auto add_models = [&](CLI::App* c) {
    c->add_option("--models", o.models, "directory written by `train`")->required();
    c->add_option("--model-type", o.model_type, "expected model type (checked against the checkpoints)")
        ->check(CLI::Range(1, 3));
    c->add_option("--split", o.split, "rows to use: test, train or all")->check(CLI::IsMember({"test", "train", "all"}));
  };
  auto add_training = [&](CLI::App* c) {
    c->add_option("--model-type", o.model_type, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
    c->add_option("--seed", o.seed, "run seed");
    c->add_option("--exclude-load", o.exclude_load, "load (kN) to drop from training; repeatable");
    c->add_option("--epochs", o.epochs, "epochs for every network");
    c->add_option("--latent-width", o.latent_width, "latent variables D");
    c->add_option("--filters", o.filters, "filters of the first convolution");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_config(synth);
  add_out(synth);
  synth->add_option("--seed", o.seed, "run seed");
  synth->add_option("--trial-multiplier", o.trial_multiplier, "scale the trial counts")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train the autoencoder, estimator and generator");
  add_config(train);
  add_out(train);
  add_dataset(train, true);
  add_training(train);

  auto* estimate = app.add_subcommand("estimate", "estimate states of dataset rows");
  add_out(estimate);
  add_dataset(estimate, true);
  add_models(estimate);

  auto* reconstruct = app.add_subcommand("reconstruct", "generate signals for states and score reconstructions");
  add_out(reconstruct);
  add_dataset(reconstruct, false);
  add_models(reconstruct);
  reconstruct->add_option("--state", o.states, "level,load[,path]; repeatable");

  auto* sweep = app.add_subcommand("sweep", "single-axis hyperparameter sweep");
  add_config(sweep);
  add_out(sweep);
  add_dataset(sweep, true);
  add_training(sweep);
  sweep->add_option("--axis", o.axis, "latent_width, filters, hidden_width or hidden_depth")->required();
  sweep->add_option("--values", o.values, "comma-separated values (default: the standard grid)");

  auto* analyze = app.add_subcommand("analyze", "latent-space and spectrogram exports");
  add_out(analyze);
  add_dataset(analyze, true);
  add_models(analyze);
  analyze->add_option("--latent-pair", o.latent_pair, "two 1-based latent indices, e.g. 1,2, or all");
  analyze->add_option("--baseline-load", o.baseline_load, "load (kN) of the Type III disparity baseline");

  auto* report = app.add_subcommand("report", "bundle all metrics and check thresholds");
  add_config(report);
  add_out(report);
  add_dataset(report, true);
  add_models(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*estimate) return cmd_estimate(o);
    if (*reconstruct) return cmd_reconstruct(o);
    if (*sweep) return cmd_sweep(o);
    if (*analyze) return cmd_analyze(o);
    if (*report) return cmd_report(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ws::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ws::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ws::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const ws::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
