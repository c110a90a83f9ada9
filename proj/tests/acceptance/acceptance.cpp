// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "support/architecture_tables.hpp"
#include "support/gradcheck.hpp"
#include "wavestate/analysis.hpp"
#include "wavestate/config.hpp"
#include "wavestate/formats.hpp"
#include "wavestate/io.hpp"

namespace fs = std::filesystem;
using namespace wavestate;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  failures += !pass;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
}

void note(const std::string& line) { std::cerr << "  " << line << std::endl; }

// ------------------------------------------------------------------ 1-3

void architecture() {
  const auto t0 = Clock::now();
  std::vector<std::string> problems;
  std::string totals;
  for (const auto& want : test_support::expected_tables()) {
    CaeSpec spec;
    spec.model_type = want.type;
    const auto cae = build_cae(spec);
    const std::string name = "Type " + to_string(want.type);
    for (auto& m : test_support::table_mismatches(layer_table(cae.encoder, true), want.encoder, name + " encoder"))
      problems.push_back(m);
    for (auto& m : test_support::table_mismatches(layer_table(cae.decoder, false), want.decoder, name + " decoder"))
      problems.push_back(m);
    const auto enc = count_parameters(cae, NetworkPart::Encoder), dec = count_parameters(cae, NetworkPart::Decoder);
    if (enc != want.encoder_total) problems.push_back(name + " encoder total " + std::to_string(enc));
    if (dec != want.decoder_total) problems.push_back(name + " decoder total " + std::to_string(dec));
    totals += (totals.empty() ? "" : " / ") + std::to_string(enc) + " / " + std::to_string(dec);
  }
  for (const auto& p : problems) note(p);
  verdict(1, problems.empty(), "parameter totals " + totals + ", " + std::to_string(problems.size()) +
                                   " table mismatches (" + fmt(seconds_since(t0), 2) + " s)");
}

void gradients() {
  const auto t0 = Clock::now();
  const auto s = test_support::gradient_suite(50, 20240601);
  const double sec = seconds_since(t0);
  verdict(2, s.networks == 50 && s.worst < 1e-4 && sec < 30.0,
          std::to_string(s.networks) + " networks, " + std::to_string(s.checked) + " derivatives, max relative error " +
              fmt(s.worst, 3) + " (" + fmt(sec, 2) + " s)");
}

void metrics(const std::vector<synth::TimeSeriesRecord>& processed) {
  bool ok = true;
  const std::vector<double> y{1.0, -2.0, 3.0};
  ok &= rss_sss(y, y) == 0.0;
  ok &= rss_sss(y, std::vector<double>{0, 0, 0}) == 100.0;
  ok &= std::abs(rss_sss(std::vector<double>{1, 2}, std::vector<double>{1, 1}) - 20.0) < 1e-12;
  ok &= rmse(std::vector<double>{3, 0}, std::vector<double>{0, 4}) == std::sqrt(12.5);
  ok &= rmse(y, y) == 0.0;
  ok &= standardize(std::vector<double>{0, 2}) == std::vector<double>{-1, 1};
  double worst_mean = 0.0, worst_std = 0.0;
  for (const auto& r : processed) {
    double m = 0.0, v = 0.0;
    for (double x : r.samples) m += x;
    m /= static_cast<double>(r.samples.size());
    for (double x : r.samples) v += (x - m) * (x - m);
    worst_mean = std::max(worst_mean, std::abs(m));
    worst_std = std::max(worst_std, std::abs(std::sqrt(v / static_cast<double>(r.samples.size())) - 1.0));
  }
  ok &= worst_mean < 1e-9 && worst_std < 1e-9;
  verdict(3, ok, "metric examples exact; over " + std::to_string(processed.size()) + " records max |mean| " +
                     fmt(worst_mean, 3) + ", max |std-1| " + fmt(worst_std, 3));
}

// ------------------------------------------------------------------ 4-7

bool loss_decreased(const FitResult& f) { return f.loss.size() > 1 && f.loss.back() < f.loss.front(); }

bool all_losses_decreased(const FrameworkTrainResult& r) {
  return loss_decreased(r.cae_fit) && loss_decreased(r.estimator_fit.fit) && loss_decreased(r.generator_fit.fit);
}

std::string box_text(const PredictionBox& b) { return "[" + fmt(b.lower) + ", " + fmt(b.upper) + "]"; }

struct TypeRun {
  FrameworkTrainResult trained;
  double test_rss = 0.0;
  double seconds = 0.0;
};

TypeRun train_type(ModelType type, const SplitResult& parts, FrameworkConfig cfg) {
  const auto t0 = Clock::now();
  cfg.cae.model_type = type;
  const auto train = build_tensor(parts.train, type);
  const auto test = build_tensor(parts.test, type);
  TypeRun r{train_framework(train, cfg), 0.0, 0.0};
  r.test_rss = autoencoder_report(r.trained.framework.cae, test).mean_rss_sss();
  r.seconds = seconds_since(t0);
  note("Type " + to_string(type) + ": " + std::to_string(train.rows()) + " training rows, test RSS/SSS " +
       fmt(r.test_rss) + "%, " + fmt(r.seconds, 3) + " s");
  return r;
}

void desk_scale(const std::vector<synth::TimeSeriesRecord>& processed) {
  const FrameworkConfig cfg;
  const SplitSpec spec = SplitSpec::scaled(0.25);
  const auto parts = split(processed, spec);
  const auto test2 = build_tensor(parts.test, ModelType::TypeII);

  auto t0 = Clock::now();
  const auto rob = robustness_experiment(processed, spec, cfg, 10);
  const double rob_sec = seconds_since(t0);
  const auto& full = rob.full;
  const auto& reduced = rob.reduced;
  const auto& f2 = rob.full_model.framework;
  note("Type II full and reduced models trained in " + fmt(rob_sec, 3) + " s");

  // 4. State estimation on the held-out split.
  const double rt = round_trip_accuracy(f2);
  note("Type II round-trip accuracy over grid states " + fmt(rt));
  verdict(4, full.estimation.accuracy >= 0.95,
          "Type II held-out accuracy " + fmt(full.estimation.accuracy) + " over " + std::to_string(full.estimation.n) +
              " rows (threshold 0.95)");

  // 5. Reconstruction quality and the three model types.
  const double rss2 = full.reconstruction.mean_rss_sss();
  const auto type1 = train_type(ModelType::TypeI, parts, cfg);
  const auto type3 = train_type(ModelType::TypeIII, parts, cfg);
  const bool trained_ok = all_losses_decreased(rob.full_model) && all_losses_decreased(rob.reduced_model) &&
                          all_losses_decreased(type1.trained) && all_losses_decreased(type3.trained) &&
                          std::isfinite(type1.test_rss) && std::isfinite(type3.test_rss);
  const bool ordering = rss2 <= type1.test_rss;
  if (!ordering) note("ordering deviation: Type II mean RSS/SSS exceeds Type I");
  verdict(5, rss2 < 5.0 && trained_ok,
          "mean test RSS/SSS Type I " + fmt(type1.test_rss) + "%, Type II " + fmt(rss2) + "%, Type III " +
              fmt(type3.test_rss) + "%; Type II <= Type I " + (ordering ? "holds" : "violated (logged)") +
              "; final losses below initial: " + (trained_ok ? "yes" : "no"));

  // 6. Robustness to a missing load.
  bool others_ok = true;
  std::string accs;
  for (int load : {0, 5, 15, 20}) {
    const double a = reduced.estimation.load_accuracy.at(load);
    others_ok &= a >= 0.95;
    accs += (accs.empty() ? "" : ", ") + std::to_string(load) + " kN " + fmt(a);
  }
  const auto& bf = full.load_boxes.at(10);
  const auto& br = reduced.load_boxes.at(10);
  const bool wider = br.width() > bf.width();
  const bool inside = br.lower > 7.5 && br.upper < 12.5;
  note("reduced model accuracy at 10 kN " + fmt(reduced.estimation.load_accuracy.at(10)));
  verdict(6, others_ok && wider && inside,
          "reduced-model accuracy " + accs + "; 10 kN box full " + box_text(bf) + " vs reduced " + box_text(br) +
              (wider ? " (wider" : " (not wider") + (inside ? ", inside (7.5, 12.5))" : ", outside (7.5, 12.5))"));

  // 7. Latent-space structure.
  const auto sep = cluster_separation(compute_latents(f2.cae, test2), test2.labels);
  const auto test3 = build_tensor(parts.test, ModelType::TypeIII);
  RunConfig rc;
  rc.resolve();
  const auto dis = damage_disparities(type3.trained.framework.cae, test3, 0, rc.spectrogram);
  const auto violations = monotonicity_violations(dis);
  std::string ladder;
  for (const auto& d : dis) ladder += (ladder.empty() ? "" : ", ") + fmt(d.disparity);
  const bool extremes = dis.size() == 5 && dis[4].disparity > dis[1].disparity;
  const SpectrogramSpec& sg = rc.spectrogram;
  const bool sg_ok = sg.segment_length == 256 && sg.overlap == 243 && sg.frame_count(800) == 42 &&
                     spectrogram(latent_signal(dis.front().mean_latent, 1), sg).frames == 42;
  verdict(7, sep.mean_intra < sep.mean_inter && violations <= 1 && extremes && sg_ok,
          "Type II intra " + fmt(sep.mean_intra) + " < inter " + fmt(sep.mean_inter) +
              "; Type III disparity by level at 0 kN [" + ladder + "], " + std::to_string(violations) +
              " violations; spectrogram 256/243 -> " + std::to_string(sg.frame_count(800)) + " frames");
}

// ------------------------------------------------------------------ 8

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  bool same = true;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto other = b / e.path().filename();
    ++files;
    if (!fs::exists(other) || io::read_file(e.path()) != io::read_file(other)) {
      note("differs: " + e.path().filename().string());
      same = false;
    }
  }
  return same;
}

// Both runs write to the same paths, so the resolved configs (which record
// the output directory) are compared as well.
void determinism(const std::string& cli, const fs::path& work) {
  const auto dir = work / "run";
  const std::string quiet = " > " + (work / "run.log").string() + " 2>&1";
  auto once = [&] {
    return run(cli + " synth --trial-multiplier 0.1 --seed 99 --out " + (dir / "data").string() + quiet) == 0 &&
           run(cli + " train --dataset " + (dir / "data/dataset.wsds").string() +
               " --model-type 2 --seed 99 --epochs 3 --out " + (dir / "model").string() + quiet) == 0;
  };
  if (!once()) {
    verdict(8, false, "CLI run failed; see " + (work / "run.log").string());
    return;
  }
  fs::copy(dir, work / "first", fs::copy_options::recursive);
  if (!once()) {
    verdict(8, false, "second CLI run failed; see " + (work / "run.log").string());
    return;
  }
  std::size_t files = 0;
  bool ok = same_tree(work / "first/data", dir / "data", files);
  ok &= same_tree(work / "first/model", dir / "model", files);
  verdict(8, ok, std::to_string(files) + " synth and train artifacts compared byte for byte");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavestate acceptance run"};
  std::string cli;
  std::string work = "acceptance_work";
  app.add_option("--cli", cli, "path to the wavestate executable")->required();
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = Clock::now();
  fs::remove_all(work);
  fs::create_directories(work);
  note("hardware threads: " + std::to_string(std::thread::hardware_concurrency()));

  try {
    architecture();
    gradients();
    synth::SynthConfig sc;
    sc.trial_multiplier = 0.25;
    const auto processed = preprocess(synth::synth_dataset(sc));
    metrics(processed);
    desk_scale(processed);
    determinism(cli, work);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }

  const double total = seconds_since(t0);
  verdict(9, total <= 1800.0,
          "criteria 1-8 took " + fmt(total, 4) + " s on " + std::to_string(std::thread::hardware_concurrency()) +
              " hardware threads (budget 1800 s)");
  return failures == 0 ? 0 : 1;
}
