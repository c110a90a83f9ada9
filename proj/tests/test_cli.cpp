#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wavestate/formats.hpp"
#include "wavestate/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("wavestate_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI and returns its exit status; output goes to `log`.
int run(const std::string& args, const std::string& log = "last.log") {
  const std::string cmd = std::string(WAVESTATE_CLI) + " " + args + " > " + (work_dir() / log).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& rel) { return (work_dir() / rel).string(); }

std::string read(const std::string& rel) { return wavestate::io::read_text(work_dir() / rel); }

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

void write(const std::string& rel, const std::string& text) { wavestate::io::atomic_write(work_dir() / rel, text); }

// A tenth-scale data set and a briefly trained Type II model, shared by the
// tests of one process.
class CliFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ASSERT_EQ(run("synth --trial-multiplier 0.1 --out " + p("data")), 0) << read("last.log");
    ASSERT_EQ(run("train --dataset " + p("data/dataset.wsds") + " --model-type 2 --epochs 3 --out " + p("m2")), 0)
        << read("last.log");
  }
};

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bogus"), 1);
  EXPECT_EQ(run("train --dataset nowhere.wsds --out " + p("x")), 1);  // no --model-type
  EXPECT_EQ(run("train --dataset nowhere.wsds --model-type 4 --out " + p("x")), 1);
}

TEST(Cli, MissingInputIsAnIoError) {
  EXPECT_EQ(run("train --dataset " + p("does_not_exist.wsds") + " --model-type 2 --out " + p("x")), 2);
}

TEST(Cli, UnknownConfigKeyNamesTheLine) {
  write("bad.cfg", "seed = 3\ncae.latent_widht = 4\n");
  EXPECT_EQ(run("synth --config " + p("bad.cfg") + " --out " + p("bad"), "bad.log"), 1);
  EXPECT_NE(read("bad.log").find("line 2"), std::string::npos) << read("bad.log");
}

TEST(Cli, SynthIsReproducible) {
  ASSERT_EQ(run("synth --trial-multiplier 0.1 --seed 5 --out " + p("s1")), 0);
  const auto first = wavestate::io::read_file(p("s1/dataset.wsds"));
  const auto first_cfg = read("s1/resolved.cfg");
  ASSERT_EQ(run("synth --trial-multiplier 0.1 --seed 5 --out " + p("s1")), 0);
  EXPECT_EQ(wavestate::io::read_file(p("s1/dataset.wsds")), first);
  EXPECT_EQ(read("s1/resolved.cfg"), first_cfg);
  const auto d = wavestate::load_dataset(p("s1/dataset.wsds"));
  EXPECT_EQ(d.records.size(), 450u);
  ASSERT_EQ(run("synth --trial-multiplier 0.1 --seed 6 --out " + p("s3")), 0);
  EXPECT_NE(wavestate::io::read_file(p("s3/dataset.wsds")), first);
}

TEST_F(CliFixture, TrainWritesModelsAndLogs) {
  for (const char* f : {"cae.wsck", "estimator.wsck", "generator.wsck", "cae_loss.csv", "estimator_loss.csv",
                        "generator_loss.csv", "train_census.csv", "resolved.cfg"})
    EXPECT_TRUE(fs::exists(work_dir() / "m2" / f)) << f;
  EXPECT_EQ(line_count(read("m2/cae_loss.csv")), 1u + 4u);  // header + epochs 0..3
  const auto ck = wavestate::load_checkpoint(p("m2/cae.wsck"));
  EXPECT_EQ(ck.metadata.at("model_type"), 2);
  EXPECT_EQ(ck.metadata.at("epochs"), 3);
}

TEST_F(CliFixture, ExcludedLoadIsAbsentFromTraining) {
  ASSERT_EQ(run("train --dataset " + p("data/dataset.wsds") +
                " --model-type 2 --epochs 1 --exclude-load 10 --out " + p("m2x")), 0)
      << read("last.log");
  std::istringstream census(read("m2x/train_census.csv"));
  std::string line;
  std::getline(census, line);
  std::size_t rows = 0;
  while (std::getline(census, line)) {
    ++rows;
    EXPECT_EQ(line.find(",10,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 20u);
  EXPECT_NE(read("m2x/resolved.cfg").find("split.exclude_loads = 10"), std::string::npos);
}

TEST_F(CliFixture, EstimateWritesOneRowPerTestRow) {
  ASSERT_EQ(run("estimate --dataset " + p("data/dataset.wsds") + " --models " + p("m2") + " --out " + p("est")), 0)
      << read("last.log");
  EXPECT_EQ(line_count(read("est/estimates.csv")), 1u + 25u);
  const auto j = nlohmann::json::parse(read("est/estimate_summary.json"));
  EXPECT_EQ(j.at("n"), 25);
  EXPECT_TRUE(fs::exists(work_dir() / "est/state_accuracy.csv"));
}

TEST_F(CliFixture, ReconstructWritesAllPaths) {
  ASSERT_EQ(run("reconstruct --models " + p("m2") + " --state 0,0 --out " + p("rec")), 0) << read("last.log");
  std::istringstream in(read("rec/signal_L0_0kN.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 9);
  EXPECT_EQ(line_count(read("rec/signal_L0_0kN.csv")), 801u);
  EXPECT_EQ(run("reconstruct --models " + p("m2") + " --state 0,0,4 --out " + p("rec")), 1);
  EXPECT_EQ(run("reconstruct --models " + p("m2") + " --state 0,7 --out " + p("rec")), 1);
}

TEST_F(CliFixture, ModelTypeMismatchIsRejected) {
  EXPECT_EQ(run("estimate --dataset " + p("data/dataset.wsds") + " --models " + p("m2") + " --model-type 1 --out " +
                p("mm")),
            2);
}

TEST_F(CliFixture, ReportThresholdsSetTheExitCode) {
  write("lenient.cfg", "report.min_accuracy = 0\nreport.max_mean_rss_sss = 1e9\n");
  write("strict.cfg", "report.min_accuracy = 1.01\n");
  const std::string base = "report --dataset " + p("data/dataset.wsds") + " --models " + p("m2");
  EXPECT_EQ(run(base + " --config " + p("lenient.cfg") + " --out " + p("rep_ok")), 0) << read("last.log");
  EXPECT_EQ(run(base + " --config " + p("strict.cfg") + " --out " + p("rep_fail")), 4);
  const auto j = nlohmann::json::parse(read("rep_fail/report.json"));
  EXPECT_FALSE(j.at("passed").get<bool>());
  EXPECT_TRUE(j.contains("cluster"));
}

TEST_F(CliFixture, AnalyzeExportsLatentPairs) {
  ASSERT_EQ(run("analyze --dataset " + p("data/dataset.wsds") + " --models " + p("m2") + " --out " + p("an")), 0)
      << read("last.log");
  std::size_t pairs = 0;
  for (const auto& e : fs::directory_iterator(work_dir() / "an"))
    pairs += e.path().filename().string().starts_with("latent_pair_");
  EXPECT_EQ(pairs, 21u);
  EXPECT_TRUE(fs::exists(work_dir() / "an/analysis.json"));
  ASSERT_EQ(run("analyze --dataset " + p("data/dataset.wsds") + " --models " + p("m2") + " --latent-pair 3,5 --out " +
                p("an1")), 0)
      << read("last.log");
  EXPECT_TRUE(fs::exists(work_dir() / "an1/latent_pair_3_5.csv"));
  EXPECT_FALSE(fs::exists(work_dir() / "an1/latent_pair_1_2.csv"));
}

TEST_F(CliFixture, SweepWritesOneRowPerValue) {
  ASSERT_EQ(run("sweep --dataset " + p("data/dataset.wsds") +
                " --model-type 2 --epochs 1 --axis hidden_depth --values 1,2 --out " + p("sw")), 0)
      << read("last.log");
  EXPECT_EQ(line_count(read("sw/sweep.csv")), 3u);
  EXPECT_EQ(run("sweep --dataset " + p("data/dataset.wsds") + " --model-type 2 --axis sideways --out " + p("sw")), 1);
}
