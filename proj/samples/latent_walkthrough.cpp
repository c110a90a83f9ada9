// Library walkthrough: synthesise a small data set, train a Type II
// framework briefly, then estimate a state, generate a signal and look at
// the latent space.
//
//   latent_walkthrough [epochs]

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "wavestate/analysis.hpp"

namespace ws = wavestate;

int main(int argc, char** argv) {
  const std::size_t epochs = argc > 1 ? static_cast<std::size_t>(std::atoi(argv[1])) : 20;

  ws::synth::SynthConfig sc;
  sc.trial_multiplier = 0.1;  // 2 trials per state and path
  const auto records = ws::preprocess(ws::synth::synth_dataset(sc));
  const auto parts = ws::split(records, ws::SplitSpec::scaled(sc.trial_multiplier));
  const auto train = ws::build_tensor(parts.train, ws::ModelType::TypeII);
  const auto test = ws::build_tensor(parts.test, ws::ModelType::TypeII);
  std::cout << records.size() << " records, " << train.rows() << " training rows, " << test.rows() << " test rows\n";

  ws::FrameworkConfig cfg;
  cfg.cae_train.epochs = epochs;
  cfg.ffnn_train.epochs = 5 * epochs;
  const auto trained = ws::train_framework(train, cfg);
  const auto& f = trained.framework;
  std::cout << "CAE loss " << trained.cae_fit.loss.front() << " -> " << trained.cae_fit.best_loss.back() << "\n";

  // Estimation branch on one held-out row.
  const auto e = ws::estimate_state(f, test.row(0));
  std::cout << std::fixed << std::setprecision(3) << "true " << ws::to_string(test.labels[0]) << ", raw (" << e.raw[0]
            << ", " << e.raw[1] << "), rounded " << ws::to_string(e.rounded) << "\n";

  // Generation branch: all nine paths of (level 3, 15 kN).
  const auto signal = ws::reconstruct_signal(f, {3, 15, std::nullopt});
  const auto path14 = ws::path_signal(signal.values(), ws::ModelType::TypeII, 0);
  std::cout << "generated " << signal.shape()[0] << " samples x " << signal.shape()[1] << " paths; path 1-4 starts";
  for (std::size_t i = 0; i < 5; ++i) std::cout << " " << path14[i];
  std::cout << "\n";

  // Latent space: how tightly rows of one state cluster.
  const auto sep = ws::cluster_separation(ws::compute_latents(f.cae, test), test.labels);
  std::cout << "latent distance within states " << sep.mean_intra << ", between states " << sep.mean_inter << "\n";

  const auto s = ws::summarize(ws::estimate_all(f, test), test.labels);
  std::cout << "held-out accuracy " << s.accuracy << " over " << s.n << " rows\n";
  return 0;
}
