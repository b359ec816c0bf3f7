#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mmot/filter.hpp"
#include "mmot/learned.hpp"
#include "mmot/training.hpp"

namespace mmot::app {

// Runs fn(0..n-1) on up to `threads` workers. Results must be written to
// per-index slots so the outcome does not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

struct StudyOptions {
  int eval_seeds = 20;
  std::uint64_t eval_seed_base = 0;
  int train_seeds = 200;
  std::uint64_t train_seed_base = 1000;
  std::uint64_t model_seed = 0;
  TrainConfig train;
  int threads = 1;
};

// Baseline against learned on one evaluation seed.
struct SeedComparison {
  std::uint64_t seed = 0;
  int baseline_ids = 0;
  int learned_ids = 0;
  double baseline_amota = 0.0;
  double learned_amota = 0.0;
  int baseline_false_tracks = 0;
  int learned_false_tracks = 0;
};

struct Study {
  NoiseSuite noise;
  std::shared_ptr<const LearnedModels> models;
  std::vector<EpochRecord> telemetry;
  std::vector<SeedComparison> rows;
  double train_seconds = 0.0;
  double total_seconds = 0.0;

  int baseline_ids() const;
  int learned_ids() const;
  int baseline_false_tracks() const;
  int learned_false_tracks() const;
  double baseline_amota() const;  // mean over seeds
  double learned_amota() const;
  // Seeds where the learned AMOTA is at least the baseline's.
  int learned_not_worse() const;
};

// Crossing benchmark: Mahalanobis-only tracker against the trained
// combined-distance tracker, both with always-init. Noise and nets are
// fitted on training seeds disjoint from the evaluation seeds.
Study crossing_study(const StudyOptions& options);

// Cluttered scenes: learned association with always-init ("baseline")
// against the same models with learned init.
StudyOptions clutter_defaults();
Study clutter_study(const StudyOptions& options, double clutter_rate = 2.0);

}  // namespace mmot::app
