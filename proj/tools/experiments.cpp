#include "experiments.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "mmot/metrics.hpp"
#include "mmot/simlab.hpp"
#include "mmot/tracker.hpp"

namespace mmot::app {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

int Study::baseline_ids() const {
  int s = 0;
  for (const auto& r : rows) s += r.baseline_ids;
  return s;
}
int Study::learned_ids() const {
  int s = 0;
  for (const auto& r : rows) s += r.learned_ids;
  return s;
}
int Study::baseline_false_tracks() const {
  int s = 0;
  for (const auto& r : rows) s += r.baseline_false_tracks;
  return s;
}
int Study::learned_false_tracks() const {
  int s = 0;
  for (const auto& r : rows) s += r.learned_false_tracks;
  return s;
}
double Study::baseline_amota() const {
  double s = 0;
  for (const auto& r : rows) s += r.baseline_amota;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}
double Study::learned_amota() const {
  double s = 0;
  for (const auto& r : rows) s += r.learned_amota;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}
int Study::learned_not_worse() const {
  int s = 0;
  for (const auto& r : rows) s += r.learned_amota >= r.baseline_amota ? 1 : 0;
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

// Fits noise and all nets on scenarios produced by `make(seed)`.
template <typename Make>
void fit(const StudyOptions& o, Make make, Study& study, TrackerConfig& tracker) {
  std::vector<Scenario> scenarios(static_cast<std::size_t>(o.train_seeds));
  parallel_for(o.train_seeds, o.threads,
               [&](int k) { scenarios[k] = make(o.train_seed_base + static_cast<std::uint64_t>(k)); });
  NoiseSamples samples;
  std::vector<LabeledSequence> sequences;
  for (const auto& sc : scenarios) {
    merge_samples(samples, collect_noise_samples(sc.truth, sc.detections));
    sequences.push_back({sc.truth, sc.detections});
  }
  study.noise = estimate_noise(samples);
  tracker.noise = study.noise;

  std::vector<TrainingSet> parts(sequences.size());
  parallel_for(static_cast<int>(sequences.size()), o.threads, [&](int k) {
    parts[k] = build_training_set(std::span(sequences).subspan(k, 1), tracker,
                                  o.train.dims.features, o.train.label_radius);
  });
  TrainingSet set;
  for (auto& p : parts) {
    for (auto& s : p.pairs) set.pairs.push_back(std::move(s));
    for (auto& s : p.inits) set.inits.push_back(std::move(s));
  }
  auto models = std::make_shared<LearnedModels>(LearnedModels::create(o.train.dims, o.model_seed));
  TrainConfig tc = o.train;
  tc.seed = o.model_seed;
  study.telemetry = train_all(*models, set, tc);
  study.models = models;
}

}  // namespace

Study crossing_study(const StudyOptions& o) {
  const auto start = Clock::now();
  Study study;
  TrackerConfig tracker;
  fit(o, [](std::uint64_t seed) { return crossing_benchmark(seed); }, study, tracker);
  study.train_seconds = seconds_since(start);

  study.rows.resize(static_cast<std::size_t>(o.eval_seeds));
  parallel_for(o.eval_seeds, o.threads, [&](int k) {
    const std::uint64_t seed = o.eval_seed_base + static_cast<std::uint64_t>(k);
    const Scenario sc = crossing_benchmark(seed);
    const auto base = evaluate(sc.truth, run_sequence(tracker, nullptr, sc.detections),
                               sc.config.frames);
    const auto learned = evaluate(sc.truth, run_sequence(tracker, study.models, sc.detections),
                                  sc.config.frames);
    study.rows[k] = {seed,          base.id_switches,  learned.id_switches, base.amota,
                     learned.amota, base.false_tracks, learned.false_tracks};
  });
  study.total_seconds = seconds_since(start);
  return study;
}

StudyOptions clutter_defaults() {
  StudyOptions o;
  o.train_seeds = 40;
  o.train_seed_base = 5000;
  return o;
}

Study clutter_study(const StudyOptions& o, double clutter_rate) {
  const auto start = Clock::now();
  ScenarioConfig base;
  base.clutter_rate = clutter_rate;
  base.features = o.train.dims.features;
  auto make = [&](std::uint64_t seed) {
    ScenarioConfig c = base;
    c.seed = seed;
    return generate(c);
  };
  Study study;
  TrackerConfig always;
  fit(o, make, study, always);
  study.train_seconds = seconds_since(start);
  TrackerConfig learned = always;
  learned.policy.init_mode = InitMode::Learned;

  study.rows.resize(static_cast<std::size_t>(o.eval_seeds));
  parallel_for(o.eval_seeds, o.threads, [&](int k) {
    const std::uint64_t seed = o.eval_seed_base + static_cast<std::uint64_t>(k);
    const Scenario sc = make(seed);
    const auto a = evaluate(sc.truth, run_sequence(always, study.models, sc.detections),
                            sc.config.frames);
    const auto l = evaluate(sc.truth, run_sequence(learned, study.models, sc.detections),
                            sc.config.frames);
    study.rows[k] = {seed, a.id_switches, l.id_switches, a.amota, l.amota, a.false_tracks,
                     l.false_tracks};
  });
  study.total_seconds = seconds_since(start);
  return study;
}

}  // namespace mmot::app
