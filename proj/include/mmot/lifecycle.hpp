#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmot/core.hpp"

namespace mmot {

enum class InitMode {
  Always,      // every unmatched detection starts a track
  CountBased,  // provisional until `confirm_hits` consecutive matches
  Learned,     // start a track when the init score exceeds `threshold`
};

struct LifecyclePolicy {
  InitMode init_mode = InitMode::Always;
  int confirm_hits = 2;
  double threshold = 0.5;
  int max_consecutive_misses = 3;

  // Throws ConfigError on confirm_hits < 1, a threshold outside (0, 1), or a
  // negative miss budget.
  void validate() const;
  bool operator==(const LifecyclePolicy&) const = default;
};

std::string to_string(InitMode mode);
// Accepts "always", "count", "count:<k>" (sets confirm_hits when `policy`
// is given), and "learned". Throws ConfigError otherwise.
InitMode parse_init_mode(const std::string& text, LifecyclePolicy* policy = nullptr);

// Indices (into the unmatched list) of detections that start a track. Under
// CountBased every detection starts a provisional track. Throws ConfigError
// when Learned mode has no scores and std::invalid_argument when the score
// count differs from `unmatched`.
std::vector<int> decide_init(int unmatched, std::optional<std::span<const double>> scores,
                             const LifecyclePolicy& policy);

// Whether a freshly created track is reported immediately.
bool starts_confirmed(const LifecyclePolicy& policy);

// Indices of tracks whose consecutive misses exceed the policy budget.
std::vector<int> decide_terminate(std::span<const Track> tracks, const LifecyclePolicy& policy);

// Bookkeeping for a track matched to a detection of the given confidence.
void record_hit(Track& track, double confidence, const LifecyclePolicy& policy);
// Bookkeeping for a track without a detection this frame.
void record_miss(Track& track);

inline constexpr double kScoreNewestWeight = 0.7;
inline constexpr double kScoreMissDecay = 0.9;

}  // namespace mmot
