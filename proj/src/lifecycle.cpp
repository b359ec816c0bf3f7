#include "mmot/lifecycle.hpp"

#include <algorithm>

namespace mmot {

void LifecyclePolicy::validate() const {
  if (confirm_hits < 1) throw ConfigError("lifecycle: confirm_hits must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("lifecycle: threshold must lie in (0, 1)");
  }
  if (max_consecutive_misses < 0) throw ConfigError("lifecycle: max misses must be >= 0");
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Always: return "always";
    case InitMode::CountBased: return "count";
    case InitMode::Learned: return "learned";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& text, LifecyclePolicy* policy) {
  if (text == "always") return InitMode::Always;
  if (text == "learned") return InitMode::Learned;
  if (text == "count") return InitMode::CountBased;
  if (text.rfind("count:", 0) == 0) {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(text.substr(6), &used);
      if (used != text.size() - 6) k = 0;
    } catch (const std::exception&) {
      k = 0;
    }
    if (k < 1) throw ConfigError("lifecycle: bad count in '" + text + "'");
    if (policy) policy->confirm_hits = k;
    return InitMode::CountBased;
  }
  throw ConfigError("lifecycle: unknown init mode '" + text + "'");
}

std::vector<int> decide_init(int unmatched, std::optional<std::span<const double>> scores,
                             const LifecyclePolicy& policy) {
  std::vector<int> out;
  if (policy.init_mode == InitMode::Learned) {
    if (!scores) throw ConfigError("lifecycle: learned init requires init scores");
    if (static_cast<int>(scores->size()) != unmatched) {
      throw std::invalid_argument("lifecycle: score count does not match detections");
    }
    for (int i = 0; i < unmatched; ++i) {
      if ((*scores)[i] > policy.threshold) out.push_back(i);
    }
    return out;
  }
  out.resize(static_cast<std::size_t>(std::max(unmatched, 0)));
  for (int i = 0; i < unmatched; ++i) out[i] = i;
  return out;
}

bool starts_confirmed(const LifecyclePolicy& policy) {
  return policy.init_mode != InitMode::CountBased || policy.confirm_hits <= 1;
}

std::vector<int> decide_terminate(std::span<const Track> tracks, const LifecyclePolicy& policy) {
  std::vector<int> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].consecutive_misses > policy.max_consecutive_misses) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

void record_hit(Track& track, double confidence, const LifecyclePolicy& policy) {
  ++track.hits;
  ++track.hit_streak;
  track.consecutive_misses = 0;
  track.score = kScoreNewestWeight * confidence + (1.0 - kScoreNewestWeight) * track.score;
  if (!track.confirmed && track.hit_streak >= policy.confirm_hits) track.confirmed = true;
}

void record_miss(Track& track) {
  ++track.consecutive_misses;
  track.hit_streak = 0;
  track.score *= kScoreMissDecay;
}

}  // namespace mmot
