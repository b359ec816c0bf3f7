#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmot/core.hpp"
#include "mmot/tracker.hpp"

namespace mmot {

struct FrameCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int ids = 0;
  int gt_positives = 0;

  FrameCounts& operator+=(const FrameCounts& o);
  bool operator==(const FrameCounts&) const = default;
};

struct HypothesisBox {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

inline constexpr double kMetricGate = 2.0;

// CLEAR-MOT correspondence bookkeeping for one class of one sequence.
class ClearMotMatcher {
 public:
  explicit ClearMotMatcher(double gate = kMetricGate) : gate_(gate) {}

  // Matches one frame: correspondences from the most recent matched frame
  // are kept while within the gate, the rest are matched greedily by center
  // distance. An identity switch is counted when a ground-truth identity
  // matches a different track id than at its last match.
  FrameCounts match_frame(std::span<const GroundTruthBox> truth,
                          std::span<const HypothesisBox> hypotheses,
                          std::vector<std::pair<int, int>>* matched = nullptr);

 private:
  double gate_;
  std::unordered_map<int, int> last_track_;  // gt identity -> track id
};

// 1 - (IDS + FP + FN) / P. Throws std::invalid_argument when P = 0.
double mota(const FrameCounts& counts);

// max(0, 1 - (IDS + FP + FN - (1 - r) P) / (r P)). Throws
// std::invalid_argument unless r lies in (0, 1] and P > 0.
double motar(const FrameCounts& counts, double recall);

struct RecallPoint {
  double target = 0.0;      // sampled recall level
  bool reachable = false;
  double threshold = 0.0;   // highest score threshold reaching the target
  double recall = 0.0;      // recall achieved at that threshold
  double motar = 0.0;
  FrameCounts counts;
};

struct AmotaResult {
  double amota = 0.0;
  double mota = 0.0;            // best MOTA over the sampled thresholds
  std::vector<RecallPoint> points;
  FrameCounts all_counts;       // every hypothesis kept
  int hypothesis_tracks = 0;    // distinct track ids
  int false_tracks = 0;         // track ids never matched to any identity
};

// Per-frame hypotheses of one class; `truth[k]` and `hypotheses[k]` describe
// frame k. Uses recall levels 1/(n-1), ..., 1. MOTAR at each level is
// evaluated at the achieved recall of the chosen threshold; unreachable
// levels contribute 0. Throws std::invalid_argument when there are no
// ground-truth positives.
AmotaResult amota(std::span<const GroundTruthFrame> truth,
                  std::span<const std::vector<HypothesisBox>> hypotheses, int sample_points = 40,
                  double gate = kMetricGate);

// Counts over a sequence keeping hypotheses with score >= threshold.
FrameCounts count_sequence(std::span<const GroundTruthFrame> truth,
                           std::span<const std::vector<HypothesisBox>> hypotheses,
                           double threshold, double gate = kMetricGate,
                           std::set<int>* matched_tracks = nullptr);

struct ClassMetrics {
  ClassId class_id = 0;
  AmotaResult result;
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;
  // Unweighted means across classes.
  double amota = 0.0;
  double mota = 0.0;
  int id_switches = 0;
  int false_tracks = 0;
};

struct EvalOptions {
  int sample_points = 40;
  double gate = kMetricGate;
  std::optional<std::set<ClassId>> classes;
};

// Evaluates every class that has ground truth over `num_frames` frames.
MetricsReport evaluate(std::span<const GroundTruthFrame> truth,
                       std::span<const ReportedTrack> tracks, int num_frames,
                       const EvalOptions& options = {});

}  // namespace mmot
