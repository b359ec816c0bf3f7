#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mmot/association.hpp"
#include "mmot/core.hpp"
#include "mmot/filter.hpp"
#include "mmot/learned.hpp"
#include "mmot/lifecycle.hpp"

namespace mmot {

struct TrackerConfig {
  NoiseSuite noise;
  LifecyclePolicy policy;
  double gate = kDefaultGate;
  // Detections below this confidence are dropped before association; 0 keeps all.
  double confidence_floor = 0.0;
};

struct ReportedTrack {
  int frame = 0;
  int id = 0;
  ClassId class_id = 0;
  BoxState state;
  double score = 0.0;

  bool operator==(const ReportedTrack&) const = default;
};

// What the association step saw and decided for one class in one frame.
struct AssociationTrace {
  ClassId class_id = 0;
  std::vector<int> track_ids;
  std::vector<int> detection_indices;
  DistanceBundle distances;
  MatchingResult result;
};

// Per-sequence tracking state machine: predict, associate per class with
// the (optionally learned) combined distance, update, then apply the
// life-cycle policy. Without models the association is Mahalanobis-only.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config, std::shared_ptr<const LearnedModels> models = nullptr);

  // Processes frame `frame`, which must equal frame() + 1. Returns the
  // confirmed tracks after the update, ordered by id.
  std::vector<ReportedTrack> step(int frame, std::span<const Detection> detections,
                                  std::vector<AssociationTrace>* trace = nullptr);

  const std::vector<Track>& tracks() const { return tracks_; }
  int frame() const { return frame_; }
  int next_id() const { return next_id_; }
  const TrackerConfig& config() const { return config_; }
  bool has_models() const { return models_ != nullptr; }

 private:
  void associate_class(ClassId cls, std::span<const Detection> detections,
                       const std::vector<int>& det_idx, std::vector<Track>& created,
                       std::vector<AssociationTrace>* trace);

  TrackerConfig config_;
  std::shared_ptr<const LearnedModels> models_;
  std::vector<Track> tracks_;
  int frame_ = -1;
  int next_id_ = 0;
};

// Runs a fresh tracker over frames 0..N-1 (frame k is detections[k]).
// Throws FormatError naming the frame when a detection's frame field
// disagrees with its position in the stream.
std::vector<ReportedTrack> run_sequence(const TrackerConfig& config,
                                        std::shared_ptr<const LearnedModels> models,
                                        std::span<const DetectionFrame> detections);

}  // namespace mmot
