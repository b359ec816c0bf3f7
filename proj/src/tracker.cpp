#include "mmot/tracker.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mmot {

namespace {

constexpr double kMinBoxSize = 1e-3;

void keep_sizes_positive(StateVector& mean) {
  for (int k : {kL, kW, kH}) mean[k] = std::max(mean[k], kMinBoxSize);
}

}  // namespace

Tracker::Tracker(TrackerConfig config, std::shared_ptr<const LearnedModels> models)
    : config_(std::move(config)), models_(std::move(models)) {
  config_.policy.validate();
  if (config_.policy.init_mode == InitMode::Learned && !models_) {
    throw ConfigError("learned initialization requires trained models");
  }
}

std::vector<ReportedTrack> Tracker::step(int frame, std::span<const Detection> detections,
                                         std::vector<AssociationTrace>* trace) {
  if (frame != frame_ + 1) {
    throw std::invalid_argument("tracker: expected frame " + std::to_string(frame_ + 1) +
                                ", got " + std::to_string(frame));
  }
  std::map<ClassId, std::vector<int>> by_class;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    if (models_) {
      d.validate(models_->dims.features);
    } else {
      d.obs.validate();
    }
    if (d.confidence < config_.confidence_floor) continue;
    config_.noise.at(d.class_id);
    by_class[d.class_id].push_back(static_cast<int>(i));
  }
  std::set<ClassId> classes;
  for (const auto& t : tracks_) classes.insert(t.class_id);
  for (const auto& [c, _] : by_class) classes.insert(c);

  std::vector<Track> created;
  for (ClassId c : classes) {
    associate_class(c, detections, by_class[c], created, trace);
  }
  frame_ = frame;

  const auto dropped = decide_terminate(tracks_, config_.policy);
  for (auto it = dropped.rbegin(); it != dropped.rend(); ++it) {
    tracks_.erase(tracks_.begin() + *it);
  }
  for (auto& t : created) tracks_.push_back(std::move(t));
  std::sort(tracks_.begin(), tracks_.end(), [](const Track& a, const Track& b) { return a.id < b.id; });

  std::vector<ReportedTrack> out;
  for (const auto& t : tracks_) {
    if (!t.confirmed) continue;
    out.push_back({frame, t.id, t.class_id, BoxState::from_vector(t.belief.mean), t.score});
  }
  return out;
}

void Tracker::associate_class(ClassId cls, std::span<const Detection> detections,
                              const std::vector<int>& det_idx, std::vector<Track>& created,
                              std::vector<AssociationTrace>* trace) {
  std::vector<int> trk_idx;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (tracks_[i].class_id == cls) trk_idx.push_back(static_cast<int>(i));
  }
  const MotionModel motion = config_.noise.motion(cls);
  const ObservationModel observation = config_.noise.observation(cls);

  std::vector<PredictedObservation> predicted;
  predicted.reserve(trk_idx.size());
  for (int j : trk_idx) {
    tracks_[j].belief = predict(tracks_[j].belief, motion);
    predicted.push_back(predict_observation(tracks_[j].belief, observation));
  }
  std::vector<Observation> obs;
  obs.reserve(det_idx.size());
  for (int i : det_idx) obs.push_back(detections[i].obs);

  const auto n = static_cast<Eigen::Index>(det_idx.size());
  const auto m = static_cast<Eigen::Index>(trk_idx.size());
  DistanceBundle dist;
  dist.d_mah = mahalanobis_matrix(obs, predicted);

  nn::Batch fused_det;
  if (models_) {
    std::vector<std::vector<double>> f2d, f3d;
    for (int i : det_idx) {
      f2d.push_back(detections[i].feat2d);
      f3d.push_back(detections[i].feat3d);
    }
    const auto& fd = models_->dims.features;
    fused_det = fuse(*models_, stack_rows(f2d, fd.feat2d), stack_rows(f3d, fd.feat3d_size()));
    std::vector<std::vector<double>> trk_feat;
    for (int j : trk_idx) trk_feat.push_back(tracks_[j].fused_feat);
    const nn::Batch fused_trk = stack_rows(trk_feat, fd.feat3d_size());
    dist.d_feat = feature_distance(*models_, fused_det, fused_trk);
    Coefficients coef = coef_forward(*models_, fused_det, fused_trk);
    dist.alpha = std::move(coef.alpha);
    dist.beta = std::move(coef.beta);
    dist.d_combined = combine(dist.d_mah, dist.d_feat, dist.alpha, dist.beta);
  } else {
    dist.d_feat = Eigen::MatrixXd::Constant(n, m, 0.5);
    dist.alpha = Eigen::MatrixXd::Zero(n, m);
    dist.beta = Eigen::MatrixXd::Zero(n, m);
    dist.d_combined = dist.d_mah;
  }

  MatchingResult result = greedy_match(dist.d_combined, config_.gate);

  for (const Match& mt : result.matches) {
    Track& t = tracks_[trk_idx[mt.track]];
    const Detection& d = detections[det_idx[mt.detection]];
    t.belief = update(t.belief, d.obs, observation);
    keep_sizes_positive(t.belief.mean);
    record_hit(t, d.confidence, config_.policy);
    if (models_) {
      const auto row = fused_det.row(mt.detection);
      t.fused_feat.assign(row.data(), row.data() + row.size());
    }
    t.source_feat2d = d.feat2d;
    t.source_feat3d = d.feat3d;
  }
  for (int j : result.unmatched_tracks) record_miss(tracks_[trk_idx[j]]);

  const int unmatched = static_cast<int>(result.unmatched_detections.size());
  std::optional<std::span<const double>> scores;
  Eigen::VectorXd score_vec;
  if (config_.policy.init_mode == InitMode::Learned && unmatched > 0) {
    nn::Batch fused_unmatched(unmatched, fused_det.cols());
    for (int k = 0; k < unmatched; ++k) {
      fused_unmatched.row(k) = fused_det.row(result.unmatched_detections[k]);
    }
    score_vec = init_score(*models_, fused_unmatched);
    scores = std::span<const double>(score_vec.data(), static_cast<std::size_t>(score_vec.size()));
  } else if (config_.policy.init_mode == InitMode::Learned) {
    scores = std::span<const double>();
  }
  const ClassNoise& noise = config_.noise.at(cls);
  for (int k : decide_init(unmatched, scores, config_.policy)) {
    const int di = result.unmatched_detections[k];
    const Detection& d = detections[det_idx[di]];
    Track t;
    t.id = next_id_++;
    t.class_id = cls;
    t.belief = initial_belief(d.obs, noise);
    t.score = d.confidence;
    t.confirmed = starts_confirmed(config_.policy);
    if (models_) {
      const auto row = fused_det.row(di);
      t.fused_feat.assign(row.data(), row.data() + row.size());
    }
    t.source_feat2d = d.feat2d;
    t.source_feat3d = d.feat3d;
    created.push_back(std::move(t));
  }

  if (trace) {
    AssociationTrace tr;
    tr.class_id = cls;
    for (int j : trk_idx) tr.track_ids.push_back(tracks_[j].id);
    tr.detection_indices = det_idx;
    tr.distances = std::move(dist);
    tr.result = std::move(result);
    trace->push_back(std::move(tr));
  }
}

std::vector<ReportedTrack> run_sequence(const TrackerConfig& config,
                                        std::shared_ptr<const LearnedModels> models,
                                        std::span<const DetectionFrame> detections) {
  Tracker tracker(config, std::move(models));
  std::vector<ReportedTrack> out;
  for (std::size_t f = 0; f < detections.size(); ++f) {
    for (const auto& d : detections[f]) {
      if (d.frame != static_cast<int>(f)) {
        throw FormatError(0, "frame " + std::to_string(f) + ": detection labeled frame " +
                                 std::to_string(d.frame));
      }
    }
    try {
      auto reported = tracker.step(static_cast<int>(f), detections[f]);
      out.insert(out.end(), reported.begin(), reported.end());
    } catch (const std::invalid_argument& e) {
      throw FormatError(0, "frame " + std::to_string(f) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mmot
