#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mmot/core.hpp"

namespace mmot {

// Constant linear and angular velocity; box dimensions are constant.
struct MotionModel {
  StateMatrix transition = StateMatrix::Identity();
  StateMatrix process_noise = StateMatrix::Zero();

  static MotionModel constant_velocity(const StateMatrix& process_noise);
};

struct ObservationModel {
  SelectorMatrix selector = SelectorMatrix::Zero();
  ObsMatrix noise = ObsMatrix::Zero();

  // H picks (x, y, z, a, l, w, h, dx, dy) out of the state.
  static ObservationModel box_selector(const ObsMatrix& noise);
};

struct PredictedObservation {
  ObsVector mean = ObsVector::Zero();
  ObsMatrix innovation_cov = ObsMatrix::Identity();
};

// Per-class diagonal process and observation noise.
struct ClassNoise {
  StateVector process_var = StateVector::Zero();
  ObsVector observation_var = ObsVector::Zero();
  // Spread of the unobserved (dz, da) across ground-truth states. Floors
  // the initial rate variance, which 10 Q alone leaves at zero when truth
  // rates are exactly constant.
  Eigen::Vector2d rate_var = Eigen::Vector2d::Zero();

  bool operator==(const ClassNoise&) const = default;
};

class NoiseSuite {
 public:
  NoiseSuite() = default;
  explicit NoiseSuite(std::map<ClassId, ClassNoise> entries);

  void set(ClassId cls, const ClassNoise& noise) { entries_[cls] = noise; }
  bool contains(ClassId cls) const { return entries_.count(cls) != 0; }
  // Throws ConfigError when the class has no entry.
  const ClassNoise& at(ClassId cls) const;
  const std::map<ClassId, ClassNoise>& entries() const { return entries_; }

  MotionModel motion(ClassId cls) const;
  ObservationModel observation(ClassId cls) const;

  bool operator==(const NoiseSuite&) const = default;

 private:
  std::map<ClassId, ClassNoise> entries_;
};

GaussianBelief predict(const GaussianBelief& belief, const MotionModel& model);

// Throws NumericalError when S stays singular after jitter.
PredictedObservation predict_observation(const GaussianBelief& belief,
                                         const ObservationModel& model);

// Joseph-form Kalman update with a wrapped heading innovation.
GaussianBelief update(const GaussianBelief& belief, const Observation& obs,
                      const ObservationModel& model);

// Belief of a freshly created track: mean from the detection with zero
// vertical and angular rates; covariance is diag(R) on the observed slots and
// max(10 Q, rate_var) on the two unobserved rates.
GaussianBelief initial_belief(const Observation& obs, const ClassNoise& noise);

// Residual samples feeding the noise estimator.
struct NoiseSamples {
  // Consecutive ground-truth states (s_t, s_{t+1}) of one identity.
  std::map<ClassId, std::vector<std::pair<BoxState, BoxState>>> transitions;
  // Detection paired with the ground-truth state it observes.
  std::map<ClassId, std::vector<std::pair<Observation, BoxState>>> detections;
};

// Diagonal Q from the variance of s_{t+1} - A s_t and diagonal R from the
// variance of o - H s, per class. Throws ConfigError naming any class with
// fewer than two samples of either kind.
NoiseSuite estimate_noise(const NoiseSamples& samples);

// Builds residual samples from a labeled sequence: transitions from
// identities present in consecutive frames, detections matched greedily to
// the nearest same-class ground-truth center within `gate` meters.
NoiseSamples collect_noise_samples(std::span<const GroundTruthFrame> truth,
                                   std::span<const DetectionFrame> detections,
                                   double gate = 2.0);

void merge_samples(NoiseSamples& into, const NoiseSamples& from);

}  // namespace mmot
