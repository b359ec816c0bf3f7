#include "mmot/filter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace mmot {

MotionModel MotionModel::constant_velocity(const StateMatrix& process_noise) {
  MotionModel m;
  m.transition = StateMatrix::Identity();
  m.transition(kX, kDx) = 1.0;
  m.transition(kY, kDy) = 1.0;
  m.transition(kZ, kDz) = 1.0;
  m.transition(kA, kDa) = 1.0;
  m.process_noise = process_noise;
  return m;
}

ObservationModel ObservationModel::box_selector(const ObsMatrix& noise) {
  ObservationModel m;
  m.selector = SelectorMatrix::Zero();
  for (int i = 0; i < kObsDim; ++i) m.selector(i, i) = 1.0;
  m.noise = noise;
  return m;
}

NoiseSuite::NoiseSuite(std::map<ClassId, ClassNoise> entries) : entries_(std::move(entries)) {}

const ClassNoise& NoiseSuite::at(ClassId cls) const {
  auto it = entries_.find(cls);
  if (it == entries_.end()) {
    throw ConfigError("noise suite has no entry for class " + std::to_string(cls));
  }
  return it->second;
}

MotionModel NoiseSuite::motion(ClassId cls) const {
  return MotionModel::constant_velocity(at(cls).process_var.asDiagonal());
}

ObservationModel NoiseSuite::observation(ClassId cls) const {
  return ObservationModel::box_selector(at(cls).observation_var.asDiagonal());
}

GaussianBelief predict(const GaussianBelief& belief, const MotionModel& model) {
  GaussianBelief out;
  out.mean = model.transition * belief.mean;
  out.mean[kA] = wrap_angle(out.mean[kA]);
  out.cov = model.transition * belief.cov * model.transition.transpose() + model.process_noise;
  symmetrize(out.cov);
  return out;
}

namespace {

// Returns S (possibly jittered) together with its factorization.
std::pair<ObsMatrix, Cholesky> innovation(const StateMatrix& cov, const ObservationModel& model) {
  ObsMatrix s = model.selector * cov * model.selector.transpose() + model.noise;
  symmetrize(s);
  try {
    return {s, Cholesky(s)};
  } catch (const NotPositiveDefinite&) {
  }
  const double eps = 1e-9 * std::max(1.0, s.diagonal().cwiseAbs().maxCoeff());
  s.diagonal().array() += eps;
  try {
    return {s, Cholesky(s)};
  } catch (const NotPositiveDefinite& e) {
    throw NumericalError(std::string("innovation covariance is singular: ") + e.what());
  }
}

}  // namespace

PredictedObservation predict_observation(const GaussianBelief& belief,
                                         const ObservationModel& model) {
  PredictedObservation out;
  out.mean = model.selector * belief.mean;
  out.innovation_cov = innovation(belief.cov, model).first;
  return out;
}

GaussianBelief update(const GaussianBelief& belief, const Observation& obs,
                      const ObservationModel& model) {
  const auto& h = model.selector;
  auto [s, chol] = innovation(belief.cov, model);
  ObsVector residual = obs.vector() - h * belief.mean;
  residual[kA] = wrap_angle(residual[kA]);

  // K = P H^T S^-1, computed as (S^-1 H P)^T.
  const Eigen::Matrix<double, kStateDim, kObsDim> gain =
      chol.solve(Eigen::MatrixXd(h * belief.cov)).transpose();

  GaussianBelief out;
  out.mean = belief.mean + gain * residual;
  out.mean[kA] = wrap_angle(out.mean[kA]);
  const StateMatrix ikh = StateMatrix::Identity() - gain * h;
  out.cov = ikh * belief.cov * ikh.transpose() + gain * model.noise * gain.transpose();
  symmetrize(out.cov);
  return out;
}

GaussianBelief initial_belief(const Observation& obs, const ClassNoise& noise) {
  GaussianBelief b;
  b.mean.head<kObsDim>() = obs.vector();
  b.mean[kDz] = 0.0;
  b.mean[kDa] = 0.0;
  StateVector var;
  var.head<kObsDim>() = noise.observation_var;
  var[kDz] = std::max(10.0 * noise.process_var[kDz], noise.rate_var[0]);
  var[kDa] = std::max(10.0 * noise.process_var[kDa], noise.rate_var[1]);
  b.cov = var.asDiagonal();
  return b;
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> sample_variance(const std::vector<Eigen::Matrix<double, N, 1>>& xs) {
  Eigen::Matrix<double, N, 1> mean = Eigen::Matrix<double, N, 1>::Zero();
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::Matrix<double, N, 1> var = Eigen::Matrix<double, N, 1>::Zero();
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  return var / static_cast<double>(xs.size() - 1);
}

}  // namespace

NoiseSuite estimate_noise(const NoiseSamples& samples) {
  std::vector<ClassId> short_classes;
  std::map<ClassId, ClassNoise> entries;

  std::map<ClassId, bool> classes;
  for (const auto& [cls, _] : samples.transitions) classes[cls] = true;
  for (const auto& [cls, _] : samples.detections) classes[cls] = true;

  const MotionModel cv = MotionModel::constant_velocity(StateMatrix::Zero());
  for (const auto& [cls, _] : classes) {
    auto t_it = samples.transitions.find(cls);
    auto d_it = samples.detections.find(cls);
    const std::size_t nt = t_it == samples.transitions.end() ? 0 : t_it->second.size();
    const std::size_t nd = d_it == samples.detections.end() ? 0 : d_it->second.size();
    if (nt < 2 || nd < 2) {
      short_classes.push_back(cls);
      continue;
    }
    std::vector<StateVector> process_res;
    std::vector<Eigen::Vector2d> rates;
    process_res.reserve(nt);
    rates.reserve(nt);
    for (const auto& [from, to] : t_it->second) {
      StateVector r = to.vector() - cv.transition * from.vector();
      r[kA] = wrap_angle(r[kA]);
      process_res.push_back(r);
      rates.emplace_back(from.dz, from.da);
    }
    std::vector<ObsVector> obs_res;
    obs_res.reserve(nd);
    for (const auto& [obs, truth] : d_it->second) {
      ObsVector r = obs.vector() - observe(truth).vector();
      r[kA] = wrap_angle(r[kA]);
      obs_res.push_back(r);
    }
    entries[cls] =
        ClassNoise{sample_variance(process_res), sample_variance(obs_res), sample_variance(rates)};
  }

  if (!short_classes.empty()) {
    std::ostringstream os;
    os << "estimate_noise: fewer than 2 samples for class";
    for (ClassId c : short_classes) os << ' ' << c;
    throw ConfigError(os.str());
  }
  return NoiseSuite(std::move(entries));
}

NoiseSamples collect_noise_samples(std::span<const GroundTruthFrame> truth,
                                   std::span<const DetectionFrame> detections, double gate) {
  NoiseSamples out;
  for (std::size_t t = 0; t + 1 < truth.size(); ++t) {
    std::unordered_map<int, const GroundTruthBox*> prev;
    for (const auto& g : truth[t]) prev[g.identity] = &g;
    for (const auto& g : truth[t + 1]) {
      auto it = prev.find(g.identity);
      if (it != prev.end()) out.transitions[g.class_id].emplace_back(it->second->state, g.state);
    }
  }

  const std::size_t frames = std::min(truth.size(), detections.size());
  for (std::size_t t = 0; t < frames; ++t) {
    const auto& gts = truth[t];
    const auto& dets = detections[t];
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].class_id != dets[d].class_id) continue;
        const double dist = std::hypot(dets[d].obs.x - gts[g].state.x, dets[d].obs.y - gts[g].state.y);
        if (dist < gate) pairs.emplace_back(dist, d, g);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> det_used(dets.size(), false), gt_used(gts.size(), false);
    for (const auto& [dist, d, g] : pairs) {
      if (det_used[d] || gt_used[g]) continue;
      det_used[d] = gt_used[g] = true;
      out.detections[dets[d].class_id].emplace_back(dets[d].obs, gts[g].state);
    }
  }
  return out;
}

void merge_samples(NoiseSamples& into, const NoiseSamples& from) {
  for (const auto& [cls, v] : from.transitions) {
    auto& dst = into.transitions[cls];
    dst.insert(dst.end(), v.begin(), v.end());
  }
  for (const auto& [cls, v] : from.detections) {
    auto& dst = into.detections[cls];
    dst.insert(dst.end(), v.begin(), v.end());
  }
}

}  // namespace mmot
