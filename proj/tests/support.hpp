// Shared fixtures and independent reference implementations for the tests
// and the acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "mmot/association.hpp"
#include "mmot/core.hpp"
#include "mmot/filter.hpp"
#include "mmot/metrics.hpp"
#include "mmot/neuralnet.hpp"
#include "mmot/tracker.hpp"
#include "mmot/training.hpp"

namespace mmot::support {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double std = 1.0) {
  return std::normal_distribution<double>(0.0, std)(rng);
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double std = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = gaussian(rng, std);
  return m;
}

// Well-conditioned SPD: B B^T / n + floor I.
inline Eigen::MatrixXd random_spd(Rng& rng, int n, double floor = 0.1) {
  const Eigen::MatrixXd b = random_matrix(rng, n, n);
  Eigen::MatrixXd s = b * b.transpose() / n + floor * Eigen::MatrixXd::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_asymmetry(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline ClassNoise unit_noise(double q = 0.1, double r = 0.2) {
  ClassNoise n;
  n.process_var = StateVector::Constant(q);
  n.observation_var = ObsVector::Constant(r);
  return n;
}

inline nn::Batch random_batch(Rng& rng, int rows, int cols, double std = 1.0) {
  nn::Batch b(rows, cols);
  for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = gaussian(rng, std);
  return b;
}

// Pair sample where detection i and track i observe the same latent and
// every other combination does not. Rows of the detection side are shuffled.
inline PairSample separable_pair_sample(Rng& rng, const NetDims& dims, int objects,
                                        double noise = 0.1) {
  const int w2 = dims.features.feat2d, w3 = dims.features.feat3d_size();
  const Eigen::MatrixXd lat2 = random_matrix(rng, objects, w2);
  const Eigen::MatrixXd lat3 = random_matrix(rng, objects, w3);
  std::vector<int> perm(objects);
  for (int k = 0; k < objects; ++k) perm[k] = k;
  std::shuffle(perm.begin(), perm.end(), rng);
  PairSample s;
  s.class_id = 1;
  s.det2d.resize(objects, w2);
  s.det3d.resize(objects, w3);
  s.trk2d = lat2 + random_matrix(rng, objects, w2, noise);
  s.trk3d = lat3 + random_matrix(rng, objects, w3, noise);
  s.labels = PairLabelMatrix::Ones(objects, objects);
  for (int i = 0; i < objects; ++i) {
    s.det2d.row(i) = lat2.row(perm[i]) + random_matrix(rng, 1, w2, noise);
    s.det3d.row(i) = lat3.row(perm[i]) + random_matrix(rng, 1, w3, noise);
    s.labels(i, perm[i]) = 0.0;
  }
  s.d_mah = (random_matrix(rng, objects, objects) * 3.0).cwiseAbs();
  for (int i = 0; i < objects; ++i) s.d_mah(i, perm[i]) *= 0.5;
  return s;
}

// Detections that are either objects (targets 1, features near a fixed
// prototype) or clutter (targets 0, unstructured features).
inline InitSample separable_init_sample(Rng& rng, const NetDims& dims, int rows,
                                        const Eigen::RowVectorXd& proto2d,
                                        const Eigen::RowVectorXd& proto3d) {
  const int w2 = dims.features.feat2d, w3 = dims.features.feat3d_size();
  InitSample s;
  s.class_id = 1;
  s.feat2d.resize(rows, w2);
  s.feat3d.resize(rows, w3);
  s.targets.resize(rows);
  for (int i = 0; i < rows; ++i) {
    const bool object = uniform(rng, 0, 1) < 0.5;
    s.targets[i] = object ? 1.0 : 0.0;
    s.feat2d.row(i) = random_matrix(rng, 1, w2, 0.5);
    s.feat3d.row(i) = random_matrix(rng, 1, w3, 0.5);
    if (object) {
      s.feat2d.row(i) += proto2d;
      s.feat3d.row(i) += proto3d;
    }
  }
  return s;
}

// ---- independent oracles ----

// sqrt(r^T S^-1 r) through an explicit inverse.
inline double mahalanobis_oracle(const Observation& o, const PredictedObservation& p) {
  ObsVector r = o.vector() - p.mean;
  r[kA] = std::remainder(r[kA], 2.0 * std::numbers::pi);
  if (r[kA] <= -std::numbers::pi) r[kA] += 2.0 * std::numbers::pi;
  const Eigen::MatrixXd inv = Eigen::MatrixXd(p.innovation_cov).inverse();
  return std::sqrt(r.dot(inv * r));
}

// Rescans the whole matrix for the smallest admissible (distance, det, trk)
// at every step.
inline std::vector<std::tuple<int, int, double>> greedy_rescan_oracle(const Eigen::MatrixXd& d,
                                                                      double gate) {
  std::vector<bool> row_used(d.rows(), false), col_used(d.cols(), false);
  std::vector<std::tuple<int, int, double>> out;
  while (true) {
    int bi = -1, bj = -1;
    for (int i = 0; i < d.rows(); ++i) {
      if (row_used[i]) continue;
      for (int j = 0; j < d.cols(); ++j) {
        if (col_used[j] || d(i, j) > gate) continue;
        if (bi < 0 || d(i, j) < d(bi, bj)) {
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    row_used[bi] = col_used[bj] = true;
    out.emplace_back(bi, bj, d(bi, bj));
  }
  return out;
}

// Posterior mean and covariance of the (i, j) state marginal after observing
// `o`, by brute-force Bayes on a grid. The prior is integrated over the
// other nine state components in closed form (conditional Gaussian), which
// is exact for the linear observation model; the grid handles the rest.
struct GridPosterior {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
};

inline GridPosterior grid_bayes_marginal(const GaussianBelief& prior, const ObsVector& o,
                                         const ObservationModel& model, int i, int j,
                                         int points = 401, double span_sigmas = 8.0) {
  std::vector<int> rest;
  for (int k = 0; k < kStateDim; ++k) {
    if (k != i && k != j) rest.push_back(k);
  }
  const int nr = static_cast<int>(rest.size());
  Eigen::Matrix2d skk;
  skk << prior.cov(i, i), prior.cov(i, j), prior.cov(j, i), prior.cov(j, j);
  Eigen::MatrixXd srk(nr, 2), srr(nr, nr);
  Eigen::VectorXd mr(nr);
  for (int a = 0; a < nr; ++a) {
    mr[a] = prior.mean[rest[a]];
    srk(a, 0) = prior.cov(rest[a], i);
    srk(a, 1) = prior.cov(rest[a], j);
    for (int b = 0; b < nr; ++b) srr(a, b) = prior.cov(rest[a], rest[b]);
  }
  const Eigen::Matrix2d skk_inv = skk.inverse();
  const Eigen::MatrixXd gain_r = srk * skk_inv;  // E[rest | k] slope
  const Eigen::MatrixXd cov_r = srr - gain_r * srk.transpose();

  const Eigen::MatrixXd h = model.selector;
  Eigen::MatrixXd hk(kObsDim, 2), hr(kObsDim, nr);
  hk.col(0) = h.col(i);
  hk.col(1) = h.col(j);
  for (int a = 0; a < nr; ++a) hr.col(a) = h.col(rest[a]);
  const Eigen::MatrixXd c = hr * cov_r * hr.transpose() + Eigen::MatrixXd(model.noise);
  const Eigen::MatrixXd c_inv = c.inverse();
  const Eigen::Vector2d mk(prior.mean[i], prior.mean[j]);

  const double si = std::sqrt(skk(0, 0)), sj = std::sqrt(skk(1, 1));
  const double step_i = 2.0 * span_sigmas * si / (points - 1);
  const double step_j = 2.0 * span_sigmas * sj / (points - 1);
  std::vector<double> logw;
  std::vector<Eigen::Vector2d> at;
  logw.reserve(static_cast<std::size_t>(points) * points);
  for (int a = 0; a < points; ++a) {
    for (int b = 0; b < points; ++b) {
      const Eigen::Vector2d k(mk[0] - span_sigmas * si + a * step_i,
                              mk[1] - span_sigmas * sj + b * step_j);
      const Eigen::Vector2d dk = k - mk;
      const Eigen::VectorXd r_mean = mr + gain_r * dk;
      const Eigen::VectorXd resid = o - hk * k - hr * r_mean;
      logw.push_back(-0.5 * dk.dot(skk_inv * dk) - 0.5 * resid.dot(c_inv * resid));
      at.push_back(k);
    }
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  Eigen::Vector2d m1 = Eigen::Vector2d::Zero();
  for (std::size_t n = 0; n < logw.size(); ++n) {
    const double w = std::exp(logw[n] - top);
    total += w;
    m1 += w * at[n];
  }
  m1 /= total;
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
  for (std::size_t n = 0; n < logw.size(); ++n) {
    const double w = std::exp(logw[n] - top);
    const Eigen::Vector2d d = at[n] - m1;
    m2 += w * d * d.transpose();
  }
  return {m1, m2 / total};
}

// Three objects at x = 0, 10, 20 over four frames (12 positives). Track 10
// follows object 0 (score .9); object 1 is covered by track 11 (score .8) in
// frames 0-1 and track 12 (score .5) in frames 2-3; object 2 is never
// hypothesized; track 13 is a false positive at x = 50 (score .4).
//
// Hand-enumerated sweep, recall levels k/39:
//   th .9: TP 4, FN 8         r 1/3  MOTAR 1      levels 1..13
//   th .8: TP 6, FN 6         r 1/2  MOTAR 1      levels 14..19
//   th .5: TP 8, FN 4, IDS 1  r 2/3  MOTAR 7/8    levels 20..26
//   th .4: adds FP 4, no new recall
//   AMOTA = (13 + 6 + 7 * 7/8) / 39, best MOTA = 1 - 5/12 = 7/12.
struct ScriptedSequence {
  std::vector<GroundTruthFrame> truth;
  std::vector<ReportedTrack> tracks;
  static constexpr int kFrames = 4;
  static constexpr double kAmota = (13.0 + 6.0 + 7.0 * 0.875) / 39.0;
  static constexpr double kMota = 7.0 / 12.0;
  static constexpr int kIds = 1;
  static constexpr int kFalseTracks = 1;
};

inline ScriptedSequence scripted_sequence() {
  ScriptedSequence s;
  auto box = [](double x) {
    BoxState b;
    b.x = x;
    return b;
  };
  for (int f = 0; f < ScriptedSequence::kFrames; ++f) {
    GroundTruthFrame g;
    for (int k = 0; k < 3; ++k) g.push_back({k, 1, box(10.0 * k)});
    s.truth.push_back(g);
    s.tracks.push_back({f, 10, 1, box(0.3), 0.9});
    s.tracks.push_back({f, f < 2 ? 11 : 12, 1, box(10.2), f < 2 ? 0.8 : 0.5});
    s.tracks.push_back({f, 13, 1, box(50.0), 0.4});
  }
  return s;
}

// ---- finite differences ----

struct GradientReport {
  int checked = 0;
  int failed = 0;
  double worst_relative = 0.0;
};

// Relative error, except that differences under 1e-8 count as agreement.
inline double gradient_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= 1e-8) return 0.0;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

// A central difference straddling a ReLU kink is wrong at that step only, so a
// mismatch gets one retry at a tenth of the step.
inline void tally_gradient(double analytic, const std::function<double(double)>& numeric, double h,
                           double rtol, GradientReport& rep) {
  double rel = gradient_error(analytic, numeric(h));
  if (rel > rtol) rel = gradient_error(analytic, numeric(h / 10.0));
  rep.worst_relative = std::max(rep.worst_relative, rel);
  ++rep.checked;
  if (rel > rtol) ++rep.failed;
}

// Compares the gradients already accumulated in `store` against central
// differences of `loss` at `coords` randomly chosen scalar parameters.
inline GradientReport check_param_gradients(nn::ParamStore& store,
                                            const std::function<double()>& loss, Rng& rng,
                                            int coords = 100, double h = 1e-5,
                                            double rtol = 1e-4) {
  std::vector<std::pair<nn::Parameter*, Eigen::Index>> all;
  for (auto& [name, p] : store) {
    for (Eigen::Index k = 0; k < p.value.size(); ++k) all.emplace_back(&p, k);
  }
  std::vector<std::size_t> pick(all.size());
  for (std::size_t k = 0; k < pick.size(); ++k) pick[k] = k;
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(std::min<std::size_t>(pick.size(), static_cast<std::size_t>(coords)));

  GradientReport rep;
  for (std::size_t k : pick) {
    auto [p, idx] = all[k];
    double& v = p->value.data()[idx];
    const double saved = v;
    auto numeric = [&](double step) {
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      return (up - down) / (2.0 * step);
    };
    tally_gradient(p->grad.data()[idx], numeric, h, rtol, rep);
  }
  return rep;
}

// Same for a loss of a plain matrix argument with a known gradient.
inline GradientReport check_input_gradient(Eigen::MatrixXd x,
                                           const std::function<double(const Eigen::MatrixXd&)>& f,
                                           const Eigen::MatrixXd& grad, Rng& rng,
                                           int coords = 100, double h = 1e-6,
                                           double rtol = 1e-4) {
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k) pick[k] = k;
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(std::min<std::size_t>(pick.size(), static_cast<std::size_t>(coords)));
  GradientReport rep;
  for (Eigen::Index k : pick) {
    const double saved = x.data()[k];
    auto numeric = [&](double step) {
      x.data()[k] = saved + step;
      const double up = f(x);
      x.data()[k] = saved - step;
      const double down = f(x);
      x.data()[k] = saved;
      return (up - down) / (2.0 * step);
    };
    tally_gradient(grad.data()[k], numeric, h, rtol, rep);
  }
  return rep;
}

}  // namespace mmot::support
