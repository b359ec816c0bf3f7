#include "mmot/association.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>

namespace mmot {

Eigen::MatrixXd mahalanobis_matrix(std::span<const Observation> detections,
                                   std::span<const PredictedObservation> tracks) {
  const auto n = static_cast<Eigen::Index>(detections.size());
  const auto m = static_cast<Eigen::Index>(tracks.size());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    std::optional<Cholesky> chol;
    try {
      chol.emplace(tracks[j].innovation_cov);
    } catch (const NotPositiveDefinite& e) {
      throw NumericalError("mahalanobis_matrix: innovation covariance of track " +
                           std::to_string(j) + " is singular (" + e.what() + ")");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      ObsVector r = detections[i].vector() - tracks[j].mean;
      r[kA] = wrap_angle(r[kA]);
      out(i, j) = std::sqrt(chol->quadratic_form(r));
    }
  }
  return out;
}

Eigen::MatrixXd combine(const Eigen::MatrixXd& d_mah, const Eigen::MatrixXd& d_feat,
                        const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& beta) {
  const auto same = [&](const Eigen::MatrixXd& x) {
    return x.rows() == d_mah.rows() && x.cols() == d_mah.cols();
  };
  if (!same(d_feat) || !same(alpha) || !same(beta)) {
    throw std::invalid_argument("combine: distance and coefficient shapes differ");
  }
  return (d_mah.array() + alpha.array() * (d_feat.array() - (0.5 + beta.array()))).matrix();
}

MatchingResult greedy_match(const Eigen::MatrixXd& distances, double gate) {
  const int n = static_cast<int>(distances.rows());
  const int m = static_cast<int>(distances.cols());

  std::vector<std::tuple<double, int, int>> order;
  order.reserve(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (distances(i, j) <= gate) order.emplace_back(distances(i, j), i, j);
    }
  }
  std::sort(order.begin(), order.end());

  MatchingResult result;
  std::vector<bool> det_used(n, false), trk_used(m, false);
  for (const auto& [d, i, j] : order) {
    if (det_used[i] || trk_used[j]) continue;
    det_used[i] = trk_used[j] = true;
    result.matches.push_back({i, j, d});
  }
  for (int i = 0; i < n; ++i) {
    if (!det_used[i]) result.unmatched_detections.push_back(i);
  }
  for (int j = 0; j < m; ++j) {
    if (!trk_used[j]) result.unmatched_tracks.push_back(j);
  }
  return result;
}

}  // namespace mmot
