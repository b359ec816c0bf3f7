#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mmot/core.hpp"
#include "mmot/filter.hpp"

namespace mmot {

// Rows index detections, columns index tracks.
struct DistanceBundle {
  Eigen::MatrixXd d_mah;
  Eigen::MatrixXd d_feat;
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd d_combined;
};

struct Match {
  int detection = 0;
  int track = 0;
  double distance = 0.0;

  bool operator==(const Match&) const = default;
};

struct MatchingResult {
  std::vector<Match> matches;
  std::vector<int> unmatched_detections;
  std::vector<int> unmatched_tracks;
};

inline constexpr double kDefaultGate = 11.0;

// Entry (n, m) is sqrt(r^T S_m^-1 r) with r = o_n - o_hat_m and the heading
// component of r wrapped. Throws NumericalError naming the track whose S is
// not positive definite.
Eigen::MatrixXd mahalanobis_matrix(std::span<const Observation> detections,
                                   std::span<const PredictedObservation> tracks);

// D = D_mah + alpha .* (D_feat - (0.5 + beta)). Throws std::invalid_argument
// on shape mismatch.
Eigen::MatrixXd combine(const Eigen::MatrixXd& d_mah, const Eigen::MatrixXd& d_feat,
                        const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& beta);

// Greedy assignment in nondecreasing (distance, detection, track) order;
// pairs farther than `gate` are never matched.
MatchingResult greedy_match(const Eigen::MatrixXd& distances, double gate = kDefaultGate);

}  // namespace mmot
