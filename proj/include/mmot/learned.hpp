#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mmot/core.hpp"
#include "mmot/neuralnet.hpp"

namespace mmot {

// Layer widths of the four trainable modules.
struct NetDims {
  FeatureDims features;
  int fusion_hidden = 1536;
  int conv_channels = 256;
  int mlp_hidden = 128;

  // 1030-d image feature, 512x3x3 lidar feature.
  static NetDims reference();
  // Reduced widths used with simulated scenarios.
  static NetDims desk();

  bool operator==(const NetDims&) const = default;
};

// Margins of the coefficient loss and the association gate they train for.
struct LossConstants {
  double gate = 11.0;
  double contrastive_margin = 6.0;
  double positive_margin = 3.0;
  double negative_margin = 3.0;

  bool operator==(const LossConstants&) const = default;
};

// G1: image feature -> MLP -> reshape to the lidar grid.
nn::Network make_fusion_net(const NetDims& dims);
// G2: channel-concatenated (detection, track) pair -> conv 3x3 valid -> ReLU
// -> MLP -> sigmoid scalar.
nn::Network make_feature_distance_net(const NetDims& dims);
// G3: the G2 trunk with two unconstrained outputs (alpha, beta).
nn::Network make_coefficient_net(const NetDims& dims);
// G4: the G2 trunk over a single fused feature -> sigmoid scalar.
nn::Network make_init_net(const NetDims& dims);

struct LearnedModels {
  NetDims dims;
  nn::Network fusion;
  nn::Network feature_distance;
  nn::Network coefficients;
  nn::Network init;
  nn::ParamStore fusion_params;
  nn::ParamStore feature_distance_params;
  nn::ParamStore coefficient_params;
  nn::ParamStore init_params;

  // Randomly initialized nets. The output layer of the coefficient net is
  // zero so that alpha = beta = 0 before training.
  static LearnedModels create(const NetDims& dims, std::uint64_t seed);
};

// Stacks equally sized feature vectors into one row per sample.
nn::Batch stack_rows(std::span<const std::vector<double>> rows, int width);

// F_fused = G1(F_2d) + F_3d. Throws DimensionMismatch on a width mismatch.
nn::Batch fuse(const LearnedModels& models, const nn::Batch& feat2d, const nn::Batch& feat3d,
               nn::Tape* tape = nullptr);

// Row n*M + m holds [det n, track m] concatenated along channels.
nn::Batch pair_inputs(const nn::Batch& det, const nn::Batch& trk);
// Sums the per-pair input gradient back onto the two sides.
void split_pair_gradient(const nn::Batch& grad, Eigen::Index n_det, Eigen::Index n_trk,
                         nn::Batch& det_grad, nn::Batch& trk_grad);

// Reshapes a column of N*M pair outputs into an N x M matrix.
Eigen::MatrixXd pairs_to_matrix(const nn::Batch& column, Eigen::Index n, Eigen::Index m,
                                Eigen::Index col = 0);
nn::Batch matrix_to_pairs(const Eigen::MatrixXd& mat);

// N x M matrix with entries in (0, 1).
Eigen::MatrixXd feature_distance(const LearnedModels& models, const nn::Batch& fused_det,
                                 const nn::Batch& fused_trk);

struct Coefficients {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;
};

Coefficients coef_forward(const LearnedModels& models, const nn::Batch& fused_det,
                          const nn::Batch& fused_trk);

// Probability that each fused detection should start a new track.
Eigen::VectorXd init_score(const LearnedModels& models, const nn::Batch& fused);

// Entry 0 marks a matched (same identity) pair, 1 an unmatched pair.
using PairLabelMatrix = Eigen::MatrixXd;

// K(n, m) = 0 iff the track's nearest ground-truth box at t-1 and the
// detection's nearest ground-truth box at t share an identity and both
// center distances are below `radius`. Ground truth should be pre-filtered
// to the class being associated.
PairLabelMatrix label_pairs(std::span<const Eigen::Vector2d> track_centers_prev,
                            std::span<const Eigen::Vector2d> detection_centers,
                            const GroundTruthFrame& truth_prev, const GroundTruthFrame& truth_cur,
                            double radius = 2.0);

// 1 iff a ground-truth center lies within `radius` of the detection.
Eigen::VectorXd init_targets(std::span<const Eigen::Vector2d> detection_centers,
                             const GroundTruthFrame& truth, double radius = 2.0);

struct LossResult {
  double value = 0.0;
  // Gradient with respect to the loss input, same shape.
  Eigen::MatrixXd grad;
};

// Mean binary cross-entropy of probabilities against {0,1} targets. Throws
// std::invalid_argument for a probability outside (0, 1) or a shape mismatch.
LossResult binary_cross_entropy(const Eigen::MatrixXd& prob, const Eigen::MatrixXd& target);

// BCE with d_feat read as the probability that a pair is unmatched.
LossResult stage1_loss(const Eigen::MatrixXd& d_feat, const PairLabelMatrix& labels);

// Contrastive + positive + negative max-margin loss on combined distances.
// An empty positive or negative set contributes zero to the terms it enters.
LossResult stage2_loss(const Eigen::MatrixXd& combined, const PairLabelMatrix& labels,
                       const LossConstants& constants = {});

LossResult init_loss(const Eigen::VectorXd& prob, const Eigen::VectorXd& targets);

// Area under the ROC curve of `scores` for separating label 1 from label 0;
// ties count half. Returns NaN when either class is absent.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

}  // namespace mmot
