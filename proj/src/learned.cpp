#include "mmot/learned.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mmot {

NetDims NetDims::reference() { return NetDims{}; }

NetDims NetDims::desk() {
  NetDims d;
  d.features = FeatureDims{16, 8};
  d.fusion_hidden = 64;
  d.conv_channels = 32;
  d.mlp_hidden = 16;
  return d;
}

namespace {

nn::Network make_pair_trunk(const std::string& name, int in_channels, const NetDims& dims,
                            int outputs, bool squash) {
  const nn::Shape grid{in_channels, 3, 3};
  const nn::Shape conv_out{dims.conv_channels, 1, 1};
  std::vector<nn::LayerSpec> layers{
      nn::conv3x3_valid("conv", grid, dims.conv_channels),
      nn::relu(conv_out),
      nn::dense("fc0", dims.conv_channels, dims.mlp_hidden),
      nn::relu(nn::Shape{dims.mlp_hidden, 1, 1}),
      nn::dense("fc1", dims.mlp_hidden, outputs),
  };
  if (squash) layers.push_back(nn::sigmoid(nn::Shape{outputs, 1, 1}));
  return nn::Network(name, std::move(layers));
}

}  // namespace

nn::Network make_fusion_net(const NetDims& dims) {
  const int out = dims.features.feat3d_size();
  return nn::Network("g1", {
                               nn::dense("fc0", dims.features.feat2d, dims.fusion_hidden),
                               nn::relu(nn::Shape{dims.fusion_hidden, 1, 1}),
                               nn::dense("fc1", dims.fusion_hidden, out),
                               nn::reshape(nn::Shape{out, 1, 1},
                                           nn::Shape{dims.features.feat3d_channels, 3, 3}),
                           });
}

nn::Network make_feature_distance_net(const NetDims& dims) {
  return make_pair_trunk("g2", 2 * dims.features.feat3d_channels, dims, 1, true);
}

nn::Network make_coefficient_net(const NetDims& dims) {
  return make_pair_trunk("g3", 2 * dims.features.feat3d_channels, dims, 2, false);
}

nn::Network make_init_net(const NetDims& dims) {
  return make_pair_trunk("g4", dims.features.feat3d_channels, dims, 1, true);
}

LearnedModels LearnedModels::create(const NetDims& dims, std::uint64_t seed) {
  LearnedModels m;
  m.dims = dims;
  m.fusion = make_fusion_net(dims);
  m.feature_distance = make_feature_distance_net(dims);
  m.coefficients = make_coefficient_net(dims);
  m.init = make_init_net(dims);
  std::mt19937_64 rng(seed);
  m.fusion.init_params(m.fusion_params, rng);
  m.feature_distance.init_params(m.feature_distance_params, rng);
  m.coefficients.init_params(m.coefficient_params, rng);
  m.init.init_params(m.init_params, rng);
  m.coefficient_params.at("g3.fc1.w").value.setZero();
  m.coefficient_params.at("g3.fc1.b").value.setZero();
  return m;
}

nn::Batch stack_rows(std::span<const std::vector<double>> rows, int width) {
  nn::Batch out(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != width) {
      throw DimensionMismatch("feature width " + std::to_string(rows[i].size()) +
                        " does not match configured " + std::to_string(width));
    }
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), width);
  }
  return out;
}

nn::Batch fuse(const LearnedModels& models, const nn::Batch& feat2d, const nn::Batch& feat3d,
               nn::Tape* tape) {
  const auto& f = models.dims.features;
  if (feat2d.cols() != f.feat2d || feat3d.cols() != f.feat3d_size()) {
    throw DimensionMismatch("fuse: feature widths (" + std::to_string(feat2d.cols()) + ", " +
                      std::to_string(feat3d.cols()) + ") do not match configured (" +
                      std::to_string(f.feat2d) + ", " + std::to_string(f.feat3d_size()) + ")");
  }
  if (feat2d.rows() != feat3d.rows()) {
    throw std::invalid_argument("fuse: batch sizes differ");
  }
  nn::Batch out = models.fusion.forward(models.fusion_params, feat2d, tape);
  out += feat3d;
  return out;
}

nn::Batch pair_inputs(const nn::Batch& det, const nn::Batch& trk) {
  const Eigen::Index n = det.rows(), m = trk.rows(), w = det.cols();
  if (trk.cols() != w) throw std::invalid_argument("pair_inputs: feature widths differ");
  nn::Batch out(n * m, 2 * w);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      out.row(i * m + j).head(w) = det.row(i);
      out.row(i * m + j).tail(w) = trk.row(j);
    }
  }
  return out;
}

void split_pair_gradient(const nn::Batch& grad, Eigen::Index n_det, Eigen::Index n_trk,
                         nn::Batch& det_grad, nn::Batch& trk_grad) {
  const Eigen::Index w = grad.cols() / 2;
  det_grad = nn::Batch::Zero(n_det, w);
  trk_grad = nn::Batch::Zero(n_trk, w);
  for (Eigen::Index i = 0; i < n_det; ++i) {
    for (Eigen::Index j = 0; j < n_trk; ++j) {
      det_grad.row(i) += grad.row(i * n_trk + j).head(w);
      trk_grad.row(j) += grad.row(i * n_trk + j).tail(w);
    }
  }
}

Eigen::MatrixXd pairs_to_matrix(const nn::Batch& column, Eigen::Index n, Eigen::Index m,
                                Eigen::Index col) {
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = column(i * m + j, col);
  }
  return out;
}

nn::Batch matrix_to_pairs(const Eigen::MatrixXd& mat) {
  nn::Batch out(mat.size(), 1);
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) out(i * mat.cols() + j, 0) = mat(i, j);
  }
  return out;
}

Eigen::MatrixXd feature_distance(const LearnedModels& models, const nn::Batch& fused_det,
                                 const nn::Batch& fused_trk) {
  if (fused_det.rows() == 0 || fused_trk.rows() == 0) {
    return Eigen::MatrixXd(fused_det.rows(), fused_trk.rows());
  }
  const nn::Batch y = models.feature_distance.forward(models.feature_distance_params,
                                                      pair_inputs(fused_det, fused_trk));
  return pairs_to_matrix(y, fused_det.rows(), fused_trk.rows());
}

Coefficients coef_forward(const LearnedModels& models, const nn::Batch& fused_det,
                          const nn::Batch& fused_trk) {
  const Eigen::Index n = fused_det.rows(), m = fused_trk.rows();
  if (n == 0 || m == 0) return {Eigen::MatrixXd(n, m), Eigen::MatrixXd(n, m)};
  const nn::Batch y =
      models.coefficients.forward(models.coefficient_params, pair_inputs(fused_det, fused_trk));
  return {pairs_to_matrix(y, n, m, 0), pairs_to_matrix(y, n, m, 1)};
}

Eigen::VectorXd init_score(const LearnedModels& models, const nn::Batch& fused) {
  if (fused.rows() == 0) return Eigen::VectorXd(0);
  return models.init.forward(models.init_params, fused).col(0);
}

namespace {

struct Nearest {
  int identity = -1;
  double distance = std::numeric_limits<double>::infinity();
};

Nearest nearest_truth(const Eigen::Vector2d& p, const GroundTruthFrame& truth) {
  Nearest best;
  for (const auto& g : truth) {
    const double d = std::hypot(p.x() - g.state.x, p.y() - g.state.y);
    if (d < best.distance) best = {g.identity, d};
  }
  return best;
}

}  // namespace

PairLabelMatrix label_pairs(std::span<const Eigen::Vector2d> track_centers_prev,
                            std::span<const Eigen::Vector2d> detection_centers,
                            const GroundTruthFrame& truth_prev, const GroundTruthFrame& truth_cur,
                            double radius) {
  const auto n = static_cast<Eigen::Index>(detection_centers.size());
  const auto m = static_cast<Eigen::Index>(track_centers_prev.size());
  PairLabelMatrix k = PairLabelMatrix::Ones(n, m);
  std::vector<Nearest> trk(m), det(n);
  for (Eigen::Index j = 0; j < m; ++j) trk[j] = nearest_truth(track_centers_prev[j], truth_prev);
  for (Eigen::Index i = 0; i < n; ++i) det[i] = nearest_truth(detection_centers[i], truth_cur);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (det[i].identity < 0 || !(det[i].distance < radius)) continue;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (trk[j].identity == det[i].identity && trk[j].distance < radius) k(i, j) = 0.0;
    }
  }
  return k;
}

Eigen::VectorXd init_targets(std::span<const Eigen::Vector2d> detection_centers,
                             const GroundTruthFrame& truth, double radius) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(detection_centers.size()));
  for (std::size_t i = 0; i < detection_centers.size(); ++i) {
    t[static_cast<Eigen::Index>(i)] =
        nearest_truth(detection_centers[i], truth).distance < radius ? 1.0 : 0.0;
  }
  return t;
}

LossResult binary_cross_entropy(const Eigen::MatrixXd& prob, const Eigen::MatrixXd& target) {
  if (prob.rows() != target.rows() || prob.cols() != target.cols()) {
    throw std::invalid_argument("binary_cross_entropy: shape mismatch");
  }
  LossResult out;
  out.grad = Eigen::MatrixXd::Zero(prob.rows(), prob.cols());
  const double count = static_cast<double>(prob.size());
  if (prob.size() == 0) return out;
  for (Eigen::Index k = 0; k < prob.size(); ++k) {
    const double p = prob.data()[k];
    const double y = target.data()[k];
    if (!(p > 0.0 && p < 1.0)) {
      throw std::invalid_argument("binary_cross_entropy: probability outside (0, 1)");
    }
    out.value -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
    out.grad.data()[k] = (p - y) / (p * (1.0 - p) * count);
  }
  out.value /= count;
  return out;
}

LossResult stage1_loss(const Eigen::MatrixXd& d_feat, const PairLabelMatrix& labels) {
  return binary_cross_entropy(d_feat, labels);
}

LossResult stage2_loss(const Eigen::MatrixXd& combined, const PairLabelMatrix& labels,
                       const LossConstants& c) {
  if (combined.rows() != labels.rows() || combined.cols() != labels.cols()) {
    throw std::invalid_argument("stage2_loss: shape mismatch");
  }
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index k = 0; k < labels.size(); ++k) {
    (labels.data()[k] == 0.0 ? pos : neg).push_back(k);
  }
  LossResult out;
  out.grad = Eigen::MatrixXd::Zero(combined.rows(), combined.cols());
  const double* d = combined.data();
  double* g = out.grad.data();

  if (!pos.empty() && !neg.empty()) {
    const double w = 1.0 / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    for (Eigen::Index i : pos) {
      for (Eigen::Index j : neg) {
        const double hinge = c.contrastive_margin - (d[j] - d[i]);
        if (hinge > 0.0) {
          out.value += w * hinge;
          g[i] += w;
          g[j] -= w;
        }
      }
    }
  }
  if (!pos.empty()) {
    const double w = 1.0 / static_cast<double>(pos.size());
    for (Eigen::Index i : pos) {
      const double hinge = c.positive_margin - (c.gate - d[i]);
      if (hinge > 0.0) {
        out.value += w * hinge;
        g[i] += w;
      }
    }
  }
  if (!neg.empty()) {
    const double w = 1.0 / static_cast<double>(neg.size());
    for (Eigen::Index j : neg) {
      const double hinge = c.negative_margin - (d[j] - c.gate);
      if (hinge > 0.0) {
        out.value += w * hinge;
        g[j] -= w;
      }
    }
  }
  return out;
}

LossResult init_loss(const Eigen::VectorXd& prob, const Eigen::VectorXd& targets) {
  return binary_cross_entropy(prob, targets);
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Average ranks over ties.
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  double n_pos = 0, n_neg = 0, rank_sum = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == 1.0) {
      n_pos += 1;
      rank_sum += rank[k];
    } else {
      n_neg += 1;
    }
  }
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

}  // namespace mmot
