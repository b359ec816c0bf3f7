#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmot/core.hpp"
#include "mmot/learned.hpp"
#include "mmot/neuralnet.hpp"
#include "mmot/tracker.hpp"

namespace mmot {

struct TrainConfig {
  NetDims dims = NetDims::desk();
  LossConstants loss;
  nn::AdamConfig adam;
  int epochs = 10;
  std::uint64_t seed = 0;
  double label_radius = 2.0;

  bool operator==(const TrainConfig&) const = default;
};

struct LabeledSequence {
  std::vector<GroundTruthFrame> truth;
  std::vector<DetectionFrame> detections;
};

// One class of one frame: the detections at t against the tracks alive at t-1.
struct PairSample {
  ClassId class_id = 0;
  nn::Batch det2d, det3d;  // N rows
  nn::Batch trk2d, trk3d;  // M rows, raw features of each track's last detection
  Eigen::MatrixXd d_mah;   // N x M
  PairLabelMatrix labels;  // N x M
};

struct InitSample {
  ClassId class_id = 0;
  nn::Batch feat2d, feat3d;
  Eigen::VectorXd targets;
};

struct TrainingSet {
  std::vector<PairSample> pairs;
  std::vector<InitSample> inits;

  std::size_t positive_pairs() const;
};

// Replays each sequence through `baseline` (Mahalanobis-only) and records the
// association problem it faced at every frame, labeled from ground truth.
TrainingSet build_training_set(std::span<const LabeledSequence> sequences,
                               const TrackerConfig& baseline, FeatureDims features,
                               double label_radius = 2.0);

enum class TrainStage { Distance, Coefficients, Init };

const char* to_string(TrainStage stage);
// Accepts "1", "2", "init". Throws std::invalid_argument otherwise.
TrainStage parse_stage(const std::string& text);

// Epoch 0 is the state before any update.
struct EpochRecord {
  TrainStage stage = TrainStage::Distance;
  int epoch = 0;
  double loss = 0.0;
  // Distance: pair AUC. Coefficients: fraction of (Pos, Neg) pairs with
  // d_i + C_contr <= d_j. Init: accuracy at 0.5.
  double metric = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&, const LearnedModels&)>;

// Loss and metric of one stage over the whole set, without updating.
EpochRecord evaluate_stage(const LearnedModels& models, const TrainingSet& set, TrainStage stage,
                           const TrainConfig& config);

// Distance trains G1 and G2 on the BCE pair loss; Coefficients trains G3
// with G1 and G2 frozen; Init trains G4 with G1 frozen. Throws
// std::invalid_argument when the set has no matched pair (Distance,
// Coefficients) or no detection (Init).
std::vector<EpochRecord> train_stage(LearnedModels& models, const TrainingSet& set,
                                     TrainStage stage, const TrainConfig& config,
                                     const EpochCallback& on_epoch = {});

// Loss of sample k under `stage`. With `accumulate`, the gradients of the
// nets that stage trains are added to their stores.
double sample_loss(LearnedModels& models, const TrainingSet& set, TrainStage stage, std::size_t k,
                   const TrainConfig& config, bool accumulate);

// All three stages in order.
std::vector<EpochRecord> train_all(LearnedModels& models, const TrainingSet& set,
                                   const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace mmot
