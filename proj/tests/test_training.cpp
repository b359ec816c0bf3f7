#include <gtest/gtest.h>

#include "mmot/simlab.hpp"
#include "mmot/training.hpp"
#include "support.hpp"

using namespace mmot;
using mmot::support::Rng;

namespace {

NetDims tiny_dims() {
  NetDims d;
  d.features = FeatureDims{10, 4};
  d.fusion_hidden = 12;
  d.conv_channels = 6;
  d.mlp_hidden = 5;
  return d;
}

TrainingSet separable_pairs(std::uint64_t seed, const NetDims& dims, int samples) {
  Rng rng(seed);
  TrainingSet set;
  for (int k = 0; k < samples; ++k) {
    set.pairs.push_back(support::separable_pair_sample(rng, dims, 2 + k % 4));
  }
  return set;
}

std::vector<Eigen::MatrixXd> snapshot(const nn::ParamStore& s) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& [name, p] : s) out.push_back(p.value);
  return out;
}

void randomize(nn::ParamStore& s, Rng& rng, double std) {
  for (auto& [name, p] : s) p.value = support::random_matrix(rng, p.value.rows(), p.value.cols(), std);
}

}  // namespace

TEST(Stage, Names) {
  EXPECT_EQ(parse_stage("1"), TrainStage::Distance);
  EXPECT_EQ(parse_stage("2"), TrainStage::Coefficients);
  EXPECT_EQ(parse_stage("init"), TrainStage::Init);
  EXPECT_STREQ(to_string(TrainStage::Init), "init");
  EXPECT_THROW(parse_stage("3"), std::invalid_argument);
}

TEST(TrainConfig, PaperDefaults) {
  const TrainConfig c;
  EXPECT_EQ(c.epochs, 10);
  EXPECT_DOUBLE_EQ(c.adam.lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.loss.gate, 11.0);
  EXPECT_DOUBLE_EQ(c.loss.contrastive_margin, 6.0);
  EXPECT_DOUBLE_EQ(c.loss.positive_margin, 3.0);
  EXPECT_DOUBLE_EQ(c.loss.negative_margin, 3.0);
}

TEST(BuildTrainingSet, FromSimulatedSequence) {
  ScenarioConfig cfg;
  cfg.seed = 3;
  cfg.clutter_rate = 1.0;
  const Scenario sc = generate(cfg);
  NoiseSuite noise;
  for (const auto& c : cfg.classes) noise.set(c.class_id, support::unit_noise(0.05, 0.1));
  TrackerConfig tc;
  tc.noise = noise;
  const std::vector<LabeledSequence> seqs{{sc.truth, sc.detections}};
  const TrainingSet set = build_training_set(seqs, tc, cfg.features);
  ASSERT_FALSE(set.pairs.empty());
  ASSERT_FALSE(set.inits.empty());
  EXPECT_GT(set.positive_pairs(), 50u);
  for (const auto& p : set.pairs) {
    EXPECT_EQ(p.labels.rows(), p.det2d.rows());
    EXPECT_EQ(p.labels.cols(), p.trk2d.rows());
    EXPECT_EQ(p.d_mah.rows(), p.labels.rows());
    EXPECT_EQ(p.det3d.cols(), cfg.features.feat3d_size());
  }
  double targets = 0, rows = 0;
  for (const auto& s : set.inits) {
    targets += s.targets.sum();
    rows += static_cast<double>(s.targets.size());
  }
  EXPECT_GT(targets, 0.0);
  EXPECT_LT(targets, rows);
}

TEST(TrainStage, NoPositivePairsIsError) {
  Rng rng(4);
  TrainingSet set;
  PairSample s = support::separable_pair_sample(rng, tiny_dims(), 3);
  s.labels.setOnes();
  set.pairs.push_back(s);
  LearnedModels m = LearnedModels::create(tiny_dims(), 1);
  TrainConfig cfg;
  cfg.dims = tiny_dims();
  EXPECT_THROW(train_stage(m, set, TrainStage::Distance, cfg), std::invalid_argument);
  EXPECT_THROW(train_stage(m, set, TrainStage::Coefficients, cfg), std::invalid_argument);
  EXPECT_THROW(train_stage(m, set, TrainStage::Init, cfg), std::invalid_argument);
}

TEST(TrainStage, RecordsEveryEpochFromZero) {
  const NetDims dims = tiny_dims();
  const TrainingSet set = separable_pairs(5, dims, 12);
  LearnedModels m = LearnedModels::create(dims, 2);
  TrainConfig cfg;
  cfg.dims = dims;
  cfg.epochs = 3;
  int callbacks = 0;
  const auto h = train_stage(m, set, TrainStage::Distance, cfg,
                             [&](const EpochRecord&, const LearnedModels&) { ++callbacks; });
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(callbacks, 4);
  for (int e = 0; e <= 3; ++e) EXPECT_EQ(h[e].epoch, e);
  EXPECT_LT(h.back().loss, h.front().loss);
}

TEST(TrainStage, DeterministicForSeed) {
  const NetDims dims = tiny_dims();
  const TrainingSet set = separable_pairs(6, dims, 8);
  TrainConfig cfg;
  cfg.dims = dims;
  cfg.epochs = 2;
  LearnedModels a = LearnedModels::create(dims, 3), b = LearnedModels::create(dims, 3);
  train_stage(a, set, TrainStage::Distance, cfg);
  train_stage(b, set, TrainStage::Distance, cfg);
  EXPECT_EQ(snapshot(a.feature_distance_params), snapshot(b.feature_distance_params));
}

TEST(TrainStage, CoefficientStageFreezesFusionAndDistance) {
  const NetDims dims = tiny_dims();
  const TrainingSet set = separable_pairs(7, dims, 10);
  LearnedModels m = LearnedModels::create(dims, 4);
  TrainConfig cfg;
  cfg.dims = dims;
  cfg.epochs = 2;
  train_stage(m, set, TrainStage::Distance, cfg);
  const auto g1 = snapshot(m.fusion_params), g2 = snapshot(m.feature_distance_params);
  const auto g3 = snapshot(m.coefficient_params);
  train_stage(m, set, TrainStage::Coefficients, cfg);
  EXPECT_EQ(snapshot(m.fusion_params), g1);
  EXPECT_EQ(snapshot(m.feature_distance_params), g2);
  EXPECT_NE(snapshot(m.coefficient_params), g3);
}

TEST(TrainStage, InitStageTouchesOnlyInitNet) {
  const NetDims dims = tiny_dims();
  Rng rng(8);
  const Eigen::RowVectorXd p2 = support::random_matrix(rng, 1, 10), p3 = support::random_matrix(rng, 1, 36);
  TrainingSet set;
  for (int k = 0; k < 10; ++k) set.inits.push_back(support::separable_init_sample(rng, dims, 6, p2, p3));
  LearnedModels m = LearnedModels::create(dims, 5);
  const auto g1 = snapshot(m.fusion_params), g2 = snapshot(m.feature_distance_params),
             g3 = snapshot(m.coefficient_params), g4 = snapshot(m.init_params);
  TrainConfig cfg;
  cfg.dims = dims;
  cfg.epochs = 2;
  train_stage(m, set, TrainStage::Init, cfg);
  EXPECT_EQ(snapshot(m.fusion_params), g1);
  EXPECT_EQ(snapshot(m.feature_distance_params), g2);
  EXPECT_EQ(snapshot(m.coefficient_params), g3);
  EXPECT_NE(snapshot(m.init_params), g4);
}

TEST(TrainStage, CoefficientSeparationImproves) {
  const NetDims dims = NetDims::desk();
  const TrainingSet set = separable_pairs(9, dims, 60);
  LearnedModels m = LearnedModels::create(dims, 6);
  TrainConfig cfg;
  cfg.dims = dims;
  train_stage(m, set, TrainStage::Distance, cfg);
  const auto h = train_stage(m, set, TrainStage::Coefficients, cfg);
  ASSERT_EQ(h.size(), 11u);
  EXPECT_GT(h.back().metric, h.front().metric);
  EXPECT_LT(h.back().loss, h.front().loss);
}

TEST(TrainStage, InitClassifierSeparatesHeldOut) {
  const NetDims dims = NetDims::desk();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const Eigen::RowVectorXd p2 = support::random_matrix(rng, 1, dims.features.feat2d);
    const Eigen::RowVectorXd p3 = support::random_matrix(rng, 1, dims.features.feat3d_size());
    TrainingSet train, held;
    for (int k = 0; k < 40; ++k) train.inits.push_back(support::separable_init_sample(rng, dims, 8, p2, p3));
    for (int k = 0; k < 20; ++k) held.inits.push_back(support::separable_init_sample(rng, dims, 8, p2, p3));
    LearnedModels m = LearnedModels::create(dims, seed);
    TrainConfig cfg;
    cfg.dims = dims;
    cfg.seed = seed;
    train_stage(m, train, TrainStage::Init, cfg);
    EXPECT_GE(evaluate_stage(m, held, TrainStage::Init, cfg).metric, 0.9) << "seed " << seed;
  }
}

class SampleGradient : public ::testing::TestWithParam<TrainStage> {};

TEST_P(SampleGradient, MatchesFiniteDifference) {
  const TrainStage stage = GetParam();
  const NetDims dims = tiny_dims();
  Rng rng(10 + static_cast<int>(stage));
  TrainingSet set;
  set.pairs.push_back(support::separable_pair_sample(rng, dims, 3, 0.5));
  set.pairs[0].d_mah = support::random_matrix(rng, 3, 3).cwiseAbs() * 8.0;
  const Eigen::RowVectorXd p2 = support::random_matrix(rng, 1, 10), p3 = support::random_matrix(rng, 1, 36);
  set.inits.push_back(support::separable_init_sample(rng, dims, 5, p2, p3));
  LearnedModels m = LearnedModels::create(dims, 11);
  // nonzero output layer so every coefficient-net parameter carries gradient
  randomize(m.coefficient_params, rng, 0.5);
  TrainConfig cfg;
  cfg.dims = dims;

  std::vector<nn::ParamStore*> stores;
  switch (stage) {
    case TrainStage::Distance: stores = {&m.fusion_params, &m.feature_distance_params}; break;
    case TrainStage::Coefficients: stores = {&m.coefficient_params}; break;
    case TrainStage::Init: stores = {&m.init_params}; break;
  }
  for (auto* s : stores) s->zero_grad();
  sample_loss(m, set, stage, 0, cfg, true);
  const auto loss = [&] { return sample_loss(m, set, stage, 0, cfg, false); };
  for (auto* s : stores) {
    const auto rep = support::check_param_gradients(*s, loss, rng);
    EXPECT_EQ(rep.failed, 0) << "worst relative " << rep.worst_relative;
    EXPECT_GT(rep.checked, 0);
  }
}

INSTANTIATE_TEST_SUITE_P(Stages, SampleGradient,
                         ::testing::Values(TrainStage::Distance, TrainStage::Coefficients,
                                           TrainStage::Init));

TEST(SampleLoss, OutOfRange) {
  LearnedModels m = LearnedModels::create(tiny_dims(), 1);
  TrainConfig cfg;
  EXPECT_THROW(sample_loss(m, TrainingSet{}, TrainStage::Distance, 0, cfg, false), std::out_of_range);
}
