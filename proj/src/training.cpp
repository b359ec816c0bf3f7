#include "mmot/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace mmot {

std::size_t TrainingSet::positive_pairs() const {
  std::size_t n = 0;
  for (const auto& s : pairs) n += static_cast<std::size_t>((s.labels.array() == 0.0).count());
  return n;
}

namespace {

GroundTruthFrame of_class(const GroundTruthFrame& f, ClassId c) {
  GroundTruthFrame out;
  for (const auto& g : f) {
    if (g.class_id == c) out.push_back(g);
  }
  return out;
}

}  // namespace

TrainingSet build_training_set(std::span<const LabeledSequence> sequences,
                               const TrackerConfig& baseline, FeatureDims features,
                               double label_radius) {
  TrainingSet set;
  const int w2 = features.feat2d, w3 = features.feat3d_size();
  for (const auto& seq : sequences) {
    if (seq.truth.size() != seq.detections.size()) {
      throw std::invalid_argument("training sequence: truth and detection frame counts differ");
    }
    Tracker tracker(baseline);
    for (std::size_t f = 0; f < seq.detections.size(); ++f) {
      const DetectionFrame& dets = seq.detections[f];
      std::unordered_map<int, Track> before;
      for (const auto& t : tracker.tracks()) before.emplace(t.id, t);

      std::vector<AssociationTrace> trace;
      tracker.step(static_cast<int>(f), dets, &trace);

      for (const auto& tr : trace) {
        const GroundTruthFrame cur = of_class(seq.truth[f], tr.class_id);
        std::vector<std::vector<double>> d2, d3;
        std::vector<Eigen::Vector2d> dc;
        for (int i : tr.detection_indices) {
          d2.push_back(dets[i].feat2d);
          d3.push_back(dets[i].feat3d);
          dc.emplace_back(dets[i].obs.x, dets[i].obs.y);
        }
        if (!d2.empty()) {
          InitSample is;
          is.class_id = tr.class_id;
          is.feat2d = stack_rows(d2, w2);
          is.feat3d = stack_rows(d3, w3);
          is.targets = init_targets(dc, cur, label_radius);
          set.inits.push_back(std::move(is));
        }
        if (d2.empty() || tr.track_ids.empty() || f == 0) continue;

        std::vector<std::vector<double>> t2, t3;
        std::vector<Eigen::Vector2d> tc;
        for (int id : tr.track_ids) {
          const Track& t = before.at(id);
          t2.push_back(t.source_feat2d);
          t3.push_back(t.source_feat3d);
          tc.emplace_back(t.belief.mean[kX], t.belief.mean[kY]);
        }
        PairSample ps;
        ps.class_id = tr.class_id;
        ps.det2d = stack_rows(d2, w2);
        ps.det3d = stack_rows(d3, w3);
        ps.trk2d = stack_rows(t2, w2);
        ps.trk3d = stack_rows(t3, w3);
        ps.d_mah = tr.distances.d_mah;
        ps.labels = label_pairs(tc, dc, of_class(seq.truth[f - 1], tr.class_id), cur, label_radius);
        set.pairs.push_back(std::move(ps));
      }
    }
  }
  return set;
}

const char* to_string(TrainStage stage) {
  switch (stage) {
    case TrainStage::Distance: return "1";
    case TrainStage::Coefficients: return "2";
    case TrainStage::Init: return "init";
  }
  return "?";
}

TrainStage parse_stage(const std::string& text) {
  if (text == "1") return TrainStage::Distance;
  if (text == "2") return TrainStage::Coefficients;
  if (text == "init") return TrainStage::Init;
  throw std::invalid_argument("unknown training stage '" + text + "'");
}

namespace {

struct StepOutput {
  double loss = 0.0;
  std::vector<double> scores;  // per element, for the stage metric
  std::vector<double> labels;
  double separated = 0.0;  // stage 2 only
  double pos_neg = 0.0;
};

// Forward pass of one sample; when `learn` is set (pointing at `m`), also the
// backward pass, accumulating gradients in the stores of the trained nets.
StepOutput run_pair_distance(const LearnedModels& m, const PairSample& s, LearnedModels* learn) {
  nn::Tape td, tt, tg;
  const nn::Batch fd = fuse(m, s.det2d, s.det3d, learn ? &td : nullptr);
  const nn::Batch ft = fuse(m, s.trk2d, s.trk3d, learn ? &tt : nullptr);
  const Eigen::Index n = fd.rows(), k = ft.rows();
  const nn::Batch y =
      m.feature_distance.forward(m.feature_distance_params, pair_inputs(fd, ft), learn ? &tg : nullptr);
  const Eigen::MatrixXd d = pairs_to_matrix(y, n, k);
  const LossResult loss = stage1_loss(d, s.labels);
  StepOutput out;
  out.loss = loss.value;
  out.scores.assign(d.data(), d.data() + d.size());
  out.labels.assign(s.labels.data(), s.labels.data() + s.labels.size());
  if (learn) {
    const nn::Batch gin =
        m.feature_distance.backward(learn->feature_distance_params, tg, matrix_to_pairs(loss.grad));
    nn::Batch gd, gt;
    split_pair_gradient(gin, n, k, gd, gt);
    m.fusion.backward(learn->fusion_params, td, gd);
    m.fusion.backward(learn->fusion_params, tt, gt);
  }
  return out;
}

StepOutput run_coefficients(const LearnedModels& m, const PairSample& s, const LossConstants& c,
                            LearnedModels* learn) {
  const nn::Batch fd = fuse(m, s.det2d, s.det3d);
  const nn::Batch ft = fuse(m, s.trk2d, s.trk3d);
  const Eigen::Index n = fd.rows(), k = ft.rows();
  const Eigen::MatrixXd d_feat = feature_distance(m, fd, ft);
  nn::Tape tape;
  const nn::Batch y =
      m.coefficients.forward(m.coefficient_params, pair_inputs(fd, ft), learn ? &tape : nullptr);
  const Eigen::MatrixXd alpha = pairs_to_matrix(y, n, k, 0);
  const Eigen::MatrixXd beta = pairs_to_matrix(y, n, k, 1);
  const Eigen::MatrixXd shifted = d_feat.array() - 0.5 - beta.array();
  const Eigen::MatrixXd combined = s.d_mah.array() + alpha.array() * shifted.array();
  const LossResult loss = stage2_loss(combined, s.labels, c);

  StepOutput out;
  out.loss = loss.value;
  for (Eigen::Index i = 0; i < combined.size(); ++i) {
    if (s.labels.data()[i] != 0.0) continue;
    for (Eigen::Index j = 0; j < combined.size(); ++j) {
      if (s.labels.data()[j] == 0.0) continue;
      out.pos_neg += 1.0;
      if (combined.data()[i] + c.contrastive_margin <= combined.data()[j]) out.separated += 1.0;
    }
  }
  if (learn) {
    const Eigen::MatrixXd g_alpha = loss.grad.array() * shifted.array();
    const Eigen::MatrixXd g_beta = -loss.grad.array() * alpha.array();
    nn::Batch gy(n * k, 2);
    gy.col(0) = matrix_to_pairs(g_alpha).col(0);
    gy.col(1) = matrix_to_pairs(g_beta).col(0);
    m.coefficients.backward(learn->coefficient_params, tape, gy);
  }
  return out;
}

StepOutput run_init(const LearnedModels& m, const InitSample& s, LearnedModels* learn) {
  const nn::Batch fused = fuse(m, s.feat2d, s.feat3d);
  nn::Tape tape;
  const nn::Batch p = m.init.forward(m.init_params, fused, learn ? &tape : nullptr);
  const Eigen::VectorXd prob = p.col(0);
  const LossResult loss = init_loss(prob, s.targets);
  StepOutput out;
  out.loss = loss.value;
  out.scores.assign(prob.data(), prob.data() + prob.size());
  out.labels.assign(s.targets.data(), s.targets.data() + s.targets.size());
  if (learn) {
    nn::Batch g(prob.size(), 1);
    g.col(0) = loss.grad.col(0);
    m.init.backward(learn->init_params, tape, g);
  }
  return out;
}

std::size_t sample_count(const TrainingSet& set, TrainStage stage) {
  return stage == TrainStage::Init ? set.inits.size() : set.pairs.size();
}

StepOutput run_sample(const LearnedModels& m, const TrainingSet& set, TrainStage stage,
                      std::size_t k, const TrainConfig& config, LearnedModels* learn) {
  switch (stage) {
    case TrainStage::Distance: return run_pair_distance(m, set.pairs[k], learn);
    case TrainStage::Coefficients: return run_coefficients(m, set.pairs[k], config.loss, learn);
    case TrainStage::Init: return run_init(m, set.inits[k], learn);
  }
  throw std::logic_error("unknown stage");
}

void check_trainable(const TrainingSet& set, TrainStage stage) {
  if (stage == TrainStage::Init) {
    if (set.inits.empty()) throw std::invalid_argument("training set has no detections");
  } else if (set.positive_pairs() == 0) {
    throw std::invalid_argument("training set has no matched detection-track pairs");
  }
}

}  // namespace

EpochRecord evaluate_stage(const LearnedModels& models, const TrainingSet& set, TrainStage stage,
                           const TrainConfig& config) {
  EpochRecord rec;
  rec.stage = stage;
  const std::size_t n = sample_count(set, stage);
  std::vector<double> scores, labels;
  double separated = 0.0, pos_neg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    StepOutput o = run_sample(models, set, stage, k, config, nullptr);
    rec.loss += o.loss;
    scores.insert(scores.end(), o.scores.begin(), o.scores.end());
    labels.insert(labels.end(), o.labels.begin(), o.labels.end());
    separated += o.separated;
    pos_neg += o.pos_neg;
  }
  if (n > 0) rec.loss /= static_cast<double>(n);
  switch (stage) {
    case TrainStage::Distance:
      rec.metric = roc_auc(scores, labels);
      break;
    case TrainStage::Coefficients:
      rec.metric = pos_neg > 0.0 ? separated / pos_neg : 0.0;
      break;
    case TrainStage::Init: {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if ((scores[i] >= 0.5) == (labels[i] == 1.0)) ++correct;
      }
      rec.metric = scores.empty() ? 0.0 : static_cast<double>(correct) / scores.size();
      break;
    }
  }
  return rec;
}

std::vector<EpochRecord> train_stage(LearnedModels& models, const TrainingSet& set,
                                     TrainStage stage, const TrainConfig& config,
                                     const EpochCallback& on_epoch) {
  check_trainable(set, stage);
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");

  std::vector<nn::ParamStore*> stores;
  switch (stage) {
    case TrainStage::Distance:
      stores = {&models.fusion_params, &models.feature_distance_params};
      break;
    case TrainStage::Coefficients:
      stores = {&models.coefficient_params};
      break;
    case TrainStage::Init:
      stores = {&models.init_params};
      break;
  }
  std::vector<nn::Adam> optimizers(stores.size(), nn::Adam(config.adam));
  std::mt19937_64 rng(config.seed ^ (static_cast<std::uint64_t>(stage) + 1) * 0x9e3779b97f4a7c15ULL);

  std::vector<EpochRecord> history;
  auto record = [&](int epoch) {
    EpochRecord r = evaluate_stage(models, set, stage, config);
    r.epoch = epoch;
    history.push_back(r);
    if (on_epoch) on_epoch(r, models);
  };
  record(0);

  std::vector<std::size_t> order(sample_count(set, stage));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k : order) {
      for (auto* s : stores) s->zero_grad();
      run_sample(models, set, stage, k, config, &models);
      for (std::size_t i = 0; i < stores.size(); ++i) optimizers[i].step(*stores[i]);
    }
    for (auto* s : stores) {
      if (!s->all_finite()) {
        throw NumericalError(std::string("non-finite parameters after epoch ") +
                             std::to_string(epoch) + " of stage " + to_string(stage));
      }
    }
    record(epoch);
  }
  return history;
}

double sample_loss(LearnedModels& models, const TrainingSet& set, TrainStage stage, std::size_t k,
                   const TrainConfig& config, bool accumulate) {
  if (k >= sample_count(set, stage)) throw std::out_of_range("sample_loss: no such sample");
  return run_sample(models, set, stage, k, config, accumulate ? &models : nullptr).loss;
}

std::vector<EpochRecord> train_all(LearnedModels& models, const TrainingSet& set,
                                   const TrainConfig& config, const EpochCallback& on_epoch) {
  std::vector<EpochRecord> all;
  for (TrainStage s : {TrainStage::Distance, TrainStage::Coefficients, TrainStage::Init}) {
    auto h = train_stage(models, set, s, config, on_epoch);
    all.insert(all.end(), h.begin(), h.end());
  }
  return all;
}

}  // namespace mmot
