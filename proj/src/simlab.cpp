#include "mmot/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace mmot {

void ScenarioConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(miss_probability)) throw ConfigError("scenario: miss probability outside [0, 1]");
  if (!prob(motion.constant_velocity) || !prob(motion.turning) || !prob(motion.stationary) ||
      motion.constant_velocity + motion.turning + motion.stationary <= 0.0) {
    throw ConfigError("scenario: motion mix fractions must lie in [0, 1] and not all be zero");
  }
  if (!(clutter_rate >= 0.0)) throw ConfigError("scenario: clutter rate must be >= 0");
  if (frames < 2) throw ConfigError("scenario: need at least 2 frames");
  if (!(frame_interval > 0.0)) throw ConfigError("scenario: frame interval must be positive");
  if (features.feat2d <= kSectorSlots || features.feat3d_channels < 1) {
    throw ConfigError("scenario: feature dims too small");
  }
  if ((detection_noise_std.array() < 0.0).any() || feature_noise_std < 0.0 ||
      identity_spread < 0.0) {
    throw ConfigError("scenario: noise levels must be >= 0");
  }
  if (!(scene_size > 0.0)) throw ConfigError("scenario: scene size must be positive");
  if (!prob(birth_window)) throw ConfigError("scenario: birth window outside [0, 1]");
  for (const auto& c : classes) {
    if (c.count < 0 || !(c.length > 0 && c.width > 0 && c.height > 0) || c.max_speed < 0) {
      throw ConfigError("scenario: invalid class spec for class " + std::to_string(c.class_id));
    }
  }
}

int bearing_sector(double x, double y) {
  const double bearing = std::atan2(y, x) + std::numbers::pi;  // [0, 2pi]
  const int s = static_cast<int>(bearing / (2.0 * std::numbers::pi / kSectorSlots));
  return std::clamp(s, 0, kSectorSlots - 1);
}

namespace {

using Rng = std::mt19937_64;

struct ObjectPlan {
  int identity = 0;
  ClassId class_id = 0;
  int birth = 0;
  double x0 = 0, y0 = 0, heading = 0;
  double step = 0;  // meters per frame
  double turn = 0;  // radians per frame
  double l = 1, w = 1, h = 1;
};

double normal(Rng& rng, double mean, double std) {
  if (std == 0.0) return mean;
  return std::normal_distribution<double>(mean, std)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Appearance prototype shared by every object of a class, independent of the
// scenario seed so that it carries over between sequences.
std::pair<std::vector<double>, std::vector<double>> class_prototype(ClassId cls,
                                                                    const ScenarioConfig& cfg) {
  Rng rng(0x9e3779b97f4a7c15ULL ^ (static_cast<std::uint64_t>(cls) * 1000003ULL));
  std::bernoulli_distribution coin(0.5);
  std::vector<double> app(cfg.features.feat2d - kSectorSlots), geo(cfg.features.feat3d_size());
  for (auto& v : app) v = coin(rng) ? cfg.objectness_offset : -cfg.objectness_offset;
  for (auto& v : geo) v = coin(rng) ? cfg.objectness_offset : -cfg.objectness_offset;
  return {app, geo};
}

std::vector<BoxState> simulate_states(const ObjectPlan& p, int frames) {
  std::vector<BoxState> out;
  BoxState s;
  s.x = p.x0;
  s.y = p.y0;
  s.z = p.h / 2.0;
  s.a = wrap_angle(p.heading);
  s.l = p.l;
  s.w = p.w;
  s.h = p.h;
  s.dx = p.step * std::cos(s.a);
  s.dy = p.step * std::sin(s.a);
  s.dz = 0.0;
  s.da = p.turn;
  for (int t = p.birth; t < frames; ++t) {
    if (t > p.birth) {
      const double a = wrap_angle(s.a + p.turn);
      const double nx = s.x + p.step * std::cos(a);
      const double ny = s.y + p.step * std::sin(a);
      s.dx = nx - s.x;
      s.dy = ny - s.y;
      s.da = wrap_angle(a - s.a);
      s.x = nx;
      s.y = ny;
      s.a = a;
    }
    out.push_back(s);
  }
  return out;
}

void fill_sector(std::vector<double>& feat2d, double x, double y) {
  const std::size_t base = feat2d.size() - kSectorSlots;
  for (int k = 0; k < kSectorSlots; ++k) feat2d[base + k] = 0.0;
  feat2d[base + bearing_sector(x, y)] = 1.0;
}

Observation noisy_observation(const BoxState& s, const ObsVector& std, Rng& rng) {
  ObsVector v = observe(s).vector();
  for (int k = 0; k < kObsDim; ++k) v[k] = normal(rng, v[k], std[k]);
  v[kA] = wrap_angle(v[kA]);
  for (int k : {kL, kW, kH}) v[k] = std::max(std::abs(v[k]), 0.05);
  return Observation::from_vector(v);
}

Scenario realize(const ScenarioConfig& cfg, const std::vector<ObjectPlan>& plans, Rng& rng) {
  Scenario sc;
  sc.config = cfg;
  sc.truth.resize(cfg.frames);
  sc.detections.resize(cfg.frames);
  sc.detection_identity.resize(cfg.frames);

  const int app_dims = cfg.features.feat2d - kSectorSlots;
  const int geo_dims = cfg.features.feat3d_size();

  for (const auto& p : plans) {
    auto [proto_app, proto_geo] = class_prototype(p.class_id, cfg);
    IdentityLatent lat{p.identity, p.class_id, proto_app, proto_geo};
    for (auto& v : lat.appearance) v += normal(rng, 0.0, cfg.identity_spread);
    for (auto& v : lat.geometry) v += normal(rng, 0.0, cfg.identity_spread);
    sc.latents.push_back(lat);
  }

  std::bernoulli_distribution missed(cfg.miss_probability);
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const auto& p = plans[k];
    const auto& lat = sc.latents[k];
    const auto states = simulate_states(p, cfg.frames);
    for (std::size_t i = 0; i < states.size(); ++i) {
      const int t = p.birth + static_cast<int>(i);
      sc.truth[t].push_back({p.identity, p.class_id, states[i]});
      if (missed(rng)) continue;
      Detection d;
      d.frame = t;
      d.class_id = p.class_id;
      d.obs = noisy_observation(states[i], cfg.detection_noise_std, rng);
      d.confidence = std::clamp(normal(rng, 0.75, 0.12), 0.01, 0.99);
      d.feat2d.resize(cfg.features.feat2d);
      for (int j = 0; j < app_dims; ++j) {
        d.feat2d[j] = normal(rng, lat.appearance[j], cfg.feature_noise_std);
      }
      fill_sector(d.feat2d, d.obs.x, d.obs.y);
      d.feat3d.resize(geo_dims);
      for (int j = 0; j < geo_dims; ++j) {
        d.feat3d[j] = normal(rng, lat.geometry[j], cfg.feature_noise_std);
      }
      sc.detections[t].push_back(std::move(d));
      sc.detection_identity[t].push_back(p.identity);
    }
  }

  // Clutter.
  std::vector<double> weights;
  for (const auto& c : cfg.classes) weights.push_back(std::max(c.count, 0) + 1e-9);
  std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
  std::poisson_distribution<int> clutter_count(cfg.clutter_rate);
  const double half = cfg.scene_size / 2.0;
  for (int t = 0; t < cfg.frames; ++t) {
    const int n = cfg.clutter_rate > 0.0 ? clutter_count(rng) : 0;
    for (int k = 0; k < n && !cfg.classes.empty(); ++k) {
      const ClassSpec& cs = cfg.classes[pick_class(rng)];
      Detection d;
      d.frame = t;
      d.class_id = cs.class_id;
      d.obs = Observation{uniform(rng, -half, half), uniform(rng, -half, half), cs.height / 2.0,
                          wrap_angle(uniform(rng, -std::numbers::pi, std::numbers::pi)),
                          cs.length, cs.width, cs.height,
                          normal(rng, 0.0, 0.5), normal(rng, 0.0, 0.5)};
      d.confidence = std::clamp(normal(rng, 0.35, 0.12), 0.01, 0.99);
      d.feat2d.resize(cfg.features.feat2d);
      for (int j = 0; j < app_dims; ++j) d.feat2d[j] = normal(rng, 0.0, cfg.identity_spread);
      fill_sector(d.feat2d, d.obs.x, d.obs.y);
      d.feat3d.resize(geo_dims);
      for (auto& v : d.feat3d) v = normal(rng, 0.0, cfg.identity_spread);
      sc.detections[t].push_back(std::move(d));
      sc.detection_identity[t].push_back(-1);
    }
  }

  // Detector output order carries no identity information.
  for (int t = 0; t < cfg.frames; ++t) {
    std::vector<std::size_t> order(sc.detections[t].size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    DetectionFrame dets;
    std::vector<int> ids;
    for (std::size_t i : order) {
      dets.push_back(std::move(sc.detections[t][i]));
      ids.push_back(sc.detection_identity[t][i]);
    }
    sc.detections[t] = std::move(dets);
    sc.detection_identity[t] = std::move(ids);
  }
  return sc;
}

}  // namespace

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double half = config.scene_size / 2.0;
  const double total = config.motion.constant_velocity + config.motion.turning +
                       config.motion.stationary;
  const int latest_birth = static_cast<int>(std::floor(config.birth_window * (config.frames - 1)));

  std::vector<ObjectPlan> plans;
  int next_identity = 0;
  for (const auto& cs : config.classes) {
    for (int i = 0; i < cs.count; ++i) {
      ObjectPlan p;
      p.identity = next_identity++;
      p.class_id = cs.class_id;
      p.birth = std::uniform_int_distribution<int>(0, latest_birth)(rng);
      p.x0 = uniform(rng, -half, half);
      p.y0 = uniform(rng, -half, half);
      p.heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
      p.l = cs.length * uniform(rng, 0.9, 1.1);
      p.w = cs.width * uniform(rng, 0.9, 1.1);
      p.h = cs.height * uniform(rng, 0.9, 1.1);
      const double u = uniform(rng, 0.0, total);
      const double speed = cs.max_speed * uniform(rng, 0.3, 1.0);
      if (u < config.motion.constant_velocity) {
        p.step = speed * config.frame_interval;
      } else if (u < config.motion.constant_velocity + config.motion.turning) {
        p.step = speed * config.frame_interval;
        const double rate = uniform(rng, 0.2, 1.0) * config.max_turn_rate;
        p.turn = (uniform(rng, 0.0, 1.0) < 0.5 ? -rate : rate) * config.frame_interval;
      }
      plans.push_back(p);
    }
  }
  return realize(config, plans, rng);
}

ScenarioConfig crossing_config(std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.classes = {{1, 0, 4.5, 1.9, 1.6, 12.0}};
  cfg.frames = 30;
  cfg.detection_noise_std << 0.5, 0.5, 0.1, 0.3, 0.1, 0.05, 0.05, 0.4, 0.4;
  cfg.miss_probability = 0.05;
  cfg.clutter_rate = 0.0;
  cfg.seed = seed;
  return cfg;
}

Scenario crossing_benchmark(std::uint64_t seed) {
  ScenarioConfig cfg = crossing_config(seed);
  Rng rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  const ClassSpec& car = cfg.classes.front();

  std::vector<ObjectPlan> plans;
  int identity = 0;
  const double step = 6.0 * cfg.frame_interval;
  // Crossing pairs, each in its own region of the scene.
  const double centers[3][2] = {{-25.0, -25.0}, {25.0, 0.0}, {-10.0, 30.0}};
  for (const auto& c : centers) {
    const int cross_frame = std::uniform_int_distribution<int>(10, 18)(rng);
    const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double half_angle = uniform(rng, 2.0, 4.0) * std::numbers::pi / 180.0;
    for (int side : {-1, 1}) {
      ObjectPlan p;
      p.identity = identity++;
      p.class_id = car.class_id;
      p.heading = wrap_angle(heading + side * half_angle);
      p.step = step;
      p.l = car.length;
      p.w = car.width;
      p.h = car.height;
      // Lateral offset of 0.25 m on each side at the crossing frame.
      const double ox = c[0] - side * 0.25 * std::sin(heading);
      const double oy = c[1] + side * 0.25 * std::cos(heading);
      p.x0 = ox - cross_frame * step * std::cos(p.heading);
      p.y0 = oy - cross_frame * step * std::sin(p.heading);
      plans.push_back(p);
    }
  }
  // Sharply turning objects.
  for (int k = 0; k < 2; ++k) {
    ObjectPlan p;
    p.identity = identity++;
    p.class_id = car.class_id;
    p.x0 = uniform(rng, 10.0, 35.0);
    p.y0 = uniform(rng, -40.0, -25.0) + 20.0 * k;
    p.heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
    p.step = 4.0 * cfg.frame_interval;
    p.turn = (k == 0 ? 1.0 : -1.0) * cfg.max_turn_rate * cfg.frame_interval;
    p.l = car.length;
    p.w = car.width;
    p.h = car.height;
    plans.push_back(p);
  }
  cfg.classes.front().count = identity;
  return realize(cfg, plans, rng);
}

}  // namespace mmot
