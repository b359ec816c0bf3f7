#pragma once

#include <cstdint>
#include <vector>

#include "mmot/core.hpp"

namespace mmot {

struct ClassSpec {
  ClassId class_id = 1;
  int count = 0;
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  double max_speed = 15.0;  // m/s

  bool operator==(const ClassSpec&) const = default;
};

// Fractions of objects per motion type; normalized when sampling.
struct MotionMix {
  double constant_velocity = 0.6;
  double turning = 0.3;
  double stationary = 0.1;

  bool operator==(const MotionMix&) const = default;
};

struct ScenarioConfig {
  std::vector<ClassSpec> classes{{1, 6, 4.5, 1.9, 1.6, 15.0}, {2, 4, 0.8, 0.7, 1.8, 2.0}};
  MotionMix motion;
  int frames = 40;
  double frame_interval = 0.5;  // seconds
  // Standard deviation per observation component (x, y, z, a, l, w, h, dx, dy);
  // velocity components in meters per frame.
  ObsVector detection_noise_std = (ObsVector() << 0.3, 0.3, 0.1, 0.1, 0.1, 0.05, 0.05, 0.2, 0.2)
                                      .finished();
  double miss_probability = 0.1;
  double clutter_rate = 0.0;  // expected false positives per frame
  FeatureDims features{16, 8};
  double feature_noise_std = 0.3;
  double identity_spread = 1.0;     // spread of latent appearance across identities
  double objectness_offset = 1.0;   // magnitude of the per-class appearance prototype
  double scene_size = 100.0;        // square side, centered at the origin
  double max_turn_rate = 0.5;       // rad/s
  double birth_window = 0.25;       // objects appear within this fraction of the sequence
  std::uint64_t seed = 0;

  // Throws ConfigError on probabilities outside [0, 1], negative clutter,
  // fewer than 2 frames, or feature dims too small for the 6-slot one-hot.
  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

struct IdentityLatent {
  int identity = 0;
  ClassId class_id = 0;
  std::vector<double> appearance;  // feat2d minus the 6 sector slots
  std::vector<double> geometry;    // feat3d layout
};

inline constexpr int kSectorSlots = 6;

struct Scenario {
  ScenarioConfig config;
  std::vector<GroundTruthFrame> truth;
  std::vector<DetectionFrame> detections;
  // Identity behind each detection, -1 for clutter; parallel to `detections`.
  std::vector<std::vector<int>> detection_identity;
  std::vector<IdentityLatent> latents;
};

Scenario generate(const ScenarioConfig& config);

// Settings shared by the crossing benchmark.
ScenarioConfig crossing_config(std::uint64_t seed);

// Same-class, same-size object pairs whose paths cross at a shallow angle
// with a closest approach below the position noise, plus sharply turning
// objects. Identities are separable only through the appearance features.
Scenario crossing_benchmark(std::uint64_t seed);

// Sector (0..5) of the bearing of (x, y) seen from the scene center.
int bearing_sector(double x, double y);

}  // namespace mmot
