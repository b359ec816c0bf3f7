#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmot/core.hpp"
#include "mmot/filter.hpp"
#include "mmot/learned.hpp"
#include "mmot/lifecycle.hpp"
#include "mmot/metrics.hpp"
#include "mmot/simlab.hpp"
#include "mmot/tracker.hpp"
#include "mmot/training.hpp"

namespace mmot::io {

struct DetectionStream {
  double frame_interval = 0.5;
  FeatureDims features{16, 8};
  std::vector<DetectionFrame> frames;  // frames[k] holds frame k

  bool operator==(const DetectionStream&) const = default;
};

struct TruthStream {
  double frame_interval = 0.5;
  std::vector<GroundTruthFrame> frames;

  bool operator==(const TruthStream&) const = default;
};

struct TrackStream {
  int num_frames = 0;
  std::vector<ReportedTrack> tracks;

  bool operator==(const TrackStream&) const = default;
};

// All readers throw FormatError carrying the 1-based line number.
void write_detections(std::ostream& out, const DetectionStream& s);
DetectionStream read_detections(std::istream& in);
void write_truth(std::ostream& out, const TruthStream& s);
TruthStream read_truth(std::istream& in);
void write_tracks(std::ostream& out, const TrackStream& s);
TrackStream read_tracks(std::istream& in);

struct RunConfig {
  NoiseSuite noise;
  LifecyclePolicy policy;
  double gate = kDefaultGate;
  double confidence_floor = 0.0;
  LossConstants loss;
  nn::AdamConfig adam;
  int epochs = 10;
  NetDims dims = NetDims::desk();
  std::optional<std::string> checkpoints;  // model directory
  ScenarioConfig scenario;

  TrackerConfig tracker() const;
  TrainConfig training(std::uint64_t seed) const;
  // Throws ConfigError on non-positive constants or inconsistent dims.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// JSON. Keys absent from the input keep their defaults; unknown keys and
// wrongly typed values throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);
std::string dump_run_config(const RunConfig& config);

std::string dump_noise(const NoiseSuite& noise);
NoiseSuite parse_noise(const std::string& json_text);

std::string dump_metrics(const MetricsReport& report);

// Tab-separated: stage, epoch, loss, metric.
void write_telemetry(std::ostream& out, const std::vector<EpochRecord>& records);

// g1.ckpt .. g4.ckpt, each tagged with the layer widths.
void save_models(const std::filesystem::path& dir, const LearnedModels& models);
// Throws DimensionMismatch when a checkpoint's dims disagree with `expected`
// feature dims or with each other.
LearnedModels load_models(const std::filesystem::path& dir,
                          const std::optional<FeatureDims>& expected = std::nullopt);

// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);
// Throws FileAccessError when the file cannot be opened.
std::string read_text(const std::filesystem::path& path);

// detections.txt and truth.txt inside `dir`.
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);
LabeledSequence read_sequence(const std::filesystem::path& dir);

}  // namespace mmot::io
