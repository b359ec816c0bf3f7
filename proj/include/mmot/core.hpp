#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mmot {

inline constexpr int kStateDim = 11;
inline constexpr int kObsDim = 9;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using ObsVector = Eigen::Matrix<double, kObsDim, 1>;
using ObsMatrix = Eigen::Matrix<double, kObsDim, kObsDim>;
using SelectorMatrix = Eigen::Matrix<double, kObsDim, kStateDim>;

// Component order of the state vector. The first nine entries double as the
// observation layout, so the observation model is a fixed selector.
enum StateIndex : int {
  kX = 0, kY, kZ, kA, kL, kW, kH, kDx, kDy, kDz, kDa
};

using ClassId = int;

// ---- errors ----

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-SPD covariance, singular innovation, and similar numerical failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(int failing_minor, const std::string& context);
  // 1-based order of the first leading minor that is not positive.
  int failing_minor() const { return failing_minor_; }

 private:
  int failing_minor_;
};

// Malformed file content. `line` is 1-based, 0 when not line-specific.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Feature or layer widths that disagree between checkpoints and inputs.
class DimensionMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// A file that does not exist or cannot be opened.
class FileAccessError : public Error {
 public:
  using Error::Error;
};

// ---- domain types ----

struct BoxState {
  double x = 0, y = 0, z = 0;
  double a = 0;
  double l = 1, w = 1, h = 1;
  double dx = 0, dy = 0, dz = 0, da = 0;

  StateVector vector() const;
  static BoxState from_vector(const StateVector& v);
  // Throws std::invalid_argument when sizes are not positive or the heading
  // is outside (-pi, pi].
  void validate() const;

  bool operator==(const BoxState&) const = default;
};

struct Observation {
  double x = 0, y = 0, z = 0;
  double a = 0;
  double l = 1, w = 1, h = 1;
  double dx = 0, dy = 0;

  ObsVector vector() const;
  static Observation from_vector(const ObsVector& v);
  void validate() const;

  bool operator==(const Observation&) const = default;
};

// The noiseless observation of a state.
Observation observe(const BoxState& s);

struct GaussianBelief {
  StateVector mean = StateVector::Zero();
  StateMatrix cov = StateMatrix::Zero();
};

// Sizes of the per-detection feature payloads. The 3D feature is a
// channels x 3 x 3 grid stored row-major.
struct FeatureDims {
  int feat2d = 1030;
  int feat3d_channels = 512;

  int feat3d_size() const { return feat3d_channels * 9; }
  bool operator==(const FeatureDims&) const = default;
};

struct Detection {
  Observation obs;
  ClassId class_id = 0;
  double confidence = 1.0;
  std::vector<double> feat2d;
  std::vector<double> feat3d;
  int frame = 0;

  // Throws std::invalid_argument on a confidence outside [0, 1] or feature
  // sizes that disagree with `dims`.
  void validate(const FeatureDims& dims) const;
  bool operator==(const Detection&) const = default;
};

struct Track {
  int id = 0;
  ClassId class_id = 0;
  GaussianBelief belief;
  // Fused feature of the most recently matched detection; empty when the
  // tracker runs without learned models.
  std::vector<double> fused_feat;
  // Raw features of the most recently matched detection.
  std::vector<double> source_feat2d;
  std::vector<double> source_feat3d;
  int hits = 1;
  int hit_streak = 1;
  int consecutive_misses = 0;
  double score = 0.0;
  bool confirmed = true;
};

struct GroundTruthBox {
  int identity = 0;
  ClassId class_id = 0;
  BoxState state;

  bool operator==(const GroundTruthBox&) const = default;
};

using GroundTruthFrame = std::vector<GroundTruthBox>;
using DetectionFrame = std::vector<Detection>;

// ---- numerics ----

// Maps theta into (-pi, pi]. Throws std::domain_error for non-finite input.
double wrap_angle(double theta);

// Cholesky factor of a symmetric positive definite matrix.
class Cholesky {
 public:
  // Throws NotPositiveDefinite naming the first failing leading minor.
  explicit Cholesky(const Eigen::MatrixXd& spd);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  // y^T S^-1 y
  double quadratic_form(const Eigen::VectorXd& y) const;
  const Eigen::MatrixXd& lower() const { return lower_; }

 private:
  Eigen::MatrixXd lower_;
};

Eigen::VectorXd chol_solve(const Eigen::MatrixXd& spd, const Eigen::VectorXd& b);

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

}  // namespace mmot
