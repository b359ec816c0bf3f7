#include "mmot/core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mmot {

NotPositiveDefinite::NotPositiveDefinite(int failing_minor, const std::string& context)
    : NumericalError(context + ": matrix is not positive definite (leading minor " +
                     std::to_string(failing_minor) + ")"),
      failing_minor_(failing_minor) {}

FormatError::FormatError(std::size_t line, const std::string& what)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

bool valid_heading(double a) {
  return std::isfinite(a) && a > -std::numbers::pi && a <= std::numbers::pi;
}

void check_box(double a, double l, double w, double h, const char* what) {
  if (!(l > 0 && w > 0 && h > 0)) {
    throw std::invalid_argument(std::string(what) + ": box sizes must be positive");
  }
  if (!valid_heading(a)) {
    throw std::invalid_argument(std::string(what) + ": heading outside (-pi, pi]");
  }
}

}  // namespace

StateVector BoxState::vector() const {
  StateVector v;
  v << x, y, z, a, l, w, h, dx, dy, dz, da;
  return v;
}

BoxState BoxState::from_vector(const StateVector& v) {
  return BoxState{v[kX], v[kY], v[kZ], v[kA], v[kL], v[kW], v[kH],
                  v[kDx], v[kDy], v[kDz], v[kDa]};
}

void BoxState::validate() const { check_box(a, l, w, h, "BoxState"); }

ObsVector Observation::vector() const {
  ObsVector v;
  v << x, y, z, a, l, w, h, dx, dy;
  return v;
}

Observation Observation::from_vector(const ObsVector& v) {
  return Observation{v[kX], v[kY], v[kZ], v[kA], v[kL], v[kW], v[kH], v[kDx], v[kDy]};
}

void Observation::validate() const { check_box(a, l, w, h, "Observation"); }

Observation observe(const BoxState& s) {
  return Observation{s.x, s.y, s.z, s.a, s.l, s.w, s.h, s.dx, s.dy};
}

void Detection::validate(const FeatureDims& dims) const {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw std::invalid_argument("Detection: confidence outside [0, 1]");
  }
  if (static_cast<int>(feat2d.size()) != dims.feat2d ||
      static_cast<int>(feat3d.size()) != dims.feat3d_size()) {
    std::ostringstream os;
    os << "Detection: feature sizes (" << feat2d.size() << ", " << feat3d.size()
       << ") do not match configured (" << dims.feat2d << ", " << dims.feat3d_size() << ")";
    throw std::invalid_argument(os.str());
  }
  obs.validate();
}

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::domain_error("wrap_angle: non-finite angle");
  }
  constexpr double pi = std::numbers::pi;
  if (theta > -pi && theta <= pi) return theta;
  double r = std::fmod(theta + pi, 2.0 * pi);
  if (r <= 0.0) r += 2.0 * pi;
  const double wrapped = r - pi;
  return wrapped <= -pi ? pi : wrapped;
}

Cholesky::Cholesky(const Eigen::MatrixXd& spd) {
  const Eigen::Index n = spd.rows();
  if (spd.cols() != n) {
    throw std::invalid_argument("Cholesky: matrix is not square");
  }
  const double scale = std::max(1.0, spd.cwiseAbs().maxCoeff());
  if (!spd.allFinite() || (spd - spd.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("Cholesky: matrix is not symmetric");
  }
  lower_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = spd(j, j) - lower_.row(j).head(j).squaredNorm();
    if (!(diag > 0.0)) {
      throw NotPositiveDefinite(static_cast<int>(j + 1), "Cholesky");
    }
    const double ljj = std::sqrt(diag);
    lower_(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      lower_(i, j) = (spd(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / ljj;
    }
  }
}

Eigen::VectorXd Cholesky::solve(const Eigen::VectorXd& b) const {
  if (b.size() != lower_.rows()) {
    throw std::invalid_argument("Cholesky::solve: dimension mismatch");
  }
  const auto l = lower_.triangularView<Eigen::Lower>();
  Eigen::VectorXd y = l.solve(b);
  return l.transpose().solve(y);
}

Eigen::MatrixXd Cholesky::solve(const Eigen::MatrixXd& b) const {
  if (b.rows() != lower_.rows()) {
    throw std::invalid_argument("Cholesky::solve: dimension mismatch");
  }
  const auto l = lower_.triangularView<Eigen::Lower>();
  Eigen::MatrixXd y = l.solve(b);
  return l.transpose().solve(y);
}

double Cholesky::quadratic_form(const Eigen::VectorXd& y) const {
  if (y.size() != lower_.rows()) {
    throw std::invalid_argument("Cholesky::quadratic_form: dimension mismatch");
  }
  return lower_.triangularView<Eigen::Lower>().solve(y).squaredNorm();
}

Eigen::VectorXd chol_solve(const Eigen::MatrixXd& spd, const Eigen::VectorXd& b) {
  return Cholesky(spd).solve(b);
}

}  // namespace mmot
