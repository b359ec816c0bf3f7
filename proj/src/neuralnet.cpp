#include "mmot/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mmot/core.hpp"
#include "number_text.hpp"

namespace mmot::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv3x3Valid: return "conv3x3_valid";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Reshape: return "reshape";
  }
  return "?";
}

LayerSpec dense(std::string name, int in, int out) {
  return {LayerKind::Dense, std::move(name), Shape{in, 1, 1}, Shape{out, 1, 1}};
}

LayerSpec conv3x3_valid(std::string name, Shape in, int out_channels) {
  if (in.height < 3 || in.width < 3) {
    throw std::invalid_argument("conv3x3_valid: spatial size below 3x3");
  }
  return {LayerKind::Conv3x3Valid, std::move(name), in,
          Shape{out_channels, in.height - 2, in.width - 2}};
}

LayerSpec relu(Shape shape) { return {LayerKind::Relu, "relu", shape, shape}; }

LayerSpec sigmoid(Shape shape) { return {LayerKind::Sigmoid, "sigmoid", shape, shape}; }

LayerSpec reshape(Shape from, Shape to) {
  if (from.size() != to.size()) {
    throw std::invalid_argument("reshape: element counts differ");
  }
  return {LayerKind::Reshape, "reshape", from, to};
}

// ---- ParamStore ----

Parameter& ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (shape.empty()) throw std::invalid_argument("ParamStore::add: empty shape");
  const int rows = shape[0];
  const int cols = std::accumulate(shape.begin() + 1, shape.end(), 1, std::multiplies<int>());
  Parameter p;
  p.shape = std::move(shape);
  p.value = Eigen::MatrixXd::Zero(rows, cols);
  p.grad = Eigen::MatrixXd::Zero(rows, cols);
  return params_[name] = std::move(p);
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

bool ParamStore::all_finite() const {
  for (const auto& [_, p] : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// ---- Network ----

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// Sigmoid outputs are kept strictly inside (0, 1) so downstream
// cross-entropy terms stay finite.
constexpr double kProbFloor = 1e-12;

std::vector<int> weight_shape(const LayerSpec& l) {
  if (l.kind == LayerKind::Dense) return {l.out.size(), l.in.size()};
  return {l.out.channels, l.in.channels, 3, 3};
}

bool has_params(const LayerSpec& l) {
  return l.kind == LayerKind::Dense || l.kind == LayerKind::Conv3x3Valid;
}

// Gathers the 3x3 patch at output location (i, j) for every sample.
Eigen::MatrixXd gather_patch(const Batch& x, const Shape& in, int i, int j) {
  const int cin = in.channels;
  Eigen::MatrixXd patch(x.rows(), cin * 9);
  for (int c = 0; c < cin; ++c) {
    for (int di = 0; di < 3; ++di) {
      for (int dj = 0; dj < 3; ++dj) {
        const int src = c * in.height * in.width + (i + di) * in.width + (j + dj);
        patch.col(c * 9 + di * 3 + dj) = x.col(src);
      }
    }
  }
  return patch;
}

}  // namespace

Network::Network(std::string name, std::vector<LayerSpec> layers)
    : name_(std::move(name)), layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("Network: no layers");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in.size() != layers_[i - 1].out.size()) {
      throw std::invalid_argument("Network " + name_ + ": layer " + std::to_string(i) + " (" +
                                  to_string(layers_[i].kind) + ") input does not match layer " +
                                  std::to_string(i - 1) + " output");
    }
  }
}

Shape Network::input_shape() const { return layers_.front().in; }
Shape Network::output_shape() const { return layers_.back().out; }

void Network::init_params(ParamStore& store, std::mt19937_64& rng) const {
  for (const auto& l : layers_) {
    if (!has_params(l)) continue;
    auto wshape = weight_shape(l);
    Parameter& w = store.add(name_ + "." + l.name + ".w", wshape);
    const int fan_in = static_cast<int>(w.value.cols());
    const int fan_out = l.kind == LayerKind::Dense ? l.out.size() : l.out.channels * 9;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index k = 0; k < w.value.size(); ++k) w.value.data()[k] = u(rng);
    store.add(name_ + "." + l.name + ".b", {l.out.channels});
  }
}

void Network::check_params(const ParamStore& store) const {
  for (const auto& l : layers_) {
    if (!has_params(l)) continue;
    const Parameter& w = store.at(name_ + "." + l.name + ".w");
    const Parameter& b = store.at(name_ + "." + l.name + ".b");
    if (w.shape != weight_shape(l) || b.shape != std::vector<int>{l.out.channels}) {
      throw ConfigError("parameter shape mismatch in " + name_ + "." + l.name);
    }
  }
}

Batch Network::forward(const ParamStore& store, const Batch& input, Tape* tape) const {
  if (input.cols() != input_shape().size()) {
    throw std::invalid_argument("Network " + name_ + ": input width " +
                                std::to_string(input.cols()) + " does not match layer 0 (" +
                                to_string(layers_[0].kind) + ") expecting " +
                                std::to_string(input_shape().size()));
  }
  if (tape) {
    tape->clear();
    tape->activations.reserve(layers_.size() + 1);
    tape->activations.push_back(input);
  }
  Batch x = input;
  for (const auto& l : layers_) {
    Batch y;
    switch (l.kind) {
      case LayerKind::Dense: {
        const auto& w = store.at(name_ + "." + l.name + ".w").value;
        const auto& b = store.at(name_ + "." + l.name + ".b").value;
        y = x * w.transpose();
        y.rowwise() += b.col(0).transpose();
        break;
      }
      case LayerKind::Conv3x3Valid: {
        const auto& w = store.at(name_ + "." + l.name + ".w").value;
        const auto& b = store.at(name_ + "." + l.name + ".b").value;
        const int ho = l.out.height, wo = l.out.width, cout = l.out.channels;
        y.resize(x.rows(), l.out.size());
        for (int i = 0; i < ho; ++i) {
          for (int j = 0; j < wo; ++j) {
            Eigen::MatrixXd r = gather_patch(x, l.in, i, j) * w.transpose();
            r.rowwise() += b.col(0).transpose();
            for (int o = 0; o < cout; ++o) y.col(o * ho * wo + i * wo + j) = r.col(o);
          }
        }
        break;
      }
      case LayerKind::Relu:
        y = x.cwiseMax(0.0);
        break;
      case LayerKind::Sigmoid:
        y = x.unaryExpr([](double v) {
          return std::clamp(sigmoid(v), kProbFloor, 1.0 - kProbFloor);
        });
        break;
      case LayerKind::Reshape:
        y = x;
        break;
    }
    x = std::move(y);
    if (tape) tape->activations.push_back(x);
  }
  return x;
}

Batch Network::backward(ParamStore& store, const Tape& tape, const Batch& grad_output) const {
  if (tape.activations.size() != layers_.size() + 1) {
    throw std::logic_error("Network " + name_ + ": backward called without a recorded forward");
  }
  if (grad_output.rows() != tape.activations.back().rows() ||
      grad_output.cols() != tape.activations.back().cols()) {
    throw std::invalid_argument("Network " + name_ + ": output gradient shape mismatch");
  }
  Batch g = grad_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    const Batch& x = tape.activations[k];
    const Batch& y = tape.activations[k + 1];
    Batch gx;
    switch (l.kind) {
      case LayerKind::Dense: {
        Parameter& w = store.at(name_ + "." + l.name + ".w");
        Parameter& b = store.at(name_ + "." + l.name + ".b");
        w.grad.noalias() += g.transpose() * x;
        b.grad.col(0) += g.colwise().sum().transpose();
        gx = g * w.value;
        break;
      }
      case LayerKind::Conv3x3Valid: {
        Parameter& w = store.at(name_ + "." + l.name + ".w");
        Parameter& b = store.at(name_ + "." + l.name + ".b");
        const int ho = l.out.height, wo = l.out.width, cout = l.out.channels;
        const int cin = l.in.channels;
        gx = Batch::Zero(x.rows(), x.cols());
        for (int i = 0; i < ho; ++i) {
          for (int j = 0; j < wo; ++j) {
            Eigen::MatrixXd gy(g.rows(), cout);
            for (int o = 0; o < cout; ++o) gy.col(o) = g.col(o * ho * wo + i * wo + j);
            const Eigen::MatrixXd patch = gather_patch(x, l.in, i, j);
            w.grad.noalias() += gy.transpose() * patch;
            b.grad.col(0) += gy.colwise().sum().transpose();
            const Eigen::MatrixXd gpatch = gy * w.value;
            for (int c = 0; c < cin; ++c) {
              for (int di = 0; di < 3; ++di) {
                for (int dj = 0; dj < 3; ++dj) {
                  const int dst = c * l.in.height * l.in.width + (i + di) * l.in.width + (j + dj);
                  gx.col(dst) += gpatch.col(c * 9 + di * 3 + dj);
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu:
        gx = g.cwiseProduct((x.array() > 0.0).cast<double>().matrix());
        break;
      case LayerKind::Sigmoid:
        gx = g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
        break;
      case LayerKind::Reshape:
        gx = g;
        break;
    }
    g = std::move(gx);
  }
  return g;
}

// ---- Adam ----

void Adam::step(ParamStore& store) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& [name, p] : store) {
    auto& mom = moments_[name];
    if (mom.m.size() == 0) {
      mom.m = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
      mom.v = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
    }
    mom.m = config_.beta1 * mom.m + (1.0 - config_.beta1) * p.grad;
    mom.v = config_.beta2 * mom.v + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= config_.lr * (mom.m.array() / c1) /
                       ((mom.v.array() / c2).sqrt() + config_.eps);
  }
}

// ---- checkpoints ----

namespace {
constexpr const char* kCheckpointMagic = "mmot-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& out, const std::string& net_name,
                     const std::map<std::string, std::string>& metadata, const ParamStore& store) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "net " << net_name << '\n';
  for (const auto& [k, v] : metadata) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, p] : store) {
    out << "param " << name << ' ' << p.shape.size();
    for (int d : p.shape) out << ' ' << d;
    out << '\n';
    // Row-major values.
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        if (r != 0 || c != 0) out << ' ';
        out << detail::format_double(p.value(r, c));
      }
    }
    out << '\n';
  }
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  Checkpoint ck;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };
  if (!next()) throw FormatError(1, "empty checkpoint");
  {
    auto tok = detail::split_ws(line);
    if (tok.size() != 2 || tok[0] != kCheckpointMagic) {
      throw FormatError(lineno, "not a checkpoint file");
    }
    if (detail::parse_int(tok[1]) != kCheckpointVersion) {
      throw FormatError(lineno, "unsupported checkpoint version");
    }
  }
  bool ended = false;
  while (next()) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end") {
      ended = true;
      break;
    }
    if (tok[0] == "net" && tok.size() == 2) {
      ck.net_name = std::string(tok[1]);
    } else if (tok[0] == "meta" && tok.size() == 3) {
      ck.metadata[std::string(tok[1])] = std::string(tok[2]);
    } else if (tok[0] == "param" && tok.size() >= 3) {
      const auto rank = detail::parse_int(tok[2]);
      if (!rank || *rank < 1 || static_cast<std::size_t>(*rank) + 3 != tok.size()) {
        throw FormatError(lineno, "bad parameter header");
      }
      std::vector<int> shape;
      for (std::size_t i = 3; i < tok.size(); ++i) {
        auto d = detail::parse_int(tok[i]);
        if (!d || *d < 1) throw FormatError(lineno, "bad parameter dimension");
        shape.push_back(static_cast<int>(*d));
      }
      const std::string name(tok[1]);
      Parameter& p = ck.params.add(name, shape);
      if (!next()) throw FormatError(lineno, "missing values for " + name);
      auto vals = detail::split_ws(line);
      if (static_cast<Eigen::Index>(vals.size()) != p.value.size()) {
        throw FormatError(lineno, "expected " + std::to_string(p.value.size()) + " values for " +
                                      name + ", found " + std::to_string(vals.size()));
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
          auto v = detail::parse_double(vals[k++]);
          if (!v) throw FormatError(lineno, "bad number in " + name);
          p.value(r, c) = *v;
        }
      }
    } else {
      throw FormatError(lineno, "unrecognized checkpoint record");
    }
  }
  if (!ended) throw FormatError(lineno, "truncated checkpoint");
  return ck;
}

}  // namespace mmot::nn
