#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mmot::nn {

// One sample per row; each row is a (channels, height, width) tensor in
// row-major order.
using Batch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  int size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

enum class LayerKind { Dense, Conv3x3Valid, Relu, Sigmoid, Reshape };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  Shape in;
  Shape out;
};

LayerSpec dense(std::string name, int in, int out);
LayerSpec conv3x3_valid(std::string name, Shape in, int out_channels);
LayerSpec relu(Shape shape);
LayerSpec sigmoid(Shape shape);
LayerSpec reshape(Shape from, Shape to);

struct Parameter {
  // Logical tensor shape, e.g. {out, in} or {out, in, 3, 3}.
  std::vector<int> shape;
  // Stored as a matrix: rows = shape[0], cols = product of the rest.
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

class ParamStore {
 public:
  Parameter& add(const std::string& name, std::vector<int> shape);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  bool all_finite() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

// Intermediates of one forward pass, consumed by backward.
struct Tape {
  std::vector<Batch> activations;  // input of every layer, then the output
  bool empty() const { return activations.empty(); }
  void clear() { activations.clear(); }
};

class Network {
 public:
  Network() = default;
  // Throws std::invalid_argument when consecutive layer shapes disagree.
  Network(std::string name, std::vector<LayerSpec> layers);

  const std::string& name() const { return name_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  Shape input_shape() const;
  Shape output_shape() const;

  // Registers this network's parameters: weights uniform in
  // +-sqrt(6 / (fan_in + fan_out)), biases zero.
  void init_params(ParamStore& store, std::mt19937_64& rng) const;
  // Throws ConfigError when the store lacks a parameter or has the wrong shape.
  void check_params(const ParamStore& store) const;

  // Throws std::invalid_argument naming the layer on a shape mismatch.
  Batch forward(const ParamStore& store, const Batch& input, Tape* tape = nullptr) const;
  // Accumulates parameter gradients into `store` and returns the gradient
  // with respect to the input. Throws std::logic_error on an empty tape.
  Batch backward(ParamStore& store, const Tape& tape, const Batch& grad_output) const;

 private:
  std::string name_;
  std::vector<LayerSpec> layers_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParamStore& store);
  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Eigen::MatrixXd m, v;
  };
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

double sigmoid(double x);

// Text checkpoint holding named tensors with shapes and exact values.
void save_checkpoint(std::ostream& out, const std::string& net_name,
                     const std::map<std::string, std::string>& metadata, const ParamStore& store);

struct Checkpoint {
  std::string net_name;
  std::map<std::string, std::string> metadata;
  ParamStore params;
};

// Throws FormatError on malformed content.
Checkpoint load_checkpoint(std::istream& in);

}  // namespace mmot::nn
