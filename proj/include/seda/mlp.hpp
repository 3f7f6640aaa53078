#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

// Fully connected value network with rectified-linear hidden layers and an
// identity output layer, in 64-bit floats throughout. Training utilities:
// exact backpropagation, Adam, Polyak target averaging, and bit-exact
// binary (de)serialization.

namespace seda {

struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: (out_size x in_size)
  std::vector<Eigen::VectorXd> biases;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return static_cast<int>(weights.front().cols()); }
  int output_size() const { return static_cast<int>(weights.back().rows()); }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes = {input_size()};
    for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
    return sizes;
  }

  bool same_shape(const MlpParams& other) const {
    if (weights.size() != other.weights.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != other.weights[l].rows() ||
          weights[l].cols() != other.weights[l].cols() ||
          biases[l].size() != other.biases[l].size())
        return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  static MlpParams zeros(const std::vector<int>& sizes) {
    if (sizes.size() < 2)
      throw std::invalid_argument("network needs at least input and output");
    MlpParams params;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] < 1 || sizes[l + 1] < 1)
        throw std::invalid_argument("layer sizes must be positive");
      params.weights.push_back(Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]));
      params.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    }
    return params;
  }

  /// All weights and biases drawn uniformly from +-1/sqrt(fan_in).
  static MlpParams uniform_init(const std::vector<int>& sizes,
                                std::mt19937_64& rng) {
    MlpParams params = zeros(sizes);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      const double bound = 1.0 / std::sqrt(params.weights[l].cols());
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index c = 0; c < params.weights[l].cols(); ++c)
        for (Eigen::Index r = 0; r < params.weights[l].rows(); ++r)
          params.weights[l](r, c) = dist(rng);
      for (Eigen::Index r = 0; r < params.biases[l].size(); ++r)
        params.biases[l][r] = dist(rng);
    }
    return params;
  }
};

/// Action values for a batch of observations stacked as columns.
inline Eigen::MatrixXd forward_batch(const MlpParams& params,
                                     const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_size())
    throw std::invalid_argument("observation length does not match input size");
  Eigen::MatrixXd activation = inputs;
  for (int l = 0; l < params.n_layers(); ++l) {
    activation = (params.weights[l] * activation).colwise() + params.biases[l];
    if (l + 1 < params.n_layers())
      activation = activation.cwiseMax(0.0);  // rectified linear
  }
  return activation;
}

inline Eigen::VectorXd forward(const MlpParams& params,
                               const Eigen::VectorXd& obs) {
  return forward_batch(params, obs);
}

/// Gradient container with the same tensor shapes as the parameters.
using MlpGradient = MlpParams;

/// Squared-error loss over chosen actions and its exact parameter gradient.
///
/// loss = inv_norm * sum_s (forward(obs_s)[action_s] - target_s)^2
///
/// inv_norm carries the batch normalization (e.g. 1/B for B transitions with
/// the per-agent errors summed, not averaged). Returns the loss; fills
/// `gradient` if non-null.
inline double mlp_loss_and_gradient(const MlpParams& params,
                                    const Eigen::MatrixXd& inputs,
                                    const std::vector<int>& actions,
                                    const Eigen::VectorXd& targets,
                                    double inv_norm,
                                    MlpGradient* gradient = nullptr) {
  const Eigen::Index n_samples = inputs.cols();
  if (n_samples == 0) throw std::invalid_argument("empty batch");
  if (static_cast<Eigen::Index>(actions.size()) != n_samples ||
      targets.size() != n_samples)
    throw std::invalid_argument("batch fields disagree on sample count");
  if (!targets.allFinite())
    throw std::invalid_argument("non-finite targets");
  for (int a : actions)
    if (a < 0 || a >= params.output_size())
      throw std::out_of_range("action index out of range");

  // Forward pass, keeping every layer's activation for backpropagation.
  std::vector<Eigen::MatrixXd> activations = {inputs};
  for (int l = 0; l < params.n_layers(); ++l) {
    Eigen::MatrixXd z =
        (params.weights[l] * activations.back()).colwise() + params.biases[l];
    if (l + 1 < params.n_layers()) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }

  const Eigen::MatrixXd& outputs = activations.back();
  double loss = 0.0;
  Eigen::MatrixXd delta =
      Eigen::MatrixXd::Zero(params.output_size(), n_samples);
  for (Eigen::Index s = 0; s < n_samples; ++s) {
    const double error = outputs(actions[s], s) - targets[s];
    loss += inv_norm * error * error;
    delta(actions[s], s) = 2.0 * inv_norm * error;
  }
  if (gradient == nullptr) return loss;

  *gradient = MlpParams::zeros(params.layer_sizes());
  for (int l = params.n_layers() - 1; l >= 0; --l) {
    gradient->weights[l] = delta * activations[l].transpose();
    gradient->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = params.weights[l].transpose() * delta;
      // Rectified-linear gate: zero where the hidden unit was inactive.
      delta.array() *= (activations[l].array() > 0.0).cast<double>();
    }
  }
  return loss;
}

struct AdamState {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_stab = 1e-8;
  long step = 0;
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;

  bool initialized() const { return !m_weights.empty(); }

  void initialize(const MlpParams& params) {
    m_weights.clear();
    v_weights.clear();
    m_biases.clear();
    v_biases.clear();
    for (const auto& w : params.weights) {
      m_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
      v_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : params.biases) {
      m_biases.push_back(Eigen::VectorXd::Zero(b.size()));
      v_biases.push_back(Eigen::VectorXd::Zero(b.size()));
    }
    step = 0;
  }
};

/// One Adam update with bias correction, in place.
inline void adam_step(MlpParams& params, AdamState& state,
                      const MlpGradient& gradient) {
  if (!params.same_shape(gradient))
    throw std::invalid_argument("gradient shape does not match parameters");
  if (!state.initialized()) state.initialize(params);

  ++state.step;
  const double correction1 = 1.0 - std::pow(state.beta1, state.step);
  const double correction2 = 1.0 - std::pow(state.beta2, state.step);

  auto update = [&](auto& value, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v.array() = state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square();
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    value.array() -=
        state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon_stab);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], state.m_weights[l], state.v_weights[l],
           gradient.weights[l]);
    update(params.biases[l], state.m_biases[l], state.v_biases[l],
           gradient.biases[l]);
  }
}

/// Polyak averaging: target <- tau * online + (1 - tau) * target.
inline void soft_update(const MlpParams& online, MlpParams& target,
                        double tau) {
  if (!online.same_shape(target))
    throw std::invalid_argument("online/target parameter shapes differ");
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("tau must be in [0, 1]");
  for (std::size_t l = 0; l < online.weights.size(); ++l) {
    target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

// ---------------------------------------------------------------------------
// Bit-exact binary serialization (native byte order).

namespace detail {

inline void write_i64(std::ostream& out, std::int64_t value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

inline std::int64_t read_i64(std::istream& in) {
  std::int64_t value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) throw std::runtime_error("truncated stream while reading integer");
  return value;
}

inline void write_f64(std::ostream& out, double value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

inline double read_f64(std::istream& in) {
  double value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) throw std::runtime_error("truncated stream while reading double");
  return value;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& matrix) {
  write_i64(out, matrix.rows());
  write_i64(out, matrix.cols());
  out.write(reinterpret_cast<const char*>(matrix.data()),
            static_cast<std::streamsize>(sizeof(double) * matrix.size()));
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
  const std::int64_t rows = read_i64(in);
  const std::int64_t cols = read_i64(in);
  if (rows < 0 || cols < 0 || rows * cols > (1LL << 32))
    throw std::runtime_error("corrupt matrix header");
  Eigen::MatrixXd matrix(rows, cols);
  in.read(reinterpret_cast<char*>(matrix.data()),
          static_cast<std::streamsize>(sizeof(double) * matrix.size()));
  if (!in) throw std::runtime_error("truncated stream while reading matrix");
  return matrix;
}

inline void write_vector(std::ostream& out, const Eigen::VectorXd& vector) {
  write_matrix(out, vector);
}

inline Eigen::VectorXd read_vector(std::istream& in) {
  const Eigen::MatrixXd matrix = read_matrix(in);
  if (matrix.cols() != 1) throw std::runtime_error("expected a column vector");
  return matrix.col(0);
}

}  // namespace detail

inline void write_mlp(std::ostream& out, const MlpParams& params) {
  detail::write_i64(out, params.n_layers());
  for (const auto& w : params.weights) detail::write_matrix(out, w);
  for (const auto& b : params.biases) detail::write_vector(out, b);
}

inline MlpParams read_mlp(std::istream& in) {
  const std::int64_t layers = detail::read_i64(in);
  if (layers < 1 || layers > 1024)
    throw std::runtime_error("corrupt network header");
  MlpParams params;
  for (std::int64_t l = 0; l < layers; ++l)
    params.weights.push_back(detail::read_matrix(in));
  for (std::int64_t l = 0; l < layers; ++l)
    params.biases.push_back(detail::read_vector(in));
  return params;
}

inline void write_adam(std::ostream& out, const AdamState& state) {
  detail::write_f64(out, state.learning_rate);
  detail::write_f64(out, state.beta1);
  detail::write_f64(out, state.beta2);
  detail::write_f64(out, state.epsilon_stab);
  detail::write_i64(out, state.step);
  detail::write_i64(out, static_cast<std::int64_t>(state.m_weights.size()));
  for (const auto& m : state.m_weights) detail::write_matrix(out, m);
  for (const auto& v : state.v_weights) detail::write_matrix(out, v);
  for (const auto& m : state.m_biases) detail::write_vector(out, m);
  for (const auto& v : state.v_biases) detail::write_vector(out, v);
}

inline AdamState read_adam(std::istream& in) {
  AdamState state;
  state.learning_rate = detail::read_f64(in);
  state.beta1 = detail::read_f64(in);
  state.beta2 = detail::read_f64(in);
  state.epsilon_stab = detail::read_f64(in);
  state.step = detail::read_i64(in);
  const std::int64_t layers = detail::read_i64(in);
  if (layers < 0 || layers > 1024)
    throw std::runtime_error("corrupt optimizer header");
  for (std::int64_t l = 0; l < layers; ++l)
    state.m_weights.push_back(detail::read_matrix(in));
  for (std::int64_t l = 0; l < layers; ++l)
    state.v_weights.push_back(detail::read_matrix(in));
  for (std::int64_t l = 0; l < layers; ++l)
    state.m_biases.push_back(detail::read_vector(in));
  for (std::int64_t l = 0; l < layers; ++l)
    state.v_biases.push_back(detail::read_vector(in));
  return state;
}

}  // namespace seda
