#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bacon/errors.hpp"
#include "bacon/rng.hpp"

namespace bacon::network {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Coordinates are always double precision, one column per sample (d_in x batch).
using Inputs = Eigen::MatrixXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct NetworkSpec {
  int input_dim = 1;
  int hidden_dim = 32;
  int num_sine_layers = 1;
  int output_dim = 1;
  // Per sine layer, in cycles per unit interval along each input axis.
  std::vector<double> layer_bandwidths{1.0};
  // Sine-layer indices that carry an output projection. Sorted, unique.
  std::vector<int> output_head_layers{0};
  double period = 1.0;
  bool quantize_frequencies = true;

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1 || num_sine_layers < 1 || output_dim < 1)
      throw InvalidInput("NetworkSpec: dimensions and layer count must be positive");
    if (static_cast<int>(layer_bandwidths.size()) != num_sine_layers)
      throw InvalidInput("NetworkSpec: expected " + std::to_string(num_sine_layers) + " layer bandwidths, got " +
                         std::to_string(layer_bandwidths.size()));
    for (double b : layer_bandwidths)
      if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidInput("NetworkSpec: layer bandwidths must be finite and >= 0");
    if (output_head_layers.empty()) throw InvalidInput("NetworkSpec: at least one output head is required");
    for (std::size_t i = 0; i < output_head_layers.size(); ++i) {
      const int h = output_head_layers[i];
      if (h < 0 || h >= num_sine_layers) throw InvalidInput("NetworkSpec: head layer " + std::to_string(h) + " out of range");
      if (i > 0 && h <= output_head_layers[i - 1]) throw InvalidInput("NetworkSpec: head layers must be strictly increasing");
    }
    if (!(period > 0.0) || !std::isfinite(period)) throw InvalidInput("NetworkSpec: period must be positive");
  }

  double max_bandwidth() const { return std::accumulate(layer_bandwidths.begin(), layer_bandwidths.end(), 0.0); }
  int num_heads() const { return static_cast<int>(output_head_layers.size()); }
  int first_head() const { return output_head_layers.front(); }
  int deepest_head() const { return output_head_layers.back(); }

  bool is_head(int layer) const {
    return std::binary_search(output_head_layers.begin(), output_head_layers.end(), layer);
  }

  // Position of `layer` in output_head_layers.
  std::size_t head_slot(int layer) const {
    auto it = std::lower_bound(output_head_layers.begin(), output_head_layers.end(), layer);
    if (it == output_head_layers.end() || *it != layer)
      throw InvalidInput("layer " + std::to_string(layer) + " is not a declared output head");
    return static_cast<std::size_t>(it - output_head_layers.begin());
  }
};

// Sum of layer bandwidths up to and including `head_layer`: the highest
// frequency (cycles per unit, per axis) that output can contain.
inline double cumulative_bandwidth(const NetworkSpec& spec, int head_layer) {
  if (head_layer < 0 || head_layer >= spec.num_sine_layers)
    throw InvalidInput("cumulative_bandwidth: layer " + std::to_string(head_layer) + " out of range");
  return std::accumulate(spec.layer_bandwidths.begin(), spec.layer_bandwidths.begin() + head_layer + 1, 0.0);
}

template <class T>
struct BaconParams {
  // Frozen sine frequencies, radians per unit, d_h x d_in per layer. Kept in
  // double for every scalar type so periodic argument reduction stays exact.
  std::vector<Eigen::MatrixXd> frequencies;
  std::vector<Vector<T>> phases;
  // Entry i-1 holds W_i / b_i for sine layer i >= 1.
  std::vector<Matrix<T>> hidden_weights;
  std::vector<Vector<T>> hidden_biases;
  // One projection per output head, in output_head_layers order.
  std::vector<Matrix<T>> head_weights;
  std::vector<Vector<T>> head_biases;

  template <class U>
  BaconParams<U> cast() const {
    BaconParams<U> out;
    out.frequencies = frequencies;
    for (const auto& v : phases) out.phases.push_back(v.template cast<U>());
    for (const auto& m : hidden_weights) out.hidden_weights.push_back(m.template cast<U>());
    for (const auto& v : hidden_biases) out.hidden_biases.push_back(v.template cast<U>());
    for (const auto& m : head_weights) out.head_weights.push_back(m.template cast<U>());
    for (const auto& v : head_biases) out.head_biases.push_back(v.template cast<U>());
    return out;
  }
};

// Gradients of the trainable tensors. There is deliberately no member for the
// frequencies: they are frozen and receive no gradient.
template <class T>
struct BaconGrads {
  std::vector<Vector<T>> phases;
  std::vector<Matrix<T>> hidden_weights;
  std::vector<Vector<T>> hidden_biases;
  std::vector<Matrix<T>> head_weights;
  std::vector<Vector<T>> head_biases;

  static BaconGrads zeros_like(const BaconParams<T>& p) {
    BaconGrads g;
    for (const auto& v : p.phases) g.phases.push_back(Vector<T>::Zero(v.size()));
    for (const auto& m : p.hidden_weights) g.hidden_weights.push_back(Matrix<T>::Zero(m.rows(), m.cols()));
    for (const auto& v : p.hidden_biases) g.hidden_biases.push_back(Vector<T>::Zero(v.size()));
    for (const auto& m : p.head_weights) g.head_weights.push_back(Matrix<T>::Zero(m.rows(), m.cols()));
    for (const auto& v : p.head_biases) g.head_biases.push_back(Vector<T>::Zero(v.size()));
    return g;
  }

  BaconGrads& operator+=(const BaconGrads& o) {
    auto add = [](auto& a, const auto& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(phases, o.phases);
    add(hidden_weights, o.hidden_weights);
    add(hidden_biases, o.hidden_biases);
    add(head_weights, o.head_weights);
    add(head_biases, o.head_biases);
    return *this;
  }
};

namespace detail {

template <class Container, class Fn>
void each_tensor(Container& c, Fn&& fn) {
  for (auto& t : c) fn(std::span(t.data(), static_cast<std::size_t>(t.size())));
}

}  // namespace detail

// Flat views of every trainable tensor, in a fixed order shared by params,
// gradients and optimizer state: phases, hidden weights, hidden biases, head
// weights, head biases.
template <class T>
std::vector<std::span<T>> trainable_tensors(BaconParams<T>& p) {
  std::vector<std::span<T>> out;
  auto push = [&](std::span<T> s) { out.push_back(s); };
  detail::each_tensor(p.phases, push);
  detail::each_tensor(p.hidden_weights, push);
  detail::each_tensor(p.hidden_biases, push);
  detail::each_tensor(p.head_weights, push);
  detail::each_tensor(p.head_biases, push);
  return out;
}

template <class T>
std::vector<std::span<T>> trainable_tensors(BaconGrads<T>& g) {
  std::vector<std::span<T>> out;
  auto push = [&](std::span<T> s) { out.push_back(s); };
  detail::each_tensor(g.phases, push);
  detail::each_tensor(g.hidden_weights, push);
  detail::each_tensor(g.hidden_biases, push);
  detail::each_tensor(g.head_weights, push);
  detail::each_tensor(g.head_biases, push);
  return out;
}

template <class T>
struct ForwardTrace {
  Eigen::Index batch = 0;
  // Reduced sine arguments omega_i x + phi_i, per evaluated layer.
  std::vector<Matrix<T>> sine_args;
  std::vector<Matrix<T>> sines;
  // W_i z_{i-1} + b_i; entry 0 is empty.
  std::vector<Matrix<T>> post_linear;
  std::vector<Matrix<T>> hidden;
  // y per head, in output_head_layers order.
  std::vector<Matrix<T>> heads;

  int depth() const { return static_cast<int>(sines.size()); }
};

// --- initialization -------------------------------------------------------

// Frequency draws for one layer. With quantization, entries are integer
// multiples of 2 pi / T drawn uniformly from the bins with |k| / T <= B_i.
inline Eigen::MatrixXd sample_frequencies(const NetworkSpec& spec, double bandwidth, numerics::Rng& rng) {
  Eigen::MatrixXd w(spec.hidden_dim, spec.input_dim);
  if (spec.quantize_frequencies) {
    const auto max_bin = static_cast<std::int64_t>(std::floor(bandwidth * spec.period + 1e-9));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = kTwoPi * static_cast<double>(rng.uniform_int(-max_bin, max_bin)) / spec.period;
  } else {
    const double lim = kTwoPi * bandwidth;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-lim, lim);
  }
  return w;
}

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, numerics::Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

struct LinearInit {
  double weight_bound;
  double bias_bound;
};

inline BaconParams<double> init_with(const NetworkSpec& spec, numerics::Rng& rng, LinearInit linear) {
  spec.validate();
  auto freq_rng = rng.fork(0);
  auto phase_rng = rng.fork(1);
  auto hidden_rng = rng.fork(2);
  auto head_rng = rng.fork(3);
  const int dh = spec.hidden_dim;
  BaconParams<double> p;
  for (int i = 0; i < spec.num_sine_layers; ++i) {
    p.frequencies.push_back(sample_frequencies(spec, spec.layer_bandwidths[i], freq_rng));
    Eigen::VectorXd phi(dh);
    for (int j = 0; j < dh; ++j) phi(j) = phase_rng.uniform(-std::numbers::pi, std::numbers::pi);
    p.phases.push_back(phi);
  }
  for (int i = 1; i < spec.num_sine_layers; ++i) {
    p.hidden_weights.push_back(uniform_matrix(dh, dh, linear.weight_bound, hidden_rng));
    p.hidden_biases.push_back(linear.bias_bound > 0 ? Eigen::VectorXd(uniform_matrix(dh, 1, linear.bias_bound, hidden_rng))
                                                    : Eigen::VectorXd::Zero(dh));
  }
  for (int h = 0; h < spec.num_heads(); ++h) {
    p.head_weights.push_back(uniform_matrix(spec.output_dim, dh, linear.weight_bound, head_rng));
    p.head_biases.push_back(Eigen::VectorXd::Zero(spec.output_dim));
  }
  return p;
}

// Band-limited initialization: omega_i ~ U(-2 pi B_i, 2 pi B_i) (snapped to the
// 2 pi / T grid when quantizing), phi_i ~ U(-pi, pi), W ~ U(-sqrt(6/d_h),
// sqrt(6/d_h)) for hidden and head weights, zero biases. Random streams are
// forked from `rng` as 0: frequencies, 1: phases, 2: hidden layers, 3: heads;
// tensors are filled layer by layer in row-major order.
inline BaconParams<double> init_network(const NetworkSpec& spec, numerics::Rng& rng) {
  return init_with(spec, rng, {std::sqrt(6.0 / spec.hidden_dim), 0.0});
}

// Conventional multiplicative filter network initialization:
// W ~ U(-sqrt(1/d_h), sqrt(1/d_h)) and b ~ U(-1/sqrt(d_h), 1/sqrt(d_h)).
// Frequencies come from the spec's bandwidths as usual.
inline BaconParams<double> init_network_mfn_reference(const NetworkSpec& spec, numerics::Rng& rng) {
  const double bound = std::sqrt(1.0 / spec.hidden_dim);
  return init_with(spec, rng, {bound, bound});
}

// --- evaluation -----------------------------------------------------------

namespace detail {

template <class T>
void check_params(const BaconParams<T>& p, const NetworkSpec& spec) {
  const auto layers = static_cast<std::size_t>(spec.num_sine_layers);
  const auto heads = static_cast<std::size_t>(spec.num_heads());
  if (p.frequencies.size() != layers || p.phases.size() != layers || p.hidden_weights.size() + 1 != layers ||
      p.hidden_biases.size() + 1 != layers || p.head_weights.size() != heads || p.head_biases.size() != heads)
    throw InvalidInput("parameters do not match the network spec");
  for (std::size_t i = 0; i < layers; ++i)
    if (p.frequencies[i].rows() != spec.hidden_dim || p.frequencies[i].cols() != spec.input_dim ||
        p.phases[i].size() != spec.hidden_dim)
      throw InvalidInput("sine layer " + std::to_string(i) + " has the wrong shape");
  for (const auto& w : p.hidden_weights)
    if (w.rows() != spec.hidden_dim || w.cols() != spec.hidden_dim) throw InvalidInput("hidden weight has the wrong shape");
  for (const auto& w : p.head_weights)
    if (w.rows() != spec.output_dim || w.cols() != spec.hidden_dim) throw InvalidInput("head weight has the wrong shape");
}

inline void check_inputs(const NetworkSpec& spec, const Inputs& x) {
  if (x.rows() != spec.input_dim)
    throw InvalidInput("inputs have " + std::to_string(x.rows()) + " rows, expected " + std::to_string(spec.input_dim));
  if (x.cols() == 0) throw InvalidInput("empty input batch");
  if (!x.allFinite()) throw InvalidInput("inputs must be finite");
}

// omega x reduced to one period in double, then phi added in the working type.
// Quantized frequencies are handled as integer bin counts k, so the product
// k x / T is reduced to a fractional cycle before scaling by 2 pi. Shifting x
// by T then changes the cycle count by an integer and, on dyadic grids, leaves
// the reduced argument bit-identical.
template <class T>
Matrix<T> reduced_arguments(const Eigen::MatrixXd& freq, const Inputs& x, const NetworkSpec& spec) {
  if (!spec.quantize_frequencies) {
    Eigen::MatrixXd raw(freq.rows(), x.cols());
    raw.noalias() = freq * x;
    raw.array() -= kTwoPi * (raw.array() * (1.0 / kTwoPi)).round();
    return raw.template cast<T>();
  }
  const Eigen::MatrixXd bins = (freq * (spec.period / kTwoPi)).array().round().matrix();
  const Eigen::Index rows = bins.rows(), din = bins.cols();
  const double inv_period = 1.0 / spec.period;
  const bool unit = spec.period == 1.0;
  Matrix<T> out(rows, x.cols());
  Eigen::ArrayXd acc(rows);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    acc = bins.col(0).array() * x(0, c);
    for (Eigen::Index a = 1; a < din; ++a) acc += bins.col(a).array() * x(a, c);
    if (!unit) acc *= inv_period;
    // floor(v + 0.5) sends exact half cycles to -0.5 whatever the integer part.
    acc -= (acc + 0.5).floor();
    out.col(c) = (acc * kTwoPi).template cast<T>();
  }
  return out;
}

template <class T>
Matrix<T> sine_arguments(const Eigen::MatrixXd& freq, const Vector<T>& phase, const Inputs& x, const NetworkSpec& spec) {
  Matrix<T> out = reduced_arguments<T>(freq, x, spec);
  out.colwise() += phase;
  return out;
}

}  // namespace detail

// Full forward pass through the deepest head, keeping every intermediate.
//   z_0 = sin(omega_0 x + phi_0)
//   z_i = sin(omega_i x + phi_i) * (W_i z_{i-1} + b_i)
//   y_i = W_out_i z_i + b_out_i
// Layers past the deepest head feed no output and are not evaluated.
// Phase-free sine arguments for a fixed input batch. Frequencies are frozen, so
// a batch reused across training steps only needs these once.
template <class T>
struct SineBasis {
  Inputs x;
  std::vector<Matrix<T>> args;

  bool matches(const Inputs& other) const {
    return x.rows() == other.rows() && x.cols() == other.cols() && x == other;
  }
};

template <class T>
SineBasis<T> sine_basis(const BaconParams<T>& p, const NetworkSpec& spec, const Inputs& x) {
  detail::check_params(p, spec);
  detail::check_inputs(spec, x);
  SineBasis<T> b;
  b.x = x;
  for (int i = 0; i <= spec.deepest_head(); ++i) b.args.push_back(detail::reduced_arguments<T>(p.frequencies[i], x, spec));
  return b;
}

template <class T>
ForwardTrace<T> forward(const BaconParams<T>& p, const NetworkSpec& spec, const Inputs& x, const SineBasis<T>* basis = nullptr) {
  detail::check_params(p, spec);
  detail::check_inputs(spec, x);
  if (basis && (static_cast<int>(basis->args.size()) != spec.deepest_head() + 1 || !basis->matches(x)))
    throw InvalidInput("forward: sine basis was built for different inputs");
  const int depth = spec.deepest_head() + 1;
  ForwardTrace<T> tr;
  tr.batch = x.cols();
  tr.sine_args.resize(depth);
  tr.sines.resize(depth);
  tr.post_linear.resize(depth);
  tr.hidden.resize(depth);
  tr.heads.resize(spec.num_heads());
  for (int i = 0; i < depth; ++i) {
    if (basis) {
      tr.sine_args[i] = basis->args[static_cast<std::size_t>(i)];
      tr.sine_args[i].colwise() += p.phases[i];
    } else {
      tr.sine_args[i] = detail::sine_arguments<T>(p.frequencies[i], p.phases[i], x, spec);
    }
    tr.sines[i] = tr.sine_args[i].array().sin();
    if (i == 0) {
      tr.hidden[0] = tr.sines[0];
    } else {
      tr.post_linear[i].noalias() = p.hidden_weights[i - 1] * tr.hidden[i - 1];
      tr.post_linear[i].colwise() += p.hidden_biases[i - 1];
      tr.hidden[i] = tr.sines[i].cwiseProduct(tr.post_linear[i]);
    }
    if (spec.is_head(i)) {
      const auto s = spec.head_slot(i);
      tr.heads[s].noalias() = p.head_weights[s] * tr.hidden[i];
      tr.heads[s].colwise() += p.head_biases[s];
    }
  }
  return tr;
}

// Evaluates layers 0..head_layer and that head's projection only. Parameters of
// deeper layers are never read.
template <class T>
Matrix<T> evaluate_truncated(const BaconParams<T>& p, const NetworkSpec& spec, const Inputs& x, int head_layer) {
  const auto slot = spec.head_slot(head_layer);
  detail::check_params(p, spec);
  detail::check_inputs(spec, x);
  Matrix<T> z;
  for (int i = 0; i <= head_layer; ++i) {
    Matrix<T> g = detail::sine_arguments<T>(p.frequencies[i], p.phases[i], x, spec).array().sin();
    if (i == 0) {
      z = std::move(g);
    } else {
      Matrix<T> a = p.hidden_weights[i - 1] * z;
      a.colwise() += p.hidden_biases[i - 1];
      z = g.cwiseProduct(a);
    }
  }
  Matrix<T> y = p.head_weights[slot] * z;
  y.colwise() += p.head_biases[slot];
  return y;
}

// Closed-form gradients of sum_h <head_grads[h], y_h> with respect to every
// trainable tensor. An empty head_grads entry counts as zero.
template <class T>
BaconGrads<T> backward(const BaconParams<T>& p, const NetworkSpec& spec, const ForwardTrace<T>& tr,
                       const std::vector<Matrix<T>>& head_grads) {
  detail::check_params(p, spec);
  const int depth = spec.deepest_head() + 1;
  if (tr.depth() != depth || static_cast<int>(tr.heads.size()) != spec.num_heads())
    throw InvalidInput("backward: trace does not match the network spec");
  if (static_cast<int>(head_grads.size()) != spec.num_heads())
    throw InvalidInput("backward: expected one gradient entry per head");
  for (int i = 0; i < depth; ++i)
    if (tr.hidden[i].rows() != spec.hidden_dim || tr.hidden[i].cols() != tr.batch)
      throw InvalidInput("backward: stale trace (hidden state shape mismatch)");
  for (std::size_t s = 0; s < head_grads.size(); ++s)
    if (head_grads[s].size() != 0 && (head_grads[s].rows() != spec.output_dim || head_grads[s].cols() != tr.batch))
      throw InvalidInput("backward: head gradient " + std::to_string(s) + " has the wrong shape");

  auto g = BaconGrads<T>::zeros_like(p);
  Matrix<T> dz;
  for (int i = depth - 1; i >= 0; --i) {
    if (spec.is_head(i)) {
      const auto s = spec.head_slot(i);
      const auto& dy = head_grads[s];
      if (dy.size() != 0) {
        g.head_weights[s].noalias() = dy * tr.hidden[i].transpose();
        g.head_biases[s] = dy.rowwise().sum();
        if (dz.size() == 0)
          dz.noalias() = p.head_weights[s].transpose() * dy;
        else
          dz.noalias() += p.head_weights[s].transpose() * dy;
      }
    }
    if (dz.size() == 0) continue;
    Matrix<T> dsine;
    if (i == 0) {
      dsine = std::move(dz);
      dz.resize(0, 0);
    } else {
      dsine = dz.cwiseProduct(tr.post_linear[i]);
      Matrix<T> dpost = dz.cwiseProduct(tr.sines[i]);
      g.hidden_weights[i - 1].noalias() = dpost * tr.hidden[i - 1].transpose();
      g.hidden_biases[i - 1] = dpost.rowwise().sum();
      dz.noalias() = p.hidden_weights[i - 1].transpose() * dpost;
    }
    g.phases[i] = (dsine.array() * tr.sine_args[i].array().cos()).rowwise().sum();
  }
  return g;
}

// Evaluates one head over a large point set in fixed-size chunks.
template <class T>
Eigen::MatrixXd evaluate_head_chunked(const BaconParams<T>& p, const NetworkSpec& spec, const Inputs& x, int head_layer,
                                      Eigen::Index chunk = 16384) {
  Eigen::MatrixXd out(spec.output_dim, x.cols());
  for (Eigen::Index start = 0; start < x.cols(); start += chunk) {
    const auto n = std::min(chunk, x.cols() - start);
    out.middleCols(start, n) = evaluate_truncated(p, spec, x.middleCols(start, n), head_layer).template cast<double>();
  }
  return out;
}

}  // namespace bacon::network
