#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "bacon/errors.hpp"
#include "bacon/network.hpp"
#include "bacon/rng.hpp"
#include "bacon/special.hpp"

namespace bacon::spectral {

using network::BaconParams;
using network::Inputs;
using network::NetworkSpec;

struct SineTerm {
  double amplitude = 0.0;
  Eigen::VectorXd frequency;  // radians per unit
  double phase = 0.0;

  double operator()(const Eigen::VectorXd& x) const { return amplitude * std::sin(frequency.dot(x) + phase); }
};

// a * b as two sines (product-to-sum):
//   0.5 a b sin((w_a + w_b) x + p_a + p_b - pi/2)
//   0.5 a b sin((w_a - w_b) x + p_a - p_b + pi/2)
inline std::pair<SineTerm, SineTerm> sine_product_expand(const SineTerm& a, const SineTerm& b) {
  if (a.frequency.size() != b.frequency.size()) throw InvalidInput("sine_product_expand: frequency dimensions differ");
  const double amp = 0.5 * a.amplitude * b.amplitude;
  constexpr double half_pi = std::numbers::pi / 2.0;
  return {SineTerm{amp, a.frequency + b.frequency, a.phase + b.phase - half_pi},
          SineTerm{amp, a.frequency - b.frequency, a.phase - b.phase + half_pi}};
}

// Flat sum of sines plus a constant offset (the head bias). Terms are stored
// column-wise: frequencies is d_in x size().
struct SineExpansion {
  int head_layer = 0;
  int output_index = 0;
  std::vector<double> amplitudes;
  Eigen::MatrixXd frequencies;
  std::vector<double> phases;
  double offset = 0.0;

  std::size_t size() const { return amplitudes.size(); }

  SineTerm term(std::size_t i) const {
    return {amplitudes[i], frequencies.col(static_cast<Eigen::Index>(i)), phases[i]};
  }

  // One value per column of x.
  Eigen::VectorXd evaluate(const Inputs& x) const {
    if (x.rows() != frequencies.rows()) throw InvalidInput("SineExpansion::evaluate: input dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.cols(), offset);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Eigen::RowVectorXd args = x.col(c).transpose() * frequencies;
      double s = 0.0;
      for (std::size_t i = 0; i < size(); ++i) s += amplitudes[i] * std::sin(args(static_cast<Eigen::Index>(i)) + phases[i]);
      out(c) += s;
    }
    return out;
  }
};

// Number of sine terms in a head at depth n_layers (layer index n_layers - 1).
//   with bias:    sum_{i=0}^{N-1} 2^i d_h^{i+1}
//   without bias: 2^{N-1} d_h^N
inline std::uint64_t predicted_sine_count(int n_layers, std::uint64_t d_h, bool with_bias = true) {
  if (n_layers < 1 || d_h < 1) throw InvalidInput("predicted_sine_count: N_L and d_h must be >= 1");
  auto mul = [](std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw CapacityError("predicted_sine_count: 64-bit overflow");
    return r;
  };
  auto add = [](std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw CapacityError("predicted_sine_count: 64-bit overflow");
    return r;
  };
  std::uint64_t term = d_h;  // 2^i d_h^{i+1}
  std::uint64_t total = d_h;
  for (int i = 1; i < n_layers; ++i) {
    term = mul(mul(term, 2), d_h);
    total = add(total, term);
  }
  return with_bias ? total : term;
}

inline constexpr std::uint64_t kMaxExpansionTerms = 10'000'000;

// Expands output `output_index` of the head at `head_layer` into a flat sine
// sum by structural recursion. Unit j of layer i carries
//   g_i[j] * (sum_k W_i[j,k] z_{i-1}[k] + b_i[j]),
// where every term of z_{i-1}[k] multiplies g_i[j] into two sines and the bias
// contributes one. Duplicate frequencies are kept, as are zero amplitudes.
template <class T>
SineExpansion expand_network(const BaconParams<T>& p, const NetworkSpec& spec, int head_layer, int output_index = 0) {
  const auto slot = spec.head_slot(head_layer);
  network::detail::check_params(p, spec);
  if (output_index < 0 || output_index >= spec.output_dim) throw InvalidInput("expand_network: output index out of range");
  const auto total = predicted_sine_count(head_layer + 1, static_cast<std::uint64_t>(spec.hidden_dim));
  if (total > kMaxExpansionTerms)
    throw CapacityError("expand_network: " + std::to_string(total) + " terms exceeds the limit of " +
                        std::to_string(kMaxExpansionTerms));

  const int dh = spec.hidden_dim;
  const int din = spec.input_dim;
  // Per unit term lists, each stored as parallel arrays.
  struct Terms {
    std::vector<double> amp;
    std::vector<double> freq;  // din per term
    std::vector<double> phase;
  };
  std::vector<Terms> units(dh);
  for (int j = 0; j < dh; ++j) {
    units[j].amp.push_back(1.0);
    for (int d = 0; d < din; ++d) units[j].freq.push_back(p.frequencies[0](j, d));
    units[j].phase.push_back(static_cast<double>(p.phases[0](j)));
  }
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (int i = 1; i <= head_layer; ++i) {
    std::vector<Terms> next(dh);
    const auto& W = p.hidden_weights[i - 1];
    const auto& b = p.hidden_biases[i - 1];
    for (int j = 0; j < dh; ++j) {
      Terms& out = next[j];
      const double gp = static_cast<double>(p.phases[i](j));
      const auto gw = p.frequencies[i].row(j);
      for (int k = 0; k < dh; ++k) {
        const double w = static_cast<double>(W(j, k));
        const Terms& in = units[k];
        for (std::size_t t = 0; t < in.amp.size(); ++t) {
          const double amp = 0.5 * w * in.amp[t];
          const double* f = &in.freq[t * din];
          out.amp.push_back(amp);
          for (int d = 0; d < din; ++d) out.freq.push_back(gw(d) + f[d]);
          out.phase.push_back(gp + in.phase[t] - half_pi);
          out.amp.push_back(amp);
          for (int d = 0; d < din; ++d) out.freq.push_back(gw(d) - f[d]);
          out.phase.push_back(gp - in.phase[t] + half_pi);
        }
      }
      out.amp.push_back(static_cast<double>(b(j)));
      for (int d = 0; d < din; ++d) out.freq.push_back(gw(d));
      out.phase.push_back(gp);
    }
    units = std::move(next);
  }

  SineExpansion e;
  e.head_layer = head_layer;
  e.output_index = output_index;
  e.offset = static_cast<double>(p.head_biases[slot](output_index));
  e.frequencies.resize(din, static_cast<Eigen::Index>(total));
  e.amplitudes.reserve(total);
  e.phases.reserve(total);
  Eigen::Index col = 0;
  for (int j = 0; j < dh; ++j) {
    const double w = static_cast<double>(p.head_weights[slot](output_index, j));
    const Terms& u = units[j];
    for (std::size_t t = 0; t < u.amp.size(); ++t, ++col) {
      e.amplitudes.push_back(w * u.amp[t]);
      for (int d = 0; d < din; ++d) e.frequencies(d, col) = u.freq[t * din + d];
      e.phases.push_back(u.phase[t]);
    }
  }
  return e;
}

// Combines terms that describe the same spectral line. Frequencies are
// canonicalized so the first nonzero component is positive (sin(-wx + p) =
// sin(wx - p + pi)) and equal lines are summed as phasors. Only meant for
// plotting spectra; the count theorem applies to the unmerged expansion.
inline SineExpansion merge_terms(const SineExpansion& e, double frequency_tolerance = 1e-9) {
  using Key = std::vector<long long>;
  std::map<Key, std::pair<Eigen::VectorXd, std::complex<double>>> lines;
  const auto din = e.frequencies.rows();
  for (std::size_t i = 0; i < e.size(); ++i) {
    Eigen::VectorXd f = e.frequencies.col(static_cast<Eigen::Index>(i));
    double phase = e.phases[i];
    double amp = e.amplitudes[i];
    Eigen::Index lead = 0;
    while (lead < din && std::abs(f(lead)) <= frequency_tolerance) ++lead;
    if (lead < din && f(lead) < 0) {
      f = -f;
      phase = std::numbers::pi - phase;
    }
    if (lead == din) {
      // constant term: value amp*sin(phase), stored as a phasor at phase pi/2
      amp *= std::sin(phase);
      phase = std::numbers::pi / 2.0;
      f.setZero();
    }
    Key key(static_cast<std::size_t>(din));
    for (Eigen::Index d = 0; d < din; ++d) key[static_cast<std::size_t>(d)] = std::llround(f(d) / frequency_tolerance);
    auto& slot = lines[key];
    if (slot.first.size() == 0) slot.first = f;
    slot.second += std::polar(amp, phase);
  }
  SineExpansion out;
  out.head_layer = e.head_layer;
  out.output_index = e.output_index;
  out.offset = e.offset;
  out.frequencies.resize(din, static_cast<Eigen::Index>(lines.size()));
  Eigen::Index col = 0;
  for (const auto& [key, line] : lines) {
    out.frequencies.col(col++) = line.first;
    out.amplitudes.push_back(std::abs(line.second));
    out.phases.push_back(std::arg(line.second));
  }
  return out;
}

// --- frequency distribution ------------------------------------------------

// Variance of one frozen frequency entry (radians^2). Quantized entries are
// uniform over the 2K+1 bins 2 pi k / T, |k| <= K = floor(B T).
inline double frequency_entry_variance(double bandwidth, double period, bool quantized) {
  if (quantized) {
    const double k = std::floor(bandwidth * period + 1e-9);
    const double step = network::kTwoPi / period;
    return step * step * k * (k + 1.0) / 3.0;
  }
  const double lim = network::kTwoPi * bandwidth;
  return lim * lim / 3.0;
}

struct FrequencyStats {
  // p_M(m), m = 0..N_L-1: fraction of sines whose frequency sums the layers m..N_L-1.
  std::vector<double> layer_count_distribution;
  // Mean over layers of the per-entry frequency variance.
  double entry_variance = 0.0;
  // E[M] under p_M.
  double expected_m = 0.0;
  // E[N_L - M], the expected number of summed layer frequencies.
  double expected_terms = 0.0;
  // entry_variance * E[N_L - M].
  double predicted_variance = 0.0;
  // sum_m p_M(m) sum_{i >= m} Var_i; equals predicted_variance for equal bandwidths.
  double layerwise_variance = 0.0;
  // entry_variance * E[M]: the alternative weighting by M itself, kept for comparison.
  double literal_formula_variance = 0.0;
  // True when the bandwidths differ across layers and predicted_variance uses the mean.
  bool approximate = false;
};

// Distribution of frequencies (per input axis, radians) across all sines of
// the final layer's expansion.
inline FrequencyStats predicted_frequency_variance(const NetworkSpec& spec) {
  spec.validate();
  const int n = spec.num_sine_layers;
  const double dh = static_cast<double>(spec.hidden_dim);
  FrequencyStats s;
  // Weights 2^{N-1-m} d_h^{N-m}, normalized in log space to avoid overflow.
  std::vector<double> logw(n);
  for (int m = 0; m < n; ++m) logw[m] = (n - 1 - m) * std::log(2.0) + (n - m) * std::log(dh);
  const double top = logw[0];
  double norm = 0.0;
  for (int m = 0; m < n; ++m) norm += std::exp(logw[m] - top);
  s.layer_count_distribution.resize(n);
  for (int m = 0; m < n; ++m) s.layer_count_distribution[m] = std::exp(logw[m] - top) / norm;

  std::vector<double> var(n);
  for (int i = 0; i < n; ++i) var[i] = frequency_entry_variance(spec.layer_bandwidths[i], spec.period, spec.quantize_frequencies);
  for (int i = 0; i < n; ++i) s.entry_variance += var[i] / n;
  for (int i = 1; i < n; ++i)
    if (var[i] != var[0]) s.approximate = true;

  std::vector<double> tail(n + 1, 0.0);
  for (int i = n - 1; i >= 0; --i) tail[i] = tail[i + 1] + var[i];
  for (int m = 0; m < n; ++m) {
    const double p = s.layer_count_distribution[m];
    s.expected_m += m * p;
    s.expected_terms += (n - m) * p;
    s.layerwise_variance += p * tail[m];
  }
  s.predicted_variance = s.entry_variance * s.expected_terms;
  s.literal_formula_variance = s.entry_variance * s.expected_m;
  return s;
}

// One draw of the compound frequency sum: M ~ p_M, then the signed sum of one
// fresh entry from each of the layers M..N_L-1 (first input axis).
inline double sample_compound_frequency(const NetworkSpec& spec, const FrequencyStats& stats, numerics::Rng& rng) {
  const int n = spec.num_sine_layers;
  double u = rng.uniform();
  int m = 0;
  while (m < n - 1 && u >= stats.layer_count_distribution[static_cast<std::size_t>(m)]) u -= stats.layer_count_distribution[static_cast<std::size_t>(m++)];
  double w = 0.0;
  for (int i = m; i < n; ++i) {
    const double b = spec.layer_bandwidths[static_cast<std::size_t>(i)];
    double entry;
    if (spec.quantize_frequencies) {
      const auto k = static_cast<std::int64_t>(std::floor(b * spec.period + 1e-9));
      entry = network::kTwoPi * static_cast<double>(rng.uniform_int(-k, k)) / spec.period;
    } else {
      entry = rng.uniform(-network::kTwoPi * b, network::kTwoPi * b);
    }
    w += rng.uniform() < 0.5 ? -entry : entry;
  }
  return w;
}

inline double monte_carlo_frequency_variance(const NetworkSpec& spec, std::size_t draws, numerics::Rng& rng) {
  if (draws < 2) throw InvalidInput("monte_carlo_frequency_variance: need at least two draws");
  const auto stats = predicted_frequency_variance(spec);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    const double w = sample_compound_frequency(spec, stats, rng);
    sum += w;
    sumsq += w * w;
  }
  const double nd = static_cast<double>(draws);
  return (sumsq - sum * sum / nd) / (nd - 1.0);
}

// Pooled variance of the symbolic term frequencies (first axis) of the deepest
// head over independent initializations. Counts terms, not amplitudes.
inline double ensemble_frequency_variance(const NetworkSpec& spec, int realizations, numerics::Rng& rng) {
  if (realizations < 1) throw InvalidInput("ensemble_frequency_variance: need at least one realization");
  double sum = 0.0, sumsq = 0.0, count = 0.0;
  for (int r = 0; r < realizations; ++r) {
    // init forks from the seed, so each realization needs its own.
    numerics::Rng draw(rng.next_u64());
    const auto p = network::init_network(spec, draw);
    const auto e = expand_network(p, spec, spec.num_sine_layers - 1);
    const Eigen::RowVectorXd w = e.frequencies.row(0);
    sum += w.sum();
    sumsq += w.squaredNorm();
    count += static_cast<double>(w.size());
  }
  return (sumsq - sum * sum / count) / (count - 1.0);
}

// --- pre-activation distribution -------------------------------------------

// Density of Z = W X with W ~ U(-B, B), X ~ U(-1/2, 1/2):
//   f(z) = (1/B) log(B / |2z|),  |z| <= B/2
// (infinite at z = 0, zero outside the support).
inline double preactivation_pdf(double z, double b_rad) {
  if (!(b_rad > 0.0) || !std::isfinite(b_rad)) throw DomainError("preactivation_pdf: bandwidth must be > 0");
  const double a = std::abs(2.0 * z);
  if (a >= b_rad) return 0.0;
  return std::log(b_rad / a) / b_rad;
}

// P(0 <= Z <= z) for the density above, extended as an odd function.
inline double preactivation_half_cdf(double z, double b_rad) {
  const double a = std::abs(z);
  if (a >= b_rad / 2.0) return std::copysign(0.5, z);
  if (a == 0.0) return 0.0;
  return std::copysign(a / b_rad * (1.0 + std::log(b_rad / (2.0 * a))), z);
}

// Density of Z + P with P ~ U(-pi, pi) independent: a moving average of the
// density above over a window of width 2 pi.
inline double preactivation_pdf_with_phase(double z, double b_rad) {
  if (!(b_rad > 0.0) || !std::isfinite(b_rad)) throw DomainError("preactivation_pdf_with_phase: bandwidth must be > 0");
  const double pi = std::numbers::pi;
  return (preactivation_half_cdf(z + pi, b_rad) - preactivation_half_cdf(z - pi, b_rad)) / (2.0 * pi);
}

// Var[sin(W X)] = 1/2 (1 - Si(B)/B) for the Z above. Adding an independent
// uniform phase makes the variance exactly 1/2, which this approaches for
// large B.
inline double predicted_sine_activation_variance(double b_rad) {
  if (!(b_rad > 0.0)) throw DomainError("predicted_sine_activation_variance: bandwidth must be > 0");
  return 0.5 * (1.0 - numerics::sine_integral(b_rad) / b_rad);
}

// The closed forms above assume a bandwidth much larger than pi.
inline bool broadband(double b_rad) { return b_rad >= 10.0 * std::numbers::pi; }

// --- empirical activation statistics -----------------------------------------

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

struct ActivationStats {
  std::vector<Moments> sines;        // g_i, every layer
  std::vector<Moments> post_linear;  // W_i z_{i-1} + b_i; entry 0 unused
  std::vector<Moments> hidden;       // z_i
  std::size_t samples = 0;
};

namespace detail {

struct Accumulator {
  double sum = 0.0;
  double sumsq = 0.0;
  double count = 0.0;

  template <class Derived>
  void add(const Eigen::MatrixBase<Derived>& m) {
    sum += m.template cast<double>().sum();
    sumsq += m.template cast<double>().squaredNorm();
    count += static_cast<double>(m.size());
  }
  Moments moments() const {
    if (count == 0.0) return {};
    const double mean = sum / count;
    return {mean, std::max(0.0, sumsq / count - mean * mean)};
  }
};

}  // namespace detail

// Pooled mean and variance (over units and samples) of every stage of every
// sine layer, for x ~ U(-1/2, 1/2)^{d_in}. All layers are evaluated whether or
// not they feed a head.
template <class T>
ActivationStats activation_statistics(const BaconParams<T>& p, const NetworkSpec& spec, std::size_t n_samples,
                                      numerics::Rng& rng, Eigen::Index chunk = 8192) {
  network::detail::check_params(p, spec);
  if (n_samples < 1) throw InvalidInput("activation_statistics: need at least one sample");
  const int n = spec.num_sine_layers;
  std::vector<detail::Accumulator> acc_g(n), acc_a(n), acc_z(n);
  std::size_t done = 0;
  while (done < n_samples) {
    const auto cols = static_cast<Eigen::Index>(std::min<std::size_t>(static_cast<std::size_t>(chunk), n_samples - done));
    Inputs x(spec.input_dim, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index d = 0; d < x.rows(); ++d) x(d, c) = rng.uniform(-0.5, 0.5);
    network::Matrix<T> z;
    for (int i = 0; i < n; ++i) {
      network::Matrix<T> g = network::detail::sine_arguments<T>(p.frequencies[i], p.phases[i], x, spec).array().sin();
      acc_g[i].add(g);
      if (i == 0) {
        z = std::move(g);
      } else {
        network::Matrix<T> a = p.hidden_weights[i - 1] * z;
        a.colwise() += p.hidden_biases[i - 1];
        acc_a[i].add(a);
        z = g.cwiseProduct(a);
      }
      acc_z[i].add(z);
    }
    done += static_cast<std::size_t>(cols);
  }
  ActivationStats s;
  s.samples = n_samples;
  for (int i = 0; i < n; ++i) {
    s.sines.push_back(acc_g[i].moments());
    s.post_linear.push_back(acc_a[i].moments());
    s.hidden.push_back(acc_z[i].moments());
  }
  return s;
}

}  // namespace bacon::spectral
