#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "bacon/csv.hpp"
#include "bacon/fft.hpp"
#include "bacon/network.hpp"
#include "bacon/rng.hpp"

// Wall-clock comparison of three ways to synthesize a 1D band-limited signal
// at n points: a BACON network, a naive inverse DFT over N explicit
// coefficients, and a full inverse FFT of size N.
namespace bacon::bench {

struct BenchConfig {
  std::vector<std::size_t> spectrum_sizes{512, 1024, 2048, 4096, 8192, 16384, 32768};
  std::vector<std::size_t> sample_counts{2048};
  int hidden_dim = 64;
  int layers = 4;
  int repeats = 7;  // best of
  std::uint64_t seed = 0;
};

struct Timing {
  std::string method;
  std::size_t spectrum_size = 0;
  std::size_t samples = 0;
  double seconds = 0.0;

  double per_sample() const { return samples ? seconds / static_cast<double>(samples) : 0.0; }
};

namespace detail {

template <class F>
double best_of(int repeats, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

// Keeps results observable so the timed work is not optimized away.
inline volatile double sink = 0.0;

}  // namespace detail

// Real part of sum_k c_k exp(2 pi i k x) for k in [-N/2, N/2), by a phasor
// recurrence: N complex multiply-adds per point.
inline std::vector<double> naive_idft(const std::vector<std::complex<double>>& coeffs, const std::vector<double>& x) {
  const auto n = static_cast<long>(coeffs.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::complex<double> step = std::polar(1.0, 2 * std::numbers::pi * x[i]);
    std::complex<double> w = std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(n / 2) * x[i]);
    std::complex<double> acc = 0.0;
    for (long k = 0; k < n; ++k) {
      acc += coeffs[static_cast<std::size_t>(k)] * w;
      w *= step;
    }
    out[i] = acc.real();
  }
  return out;
}

// 1D network whose total bandwidth matches a spectrum of N bins.
inline network::NetworkSpec bench_network_spec(std::size_t spectrum_size, int hidden_dim, int layers) {
  network::NetworkSpec s;
  s.input_dim = 1;
  s.hidden_dim = hidden_dim;
  s.num_sine_layers = layers;
  s.output_dim = 1;
  s.layer_bandwidths.assign(static_cast<std::size_t>(layers), static_cast<double>(spectrum_size) / 2.0 / layers);
  s.output_head_layers = {layers - 1};
  s.validate();
  return s;
}

// Repeats sweep every configuration in turn and keep the best time per cell, so a
// slow stretch of host time lands on one round rather than one spectrum size.
inline std::vector<Timing> run(const BenchConfig& cfg) {
  for (auto n : cfg.spectrum_sizes)
    if (n < 2 || (n & (n - 1))) throw InvalidInput("bench-idft: spectrum size " + std::to_string(n) + " is not a power of two");

  struct Case {
    std::size_t big_n, n, spectrum;
    std::vector<double> xs;
    network::Inputs x;
  };
  struct Spectrum {
    std::vector<std::complex<double>> coeffs;
    network::NetworkSpec spec;
    network::BaconParams<double> params;
  };
  std::vector<Spectrum> spectra;
  std::vector<Case> cases;
  const numerics::Rng root(cfg.seed);
  for (std::size_t si = 0; si < cfg.spectrum_sizes.size(); ++si) {
    const std::size_t big_n = cfg.spectrum_sizes[si];
    auto rng = root.fork(si);
    std::vector<std::complex<double>> coeffs(big_n);
    for (auto& c : coeffs) c = {rng.normal(), rng.normal()};
    auto spec = bench_network_spec(big_n, cfg.hidden_dim, cfg.layers);
    auto params = network::init_network(spec, rng);
    spectra.push_back({std::move(coeffs), spec, std::move(params)});
    for (std::size_t n : cfg.sample_counts) {
      if (n == 0) continue;
      Case c{big_n, n, si, std::vector<double>(n), network::Inputs(1, static_cast<Eigen::Index>(n))};
      for (std::size_t i = 0; i < n; ++i) c.x(0, static_cast<Eigen::Index>(i)) = c.xs[i] = rng.uniform(-0.5, 0.5);
      cases.push_back(std::move(c));
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> t_net(cases.size(), inf), t_idft(cases.size(), inf), t_fft(spectra.size(), inf);
  for (int r = 0; r < std::max(1, cfg.repeats); ++r) {
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
      const auto& c = cases[ci];
      const auto& sp = spectra[c.spectrum];
      t_net[ci] = std::min(t_net[ci], detail::best_of(1, [&] {
        detail::sink = network::evaluate_truncated(sp.params, sp.spec, c.x, sp.spec.deepest_head()).sum();
      }));
      t_idft[ci] = std::min(t_idft[ci], detail::best_of(1, [&] { detail::sink = naive_idft(sp.coeffs, c.xs).back(); }));
    }
    for (std::size_t si = 0; si < spectra.size(); ++si)
      t_fft[si] = std::min(t_fft[si], detail::best_of(1, [&] {
        detail::sink = numerics::fft_inverse({cfg.spectrum_sizes[si]}, spectra[si].coeffs).back().real();
      }));
  }

  std::vector<Timing> out;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& c = cases[ci];
    out.push_back({"bacon", c.big_n, c.n, t_net[ci]});
    out.push_back({"naive_idft", c.big_n, c.n, t_idft[ci]});
    out.push_back({"fft", c.big_n, c.n, t_fft[c.spectrum]});
  }
  return out;
}

inline CsvTable table(const std::vector<Timing>& rows) {
  CsvTable t({"method", "spectrum_size", "samples", "seconds", "seconds_per_sample"});
  for (const auto& r : rows)
    t.row() << r.method << static_cast<std::uint64_t>(r.spectrum_size) << static_cast<std::uint64_t>(r.samples) << r.seconds << r.per_sample();
  return t;
}

// Least-squares slope of log(per-sample time) against log(N).
inline double log_log_slope(const std::vector<Timing>& rows, const std::string& method) {
  std::vector<double> lx, ly;
  for (const auto& r : rows)
    if (r.method == method && r.samples) {
      lx.push_back(std::log(static_cast<double>(r.spectrum_size)));
      ly.push_back(std::log(r.per_sample()));
    }
  if (lx.size() < 2) throw InvalidInput("log_log_slope: need at least two spectrum sizes");
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / n, my += ly[i] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
  return sxy / sxx;
}

// Largest relative deviation of a method's per-sample time from its median.
inline double spread_about_median(const std::vector<Timing>& rows, const std::string& method) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == method && r.samples) v.push_back(r.per_sample());
  if (v.empty()) throw InvalidInput("spread_about_median: no rows for " + method);
  auto s = v;
  std::sort(s.begin(), s.end());
  const double med = s.size() % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
  double worst = 0.0;
  for (double x : v) worst = std::max(worst, std::abs(x / med - 1.0));
  return worst;
}

}  // namespace bacon::bench
