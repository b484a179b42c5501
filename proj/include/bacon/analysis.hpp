#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "bacon/csv.hpp"
#include "bacon/fft.hpp"
#include "bacon/network.hpp"
#include "bacon/spectral.hpp"

// Reports shared by the CLI and the acceptance run.
namespace bacon::analysis {

using network::BaconParams;
using network::NetworkSpec;

// Samples -0.5 + i / res on every axis, last axis fastest (matches RealGrid).
inline network::Inputs periodic_grid(int dims, int res) {
  if (dims < 1 || dims > 3) throw InvalidInput("periodic_grid: 1 to 3 dimensions");
  if (res < 2) throw InvalidInput("periodic_grid: resolution must be >= 2");
  Eigen::Index n = 1;
  for (int d = 0; d < dims; ++d) n *= res;
  network::Inputs x(dims, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index rem = k;
    for (int d = dims - 1; d >= 0; --d) {
      x(d, k) = -0.5 + static_cast<double>(rem % res) / res;
      rem /= res;
    }
  }
  return x;
}

struct HeadSpectrum {
  int layer = 0;
  int output = 0;
  double bandwidth = 0.0;  // cumulative, cycles per unit
  double out_of_band = 0.0;  // largest magnitude beyond the bandwidth / peak
  numerics::Spectrum spectrum;
};

// DFT of every head output on a res^d periodic grid.
template <class T>
std::vector<HeadSpectrum> head_spectra(const BaconParams<T>& p, const NetworkSpec& spec, int res) {
  const auto x = periodic_grid(spec.input_dim, res);
  std::vector<std::size_t> shape(static_cast<std::size_t>(spec.input_dim), static_cast<std::size_t>(res));
  std::vector<HeadSpectrum> out;
  for (int layer : spec.output_head_layers) {
    const auto y = network::evaluate_head_chunked(p, spec, x, layer);
    for (int o = 0; o < spec.output_dim; ++o) {
      numerics::RealGrid g(shape);
      for (Eigen::Index k = 0; k < y.cols(); ++k) g.values[static_cast<std::size_t>(k)] = y(o, k);
      HeadSpectrum h;
      h.layer = layer;
      h.output = o;
      h.bandwidth = network::cumulative_bandwidth(spec, layer);
      h.spectrum = numerics::dft_spectrum(g, spec.period);
      h.out_of_band = numerics::relative_out_of_band_peak(h.spectrum, h.bandwidth);
      out.push_back(std::move(h));
    }
  }
  return out;
}

inline CsvTable spectrum_summary(const std::vector<HeadSpectrum>& heads) {
  CsvTable t({"layer", "output", "bandwidth", "peak", "relative_out_of_band_peak"});
  for (const auto& h : heads) t.row() << h.layer << h.output << h.bandwidth << h.spectrum.peak() << h.out_of_band;
  return t;
}

// One row per bin: signed bin per axis, then magnitude.
inline CsvTable spectrum_bins(const numerics::Spectrum& s) {
  std::vector<std::string> header;
  for (std::size_t a = 0; a < s.shape.size(); ++a) header.push_back("bin" + std::to_string(a));
  header.push_back("magnitude");
  CsvTable t(header);
  for (std::size_t i = 0; i < s.coefficients.size(); ++i) {
    auto row = t.row();
    for (long b : s.bins_of(i)) row << b;
    row << s.magnitudes[i];
  }
  return t;
}

// --- initialization statistics ------------------------------------------------

struct InitConfig {
  int hidden_dim = 1024;
  int layers = 9;
  double bandwidth_rad = 30 * std::numbers::pi;  // per layer, omega ~ U(-B, B)
  std::size_t samples = 1u << 16;
  bool quantize = false;
  std::uint64_t seed = 0;
};

inline NetworkSpec init_spec(const InitConfig& c) {
  NetworkSpec s;
  s.input_dim = 1;
  s.hidden_dim = c.hidden_dim;
  s.num_sine_layers = c.layers;
  s.output_dim = 1;
  s.layer_bandwidths.assign(static_cast<std::size_t>(c.layers), c.bandwidth_rad / network::kTwoPi);
  s.output_head_layers = {c.layers - 1};
  s.quantize_frequencies = c.quantize;
  s.validate();
  return s;
}

struct InitReport {
  spectral::ActivationStats bacon;
  spectral::ActivationStats mfn;
  double predicted_sine_variance = 0.0;
};

// Both initializations share the frequency and phase draws, and the same
// input samples.
inline InitReport init_report(const InitConfig& c) {
  const auto spec = init_spec(c);
  const numerics::Rng root(c.seed);
  InitReport r;
  r.predicted_sine_variance = spectral::predicted_sine_activation_variance(c.bandwidth_rad);
  {
    auto rng = root.fork(0);
    const auto p = network::init_network(spec, rng);
    auto xs = root.fork(1);
    r.bacon = spectral::activation_statistics(p, spec, c.samples, xs);
  }
  {
    auto rng = root.fork(0);
    const auto p = network::init_network_mfn_reference(spec, rng);
    auto xs = root.fork(1);
    r.mfn = spectral::activation_statistics(p, spec, c.samples, xs);
  }
  return r;
}

// Rows: init, layer, stage, mean, variance, predicted (empty when no closed form).
inline CsvTable init_table(const InitReport& r) {
  CsvTable t({"init", "layer", "stage", "mean", "variance", "predicted_variance"});
  auto emit = [&](const char* name, const spectral::ActivationStats& s, bool theory) {
    for (std::size_t i = 0; i < s.sines.size(); ++i) {
      t.row() << name << static_cast<int>(i) << "sine" << s.sines[i].mean << s.sines[i].variance << r.predicted_sine_variance;
      if (i > 0) {
        auto row = t.row();
        row << name << static_cast<int>(i) << "post_linear" << s.post_linear[i].mean << s.post_linear[i].variance;
        if (theory) row << 1.0; else row << std::string();
      }
      auto row = t.row();
      row << name << static_cast<int>(i) << "hidden" << s.hidden[i].mean << s.hidden[i].variance;
      // z_0 = g_0; deeper z_i = g_i * a_i with unit-variance a_i.
      if (theory || i == 0) row << r.predicted_sine_variance; else row << std::string();
    }
  };
  emit("bacon", r.bacon, true);
  emit("mfn_reference", r.mfn, false);
  return t;
}

}  // namespace bacon::analysis
