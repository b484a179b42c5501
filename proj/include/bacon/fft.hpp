#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bacon/errors.hpp"

namespace bacon::numerics {

using Complex = std::complex<double>;

// Row-major real samples on a 1-3 dimensional grid. The last axis varies fastest.
struct RealGrid {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  RealGrid() = default;
  RealGrid(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
    values.assign(element_count(shape), fill);
  }
  RealGrid(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != element_count(shape)) throw InvalidInput("RealGrid: value count does not match shape");
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    if (s.empty()) return 0;
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
};

// Signed integer index of FFT bin `index` on an axis of length n. Bins at or
// above n/2 wrap to negative frequencies, so the Nyquist bin of an even axis
// is reported as -n/2.
inline long signed_bin(std::size_t index, std::size_t n) {
  const long i = static_cast<long>(index);
  const long len = static_cast<long>(n);
  return i < (len + 1) / 2 ? i : i - len;
}

// Discrete spectrum of a real grid sampled over one period T per axis.
//
// Normalization: coefficients are the unscaled forward DFT
//   X[k] = sum_n x[n] exp(-2 pi i k.n / N),
// and the inverse carries the 1/N factor. Parseval therefore reads
//   sum_k |X[k]|^2 / N = sum_n x[n]^2,
// which is what energy() returns. Bin k on an axis is k cycles per period,
// i.e. k / T cycles per unit, so bins are spaced exactly 1/T apart.
struct Spectrum {
  std::vector<std::size_t> shape;
  double period = 1.0;
  std::vector<Complex> coefficients;
  std::vector<double> magnitudes;

  long bin(std::size_t axis, std::size_t index) const { return signed_bin(index, shape.at(axis)); }
  double frequency(std::size_t axis, std::size_t index) const { return static_cast<double>(bin(axis, index)) / period; }

  // Signed bins along every axis for flat coefficient index `flat`.
  std::vector<long> bins_of(std::size_t flat) const {
    std::vector<long> out(shape.size());
    for (std::size_t a = shape.size(); a-- > 0;) {
      out[a] = signed_bin(flat % shape[a], shape[a]);
      flat /= shape[a];
    }
    return out;
  }

  double energy() const {
    double sum = 0.0;
    for (const auto& c : coefficients) sum += std::norm(c);
    return sum / static_cast<double>(coefficients.size());
  }

  double peak() const { return magnitudes.empty() ? 0.0 : *std::max_element(magnitudes.begin(), magnitudes.end()); }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

inline void check_shape(const std::vector<std::size_t>& shape, const char* what) {
  if (shape.empty() || shape.size() > 3) throw InvalidInput(std::string(what) + ": grid must have 1 to 3 axes");
  for (auto n : shape)
    if (n < 2) throw InvalidInput(std::string(what) + ": every axis needs at least 2 samples");
}

// Unscaled complex DFT in either direction. Planning is serialized because the
// FFTW planner is not thread-safe; execution is not.
inline std::vector<Complex> transform(const std::vector<std::size_t>& shape, std::span<const Complex> in, int sign) {
  const std::size_t count = RealGrid::element_count(shape);
  if (in.size() != count) throw InvalidInput("fft: coefficient count does not match shape");
  std::unique_ptr<fftw_complex, FftwDeleter> buf(fftw_alloc_complex(count));
  std::vector<int> dims(shape.begin(), shape.end());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf.get(), buf.get(), sign, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw InvalidInput("fft: planner rejected the grid shape");
  std::copy(in.begin(), in.end(), reinterpret_cast<Complex*>(buf.get()));
  fftw_execute(plan);
  std::vector<Complex> out(reinterpret_cast<Complex*>(buf.get()), reinterpret_cast<Complex*>(buf.get()) + count);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Index map used by spectral crop/pad along one axis: coefficient `src` moves
// to `dst` scaled by `weight`.
struct BinMove {
  std::size_t src;
  std::size_t dst;
  double weight;
};

inline std::vector<BinMove> resample_moves(std::size_t from, std::size_t to) {
  std::vector<BinMove> moves;
  auto wrap = [](long k, std::size_t n) { return static_cast<std::size_t>((k % static_cast<long>(n) + static_cast<long>(n)) % static_cast<long>(n)); };
  if (to < from) {
    // Crop: keep |k| <= to/2 - 1. The target Nyquist bin is dropped so that the
    // retained band is symmetric about DC and the result stays exactly real.
    const long keep = static_cast<long>(to / 2) - 1;
    for (long k = -keep; k <= keep; ++k) moves.push_back({wrap(k, from), wrap(k, to), 1.0});
  } else {
    // Pad: copy |k| < from/2 and split the source Nyquist bin across +/- from/2.
    const long keep = static_cast<long>(from / 2) - 1;
    for (long k = -keep; k <= keep; ++k) moves.push_back({wrap(k, from), wrap(k, to), 1.0});
    const long nyq = static_cast<long>(from / 2);
    moves.push_back({from / 2, wrap(-nyq, to), 0.5});
    moves.push_back({from / 2, wrap(nyq, to), 0.5});
  }
  return moves;
}

// Applies per-axis bin moves to a row-major coefficient array.
inline std::vector<Complex> move_axis(const std::vector<Complex>& in, const std::vector<std::size_t>& shape, std::size_t axis,
                                      std::size_t new_len, const std::vector<BinMove>& moves) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const std::size_t old_len = shape[axis];
  std::vector<Complex> out(outer * new_len * inner, Complex(0.0, 0.0));
  for (std::size_t o = 0; o < outer; ++o)
    for (const auto& m : moves)
      for (std::size_t i = 0; i < inner; ++i)
        out[(o * new_len + m.dst) * inner + i] += m.weight * in[(o * old_len + m.src) * inner + i];
  return out;
}

}  // namespace detail

inline std::vector<Complex> fft_forward(const std::vector<std::size_t>& shape, std::span<const Complex> samples) {
  detail::check_shape(shape, "fft_forward");
  return detail::transform(shape, samples, FFTW_FORWARD);
}

// Inverse DFT including the 1/N factor.
inline std::vector<Complex> fft_inverse(const std::vector<std::size_t>& shape, std::span<const Complex> coefficients) {
  detail::check_shape(shape, "fft_inverse");
  auto out = detail::transform(shape, coefficients, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& c : out) c *= scale;
  return out;
}

inline Spectrum dft_spectrum(const RealGrid& samples, double period = 1.0) {
  if (samples.size() == 0) throw InvalidInput("dft_spectrum: empty grid");
  detail::check_shape(samples.shape, "dft_spectrum");
  if (!(period > 0.0)) throw DomainError("dft_spectrum: period must be positive");
  std::vector<Complex> in(samples.values.begin(), samples.values.end());
  Spectrum s;
  s.shape = samples.shape;
  s.period = period;
  s.coefficients = detail::transform(samples.shape, in, FFTW_FORWARD);
  s.magnitudes.resize(s.coefficients.size());
  std::transform(s.coefficients.begin(), s.coefficients.end(), s.magnitudes.begin(), [](const Complex& c) { return std::abs(c); });
  return s;
}

// Real part of the inverse transform of a spectrum's full coefficients.
inline RealGrid inverse_spectrum(const Spectrum& s) {
  auto c = fft_inverse(s.shape, s.coefficients);
  RealGrid g(s.shape);
  for (std::size_t i = 0; i < c.size(); ++i) g.values[i] = c[i].real();
  return g;
}

// Band-limited resampling through the frequency domain. Downsampling keeps the
// bins |k| <= M/2 - 1 of the target (an ideal low-pass); upsampling zero-pads.
// Values are scaled so that the continuous trigonometric interpolant, and hence
// the mean, is preserved.
inline RealGrid fourier_resample(const RealGrid& samples, const std::vector<std::size_t>& target) {
  detail::check_shape(samples.shape, "fourier_resample");
  if (target.size() != samples.shape.size()) throw InvalidInput("fourier_resample: target rank differs from source rank");
  for (std::size_t a = 0; a < target.size(); ++a) {
    if (samples.shape[a] % 2 != 0 || target[a] % 2 != 0 || target[a] < 2)
      throw UnsupportedResolution("fourier_resample: resolutions must be even, got " + std::to_string(samples.shape[a]) +
                                  " -> " + std::to_string(target[a]));
  }
  std::vector<Complex> coeffs(samples.values.begin(), samples.values.end());
  coeffs = detail::transform(samples.shape, coeffs, FFTW_FORWARD);
  auto shape = samples.shape;
  double scale = 1.0;
  for (std::size_t a = 0; a < target.size(); ++a) {
    if (shape[a] == target[a]) continue;
    coeffs = detail::move_axis(coeffs, shape, a, target[a], detail::resample_moves(shape[a], target[a]));
    scale *= static_cast<double>(target[a]) / static_cast<double>(shape[a]);
    shape[a] = target[a];
  }
  auto spatial = fft_inverse(shape, coeffs);
  RealGrid out(shape);
  for (std::size_t i = 0; i < spatial.size(); ++i) out.values[i] = scale * spatial[i].real();
  return out;
}

// Zeroes every bin with |k| > max_bin on any axis (same grid resolution).
inline RealGrid ideal_lowpass(const RealGrid& samples, long max_bin) {
  auto s = dft_spectrum(samples);
  for (std::size_t i = 0; i < s.coefficients.size(); ++i) {
    const auto bins = s.bins_of(i);
    for (long b : bins)
      if (std::abs(b) > max_bin) {
        s.coefficients[i] = 0.0;
        break;
      }
  }
  return inverse_spectrum(s);
}

// Largest magnitude among bins whose frequency (cycles per unit) exceeds
// `bandwidth` on any axis, relative to the spectrum peak.
inline double relative_out_of_band_peak(const Spectrum& s, double bandwidth) {
  const double peak = s.peak();
  if (peak == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.coefficients.size(); ++i) {
    const auto bins = s.bins_of(i);
    const bool outside = std::any_of(bins.begin(), bins.end(), [&](long b) {
      return std::abs(static_cast<double>(b) / s.period) > bandwidth + 1e-9;
    });
    if (outside) worst = std::max(worst, s.magnitudes[i]);
  }
  return worst / peak;
}

}  // namespace bacon::numerics
