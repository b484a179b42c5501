#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "bacon/fft.hpp"
#include "bacon/rng.hpp"
#include "bacon/special.hpp"

using namespace bacon;
using namespace bacon::numerics;

namespace {

double si_quadrature(double x) {
  auto f = [](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, x, 15, 1e-14);
}

// O(N^2) reference for one axis.
std::vector<Complex> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      out[k] += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * j % n) / static_cast<double>(n));
  return out;
}

RealGrid noise(std::vector<std::size_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  RealGrid g(std::move(shape));
  for (auto& v : g.values) v = rng.uniform(-1.0, 1.0);
  return g;
}

}  // namespace

TEST(SineIntegral, KnownValues) {
  EXPECT_EQ(sine_integral(0.0), 0.0);
  EXPECT_NEAR(sine_integral(1.0), 0.9460830704, 1e-10);
  EXPECT_NEAR(sine_integral(-2.5), -sine_integral(2.5), 1e-15);
}

TEST(SineIntegral, MatchesQuadrature) {
  for (double x : {0.1, 0.5, 1.0, 2.0, 3.7, 10.0, 30.0 * std::numbers::pi})
    EXPECT_NEAR(sine_integral(x), si_quadrature(x), 1e-10) << "x=" << x;
}

TEST(SineIntegral, MonotoneUpToPiAndBoundedBySiPi) {
  const double si_pi = sine_integral(std::numbers::pi);
  double prev = -1.0;
  for (int i = 0; i <= 200; ++i) {
    const double x = std::numbers::pi * i / 200.0;
    const double v = sine_integral(x);
    EXPECT_GT(v, prev);
    prev = v;
  }
  for (double x = 0.0; x < 200.0; x += 0.37) EXPECT_LE(sine_integral(x), si_pi + 1e-15);
}

TEST(SineIntegral, RejectsNonFinite) {
  EXPECT_THROW(sine_integral(std::nan("")), DomainError);
  EXPECT_THROW(sine_integral(INFINITY), DomainError);
}

TEST(DftSpectrum, ConstantIsPureDc) {
  RealGrid g({64}, 1.0);
  auto s = dft_spectrum(g);
  EXPECT_NEAR(s.magnitudes[0], 64.0, 1e-12);
  for (std::size_t i = 1; i < 64; ++i) EXPECT_LT(s.magnitudes[i], 1e-12);
}

TEST(DftSpectrum, OnGridTonePeaksAtPlusMinusThree) {
  RealGrid g({64});
  for (std::size_t i = 0; i < 64; ++i) g.values[i] = std::sin(2.0 * std::numbers::pi * 3.0 * (-0.5 + i / 64.0));
  auto s = dft_spectrum(g);
  for (std::size_t i = 0; i < 64; ++i) {
    const long b = s.bin(0, i);
    if (std::abs(b) == 3)
      EXPECT_NEAR(s.magnitudes[i], 32.0, 1e-10);
    else
      EXPECT_LT(s.magnitudes[i], 1e-10) << "bin " << b;
  }
}

TEST(DftSpectrum, ParsevalAndNaiveDft) {
  auto g = noise({32}, 3);
  auto s = dft_spectrum(g);
  double energy = 0.0;
  for (double v : g.values) energy += v * v;
  EXPECT_NEAR(s.energy(), energy, 1e-9 * energy);
  auto ref = naive_dft(g.values);
  for (std::size_t k = 0; k < 32; ++k) EXPECT_NEAR(std::abs(s.coefficients[k] - ref[k]), 0.0, 1e-10);
}

TEST(DftSpectrum, BinSpacingFollowsPeriod) {
  RealGrid g({16}, 0.0);
  auto s = dft_spectrum(g, 4.0);
  EXPECT_DOUBLE_EQ(s.frequency(0, 1) - s.frequency(0, 0), 0.25);
  EXPECT_EQ(s.bin(0, 8), -8);
  EXPECT_EQ(s.bin(0, 15), -1);
}

TEST(DftSpectrum, RejectsEmptyAndTinyGrids) {
  EXPECT_THROW(dft_spectrum(RealGrid{}), InvalidInput);
  EXPECT_THROW(dft_spectrum(RealGrid({1})), InvalidInput);
}

TEST(DftSpectrum, RoundTripUpTo3d) {
  for (auto shape : std::vector<std::vector<std::size_t>>{{128}, {16, 32}, {64, 64, 64}}) {
    auto g = noise(shape, 11);
    auto back = inverse_spectrum(dft_spectrum(g));
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(back.values[i] - g.values[i]));
    EXPECT_LT(worst, 1e-9);
  }
}

TEST(DftSpectrum, RoundTrip256Cubed) {
  auto g = noise({256, 256, 256}, 5);
  auto back = inverse_spectrum(dft_spectrum(g));
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(back.values[i] - g.values[i]));
  EXPECT_LT(worst, 1e-9);
}

TEST(FourierResample, ConstantIsPreserved) {
  RealGrid g({64, 64}, 0.37);
  auto small = fourier_resample(g, {16, 16});
  for (double v : small.values) EXPECT_NEAR(v, 0.37, 1e-12);
  auto big = fourier_resample(small, {64, 64});
  for (double v : big.values) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(FourierResample, PassBandToneSurvives) {
  auto tone = [](std::size_t n) {
    RealGrid g({n});
    for (std::size_t i = 0; i < n; ++i) g.values[i] = std::cos(2.0 * std::numbers::pi * 3.0 * (-0.5 + double(i) / n) + 0.4);
    return g;
  };
  auto out = fourier_resample(tone(64), {16});
  auto ref = tone(16);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(out.values[i], ref.values[i], 1e-12);
}

TEST(FourierResample, MatchesCentralBlockCropOracle) {
  auto g = noise({64, 64}, 21);
  auto out = fourier_resample(g, {16, 16});
  // FFT, keep |k| <= 7 on both axes, inverse on the 16x16 grid, scale by 16^2/64^2.
  auto s = dft_spectrum(g);
  std::vector<Complex> crop(256);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      const long a = signed_bin(i, 64), b = signed_bin(j, 64);
      if (std::abs(a) > 7 || std::abs(b) > 7) continue;
      crop[((a + 16) % 16) * 16 + (b + 16) % 16] = s.coefficients[i * 64 + j];
    }
  auto back = fft_inverse({16, 16}, crop);
  for (std::size_t i = 0; i < 256; ++i) EXPECT_NEAR(out.values[i], back[i].real() / 16.0, 1e-9);
  double mean_in = 0.0, mean_out = 0.0;
  for (double v : g.values) mean_in += v / g.size();
  for (double v : out.values) mean_out += v / out.size();
  EXPECT_NEAR(mean_in, mean_out, 1e-14);
}

TEST(FourierResample, DownThenUpIsIdealLowpass) {
  auto g = noise({32, 32}, 8);
  auto round = fourier_resample(fourier_resample(g, {8, 8}), {32, 32});
  auto ref = ideal_lowpass(g, 3);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(round.values[i], ref.values[i], 1e-9);
}

TEST(FourierResample, OddResolutionsRejected) {
  RealGrid g({63}, 1.0);
  EXPECT_THROW(fourier_resample(g, {16}), UnsupportedResolution);
  RealGrid h({64}, 1.0);
  EXPECT_THROW(fourier_resample(h, {15}), UnsupportedResolution);
}

TEST(Laplacian, VarianceMatchesParameter) {
  for (double var : {2e-6, 2e-2}) {
    Rng rng(42);
    const int n = 1'000'000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = sample_laplacian(rng, var);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double emp = sumsq / n - mean * mean;
    EXPECT_NEAR(emp / var, 1.0, 0.05) << "variance " << var;
  }
}

TEST(Laplacian, RejectsNonPositiveVariance) {
  Rng rng(1);
  EXPECT_THROW(sample_laplacian(rng, 0.0), DomainError);
  EXPECT_THROW(sample_laplacian(rng, -1.0), DomainError);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(123), d(123);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(sample_laplacian(c, 0.1), sample_laplacian(d, 0.1));
}

TEST(Rng, ReferenceSplitMix64Values) {
  // First outputs of SplitMix64 seeded with 0 (published reference sequence).
  Rng r(0);
  EXPECT_EQ(r.next_u64(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(r.next_u64(), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(r.next_u64(), 0x06C45D188009454Full);
}

TEST(Rng, ForksIgnoreParentPosition) {
  Rng a(9);
  Rng b(9);
  for (int i = 0; i < 17; ++i) b.next_u64();
  EXPECT_EQ(a.fork(3).next_u64(), b.fork(3).next_u64());
  EXPECT_NE(a.fork(3).next_u64(), a.fork(4).next_u64());
}

TEST(Rng, UniformIntCoversRangeUniformly) {
  Rng r(77);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[r.uniform_int(-3, 3) + 3];
  for (int h : hits) EXPECT_NEAR(h, 10000, 400);
}
