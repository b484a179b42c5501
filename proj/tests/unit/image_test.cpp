#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bacon/image.hpp"

using namespace bacon;
using namespace bacon::image;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  numerics::Rng r(seed);
  Image img(h, w, c);
  for (auto& v : img.pixels) v = r.uniform(0.0, 1.0);
  return img;
}

// Direct 2D DFT evaluation of the trigonometric interpolant at (y, x) in pixel units.
double interpolant(const Image& img, double py, double px) {
  const int h = img.height, w = img.width;
  double sum = 0.0;
  for (int ky = -h / 2; ky < h / 2 + 1; ++ky)
    for (int kx = -w / 2; kx < w / 2 + 1; ++kx) {
      // Nyquist bins of even sides enter as half weight on +/- k.
      double weight = 1.0;
      if (std::abs(ky) == h / 2) weight *= 0.5;
      if (std::abs(kx) == w / 2) weight *= 0.5;
      std::complex<double> c = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          c += img.at(y, x, 0) * std::polar(1.0, -2 * std::numbers::pi * (double(ky) * y / h + double(kx) * x / w));
      sum += weight * (c * std::polar(1.0, 2 * std::numbers::pi * (ky * py / h + kx * px / w))).real();
    }
  return sum / (h * w);
}

// Straight-from-definition SSIM for one channel with the same window.
double naive_ssim(const Image& a, const Image& b) {
  double win[11][11], total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= a.height; ++y)
    for (int x = 0; x + 11 <= a.width; ++x) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          mx += win[i][j] / total * a.at(y + i, x + j, 0);
          my += win[i][j] / total * b.at(y + i, x + j, 0);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double dx = a.at(y + i, x + j, 0) - mx, dy = b.at(y + i, x + j, 0) - my;
          vx += win[i][j] / total * dx * dx;
          vy += win[i][j] / total * dy * dy;
          cxy += win[i][j] / total * dx * dy;
        }
      const double c1 = 1e-4, c2 = 9e-4;
      sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return sum / count;
}

}  // namespace

TEST(PixelGrid, CoordinatesAndOrder) {
  auto g = pixel_grid(4, 8);
  ASSERT_EQ(g.cols(), 32);
  EXPECT_DOUBLE_EQ(g(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(g(1, 0), -0.5);
  EXPECT_DOUBLE_EQ(g(0, 1), -0.375);
  EXPECT_DOUBLE_EQ(g(1, 8), -0.25);
  auto v = pixel_grid(4, 8, 0.5);
  EXPECT_DOUBLE_EQ(v(0, 0), -0.4375);
  EXPECT_DOUBLE_EQ(v(1, 0), -0.375);
}

TEST(ImageIo, PngAndPnmRoundTrip) {
  auto img = random_image(5, 7, 3, 1);
  const auto dir = std::filesystem::temp_directory_path();
  for (const char* name : {"bacon_io.png", "bacon_io.ppm"})
    for (int depth : {8, 16}) {
      const auto path = (dir / name).string();
      write_image(path, img, depth);
      auto back = read_image(path);
      std::filesystem::remove(path);
      ASSERT_TRUE(back.same_shape(img));
      const double step = 1.0 / (depth == 16 ? 65535 : 255);
      for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 0.5 * step + 1e-12);
    }
  auto gray = random_image(3, 3, 1, 2);
  const auto path = (dir / "bacon_io.pgm").string();
  write_image(path, gray);
  EXPECT_EQ(read_image(path).channels, 1);
  std::filesystem::remove(path);
  EXPECT_THROW(read_image("/nonexistent.png"), InvalidInput);
  EXPECT_THROW(write_image(path, gray, 12), InvalidInput);
}

TEST(ImageIo, BundledImageLoads) {
  auto img = read_image(std::string(BACON_DATA_DIR) + "/astronaut_64.png");
  EXPECT_EQ(img.height, 64);
  EXPECT_EQ(img.width, 64);
  EXPECT_EQ(img.channels, 3);
}

TEST(Pyramid, LevelsMatchInterpolantAtCoarsePixels) {
  // Downsampling keeps |k| <= M/2 - 1, so the coarse level equals the low-passed
  // interpolant; check against the direct sum with the top bins zeroed.
  auto img = random_image(8, 8, 1, 3);
  auto levels = build_reference_pyramid(img, {0.5, 1.0});
  ASSERT_EQ(levels[0].height, 4);
  EXPECT_EQ(levels[1].pixels, img.pixels);
  auto lp = img;
  {
    numerics::RealGrid g({8, 8}, img.pixels);
    auto filtered = numerics::ideal_lowpass(g, 1);
    lp.pixels = filtered.values;
  }
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(levels[0].at(y, x, 0), lp.at(2 * y, 2 * x, 0), 1e-12);
}

TEST(Pyramid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(build_reference_pyramid(Image(48, 64, 1)), UnsupportedResolution);
  EXPECT_THROW(build_reference_pyramid(Image(64, 64, 1), {0.3}), UnsupportedResolution);
  EXPECT_THROW(build_reference_pyramid(Image(4, 4, 1), {0.25}), UnsupportedResolution);
}

TEST(HalfPixelShift, MatchesDirectInterpolant) {
  auto img = random_image(6, 8, 1, 4);
  auto s = half_pixel_shift(img);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_NEAR(s.at(y, x, 0), interpolant(img, y + 0.5, x + 0.5), 1e-12);
}

TEST(Metrics, PsnrClosedForm) {
  Image a(4, 4, 1, 0.5), b(4, 4, 1, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_THROW(psnr(a, Image(4, 4, 3)), InvalidInput);
}

TEST(Metrics, SsimMatchesDirectDefinition) {
  auto a = random_image(16, 20, 1, 5);
  auto b = a;
  numerics::Rng r(6);
  for (auto& v : b.pixels) v = std::clamp(v + r.uniform(-0.1, 0.1), 0.0, 1.0);
  EXPECT_NEAR(ssim(a, b), naive_ssim(a, b), 1e-12);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_THROW(ssim(Image(8, 8, 1), Image(8, 8, 1)), InvalidInput);
}

TEST(ImageNetwork, SpecUsesHalfCyclePerPixel) {
  ImageFitConfig c;
  auto s = image_network_spec(Image(64, 64, 3), c);
  EXPECT_EQ(s.num_sine_layers, 5);
  EXPECT_EQ(s.output_dim, 3);
  EXPECT_DOUBLE_EQ(s.max_bandwidth(), 32.0);
  EXPECT_DOUBLE_EQ(network::cumulative_bandwidth(s, 1), 8.0);
  EXPECT_DOUBLE_EQ(network::cumulative_bandwidth(s, 2), 16.0);
}

TEST(ImageFit, ShortFitImprovesEveryHeadAndTilesExactly) {
  auto img = build_reference_pyramid(read_image(std::string(BACON_DATA_DIR) + "/astronaut_64_gray.png"), {0.5})[0];
  ImageFitConfig c;
  c.hidden_dim = 32;
  c.steps = 150;
  c.seed = 9;
  auto r = fit_image(img, c);
  ASSERT_EQ(r.metrics.size(), 3u);
  EXPECT_LT(r.curve.back().total, 0.5 * r.curve.front().total);
  for (auto& m : r.metrics) EXPECT_GT(m.psnr, 15.0) << "head " << m.layer;
  auto tiles = render_extrapolated(r.params, r.spec, 16);
  ASSERT_EQ(tiles.height, 64);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) EXPECT_NEAR(tiles.at(y, x, 0), tiles.at(y + 48, x + 32, 0), 1e-6);
}

TEST(ImageFit, SharedModeSupervisesEveryHeadWithFullImage) {
  Image img(16, 16, 1, 0.25);
  ImageFitConfig c;
  c.hidden_dim = 8;
  c.steps = 3;
  c.mode = training::SupervisionMode::SharedTarget;
  const auto spec = image_network_spec(img, c);
  auto groups = image_groups(build_reference_pyramid(img, c.scales), spec, c.mode);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].inputs.cols(), 256);
  for (auto& t : groups[0].targets) EXPECT_EQ(t.cols(), 256);
  auto per = image_groups(build_reference_pyramid(img, c.scales), spec, training::SupervisionMode::PerHead);
  ASSERT_EQ(per.size(), 3u);
  EXPECT_EQ(per[0].inputs.cols(), 16);
  EXPECT_EQ(per[0].targets[1].size(), 0);
  EXPECT_NO_THROW(fit_image(img, c));
}
