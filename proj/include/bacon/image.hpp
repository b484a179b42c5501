#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bacon/fft.hpp"
#include "bacon/image_io.hpp"
#include "bacon/network.hpp"
#include "bacon/training.hpp"

namespace bacon::image {

using network::BaconParams;
using network::Inputs;
using network::NetworkSpec;

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Pixel (row y, column x) sits at (-0.5 + (x + offset) / W, -0.5 + (y + offset) / H).
// Row 0 of the result is the horizontal coordinate. Columns follow row-major
// pixel order. offset = 0.5 gives the half-pixel validation grid.
inline Inputs pixel_grid(int height, int width, double offset = 0.0, double lo = -0.5, double extent = 1.0) {
  Inputs x(2, static_cast<Eigen::Index>(height) * width);
  for (int y = 0; y < height; ++y)
    for (int c = 0; c < width; ++c) {
      const auto col = static_cast<Eigen::Index>(y) * width + c;
      x(0, col) = lo + extent * (c + offset) / width;
      x(1, col) = lo + extent * (y + offset) / height;
    }
  return x;
}

// C x (H W) matrix of pixel values.
template <class T>
network::Matrix<T> image_targets(const Image& img) {
  network::Matrix<T> t(img.channels, static_cast<Eigen::Index>(img.height) * img.width);
  for (Eigen::Index p = 0; p < t.cols(); ++p)
    for (int c = 0; c < img.channels; ++c) t(c, p) = static_cast<T>(img.pixels[static_cast<std::size_t>(p) * img.channels + c]);
  return t;
}

inline Image outputs_to_image(const Eigen::MatrixXd& y, int height, int width, bool clamp = true) {
  if (y.cols() != static_cast<Eigen::Index>(height) * width) throw InvalidInput("outputs_to_image: pixel count mismatch");
  Image img(height, width, static_cast<int>(y.rows()));
  for (Eigen::Index p = 0; p < y.cols(); ++p)
    for (Eigen::Index c = 0; c < y.rows(); ++c) {
      const double v = y(c, p);
      img.pixels[static_cast<std::size_t>(p * y.rows() + c)] = clamp ? std::clamp(v, 0.0, 1.0) : v;
    }
  return img;
}

namespace detail {

inline numerics::RealGrid channel_grid(const Image& img, int c) {
  numerics::RealGrid g({static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) g.values[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, c);
  return g;
}

inline void store_channel(Image& img, int c, const numerics::RealGrid& g) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) img.at(y, x, c) = g.values[static_cast<std::size_t>(y) * img.width + x];
}

}  // namespace detail

// Ideal low-pass resample of every channel to (H s, W s).
inline Image fourier_resample_image(const Image& img, int height, int width) {
  Image out(height, width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    detail::store_channel(out, c,
                          numerics::fourier_resample(detail::channel_grid(img, c),
                                                     {static_cast<std::size_t>(height), static_cast<std::size_t>(width)}));
  return out;
}

// One image per scale factor, each the ideal low-pass resample of the input.
// A factor of 1 returns the input unchanged.
inline std::vector<Image> build_reference_pyramid(const Image& img, const std::vector<double>& scales = {0.25, 0.5, 1.0}) {
  if (!is_power_of_two(img.height) || !is_power_of_two(img.width))
    throw UnsupportedResolution("reference pyramid needs power-of-two image sides, got " + std::to_string(img.height) + "x" +
                                std::to_string(img.width));
  std::vector<Image> out;
  for (double s : scales) {
    const double h = img.height * s, w = img.width * s;
    if (!(s > 0.0) || s > 1.0 || h != std::round(h) || w != std::round(w) || !is_power_of_two(static_cast<int>(h)) ||
        !is_power_of_two(static_cast<int>(w)) || h < 2 || w < 2)
      throw UnsupportedResolution("scale factor " + std::to_string(s) + " does not give a power-of-two level");
    if (s == 1.0)
      out.push_back(img);
    else
      out.push_back(fourier_resample_image(img, static_cast<int>(h), static_cast<int>(w)));
  }
  return out;
}

// Trigonometric interpolant of the image evaluated half a pixel down and right,
// i.e. on the validation grid. The Nyquist bins are treated as cosines.
inline Image half_pixel_shift(const Image& img) {
  Image out(img.height, img.width, img.channels);
  const std::vector<std::size_t> shape{static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)};
  for (int c = 0; c < img.channels; ++c) {
    auto g = detail::channel_grid(img, c);
    std::vector<numerics::Complex> v(g.values.begin(), g.values.end());
    auto spec = numerics::fft_forward(shape, v);
    for (std::size_t i = 0; i < shape[0]; ++i)
      for (std::size_t j = 0; j < shape[1]; ++j) {
        auto factor = [](std::size_t idx, std::size_t n) -> numerics::Complex {
          const long k = numerics::signed_bin(idx, n);
          const double angle = 2.0 * std::numbers::pi * k * 0.5 / static_cast<double>(n);
          if (n % 2 == 0 && idx == n / 2) return {std::cos(angle), 0.0};
          return std::polar(1.0, angle);
        };
        spec[i * shape[1] + j] *= factor(i, shape[0]) * factor(j, shape[1]);
      }
    auto back = numerics::fft_inverse(shape, spec);
    for (std::size_t k = 0; k < back.size(); ++k) g.values[k] = back[k].real();
    detail::store_channel(out, c, g);
  }
  return out;
}

// --- metrics ---------------------------------------------------------------

inline double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidInput("metric: image shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.pixels[i] - b.pixels[i]) * (a.pixels[i] - b.pixels[i]);
  return s / static_cast<double>(a.size());
}

// 10 log10(peak^2 / MSE); +inf for identical images.
inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

// Mean SSIM over channels and over every position where an 11x11 Gaussian
// window (sigma 1.5) fits inside the image. Constants K1 = 0.01, K2 = 0.03 for
// a dynamic range of 1.
inline double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidInput("metric: image shapes differ");
  constexpr int r = 5;
  constexpr int size = 2 * r + 1;
  if (a.height < size || a.width < size) throw InvalidInput("ssim: image smaller than the 11x11 window");
  double win[size];
  double total = 0.0;
  for (int i = 0; i < size; ++i) total += win[i] = std::exp(-(i - r) * (i - r) / (2.0 * 1.5 * 1.5));
  for (double& w : win) w /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int oh = a.height - size + 1, ow = a.width - size + 1;
  // Separable filtering of x, y, x^2, y^2, xy: rows first, then columns.
  auto filter = [&](const std::vector<double>& img) {
    std::vector<double> tmp(static_cast<std::size_t>(a.height) * ow), out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < size; ++k) s += win[k] * img[static_cast<std::size_t>(y) * a.width + x + k];
        tmp[static_cast<std::size_t>(y) * ow + x] = s;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < size; ++k) s += win[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = s;
      }
    return out;
  };
  double sum = 0.0;
  const std::size_t n = static_cast<std::size_t>(a.height) * a.width;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.pixels[i * a.channels + c];
      y[i] = b.pixels[i * b.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    auto mx = filter(x), my = filter(y), sxx = filter(xx), syy = filter(yy), sxy = filter(xy);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
      sum += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
  }
  return sum / (static_cast<double>(oh) * ow * a.channels);
}

// --- fitting ----------------------------------------------------------------

struct ImageFitConfig {
  int hidden_dim = 128;
  int steps = 2000;
  double lr_start = 1e-2;
  double lr_end = 1e-3;
  // Total bandwidth in cycles per unit; 0 selects half a cycle per pixel.
  double bandwidth = 0.0;
  std::vector<int> heads{1, 2, 4};
  std::vector<double> scales{0.25, 0.5, 1.0};
  training::SupervisionMode mode = training::SupervisionMode::PerHead;
  std::uint64_t seed = 0;
};

// Four hidden layers with bandwidths (B/8, B/8, B/4, B/4, B/4).
inline NetworkSpec image_network_spec(const Image& img, const ImageFitConfig& cfg) {
  const double b = cfg.bandwidth > 0.0 ? cfg.bandwidth : 0.5 * std::max(img.height, img.width);
  NetworkSpec s;
  s.input_dim = 2;
  s.hidden_dim = cfg.hidden_dim;
  s.num_sine_layers = 5;
  s.output_dim = img.channels;
  s.layer_bandwidths = {b / 8, b / 8, b / 4, b / 4, b / 4};
  s.output_head_layers = cfg.heads;
  s.period = 1.0;
  s.quantize_frequencies = true;
  s.validate();
  return s;
}

template <class T>
Image render_head(const BaconParams<T>& p, const NetworkSpec& spec, int head_layer, int height, int width, double offset = 0.0,
                  bool clamp = true) {
  const auto y = network::evaluate_head_chunked(p, spec, pixel_grid(height, width, offset), head_layer);
  return outputs_to_image(y, height, width, clamp);
}

// Samples the deepest head over [lo, hi)^2 at `pixels_per_unit` samples per
// unit length (no clamping, so tiles can be compared exactly).
template <class T>
Image render_extrapolated(const BaconParams<T>& p, const NetworkSpec& spec, int pixels_per_unit, double lo = -2.0, double hi = 2.0) {
  const double extent = hi - lo;
  const double n = extent * pixels_per_unit;
  if (!(extent > 0.0) || n != std::round(n)) throw InvalidInput("render_extrapolated: range must hold a whole number of pixels");
  const int side = static_cast<int>(n);
  const auto y = network::evaluate_head_chunked(p, spec, pixel_grid(side, side, 0.0, lo, extent), spec.deepest_head());
  return outputs_to_image(y, side, side, false);
}

struct HeadMetrics {
  int layer = 0;
  int height = 0;
  int width = 0;
  double bandwidth = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;  // NaN below 11x11
};

struct ImageFitResult {
  NetworkSpec spec;
  BaconParams<float> params;
  std::vector<training::StepLog> curve;
  std::vector<Image> pyramid;
  std::vector<Image> head_outputs;  // each head at its pyramid resolution
  std::vector<HeadMetrics> metrics;  // against the matching pyramid level
  double validation_psnr = 0.0;      // deepest head on the half-pixel grid
};

// Supervision groups for the image: per-head mode gives every head its own
// pyramid level on its own grid; shared mode gives every head the full image.
inline std::vector<training::SupervisionGroup<float>> image_groups(const std::vector<Image>& pyramid, const NetworkSpec& spec,
                                                                    training::SupervisionMode mode) {
  std::vector<training::SupervisionGroup<float>> groups;
  const auto heads = static_cast<std::size_t>(spec.num_heads());
  if (mode == training::SupervisionMode::SharedTarget) {
    training::SupervisionGroup<float> g;
    const Image& full = pyramid.back();
    g.inputs = pixel_grid(full.height, full.width);
    g.targets.assign(heads, image_targets<float>(full));
    groups.push_back(std::move(g));
    return groups;
  }
  if (pyramid.size() != heads) throw InvalidInput("image fit: need one pyramid level per head");
  for (std::size_t h = 0; h < heads; ++h) {
    training::SupervisionGroup<float> g;
    g.inputs = pixel_grid(pyramid[h].height, pyramid[h].width);
    g.targets.resize(heads);
    g.targets[h] = image_targets<float>(pyramid[h]);
    groups.push_back(std::move(g));
  }
  return groups;
}

inline ImageFitResult fit_image(const Image& img, const ImageFitConfig& cfg) {
  if (cfg.scales.size() != cfg.heads.size()) throw InvalidInput("fit_image: need one scale per head");
  ImageFitResult r;
  r.spec = image_network_spec(img, cfg);
  r.pyramid = build_reference_pyramid(img, cfg.scales);
  numerics::Rng rng(cfg.seed);
  auto init = network::init_network(r.spec, rng).cast<float>();

  training::TrainConfig tc;
  tc.total_steps = cfg.steps;
  tc.lr_start = cfg.lr_start;
  tc.lr_end = cfg.lr_end;
  tc.seed = cfg.seed;
  tc.mode = cfg.mode;
  const auto groups = image_groups(r.pyramid, r.spec, cfg.mode);
  training::Sampler<float> sampler = [&groups](int, std::vector<training::SupervisionGroup<float>>& out) {
    if (out.empty()) out = groups;
  };
  auto res = training::train(std::move(init), r.spec, sampler, tc);
  r.params = std::move(res.params);
  r.curve = std::move(res.curve);

  for (std::size_t h = 0; h < r.pyramid.size(); ++h) {
    const auto& ref = r.pyramid[h];
    const int layer = r.spec.output_head_layers[h];
    r.head_outputs.push_back(render_head(r.params, r.spec, layer, ref.height, ref.width));
    HeadMetrics m;
    m.layer = layer;
    m.height = ref.height;
    m.width = ref.width;
    m.bandwidth = network::cumulative_bandwidth(r.spec, layer);
    m.psnr = psnr(r.head_outputs.back(), ref);
    // Levels smaller than the SSIM window report NaN.
    m.ssim = std::min(ref.height, ref.width) >= 11 ? ssim(r.head_outputs.back(), ref) : std::numeric_limits<double>::quiet_NaN();
    r.metrics.push_back(m);
  }
  const Image val = render_head(r.params, r.spec, r.spec.deepest_head(), img.height, img.width, 0.5);
  r.validation_psnr = psnr(val, half_pixel_shift(img));
  return r;
}

// Every `factor`-th pixel of an image, starting at the origin.
inline Image point_subsample(const Image& img, int factor) {
  if (factor < 1 || img.height % factor || img.width % factor) throw InvalidInput("point_subsample: factor must divide the image");
  Image out(img.height / factor, img.width / factor, img.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y * factor, x * factor, c);
  return out;
}

}  // namespace bacon::image
