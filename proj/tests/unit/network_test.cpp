#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "bacon/fft.hpp"
#include "bacon/network.hpp"

using namespace bacon;
using namespace bacon::network;

namespace {

NetworkSpec small_spec(int layers = 3, int dh = 8, int din = 2, int dout = 2) {
  NetworkSpec s;
  s.input_dim = din;
  s.hidden_dim = dh;
  s.num_sine_layers = layers;
  s.output_dim = dout;
  s.layer_bandwidths.assign(layers, 3.0);
  s.output_head_layers.clear();
  for (int i = 1; i < layers; ++i) s.output_head_layers.push_back(i);
  if (s.output_head_layers.empty()) s.output_head_layers.push_back(0);
  return s;
}

Inputs random_inputs(int din, int n, std::uint64_t seed) {
  numerics::Rng r(seed);
  Inputs x(din, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = r.uniform(-0.5, 0.5);
  return x;
}

// Randomize biases too so every gradient path is exercised.
BaconParams<double> random_params(const NetworkSpec& s, std::uint64_t seed) {
  numerics::Rng rng(seed);
  auto p = init_network(s, rng);
  auto extra = rng.fork(99);
  for (auto& b : p.hidden_biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = extra.uniform(-0.5, 0.5);
  for (auto& b : p.head_biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = extra.uniform(-0.5, 0.5);
  return p;
}

double objective(const BaconParams<double>& p, const NetworkSpec& s, const Inputs& x, const std::vector<Eigen::MatrixXd>& c) {
  auto tr = forward(p, s, x);
  double v = 0.0;
  for (std::size_t h = 0; h < c.size(); ++h) v += (tr.heads[h].array() * c[h].array()).sum();
  return v;
}

}  // namespace

TEST(NetworkSpec, Validation) {
  auto s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.layer_bandwidths.pop_back();
  EXPECT_THROW(s.validate(), InvalidInput);
  s = small_spec();
  s.output_head_layers = {2, 1};
  EXPECT_THROW(s.validate(), InvalidInput);
  s.output_head_layers = {3};
  EXPECT_THROW(s.validate(), InvalidInput);
  s.output_head_layers = {};
  EXPECT_THROW(s.validate(), InvalidInput);
}

TEST(CumulativeBandwidth, ImagePartition) {
  NetworkSpec s;
  s.num_sine_layers = 5;
  const double b = 32.0;
  s.layer_bandwidths = {b / 8, b / 8, b / 4, b / 4, b / 4};
  s.output_head_layers = {1, 2, 4};
  EXPECT_DOUBLE_EQ(cumulative_bandwidth(s, 1), b / 4);
  EXPECT_DOUBLE_EQ(cumulative_bandwidth(s, 2), b / 2);
  EXPECT_DOUBLE_EQ(cumulative_bandwidth(s, 4), b);
  NetworkSpec one;
  one.layer_bandwidths = {5.0};
  EXPECT_DOUBLE_EQ(cumulative_bandwidth(one, 0), 5.0);
  one.layer_bandwidths = {0.0};
  EXPECT_DOUBLE_EQ(cumulative_bandwidth(one, 0), 0.0);
}

TEST(Init, FrequenciesQuantizedAndBounded) {
  auto s = small_spec(4, 64, 3, 1);
  s.layer_bandwidths = {2.0, 3.5, 0.0, 7.0};
  s.period = 2.0;
  numerics::Rng rng(1);
  auto p = init_network(s, rng);
  for (int i = 0; i < 4; ++i)
    for (Eigen::Index k = 0; k < p.frequencies[i].size(); ++k) {
      const double w = p.frequencies[i].data()[k];
      EXPECT_LE(std::abs(w), kTwoPi * s.layer_bandwidths[i] + 1e-12);
      const double bins = w * s.period / kTwoPi;
      EXPECT_NEAR(bins, std::round(bins), 1e-12);
    }
  const double bound = std::sqrt(6.0 / 64);
  for (const auto& w : p.hidden_weights) EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  for (const auto& b : p.hidden_biases) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& v : p.phases) EXPECT_LE(v.cwiseAbs().maxCoeff(), std::numbers::pi);
}

TEST(Init, ZeroBandwidthGivesConstantOutput) {
  auto s = small_spec(3, 16, 2, 1);
  s.layer_bandwidths.assign(3, 0.0);
  numerics::Rng rng(4);
  auto p = init_network(s, rng);
  for (const auto& f : p.frequencies) EXPECT_EQ(f.cwiseAbs().maxCoeff(), 0.0);
  auto y = forward(p, s, random_inputs(2, 50, 3)).heads.back();
  EXPECT_LT((y.array() - y(0, 0)).abs().maxCoeff(), 1e-15);
}

TEST(Init, DeterministicUnderSeed) {
  auto s = small_spec();
  numerics::Rng a(5), b(5);
  auto p = init_network(s, a);
  auto q = init_network(s, b);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(p.frequencies[i], q.frequencies[i]);
  for (std::size_t i = 0; i < p.hidden_weights.size(); ++i) EXPECT_EQ(p.hidden_weights[i], q.hidden_weights[i]);
}

TEST(Forward, ConstantPath) {
  auto s = small_spec();
  numerics::Rng rng(2);
  auto p = init_network(s, rng);
  for (auto& w : p.hidden_weights) w.setZero();
  for (auto& w : p.head_weights) w.setZero();
  for (auto& b : p.head_biases) b.setConstant(0.75);
  auto tr = forward(p, s, random_inputs(2, 40, 1));
  for (const auto& y : tr.heads) EXPECT_TRUE((y.array() == 0.75).all());
}

TEST(Forward, SingleLayerClosedForm) {
  auto s = small_spec(1, 6, 2, 1);
  numerics::Rng rng(8);
  auto p = init_network(s, rng);
  p.head_biases[0](0) = 0.3;
  auto x = random_inputs(2, 25, 5);
  auto y = forward(p, s, x).heads[0];
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double ref = 0.3;
    for (int j = 0; j < 6; ++j) ref += p.head_weights[0](0, j) * std::sin(p.frequencies[0].row(j).dot(x.col(c)) + p.phases[0](j));
    EXPECT_NEAR(y(0, c), ref, 1e-12);
  }
}

TEST(Forward, RejectsBadShapes) {
  auto s = small_spec();
  numerics::Rng rng(2);
  auto p = init_network(s, rng);
  EXPECT_THROW(forward(p, s, random_inputs(3, 4, 1)), InvalidInput);
  EXPECT_THROW(forward(p, s, Inputs(2, 0)), InvalidInput);
  Inputs bad = random_inputs(2, 4, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(p, s, bad), InvalidInput);
  auto q = p;
  q.hidden_weights[0].resize(3, 3);
  EXPECT_THROW(forward(q, s, random_inputs(2, 4, 1)), InvalidInput);
}

TEST(Forward, Periodicity) {
  auto s = small_spec(4, 16, 2, 1);
  s.layer_bandwidths = {2, 2, 4, 4};
  numerics::Rng rng(6);
  auto p = init_network(s, rng);
  auto x = random_inputs(2, 64, 7);
  auto y = forward(p, s, x).heads.back();
  for (int axis = 0; axis < 2; ++axis)
    for (double shift : {1.0, -3.0, 17.0}) {
      Inputs xs = x;
      xs.row(axis).array() += shift;
      auto ys = forward(p, s, xs).heads.back();
      EXPECT_LT((ys - y).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Forward, HeadSpectraAreBandLimited) {
  NetworkSpec s;
  s.input_dim = 1;
  s.hidden_dim = 32;
  s.num_sine_layers = 4;
  s.layer_bandwidths = {3, 3, 5, 6};
  s.output_head_layers = {0, 1, 3};
  numerics::Rng rng(10);
  auto p = init_network(s, rng);
  const int n = 128;
  Inputs x(1, n);
  for (int i = 0; i < n; ++i) x(0, i) = -0.5 + double(i) / n;
  auto tr = forward(p, s, x);
  for (int h = 0; h < s.num_heads(); ++h) {
    numerics::RealGrid g({static_cast<std::size_t>(n)});
    for (int i = 0; i < n; ++i) g.values[i] = tr.heads[h](0, i);
    auto spec = numerics::dft_spectrum(g);
    const double limit = cumulative_bandwidth(s, s.output_head_layers[h]);
    EXPECT_LE(numerics::relative_out_of_band_peak(spec, limit), 1e-6) << "head " << h;
  }
}

TEST(Truncated, DeepestHeadEqualsForward) {
  auto s = small_spec(4, 8, 2, 2);
  numerics::Rng rng(3);
  auto p = random_params(s, 3);
  auto x = random_inputs(2, 30, 2);
  auto tr = forward(p, s, x);
  for (int h : s.output_head_layers) EXPECT_EQ(evaluate_truncated(p, s, x, h), tr.heads[s.head_slot(h)]);
  EXPECT_THROW(evaluate_truncated(p, s, x, 0), InvalidInput);
}

TEST(Truncated, DoesNotReadDeeperLayers) {
  NetworkSpec s = small_spec(9, 8, 3, 1);
  s.output_head_layers = {2, 4, 6, 8};
  auto p = random_params(s, 4);
  auto x = random_inputs(3, 20, 9);
  auto ref = evaluate_truncated(p, s, x, 2);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 3; i < 9; ++i) {
    p.frequencies[i].setConstant(nan);
    p.phases[i].setConstant(nan);
    p.hidden_weights[i - 1].setConstant(nan);
    p.hidden_biases[i - 1].setConstant(nan);
  }
  for (int h = 1; h < 4; ++h) p.head_weights[h].setConstant(nan);
  auto y = evaluate_truncated(p, s, x, 2);
  EXPECT_TRUE(y.allFinite());
  EXPECT_EQ(y, ref);
}

TEST(Truncated, FirstHeadIsCheaper) {
  NetworkSpec s = small_spec(8, 256, 3, 1);
  s.output_head_layers = {1, 7};
  numerics::Rng rng(1);
  auto p = init_network(s, rng).cast<float>();
  auto x = random_inputs(3, 4096, 1);
  auto time = [&](int head) {
    double best = 1e9;
    for (int r = 0; r < 3; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      auto y = evaluate_truncated(p, s, x, head);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      EXPECT_EQ(y.cols(), x.cols());
    }
    return best;
  };
  EXPECT_LT(time(1), time(7));
}

TEST(Backward, ZeroHeadGradsGiveZeroGradients) {
  auto s = small_spec();
  auto p = random_params(s, 1);
  auto tr = forward(p, s, random_inputs(2, 10, 1));
  std::vector<Eigen::MatrixXd> dy(s.num_heads());
  for (auto& d : dy) d = Eigen::MatrixXd::Zero(2, 10);
  auto g = backward(p, s, tr, dy);
  for (auto t : trainable_tensors(g))
    for (double v : t) EXPECT_EQ(v, 0.0);
}

TEST(Backward, OutputBiasGradientIsBatchSum) {
  auto s = small_spec();
  auto p = random_params(s, 1);
  auto tr = forward(p, s, random_inputs(2, 10, 1));
  numerics::Rng r(3);
  std::vector<Eigen::MatrixXd> dy(s.num_heads());
  for (auto& d : dy) {
    d.resize(2, 10);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = r.uniform(-1, 1);
  }
  auto g = backward(p, s, tr, dy);
  for (int h = 0; h < s.num_heads(); ++h) EXPECT_LT((g.head_biases[h] - dy[h].rowwise().sum()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, StaleTraceRejected) {
  auto s = small_spec();
  auto p = random_params(s, 1);
  auto tr = forward(p, s, random_inputs(2, 10, 1));
  tr.hidden[1].resize(3, 10);
  std::vector<Eigen::MatrixXd> dy(s.num_heads());
  EXPECT_THROW(backward(p, s, tr, dy), InvalidInput);
}

TEST(Backward, MatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto s = small_spec(3, 8, 2, 2);
    auto p = random_params(s, seed);
    auto x = random_inputs(2, 7, seed + 100);
    numerics::Rng r(seed + 200);
    std::vector<Eigen::MatrixXd> c(s.num_heads());
    for (auto& m : c) {
      m.resize(2, 7);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.uniform(-1, 1);
    }
    auto g = backward(p, s, forward(p, s, x), c);
    auto gt = trainable_tensors(g);
    auto pt = trainable_tensors(p);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t t = 0; t < pt.size(); ++t)
      for (std::size_t i = 0; i < pt[t].size(); ++i) {
        const double keep = pt[t][i];
        pt[t][i] = keep + h;
        const double up = objective(p, s, x, c);
        pt[t][i] = keep - h;
        const double down = objective(p, s, x, c);
        pt[t][i] = keep;
        const double fd = (up - down) / (2 * h);
        const double err = std::abs(fd - gt[t][i]) / std::max(1.0, std::abs(fd));
        worst = std::max(worst, err);
      }
    EXPECT_LT(worst, 1e-5) << "seed " << seed;
  }
}

TEST(Chunked, MatchesSingleShot) {
  auto s = small_spec(3, 8, 2, 2);
  auto p = random_params(s, 12);
  auto x = random_inputs(2, 1000, 4);
  auto a = evaluate_head_chunked(p, s, x, 2, 97);
  auto b = evaluate_truncated(p, s, x, 2);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}
