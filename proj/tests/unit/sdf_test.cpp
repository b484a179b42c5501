#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bacon/sdf.hpp"

using namespace bacon;
using namespace bacon::sdf;
using mesh::TriangleMesh;

namespace {

Vec3 random_point(numerics::Rng& r, double lo, double hi) { return {r.uniform(lo, hi), r.uniform(lo, hi), r.uniform(lo, hi)}; }

double median_abs(const Eigen::RowVectorXd& v) {
  std::vector<double> a(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(v(i));
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2), a.end());
  return a[a.size() / 2];
}

// Volume of the lens shared by two balls of radius r whose centers are d apart.
double lens_volume(double r, double d) {
  if (d >= 2 * r) return 0.0;
  return std::numbers::pi * (4 * r + d) * (2 * r - d) * (2 * r - d) / 12.0;
}

double two_ball_iou(double r, double d) {
  const double ball = 4.0 / 3.0 * std::numbers::pi * r * r * r;
  const double lens = lens_volume(r, d);
  return lens / (2 * ball - lens);
}

Occupancy ball_occupancy(int res, double r, const Vec3& c) { return occupancy(SdfSource::sphere(r, c), res); }

}  // namespace

TEST(SphereSdf, ClosedForm) {
  EXPECT_DOUBLE_EQ(analytic_sphere_sdf(Vec3::Zero(), 0.25), -0.25);
  EXPECT_DOUBLE_EQ(analytic_sphere_sdf(Vec3(0, 0.25, 0), 0.25), 0.0);
  EXPECT_DOUBLE_EQ(analytic_sphere_sdf(Vec3(0.5, 0, 0), 0.25), 0.25);
  EXPECT_DOUBLE_EQ(analytic_sphere_sdf(Vec3(1, 1, 0), 0.5, Vec3(1, 0, 0)), 0.5);
  EXPECT_THROW(SdfSource::sphere(0.0), InvalidInput);
}

TEST(MeshSdf, CubeCenter) {
  for (double edge : {0.4, 0.6, 1.0}) {
    const auto src = SdfSource::from_mesh(mesh::make_cube(edge));
    EXPECT_NEAR(src.evaluate(Vec3::Zero()), -0.5 * edge, 1e-15);
  }
}

TEST(MeshSdf, FarPointMatchesBruteForce) {
  const auto m = mesh::make_icosphere(0.3, 2);
  const auto src = SdfSource::from_mesh(m);
  numerics::Rng r(21);
  for (int i = 0; i < 200; ++i) {
    Vec3 p = random_point(r, -1, 1);
    p += 3.0 * p.normalized();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      auto [a, b, c] = m.triangle(f);
      best = std::min(best, mesh::point_triangle_distance_sq(p, a, b, c));
    }
    const double d = src.evaluate(p);
    EXPECT_GT(d, 0.0);
    EXPECT_NEAR(d, std::sqrt(best), 1e-9);
  }
}

TEST(MeshSdf, IcosphereWithinChordBound) {
  const double radius = 0.3;
  const auto m = mesh::make_icosphere(radius, 3);
  const double chord = mesh::icosphere_chord_error(m, Vec3::Zero(), radius);
  ASSERT_GT(chord, 0.0);
  ASSERT_LT(chord, 0.01);
  const auto src = SdfSource::from_mesh(m);
  numerics::Rng r(22);
  Inputs pts(3, 10000);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) = random_point(r, -0.5, 0.5);
  const auto d = src.evaluate_many(pts);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) worst = std::max(worst, std::abs(d(i) - analytic_sphere_sdf(Vec3(pts.col(i)), radius)));
  EXPECT_LE(worst, chord + 1e-12);
}

TEST(MeshSdf, SignIgnoresOrientation) {
  auto m = mesh::read_obj(std::string(BACON_DATA_DIR) + "/torus.obj");
  const auto a = SdfSource::from_mesh(m);
  mesh::flip_faces(m);
  const auto b = SdfSource::from_mesh(m);
  numerics::Rng r(23);
  Inputs pts(3, 2000);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) = random_point(r, -0.5, 0.5);
  const auto da = a.evaluate_many(pts), db = b.evaluate_many(pts);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    EXPECT_EQ(da(i) < 0, db(i) < 0);
    EXPECT_NEAR(da(i), db(i), 1e-15);
  }
  EXPECT_LT(a.evaluate(Vec3(0.28, 0, 0)), 0.0);  // inside the tube
  EXPECT_GT(a.evaluate(Vec3::Zero()), 0.0);      // the hole
}

TEST(MeshSdf, RejectsOpenMesh) {
  auto m = mesh::make_cube(0.5);
  m.faces.pop_back();
  EXPECT_THROW(SdfSource::from_mesh(m), InvalidMesh);
}

// Central differences away from the medial axis; points whose nearest face
// changes inside the stencil are skipped.
TEST(MeshSdf, GradientHasUnitNorm) {
  const auto m = mesh::read_obj(std::string(BACON_DATA_DIR) + "/torus.obj");
  const auto src = SdfSource::from_mesh(m);
  const mesh::TriangleBvh bvh(m);
  numerics::Rng r(24);
  const double h = 1e-6;
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = random_point(r, -0.5, 0.5);
    if (std::abs(src.evaluate(p)) < 10 * h) continue;
    const auto face = bvh.nearest(p).face;
    Vec3 g;
    bool stable = true;
    for (int a = 0; a < 3 && stable; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      stable = bvh.nearest(p + e).face == face && bvh.nearest(p - e).face == face;
      g[a] = (src.evaluate(p + e) - src.evaluate(p - e)) / (2 * h);
    }
    if (!stable) continue;
    ++checked;
    EXPECT_GE(g.norm(), 0.99);
    EXPECT_LE(g.norm(), 1.01);
  }
  EXPECT_GT(checked, 800);
}

TEST(Normalize, FitsDomain) {
  const auto m = normalize_to_domain(mesh::make_cube(7.0, Vec3(10, -3, 2)));
  mesh::Aabb box;
  for (const auto& v : m.vertices) box.grow(v);
  EXPECT_TRUE(box.lo.isApprox(Vec3::Constant(-0.45)));
  EXPECT_TRUE(box.hi.isApprox(Vec3::Constant(0.45)));
}

TEST(Sampling, SphereSamplesCarryExactSdf) {
  const auto src = SdfSource::sphere(0.25);
  numerics::Rng r(31);
  const auto b = sample_sdf_batch(src, 2000, Tier::Coarse, r);
  ASSERT_EQ(b.size(), 2000u);
  for (Eigen::Index i = 0; i < b.points.cols(); ++i) {
    EXPECT_EQ(b.sdf(i), analytic_sphere_sdf(Vec3(b.points.col(i)), 0.25));
    EXPECT_LE(b.points.col(i).cwiseAbs().maxCoeff(), 0.5);
  }
  EXPECT_THROW(sample_sdf_batch(src, 0, Tier::Fine, r), InvalidInput);
}

TEST(Sampling, FineTierHugsSurface) {
  const auto src = SdfSource::from_mesh(mesh::read_obj(std::string(BACON_DATA_DIR) + "/torus.obj"));
  numerics::Rng r(32);
  const auto coarse = sample_sdf_batch(src, 5000, Tier::Coarse, r);
  const auto fine = sample_sdf_batch(src, 5000, Tier::Fine, r);
  EXPECT_LT(20 * median_abs(fine.sdf), median_abs(coarse.sdf));
}

TEST(Sampling, SurfaceSamplesAreUniformByArea) {
  // Two faces with area ratio 1:3 in separate planes, told apart by z.
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {3, 0, 1}, {0, 1, 1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  numerics::Rng r(33);
  const auto pts = sample_mesh_surface(m, 1000000, r);
  std::size_t upper = 0;
  for (const auto& p : pts) upper += p.z() > 0.5;
  EXPECT_NEAR(static_cast<double>(upper) / pts.size(), 0.75, 0.75 * 0.02);
}

TEST(Sampling, FacePickFollowsArea) {
  // Cube faces have equal area, so every face gets 1/12 of the draws.
  const auto src = SdfSource::from_mesh(mesh::make_cube(0.5));
  std::vector<int> hits(12, 0);
  const int n = 120000;
  for (int i = 0; i < n; ++i) ++hits[src.pick_face((i + 0.5) / n)];
  for (int h : hits) EXPECT_NEAR(h, n / 12, 2);
}

TEST(Sampling, TableColumns) {
  const auto src = SdfSource::sphere(0.25);
  numerics::Rng r(34);
  const auto t = sample_table({sample_sdf_batch(src, 3, Tier::Coarse, r), sample_sdf_batch(src, 2, Tier::Fine, r)});
  std::ostringstream os;
  t.write(os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "x,y,z,sdf,tier");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 6);
  EXPECT_NE(s.find(",fine\n"), std::string::npos);
}

TEST(Chamfer, TrivialCases) {
  const std::vector<Vec3> a{Vec3::Zero()}, b{Vec3::UnitX()};
  EXPECT_DOUBLE_EQ(chamfer(a, b), 2.0);
  EXPECT_EQ(chamfer(a, a), 0.0);
  EXPECT_THROW(chamfer({}, a), InvalidInput);
  EXPECT_THROW(chamfer(a, {}), InvalidInput);
}

TEST(Chamfer, MatchesBruteForce) {
  numerics::Rng r(41);
  std::vector<Vec3> a, b;
  for (int i = 0; i < 500; ++i) a.push_back(random_point(r, -0.5, 0.5));
  for (int i = 0; i < 500; ++i) b.push_back(random_point(r, -0.4, 0.6));
  auto one_way = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
      s += best;
    }
    return s / from.size();
  };
  const double brute = one_way(a, b) + one_way(b, a);
  EXPECT_NEAR(chamfer(a, b), brute, 1e-12);
  EXPECT_EQ(chamfer(a, b), chamfer(b, a));
}

TEST(Iou, TrivialCases) {
  const auto a = ball_occupancy(16, 0.2, Vec3::Zero());
  EXPECT_EQ(iou(a, a), 1.0);
  const auto l = ball_occupancy(16, 0.15, Vec3(-0.25, 0, 0)), r = ball_occupancy(16, 0.15, Vec3(0.25, 0, 0));
  EXPECT_GT(l.count(), 0u);
  EXPECT_EQ(l.count(), r.count());
  EXPECT_EQ(iou(l, r), 0.0);
  const auto empty = ball_occupancy(16, 0.001, Vec3(0.01, 0.01, 0.01));
  EXPECT_EQ(empty.count(), 0u);
  EXPECT_EQ(iou(empty, empty), 1.0);
  EXPECT_THROW(iou(a, ball_occupancy(8, 0.2, Vec3::Zero())), InvalidInput);
}

// Offset balls against the lens-volume ratio. Discretization can move the
// boundary by up to half a cell diagonal, so the grid result is bracketed by
// the closed form at radii r -/+ that amount.
TEST(Iou, OffsetBallsMatchLensVolume) {
  const int res = 64;
  const double r = 0.2, d = 0.1, slack = std::sqrt(3.0) / (2.0 * res);
  const double measured = iou(ball_occupancy(res, r, Vec3(-d / 2, 0, 0)), ball_occupancy(res, r, Vec3(d / 2, 0, 0)));
  const double lo = std::min(two_ball_iou(r - slack, d), two_ball_iou(r + slack, d));
  const double hi = std::max(two_ball_iou(r - slack, d), two_ball_iou(r + slack, d));
  EXPECT_GE(measured, lo);
  EXPECT_LE(measured, hi);
  EXPECT_NEAR(measured, two_ball_iou(r, d), 0.01);
}

TEST(Occupancy, CellCenterOrder) {
  const auto x = cell_centers(4);
  ASSERT_EQ(x.cols(), 64);
  EXPECT_TRUE(x.col(0).isApprox(Vec3(-0.375, -0.375, -0.375)));
  EXPECT_TRUE(x.col(1).isApprox(Vec3(-0.125, -0.375, -0.375)));
  EXPECT_TRUE(x.col(4).isApprox(Vec3(-0.375, -0.125, -0.375)));
  EXPECT_TRUE(x.col(16).isApprox(Vec3(-0.375, -0.375, -0.125)));
  EXPECT_THROW(occupancy_from_values(Eigen::RowVectorXd::Zero(7), 2), InvalidInput);
}

TEST(FitSdf, NetworkLayout) {
  const auto s = sdf_network_spec(48, 16);
  EXPECT_EQ(s.num_sine_layers, 9);
  EXPECT_EQ(s.output_head_layers, (std::vector<int>{2, 4, 6, 8}));
  double total = 0.0;
  for (double b : s.layer_bandwidths) total += b;
  EXPECT_DOUBLE_EQ(total, 48.0);
  EXPECT_DOUBLE_EQ(s.layer_bandwidths[0], 2.0);
  EXPECT_DOUBLE_EQ(s.layer_bandwidths[8], 12.0);
}

TEST(FitSdf, ShortRunIsDeterministicAndLearns) {
  SdfFitConfig c;
  c.hidden_dim = 16;
  c.steps = 60;
  c.coarse_samples = 500;
  c.fine_samples = 500;
  c.lambda = 1.0;
  c.seed = 9;
  const auto src = SdfSource::sphere(0.25);
  const auto a = fit_sdf(src, c);
  const auto b = fit_sdf(src, c);
  ASSERT_EQ(a.curve.size(), 60u);
  EXPECT_LT(a.curve.back().total, 0.5 * a.curve.front().total);
  ASSERT_EQ(a.params.hidden_weights.size(), b.params.hidden_weights.size());
  for (std::size_t l = 0; l < a.params.hidden_weights.size(); ++l) EXPECT_EQ(a.params.hidden_weights[l], b.params.hidden_weights[l]);
  for (std::size_t h = 0; h < a.params.head_weights.size(); ++h) EXPECT_EQ(a.params.head_weights[h], b.params.head_weights[h]);
}

TEST(FitSdf, ZeroStepsStillReturnsParams) {
  SdfFitConfig c;
  c.hidden_dim = 8;
  c.steps = 0;
  const auto r = fit_sdf(SdfSource::sphere(0.25), c);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_EQ(network_occupancy(r.params, r.spec, 8).cells.size(), 512u);
}
