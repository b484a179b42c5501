#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bacon/csv.hpp"
#include "bacon/mesh.hpp"
#include "bacon/network.hpp"
#include "bacon/parallel.hpp"
#include "bacon/rng.hpp"
#include "bacon/spatial.hpp"
#include "bacon/training.hpp"

namespace bacon::sdf {

using mesh::Vec3;
using network::BaconParams;
using network::Inputs;
using network::NetworkSpec;

inline double analytic_sphere_sdf(const Vec3& p, double radius, const Vec3& center = Vec3::Zero()) {
  return (p - center).norm() - radius;
}

// Ray direction for inside/outside parity. Irrational components keep it off
// the edges and vertices of grid-aligned and dyadic geometry.
inline Vec3 parity_direction() {
  return Vec3(std::numbers::sqrt2 - 1.0, std::numbers::sqrt3 - 1.0, std::numbers::pi - 3.0).normalized();
}

// Analytic sphere or watertight triangle mesh. Immutable after construction;
// evaluate() may be called from several threads.
class SdfSource {
 public:
  static SdfSource sphere(double radius, const Vec3& center = Vec3::Zero()) {
    if (!(radius > 0.0)) throw InvalidInput("sphere radius must be positive");
    SdfSource s;
    s.radius_ = radius;
    s.center_ = center;
    return s;
  }

  // Rejects meshes with boundary or non-manifold edges.
  static SdfSource from_mesh(mesh::TriangleMesh m) {
    mesh::check_watertight(m);
    SdfSource s;
    s.mesh_ = std::make_shared<const mesh::TriangleMesh>(std::move(m));
    s.bvh_ = std::make_shared<const mesh::TriangleBvh>(*s.mesh_);
    std::vector<double> cdf;
    double total = 0.0;
    for (std::size_t f = 0; f < s.mesh_->faces.size(); ++f) {
      auto [a, b, c] = s.mesh_->triangle(f);
      total += mesh::triangle_area(a, b, c);
      cdf.push_back(total);
    }
    if (!(total > 0.0)) throw InvalidMesh("mesh has zero surface area");
    for (double& v : cdf) v /= total;
    cdf.back() = 1.0;
    s.area_cdf_ = std::move(cdf);
    return s;
  }

  bool is_mesh() const { return static_cast<bool>(mesh_); }
  const mesh::TriangleMesh& triangle_mesh() const { return *mesh_; }
  double radius() const { return radius_; }
  const Vec3& center() const { return center_; }

  double evaluate(const Vec3& p) const {
    if (!mesh_) return analytic_sphere_sdf(p, radius_, center_);
    const double d = std::sqrt(bvh_->nearest(p).distance_sq);
    const bool inside = bvh_->count_crossings(p, parity_direction()) % 2 == 1;
    return inside ? -d : d;
  }

  Eigen::RowVectorXd evaluate_many(const Inputs& pts) const {
    Eigen::RowVectorXd out(pts.cols());
    parallel_for(static_cast<std::size_t>(pts.cols()), [&](std::size_t lo, std::size_t hi) {
      for (auto i = static_cast<Eigen::Index>(lo); i < static_cast<Eigen::Index>(hi); ++i) out(i) = evaluate(Vec3(pts.col(i)));
    });
    return out;
  }

  // Index of the face a surface sample lands on; exposed for testing.
  std::size_t pick_face(double u) const {
    const auto it = std::upper_bound(area_cdf_.begin(), area_cdf_.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - area_cdf_.begin(), static_cast<std::ptrdiff_t>(area_cdf_.size()) - 1));
  }

  // Uniform by area over the surface.
  Vec3 sample_surface(numerics::Rng& rng) const {
    if (!mesh_) {
      Vec3 g;
      do g = Vec3(rng.normal(), rng.normal(), rng.normal());
      while (g.squaredNorm() == 0.0);
      return center_ + radius_ * g.normalized();
    }
    const auto f = pick_face(rng.uniform());
    auto [a, b, c] = mesh_->triangle(f);
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    return (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c;
  }

 private:
  double radius_ = 0.0;
  Vec3 center_ = Vec3::Zero();
  std::shared_ptr<const mesh::TriangleMesh> mesh_;
  std::shared_ptr<const mesh::TriangleBvh> bvh_;
  std::vector<double> area_cdf_;
};

// Fits a mesh into [-0.5, 0.5]^3: centers its bounding box and scales the
// longest side to `extent`.
inline mesh::TriangleMesh normalize_to_domain(mesh::TriangleMesh m, double extent = 0.9) {
  if (m.vertices.empty()) throw InvalidMesh("mesh has no vertices");
  mesh::Aabb box;
  for (const auto& v : m.vertices) box.grow(v);
  const Vec3 mid = 0.5 * (box.lo + box.hi);
  const double side = (box.hi - box.lo).maxCoeff();
  if (!(side > 0.0)) throw InvalidMesh("mesh has zero extent");
  for (auto& v : m.vertices) v = (v - mid) * (extent / side);
  return m;
}

// --- sampling --------------------------------------------------------------

enum class Tier { Coarse, Fine };

inline const char* tier_name(Tier t) { return t == Tier::Coarse ? "coarse" : "fine"; }

inline double default_variance(Tier t) { return t == Tier::Coarse ? 2e-2 : 2e-6; }

struct SdfSampleBatch {
  Inputs points;            // 3 x N
  Eigen::RowVectorXd sdf;   // N
  Tier tier = Tier::Fine;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
};

// Surface samples perturbed per coordinate by Laplacian noise, clamped to the
// domain box, then labelled with the ground-truth SDF.
inline SdfSampleBatch sample_sdf_batch(const SdfSource& src, std::size_t n, Tier tier, numerics::Rng& rng,
                                       std::optional<double> variance = std::nullopt) {
  if (n < 1) throw InvalidInput("sample_sdf_batch: n must be >= 1");
  const double var = variance.value_or(default_variance(tier));
  SdfSampleBatch b;
  b.tier = tier;
  b.points.resize(3, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < b.points.cols(); ++i) {
    Vec3 p = src.sample_surface(rng);
    for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a] + numerics::sample_laplacian(rng, var), -0.5, 0.5);
    b.points.col(i) = p;
  }
  b.sdf = src.evaluate_many(b.points);
  return b;
}

inline CsvTable sample_table(const std::vector<SdfSampleBatch>& batches) {
  CsvTable t({"x", "y", "z", "sdf", "tier"});
  for (const auto& b : batches)
    for (Eigen::Index i = 0; i < b.points.cols(); ++i)
      t.row() << b.points(0, i) << b.points(1, i) << b.points(2, i) << b.sdf(i) << std::string(tier_name(b.tier));
  return t;
}

// --- fitting -----------------------------------------------------------------

struct SdfFitConfig {
  double bandwidth = 32.0;
  int hidden_dim = 64;
  int steps = 5000;
  std::size_t coarse_samples = 5000;
  std::size_t fine_samples = 5000;
  double coarse_variance = 2e-2;
  double fine_variance = 2e-6;
  double lr_start = 1e-2;
  double lr_end = 1e-4;
  double lambda = 0.01;  // weight of the coarse term
  std::uint64_t seed = 0;
};

// Nine sine layers, heads after layers 2, 4, 6 and 8.
inline NetworkSpec sdf_network_spec(double bandwidth, int hidden_dim) {
  NetworkSpec s;
  s.input_dim = 3;
  s.hidden_dim = hidden_dim;
  s.num_sine_layers = 9;
  s.output_dim = 1;
  const double b = bandwidth;
  s.layer_bandwidths = {b / 24, b / 24, b / 24, b / 16, b / 16, b / 8, b / 8, b / 4, b / 4};
  s.output_head_layers = {2, 4, 6, 8};
  s.period = 1.0;
  s.quantize_frequencies = true;
  s.validate();
  return s;
}

struct SdfFitResult {
  NetworkSpec spec;
  BaconParams<float> params;
  std::vector<training::StepLog> curve;
};

// Stream ids under the top-level seed.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kSampleStream = 2;

inline SdfFitResult fit_sdf(const SdfSource& src, const SdfFitConfig& cfg) {
  SdfFitResult r;
  r.spec = sdf_network_spec(cfg.bandwidth, cfg.hidden_dim);
  const numerics::Rng root(cfg.seed);
  auto init_rng = root.fork(kInitStream);
  auto params = network::init_network(r.spec, init_rng).cast<float>();
  const auto heads = static_cast<std::size_t>(r.spec.num_heads());

  training::Sampler<float> sampler = [&](int step, std::vector<training::SupervisionGroup<float>>& groups) {
    auto rng = root.fork(kSampleStream).fork(static_cast<std::uint64_t>(step));
    groups.assign(2, {});
    const SdfSampleBatch batches[2] = {sample_sdf_batch(src, cfg.coarse_samples, Tier::Coarse, rng, cfg.coarse_variance),
                                       sample_sdf_batch(src, cfg.fine_samples, Tier::Fine, rng, cfg.fine_variance)};
    for (int k = 0; k < 2; ++k) {
      groups[static_cast<std::size_t>(k)].inputs = batches[k].points;
      groups[static_cast<std::size_t>(k)].targets.assign(heads, batches[k].sdf.cast<float>());
      groups[static_cast<std::size_t>(k)].weight = k == 0 ? cfg.lambda : 1.0;
    }
  };
  training::TrainConfig tc;
  tc.total_steps = cfg.steps;
  tc.lr_start = cfg.lr_start;
  tc.lr_end = cfg.lr_end;
  tc.seed = cfg.seed;
  tc.mode = training::SupervisionMode::SharedTarget;
  auto res = training::train(std::move(params), r.spec, sampler, tc);
  r.params = std::move(res.params);
  r.curve = std::move(res.curve);
  return r;
}

// --- evaluation ----------------------------------------------------------------

// Sum over both directions of the mean squared nearest-neighbour distance.
inline double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw InvalidInput("chamfer: point sets must be non-empty");
  auto one_way = [](const std::vector<Vec3>& from, const mesh::KdTree& to) {
    std::vector<double> d(from.size());
    parallel_for(from.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) d[i] = to.nearest_sq(from[i]);
    });
    double s = 0.0;
    for (double v : d) s += v;
    return s / static_cast<double>(from.size());
  };
  const mesh::KdTree ta(a), tb(b);
  return one_way(a, tb) + one_way(b, ta);
}

// n points uniform by area on a mesh surface.
inline std::vector<Vec3> sample_mesh_surface(const mesh::TriangleMesh& m, std::size_t n, numerics::Rng& rng) {
  if (m.faces.empty()) throw InvalidInput("cannot sample an empty mesh");
  std::vector<double> cdf;
  double total = 0.0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    auto [a, b, c] = m.triangle(f);
    cdf.push_back(total += mesh::triangle_area(a, b, c));
  }
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * total;
    const auto f = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    auto [a, b, c] = m.triangle(f);
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    out.push_back((1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c);
  }
  return out;
}

// Boolean grid of (sdf <= 0) at cell centers -0.5 + (i + 0.5) / res. Index
// order x fastest, then y, then z.
struct Occupancy {
  int resolution = 0;
  std::vector<std::uint8_t> cells;

  std::size_t count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }
};

inline Inputs cell_centers(int res) {
  Inputs x(3, static_cast<Eigen::Index>(res) * res * res);
  Eigen::Index k = 0;
  for (int z = 0; z < res; ++z)
    for (int y = 0; y < res; ++y)
      for (int i = 0; i < res; ++i, ++k) x.col(k) = Vec3(-0.5 + (i + 0.5) / res, -0.5 + (y + 0.5) / res, -0.5 + (z + 0.5) / res);
  return x;
}

inline Occupancy occupancy_from_values(const Eigen::RowVectorXd& sdf, int res) {
  if (sdf.size() != static_cast<Eigen::Index>(res) * res * res) throw InvalidInput("occupancy: value count does not match grid");
  Occupancy o;
  o.resolution = res;
  o.cells.resize(static_cast<std::size_t>(sdf.size()));
  for (Eigen::Index i = 0; i < sdf.size(); ++i) o.cells[static_cast<std::size_t>(i)] = sdf(i) <= 0.0;
  return o;
}

inline Occupancy occupancy(const SdfSource& src, int res) { return occupancy_from_values(src.evaluate_many(cell_centers(res)), res); }

template <class T>
Occupancy network_occupancy(const BaconParams<T>& p, const NetworkSpec& spec, int res, int head_layer = -1) {
  const int h = head_layer < 0 ? spec.deepest_head() : head_layer;
  return occupancy_from_values(network::evaluate_head_chunked(p, spec, cell_centers(res), h).row(0), res);
}

// |A and B| / |A or B|; 1 when both are empty.
inline double iou(const Occupancy& a, const Occupancy& b) {
  if (a.resolution != b.resolution || a.cells.size() != b.cells.size()) throw InvalidInput("iou: grid shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    inter += a.cells[i] & b.cells[i];
    uni += a.cells[i] | b.cells[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace bacon::sdf
