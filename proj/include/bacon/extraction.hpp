#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bacon/csv.hpp"
#include "bacon/detail/mc_tables.hpp"
#include "bacon/mesh.hpp"
#include "bacon/network.hpp"
#include "bacon/parallel.hpp"

namespace bacon::mesh {

enum class Strategy { Dense, Adaptive, Multiscale, Combined };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Dense: return "dense";
    case Strategy::Adaptive: return "adaptive";
    case Strategy::Multiscale: return "multiscale";
    case Strategy::Combined: return "combined";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  for (auto v : {Strategy::Dense, Strategy::Adaptive, Strategy::Multiscale, Strategy::Combined})
    if (s == strategy_name(v)) return v;
  throw InvalidInput("unknown extraction strategy '" + s + "'");
}

struct ExtractionConfig {
  int resolution = 128;  // samples per axis on the finest grid
  int levels = 4;
  double tau_factor = 0.7;  // adaptive threshold in finest voxel edges
  double alpha = 2.0;       // multiscale margin on the circumsphere radius
  Strategy strategy = Strategy::Combined;

  void validate() const {
    if (resolution < 2 || (resolution & (resolution - 1))) throw InvalidInput("extraction resolution must be a power of two >= 2");
    if (levels < 1) throw InvalidInput("extraction needs at least one level");
    if (levels > 1 && resolution % (1 << (levels - 1))) throw InvalidInput("resolution must be divisible by 2^(levels-1)");
    if (!(tau_factor > 0.0)) throw InvalidInput("tau factor must be > 0");
    if (!(alpha > 1.0)) throw InvalidInput("alpha must be > 1");
  }
  double voxel() const { return 1.0 / resolution; }
  double tau() const { return tau_factor * voxel(); }
};

// Batch SDF evaluation of a 3 x N point matrix. `low` is a cheap band-limited
// approximation; `full` is the reference field. Both must be thread-safe.
struct FieldPair {
  std::function<Eigen::RowVectorXd(const network::Inputs&)> low;
  std::function<Eigen::RowVectorXd(const network::Inputs&)> full;
};

inline FieldPair single_field(std::function<Eigen::RowVectorXd(const network::Inputs&)> f) { return {f, f}; }

// Splits the points into blocks and evaluates a head per block in parallel.
template <class T>
std::function<Eigen::RowVectorXd(const network::Inputs&)> network_field(const network::BaconParams<T>& p, const network::NetworkSpec& spec,
                                                                         int head_layer) {
  return [&p, &spec, head_layer](const network::Inputs& x) {
    constexpr Eigen::Index block = 8192;
    Eigen::RowVectorXd out(x.cols());
    const auto blocks = static_cast<std::size_t>((x.cols() + block - 1) / block);
    parallel_for(blocks, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t b = lo; b < hi; ++b) {
        const auto start = static_cast<Eigen::Index>(b) * block;
        const auto n = std::min(block, x.cols() - start);
        out.segment(start, n) = network::evaluate_truncated(p, spec, x.middleCols(start, n), head_layer).row(0).template cast<double>();
      }
    });
    return out;
  };
}

// First declared head as the low field, deepest head as the full one.
template <class T>
FieldPair network_fields(const network::BaconParams<T>& p, const network::NetworkSpec& spec) {
  if (spec.output_dim != 1) throw InvalidInput("mesh extraction needs a scalar network output");
  return {network_field(p, spec, spec.first_head()), network_field(p, spec, spec.deepest_head())};
}

struct LevelStats {
  int level = 0;
  std::size_t cells_evaluated = 0;
  std::size_t low_queries = 0;
  std::size_t full_queries = 0;
  double seconds = 0.0;
};

struct ExtractionReport {
  Strategy strategy = Strategy::Dense;
  int resolution = 0;
  TriangleMesh mesh;
  std::vector<LevelStats> levels;
  std::vector<std::uint64_t> cells;  // finest cells that were meshed, by minimum-corner key
  std::size_t open_edges = 0;  // edges used by one face: cracks or the domain boundary
  double seconds = 0.0;

  std::size_t low_queries() const {
    std::size_t s = 0;
    for (const auto& l : levels) s += l.low_queries;
    return s;
  }
  std::size_t full_queries() const {
    std::size_t s = 0;
    for (const auto& l : levels) s += l.full_queries;
    return s;
  }
};

namespace detail {

// Finest-grid sample i along an axis sits at -0.5 + i / R, i in [0, R). Cells
// join neighbouring samples, so there are R - 1 per axis.
inline double grid_coord(long i, int res) { return -0.5 + static_cast<double>(i) / res; }

inline std::uint64_t corner_key(long i, long j, long k, int res) {
  return (static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(res) + static_cast<std::uint64_t>(j)) * static_cast<std::uint64_t>(res) +
         static_cast<std::uint64_t>(i);
}

inline void corner_of(int c, int& dx, int& dy, int& dz) {
  dx = (c & 1) ^ ((c >> 1) & 1);
  dy = (c >> 1) & 1;
  dz = (c >> 2) & 1;
}

// Marching cubes over the listed cells (keys of their minimum corner, sorted).
// value(key) returns the sample at a grid corner. Edge vertices are shared
// between neighbouring cells and always interpolated from the lower corner, so
// a shared edge yields the same vertex bit for bit.
template <class Value>
TriangleMesh march(const std::vector<std::uint64_t>& cells, int res, Value&& value) {
  TriangleMesh m;
  std::unordered_map<std::uint64_t, int> edge_vertex;
  const auto r = static_cast<std::uint64_t>(res);
  for (auto key : cells) {
    const long i = static_cast<long>(key % r), j = static_cast<long>((key / r) % r), k = static_cast<long>(key / (r * r));
    double v[8];
    std::uint64_t ck[8];
    int index = 0;
    for (int c = 0; c < 8; ++c) {
      int dx, dy, dz;
      corner_of(c, dx, dy, dz);
      ck[c] = corner_key(i + dx, j + dy, k + dz, res);
      v[c] = value(ck[c]);
      if (v[c] < 0.0) index |= 1 << c;
    }
    const int edges = mesh::detail::kEdgeTable[index];
    if (!edges) continue;
    int vid[12];
    for (int e = 0; e < 12; ++e) {
      if (!(edges & (1 << e))) continue;
      int a = mesh::detail::kEdgeCorners[e][0], b = mesh::detail::kEdgeCorners[e][1];
      if (ck[a] > ck[b]) std::swap(a, b);
      int ax, ay, az, bx, by, bz;
      corner_of(a, ax, ay, az);
      corner_of(b, bx, by, bz);
      const int axis = bx != ax ? 0 : by != ay ? 1 : 2;
      const std::uint64_t ekey = ck[a] * 3 + static_cast<std::uint64_t>(axis);
      auto it = edge_vertex.find(ekey);
      if (it != edge_vertex.end()) {
        vid[e] = it->second;
        continue;
      }
      const double t = v[a] / (v[a] - v[b]);
      const Vec3 pa(grid_coord(i + ax, res), grid_coord(j + ay, res), grid_coord(k + az, res));
      const Vec3 pb(grid_coord(i + bx, res), grid_coord(j + by, res), grid_coord(k + bz, res));
      m.vertices.push_back(pa + t * (pb - pa));
      vid[e] = static_cast<int>(m.vertices.size()) - 1;
      edge_vertex.emplace(ekey, vid[e]);
    }
    const int* tri = mesh::detail::kTriTable[index];
    for (int t = 0; tri[t] != -1; t += 3) {
      // Table winding faces inward for inside = negative; flip to outward.
      const Face f{vid[tri[t]], vid[tri[t + 2]], vid[tri[t + 1]]};
      if (f[0] != f[1] && f[1] != f[2] && f[0] != f[2]) m.faces.push_back(f);
    }
  }
  return m;
}

inline std::size_t count_open_edges(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) ++edges[std::minmax(f[static_cast<std::size_t>(e)], f[static_cast<std::size_t>((e + 1) % 3)])];
  std::size_t open = 0;
  for (const auto& [e, n] : edges) open += n == 1;
  return open;
}

inline network::Inputs corner_points(const std::vector<std::uint64_t>& keys, int res) {
  network::Inputs x(3, static_cast<Eigen::Index>(keys.size()));
  const auto r = static_cast<std::uint64_t>(res);
  for (std::size_t n = 0; n < keys.size(); ++n) {
    const auto key = keys[n];
    x.col(static_cast<Eigen::Index>(n)) = Vec3(grid_coord(static_cast<long>(key % r), res), grid_coord(static_cast<long>((key / r) % r), res),
                                               grid_coord(static_cast<long>(key / (r * r)), res));
  }
  return x;
}

using Clock = std::chrono::steady_clock;
inline double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Samples the listed corners: the low field everywhere when `adaptive`, then the
// full field where the low value is within tau (or everywhere otherwise).
inline std::vector<double> sample_corners(const FieldPair& f, const std::vector<std::uint64_t>& keys, int res, bool adaptive, double tau,
                                          LevelStats& stats) {
  std::vector<double> values(keys.size());
  if (keys.empty()) return values;
  const auto pts = corner_points(keys, res);
  if (!adaptive) {
    const auto v = f.full(pts);
    stats.full_queries += keys.size();
    for (std::size_t n = 0; n < keys.size(); ++n) values[n] = v(static_cast<Eigen::Index>(n));
    return values;
  }
  const auto low = f.low(pts);
  stats.low_queries += keys.size();
  std::vector<Eigen::Index> near;
  for (Eigen::Index n = 0; n < low.size(); ++n) {
    values[static_cast<std::size_t>(n)] = low(n);
    if (std::abs(low(n)) < tau) near.push_back(n);
  }
  if (!near.empty()) {
    network::Inputs sub(3, static_cast<Eigen::Index>(near.size()));
    for (std::size_t n = 0; n < near.size(); ++n) sub.col(static_cast<Eigen::Index>(n)) = pts.col(near[n]);
    const auto full = f.full(sub);
    stats.full_queries += near.size();
    for (std::size_t n = 0; n < near.size(); ++n) values[static_cast<std::size_t>(near[n])] = full(static_cast<Eigen::Index>(n));
  }
  return values;
}

inline std::vector<std::uint64_t> all_cells(int res) {
  std::vector<std::uint64_t> cells;
  cells.reserve(static_cast<std::size_t>(res - 1) * (res - 1) * (res - 1));
  for (long k = 0; k + 1 < res; ++k)
    for (long j = 0; j + 1 < res; ++j)
      for (long i = 0; i + 1 < res; ++i) cells.push_back(corner_key(i, j, k, res));
  return cells;
}

// Full-grid extraction (dense or adaptive).
inline ExtractionReport extract_grid(const FieldPair& f, const ExtractionConfig& cfg, bool adaptive) {
  const int res = cfg.resolution;
  LevelStats st;
  st.level = cfg.levels - 1;
  const auto t0 = Clock::now();
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(res) * res * res);
  for (std::size_t n = 0; n < keys.size(); ++n) keys[n] = n;
  const auto values = sample_corners(f, keys, res, adaptive, cfg.tau(), st);
  auto cells = all_cells(res);
  st.cells_evaluated = cells.size();
  ExtractionReport r;
  r.mesh = march(cells, res, [&](std::uint64_t k) { return values[k]; });
  st.seconds = since(t0);
  r.levels.push_back(st);
  r.cells = std::move(cells);
  return r;
}

// Octree descent. Level 0 cells have edge 2^(levels-1) finest voxels; a cell
// is split while |field(center)| < alpha * circumradius. Children of the last
// split level are the finest cells, sampled at their corners and meshed.
inline ExtractionReport extract_octree(const FieldPair& f, const ExtractionConfig& cfg, bool low_for_descent, bool adaptive_corners) {
  const int res = cfg.resolution;
  const double h = cfg.voxel();
  ExtractionReport r;
  struct Cell {
    long i, j, k;  // minimum corner in finest-grid units
  };
  long span = 1L << (cfg.levels - 1);
  std::vector<Cell> active;
  for (long k = 0; k + 1 < res; k += span)
    for (long j = 0; j + 1 < res; j += span)
      for (long i = 0; i + 1 < res; i += span) active.push_back({i, j, k});
  for (int level = 0; level + 1 < cfg.levels; ++level, span /= 2) {
    const auto t0 = Clock::now();
    LevelStats st;
    st.level = level;
    st.cells_evaluated = active.size();
    network::Inputs centers(3, static_cast<Eigen::Index>(active.size()));
    for (std::size_t n = 0; n < active.size(); ++n) {
      const auto& c = active[n];
      centers.col(static_cast<Eigen::Index>(n)) =
          Vec3(grid_coord(c.i, res), grid_coord(c.j, res), grid_coord(c.k, res)) + Vec3::Constant(0.5 * span * h);
    }
    Eigen::RowVectorXd v;
    if (!active.empty()) v = low_for_descent ? f.low(centers) : f.full(centers);
    (low_for_descent ? st.low_queries : st.full_queries) += active.size();
    const double keep = cfg.alpha * span * h * std::sqrt(3.0) / 2.0;
    std::vector<Cell> next;
    const long half = span / 2;
    for (std::size_t n = 0; n < active.size(); ++n) {
      if (!(std::abs(v(static_cast<Eigen::Index>(n))) < keep)) continue;
      const auto& c = active[n];
      for (int o = 0; o < 8; ++o) {
        const Cell ch{c.i + (o & 1) * half, c.j + ((o >> 1) & 1) * half, c.k + ((o >> 2) & 1) * half};
        if (ch.i + 1 < res && ch.j + 1 < res && ch.k + 1 < res) next.push_back(ch);
      }
    }
    active = std::move(next);
    st.seconds = since(t0);
    r.levels.push_back(st);
  }

  const auto t0 = Clock::now();
  LevelStats st;
  st.level = cfg.levels - 1;
  std::vector<std::uint64_t> cells;
  cells.reserve(active.size());
  for (const auto& c : active) cells.push_back(corner_key(c.i, c.j, c.k, res));
  std::sort(cells.begin(), cells.end());
  st.cells_evaluated = cells.size();
  // Corners shared by neighbouring cells are sampled once.
  std::vector<std::uint64_t> corners;
  corners.reserve(cells.size() * 8);
  for (auto key : cells)
    for (int c = 0; c < 8; ++c) {
      int dx, dy, dz;
      corner_of(c, dx, dy, dz);
      corners.push_back(key + corner_key(dx, dy, dz, res));
    }
  std::sort(corners.begin(), corners.end());
  corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
  const auto values = sample_corners(f, corners, res, adaptive_corners, cfg.tau(), st);
  r.mesh = march(cells, res, [&](std::uint64_t k) {
    return values[static_cast<std::size_t>(std::lower_bound(corners.begin(), corners.end(), k) - corners.begin())];
  });
  st.seconds = since(t0);
  r.levels.push_back(st);
  r.cells = std::move(cells);
  return r;
}

}  // namespace detail

// Marching cubes over a full res^3 sample grid (x fastest, then y, then z).
inline TriangleMesh marching_cubes_dense(const std::vector<double>& samples, int res) {
  if (res < 2) throw InvalidInput("marching cubes needs at least a 2^3 grid");
  if (samples.size() != static_cast<std::size_t>(res) * res * res) throw InvalidInput("marching cubes: sample count does not match grid");
  return detail::march(detail::all_cells(res), res, [&](std::uint64_t k) { return samples[k]; });
}

// Every grid sample of a field, x fastest.
inline std::vector<double> dense_samples(const std::function<Eigen::RowVectorXd(const network::Inputs&)>& f, int res) {
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(res) * res * res);
  for (std::size_t n = 0; n < keys.size(); ++n) keys[n] = n;
  const auto v = f(detail::corner_points(keys, res));
  return {v.data(), v.data() + v.size()};
}

// Finest cells whose corner samples change sign, by minimum-corner key.
inline std::vector<std::uint64_t> crossing_cells(const std::vector<double>& samples, int res) {
  if (samples.size() != static_cast<std::size_t>(res) * res * res) throw InvalidInput("crossing_cells: sample count does not match grid");
  std::vector<std::uint64_t> out;
  for (auto key : detail::all_cells(res)) {
    bool neg = false, pos = false;
    for (int c = 0; c < 8; ++c) {
      int dx, dy, dz;
      detail::corner_of(c, dx, dy, dz);
      (samples[key + detail::corner_key(dx, dy, dz, res)] < 0 ? neg : pos) = true;
    }
    if (neg && pos) out.push_back(key);
  }
  return out;
}

inline ExtractionReport extract(const FieldPair& f, const ExtractionConfig& cfg) {
  cfg.validate();
  const auto t0 = detail::Clock::now();
  ExtractionReport r;
  switch (cfg.strategy) {
    case Strategy::Dense: r = detail::extract_grid(f, cfg, false); break;
    case Strategy::Adaptive: r = detail::extract_grid(f, cfg, true); break;
    case Strategy::Multiscale: r = detail::extract_octree(f, cfg, false, false); break;
    case Strategy::Combined: r = detail::extract_octree(f, cfg, true, true); break;
  }
  r.seconds = detail::since(t0);
  r.strategy = cfg.strategy;
  r.resolution = cfg.resolution;
  r.open_edges = detail::count_open_edges(r.mesh);
  return r;
}

template <class T>
ExtractionReport extract_network(const network::BaconParams<T>& p, const network::NetworkSpec& spec, const ExtractionConfig& cfg) {
  if (cfg.strategy != Strategy::Dense && cfg.strategy != Strategy::Multiscale && spec.num_heads() < 2)
    throw InvalidInput("adaptive extraction needs a network with at least two heads");
  return extract(network_fields(p, spec), cfg);
}

inline ExtractionReport extract_adaptive(const FieldPair& f, ExtractionConfig cfg) {
  cfg.strategy = Strategy::Adaptive;
  return extract(f, cfg);
}

inline ExtractionReport extract_multiscale(const FieldPair& f, ExtractionConfig cfg) {
  cfg.strategy = Strategy::Multiscale;
  return extract(f, cfg);
}

inline ExtractionReport extract_combined(const FieldPair& f, ExtractionConfig cfg) {
  cfg.strategy = Strategy::Combined;
  return extract(f, cfg);
}

// Ratio of dense to candidate wall time.
inline double speedup(double dense_seconds, double seconds) { return dense_seconds / seconds; }

// One row per level plus a "total" row per strategy. The speedup column is
// relative to the first dense entry and left empty when there is none.
inline CsvTable timing_report(const std::vector<ExtractionReport>& reports) {
  if (reports.empty()) throw InvalidInput("timing report needs at least one extraction");
  std::optional<double> dense;
  for (const auto& r : reports)
    if (r.strategy == Strategy::Dense) {
      dense = r.seconds;
      break;
    }
  CsvTable t({"strategy", "level", "cells_evaluated", "low_queries", "full_queries", "seconds", "speedup_vs_dense"});
  for (const auto& r : reports) {
    std::size_t cells = 0;
    for (const auto& l : r.levels) {
      t.row() << std::string(strategy_name(r.strategy)) << l.level << static_cast<std::uint64_t>(l.cells_evaluated)
              << static_cast<std::uint64_t>(l.low_queries) << static_cast<std::uint64_t>(l.full_queries) << l.seconds << std::string();
      cells += l.cells_evaluated;
    }
    auto row = t.row();
    row << std::string(strategy_name(r.strategy)) << std::string("total") << static_cast<std::uint64_t>(cells)
        << static_cast<std::uint64_t>(r.low_queries()) << static_cast<std::uint64_t>(r.full_queries()) << r.seconds;
    if (dense)
      row << speedup(*dense, r.seconds);
    else
      row << std::string();
  }
  return t;
}

}  // namespace bacon::mesh
