#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bacon/csv.hpp"
#include "bacon/errors.hpp"

namespace bacon::mesh {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  bool empty() const { return faces.empty(); }
  std::array<Vec3, 3> triangle(std::size_t f) const {
    return {vertices[static_cast<std::size_t>(faces[f][0])], vertices[static_cast<std::size_t>(faces[f][1])],
            vertices[static_cast<std::size_t>(faces[f][2])]};
  }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

// Positive for outward-facing counter-clockwise winding.
inline double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    auto [a, b, c] = m.triangle(f);
    v += a.dot(b.cross(c));
  }
  return v / 6.0;
}

inline double surface_area(const TriangleMesh& m) {
  double s = 0.0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    auto [a, b, c] = m.triangle(f);
    s += triangle_area(a, b, c);
  }
  return s;
}

inline void flip_faces(TriangleMesh& m) {
  for (auto& f : m.faces) std::swap(f[1], f[2]);
}

// Index range, degeneracy and edge-manifold checks. Every undirected edge must
// be shared by exactly two faces.
inline void check_watertight(const TriangleMesh& m) {
  if (m.faces.empty()) throw InvalidMesh("mesh has no faces");
  std::map<std::pair<int, int>, int> edges;
  const int n = static_cast<int>(m.vertices.size());
  for (const auto& f : m.faces) {
    for (int v : f)
      if (v < 0 || v >= n) throw InvalidMesh("face references vertex " + std::to_string(v) + " out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw InvalidMesh("degenerate face with a repeated vertex");
    for (int e = 0; e < 3; ++e) {
      int a = f[static_cast<std::size_t>(e)], b = f[static_cast<std::size_t>((e + 1) % 3)];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  }
  for (const auto& [e, count] : edges)
    if (count != 2)
      throw InvalidMesh("mesh is not watertight: edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) + ") is shared by " +
                        std::to_string(count) + " face(s)");
}

// --- Wavefront OBJ ----------------------------------------------------------

// Reads `v` and `f` records; texture/normal indices after '/' are ignored and
// negative (relative) indices are resolved. Polygons other than triangles are
// rejected.
inline TriangleMesh parse_obj(std::istream& in, const std::string& name = "<obj>") {
  TriangleMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) throw InvalidInput(name + ":" + std::to_string(lineno) + ": malformed vertex");
      m.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        int i = 0;
        try {
          i = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw InvalidInput(name + ":" + std::to_string(lineno) + ": malformed face index '" + tok + "'");
        }
        if (i == 0) throw InvalidInput(name + ":" + std::to_string(lineno) + ": face index 0");
        idx.push_back(i > 0 ? i - 1 : static_cast<int>(m.vertices.size()) + i);
      }
      if (idx.size() != 3) throw InvalidInput(name + ":" + std::to_string(lineno) + ": only triangle faces are supported");
      m.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  return m;
}

inline TriangleMesh read_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open mesh " + path);
  return parse_obj(f, path);
}

inline void write_obj(std::ostream& os, const TriangleMesh& m) {
  for (const auto& v : m.vertices)
    os << "v " << format_number(v.x()) << ' ' << format_number(v.y()) << ' ' << format_number(v.z()) << '\n';
  for (const auto& f : m.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void write_obj(const std::string& path, const TriangleMesh& m) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write mesh " + path);
  write_obj(f, m);
}

// --- primitives -------------------------------------------------------------

inline TriangleMesh make_cube(double edge, const Vec3& center = Vec3::Zero()) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back(center + 0.5 * edge * Vec3((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1));
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

// Subdivided icosahedron with vertices on the sphere.
inline TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero()) {
  if (subdivisions < 0) throw InvalidInput("icosphere: subdivisions must be >= 0");
  const double t = std::numbers::phi;
  std::vector<Vec3> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> f{{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    for (const auto& [a, b, c] : f) {
      const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.insert(next.end(), {Face{a, ab, ca}, Face{b, bc, ab}, Face{c, ca, bc}, Face{ab, bc, ca}});
    }
    f = std::move(next);
  }
  TriangleMesh m;
  for (const auto& p : v) m.vertices.push_back(center + radius * p);
  m.faces = std::move(f);
  return m;
}

// Largest distance between the sphere and a flat facet of make_icosphere:
// radius (1 - cos(theta)), theta the largest vertex-to-centroid angle.
inline double icosphere_chord_error(const TriangleMesh& m, const Vec3& center, double radius) {
  double worst = 0.0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    auto [a, b, c] = m.triangle(f);
    const Vec3 n = (b - a).cross(c - a).normalized();
    worst = std::max(worst, radius - std::abs(n.dot(a - center)));
  }
  return worst;
}

// --- point / triangle queries -----------------------------------------------

// Closest point on triangle abc to p (region-based, after Ericson).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_triangle_distance_sq(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return (p - closest_point_on_triangle(p, a, b, c)).squaredNorm();
}

// Moller-Trumbore; true when the ray o + t d, t > 0, crosses the triangle.
inline bool ray_hits_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 h = d.cross(e2);
  const double det = e1.dot(h);
  if (det == 0.0) return false;
  const double inv = 1.0 / det;
  const Vec3 s = o - a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  const double v = inv * d.dot(q);
  if (v < 0.0 || u + v > 1.0) return false;
  return inv * e2.dot(q) > 0.0;
}

}  // namespace bacon::mesh
