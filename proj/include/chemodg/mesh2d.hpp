#ifndef CHEMODG_MESH2D_HPP
#define CHEMODG_MESH2D_HPP

// Conforming triangulations of axis-aligned rectangles with the oriented
// edge connectivity used by the interior penalty forms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chemodg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

class InvalidDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// x = origin + J * xi, mapping the reference triangle (0,0),(1,0),(0,1).
struct AffineMap {
  Point2 origin;
  std::array<double, 4> jac{};      // row-major J
  std::array<double, 4> jac_inv{};  // row-major J^{-1}
  double det = 0.0;

  Point2 to_physical(Point2 ref) const {
    return {origin.x + jac[0] * ref.x + jac[1] * ref.y,
            origin.y + jac[2] * ref.x + jac[3] * ref.y};
  }
  Point2 to_reference(Point2 phys) const {
    const Point2 d = phys - origin;
    return {jac_inv[0] * d.x + jac_inv[1] * d.y, jac_inv[2] * d.x + jac_inv[3] * d.y};
  }
  // J^{-T} g: pushes a reference gradient forward to physical coordinates.
  Point2 push_gradient(Point2 g) const {
    return {jac_inv[0] * g.x + jac_inv[2] * g.y, jac_inv[1] * g.x + jac_inv[3] * g.y};
  }
};

struct ElementGeometry {
  double area = 0.0;
  double diameter = 0.0;  // h_E, longest edge
  double inradius = 0.0;  // area / semiperimeter
  AffineMap map;
};

struct InteriorEdge {
  int left = -1;   // smaller element id
  int right = -1;  // larger element id
  std::array<int, 2> local{};
  Point2 normal;  // unit, from left to right
  double length = 0.0;
  std::array<Point2, 2> endpoints{};
};

struct BoundaryEdge {
  int element = -1;
  int local = -1;
  Point2 normal;  // outward unit normal
  double length = 0.0;
  std::array<Point2, 2> endpoints{};
};

/// Immutable triangulation. Local edge i of a triangle joins its vertices i and (i+1)%3.
class Mesh2D {
 public:
  Mesh2D(std::vector<Point2> vertices, std::vector<std::array<int, 3>> triangles, Rect domain)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)), domain_(domain) {
    build_geometry();
    build_edges();
  }

  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<InteriorEdge>& interior_edges() const { return interior_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  const Rect& domain() const { return domain_; }

  int element_count() const { return static_cast<int>(triangles_.size()); }

  const ElementGeometry& element_geometry(int element) const {
    if (element < 0 || element >= element_count())
      throw std::out_of_range("element index " + std::to_string(element) + " out of range");
    return geometry_[static_cast<std::size_t>(element)];
  }

  /// Endpoints of local edge `local` of `element`, in the element's own orientation.
  std::array<Point2, 2> edge_endpoints(int element, int local) const {
    const auto& t = triangles_.at(static_cast<std::size_t>(element));
    return {vertices_[t[local]], vertices_[t[(local + 1) % 3]]};
  }

  /// Elements sharing an edge with `element`, plus the element itself, sorted.
  const std::vector<int>& coupled_elements(int element) const {
    return coupling_[static_cast<std::size_t>(element)];
  }

  double h() const {
    double h = 0.0;
    for (const auto& g : geometry_) h = std::max(h, g.diameter);
    return h;
  }

  /// max over elements of h_E / inradius.
  double shape_regularity() const {
    double m = 0.0;
    for (const auto& g : geometry_) m = std::max(m, g.diameter / g.inradius);
    return m;
  }

  double total_area() const {
    double a = 0.0;
    for (const auto& g : geometry_) a += g.area;
    return a;
  }

  /// FNV-1a over coordinates and connectivity; identifies a mesh in checkpoints.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& v : vertices_) {
      mix(&v.x, sizeof(double));
      mix(&v.y, sizeof(double));
    }
    for (const auto& t : triangles_) mix(t.data(), sizeof(int) * 3);
    return h;
  }

 private:
  void build_geometry() {
    geometry_.reserve(triangles_.size());
    for (std::size_t e = 0; e < triangles_.size(); ++e) {
      const auto& t = triangles_[e];
      const Point2 a = vertices_.at(t[0]), b = vertices_.at(t[1]), c = vertices_.at(t[2]);
      ElementGeometry g;
      const Point2 ab = b - a, ac = c - a;
      g.map.origin = a;
      g.map.jac = {ab.x, ac.x, ab.y, ac.y};
      g.map.det = cross(ab, ac);
      if (!(g.map.det > 0.0))
        throw InvalidDomainError("triangle " + std::to_string(e) + " is degenerate or clockwise");
      const double inv = 1.0 / g.map.det;
      g.map.jac_inv = {ac.y * inv, -ac.x * inv, -ab.y * inv, ab.x * inv};
      g.area = 0.5 * g.map.det;
      const double la = norm(ab), lb = norm(c - b), lc = norm(ac);
      g.diameter = std::max({la, lb, lc});
      g.inradius = g.area / (0.5 * (la + lb + lc));
      geometry_.push_back(g);
    }
  }

  void build_edges() {
    struct Side {
      int element;
      int local;
    };
    std::map<std::pair<int, int>, std::vector<Side>> by_vertices;
    for (int e = 0; e < element_count(); ++e) {
      const auto& t = triangles_[static_cast<std::size_t>(e)];
      for (int l = 0; l < 3; ++l) {
        const int a = t[l], b = t[(l + 1) % 3];
        by_vertices[{std::min(a, b), std::max(a, b)}].push_back({e, l});
      }
    }
    coupling_.assign(triangles_.size(), {});
    for (int e = 0; e < element_count(); ++e) coupling_[static_cast<std::size_t>(e)].push_back(e);

    for (const auto& [key, sides] : by_vertices) {
      if (sides.size() == 1) {
        BoundaryEdge be;
        be.element = sides[0].element;
        be.local = sides[0].local;
        be.endpoints = edge_endpoints(be.element, be.local);
        const Point2 t = be.endpoints[1] - be.endpoints[0];
        be.length = norm(t);
        be.normal = {t.y / be.length, -t.x / be.length};  // CCW triangle: right of the tangent
        boundary_.push_back(be);
      } else if (sides.size() == 2) {
        const Side l = sides[0].element < sides[1].element ? sides[0] : sides[1];
        const Side r = sides[0].element < sides[1].element ? sides[1] : sides[0];
        InteriorEdge ie;
        ie.left = l.element;
        ie.right = r.element;
        ie.local = {l.local, r.local};
        ie.endpoints = edge_endpoints(l.element, l.local);
        const Point2 t = ie.endpoints[1] - ie.endpoints[0];
        ie.length = norm(t);
        ie.normal = {t.y / ie.length, -t.x / ie.length};
        interior_.push_back(ie);
        coupling_[static_cast<std::size_t>(l.element)].push_back(r.element);
        coupling_[static_cast<std::size_t>(r.element)].push_back(l.element);
      } else {
        throw InvalidDomainError("non-manifold edge shared by " + std::to_string(sides.size()) +
                                 " triangles");
      }
    }
    std::sort(interior_.begin(), interior_.end(), [](const InteriorEdge& a, const InteriorEdge& b) {
      return std::pair(a.left, a.right) < std::pair(b.left, b.right);
    });
    std::sort(boundary_.begin(), boundary_.end(), [](const BoundaryEdge& a, const BoundaryEdge& b) {
      return std::pair(a.element, a.local) < std::pair(b.element, b.local);
    });
    for (auto& c : coupling_) std::sort(c.begin(), c.end());
  }

  std::vector<Point2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  Rect domain_;
  std::vector<ElementGeometry> geometry_;
  std::vector<InteriorEdge> interior_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<std::vector<int>> coupling_;
};

/// Uniform nx-by-ny grid, every cell cut along its bottom-left to top-right diagonal.
inline Mesh2D build_rect_mesh(int nx, int ny, Rect domain = {}) {
  if (nx < 1 || ny < 1)
    throw InvalidDomainError("mesh needs nx, ny >= 1 (got " + std::to_string(nx) + ", " +
                             std::to_string(ny) + ")");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0) || !std::isfinite(domain.area()))
    throw InvalidDomainError("degenerate rectangle");

  std::vector<Point2> vertices;
  vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      vertices.push_back({domain.x0 + domain.width() * i / nx, domain.y0 + domain.height() * j / ny});

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return Mesh2D(std::move(vertices), std::move(triangles), domain);
}

/// Legacy ASCII VTK dump of the triangulation (cell type 5).
inline void write_mesh_vtk(const Mesh2D& mesh, std::ostream& os) {
  os << "# vtk DataFile Version 3.0\nchemodg mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os.precision(17);
  os << "POINTS " << mesh.vertices().size() << " double\n";
  for (const auto& v : mesh.vertices()) os << v.x << ' ' << v.y << " 0\n";
  const auto n = mesh.triangles().size();
  os << "CELLS " << n << ' ' << 4 * n << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << n << '\n';
  for (std::size_t i = 0; i < n; ++i) os << "5\n";
  os << "CELL_DATA " << n << "\nSCALARS element_id int 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < n; ++i) os << i << '\n';
}

}  // namespace chemodg

#endif  // CHEMODG_MESH2D_HPP
