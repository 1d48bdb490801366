#ifndef CHEMODG_TESTS_ORACLE_HPP
#define CHEMODG_TESTS_ORACLE_HPP

// Brute-force evaluation of the variational forms for test oracles. Fields are
// evaluated pointwise through eval_field at physical points, with their own
// high-order rules and no sparsity or precomputed traces.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "chemodg/chemodg.hpp"

namespace oracle {

using namespace chemodg;

inline constexpr int kExactness = 14;

inline const QuadratureRule& tri_rule() {
  static const QuadratureRule r = make_quadrature(QuadKind::triangle, kExactness);
  return r;
}
inline const QuadratureRule& edge_rule() {
  static const QuadratureRule r = make_quadrature(QuadKind::edge, kExactness);
  return r;
}

/// Value and gradient of one component at a physical point of element e.
inline FieldValue at(const DgSpace& s, const FieldCoeffs& f, int e, Point2 x, int comp = 0) {
  Point2 r = s.mesh().element_geometry(e).map.to_reference(x);
  r.x = std::max(r.x, 0.0);
  r.y = std::max(r.y, 0.0);
  if (r.x + r.y > 1.0) {
    const double t = r.x + r.y;
    r.x /= t;
    r.y /= t;
  }
  return eval_field(s, f, e, r, comp);
}

template <class F>
double volume_sum(const Mesh2D& m, F&& integrand) {
  double s = 0.0;
  for (int e = 0; e < m.element_count(); ++e) {
    const auto& map = m.element_geometry(e).map;
    for (std::size_t q = 0; q < tri_rule().size(); ++q)
      s += tri_rule().weights[q] * std::abs(map.det) * integrand(e, map.to_physical(tri_rule().points[q]));
  }
  return s;
}

/// integrand(left, right, x, n) on interior edges; right = -1 on boundary edges.
template <class F>
double edge_sum(const Mesh2D& m, bool boundary, F&& integrand) {
  double s = 0.0;
  for (const auto& e : m.interior_edges())
    for (std::size_t q = 0; q < edge_rule().size(); ++q) {
      const Point2 x = e.endpoints[0] + edge_rule().points[q].x * (e.endpoints[1] - e.endpoints[0]);
      s += edge_rule().weights[q] * e.length * integrand(e.left, e.right, x, e.normal, e.length);
    }
  if (boundary)
    for (const auto& e : m.boundary_edges())
      for (std::size_t q = 0; q < edge_rule().size(); ++q) {
        const Point2 x = e.endpoints[0] + edge_rule().points[q].x * (e.endpoints[1] - e.endpoints[0]);
        s += edge_rule().weights[q] * e.length * integrand(e.element, -1, x, e.normal, e.length);
      }
  return s;
}

/// Jump and average of one component across an edge (boundary: [v] = {v} = v).
struct Trace {
  double jump, avg;
  Point2 grad_avg;
};

inline Trace trace(const DgSpace& s, const FieldCoeffs& f, int l, int r, Point2 x, int comp) {
  const auto a = at(s, f, l, x, comp);
  if (r < 0) return {a.value, a.value, a.grad};
  const auto b = at(s, f, r, x, comp);
  return {a.value - b.value, 0.5 * (a.value + b.value), 0.5 * (a.grad + b.grad)};
}

/// sum_E int w grad psi . grad phi - {w grad psi}.n [phi] - {w grad phi}.n [psi] + sigma/h [psi][phi]
/// over all components, with an optional scalar weight w.
inline double sipg(const DgSpace& s, const FieldCoeffs& psi, const FieldCoeffs& phi, double sigma, bool boundary,
                   const DgSpace* ws = nullptr, const FieldCoeffs* w = nullptr) {
  auto weight = [&](int e, Point2 x) { return w ? at(*ws, *w, e, x).value : 1.0; };
  double total = 0.0;
  for (int c = 0; c < s.components(); ++c) {
    total += volume_sum(s.mesh(), [&](int e, Point2 x) {
      return weight(e, x) * dot(at(s, psi, e, x, c).grad, at(s, phi, e, x, c).grad);
    });
    total += edge_sum(s.mesh(), boundary, [&](int l, int r, Point2 x, Point2 n, double h) {
      const auto pl = at(s, psi, l, x, c), fl = at(s, phi, l, x, c);
      const double wl = weight(l, x);
      double jpsi = pl.value, jphi = fl.value;
      Point2 awpsi = wl * pl.grad, awphi = wl * fl.grad;
      if (r >= 0) {
        const auto pr = at(s, psi, r, x, c), fr = at(s, phi, r, x, c);
        const double wr = weight(r, x);
        jpsi -= pr.value;
        jphi -= fr.value;
        awpsi = 0.5 * (awpsi + wr * pr.grad);
        awphi = 0.5 * (awphi + wr * fr.grad);
      }
      return -dot(awpsi, n) * jphi - dot(awphi, n) * jpsi + sigma / h * jpsi * jphi;
    });
  }
  return total;
}

/// Skew-symmetrised convection: sum_E int (u.grad psi) phi + 1/2 div(u) psi phi
///   - sum_interior int {u}.n [psi] {phi} + 1/2 [u].n {psi phi}
///   - sum_boundary int 1/2 (u.n) psi phi
inline double convection(const DgSpace& vs, const FieldCoeffs& u, const DgSpace& s, const FieldCoeffs& psi,
                         const FieldCoeffs& phi) {
  double total = 0.0;
  for (int c = 0; c < s.components(); ++c) {
    total += volume_sum(s.mesh(), [&](int e, Point2 x) {
      const auto ux = at(vs, u, e, x, 0), uy = at(vs, u, e, x, 1);
      const auto p = at(s, psi, e, x, c), f = at(s, phi, e, x, c);
      const Point2 vel{ux.value, uy.value};
      return dot(vel, p.grad) * f.value + 0.5 * (ux.grad.x + uy.grad.y) * p.value * f.value;
    });
    total += edge_sum(s.mesh(), true, [&](int l, int r, Point2 x, Point2 n, double) {
      const Point2 ul{at(vs, u, l, x, 0).value, at(vs, u, l, x, 1).value};
      const double pl = at(s, psi, l, x, c).value, fl = at(s, phi, l, x, c).value;
      if (r < 0) return -0.5 * dot(ul, n) * pl * fl;
      const Point2 ur{at(vs, u, r, x, 0).value, at(vs, u, r, x, 1).value};
      const double pr = at(s, psi, r, x, c).value, fr = at(s, phi, r, x, c).value;
      return -0.5 * dot(ul + ur, n) * (pl - pr) * 0.5 * (fl + fr) - 0.5 * dot(ul - ur, n) * 0.5 * (pl * fl + pr * fr);
    });
  }
  return total;
}

/// d(v, q) = sum_E int q div v - sum_{all edges} int {q} [v].n
inline double div_form(const DgSpace& vs, const FieldCoeffs& v, const DgSpace& ps, const FieldCoeffs& q) {
  double total = volume_sum(vs.mesh(), [&](int e, Point2 x) {
    return at(ps, q, e, x).value * (at(vs, v, e, x, 0).grad.x + at(vs, v, e, x, 1).grad.y);
  });
  total -= edge_sum(vs.mesh(), true, [&](int l, int r, Point2 x, Point2 n, double) {
    const auto tq = trace(ps, q, l, r, x, 0);
    return tq.avg * (trace(vs, v, l, r, x, 0).jump * n.x + trace(vs, v, l, r, x, 1).jump * n.y);
  });
  return total;
}

/// The gradient form of d: -sum_E int v.grad q + sum_interior int {v}.n [q]
inline double div_form_gradient(const DgSpace& vs, const FieldCoeffs& v, const DgSpace& ps, const FieldCoeffs& q) {
  double total = -volume_sum(vs.mesh(), [&](int e, Point2 x) {
    const Point2 g = at(ps, q, e, x).grad;
    return at(vs, v, e, x, 0).value * g.x + at(vs, v, e, x, 1).value * g.y;
  });
  total += edge_sum(vs.mesh(), false, [&](int l, int r, Point2 x, Point2 n, double) {
    return trace(ps, q, l, r, x, 0).jump * (trace(vs, v, l, r, x, 0).avg * n.x + trace(vs, v, l, r, x, 1).avg * n.y);
  });
  return total;
}

/// (w psi, phi) summed over components; w = 1 without a weight field.
inline double mass(const DgSpace& s, const FieldCoeffs& psi, const FieldCoeffs& phi, const DgSpace* ws = nullptr,
                   const FieldCoeffs* w = nullptr) {
  double total = 0.0;
  for (int c = 0; c < s.components(); ++c)
    total += volume_sum(s.mesh(), [&](int e, Point2 x) {
      return (w ? at(*ws, *w, e, x).value : 1.0) * at(s, psi, e, x, c).value * at(s, phi, e, x, c).value;
    });
  return total;
}

inline FieldCoeffs random_field(const DgSpace& s, std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  FieldCoeffs f = s.zero_field();
  for (auto& v : f.values) v = d(rng);
  return f;
}

inline FieldCoeffs unit_field(const DgSpace& s, int i) {
  FieldCoeffs f = s.zero_field();
  f.values[static_cast<std::size_t>(i)] = 1.0;
  return f;
}

/// Two-by-two grid on the unit square with the centre vertex moved off the grid.
inline std::shared_ptr<const Mesh2D> skewed_mesh() {
  const Mesh2D base = build_rect_mesh(2, 2);
  auto v = base.vertices();
  v[4] = {0.56, 0.43};
  return std::make_shared<const Mesh2D>(v, base.triangles(), base.domain());
}

inline double sym_defect(const CsrMatrix& a) { return max_abs_difference(a, a.transposed()) / a.max_abs(); }

inline double skew_defect(const CsrMatrix& a, double scale) { return (a + a.transposed()).max_abs() / scale; }

}  // namespace oracle

#endif  // CHEMODG_TESTS_ORACLE_HPP
