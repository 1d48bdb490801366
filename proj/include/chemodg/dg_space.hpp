#ifndef CHEMODG_DG_SPACE_HPP
#define CHEMODG_DG_SPACE_HPP

// Broken polynomial spaces over a Mesh2D: DOF layout, quadrature tables on
// elements and edge traces, projection and evaluation of discrete fields.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemodg/basis.hpp"
#include "chemodg/mesh2d.hpp"
#include "chemodg/quadrature.hpp"

namespace chemodg {

using ScalarFn = std::function<double(Point2)>;
using VectorFn = std::function<Point2(Point2)>;

/// Coefficients of a discrete field over a DgSpace.
struct FieldCoeffs {
  std::vector<double> values;
  std::optional<double> time;
};

/// Basis data of one element restricted to an edge, at the edge quadrature points.
struct SideTrace {
  int element = -1;
  std::vector<double> values;  // [q * n + i]
  std::vector<Point2> grads;   // physical gradients, same layout
};

struct EdgeTrace {
  Point2 normal;
  double length = 0.0;
  bool boundary = false;
  std::vector<Point2> points;   // physical quadrature points
  std::vector<double> weights;  // reference weights times edge length
  std::array<SideTrace, 2> sides;  // [0] = left / boundary element, [1] = right

  int side_count() const { return boundary ? 1 : 2; }
};

inline int default_quadrature_exactness(int degree) {
  // exact for all bilinear products of P_k data and for the cubic convection
  // and reaction integrands
  return std::max(2 * degree + 2, 3 * degree);
}

class DgSpace {
 public:
  DgSpace(std::shared_ptr<const Mesh2D> mesh, int degree, int components = 1, int quad_exactness = -1)
      : mesh_(std::move(mesh)),
        degree_(degree),
        components_(components),
        basis_(&basis_for(degree)),
        volume_rule_(make_quadrature(QuadKind::triangle,
                                     quad_exactness > 0 ? quad_exactness
                                                        : default_quadrature_exactness(degree))),
        edge_rule_(make_quadrature(QuadKind::edge, volume_rule_.exactness)) {
    if (!mesh_) throw std::invalid_argument("DgSpace needs a mesh");
    if (components < 1 || components > 2)
      throw std::invalid_argument("DgSpace supports 1 or 2 components");
    const int n = dofs_per_element();
    ref_values_.resize(volume_rule_.size() * static_cast<std::size_t>(n));
    ref_grads_.resize(ref_values_.size());
    for (std::size_t q = 0; q < volume_rule_.size(); ++q)
      basis_->evaluate(volume_rule_.points[q], std::span(ref_values_).subspan(q * n, n),
                       std::span(ref_grads_).subspan(q * n, n));
    build_traces();
  }

  const Mesh2D& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh2D>& shared_mesh() const { return mesh_; }
  int degree() const { return degree_; }
  int components() const { return components_; }
  int dofs_per_element() const { return basis_->size(); }
  int element_count() const { return mesh_->element_count(); }
  int component_dofs() const { return dofs_per_element() * element_count(); }
  int total_dofs() const { return component_dofs() * components_; }

  int dof(int comp, int element, int i) const {
    return (comp * element_count() + element) * dofs_per_element() + i;
  }

  const OrthonormalBasis& basis() const { return *basis_; }
  const QuadratureRule& volume_rule() const { return volume_rule_; }
  const QuadratureRule& edge_rule() const { return edge_rule_; }

  std::span<const double> ref_values(std::size_t q) const {
    const auto n = static_cast<std::size_t>(dofs_per_element());
    return std::span(ref_values_).subspan(q * n, n);
  }
  std::span<const Point2> ref_grads(std::size_t q) const {
    const auto n = static_cast<std::size_t>(dofs_per_element());
    return std::span(ref_grads_).subspan(q * n, n);
  }

  void physical_grads(int element, std::size_t q, std::span<Point2> out) const {
    const auto& map = mesh_->element_geometry(element).map;
    const auto g = ref_grads(q);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = map.push_gradient(g[i]);
  }

  Point2 quad_point(int element, std::size_t q) const {
    return mesh_->element_geometry(element).map.to_physical(volume_rule_.points[q]);
  }
  double quad_weight(int element, std::size_t q) const {
    return volume_rule_.weights[q] * mesh_->element_geometry(element).map.det;
  }

  const std::vector<EdgeTrace>& interior_traces() const { return interior_; }
  const std::vector<EdgeTrace>& boundary_traces() const { return boundary_; }

  FieldCoeffs zero_field() const { return {std::vector<double>(static_cast<std::size_t>(total_dofs()), 0.0), {}}; }

 private:
  SideTrace make_side(int element, const std::vector<Point2>& points) const {
    const auto& map = mesh_->element_geometry(element).map;
    const int n = dofs_per_element();
    SideTrace s;
    s.element = element;
    s.values.resize(points.size() * static_cast<std::size_t>(n));
    s.grads.resize(s.values.size());
    std::vector<Point2> g(static_cast<std::size_t>(n));
    for (std::size_t q = 0; q < points.size(); ++q) {
      Point2 ref = map.to_reference(points[q]);
      // snap roundoff so the basis domain check never trips on edge points
      ref.x = std::max(ref.x, 0.0);
      ref.y = std::max(ref.y, 0.0);
      if (ref.x + ref.y > 1.0) {
        const double s2 = ref.x + ref.y;
        ref.x /= s2;
        ref.y /= s2;
      }
      basis_->evaluate(ref, std::span(s.values).subspan(q * n, n), g);
      for (int i = 0; i < n; ++i) s.grads[q * n + i] = map.push_gradient(g[i]);
    }
    return s;
  }

  EdgeTrace make_trace(const std::array<Point2, 2>& ends, Point2 normal, double length, bool boundary) const {
    EdgeTrace t;
    t.normal = normal;
    t.length = length;
    t.boundary = boundary;
    for (std::size_t q = 0; q < edge_rule_.size(); ++q) {
      const double s = edge_rule_.points[q].x;
      t.points.push_back(ends[0] + s * (ends[1] - ends[0]));
      t.weights.push_back(edge_rule_.weights[q] * length);
    }
    return t;
  }

  void build_traces() {
    for (const auto& e : mesh_->interior_edges()) {
      EdgeTrace t = make_trace(e.endpoints, e.normal, e.length, false);
      t.sides[0] = make_side(e.left, t.points);
      t.sides[1] = make_side(e.right, t.points);
      interior_.push_back(std::move(t));
    }
    for (const auto& e : mesh_->boundary_edges()) {
      EdgeTrace t = make_trace(e.endpoints, e.normal, e.length, true);
      t.sides[0] = make_side(e.element, t.points);
      boundary_.push_back(std::move(t));
    }
  }

  std::shared_ptr<const Mesh2D> mesh_;
  int degree_;
  int components_;
  const OrthonormalBasis* basis_;
  QuadratureRule volume_rule_;
  QuadratureRule edge_rule_;
  std::vector<double> ref_values_;
  std::vector<Point2> ref_grads_;
  std::vector<EdgeTrace> interior_;
  std::vector<EdgeTrace> boundary_;
};

struct FieldValue {
  double value = 0.0;
  Point2 grad;
};

inline void check_field(const DgSpace& space, const FieldCoeffs& f) {
  if (f.values.size() != static_cast<std::size_t>(space.total_dofs()))
    throw std::invalid_argument("field has " + std::to_string(f.values.size()) +
                                " coefficients, space expects " + std::to_string(space.total_dofs()));
}

/// Value and physical gradient of one component at a reference point of an element.
inline FieldValue eval_field(const DgSpace& space, const FieldCoeffs& f, int element, Point2 ref,
                             int comp = 0) {
  check_field(space, f);
  if (element < 0 || element >= space.element_count())
    throw std::out_of_range("element index " + std::to_string(element) + " out of range");
  if (comp < 0 || comp >= space.components()) throw std::out_of_range("component out of range");
  const int n = space.dofs_per_element();
  std::array<double, dofs_per_element(kMaxDegree)> v{};
  std::array<Point2, dofs_per_element(kMaxDegree)> g{};
  space.basis().evaluate(ref, std::span(v).first(n), std::span(g).first(n));
  const auto& map = space.mesh().element_geometry(element).map;
  FieldValue out;
  Point2 ref_grad;
  for (int i = 0; i < n; ++i) {
    const double c = f.values[static_cast<std::size_t>(space.dof(comp, element, i))];
    out.value += c * v[i];
    ref_grad = ref_grad + c * g[i];
  }
  out.grad = map.push_gradient(ref_grad);
  return out;
}

/// Sum over local basis functions at volume quadrature point q of element e.
inline double field_at_qp(const DgSpace& space, const FieldCoeffs& f, int element, std::size_t q,
                          int comp = 0) {
  const auto phi = space.ref_values(q);
  const double* c = f.values.data() + space.dof(comp, element, 0);
  double v = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) v += c[i] * phi[i];
  return v;
}

/// Element-local L2 projection. The reference mass matrix is the identity, so
/// the local solve reduces to coefficient_i = sum_q w_q f(x_q) phi_i(x_q).
inline FieldCoeffs l2_project(const ScalarFn& f, const DgSpace& space) {
  if (space.components() != 1) throw std::invalid_argument("scalar projection needs a scalar space");
  FieldCoeffs out = space.zero_field();
  const int n = space.dofs_per_element();
  const auto& rule = space.volume_rule();
  for (int e = 0; e < space.element_count(); ++e) {
    double* c = out.values.data() + space.dof(0, e, 0);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double fw = rule.weights[q] * f(space.quad_point(e, q));
      const auto phi = space.ref_values(q);
      for (int i = 0; i < n; ++i) c[i] += fw * phi[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

inline FieldCoeffs l2_project(const VectorFn& f, const DgSpace& space) {
  if (space.components() != 2) throw std::invalid_argument("vector projection needs a 2-component space");
  FieldCoeffs out = space.zero_field();
  const int n = space.dofs_per_element();
  const auto& rule = space.volume_rule();
  for (int e = 0; e < space.element_count(); ++e) {
    double* cx = out.values.data() + space.dof(0, e, 0);
    double* cy = out.values.data() + space.dof(1, e, 0);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point2 v = f(space.quad_point(e, q));
      const auto phi = space.ref_values(q);
      for (int i = 0; i < n; ++i) {
        cx[i] += rule.weights[q] * v.x * phi[static_cast<std::size_t>(i)];
        cy[i] += rule.weights[q] * v.y * phi[static_cast<std::size_t>(i)];
      }
    }
  }
  return out;
}

/// The functional coeffs -> integral over the domain of one component, as a
/// vector over that component's DOFs (the mean-zero constraint row).
inline std::vector<double> integral_functional(const DgSpace& space) {
  std::vector<double> w(static_cast<std::size_t>(space.component_dofs()), 0.0);
  const int n = space.dofs_per_element();
  const auto& rule = space.volume_rule();
  for (int e = 0; e < space.element_count(); ++e) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double jw = space.quad_weight(e, q);
      const auto phi = space.ref_values(q);
      for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(space.dof(0, e, i))] += jw * phi[static_cast<std::size_t>(i)];
    }
  }
  return w;
}

/// Integral of a scalar field over the domain.
inline double integrate(const DgSpace& space, const FieldCoeffs& f) {
  check_field(space, f);
  double s = 0.0;
  for (int e = 0; e < space.element_count(); ++e)
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q)
      s += space.quad_weight(e, q) * field_at_qp(space, f, e, q);
  return s;
}

/// Integral of a function over the domain with the space's volume rule.
inline double integrate(const DgSpace& space, const ScalarFn& f) {
  double s = 0.0;
  for (int e = 0; e < space.element_count(); ++e)
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q)
      s += space.quad_weight(e, q) * f(space.quad_point(e, q));
  return s;
}

inline double mean_value(const DgSpace& space, const FieldCoeffs& f) {
  if (space.components() != 1) throw std::invalid_argument("mean_value needs a scalar space");
  return integrate(space, f) / space.mesh().total_area();
}

/// Broken L2 norm; the orthonormal basis makes this a weighted coefficient sum.
inline double l2_norm(const DgSpace& space, const FieldCoeffs& f) {
  check_field(space, f);
  double s = 0.0;
  const int n = space.dofs_per_element();
  for (int c = 0; c < space.components(); ++c)
    for (int e = 0; e < space.element_count(); ++e) {
      const double det = space.mesh().element_geometry(e).map.det;
      const double* v = f.values.data() + space.dof(c, e, 0);
      for (int i = 0; i < n; ++i) s += det * v[i] * v[i];
    }
  return std::sqrt(s);
}

}  // namespace chemodg

#endif  // CHEMODG_DG_SPACE_HPP
