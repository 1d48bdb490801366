#ifndef CHEMODG_PROBLEMS_HPP
#define CHEMODG_PROBLEMS_HPP

// Problem cases: the 2D manufactured solution with its source terms and the
// falling-plume benchmark. Both use no-flux conditions for the density and
// the chemical and a no-slip velocity.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemodg/forms.hpp"
#include "chemodg/mesh2d.hpp"

namespace chemodg {

using TimeScalarFn = std::function<double(Point2, double)>;
using TimeVectorFn = std::function<Point2(Point2, double)>;
using TimeGradFn = std::function<std::array<Point2, 2>(Point2, double)>;  // rows: grad u1, grad u2

struct ExactSolution {
  TimeVectorFn u;
  TimeGradFn grad_u;
  TimeScalarFn p;
  TimeScalarFn rho;
  TimeVectorFn grad_rho;
  TimeScalarFn c;
  TimeVectorFn grad_c;
};

struct SourceTerms {
  TimeScalarFn f_rho;
  TimeScalarFn f_c;
  TimeVectorFn f_u;
};

struct ProblemCase {
  std::string name;
  Rect domain;
  PhysParams params;
  ScalarFn rho0;
  ScalarFn c0;
  VectorFn u0;
  std::optional<ExactSolution> exact;
  std::optional<SourceTerms> sources;
};

// ---------------------------------------------------------------------------
// Manufactured solution on the unit square

enum class Mm2dField { u1, u2, p, rho, c };

namespace mm2d {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Fields {
  Point2 u;
  std::array<Point2, 2> grad_u;
  Point2 lap_u;
  double p;
  Point2 grad_p;
  double rho;
  Point2 grad_rho;
  double lap_rho;
  double c;
  Point2 grad_c;
  double lap_c;
};

/// Closed-form values and derivatives of every field at (x, y, t).
inline Fields evaluate(Point2 pt, double t) {
  const double s = std::exp(-t), w = kTwoPi, w2 = w * w;
  const double sx = std::sin(w * pt.x), cx = std::cos(w * pt.x);
  const double sy = std::sin(w * pt.y), cy = std::cos(w * pt.y);
  Fields f;
  f.u = {s * sy * (1.0 - cx), s * sx * (cy - 1.0)};
  f.grad_u = {Point2{s * w * sy * sx, s * w * cy * (1.0 - cx)}, Point2{s * w * cx * (cy - 1.0), -s * w * sx * sy}};
  f.lap_u = {s * w2 * sy * (2.0 * cx - 1.0), s * w2 * sx * (1.0 - 2.0 * cy)};
  f.p = s * (cx + sy);
  f.grad_p = {-s * w * sx, s * w * cy};
  f.rho = s * (cx + cy + 3.0);
  f.grad_rho = {-s * w * sx, -s * w * sy};
  f.lap_rho = -s * w2 * (cx + cy);
  f.c = s * (cx + sy - w * pt.y + 9.0);
  f.grad_c = {-s * w * sx, s * w * (cy - 1.0)};
  f.lap_c = -s * w2 * (cx + sy);
  return f;
}

}  // namespace mm2d

inline double mm2d_exact(Mm2dField field, double x, double y, double t) {
  const auto f = mm2d::evaluate({x, y}, t);
  switch (field) {
    case Mm2dField::u1: return f.u.x;
    case Mm2dField::u2: return f.u.y;
    case Mm2dField::p: return f.p;
    case Mm2dField::rho: return f.rho;
    case Mm2dField::c: return f.c;
  }
  throw std::invalid_argument("unknown field");
}

struct Mm2dSources {
  double f_rho;
  double f_c;
  Point2 f_u;
};

/// Sources that make the manufactured fields solve
///   rho_t - mu Lap rho + u.grad rho + beta div(rho grad c) = f_rho
///   c_t - kappa Lap c + u.grad c + gamma rho c = f_c
///   u_t - nu Lap u + (u.grad) u + grad p - rho grad Phi = f_u.
inline Mm2dSources mm2d_sources(const PhysParams& prm, double x, double y, double t) {
  const Point2 pt{x, y};
  const auto f = mm2d::evaluate(pt, t);
  Mm2dSources s;
  // every field carries the factor exp(-t), so d/dt = -identity
  s.f_rho = -f.rho - prm.mu * f.lap_rho + dot(f.u, f.grad_rho) +
            prm.beta * (dot(f.grad_rho, f.grad_c) + f.rho * f.lap_c);
  s.f_c = -f.c - prm.kappa * f.lap_c + dot(f.u, f.grad_c) + prm.gamma * f.rho * f.c;
  const Point2 conv{dot(f.u, Point2{f.grad_u[0].x, f.grad_u[0].y}), dot(f.u, Point2{f.grad_u[1].x, f.grad_u[1].y})};
  const Point2 gphi = prm.grad_phi(pt);
  s.f_u = (-1.0) * f.u - prm.nu * f.lap_u + conv + f.grad_p - f.rho * gphi;
  return s;
}

/// Mean of the exact density over the unit square: 3 exp(-t).
inline double mm2d_mean_rho(double t) { return 3.0 * std::exp(-t); }

/// All coefficients 1 and Phi = x + y.
inline PhysParams mm2d_params() {
  PhysParams p;
  p.grad_phi = [](Point2) { return Point2{1.0, 1.0}; };
  return p;
}

inline ProblemCase mm2d_case(PhysParams params = mm2d_params()) {
  params.validate();
  ProblemCase pc;
  pc.name = "mm2d";
  pc.domain = Rect{0.0, 0.0, 1.0, 1.0};
  pc.params = params;
  pc.rho0 = [](Point2 x) { return mm2d::evaluate(x, 0.0).rho; };
  pc.c0 = [](Point2 x) { return mm2d::evaluate(x, 0.0).c; };
  pc.u0 = [](Point2 x) { return mm2d::evaluate(x, 0.0).u; };
  ExactSolution ex;
  ex.u = [](Point2 x, double t) { return mm2d::evaluate(x, t).u; };
  ex.grad_u = [](Point2 x, double t) { return mm2d::evaluate(x, t).grad_u; };
  ex.p = [](Point2 x, double t) { return mm2d::evaluate(x, t).p; };
  ex.rho = [](Point2 x, double t) { return mm2d::evaluate(x, t).rho; };
  ex.grad_rho = [](Point2 x, double t) { return mm2d::evaluate(x, t).grad_rho; };
  ex.c = [](Point2 x, double t) { return mm2d::evaluate(x, t).c; };
  ex.grad_c = [](Point2 x, double t) { return mm2d::evaluate(x, t).grad_c; };
  pc.exact = ex;
  SourceTerms src;
  src.f_rho = [params](Point2 x, double t) { return mm2d_sources(params, x.x, x.y, t).f_rho; };
  src.f_c = [params](Point2 x, double t) { return mm2d_sources(params, x.x, x.y, t).f_c; };
  src.f_u = [params](Point2 x, double t) { return mm2d_sources(params, x.x, x.y, t).f_u; };
  pc.sources = src;
  return pc;
}

// ---------------------------------------------------------------------------
// Falling plume on [0,2] x [0,1]

inline constexpr std::array<double, 3> kPlumeCenters = {0.2, 0.5, 1.2};

inline double plume_rho0(Point2 p) {
  double s = 0.0;
  for (double c : kPlumeCenters) s += 70.0 * std::exp(-8.0 * (p.x - c) * (p.x - c) - 10.0 * (p.y - 1.0) * (p.y - 1.0));
  return s;
}

inline double plume_c0(Point2 p) {
  return 30.0 * std::exp(-5.0 * (p.x - 1.0) * (p.x - 1.0) - 5.0 * (p.y - 0.5) * (p.y - 0.5));
}

inline ProblemCase plume_case() {
  ProblemCase pc;
  pc.name = "plume";
  pc.domain = Rect{0.0, 0.0, 2.0, 1.0};
  pc.params.nu = 10.0;
  pc.params.mu = 4.0;
  pc.params.kappa = 1.0;
  pc.params.gamma = 6.0;
  pc.params.beta = 8.0;
  pc.params.grad_phi = [](Point2) { return Point2{0.0, -1000.0}; };  // Phi = -1000 y
  pc.rho0 = plume_rho0;
  pc.c0 = plume_c0;
  pc.u0 = [](Point2) { return Point2{}; };
  return pc;
}

inline std::vector<std::string> case_names() { return {"mm2d", "plume"}; }

inline ProblemCase make_case(const std::string& name) {
  if (name == "mm2d") return mm2d_case();
  if (name == "plume") return plume_case();
  throw std::invalid_argument("unknown case '" + name + "' (known: mm2d, plume)");
}

}  // namespace chemodg

#endif  // CHEMODG_PROBLEMS_HPP
