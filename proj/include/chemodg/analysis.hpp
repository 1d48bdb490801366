#ifndef CHEMODG_ANALYSIS_HPP
#define CHEMODG_ANALYSIS_HPP

// Error norms against exact solutions, convergence rates and mass series.

#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemodg/dg_space.hpp"
#include "chemodg/problems.hpp"
#include "chemodg/stepper.hpp"

namespace chemodg {

/// Broken L2 error of a scalar field (one component) against f, with the space's volume rule.
inline double error_l2(const DgSpace& space, const FieldCoeffs& field, const ScalarFn& exact, int comp = 0) {
  check_field(space, field);
  double s = 0.0;
  for (int e = 0; e < space.element_count(); ++e)
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) {
      const double d = field_at_qp(space, field, e, q, comp) - exact(space.quad_point(e, q));
      s += space.quad_weight(e, q) * d * d;
    }
  return std::sqrt(s);
}

inline double error_l2(const DgSpace& space, const FieldCoeffs& field, const VectorFn& exact) {
  if (space.components() != 2) throw std::invalid_argument("vector error needs a 2-component space");
  check_field(space, field);
  double s = 0.0;
  for (int e = 0; e < space.element_count(); ++e)
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) {
      const Point2 v = exact(space.quad_point(e, q));
      const double dx = field_at_qp(space, field, e, q, 0) - v.x;
      const double dy = field_at_qp(space, field, e, q, 1) - v.y;
      s += space.quad_weight(e, q) * (dx * dx + dy * dy);
    }
  return std::sqrt(s);
}

enum class NormKind { rho, c, u };

struct EnergyNormOptions {
  double sigma = 0.0;
  bool boundary_jumps = false;  // forced on for NormKind::u
};

/// One component of an exact field: value and gradient.
struct ExactComponent {
  ScalarFn value;
  VectorFn grad;
};

namespace detail {

/// Squared energy error of one component: broken gradient part plus
/// sigma/h_e * ||[field - exact]||^2 over the selected edges.
inline double energy_error_sq(const DgSpace& space, const FieldCoeffs& field, const ExactComponent& ex, int comp,
                              double sigma, bool boundary_jumps) {
  const auto nn = static_cast<std::size_t>(space.dofs_per_element());
  std::vector<Point2> g(nn);
  double s = 0.0;
  for (int e = 0; e < space.element_count(); ++e) {
    const double* c = field.values.data() + space.dof(comp, e, 0);
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) {
      space.physical_grads(e, q, g);
      Point2 gh;
      for (std::size_t i = 0; i < nn; ++i) gh = gh + c[i] * g[i];
      const Point2 d = gh - ex.grad(space.quad_point(e, q));
      s += space.quad_weight(e, q) * dot(d, d);
    }
  }
  auto edge_sum = [&](const EdgeTrace& t) {
    double js = 0.0;
    for (std::size_t q = 0; q < t.weights.size(); ++q) {
      const double uex = ex.value(t.points[q]);
      double jump = side_value(space, field, t.sides[0], q, comp) - uex;
      if (!t.boundary) jump -= side_value(space, field, t.sides[1], q, comp) - uex;
      js += t.weights[q] * jump * jump;
    }
    return sigma / t.length * js;
  };
  for (const auto& t : space.interior_traces()) s += edge_sum(t);
  if (boundary_jumps)
    for (const auto& t : space.boundary_traces()) s += edge_sum(t);
  return s;
}

}  // namespace detail

/// Energy-norm error. The rho and c norms use interior jumps unless
/// boundary_jumps is set; the velocity norm always includes boundary jumps.
inline double error_energy(const DgSpace& space, const FieldCoeffs& field, std::span<const ExactComponent> exact,
                           NormKind kind, EnergyNormOptions opt) {
  check_field(space, field);
  if (!(opt.sigma > 0.0)) throw std::invalid_argument("energy norm needs a positive penalty");
  if (exact.size() != static_cast<std::size_t>(space.components()))
    throw std::invalid_argument("one exact component per field component required");
  if ((kind == NormKind::u) != (space.components() == 2))
    throw std::invalid_argument("velocity norm needs the vector space, rho/c norms a scalar space");
  const bool bd = kind == NormKind::u || opt.boundary_jumps;
  double s = 0.0;
  for (int c = 0; c < space.components(); ++c)
    s += detail::energy_error_sq(space, field, exact[static_cast<std::size_t>(c)], c, opt.sigma, bd);
  return std::sqrt(s);
}

inline double error_energy(const DgSpace& space, const FieldCoeffs& field, const ExactComponent& exact, NormKind kind,
                           EnergyNormOptions opt) {
  return error_energy(space, field, std::span<const ExactComponent>(&exact, 1), kind, opt);
}

// ---------------------------------------------------------------------------
// Reports and rates

struct ErrorReport {
  double h = 0.0;
  double dt = 0.0;
  int degree = 0;
  double time = 0.0;
  double l2_u = 0.0, energy_u = 0.0;
  double l2_rho = 0.0, energy_rho = 0.0;
  double l2_c = 0.0, energy_c = 0.0;
  double l2_p = 0.0;
};

inline constexpr std::array<const char*, 7> kErrorColumns = {"L2_u", "H1_u", "L2_rho", "H1_rho", "L2_c", "H1_c", "L2_p"};

inline std::array<double, 7> error_values(const ErrorReport& r) {
  return {r.l2_u, r.energy_u, r.l2_rho, r.energy_rho, r.l2_c, r.energy_c, r.l2_p};
}

/// All errors of a state against the case's exact solution at the state's time.
inline ErrorReport compute_errors(const Stepper& stepper, const State& s) {
  const auto& pc = stepper.problem();
  if (!pc.exact) throw std::invalid_argument("case '" + pc.name + "' has no exact solution");
  const auto& ex = *pc.exact;
  const auto& disc = stepper.discretization();
  const auto& pen = stepper.config().penalty;
  const double t = s.time;
  ErrorReport r;
  r.h = disc.mesh->h();
  r.dt = stepper.config().dt;
  r.degree = disc.degree;
  r.time = t;

  const FieldCoeffs rho = stepper.density(s);
  const ExactComponent erho{[&](Point2 x) { return ex.rho(x, t); }, [&](Point2 x) { return ex.grad_rho(x, t); }};
  const ExactComponent ec{[&](Point2 x) { return ex.c(x, t); }, [&](Point2 x) { return ex.grad_c(x, t); }};
  const std::array<ExactComponent, 2> eu{
      ExactComponent{[&](Point2 x) { return ex.u(x, t).x; }, [&](Point2 x) { return ex.grad_u(x, t)[0]; }},
      ExactComponent{[&](Point2 x) { return ex.u(x, t).y; }, [&](Point2 x) { return ex.grad_u(x, t)[1]; }}};

  r.l2_rho = error_l2(disc.scalar, rho, erho.value);
  r.energy_rho = error_energy(disc.scalar, rho, erho, NormKind::rho, {pen.sigma_rho});
  r.l2_c = error_l2(disc.scalar, s.c, ec.value);
  r.energy_c = error_energy(disc.scalar, s.c, ec, NormKind::c, {pen.sigma_c});
  r.l2_u = error_l2(disc.velocity, s.u, [&](Point2 x) { return ex.u(x, t); });
  r.energy_u = error_energy(disc.velocity, s.u, eu, NormKind::u, {pen.sigma_u});
  r.l2_p = error_l2(disc.pressure, s.p, [&](Point2 x) { return ex.p(x, t); });
  return r;
}

/// Rates between consecutive entries of (size, error) pairs, sizes strictly
/// decreasing. A rate involving a zero error is undefined (nullopt).
inline std::vector<std::optional<double>> eoc(std::span<const std::pair<double, double>> table) {
  if (table.size() < 2) throw std::invalid_argument("rates need at least two entries");
  std::vector<std::optional<double>> rates;
  for (std::size_t i = 0; i + 1 < table.size(); ++i) {
    const auto [h0, e0] = table[i];
    const auto [h1, e1] = table[i + 1];
    if (!(h1 < h0) || !(h1 > 0.0)) throw std::invalid_argument("mesh sizes must be positive and strictly decreasing");
    if (e0 < 0.0 || e1 < 0.0) throw std::invalid_argument("errors must be non-negative");
    if (e0 == 0.0 || e1 == 0.0)
      rates.push_back(std::nullopt);
    else
      rates.push_back(std::log(e0 / e1) / std::log(h0 / h1));
  }
  return rates;
}

enum class RateAxis { h, dt };

/// Errors of a refinement sequence with rates per column.
struct EocTable {
  std::vector<ErrorReport> rows;
  RateAxis axis = RateAxis::h;

  double size_of(const ErrorReport& r) const { return axis == RateAxis::h ? r.h : r.dt; }

  /// rates[i][col] between rows i and i+1.
  std::vector<std::array<std::optional<double>, 7>> rates() const {
    std::vector<std::array<std::optional<double>, 7>> out(rows.size() > 1 ? rows.size() - 1 : 0);
    if (rows.size() < 2) return out;
    for (std::size_t col = 0; col < kErrorColumns.size(); ++col) {
      std::vector<std::pair<double, double>> t;
      for (const auto& r : rows) t.emplace_back(size_of(r), error_values(r)[col]);
      const auto rc = eoc(t);
      for (std::size_t i = 0; i < rc.size(); ++i) out[i][col] = rc[i];
    }
    return out;
  }

  /// Rate of one column on the finest pair.
  std::optional<double> finest_rate(std::size_t col) const {
    const auto r = rates();
    if (r.empty()) return std::nullopt;
    return r.back()[col];
  }
};

namespace detail {
inline void write_optional(std::ostream& os, const std::optional<double>& v) {
  if (v) os << *v;
}
}  // namespace detail

/// errors.csv: h, dt, the error columns, then rate_<col> against the previous row.
inline void write_errors_csv(std::ostream& os, const EocTable& table) {
  os << "h,dt";
  for (const char* c : kErrorColumns) os << ',' << c;
  for (const char* c : kErrorColumns) os << ",rate_" << c;
  os << '\n' << std::setprecision(10);
  const auto rates = table.rates();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    os << r.h << ',' << r.dt;
    for (double v : error_values(r)) os << ',' << v;
    for (std::size_t c = 0; c < kErrorColumns.size(); ++c) {
      os << ',';
      if (i > 0) detail::write_optional(os, rates[i - 1][c]);
    }
    os << '\n';
  }
}

/// rates.csv: one row per consecutive pair; header only for a single level.
inline void write_rates_csv(std::ostream& os, const EocTable& table) {
  os << "h_coarse,h_fine,dt_coarse,dt_fine";
  for (const char* c : kErrorColumns) os << ",rate_" << c;
  os << '\n' << std::setprecision(10);
  const auto rates = table.rates();
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const auto& a = table.rows[i];
    const auto& b = table.rows[i + 1];
    os << a.h << ',' << b.h << ',' << a.dt << ',' << b.dt;
    for (const auto& v : rates[i]) {
      os << ',';
      detail::write_optional(os, v);
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Mass

/// deviation_n = total mass of rho_h^n minus that of the first state.
inline std::vector<double> mass_series(const Stepper& stepper, std::span<const State> states) {
  std::vector<double> out;
  if (states.empty()) return out;
  const double m_first = stepper.total_mass(states.front());
  for (const auto& s : states) out.push_back(stepper.total_mass(s) - m_first);
  return out;
}

/// Vertical centre of mass of the density, int y rho / int rho.
inline double vertical_center_of_mass(const Stepper& stepper, const State& s) {
  const auto& X = stepper.discretization().scalar;
  const FieldCoeffs rho = stepper.density(s);
  double num = 0.0, den = 0.0;
  for (int e = 0; e < X.element_count(); ++e)
    for (std::size_t q = 0; q < X.volume_rule().size(); ++q) {
      const double w = X.quad_weight(e, q) * field_at_qp(X, rho, e, q);
      num += w * X.quad_point(e, q).y;
      den += w;
    }
  if (den == 0.0) throw std::domain_error("density has zero total mass");
  return num / den;
}

/// Largest value of a scalar field over the volume quadrature points and element vertices.
inline double field_max(const DgSpace& space, const FieldCoeffs& f) {
  double m = -std::numeric_limits<double>::infinity();
  const std::array<Point2, 3> corners{Point2{0, 0}, Point2{1, 0}, Point2{0, 1}};
  for (int e = 0; e < space.element_count(); ++e) {
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) m = std::max(m, field_at_qp(space, f, e, q));
    for (const auto& v : corners) m = std::max(m, eval_field(space, f, e, v).value);
  }
  return m;
}

}  // namespace chemodg

#endif  // CHEMODG_ANALYSIS_HPP
