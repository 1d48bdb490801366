#ifndef CHEMODG_STEPPER_HPP
#define CHEMODG_STEPPER_HPP

// Semi-implicit backward Euler stepping of the coupled system. Each step
// solves, in order,
//   (u^n, p^n)  Navier-Stokes with Picard iteration on b2(u^n, u^n, .),
//   c^n         linear, with the lagged density in the consumption term,
//   rho~^n      linear on the mean-zero space, lagged density in g,
// and then sets rho^n = rho~^n + m.
//
// With source terms the density mean m is advanced by the mean of f_rho
// (the only term that changes total mass); without sources m stays m0 and
// the total mass is conserved exactly.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemodg/dg_space.hpp"
#include "chemodg/forms.hpp"
#include "chemodg/problems.hpp"
#include "chemodg/sparse.hpp"

namespace chemodg {

/// X_h (scalar, P_k), V_h (2 x P_k) and M_h (P_{k-1}) on one mesh with shared rules.
struct Discretization {
  std::shared_ptr<const Mesh2D> mesh;
  int degree;
  DgSpace scalar;
  DgSpace velocity;
  DgSpace pressure;

  Discretization(std::shared_ptr<const Mesh2D> m, int k, int quad_exactness = -1)
      : mesh(std::move(m)),
        degree(check_degree(k)),
        scalar(mesh, k, 1, exactness(k, quad_exactness)),
        velocity(mesh, k, 2, exactness(k, quad_exactness)),
        pressure(mesh, k - 1, 1, exactness(k, quad_exactness)) {}

 private:
  static int check_degree(int k) {
    if (k < 1 || k > 3) throw std::invalid_argument("degree k must be 1, 2 or 3 (got " + std::to_string(k) + ")");
    return k;
  }
  static int exactness(int k, int q) { return q > 0 ? q : default_quadrature_exactness(k); }
};

enum class SolverKind { direct, gmres };

struct SchemeConfig {
  double dt = 1e-3;
  PenaltyConfig penalty;
  double picard_tol = 1e-10;
  int picard_max_iter = 50;
  SolverKind solver = SolverKind::direct;
  double linear_tol = 1e-12;  // relative residual for the iterative path
  int linear_max_iter = 500;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (!(picard_tol > 0.0)) throw std::invalid_argument("Picard tolerance must be positive");
    if (picard_max_iter < 1) throw std::invalid_argument("Picard needs at least one iteration");
    penalty.validate();
  }
};

struct State {
  FieldCoeffs rho_tilde;  // mean-zero part of the density
  FieldCoeffs c;
  FieldCoeffs u;
  FieldCoeffs p;
  double m0 = 0.0;         // mean of the initial density
  double mass_mean = 0.0;  // current density mean (== m0 without sources)
  double time = 0.0;
  int step = 0;
};

class PicardError : public std::runtime_error {
 public:
  PicardError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

struct NsResult {
  FieldCoeffs u;
  FieldCoeffs p;
  int picard_iterations = 0;
  std::vector<double> picard_history;  // relative L2 updates
  int linear_iterations = 0;           // Krylov iterations summed over Picard iterates
  double momentum_residual = 0.0;
};

struct StepResiduals {
  double rho = 0.0;
  double c = 0.0;
  double momentum = 0.0;
  double continuity = 0.0;
};

namespace detail {

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Removes the component along w (residual seen by mean-zero test functions).
inline std::vector<double> project_out(std::vector<double> r, std::span<const double> w) {
  const double ww = dot(w, w);
  if (ww > 0.0) axpy(-dot(r, w) / ww, w, r);
  return r;
}

/// Overwrites the leading block of an augmented matrix whose first rows hold
/// exactly the entries of `a` (plus `extra`, same pattern) before any
/// coupling columns.
inline void update_leading_block(CsrMatrix& big, const CsrMatrix& a, const CsrMatrix* extra = nullptr) {
  if (extra && !a.same_pattern(*extra)) throw std::logic_error("leading block terms must share one pattern");
  auto& val = big.values();
  for (int r = 0; r < a.rows(); ++r) {
    const int b = a.row_ptr()[r], len = a.row_ptr()[r + 1] - b;
    double* dst = val.data() + big.row_ptr()[r];
    for (int k = 0; k < len; ++k) dst[k] = a.values()[b + k] + (extra ? extra->values()[b + k] : 0.0);
  }
}

}  // namespace detail

/// Adds a constant to a scalar field in place.
inline void add_constant(const DgSpace& space, FieldCoeffs& f, double value) {
  const auto& rule = space.volume_rule();
  std::vector<double> ref_int(static_cast<std::size_t>(space.dofs_per_element()), 0.0);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto phi = space.ref_values(q);
    for (std::size_t i = 0; i < ref_int.size(); ++i) ref_int[i] += rule.weights[q] * phi[i];
  }
  // the reference mass matrix is the identity, so 1 has coefficients int_ref phi_i
  for (int e = 0; e < space.element_count(); ++e)
    for (int i = 0; i < space.dofs_per_element(); ++i)
      f.values[static_cast<std::size_t>(space.dof(0, e, i))] += value * ref_int[static_cast<std::size_t>(i)];
}

class Stepper {
 public:
  Stepper(ProblemCase problem, std::shared_ptr<const Discretization> disc, SchemeConfig config)
      : problem_(std::move(problem)), disc_(std::move(disc)), config_(config) {
    config_.validate();
    problem_.params.validate();
    const auto& X = disc_->scalar;
    const auto& V = disc_->velocity;
    const auto& M = disc_->pressure;
    const auto& prm = problem_.params;
    mass_x_ = assemble_mass(X);
    mass_v_ = assemble_mass(V);
    // the SIPG patterns contain the diagonal, so every combination below stays on one pattern
    auto a_rho = assemble_sipg_scalar(X, 1.0, config_.penalty.sigma_rho);
    auto a_c = assemble_sipg_scalar(X, 1.0, config_.penalty.sigma_c);
    base_rho_ = a_rho;
    base_rho_.scale(prm.mu).add_scaled(1.0 / config_.dt, mass_x_);
    base_c_ = a_c;
    base_c_.scale(prm.kappa).add_scaled(1.0 / config_.dt, mass_x_);
    a_rho_ = std::move(a_rho);
    a_c_ = std::move(a_c);
    a_u_ = assemble_sipg_vector(V, prm.nu, config_.penalty.sigma_u);
    base_u_ = a_u_;
    base_u_.add_scaled(1.0 / config_.dt, mass_v_);
    div_ = assemble_div(V, M);
    w_x_ = integral_functional(X);
    w_p_ = integral_functional(M);
    area_ = disc_->mesh->total_area();
    saddle_template_ = assemble_saddle_matrix(BlockSystem{base_u_, div_, w_p_});
    bordered_template_ = assemble_constrained_matrix(base_rho_, w_x_);
    if (config_.solver == SolverKind::gmres) build_preconditioners();
  }

  const ProblemCase& problem() const { return problem_; }
  const Discretization& discretization() const { return *disc_; }
  const SchemeConfig& config() const { return config_; }

  State initialize() const {
    const auto& X = disc_->scalar;
    State s;
    s.m0 = integrate(X, problem_.rho0) / area_;
    s.mass_mean = s.m0;
    const double m0 = s.m0;
    const auto rho0 = problem_.rho0;
    s.rho_tilde = l2_project([&](Point2 x) { return rho0(x) - m0; }, X);
    add_constant(X, s.rho_tilde, -mean_value(X, s.rho_tilde));
    s.c = l2_project(problem_.c0, X);
    s.u = l2_project(problem_.u0, disc_->velocity);
    s.p = disc_->pressure.zero_field();
    s.rho_tilde.time = s.c.time = s.u.time = s.p.time = 0.0;
    return s;
  }

  /// rho~ + m as a field.
  FieldCoeffs density(const State& s) const {
    FieldCoeffs rho = s.rho_tilde;
    add_constant(disc_->scalar, rho, s.mass_mean);
    return rho;
  }

  /// Sum over elements of the integral of rho_h = rho~_h + m.
  double total_mass(const State& s) const {
    return detail::dot(w_x_, s.rho_tilde.values) + s.mass_mean * area_;
  }

  NsResult step_ns(const State& s) const {
    const auto& V = disc_->velocity;
    const auto& X = disc_->scalar;
    const double t = next_time(s);
    const FieldCoeffs rho_prev = density(s);

    std::vector<double> rhs = mass_v_ * std::span<const double>(s.u.values);
    for (auto& v : rhs) v /= config_.dt;
    const auto buoy = assemble_buoyancy(X, rho_prev, problem_.params.grad_phi, V);
    detail::axpy(1.0, buoy, rhs);
    if (problem_.sources) {
      const auto f_u = problem_.sources->f_u;
      detail::axpy(1.0, assemble_load([&](Point2 x) { return f_u(x, t); }, V), rhs);
    }

    BlockSystem sys{base_u_, div_, w_p_};
    NsResult res;
    FieldCoeffs u_it = s.u;
    std::vector<double> warm(s.u.values);
    warm.insert(warm.end(), s.p.values.begin(), s.p.values.end());
    warm.push_back(0.0);
    CsrMatrix saddle = saddle_template_;
    const auto full_rhs = saddle_rhs(sys, rhs, {});
    CsrMatrix conv = assemble_convection_b2(V, u_it);
    for (int it = 1; it <= config_.picard_max_iter; ++it) {
      detail::update_leading_block(saddle, base_u_, &conv);
      std::vector<double> x;
      if (config_.solver == SolverKind::direct) {
        x = DirectSolver(saddle).solve(full_rhs);
      } else {
        const auto pre = saddle_pre_;
        auto g = solve_gmres(
            saddle, full_rhs, [pre](std::span<const double> r, std::span<double> z) { pre->apply(r, z); },
            config_.linear_tol, config_.linear_max_iter, kRestart, warm);
        res.linear_iterations += g.iterations;
        x = std::move(g.x);
      }
      warm = x;
      auto sol = split_saddle(sys, x);
      FieldCoeffs u_new{std::move(sol.velocity), t};
      std::vector<double> diff = u_new.values;
      detail::axpy(-1.0, u_it.values, diff);
      const double unorm = l2_norm(V, u_new);
      const double dnorm = l2_norm(V, FieldCoeffs{diff, {}});
      const double rel = unorm > 0.0 ? dnorm / unorm : dnorm;
      res.picard_history.push_back(rel);
      u_it = std::move(u_new);
      res.p = FieldCoeffs{std::move(sol.pressure), t};
      conv = assemble_convection_b2(V, u_it);
      // a velocity at roundoff level never meets the relative update test, so a
      // nonlinear momentum residual at the tolerance also ends the iteration
      const double resid = momentum_residual(conv, u_it, res.p, rhs);
      if (rel <= config_.picard_tol || resid <= config_.picard_tol) {
        res.picard_iterations = it;
        res.u = std::move(u_it);
        res.momentum_residual = resid;
        return res;
      }
    }
    throw PicardError("Picard iteration did not converge in " + std::to_string(config_.picard_max_iter) +
                          " iterations at step " + std::to_string(s.step + 1) + " (last update " +
                          std::to_string(res.picard_history.back()) + ")",
                      res.picard_history);
  }

  FieldCoeffs step_c(const State& s, const FieldCoeffs& u_new) const {
    return step_c(s, assemble_convection_b1(disc_->velocity, u_new, disc_->scalar));
  }

  FieldCoeffs step_rho(const State& s, const FieldCoeffs& u_new, const FieldCoeffs& c_new) const {
    return step_rho(s, assemble_convection_b1(disc_->velocity, u_new, disc_->scalar), c_new);
  }

  /// Chemical step given the assembled b1(u^n; ., .).
  FieldCoeffs step_c(const State& s, const CsrMatrix& conv) const {
    const auto& X = disc_->scalar;
    const double t = next_time(s);
    const FieldCoeffs rho_prev = density(s);
    CsrMatrix k = base_c_;
    k.add_scaled(1.0, conv);
    if (problem_.params.gamma != 0.0) k.add_scaled(problem_.params.gamma, assemble_weighted_mass(X, rho_prev, X));
    std::vector<double> rhs = mass_x_ * std::span<const double>(s.c.values);
    for (auto& v : rhs) v /= config_.dt;
    if (problem_.sources) {
      const auto f = problem_.sources->f_c;
      detail::axpy(1.0, assemble_load([&](Point2 x) { return f(x, t); }, X), rhs);
    }
    return FieldCoeffs{solve_scalar(k, rhs, s.c.values), t};
  }

  /// Density step given the assembled b1(u^n; ., .).
  FieldCoeffs step_rho(const State& s, const CsrMatrix& conv, const FieldCoeffs& c_new) const {
    const double t = next_time(s);
    const FieldCoeffs rho_prev = density(s);
    CsrMatrix k = base_rho_;
    k.add_scaled(1.0, conv);
    std::vector<double> rhs = rho_rhs(s, rho_prev, c_new, t);
    auto x = solve_mean_zero(k, rhs, s.rho_tilde.values);
    FieldCoeffs out{std::move(x), t};
    return out;
  }

  /// Density mean after the step: m advances by dt * mean(f_rho(t_n)).
  double next_mass_mean(const State& s) const {
    if (!problem_.sources) return s.mass_mean;
    const double t = next_time(s);
    const auto f = problem_.sources->f_rho;
    return s.mass_mean + config_.dt * integrate(disc_->scalar, [&](Point2 x) { return f(x, t); }) / area_;
  }

  State advance(const State& s, NsResult* report = nullptr) const {
    NsResult ns = step_ns(s);
    const CsrMatrix conv = assemble_convection_b1(disc_->velocity, ns.u, disc_->scalar);
    FieldCoeffs c = step_c(s, conv);
    FieldCoeffs rho = step_rho(s, conv, c);
    State out;
    out.m0 = s.m0;
    out.mass_mean = next_mass_mean(s);
    out.step = s.step + 1;
    out.time = next_time(s);
    out.rho_tilde = std::move(rho);
    out.c = std::move(c);
    out.u = ns.u;
    out.p = ns.p;
    if (report) *report = std::move(ns);
    return out;
  }

  /// Residuals of all four discrete equations at `next`, given `prev`,
  /// assembled independently of the sequential solve.
  StepResiduals coupled_residuals(const State& prev, const State& next) const {
    const auto& X = disc_->scalar;
    const auto& V = disc_->velocity;
    const auto& prm = problem_.params;
    const double dt = config_.dt, t = next.time;
    const FieldCoeffs rho_prev = density(prev);
    auto rel = [](const std::vector<double>& r, std::initializer_list<double> scales) {
      double s = 0.0;
      for (double v : scales) s += v;
      return s > 0.0 ? norm_inf(r) / s : norm_inf(r);
    };
    auto sub = [](std::vector<double> a, const std::vector<double>& b) {
      detail::axpy(-1.0, b, a);
      return a;
    };
    StepResiduals out;

    // density
    {
      const auto mdiff = mass_x_ * std::span<const double>(sub(next.rho_tilde.values, prev.rho_tilde.values));
      const auto diff_term = a_rho_ * std::span<const double>(next.rho_tilde.values);
      const auto conv = assemble_convection_b1(V, next.u, X) * std::span<const double>(next.rho_tilde.values);
      const auto chemo = assemble_chemotaxis_g(X, rho_prev, X) * std::span<const double>(next.c.values);
      std::vector<double> r(mdiff.size(), 0.0), f(mdiff.size(), 0.0);
      if (problem_.sources) {
        const auto fr = problem_.sources->f_rho;
        f = assemble_load([&](Point2 x) { return fr(x, t); }, X);
      }
      for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = mdiff[i] / dt + prm.mu * diff_term[i] + conv[i] - prm.beta * chemo[i] - f[i];
      r = detail::project_out(std::move(r), w_x_);
      out.rho = rel(r, {norm_inf(mdiff) / dt, prm.mu * norm_inf(diff_term), norm_inf(conv), prm.beta * norm_inf(chemo),
                        norm_inf(f)});
    }
    // chemical
    {
      const auto mdiff = mass_x_ * std::span<const double>(sub(next.c.values, prev.c.values));
      const auto diff_term = a_c_ * std::span<const double>(next.c.values);
      const auto conv = assemble_convection_b1(V, next.u, X) * std::span<const double>(next.c.values);
      const auto react = assemble_weighted_mass(X, rho_prev, X) * std::span<const double>(next.c.values);
      std::vector<double> r(mdiff.size(), 0.0), f(mdiff.size(), 0.0);
      if (problem_.sources) {
        const auto fc = problem_.sources->f_c;
        f = assemble_load([&](Point2 x) { return fc(x, t); }, X);
      }
      for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = mdiff[i] / dt + prm.kappa * diff_term[i] + conv[i] + prm.gamma * react[i] - f[i];
      out.c = rel(r, {norm_inf(mdiff) / dt, prm.kappa * norm_inf(diff_term), norm_inf(conv),
                      prm.gamma * norm_inf(react), norm_inf(f)});
    }
    // momentum and continuity
    {
      const auto mdiff = mass_v_ * std::span<const double>(sub(next.u.values, prev.u.values));
      const auto visc = a_u_ * std::span<const double>(next.u.values);
      const auto conv = assemble_convection_b2(V, next.u) * std::span<const double>(next.u.values);
      const auto grad_p = div_.transposed() * std::span<const double>(next.p.values);
      auto f = assemble_buoyancy(X, rho_prev, prm.grad_phi, V);
      if (problem_.sources) {
        const auto fu = problem_.sources->f_u;
        detail::axpy(1.0, assemble_load([&](Point2 x) { return fu(x, t); }, V), f);
      }
      std::vector<double> r(mdiff.size());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = mdiff[i] / dt + visc[i] + conv[i] - grad_p[i] - f[i];
      out.momentum = rel(r, {norm_inf(mdiff) / dt, norm_inf(visc), norm_inf(conv), norm_inf(grad_p), norm_inf(f)});
      auto div = div_ * std::span<const double>(next.u.values);
      div = detail::project_out(std::move(div), w_p_);
      out.continuity = norm_inf(div) / std::max(div_.norm_inf() * norm_inf(next.u.values), 1e-300);
    }
    return out;
  }

  std::vector<double> rho_rhs(const State& s, const FieldCoeffs& rho_prev, const FieldCoeffs& c_new, double t) const {
    const auto& X = disc_->scalar;
    std::vector<double> rhs = mass_x_ * std::span<const double>(s.rho_tilde.values);
    for (auto& v : rhs) v /= config_.dt;
    if (problem_.params.beta != 0.0) {
      const auto chemo = assemble_chemotaxis_g(X, rho_prev, X) * std::span<const double>(c_new.values);
      detail::axpy(problem_.params.beta, chemo, rhs);
    }
    if (problem_.sources) {
      const auto f = problem_.sources->f_rho;
      detail::axpy(1.0, assemble_load([&](Point2 x) { return f(x, t); }, X), rhs);
    }
    return rhs;
  }

  const std::vector<double>& scalar_integral() const { return w_x_; }
  const std::vector<double>& pressure_integral() const { return w_p_; }

 private:
  double next_time(const State& s) const { return (s.step + 1) * config_.dt; }

  double momentum_residual(const CsrMatrix& conv, const FieldCoeffs& u, const FieldCoeffs& p,
                           const std::vector<double>& rhs) const {
    CsrMatrix k = base_u_;
    k.add_scaled(1.0, conv);
    const auto ku = k * std::span<const double>(u.values);
    const auto bp = div_.transposed() * std::span<const double>(p.values);
    std::vector<double> r(ku.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = ku[i] - bp[i] - rhs[i];
    const double scale = norm_inf(ku) + norm_inf(bp) + norm_inf(rhs);
    return scale > 0.0 ? norm_inf(r) / scale : norm_inf(r);
  }

  static constexpr int kRestart = 60;

  std::vector<double> solve_scalar(const CsrMatrix& k, const std::vector<double>& rhs,
                                   const std::vector<double>& guess) const {
    if (config_.solver == SolverKind::direct) return DirectSolver(k).solve(rhs);
    const auto pre = c_pre_;
    return solve_gmres(
               k, rhs, [pre](std::span<const double> r, std::span<double> z) { pre->solve(r, z); },
               config_.linear_tol, config_.linear_max_iter, kRestart, guess)
        .x;
  }

  std::vector<double> solve_mean_zero(const CsrMatrix& k, const std::vector<double>& rhs,
                                      const std::vector<double>& guess) const {
    const auto n = rhs.size();
    CsrMatrix aug = bordered_template_;
    detail::update_leading_block(aug, k);
    std::vector<double> b(rhs);
    b.push_back(0.0);
    std::vector<double> x;
    if (config_.solver == SolverKind::direct) {
      x = DirectSolver(aug).solve(b);
    } else {
      std::vector<double> x0(guess);
      x0.push_back(0.0);
      const auto pre = rho_pre_;
      x = solve_gmres(
              aug, b, [pre](std::span<const double> r, std::span<double> z) { pre->apply(r, z); },
              config_.linear_tol, config_.linear_max_iter, kRestart, x0)
              .x;
    }
    x.resize(n);
    return x;
  }

  /// Factorisations of the constant symmetric parts, used as preconditioners.
  void build_preconditioners() {
    const auto& X = disc_->scalar;
    const auto& prm = problem_.params;
    // the velocity block without convection is symmetric positive definite
    const auto mp = assemble_mass(disc_->pressure).values();
    const double h = disc_->mesh->h();
    const double scale = std::min(config_.dt / (h * h), 1.0 / prm.nu);
    std::vector<double> reg(mp.size());
    for (std::size_t i = 0; i < mp.size(); ++i) reg[i] = kSaddleRegularisation * scale * mp[i];
    saddle_pre_ = std::make_shared<const SaddlePreconditioner>(base_u_, div_, w_p_, reg);
    // reaction at the initial mean density
    const double m0 = std::max(0.0, integrate(X, problem_.rho0) / area_);
    CsrMatrix c_sym = base_c_;
    if (prm.gamma > 0.0) c_sym.add_scaled(prm.gamma * m0, mass_x_);
    c_pre_ = std::make_shared<const SpdSolver>(c_sym);
    rho_pre_ = std::make_shared<const BorderedPreconditioner>(std::make_shared<const SpdSolver>(base_rho_), w_x_);
  }

  static constexpr double kSaddleRegularisation = 1e-8;

  ProblemCase problem_;
  std::shared_ptr<const Discretization> disc_;
  SchemeConfig config_;
  CsrMatrix mass_x_, mass_v_, a_rho_, a_c_, a_u_, base_rho_, base_c_, base_u_, div_;
  std::vector<double> w_x_, w_p_;
  double area_ = 1.0;
  CsrMatrix saddle_template_, bordered_template_;
  std::shared_ptr<const SaddlePreconditioner> saddle_pre_;
  std::shared_ptr<const SpdSolver> c_pre_;
  std::shared_ptr<const BorderedPreconditioner> rho_pre_;
};

// ---------------------------------------------------------------------------
// Checkpoints

inline void write_checkpoint(std::ostream& os, const Discretization& disc, const State& s) {
  os << "chemodg-checkpoint 1\n";
  os << "mesh_hash " << std::hex << disc.mesh->hash() << std::dec << '\n';
  os << "degree " << disc.degree << '\n';
  os << std::setprecision(17);
  os << "time " << s.time << "\nstep " << s.step << "\nm0 " << s.m0 << "\nmass_mean " << s.mass_mean << '\n';
  auto field = [&os](const char* name, const FieldCoeffs& f) {
    os << name << ' ' << f.values.size() << '\n';
    for (double v : f.values) os << v << '\n';
  };
  field("rho_tilde", s.rho_tilde);
  field("c", s.c);
  field("u", s.u);
  field("p", s.p);
}

inline State read_checkpoint(std::istream& is, const Discretization& disc) {
  auto expect = [&is](const std::string& key) {
    std::string k;
    if (!(is >> k) || k != key) throw std::runtime_error("checkpoint: expected '" + key + "', found '" + k + "'");
  };
  expect("chemodg-checkpoint");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  expect("mesh_hash");
  std::uint64_t hash = 0;
  is >> std::hex >> hash >> std::dec;
  if (hash != disc.mesh->hash()) throw std::runtime_error("checkpoint: mesh hash mismatch");
  expect("degree");
  int k = 0;
  is >> k;
  if (k != disc.degree) throw std::runtime_error("checkpoint: degree mismatch");
  State s;
  expect("time");
  is >> s.time;
  expect("step");
  is >> s.step;
  expect("m0");
  is >> s.m0;
  expect("mass_mean");
  is >> s.mass_mean;
  auto field = [&](const char* name, const DgSpace& space) {
    expect(name);
    std::size_t n = 0;
    is >> n;
    if (n != static_cast<std::size_t>(space.total_dofs())) throw std::runtime_error(std::string("checkpoint: bad size for ") + name);
    FieldCoeffs f{std::vector<double>(n), s.time};
    for (auto& v : f.values)
      if (!(is >> v)) throw std::runtime_error("checkpoint: truncated data");
    return f;
  };
  s.rho_tilde = field("rho_tilde", disc.scalar);
  s.c = field("c", disc.scalar);
  s.u = field("u", disc.velocity);
  s.p = field("p", disc.pressure);
  return s;
}

}  // namespace chemodg

#endif  // CHEMODG_STEPPER_HPP
