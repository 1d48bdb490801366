#ifndef CHEMODG_FORMS_HPP
#define CHEMODG_FORMS_HPP

// Assembly of the interior penalty diffusion forms, the divergence coupling,
// the skew-symmetrised convection forms, the chemotaxis form, mass matrices
// and load vectors.
//
// Edge conventions: on an interior edge with normal n from left (L) to right
// (R), [v] = v_L - v_R and {v} = (v_L + v_R)/2. On boundary edges the
// diffusion and divergence forms use [v] = {v} = v. The convection forms treat
// the missing exterior trace as zero there ([v] = v, {v} = v/2), which is what
// keeps them exactly skew-symmetric for velocities with nonzero normal trace.

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemodg/dg_space.hpp"
#include "chemodg/sparse.hpp"

namespace chemodg {

struct PenaltyConfig {
  double sigma_rho = 10.0;
  double sigma_c = 10.0;
  double sigma_u = 10.0;

  /// sigma = 10 k^2 for every form.
  static PenaltyConfig standard(int degree) {
    const double s = 10.0 * degree * degree;
    return {s, s, s};
  }
  static PenaltyConfig uniform(double s) { return {s, s, s}; }

  void validate() const {
    if (!(sigma_rho > 0.0 && sigma_c > 0.0 && sigma_u > 0.0))
      throw std::invalid_argument("penalty parameters must be strictly positive");
  }
};

struct PhysParams {
  double mu = 1.0;     // cell diffusion
  double kappa = 1.0;  // chemical diffusion
  double nu = 1.0;     // viscosity
  double beta = 1.0;   // chemotactic coefficient
  double gamma = 1.0;  // consumption rate
  VectorFn grad_phi = [](Point2) { return Point2{}; };

  void validate() const {
    if (!(mu > 0.0 && kappa > 0.0 && nu > 0.0))
      throw std::invalid_argument("diffusion constants mu, kappa, nu must be positive");
    // zero coupling constants switch the chemotaxis and consumption terms off
    if (!(beta >= 0.0 && gamma >= 0.0)) throw std::invalid_argument("beta and gamma must be non-negative");
  }
};

inline void require_shared_rules(const DgSpace& a, const DgSpace& b) {
  if (a.shared_mesh() != b.shared_mesh() || a.volume_rule().exactness != b.volume_rule().exactness)
    throw std::invalid_argument("spaces must share the mesh and quadrature rules");
}

/// Zero-valued CSR on the element coupling pattern of two spaces, plus
/// O(1) local-block accumulation. Component-diagonal patterns only couple
/// equal components (rows and cols must then have the same component count).
class BlockAssembler {
 public:
  BlockAssembler(const DgSpace& rows, const DgSpace& cols, bool component_diagonal = false)
      : rows_(rows), cols_(cols), diagonal_(component_diagonal) {
    if (diagonal_ && rows.components() != cols.components())
      throw std::invalid_argument("component-diagonal pattern needs equal component counts");
    if (rows.shared_mesh() != cols.shared_mesh()) throw std::invalid_argument("spaces live on different meshes");
    const auto& mesh = rows.mesh();
    const int nr = rows.dofs_per_element(), nc = cols.dofs_per_element();
    std::vector<int> ptr(static_cast<std::size_t>(rows.total_dofs()) + 1, 0);
    std::vector<int> idx;
    for (int rc = 0; rc < rows.components(); ++rc)
      for (int e = 0; e < rows.element_count(); ++e) {
        const auto& coupled = mesh.coupled_elements(e);
        for (int i = 0; i < nr; ++i) {
          const int r = rows.dof(rc, e, i);
          for (int cc = diagonal_ ? rc : 0; cc < (diagonal_ ? rc + 1 : cols.components()); ++cc)
            for (int f : coupled)
              for (int j = 0; j < nc; ++j) idx.push_back(cols.dof(cc, f, j));
          ptr[static_cast<std::size_t>(r) + 1] =
              static_cast<int>(coupled.size()) * nc * (diagonal_ ? 1 : cols.components());
        }
      }
    for (std::size_t r = 1; r < ptr.size(); ++r) ptr[r] += ptr[r - 1];
    // rows were emitted in dof order, so idx is already laid out by ptr
    std::vector<double> val(idx.size(), 0.0);
    matrix_ = CsrMatrix(rows.total_dofs(), cols.total_dofs(), std::move(ptr), std::move(idx), std::move(val));
  }

  /// local is nr x nc row-major: rows = test functions of (rc, re), cols = trial functions of (cc, ce).
  void add(int rc, int re, int cc, int ce, std::span<const double> local) {
    const auto& coupled = rows_.mesh().coupled_elements(re);
    int slot = -1;
    for (std::size_t k = 0; k < coupled.size(); ++k)
      if (coupled[k] == ce) slot = static_cast<int>(k);
    if (slot < 0) throw std::logic_error("elements are not coupled");
    if (diagonal_ && rc != cc) throw std::logic_error("component-diagonal pattern has no cross-component blocks");
    const int nr = rows_.dofs_per_element(), nc = cols_.dofs_per_element();
    const int base = ((diagonal_ ? 0 : cc) * static_cast<int>(coupled.size()) + slot) * nc;
    auto& val = matrix_.values();
    const auto& ptr = matrix_.row_ptr();
    for (int i = 0; i < nr; ++i) {
      const int start = ptr[static_cast<std::size_t>(rows_.dof(rc, re, i))] + base;
      for (int j = 0; j < nc; ++j) val[static_cast<std::size_t>(start + j)] += local[static_cast<std::size_t>(i * nc + j)];
    }
  }

  CsrMatrix finish() { return std::move(matrix_); }

 private:
  const DgSpace& rows_;
  const DgSpace& cols_;
  bool diagonal_;
  CsrMatrix matrix_;
};

namespace detail {

inline double side_value(const DgSpace& space, const FieldCoeffs& f, const SideTrace& s, std::size_t q, int comp = 0) {
  const int n = space.dofs_per_element();
  const double* c = f.values.data() + space.dof(comp, s.element, 0);
  double v = 0.0;
  for (int i = 0; i < n; ++i) v += c[i] * s.values[q * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
  return v;
}

inline Point2 side_vector(const DgSpace& space, const FieldCoeffs& f, const SideTrace& s, std::size_t q) {
  return {side_value(space, f, s, q, 0), side_value(space, f, s, q, 1)};
}

struct SipgOptions {
  double diffusivity = 1.0;
  double sigma = 0.0;              // 0 disables the penalty term
  bool boundary_edges = false;     // sum over all edges instead of interior ones
  bool consistency = true;         // average-flux terms (off for norm Gram matrices)
  const DgSpace* weight_space = nullptr;  // optional scalar weight field (chemotaxis)
  const FieldCoeffs* weight = nullptr;
};

/// Component-diagonal SIPG-type operator:
///   sum_E int w grad(psi).grad(phi)
/// - sum_e int {w grad psi}.n [phi] - sum_e int {w grad phi}.n [psi]
/// + sum_e sigma/h_e int [psi][phi], all scaled by the diffusivity.
inline CsrMatrix assemble_sipg(const DgSpace& space, const SipgOptions& opt) {
  if (opt.weight) {
    require_shared_rules(space, *opt.weight_space);
    check_field(*opt.weight_space, *opt.weight);
  }
  BlockAssembler asmb(space, space, true);
  const int n = space.dofs_per_element();
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> local(nn * nn);
  std::vector<Point2> g(nn);
  const auto& rule = space.volume_rule();
  auto weight_at_qp = [&](int e, std::size_t q) {
    return opt.weight ? field_at_qp(*opt.weight_space, *opt.weight, e, q) : 1.0;
  };

  for (int e = 0; e < space.element_count(); ++e) {
    std::fill(local.begin(), local.end(), 0.0);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      space.physical_grads(e, q, g);
      const double jw = opt.diffusivity * space.quad_weight(e, q) * weight_at_qp(e, q);
      for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j) local[i * nn + j] += jw * dot(g[j], g[i]);
    }
    for (int c = 0; c < space.components(); ++c) asmb.add(c, e, c, e, local);
  }

  auto do_edge = [&](const EdgeTrace& t, const EdgeTrace* tw) {
    const int sides = t.side_count();
    const std::array<double, 2> avg = t.boundary ? std::array{1.0, 0.0} : std::array{0.5, 0.5};
    const std::array<double, 2> jump = {1.0, -1.0};
    const double pen = opt.sigma / t.length;
    for (int b = 0; b < sides; ++b) {      // test side
      for (int a = 0; a < sides; ++a) {    // trial side
        const auto& sa = t.sides[static_cast<std::size_t>(a)];
        const auto& sb = t.sides[static_cast<std::size_t>(b)];
        std::fill(local.begin(), local.end(), 0.0);
        for (std::size_t q = 0; q < t.weights.size(); ++q) {
          const double wq = opt.diffusivity * t.weights[q];
          double wa = 1.0, wb = 1.0;
          if (tw) {
            wa = side_value(*opt.weight_space, *opt.weight, tw->sides[static_cast<std::size_t>(a)], q);
            wb = side_value(*opt.weight_space, *opt.weight, tw->sides[static_cast<std::size_t>(b)], q);
          }
          for (std::size_t i = 0; i < nn; ++i) {
            const double phi_b = sb.values[q * nn + i];
            const double dphi_b = dot(sb.grads[q * nn + i], t.normal);
            for (std::size_t j = 0; j < nn; ++j) {
              const double psi_a = sa.values[q * nn + j];
              const double dpsi_a = dot(sa.grads[q * nn + j], t.normal);
              double v = pen * jump[a] * jump[b] * psi_a * phi_b;
              if (opt.consistency)
                v -= avg[a] * wa * dpsi_a * jump[b] * phi_b + avg[b] * wb * dphi_b * jump[a] * psi_a;
              local[i * nn + j] += wq * v;
            }
          }
        }
        for (int c = 0; c < space.components(); ++c) asmb.add(c, sb.element, c, sa.element, local);
      }
    }
  };
  const auto& ti = space.interior_traces();
  for (std::size_t k = 0; k < ti.size(); ++k)
    do_edge(ti[k], opt.weight ? &opt.weight_space->interior_traces()[k] : nullptr);
  if (opt.boundary_edges) {
    const auto& tb = space.boundary_traces();
    for (std::size_t k = 0; k < tb.size(); ++k)
      do_edge(tb[k], opt.weight ? &opt.weight_space->boundary_traces()[k] : nullptr);
  }
  return asmb.finish();
}

/// Skew-symmetrised convection kernel shared by the scalar and vector forms,
/// applied component-diagonally on `space`; the transporting velocity lives on
/// `vspace`.
inline CsrMatrix assemble_convection(const DgSpace& vspace, const FieldCoeffs& u, const DgSpace& space) {
  if (vspace.components() != 2) throw std::invalid_argument("transport velocity must have two components");
  require_shared_rules(vspace, space);
  check_field(vspace, u);
  BlockAssembler asmb(space, space, true);
  const auto nn = static_cast<std::size_t>(space.dofs_per_element());
  const auto nv = static_cast<std::size_t>(vspace.dofs_per_element());
  std::vector<double> local(nn * nn);
  std::vector<Point2> g(nn), gv(nv);
  const auto& rule = space.volume_rule();

  for (int e = 0; e < space.element_count(); ++e) {
    std::fill(local.begin(), local.end(), 0.0);
    const double* ux = u.values.data() + vspace.dof(0, e, 0);
    const double* uy = u.values.data() + vspace.dof(1, e, 0);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      space.physical_grads(e, q, g);
      vspace.physical_grads(e, q, gv);
      const auto pv = vspace.ref_values(q);
      Point2 vel;
      double div = 0.0;
      for (std::size_t k = 0; k < nv; ++k) {
        vel = vel + Point2{ux[k] * pv[k], uy[k] * pv[k]};
        div += ux[k] * gv[k].x + uy[k] * gv[k].y;
      }
      const double jw = space.quad_weight(e, q);
      const auto phi = space.ref_values(q);
      for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j)
          local[i * nn + j] += jw * (dot(vel, g[j]) * phi[i] + 0.5 * div * phi[j] * phi[i]);
    }
    for (int c = 0; c < space.components(); ++c) asmb.add(c, e, c, e, local);
  }

  const auto& vint = vspace.interior_traces();
  std::vector<double> avg_un, jump_un;
  for (std::size_t k = 0; k < vint.size(); ++k) {
    const auto& t = space.interior_traces()[k];
    const auto& tv = vint[k];
    const std::array<double, 2> jump = {1.0, -1.0};
    const std::size_t nq = t.weights.size();
    avg_un.resize(nq);
    jump_un.resize(nq);
    for (std::size_t q = 0; q < nq; ++q) {
      const Point2 ul = side_vector(vspace, u, tv.sides[0], q), ur = side_vector(vspace, u, tv.sides[1], q);
      avg_un[q] = 0.5 * dot(ul + ur, t.normal);
      jump_un[q] = dot(ul - ur, t.normal);
    }
    for (int b = 0; b < 2; ++b) {
      for (int a = 0; a < 2; ++a) {
        const auto& sa = t.sides[static_cast<std::size_t>(a)];
        const auto& sb = t.sides[static_cast<std::size_t>(b)];
        std::fill(local.begin(), local.end(), 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
          // -{u}.n [psi] {phi} - 1/2 [u].n {psi phi}
          double coef = -avg_un[q] * jump[a] * 0.5;
          if (a == b) coef -= 0.25 * jump_un[q];
          coef *= t.weights[q];
          const double* pa = sa.values.data() + q * nn;
          const double* pb = sb.values.data() + q * nn;
          for (std::size_t i = 0; i < nn; ++i) {
            const double ci = coef * pb[i];
            for (std::size_t j = 0; j < nn; ++j) local[i * nn + j] += ci * pa[j];
          }
        }
        for (int c = 0; c < space.components(); ++c) asmb.add(c, sb.element, c, sa.element, local);
      }
    }
  }
  const auto& vbd = vspace.boundary_traces();
  for (std::size_t k = 0; k < vbd.size(); ++k) {
    const auto& t = space.boundary_traces()[k];
    const auto& s = t.sides[0];
    std::fill(local.begin(), local.end(), 0.0);
    for (std::size_t q = 0; q < t.weights.size(); ++q) {
      const double un = dot(side_vector(vspace, u, vbd[k].sides[0], q), t.normal);
      for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j) local[i * nn + j] -= t.weights[q] * 0.5 * un * s.values[q * nn + j] * s.values[q * nn + i];
    }
    for (int c = 0; c < space.components(); ++c) asmb.add(c, s.element, c, s.element, local);
  }
  return asmb.finish();
}

}  // namespace detail

/// diffusivity * a_alpha on a scalar space; edge terms over interior edges only.
inline CsrMatrix assemble_sipg_scalar(const DgSpace& space, double diffusivity, double sigma) {
  if (space.components() != 1) throw std::invalid_argument("scalar SIPG needs a scalar space");
  if (!(sigma > 0.0)) throw std::invalid_argument("penalty must be positive");
  return detail::assemble_sipg(space, {.diffusivity = diffusivity, .sigma = sigma});
}

/// nu * a_u on the velocity space; edge terms over all edges (weak u = 0).
inline CsrMatrix assemble_sipg_vector(const DgSpace& space, double nu, double sigma) {
  if (space.components() != 2) throw std::invalid_argument("vector SIPG needs a 2-component space");
  if (!(sigma > 0.0)) throw std::invalid_argument("penalty must be positive");
  return detail::assemble_sipg(space, {.diffusivity = nu, .sigma = sigma, .boundary_edges = true});
}

/// Gram matrix of the mesh-dependent energy norm:
///   sum_E ||grad v||^2 + sum_e sigma/h_e ||[v]||^2.
inline CsrMatrix assemble_energy_gram(const DgSpace& space, double sigma, bool boundary_edges) {
  return detail::assemble_sipg(space, {.sigma = sigma, .boundary_edges = boundary_edges, .consistency = false});
}

enum class DivForm {
  divergence,  // sum_E int q div v - sum_{all edges} int {q} n.[v]
  gradient     // -sum_E int v.grad q + sum_{interior edges} int {v}.n [q]
};

/// B with d(v, q) = q^T B v (rows: pressure DOFs, cols: velocity DOFs).
inline CsrMatrix assemble_div(const DgSpace& vspace, const DgSpace& pspace, DivForm form = DivForm::divergence) {
  if (vspace.components() != 2 || pspace.components() != 1)
    throw std::invalid_argument("divergence form needs a vector velocity space and a scalar pressure space");
  require_shared_rules(vspace, pspace);
  BlockAssembler asmb(pspace, vspace);
  const auto np = static_cast<std::size_t>(pspace.dofs_per_element());
  const auto nv = static_cast<std::size_t>(vspace.dofs_per_element());
  std::array<std::vector<double>, 2> local{std::vector<double>(np * nv), std::vector<double>(np * nv)};
  std::vector<Point2> gv(nv), gp(np);
  const auto& rule = vspace.volume_rule();

  for (int e = 0; e < vspace.element_count(); ++e) {
    for (auto& l : local) std::fill(l.begin(), l.end(), 0.0);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double jw = vspace.quad_weight(e, q);
      const auto pv = vspace.ref_values(q);
      const auto pq = pspace.ref_values(q);
      vspace.physical_grads(e, q, gv);
      pspace.physical_grads(e, q, gp);
      for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < nv; ++j) {
          if (form == DivForm::divergence) {
            local[0][i * nv + j] += jw * pq[i] * gv[j].x;
            local[1][i * nv + j] += jw * pq[i] * gv[j].y;
          } else {
            local[0][i * nv + j] -= jw * pv[j] * gp[i].x;
            local[1][i * nv + j] -= jw * pv[j] * gp[i].y;
          }
        }
    }
    asmb.add(0, e, 0, e, local[0]);
    asmb.add(0, e, 1, e, local[1]);
  }

  auto do_edge = [&](const EdgeTrace& tv, const EdgeTrace& tp) {
    const int sides = tv.side_count();
    const std::array<double, 2> avg = tv.boundary ? std::array{1.0, 0.0} : std::array{0.5, 0.5};
    const std::array<double, 2> jump = {1.0, -1.0};
    for (int b = 0; b < sides; ++b) {    // pressure side
      for (int a = 0; a < sides; ++a) {  // velocity side
        const auto& sv = tv.sides[static_cast<std::size_t>(a)];
        const auto& sp = tp.sides[static_cast<std::size_t>(b)];
        for (auto& l : local) std::fill(l.begin(), l.end(), 0.0);
        for (std::size_t q = 0; q < tv.weights.size(); ++q) {
          for (std::size_t i = 0; i < np; ++i)
            for (std::size_t j = 0; j < nv; ++j) {
              const double qv = sp.values[q * np + i], vv = sv.values[q * nv + j];
              const double s = form == DivForm::divergence ? -avg[b] * qv * jump[a] * vv : avg[a] * vv * jump[b] * qv;
              local[0][i * nv + j] += tv.weights[q] * s * tv.normal.x;
              local[1][i * nv + j] += tv.weights[q] * s * tv.normal.y;
            }
        }
        asmb.add(0, sp.element, 0, sv.element, local[0]);
        asmb.add(0, sp.element, 1, sv.element, local[1]);
      }
    }
  };
  for (std::size_t k = 0; k < vspace.interior_traces().size(); ++k)
    do_edge(vspace.interior_traces()[k], pspace.interior_traces()[k]);
  if (form == DivForm::divergence)
    for (std::size_t k = 0; k < vspace.boundary_traces().size(); ++k)
      do_edge(vspace.boundary_traces()[k], pspace.boundary_traces()[k]);
  return asmb.finish();
}

/// N(u) with b1(u, psi, phi) = phi^T N psi on a scalar space.
inline CsrMatrix assemble_convection_b1(const DgSpace& vspace, const FieldCoeffs& u, const DgSpace& space) {
  if (space.components() != 1) throw std::invalid_argument("b1 acts on a scalar space");
  return detail::assemble_convection(vspace, u, space);
}

/// N(u) with b2(u, w, phi) = phi^T N w on the velocity space itself.
inline CsrMatrix assemble_convection_b2(const DgSpace& vspace, const FieldCoeffs& u) {
  return detail::assemble_convection(vspace, u, vspace);
}

/// G(w) with g(w, psi, chi) = chi^T G psi; interior edges, composite averages {w grad psi}, no penalty.
inline CsrMatrix assemble_chemotaxis_g(const DgSpace& weight_space, const FieldCoeffs& weight, const DgSpace& space) {
  if (space.components() != 1 || weight_space.components() != 1)
    throw std::invalid_argument("chemotaxis form acts on scalar spaces");
  return detail::assemble_sipg(space, {.weight_space = &weight_space, .weight = &weight});
}

/// Block-diagonal L2 mass matrix; each block is det(J) * I for the orthonormal basis.
inline CsrMatrix assemble_mass(const DgSpace& space) {
  std::vector<double> d(static_cast<std::size_t>(space.total_dofs()));
  const int n = space.dofs_per_element();
  for (int c = 0; c < space.components(); ++c)
    for (int e = 0; e < space.element_count(); ++e)
      for (int i = 0; i < n; ++i)
        d[static_cast<std::size_t>(space.dof(c, e, i))] = space.mesh().element_geometry(e).map.det;
  // the quadrature-free form is exact because the reference mass matrix is the identity
  return CsrMatrix::diagonal(d);
}

/// (w psi, phi) for a scalar weight field, component-diagonal on `space`.
inline CsrMatrix assemble_weighted_mass(const DgSpace& weight_space, const FieldCoeffs& w, const DgSpace& space) {
  require_shared_rules(weight_space, space);
  check_field(weight_space, w);
  BlockAssembler asmb(space, space, true);
  const auto nn = static_cast<std::size_t>(space.dofs_per_element());
  std::vector<double> local(nn * nn);
  for (int e = 0; e < space.element_count(); ++e) {
    std::fill(local.begin(), local.end(), 0.0);
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) {
      const double jw = space.quad_weight(e, q) * field_at_qp(weight_space, w, e, q);
      const auto phi = space.ref_values(q);
      for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j) local[i * nn + j] += jw * phi[i] * phi[j];
    }
    for (int c = 0; c < space.components(); ++c) asmb.add(c, e, c, e, local);
  }
  return asmb.finish();
}

/// (f, phi) for a scalar function.
inline std::vector<double> assemble_load(const ScalarFn& f, const DgSpace& space) {
  if (space.components() != 1) throw std::invalid_argument("scalar load needs a scalar space");
  std::vector<double> b(static_cast<std::size_t>(space.total_dofs()), 0.0);
  const int n = space.dofs_per_element();
  for (int e = 0; e < space.element_count(); ++e)
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) {
      const double fw = space.quad_weight(e, q) * f(space.quad_point(e, q));
      const auto phi = space.ref_values(q);
      for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(space.dof(0, e, i))] += fw * phi[static_cast<std::size_t>(i)];
    }
  return b;
}

/// (f, v) for a vector function.
inline std::vector<double> assemble_load(const VectorFn& f, const DgSpace& space) {
  if (space.components() != 2) throw std::invalid_argument("vector load needs a 2-component space");
  std::vector<double> b(static_cast<std::size_t>(space.total_dofs()), 0.0);
  const int n = space.dofs_per_element();
  for (int e = 0; e < space.element_count(); ++e)
    for (std::size_t q = 0; q < space.volume_rule().size(); ++q) {
      const double jw = space.quad_weight(e, q);
      const Point2 v = f(space.quad_point(e, q));
      const auto phi = space.ref_values(q);
      for (int i = 0; i < n; ++i) {
        b[static_cast<std::size_t>(space.dof(0, e, i))] += jw * v.x * phi[static_cast<std::size_t>(i)];
        b[static_cast<std::size_t>(space.dof(1, e, i))] += jw * v.y * phi[static_cast<std::size_t>(i)];
      }
    }
  return b;
}

/// (rho grad Phi, v) for a discrete scalar density.
inline std::vector<double> assemble_buoyancy(const DgSpace& rho_space, const FieldCoeffs& rho, const VectorFn& grad_phi,
                                             const DgSpace& vspace) {
  require_shared_rules(rho_space, vspace);
  check_field(rho_space, rho);
  if (vspace.components() != 2) throw std::invalid_argument("buoyancy needs the velocity space");
  std::vector<double> b(static_cast<std::size_t>(vspace.total_dofs()), 0.0);
  const int n = vspace.dofs_per_element();
  for (int e = 0; e < vspace.element_count(); ++e)
    for (std::size_t q = 0; q < vspace.volume_rule().size(); ++q) {
      const double jw = vspace.quad_weight(e, q) * field_at_qp(rho_space, rho, e, q);
      const Point2 g = grad_phi(vspace.quad_point(e, q));
      const auto phi = vspace.ref_values(q);
      for (int i = 0; i < n; ++i) {
        b[static_cast<std::size_t>(vspace.dof(0, e, i))] += jw * g.x * phi[static_cast<std::size_t>(i)];
        b[static_cast<std::size_t>(vspace.dof(1, e, i))] += jw * g.y * phi[static_cast<std::size_t>(i)];
      }
    }
  return b;
}

/// Right-hand side of nu * a_u for a weak Dirichlet trace u = g on the boundary:
///   sum_{boundary} nu * ( -int (grad v n).g + sigma/h_e int g.v ).
inline std::vector<double> assemble_dirichlet_lift(const VectorFn& g, const DgSpace& vspace, double nu, double sigma) {
  std::vector<double> b(static_cast<std::size_t>(vspace.total_dofs()), 0.0);
  const auto n = static_cast<std::size_t>(vspace.dofs_per_element());
  for (const auto& t : vspace.boundary_traces()) {
    const auto& s = t.sides[0];
    for (std::size_t q = 0; q < t.weights.size(); ++q) {
      const Point2 gv = g(t.points[q]);
      for (std::size_t i = 0; i < n; ++i) {
        const double dphi = dot(s.grads[q * n + i], t.normal);
        const double coef = nu * t.weights[q] * (-dphi + sigma / t.length * s.values[q * n + i]);
        b[static_cast<std::size_t>(vspace.dof(0, s.element, static_cast<int>(i)))] += coef * gv.x;
        b[static_cast<std::size_t>(vspace.dof(1, s.element, static_cast<int>(i)))] += coef * gv.y;
      }
    }
  }
  return b;
}

/// Continuity right-hand side for a weak Dirichlet trace: -sum_{boundary} int q (g.n).
inline std::vector<double> assemble_dirichlet_flux(const VectorFn& g, const DgSpace& pspace) {
  std::vector<double> b(static_cast<std::size_t>(pspace.total_dofs()), 0.0);
  const auto n = static_cast<std::size_t>(pspace.dofs_per_element());
  for (const auto& t : pspace.boundary_traces()) {
    const auto& s = t.sides[0];
    for (std::size_t q = 0; q < t.weights.size(); ++q) {
      const double gn = dot(g(t.points[q]), t.normal);
      for (std::size_t i = 0; i < n; ++i)
        b[static_cast<std::size_t>(pspace.dof(0, s.element, static_cast<int>(i)))] -= t.weights[q] * gn * s.values[q * n + i];
    }
  }
  return b;
}

}  // namespace chemodg

#endif  // CHEMODG_FORMS_HPP
