#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"

using namespace chemodg;

namespace {

std::shared_ptr<const Mesh2D> unit_mesh(int n) { return std::make_shared<const Mesh2D>(build_rect_mesh(n, n)); }

double bilinear(const CsrMatrix& a, const FieldCoeffs& trial, const FieldCoeffs& test) {
  const auto y = a * trial.values;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += test.values[i] * y[i];
  return s;
}

/// Roundoff scale of a bilinear evaluation: sum_ij |A_ij| |test_i| |trial_j|.
double roundoff_scale(const CsrMatrix& a, const FieldCoeffs& trial, const FieldCoeffs& test) {
  double s = 0.0;
  for (int r = 0; r < a.rows(); ++r)
    for (int k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k)
      s += std::abs(a.values()[k] * test.values[r] * trial.values[a.col_idx()[k]]);
  return s;
}

/// Matrix form against the oracle, relative to the roundoff scale of the sum.
template <class Oracle>
void expect_pair(const CsrMatrix& a, const FieldCoeffs& trial, const FieldCoeffs& test, Oracle&& value) {
  EXPECT_NEAR(bilinear(a, trial, test), value(), 1e-13 * roundoff_scale(a, trial, test));
}

/// Compares every entry A_ij with the oracle value form(e_j, e_i).
template <class Form>
void expect_entrywise(const CsrMatrix& a, const DgSpace& rows, const DgSpace& cols, Form&& form, double tol) {
  ASSERT_EQ(a.rows(), rows.total_dofs());
  ASSERT_EQ(a.cols(), cols.total_dofs());
  for (int j = 0; j < cols.total_dofs(); ++j) {
    const auto trial = oracle::unit_field(cols, j);
    for (int i = 0; i < rows.total_dofs(); ++i)
      EXPECT_NEAR(a.at(i, j), form(trial, oracle::unit_field(rows, i)), tol) << "entry (" << i << ", " << j << ")";
  }
}

struct Spaces {
  std::shared_ptr<const Mesh2D> mesh;
  DgSpace x, v, p;
  Spaces(std::shared_ptr<const Mesh2D> m, int k) : mesh(m), x(m, k), v(m, k, 2, x.volume_rule().exactness), p(m, k - 1, 1, x.volume_rule().exactness) {}
};

}  // namespace

// ---------------------------------------------------------------------------
// brute-force oracle agreement on eight-element meshes

TEST(FormsOracle, ScalarSipgEntrywise) {
  for (int k = 1; k <= 2; ++k) {
    Spaces s(oracle::skewed_mesh(), k);
    const double sigma = 10.0 * k * k;
    const auto a = assemble_sipg_scalar(s.x, 1.7, sigma);
    expect_entrywise(a, s.x, s.x, [&](const auto& psi, const auto& phi) { return 1.7 * oracle::sipg(s.x, psi, phi, sigma, false); }, 1e-11);
  }
}

TEST(FormsOracle, VectorSipgEntrywise) {
  Spaces s(oracle::skewed_mesh(), 1);
  const auto a = assemble_sipg_vector(s.v, 0.8, 10.0);
  expect_entrywise(a, s.v, s.v, [&](const auto& psi, const auto& phi) { return 0.8 * oracle::sipg(s.v, psi, phi, 10.0, true); }, 1e-11);
}

TEST(FormsOracle, ConvectionB1AndB2Entrywise) {
  std::mt19937 rng(5);
  Spaces s(oracle::skewed_mesh(), 1);
  const auto u = oracle::random_field(s.v, rng);
  expect_entrywise(assemble_convection_b1(s.v, u, s.x), s.x, s.x,
                   [&](const auto& psi, const auto& phi) { return oracle::convection(s.v, u, s.x, psi, phi); }, 1e-11);
  expect_entrywise(assemble_convection_b2(s.v, u), s.v, s.v,
                   [&](const auto& psi, const auto& phi) { return oracle::convection(s.v, u, s.v, psi, phi); }, 1e-11);
}

TEST(FormsOracle, ChemotaxisEntrywise) {
  std::mt19937 rng(9);
  Spaces s(oracle::skewed_mesh(), 1);
  const auto w = oracle::random_field(s.x, rng);
  expect_entrywise(assemble_chemotaxis_g(s.x, w, s.x), s.x, s.x,
                   [&](const auto& psi, const auto& phi) { return oracle::sipg(s.x, psi, phi, 0.0, false, &s.x, &w); },
                   1e-11);
}

TEST(FormsOracle, DivergenceEntrywise) {
  for (int k = 1; k <= 2; ++k) {
    Spaces s(oracle::skewed_mesh(), k);
    expect_entrywise(assemble_div(s.v, s.p), s.p, s.v,
                     [&](const auto& v, const auto& q) { return oracle::div_form(s.v, v, s.p, q); }, 1e-11);
  }
}

TEST(FormsOracle, WeightedMassEntrywise) {
  std::mt19937 rng(13);
  Spaces s(oracle::skewed_mesh(), 2);
  const auto w = oracle::random_field(s.x, rng);
  expect_entrywise(assemble_weighted_mass(s.x, w, s.x), s.x, s.x,
                   [&](const auto& psi, const auto& phi) { return oracle::mass(s.x, psi, phi, &s.x, &w); }, 1e-11);
  expect_entrywise(assemble_mass(s.v), s.v, s.v,
                   [&](const auto& psi, const auto& phi) { return oracle::mass(s.v, psi, phi); }, 1e-11);
}

TEST(FormsOracle, RandomPairsAtHigherDegree) {
  std::mt19937 rng(21);
  for (int k = 2; k <= 3; ++k) {
    Spaces s(oracle::skewed_mesh(), k);
    const double sigma = 10.0 * k * k;
    const auto u = oracle::random_field(s.v, rng);
    const auto w = oracle::random_field(s.x, rng);
    for (int t = 0; t < 3; ++t) {
      const auto a = oracle::random_field(s.x, rng), b = oracle::random_field(s.x, rng);
      const auto va = oracle::random_field(s.v, rng), vb = oracle::random_field(s.v, rng);
      const auto q = oracle::random_field(s.p, rng);
      expect_pair(assemble_sipg_scalar(s.x, 1.0, sigma), a, b, [&] { return oracle::sipg(s.x, a, b, sigma, false); });
      expect_pair(assemble_sipg_vector(s.v, 1.0, sigma), va, vb, [&] { return oracle::sipg(s.v, va, vb, sigma, true); });
      expect_pair(assemble_convection_b1(s.v, u, s.x), a, b, [&] { return oracle::convection(s.v, u, s.x, a, b); });
      expect_pair(assemble_convection_b2(s.v, u), va, vb, [&] { return oracle::convection(s.v, u, s.v, va, vb); });
      expect_pair(assemble_chemotaxis_g(s.x, w, s.x), a, b, [&] { return oracle::sipg(s.x, a, b, 0.0, false, &s.x, &w); });
      expect_pair(assemble_div(s.v, s.p), va, q, [&] { return oracle::div_form(s.v, va, s.p, q); });
    }
  }
}

TEST(FormsOracle, LoadAndBuoyancyVectors) {
  Spaces s(oracle::skewed_mesh(), 2);
  const ScalarFn f = [](Point2 p) { return 1.0 + p.x * p.y - p.y * p.y; };  // polynomial: exact with both rules
  const auto b = assemble_load(f, s.x);
  for (int i = 0; i < s.x.total_dofs(); i += 3) {
    const auto chi = oracle::unit_field(s.x, i);
    EXPECT_NEAR(b[static_cast<std::size_t>(i)],
                oracle::volume_sum(*s.mesh, [&](int e, Point2 x) { return f(x) * oracle::at(s.x, chi, e, x).value; }), 1e-12);
  }
  for (double v : assemble_load([](Point2) { return 0.0; }, s.x)) EXPECT_EQ(v, 0.0);

  const auto one = l2_project([](Point2) { return 1.0; }, s.x);
  const auto buoy = assemble_buoyancy(s.x, one, [](Point2) { return Point2{0.0, -1000.0}; }, s.v);
  const auto ones = assemble_load([](Point2) { return 1.0; }, s.x);
  const int n = s.x.total_dofs();
  for (int i = 0; i < n; ++i) {
    EXPECT_NEAR(buoy[static_cast<std::size_t>(i)], 0.0, 1e-12);
    EXPECT_NEAR(buoy[static_cast<std::size_t>(n + i)], -1000.0 * ones[static_cast<std::size_t>(i)], 1e-12);
  }
}

// ---------------------------------------------------------------------------
// structural properties

TEST(Forms, DiffusionMatricesAreSymmetric) {
  for (int k = 1; k <= 3; ++k) {
    Spaces s(unit_mesh(5), k);
    EXPECT_LE(oracle::sym_defect(assemble_sipg_scalar(s.x, 1.0, 10.0 * k * k)), 1e-12);
    EXPECT_LE(oracle::sym_defect(assemble_sipg_vector(s.v, 1.0, 10.0 * k * k)), 1e-12);
    std::mt19937 rng(k);
    EXPECT_LE(oracle::sym_defect(assemble_chemotaxis_g(s.x, oracle::random_field(s.x, rng), s.x)), 1e-12);
  }
}

TEST(Forms, ConvectionMatricesAreSkewSymmetric) {
  std::mt19937 rng(17);
  for (int k = 1; k <= 3; ++k) {
    Spaces s(unit_mesh(5), k);
    const auto u = oracle::random_field(s.v, rng);
    const auto n1 = assemble_convection_b1(s.v, u, s.x);
    const auto n2 = assemble_convection_b2(s.v, u);
    EXPECT_LE(oracle::skew_defect(n1, n1.max_abs()), 1e-12);
    EXPECT_LE(oracle::skew_defect(n2, n2.max_abs()), 1e-12);
    const auto psi = oracle::random_field(s.x, rng);
    const auto w = oracle::random_field(s.v, rng);
    EXPECT_NEAR(bilinear(n1, psi, psi), 0.0, 1e-12 * n1.max_abs() * psi.values.size());
    EXPECT_NEAR(bilinear(n2, w, w), 0.0, 1e-12 * n2.max_abs() * w.values.size());
  }
}

TEST(Forms, ZeroInputsGiveZeroMatrices) {
  Spaces s(unit_mesh(3), 2);
  EXPECT_EQ(assemble_convection_b1(s.v, s.v.zero_field(), s.x).max_abs(), 0.0);
  EXPECT_EQ(assemble_convection_b2(s.v, s.v.zero_field()).max_abs(), 0.0);
  EXPECT_EQ(assemble_chemotaxis_g(s.x, s.x.zero_field(), s.x).max_abs(), 0.0);
}

TEST(Forms, ConstantsAreInTheScalarKernelOnly) {
  for (int k = 1; k <= 3; ++k) {
    Spaces s(unit_mesh(4), k);
    const auto one = l2_project([](Point2) { return 1.0; }, s.x);
    const auto a = assemble_sipg_scalar(s.x, 1.0, 10.0 * k * k);
    EXPECT_NEAR(bilinear(a, one, one), 0.0, 1e-13 * roundoff_scale(a, one, one));
    EXPECT_LE(norm_inf(a * one.values), 1e-14 * a.max_abs() * a.cols());
    std::mt19937 rng(k);
    const auto g = assemble_chemotaxis_g(s.x, oracle::random_field(s.x, rng), s.x);
    EXPECT_LE(norm_inf(g * one.values), 1e-14 * g.max_abs() * g.cols());

    const auto c = l2_project([](Point2) { return Point2{0.3, -1.0}; }, s.v);
    EXPECT_GT(bilinear(assemble_sipg_vector(s.v, 1.0, 10.0 * k * k), c, c), 1.0);
  }
}

TEST(Forms, ChemotaxisWithConstantWeightScalesTheUnpenalisedForm) {
  Spaces s(unit_mesh(4), 2);
  const double m0 = 2.5;
  const auto w = l2_project([m0](Point2) { return m0; }, s.x);
  const auto g = assemble_chemotaxis_g(s.x, w, s.x);
  const auto a = detail::assemble_sipg(s.x, {.sigma = 0.0});
  EXPECT_LE(max_abs_difference(g, CsrMatrix(a).scale(m0)), 1e-11);
}

TEST(Forms, MassBlocksAreScaledIdentity) {
  Spaces s(unit_mesh(4), 2);
  const auto m = assemble_mass(s.v);
  const double det = 2.0 * (1.0 / 32.0);
  for (int i = 0; i < m.rows(); ++i) {
    EXPECT_NEAR(m.at(i, i), det, 1e-15);
    EXPECT_EQ(m.row_ptr()[i + 1] - m.row_ptr()[i], 1);
  }
}

TEST(Forms, DivergenceFormsAgree) {
  for (int k = 1; k <= 3; ++k) {
    Spaces s(oracle::skewed_mesh(), k);
    const auto b1 = assemble_div(s.v, s.p, DivForm::divergence);
    const auto b2 = assemble_div(s.v, s.p, DivForm::gradient);
    EXPECT_LE(max_abs_difference(b1, b2), 1e-12);
    std::mt19937 rng(k);
    const auto v = oracle::random_field(s.v, rng);
    const auto q = oracle::random_field(s.p, rng);
    EXPECT_NEAR(oracle::div_form(s.v, v, s.p, q), oracle::div_form_gradient(s.v, v, s.p, q), 1e-11);
  }
}

TEST(Forms, DivergenceOfConstantVelocityIsBoundaryFlux) {
  // integration by parts: d((1,0), q) = -int_boundary q n_x, zero for constant q
  std::mt19937 rng(2);
  Spaces s(unit_mesh(3), 2);
  const auto v = l2_project([](Point2) { return Point2{1.0, 0.0}; }, s.v);
  const auto b = assemble_div(s.v, s.p);
  const auto q = oracle::random_field(s.p, rng);
  double flux = 0.0;
  for (const auto& e : s.mesh->boundary_edges())
    for (std::size_t i = 0; i < oracle::edge_rule().size(); ++i) {
      const Point2 x = e.endpoints[0] + oracle::edge_rule().points[i].x * (e.endpoints[1] - e.endpoints[0]);
      flux += oracle::edge_rule().weights[i] * e.length * oracle::at(s.p, q, e.element, x).value * e.normal.x;
    }
  EXPECT_NEAR(bilinear(b, v, q), -flux, 1e-12);
  const auto qc = l2_project([](Point2) { return 1.0; }, s.p);
  EXPECT_NEAR(bilinear(b, v, qc), 0.0, 1e-12);
}

TEST(Forms, DivergenceOfSolenoidalFieldAgainstConstant) {
  Spaces s(unit_mesh(4), 1);
  const auto v = l2_project([](Point2 p) { return Point2{p.x, -p.y}; }, s.v);
  const auto q = l2_project([](Point2) { return 0.7; }, s.p);
  EXPECT_NEAR(bilinear(assemble_div(s.v, s.p), v, q), 0.0, 1e-12);
}

TEST(Forms, CoercivitySweepWithStandardPenalty) {
  // min over random mean-zero chi of a(chi, chi) / ||chi||^2 with the interior-edge energy norm
  for (int k = 1; k <= 3; ++k) {
    Spaces s(unit_mesh(6), k);
    const double sigma = 10.0 * k * k;
    const auto a = assemble_sipg_scalar(s.x, 1.0, sigma);
    const auto gram = assemble_energy_gram(s.x, sigma, false);
    const auto w = integral_functional(s.x);
    std::mt19937 rng(100 + k);
    double worst = 1e300;
    for (int t = 0; t < 100; ++t) {
      auto chi = oracle::random_field(s.x, rng);
      chi.values = detail::project_out(chi.values, w);
      worst = std::min(worst, bilinear(a, chi, chi) / bilinear(gram, chi, chi));
    }
    RecordProperty("coercivity_k" + std::to_string(k), std::to_string(worst));
    EXPECT_GE(worst, 0.1) << "k=" << k;
  }
}

namespace {

/// Discrete inf-sup constant: sqrt of the smallest nonzero eigenvalue of
/// B A^{-1} B^T q = lambda Mp q, with A the velocity energy Gram matrix.
double inf_sup(int n, int k) {
  Spaces s(unit_mesh(n), k);
  const double sigma = 10.0 * k * k;
  auto dense = [](const CsrMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (const auto& t : m.triplets()) d(t.row, t.col) += t.value;
    return d;
  };
  const Eigen::MatrixXd a = dense(assemble_energy_gram(s.v, sigma, true));
  const Eigen::MatrixXd b = dense(assemble_div(s.v, s.p));
  const Eigen::MatrixXd mp = dense(assemble_mass(s.p));
  const Eigen::MatrixXd schur = b * a.llt().solve(b.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(schur, mp);
  const auto& ev = es.eigenvalues();
  // the first eigenvalue belongs to the constant pressure mode
  EXPECT_LE(std::abs(ev(0)), 1e-10 * ev(ev.size() - 1));
  return std::sqrt(ev(1));
}

}  // namespace

TEST(Forms, InfSupConstantIsBoundedAndStable) {
  const double b2 = inf_sup(2, 1), b4 = inf_sup(4, 1), b8 = inf_sup(8, 1);
  RecordProperty("inf_sup_k1", std::to_string(b2) + " " + std::to_string(b4) + " " + std::to_string(b8));
  EXPECT_GT(b8, 0.05);
  EXPECT_NEAR(b4 / b2, 1.0, 0.2);
  EXPECT_NEAR(b8 / b4, 1.0, 0.2);
  const double c4 = inf_sup(4, 2), c8 = inf_sup(8, 2);
  EXPECT_GT(c8, 0.05);
  EXPECT_NEAR(c8 / c4, 1.0, 0.2);
}

TEST(Forms, VectorPoissonConvergesAtOptimalRate) {
  const double nu = 0.5, pi = std::numbers::pi;
  const VectorFn exact = [pi](Point2 p) {
    const double v = std::sin(pi * p.x) * std::sin(pi * p.y);
    return Point2{v, v};
  };
  const VectorFn f = [&](Point2 p) { return (2.0 * nu * pi * pi) * exact(p); };
  for (int k = 1; k <= 2; ++k) {
    std::vector<double> err;
    for (int n : {4, 8, 16}) {
      const DgSpace v(unit_mesh(n), k, 2);
      const auto a = assemble_sipg_vector(v, nu, 10.0 * k * k);
      FieldCoeffs u{solve_direct(a, assemble_load(f, v)), {}};
      err.push_back(error_l2(v, u, exact));
    }
    EXPECT_NEAR(std::log2(err[1] / err[2]), k + 1.0, 0.2) << "k=" << k;
  }
}

TEST(Forms, MismatchedSpacesAreRejected) {
  Spaces a(unit_mesh(2), 1), b(unit_mesh(2), 1);
  EXPECT_THROW(assemble_div(a.v, b.p), std::invalid_argument);
  EXPECT_THROW(assemble_sipg_scalar(a.v, 1.0, 10.0), std::invalid_argument);
  EXPECT_THROW(assemble_sipg_scalar(a.x, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(assemble_convection_b1(a.v, a.v.zero_field(), a.v), std::invalid_argument);
}

TEST(Forms, PenaltyAndParameterValidation) {
  EXPECT_NO_THROW(PenaltyConfig::standard(2).validate());
  EXPECT_DOUBLE_EQ(PenaltyConfig::standard(2).sigma_u, 40.0);
  EXPECT_THROW(PenaltyConfig::uniform(0.0).validate(), std::invalid_argument);
  PhysParams p;
  p.mu = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Forms, AssemblyIsDeterministic) {
  std::mt19937 rng(4);
  Spaces s(unit_mesh(4), 2);
  const auto u = oracle::random_field(s.v, rng);
  const auto a = assemble_convection_b2(s.v, u), b = assemble_convection_b2(s.v, u);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.col_idx(), b.col_idx());
}
