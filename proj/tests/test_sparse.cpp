#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>
#include <sstream>

#include "oracle.hpp"

using namespace chemodg;

namespace {

std::shared_ptr<const Mesh2D> unit_mesh(int n) { return std::make_shared<const Mesh2D>(build_rect_mesh(n, n)); }

Eigen::MatrixXd dense(const CsrMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (const auto& t : m.triplets()) d(t.row, t.col) += t.value;
  return d;
}

CsrMatrix random_sparse(int n, double density, std::mt19937& rng, double diag_shift) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pick(0.0, 1.0);
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, diag_shift + u(rng)});
    for (int j = 0; j < n; ++j)
      if (j != i && pick(rng) < density) t.push_back({i, j, u(rng)});
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

std::vector<double> random_vector(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Unpreconditioned SIPG heat step matrix: symmetric positive definite.
CsrMatrix heat_matrix(const DgSpace& s, double dt) {
  auto a = assemble_sipg_scalar(s, 1.0, 10.0 * s.degree() * s.degree());
  return a.add_scaled(1.0 / dt, assemble_mass(s));
}

}  // namespace

// ---------------------------------------------------------------------------
// CSR

TEST(Csr, TripletsAreSortedAndDuplicatesSummed) {
  const auto a = CsrMatrix::from_triplets(3, 4, {{2, 1, 1.0}, {0, 3, 2.0}, {2, 1, 0.5}, {0, 0, -1.0}});
  EXPECT_EQ(a.nnz(), 3u);
  EXPECT_EQ(a.at(2, 1), 1.5);
  EXPECT_EQ(a.at(0, 3), 2.0);
  EXPECT_EQ(a.at(1, 1), 0.0);
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::out_of_range);
  EXPECT_THROW(CsrMatrix(2, 2, {0, 1}, {0}, {1.0}), std::invalid_argument);
}

TEST(Csr, MatvecTransposeAndSumsMatchDense) {
  std::mt19937 rng(1);
  const auto a = random_sparse(40, 0.1, rng, 0.0);
  const auto b = random_sparse(40, 0.1, rng, 0.0);
  const auto x = random_vector(40, rng);
  const Eigen::VectorXd xd = Eigen::Map<const Eigen::VectorXd>(x.data(), 40);
  const Eigen::VectorXd y = dense(a) * xd;
  const auto ys = a * x;
  for (int i = 0; i < 40; ++i) EXPECT_NEAR(ys[static_cast<std::size_t>(i)], y(i), 1e-13);
  EXPECT_LE((dense(a.transposed()) - dense(a).transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((dense(a + b) - dense(a) - dense(b)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((dense(a - b) - dense(a) + dense(b)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(a.norm_inf(), dense(a).cwiseAbs().rowwise().sum().maxCoeff(), 1e-14);
  std::vector<double> short_x(39), y40(40);
  EXPECT_THROW(a.multiply(short_x, y40), std::invalid_argument);
}

TEST(Csr, IdentityAndDiagonal) {
  const auto i = CsrMatrix::identity(5);
  const std::vector<double> d{1, 2, 3, 4, 5};
  EXPECT_EQ(i * d, d);
  const auto m = CsrMatrix::diagonal(d);
  EXPECT_EQ(m.at(3, 3), 4.0);
  EXPECT_TRUE(m.same_pattern(i));
}

TEST(Csr, MatrixMarketRoundTrip) {
  std::mt19937 rng(2);
  const auto a = random_sparse(25, 0.2, rng, 3.0);
  std::stringstream ss;
  write_matrix_market(ss, a);
  const auto b = read_matrix_market(ss);
  EXPECT_TRUE(a.same_pattern(b));
  EXPECT_EQ(a.values(), b.values());

  std::istringstream sym("%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 4\n2 1 -1\n");
  const auto s = read_matrix_market(sym);
  EXPECT_EQ(s.at(0, 1), -1.0);
  EXPECT_EQ(s.at(1, 0), -1.0);
  std::istringstream bad("not a banner\n");
  EXPECT_THROW(read_matrix_market(bad), std::runtime_error);
}

// ---------------------------------------------------------------------------
// direct solve

TEST(Direct, SmallSystemsAgainstDenseOracle) {
  const std::vector<double> b{1.0, -2.0};
  const auto id = solve_direct(CsrMatrix::identity(2), b);
  EXPECT_EQ(id, b);
  const auto a = CsrMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 3.0}});
  const auto x = solve_direct(a, b);
  EXPECT_NEAR(x[0], 1.0, 1e-15);  // 2x + y = 1, x + 3y = -2
  EXPECT_NEAR(x[1], -1.0, 1e-15);
}

TEST(Direct, RandomSystemAgainstDenseOracle) {
  std::mt19937 rng(3);
  const auto a = random_sparse(50, 0.1, rng, 0.0);
  const auto b = random_vector(50, rng);
  const Eigen::VectorXd ref = dense(a).partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), 50));
  const auto x = solve_direct(a, b);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(x[static_cast<std::size_t>(i)], ref(i), 1e-9 * (1.0 + std::abs(ref(i))));
  const DirectSolver solver(a);
  EXPECT_LE(solver.relative_residual(x, b), 1e-13);
}

TEST(Direct, SingularMatrixIsReported) {
  const auto a = CsrMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 0, 1.0}});  // zero column 2
  EXPECT_THROW(solve_direct(a, std::vector<double>{1, 1, 1}), SingularMatrixError);
  EXPECT_THROW(DirectSolver(CsrMatrix::from_triplets(2, 3, {})), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// GMRES

TEST(Gmres, DiagonalAndIdentity) {
  const std::vector<double> d{1.0, 2.0, 4.0, 8.0};
  const std::vector<double> b{1.0, 1.0, 1.0, 1.0};
  const auto r = solve_gmres(CsrMatrix::diagonal(d), b, PreconditionerKind::none, 1e-12, 100);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(r.x[i], 1.0 / d[i], 1e-12);
  EXPECT_LE(r.iterations, 4);
  const auto ri = solve_gmres(CsrMatrix::identity(10), std::vector<double>(10, 3.0), PreconditionerKind::none, 1e-12, 5);
  EXPECT_EQ(ri.iterations, 1);
  const auto zero = solve_gmres(CsrMatrix::identity(3), std::vector<double>(3, 0.0), PreconditionerKind::none, 1e-12, 5);
  EXPECT_EQ(zero.x, std::vector<double>(3, 0.0));
}

TEST(Gmres, AgreesWithDirectOnSipgSystem) {
  const DgSpace s(unit_mesh(8), 2);
  const auto a = heat_matrix(s, 1e-2);
  std::mt19937 rng(4);
  const auto b = random_vector(static_cast<std::size_t>(a.rows()), rng);
  const auto ref = solve_direct(a, b);
  for (auto kind : {PreconditionerKind::ilu0, PreconditionerKind::none}) {
    const auto r = solve_gmres(a, b, kind, 1e-12, 5000);
    EXPECT_LE(r.relative_residual, 1e-12);
    EXPECT_LE(max_diff(r.x, ref), 1e-8 * norm_inf(ref));
  }
}

TEST(Gmres, IterationCapReportsBestIterate) {
  const DgSpace s(unit_mesh(8), 2);
  const auto a = heat_matrix(s, 1.0);
  const std::vector<double> b(static_cast<std::size_t>(a.rows()), 1.0);
  try {
    solve_gmres(a, b, PreconditionerKind::none, 1e-14, 3);
    FAIL() << "expected GmresError";
  } catch (const GmresError& e) {
    EXPECT_EQ(e.kind(), GmresError::Kind::not_converged);
    EXPECT_EQ(e.best().iterations, 3);
    EXPECT_LT(e.best().relative_residual, 1.0);
    EXPECT_EQ(e.best().x.size(), b.size());
  }
  EXPECT_THROW(solve_gmres(a, b, PreconditionerKind::none, 0.0, 3), std::invalid_argument);
}

TEST(Ilu0, IsExactOnTridiagonalMatrices) {
  // a tridiagonal LU has no fill, so ILU(0) is the exact factorisation
  std::vector<Triplet> t;
  const int n = 30;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 4.0 + 0.1 * i});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -2.0});
  }
  const auto a = CsrMatrix::from_triplets(n, n, t);
  std::mt19937 rng(5);
  const auto b = random_vector(n, rng);
  std::vector<double> z(n);
  Ilu0(a).apply(b, z);
  EXPECT_LE(max_diff(z, solve_direct(a, b)), 1e-13);
  EXPECT_THROW(Ilu0(CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}})), SingularMatrixError);
}

// ---------------------------------------------------------------------------
// constrained systems

namespace {

struct StokesSetup {
  Discretization d;
  BlockSystem sys;
  double sigma;
  StokesSetup(int n, int k)
      : d(unit_mesh(n), k),
        sys{assemble_sipg_vector(d.velocity, 1.0, 10.0 * k * k), assemble_div(d.velocity, d.pressure),
            integral_functional(d.pressure)},
        sigma(10.0 * k * k) {}
};

}  // namespace

TEST(Saddle, ReproducesPolynomialStokesSolution) {
  // u = (x^2, -2xy) is solenoidal, p = x - 1/2 has zero mean; -Lap u + grad p = (-1, 0)
  const VectorFn u = [](Point2 p) { return Point2{p.x * p.x, -2.0 * p.x * p.y}; };
  const ScalarFn p = [](Point2 q) { return q.x - 0.5; };
  StokesSetup st(4, 2);
  auto f = assemble_load([](Point2) { return Point2{-1.0, 0.0}; }, st.d.velocity);
  const auto lift = assemble_dirichlet_lift(u, st.d.velocity, 1.0, st.sigma);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += lift[i];
  const auto g = assemble_dirichlet_flux(u, st.d.pressure);
  const auto sol = solve_saddle(st.sys, f, g);
  EXPECT_LE(error_l2(st.d.velocity, FieldCoeffs{sol.velocity, {}}, u), 1e-10);
  EXPECT_LE(error_l2(st.d.pressure, FieldCoeffs{sol.pressure, {}}, p), 1e-10);
}

TEST(Saddle, ResidualsAndPressureMean) {
  StokesSetup st(6, 2);
  std::mt19937 rng(6);
  const auto f = random_vector(static_cast<std::size_t>(st.sys.velocity_size()), rng);
  const auto sol = solve_saddle(st.sys, f);
  auto mom = st.sys.a * sol.velocity;
  const auto btp = st.sys.b.transposed() * sol.pressure;
  for (std::size_t i = 0; i < mom.size(); ++i) mom[i] -= btp[i] + f[i];
  EXPECT_LE(norm_inf(mom), 1e-9 * norm_inf(f));
  EXPECT_LE(norm_inf(st.sys.b * sol.velocity), 1e-9 * norm_inf(f));
  double mean = 0.0;
  for (std::size_t i = 0; i < sol.pressure.size(); ++i) mean += st.sys.pressure_mean[i] * sol.pressure[i];
  EXPECT_NEAR(mean, 0.0, 1e-10);
}

TEST(Saddle, ZeroRightHandSideGivesZero) {
  StokesSetup st(4, 1);
  const auto sol = solve_saddle(st.sys, std::vector<double>(static_cast<std::size_t>(st.sys.velocity_size()), 0.0));
  EXPECT_EQ(norm_inf(sol.velocity), 0.0);
  EXPECT_EQ(norm_inf(sol.pressure), 0.0);
}

TEST(Saddle, ConstantShiftOfPressureEquationsLeavesVelocity) {
  StokesSetup st(5, 2);
  std::mt19937 rng(7);
  const auto f = random_vector(static_cast<std::size_t>(st.sys.velocity_size()), rng);
  auto g = random_vector(static_cast<std::size_t>(st.sys.pressure_size()), rng);
  // make g compatible with the range of B (orthogonal to constant pressures)
  const auto one = l2_project([](Point2) { return 1.0; }, st.d.pressure);
  double g1 = 0.0, w1 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g1 += g[i] * one.values[i];
    w1 += st.sys.pressure_mean[i] * one.values[i];
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= g1 / w1 * st.sys.pressure_mean[i];
  const auto a = solve_saddle(st.sys, f, g);
  auto shifted = g;
  for (std::size_t i = 0; i < g.size(); ++i) shifted[i] += 2.5 * st.sys.pressure_mean[i];
  const auto b = solve_saddle(st.sys, f, shifted);
  EXPECT_LE(max_diff(a.velocity, b.velocity), 1e-10 * (1.0 + norm_inf(a.velocity)));
  EXPECT_NEAR(b.multiplier - a.multiplier, 2.5, 1e-9);
}

TEST(Saddle, RankDeficiencyIsReported) {
  StokesSetup st(3, 1);
  BlockSystem broken{CsrMatrix::from_triplets(st.sys.velocity_size(), st.sys.velocity_size(), {}), st.sys.b,
                     st.sys.pressure_mean};
  EXPECT_THROW(solve_saddle(broken, std::vector<double>(static_cast<std::size_t>(st.sys.velocity_size()), 1.0)),
               SingularMatrixError);
  BlockSystem bad{st.sys.a, st.sys.b, {1.0}};
  EXPECT_THROW(assemble_saddle_matrix(bad), std::invalid_argument);
}

TEST(Saddle, ConstrainedScalarSystemHasMeanZeroSolution) {
  const DgSpace s(unit_mesh(6), 2);
  const auto a = assemble_sipg_scalar(s, 1.0, 40.0);  // singular: constants in the kernel
  const auto w = integral_functional(s);
  std::mt19937 rng(8);
  auto b = random_vector(static_cast<std::size_t>(a.rows()), rng);
  b.push_back(0.0);
  const auto x = solve_direct(assemble_constrained_matrix(a, w), b);
  double mean = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mean += w[i] * x[i];
  EXPECT_NEAR(mean, 0.0, 1e-11);
  EXPECT_THROW(assemble_constrained_matrix(a, std::vector<double>(3)), std::invalid_argument);
}

TEST(Preconditioners, SaddleFactorisationDrivesGmresToDirectSolution) {
  StokesSetup st(8, 2);
  const auto k = assemble_saddle_matrix(st.sys);
  std::mt19937 rng(9);
  const auto f = random_vector(static_cast<std::size_t>(st.sys.velocity_size()), rng);
  const auto rhs = saddle_rhs(st.sys, f, {});
  const auto mp = assemble_mass(st.d.pressure).values();
  std::vector<double> reg(mp.size());
  for (std::size_t i = 0; i < mp.size(); ++i) reg[i] = 1e-8 * mp[i];
  const SaddlePreconditioner pre(st.sys.a, st.sys.b, st.sys.pressure_mean, reg);
  EXPECT_EQ(pre.size(), k.rows());
  const auto r = solve_gmres(k, rhs, [&](std::span<const double> x, std::span<double> z) { pre.apply(x, z); }, 1e-12, 200);
  EXPECT_LE(r.iterations, 20);
  const auto ref = solve_direct(k, rhs);
  EXPECT_LE(max_diff(r.x, ref), 1e-8 * norm_inf(ref));
  EXPECT_THROW(SaddlePreconditioner(st.sys.a, st.sys.b, st.sys.pressure_mean, std::vector<double>(mp.size(), 0.0)),
               std::invalid_argument);
}

TEST(Preconditioners, BorderedFactorisationIsExactForItsOwnMatrix) {
  const DgSpace s(unit_mesh(6), 1);
  const auto a = heat_matrix(s, 0.1);
  const auto w = integral_functional(s);
  const BorderedPreconditioner pre(std::make_shared<const SpdSolver>(a), w);
  std::mt19937 rng(10);
  const auto b = random_vector(static_cast<std::size_t>(a.rows()) + 1, rng);
  std::vector<double> z(b.size());
  pre.apply(b, z);
  EXPECT_LE(max_diff(z, solve_direct(assemble_constrained_matrix(a, w), b)), 1e-10);
  EXPECT_THROW(SpdSolver(CsrMatrix::diagonal(std::vector<double>{1.0, -1.0})), SingularMatrixError);
}
