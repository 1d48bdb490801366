#ifndef CHEMODG_SPARSE_HPP
#define CHEMODG_SPARSE_HPP

// CSR operators, a sparse LU direct solve, restarted GMRES with ILU(0), and
// the mean-constrained saddle-point and scalar wrappers.

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace chemodg {

struct Triplet {
  int row;
  int col;
  double value;
};

class CsrMatrix {
 public:
  CsrMatrix() : row_ptr_(1, 0) {}

  CsrMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx, std::vector<double> values)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
    if (rows_ < 0 || cols_ < 0 || row_ptr_.size() != static_cast<std::size_t>(rows_) + 1 || row_ptr_.front() != 0 ||
        static_cast<std::size_t>(row_ptr_.back()) != col_idx_.size() || col_idx_.size() != values_.size())
      throw std::invalid_argument("inconsistent CSR arrays");
    for (int r = 0; r < rows_; ++r) {
      if (row_ptr_[r + 1] < row_ptr_[r]) throw std::invalid_argument("CSR row offsets not monotone");
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (col_idx_[k] < 0 || col_idx_[k] >= cols_) throw std::invalid_argument("CSR column out of range");
        if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])
          throw std::invalid_argument("CSR columns must be strictly increasing within a row");
      }
    }
  }

  /// Builds a matrix from unordered entries; duplicates are summed.
  static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries) {
    for (const auto& t : entries)
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw std::out_of_range("triplet outside matrix shape");
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    std::vector<int> ptr(static_cast<std::size_t>(rows) + 1, 0), idx;
    std::vector<double> val;
    idx.reserve(entries.size());
    val.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& t = entries[k];
      if (!idx.empty() && k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
        val.back() += t.value;
        continue;
      }
      idx.push_back(t.col);
      val.push_back(t.value);
      ++ptr[static_cast<std::size_t>(t.row) + 1];
    }
    std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
    return CsrMatrix(rows, cols, std::move(ptr), std::move(idx), std::move(val));
  }

  static CsrMatrix identity(int n) {
    std::vector<int> ptr(static_cast<std::size_t>(n) + 1), idx(static_cast<std::size_t>(n));
    std::iota(ptr.begin(), ptr.end(), 0);
    std::iota(idx.begin(), idx.end(), 0);
    return CsrMatrix(n, n, std::move(ptr), std::move(idx), std::vector<double>(static_cast<std::size_t>(n), 1.0));
  }

  static CsrMatrix diagonal(std::span<const double> d) {
    auto m = identity(static_cast<int>(d.size()));
    std::copy(d.begin(), d.end(), m.values_.begin());
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double at(int r, int c) const {
    const auto b = col_idx_.begin() + row_ptr_.at(static_cast<std::size_t>(r));
    const auto e = col_idx_.begin() + row_ptr_.at(static_cast<std::size_t>(r) + 1);
    const auto it = std::lower_bound(b, e, c);
    return (it != e && *it == c) ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != static_cast<std::size_t>(cols_) || y.size() != static_cast<std::size_t>(rows_))
      throw std::invalid_argument("matrix-vector shape mismatch");
    for (int r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[static_cast<std::size_t>(col_idx_[k])];
      y[static_cast<std::size_t>(r)] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_));
    multiply(x, y);
    return y;
  }

  CsrMatrix transposed() const {
    std::vector<int> ptr(static_cast<std::size_t>(cols_) + 1, 0);
    for (int c : col_idx_) ++ptr[static_cast<std::size_t>(c) + 1];
    std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
    std::vector<int> idx(nnz()), next(ptr.begin(), ptr.end() - 1);
    std::vector<double> val(nnz());
    for (int r = 0; r < rows_; ++r)
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const int pos = next[static_cast<std::size_t>(col_idx_[k])]++;
        idx[static_cast<std::size_t>(pos)] = r;
        val[static_cast<std::size_t>(pos)] = values_[k];
      }
    return CsrMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(val));
  }

  bool same_pattern(const CsrMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && row_ptr_ == o.row_ptr_ && col_idx_ == o.col_idx_;
  }

  /// this += alpha * other. Patterns may differ; the result holds the union.
  CsrMatrix& add_scaled(double alpha, const CsrMatrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument("matrix shapes differ");
    if (same_pattern(other)) {
      for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += alpha * other.values_[k];
      return *this;
    }
    std::vector<Triplet> t = triplets();
    for (const auto& e : other.triplets()) t.push_back({e.row, e.col, alpha * e.value});
    *this = from_triplets(rows_, cols_, std::move(t));
    return *this;
  }

  CsrMatrix& scale(double alpha) {
    for (auto& v : values_) v *= alpha;
    return *this;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (int r = 0; r < rows_; ++r)
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.push_back({r, col_idx_[k], values_[k]});
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  double norm_inf() const {
    double m = 0.0;
    for (int r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += std::abs(values_[k]);
      m = std::max(m, s);
    }
    return m;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

inline CsrMatrix operator+(CsrMatrix a, const CsrMatrix& b) { return std::move(a.add_scaled(1.0, b)); }
inline CsrMatrix operator-(CsrMatrix a, const CsrMatrix& b) { return std::move(a.add_scaled(-1.0, b)); }

/// max_ij |A_ij - B_ij|
inline double max_abs_difference(const CsrMatrix& a, const CsrMatrix& b) { return (a - b).max_abs(); }

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// MatrixMarket

inline void write_matrix_market(std::ostream& os, const CsrMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  os.precision(17);
  for (const auto& t : a.triplets()) os << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
}

inline CsrMatrix read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error("missing MatrixMarket banner");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (object != "matrix" || format != "coordinate" || (field != "real" && field != "integer"))
    throw std::runtime_error("only real coordinate MatrixMarket files are supported");
  const bool symmetric = symmetry == "symmetric";
  while (std::getline(is, line) && (line.empty() || line[0] == '%')) {
  }
  std::istringstream header(line);
  long rows = 0, cols = 0, entries = 0;
  if (!(header >> rows >> cols >> entries)) throw std::runtime_error("bad MatrixMarket size line");
  std::vector<Triplet> t;
  for (long k = 0; k < entries; ++k) {
    long r = 0, c = 0;
    double v = 0.0;
    if (!(is >> r >> c >> v)) throw std::runtime_error("truncated MatrixMarket data");
    t.push_back({static_cast<int>(r - 1), static_cast<int>(c - 1), v});
    if (symmetric && r != c) t.push_back({static_cast<int>(c - 1), static_cast<int>(r - 1), v});
  }
  return CsrMatrix::from_triplets(static_cast<int>(rows), static_cast<int>(cols), std::move(t));
}

// ---------------------------------------------------------------------------
// Direct solve

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& a) {
  Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> view(
      a.rows(), a.cols(), static_cast<Eigen::Index>(a.nnz()), a.row_ptr().data(), a.col_idx().data(),
      a.values().data());
  return Eigen::SparseMatrix<double>(view);
}

/// Sparse LU factorisation with column approximate-minimum-degree ordering.
/// Immutable after construction; solve() may be called concurrently.
class DirectSolver {
 public:
  explicit DirectSolver(const CsrMatrix& a) : rows_(a.rows()), norm_(a.norm_inf()), matrix_(&a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("direct solve needs a square matrix");
    lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
    auto m = to_eigen(a);
    m.makeCompressed();
    lu_->analyzePattern(m);
    lu_->factorize(m);
    if (lu_->info() != Eigen::Success)
      throw SingularMatrixError("sparse LU failed (" + std::to_string(rows_) + " unknowns): " + lu_->lastErrorMessage());
  }

  int size() const { return rows_; }

  std::vector<double> solve(std::span<const double> b) const {
    if (b.size() != static_cast<std::size_t>(rows_)) throw std::invalid_argument("rhs length mismatch");
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), rows_);
    Eigen::VectorXd x = lu_->solve(rhs);
    std::vector<double> out(x.data(), x.data() + rows_);
    if (!std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); }))
      throw SingularMatrixError("sparse LU produced non-finite values; matrix is singular to working precision");
    return out;
  }

  /// ||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf) for a matrix still alive.
  double relative_residual(std::span<const double> x, std::span<const double> b) const {
    std::vector<double> r = (*matrix_) * x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    const double denom = norm_ * norm_inf(x) + norm_inf(b);
    return denom > 0.0 ? norm_inf(r) / denom : norm_inf(r);
  }

 private:
  int rows_;
  double norm_;
  const CsrMatrix* matrix_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
};

inline std::vector<double> solve_direct(const CsrMatrix& a, std::span<const double> b) {
  const DirectSolver solver(a);
  std::vector<double> x = solver.solve(b);
  const double rel = solver.relative_residual(x, b);
  if (!(rel <= 1e-8))
    throw SingularMatrixError("direct solve residual " + std::to_string(rel) +
                              " indicates a matrix singular to working precision");
  return x;
}

// ---------------------------------------------------------------------------
// Krylov

using Preconditioner = std::function<void(std::span<const double>, std::span<double>)>;

/// Incomplete LU with zero fill on the pattern of A.
class Ilu0 {
 public:
  explicit Ilu0(const CsrMatrix& a) : lu_(a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("ILU(0) needs a square matrix");
    const int n = a.rows();
    const auto& ptr = lu_.row_ptr();
    const auto& idx = lu_.col_idx();
    auto& val = lu_.values();
    diag_.assign(static_cast<std::size_t>(n), -1);
    for (int r = 0; r < n; ++r)
      for (int k = ptr[r]; k < ptr[r + 1]; ++k)
        if (idx[k] == r) diag_[static_cast<std::size_t>(r)] = k;
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
      if (diag_[static_cast<std::size_t>(i)] < 0)
        throw SingularMatrixError("ILU(0): missing diagonal entry in row " + std::to_string(i));
      for (int k = ptr[i]; k < ptr[i + 1]; ++k) pos[static_cast<std::size_t>(idx[k])] = k;
      for (int k = ptr[i]; k < ptr[i + 1] && idx[k] < i; ++k) {
        const int j = idx[k];
        const double pivot = val[static_cast<std::size_t>(diag_[static_cast<std::size_t>(j)])];
        val[k] /= pivot;
        const double lij = val[k];
        for (int m = diag_[static_cast<std::size_t>(j)] + 1; m < ptr[j + 1]; ++m) {
          const int p = pos[static_cast<std::size_t>(idx[m])];
          if (p >= 0) val[static_cast<std::size_t>(p)] -= lij * val[m];
        }
      }
      for (int k = ptr[i]; k < ptr[i + 1]; ++k) pos[static_cast<std::size_t>(idx[k])] = -1;
      if (val[static_cast<std::size_t>(diag_[static_cast<std::size_t>(i)])] == 0.0)
        throw SingularMatrixError("ILU(0): zero pivot in row " + std::to_string(i));
    }
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    const int n = lu_.rows();
    const auto& ptr = lu_.row_ptr();
    const auto& idx = lu_.col_idx();
    const auto& val = lu_.values();
    for (int i = 0; i < n; ++i) {
      double s = r[static_cast<std::size_t>(i)];
      for (int k = ptr[i]; k < diag_[static_cast<std::size_t>(i)]; ++k) s -= val[k] * z[static_cast<std::size_t>(idx[k])];
      z[static_cast<std::size_t>(i)] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = z[static_cast<std::size_t>(i)];
      const int d = diag_[static_cast<std::size_t>(i)];
      for (int k = d + 1; k < ptr[i + 1]; ++k) s -= val[k] * z[static_cast<std::size_t>(idx[k])];
      z[static_cast<std::size_t>(i)] = s / val[static_cast<std::size_t>(d)];
    }
  }

 private:
  CsrMatrix lu_;
  std::vector<int> diag_;
};

enum class PreconditionerKind { none, ilu0 };

struct GmresResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

class GmresError : public std::runtime_error {
 public:
  enum class Kind { breakdown, not_converged };
  GmresError(Kind kind, GmresResult best, const std::string& what)
      : std::runtime_error(what), kind_(kind), best_(std::move(best)) {}
  Kind kind() const { return kind_; }
  const GmresResult& best() const { return best_; }

 private:
  Kind kind_;
  GmresResult best_;
};

/// Right-preconditioned restarted GMRES; the tolerance applies to the true
/// residual relative to ||b||.
inline GmresResult solve_gmres(const CsrMatrix& a, std::span<const double> b, const Preconditioner& precond,
                               double tol, int max_iter, int restart = 60, std::span<const double> x0 = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("GMRES tolerance must be positive");
  if (a.rows() != a.cols() || b.size() != static_cast<std::size_t>(a.rows()))
    throw std::invalid_argument("GMRES shape mismatch");
  const auto n = static_cast<std::size_t>(a.rows());
  const auto apply_m = [&](std::span<const double> r, std::span<double> z) {
    if (precond)
      precond(r, z);
    else
      std::copy(r.begin(), r.end(), z.begin());
  };
  GmresResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), res.x.begin());
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    return res;
  }
  const int m = std::max(1, std::min(restart, static_cast<int>(n)));
  std::vector<std::vector<double>> v(static_cast<std::size_t>(m) + 1, std::vector<double>(n));
  std::vector<std::vector<double>> z(static_cast<std::size_t>(m), std::vector<double>(n));
  std::vector<double> h(static_cast<std::size_t>((m + 1) * m)), cs(static_cast<std::size_t>(m)),
      sn(static_cast<std::size_t>(m)), g(static_cast<std::size_t>(m) + 1), w(n);
  auto H = [&](int i, int j) -> double& { return h[static_cast<std::size_t>(i * m + j)]; };

  auto true_residual = [&](std::vector<double>& r) {
    a.multiply(res.x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return norm2(r) / bnorm;
  };

  std::vector<double> r(n);
  res.relative_residual = true_residual(r);
  while (res.iterations < max_iter) {
    if (res.relative_residual <= tol) return res;
    const double beta = res.relative_residual * bnorm;
    for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    int j = 0;
    bool invariant = false;
    for (; j < m && res.iterations < max_iter; ++j) {
      ++res.iterations;
      apply_m(v[static_cast<std::size_t>(j)], z[static_cast<std::size_t>(j)]);
      a.multiply(z[static_cast<std::size_t>(j)], w);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += w[k] * v[static_cast<std::size_t>(i)][k];
        H(i, j) = s;
        for (std::size_t k = 0; k < n; ++k) w[k] -= s * v[static_cast<std::size_t>(i)][k];
      }
      const double hn = norm2(w);
      H(j + 1, j) = hn;
      if (!std::isfinite(hn))
        throw GmresError(GmresError::Kind::breakdown, res, "GMRES breakdown: non-finite Arnoldi vector");
      if (hn > 0.0)
        for (std::size_t k = 0; k < n; ++k) v[static_cast<std::size_t>(j) + 1][k] = w[k] / hn;
      for (int i = 0; i < j; ++i) {
        const double t = cs[static_cast<std::size_t>(i)] * H(i, j) + sn[static_cast<std::size_t>(i)] * H(i + 1, j);
        H(i + 1, j) = -sn[static_cast<std::size_t>(i)] * H(i, j) + cs[static_cast<std::size_t>(i)] * H(i + 1, j);
        H(i, j) = t;
      }
      const double den = std::hypot(H(j, j), H(j + 1, j));
      if (den == 0.0) {
        throw GmresError(GmresError::Kind::breakdown, res, "GMRES breakdown: singular Hessenberg column");
      }
      cs[static_cast<std::size_t>(j)] = H(j, j) / den;
      sn[static_cast<std::size_t>(j)] = H(j + 1, j) / den;
      H(j, j) = den;
      H(j + 1, j) = 0.0;
      g[static_cast<std::size_t>(j) + 1] = -sn[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
      g[static_cast<std::size_t>(j)] *= cs[static_cast<std::size_t>(j)];
      if (hn == 0.0) {
        invariant = true;
        ++j;
        break;
      }
      if (std::abs(g[static_cast<std::size_t>(j) + 1]) / bnorm <= 0.5 * tol) {
        ++j;
        break;
      }
    }
    // back substitution and update
    std::vector<double> y(static_cast<std::size_t>(j));
    for (int i = j - 1; i >= 0; --i) {
      double s = g[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < j; ++k) s -= H(i, k) * y[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(i)] = s / H(i, i);
    }
    for (int i = 0; i < j; ++i)
      for (std::size_t k = 0; k < n; ++k) res.x[k] += y[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)][k];
    const double previous = res.relative_residual;
    res.relative_residual = true_residual(r);
    if (res.relative_residual <= tol) return res;
    if (invariant && res.relative_residual >= previous)
      throw GmresError(GmresError::Kind::breakdown, res,
                       "GMRES breakdown: invariant Krylov subspace without convergence (singular operator?)");
  }
  if (res.relative_residual <= tol) return res;
  throw GmresError(GmresError::Kind::not_converged, res,
                   "GMRES did not converge in " + std::to_string(max_iter) + " iterations (relative residual " +
                       std::to_string(res.relative_residual) + ")");
}

inline GmresResult solve_gmres(const CsrMatrix& a, std::span<const double> b, PreconditionerKind kind, double tol,
                               int max_iter) {
  if (kind == PreconditionerKind::none) return solve_gmres(a, b, Preconditioner{}, tol, max_iter);
  auto ilu = std::make_shared<Ilu0>(a);
  return solve_gmres(a, b, [ilu](std::span<const double> r, std::span<double> z) { ilu->apply(r, z); }, tol,
                     max_iter);
}

// ---------------------------------------------------------------------------
// Mean-constrained systems

/// Velocity-pressure saddle point with a scalar multiplier enforcing a zero
/// pressure mean:
///   [ A  -B^T  0 ] [u]   [f]
///   [ B   0    w ] [p] = [g]
///   [ 0   w^T  0 ] [l]   [0]
struct BlockSystem {
  CsrMatrix a;                         // velocity-velocity
  CsrMatrix b;                         // d(v, q) = q^T B v
  std::vector<double> pressure_mean;  // integral functional on pressure DOFs

  int velocity_size() const { return a.rows(); }
  int pressure_size() const { return b.rows(); }
};

struct SaddleSolution {
  std::vector<double> velocity;
  std::vector<double> pressure;
  double multiplier = 0.0;
};

inline void check_block_system(const BlockSystem& sys) {
  if (sys.a.rows() != sys.a.cols() || sys.b.cols() != sys.a.rows() ||
      sys.pressure_mean.size() != static_cast<std::size_t>(sys.b.rows()))
    throw std::invalid_argument("inconsistent saddle-point block shapes");
}

inline CsrMatrix assemble_saddle_matrix(const BlockSystem& sys) {
  check_block_system(sys);
  const int nu = sys.velocity_size(), np = sys.pressure_size(), n = nu + np + 1;
  std::vector<Triplet> t;
  t.reserve(sys.a.nnz() + 2 * sys.b.nnz() + 2 * static_cast<std::size_t>(np));
  for (const auto& e : sys.a.triplets()) t.push_back(e);
  for (const auto& e : sys.b.triplets()) {
    t.push_back({nu + e.row, e.col, e.value});
    t.push_back({e.col, nu + e.row, -e.value});
  }
  for (int i = 0; i < np; ++i) {
    const double w = sys.pressure_mean[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    t.push_back({nu + i, n - 1, w});
    t.push_back({n - 1, nu + i, w});
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

inline std::vector<double> saddle_rhs(const BlockSystem& sys, std::span<const double> f, std::span<const double> g) {
  const auto nu = static_cast<std::size_t>(sys.velocity_size()), np = static_cast<std::size_t>(sys.pressure_size());
  if (f.size() != nu || (!g.empty() && g.size() != np)) throw std::invalid_argument("saddle rhs length mismatch");
  std::vector<double> rhs(nu + np + 1, 0.0);
  std::copy(f.begin(), f.end(), rhs.begin());
  if (!g.empty()) std::copy(g.begin(), g.end(), rhs.begin() + static_cast<std::ptrdiff_t>(nu));
  return rhs;
}

inline SaddleSolution split_saddle(const BlockSystem& sys, const std::vector<double>& x) {
  const auto nu = static_cast<std::size_t>(sys.velocity_size()), np = static_cast<std::size_t>(sys.pressure_size());
  SaddleSolution s;
  s.velocity.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nu));
  s.pressure.assign(x.begin() + static_cast<std::ptrdiff_t>(nu), x.begin() + static_cast<std::ptrdiff_t>(nu + np));
  s.multiplier = x.back();
  return s;
}

/// Direct solve of the constrained saddle system. `g` may be empty (zero).
inline SaddleSolution solve_saddle(const BlockSystem& sys, std::span<const double> f, std::span<const double> g = {}) {
  const CsrMatrix k = assemble_saddle_matrix(sys);
  const auto rhs = saddle_rhs(sys, f, g);
  std::vector<double> x;
  try {
    x = solve_direct(k, rhs);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string("saddle system is rank deficient beyond the constant pressure mode: ") +
                              e.what());
  }
  return split_saddle(sys, x);
}

/// [A w; w^T 0] [x; l] = [b; 0]: solves A x = b on the mean-zero subspace.
inline CsrMatrix assemble_constrained_matrix(const CsrMatrix& a, std::span<const double> w) {
  if (a.rows() != a.cols() || w.size() != static_cast<std::size_t>(a.rows()))
    throw std::invalid_argument("constraint row length mismatch");
  const int n = a.rows();
  std::vector<Triplet> t = a.triplets();
  for (int i = 0; i < n; ++i) {
    const double v = w[static_cast<std::size_t>(i)];
    if (v == 0.0) continue;
    t.push_back({i, n, v});
    t.push_back({n, i, v});
  }
  return CsrMatrix::from_triplets(n + 1, n + 1, std::move(t));
}

// ---------------------------------------------------------------------------
// Symmetric factorisations used as preconditioners

/// Sparse Cholesky (AMD ordering) of a symmetric positive definite matrix.
/// Only the lower triangle is read.
class SpdSolver {
 public:
  explicit SpdSolver(const CsrMatrix& a) : rows_(a.rows()) {
    if (a.rows() != a.cols()) throw std::invalid_argument("Cholesky needs a square matrix");
    llt_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>>();
    llt_->compute(to_eigen(a));
    if (llt_->info() != Eigen::Success) throw SingularMatrixError("Cholesky failed: matrix is not positive definite");
  }

  int size() const { return rows_; }

  void solve(std::span<const double> b, std::span<double> x) const {
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), rows_);
    Eigen::Map<Eigen::VectorXd>(x.data(), rows_) = llt_->solve(rhs);
  }

  std::vector<double> solve(std::span<const double> b) const {
    if (b.size() != static_cast<std::size_t>(rows_)) throw std::invalid_argument("rhs length mismatch");
    std::vector<double> x(b.size());
    solve(b, x);
    return x;
  }

 private:
  int rows_;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>> llt_;
};

/// Approximate inverse of the constrained saddle matrix
///   [ A  -B^T  0 ]
///   [ B   0    w ]
///   [ 0   w^T  0 ]
/// built from a symmetric positive definite A_s close to A. The matrix
///   [ A_s  B^T    ]
///   [ B   -eps D  ]
/// is symmetric quasi-definite, so a sparse LDL^T exists for any symmetric
/// ordering. Its solution (with the pressure sign flipped back) is shifted
/// along w to meet the mean constraint; the multiplier part is zero.
class SaddlePreconditioner {
 public:
  SaddlePreconditioner(const CsrMatrix& a_sym, const CsrMatrix& b, std::span<const double> pressure_mean,
                       std::span<const double> regularisation)
      : nu_(a_sym.rows()), np_(b.rows()), w_(pressure_mean.begin(), pressure_mean.end()) {
    if (a_sym.rows() != a_sym.cols() || b.cols() != nu_ || w_.size() != static_cast<std::size_t>(np_) ||
        regularisation.size() != static_cast<std::size_t>(np_))
      throw std::invalid_argument("inconsistent saddle preconditioner blocks");
    std::vector<Triplet> t;
    t.reserve(a_sym.nnz() + b.nnz() + static_cast<std::size_t>(np_));
    for (const auto& e : a_sym.triplets())
      if (e.col <= e.row) t.push_back(e);
    for (const auto& e : b.triplets()) t.push_back({nu_ + e.row, e.col, e.value});
    for (int i = 0; i < np_; ++i) {
      const double d = regularisation[static_cast<std::size_t>(i)];
      if (!(d > 0.0)) throw std::invalid_argument("pressure regularisation must be positive");
      t.push_back({nu_ + i, nu_ + i, -d});
    }
    const auto q = CsrMatrix::from_triplets(nu_ + np_, nu_ + np_, std::move(t));
    ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>>();
    ldlt_->compute(to_eigen(q));
    if (ldlt_->info() != Eigen::Success) throw SingularMatrixError("LDL^T of the regularised saddle matrix failed");
    ww_ = 0.0;
    for (double v : w_) ww_ += v * v;
  }

  int size() const { return nu_ + np_ + 1; }

  void apply(std::span<const double> r, std::span<double> z) const {
    Eigen::Map<const Eigen::VectorXd> rhs(r.data(), nu_ + np_);
    Eigen::VectorXd y = ldlt_->solve(rhs);
    std::copy(y.data(), y.data() + nu_, z.begin());
    double wz = 0.0;
    for (int i = 0; i < np_; ++i) wz -= w_[static_cast<std::size_t>(i)] * y[nu_ + i];
    const double shift = ww_ > 0.0 ? (wz - r[static_cast<std::size_t>(nu_ + np_)]) / ww_ : 0.0;
    for (int i = 0; i < np_; ++i)
      z[static_cast<std::size_t>(nu_ + i)] = -y[nu_ + i] - shift * w_[static_cast<std::size_t>(i)];
    z[static_cast<std::size_t>(nu_ + np_)] = 0.0;
  }

 private:
  int nu_;
  int np_;
  std::vector<double> w_;
  double ww_ = 0.0;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>> ldlt_;
};

/// Exact inverse of [P w; w^T 0] for a factorised P, by block elimination;
/// used to precondition the bordered system [A w; w^T 0] with P close to A.
class BorderedPreconditioner {
 public:
  BorderedPreconditioner(std::shared_ptr<const SpdSolver> p, std::span<const double> w)
      : p_(std::move(p)), w_(w.begin(), w.end()) {
    if (w_.size() != static_cast<std::size_t>(p_->size())) throw std::invalid_argument("border length mismatch");
    pw_ = p_->solve(w_);
    wpw_ = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) wpw_ += w_[i] * pw_[i];
    if (!(wpw_ > 0.0)) throw std::invalid_argument("border vector is zero");
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    const auto n = w_.size();
    p_->solve(r.first(n), z.first(n));
    double wz = 0.0;
    for (std::size_t i = 0; i < n; ++i) wz += w_[i] * z[i];
    const double mu = (wz - r[n]) / wpw_;
    for (std::size_t i = 0; i < n; ++i) z[i] -= mu * pw_[i];
    z[n] = mu;
  }

 private:
  std::shared_ptr<const SpdSolver> p_;
  std::vector<double> w_;
  std::vector<double> pw_;
  double wpw_ = 0.0;
};

}  // namespace chemodg

#endif  // CHEMODG_SPARSE_HPP
