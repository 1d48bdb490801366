#ifndef CHEMODG_BASIS_HPP
#define CHEMODG_BASIS_HPP

// Orthonormal polynomial basis of P_k on the reference triangle.
//
// The basis is the graded Gram-Schmidt (Cholesky) orthonormalisation of the
// monomials 1, x, y, x^2, xy, y^2, ... with respect to the reference L2 inner
// product, so the first function is the constant sqrt(2), every degree-j
// prefix spans P_j, and the reference mass matrix is the identity.

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemodg/mesh2d.hpp"
#include "chemodg/quadrature.hpp"

namespace chemodg {

inline constexpr int kMaxDegree = 6;

inline constexpr int dofs_per_element(int degree) { return (degree + 1) * (degree + 2) / 2; }

class OrthonormalBasis {
 public:
  explicit OrthonormalBasis(int degree) : degree_(degree), size_(dofs_per_element(degree)) {
    if (degree < 0 || degree > kMaxDegree)
      throw std::invalid_argument("basis degree " + std::to_string(degree) + " outside [0, " +
                                  std::to_string(kMaxDegree) + "]");
    for (int d = 0; d <= degree; ++d)
      for (int b = 0; b <= d; ++b) exponents_.push_back({d - b, b});

    const auto rule = make_quadrature(QuadKind::triangle, std::max(1, 2 * degree));
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(size_, size_);
    std::vector<double> m(static_cast<std::size_t>(size_));
    for (std::size_t q = 0; q < rule.size(); ++q) {
      monomials(rule.points[q], m);
      for (int i = 0; i < size_; ++i)
        for (int j = 0; j < size_; ++j) gram(i, j) += rule.weights[q] * m[i] * m[j];
    }
    // gram = L L^T  =>  phi = L^{-1} m is orthonormal
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const Eigen::MatrixXd lower = llt.matrixL();
    coeff_ = lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(size_, size_));
  }

  int degree() const { return degree_; }
  int size() const { return size_; }

  /// Values and reference gradients of every basis function at a point of the
  /// closed reference triangle.
  void evaluate(Point2 ref, std::span<double> values, std::span<Point2> grads = {}) const {
    constexpr double tol = 1e-12;
    if (!(ref.x >= -tol && ref.y >= -tol && ref.x + ref.y <= 1.0 + tol))
      throw std::domain_error("point (" + std::to_string(ref.x) + ", " + std::to_string(ref.y) +
                              ") lies outside the reference triangle");
    std::array<double, dofs_per_element(kMaxDegree)> m{}, mx{}, my{};
    for (int a = 0; a < size_; ++a) {
      const auto [px, py] = exponents_[static_cast<std::size_t>(a)];
      m[a] = ipow(ref.x, px) * ipow(ref.y, py);
      mx[a] = px > 0 ? px * ipow(ref.x, px - 1) * ipow(ref.y, py) : 0.0;
      my[a] = py > 0 ? py * ipow(ref.x, px) * ipow(ref.y, py - 1) : 0.0;
    }
    for (int i = 0; i < size_; ++i) {
      double v = 0.0, gx = 0.0, gy = 0.0;
      for (int a = 0; a <= i; ++a) {
        const double c = coeff_(i, a);
        v += c * m[a];
        gx += c * mx[a];
        gy += c * my[a];
      }
      values[static_cast<std::size_t>(i)] = v;
      if (!grads.empty()) grads[static_cast<std::size_t>(i)] = {gx, gy};
    }
  }

 private:
  static double ipow(double x, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
  }

  void monomials(Point2 p, std::span<double> out) const {
    for (int a = 0; a < size_; ++a) {
      const auto [px, py] = exponents_[static_cast<std::size_t>(a)];
      out[static_cast<std::size_t>(a)] = ipow(p.x, px) * ipow(p.y, py);
    }
  }

  int degree_;
  int size_;
  std::vector<std::array<int, 2>> exponents_;
  Eigen::MatrixXd coeff_;  // lower triangular, row i = expansion of phi_i in monomials
};

/// Shared, lazily built basis per degree.
inline const OrthonormalBasis& basis_for(int degree) {
  static std::array<std::unique_ptr<OrthonormalBasis>, kMaxDegree + 1> cache;
  static std::mutex mutex;
  if (degree < 0 || degree > kMaxDegree)
    throw std::invalid_argument("basis degree " + std::to_string(degree) + " unsupported");
  std::lock_guard lock(mutex);
  auto& slot = cache[static_cast<std::size_t>(degree)];
  if (!slot) slot = std::make_unique<OrthonormalBasis>(degree);
  return *slot;
}

}  // namespace chemodg

#endif  // CHEMODG_BASIS_HPP
