#ifndef CHEMODG_QUADRATURE_HPP
#define CHEMODG_QUADRATURE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chemodg/mesh2d.hpp"

namespace chemodg {

enum class QuadKind { triangle, edge };

/// Points in reference coordinates. Triangle rules live on (0,0),(1,0),(0,1)
/// and sum to 1/2; edge rules live on [0,1] (stored in .x) and sum to 1.
struct QuadratureRule {
  QuadKind kind = QuadKind::triangle;
  int exactness = 0;
  std::vector<Point2> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

class UnsupportedQuadratureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMinQuadratureExactness = 1;
inline constexpr int kMaxQuadratureExactness = 40;

/// Gauss-Legendre nodes and weights on [-1,1] (Newton on the three-term recurrence).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
    x[lo] = -z;
    x[hi] = z;
    w[lo] = w[hi] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Rule integrating every polynomial of total degree <= exactness exactly.
/// Triangle rules use the collapsed (Duffy) tensor product of Gauss-Legendre rules.
inline QuadratureRule make_quadrature(QuadKind kind, int exactness) {
  if (exactness < kMinQuadratureExactness || exactness > kMaxQuadratureExactness)
    throw UnsupportedQuadratureError("quadrature exactness " + std::to_string(exactness) +
                                     " unsupported; supported range is [" +
                                     std::to_string(kMinQuadratureExactness) + ", " +
                                     std::to_string(kMaxQuadratureExactness) + "]");
  QuadratureRule rule;
  rule.kind = kind;
  rule.exactness = exactness;
  if (kind == QuadKind::edge) {
    const auto [x, w] = gauss_legendre(exactness / 2 + 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.points.push_back({0.5 * (x[i] + 1.0), 0.0});
      rule.weights.push_back(0.5 * w[i]);
    }
    return rule;
  }
  // the collapsed direction carries an extra (1 - eta) factor
  const auto [xs, ws] = gauss_legendre(exactness / 2 + 1);
  const auto [xe, we] = gauss_legendre((exactness + 1) / 2 + 1);
  for (std::size_t j = 0; j < xe.size(); ++j) {
    const double eta = 0.5 * (xe[j] + 1.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double xi = 0.5 * (xs[i] + 1.0);
      rule.points.push_back({xi * (1.0 - eta), eta});
      rule.weights.push_back(0.25 * ws[i] * we[j] * (1.0 - eta));
    }
  }
  return rule;
}

}  // namespace chemodg

#endif  // CHEMODG_QUADRATURE_HPP
