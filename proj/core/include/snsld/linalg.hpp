#pragma once

#include <vector>

#include <Eigen/Dense>

namespace snsld {

/// Scaling-and-squaring matrix exponential with a degree-13 Pade
/// approximant (Higham 2005 thresholds).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

/// Nodes and weights of a quadrature rule on an interval.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Composite Gauss-Legendre: `panels` equal panels of `order` points each.
QuadratureRule composite_gauss_legendre(int panels, int order, double a, double b);

/// Trapezoid rule with n >= 2 equispaced nodes on [a, b].
QuadratureRule trapezoid(int n, double a, double b);

}  // namespace snsld
