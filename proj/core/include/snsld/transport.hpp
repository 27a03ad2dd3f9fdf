#pragma once

#include <vector>

#include <Eigen/Dense>

namespace snsld {

/// Minimum-cost transport between `supply` (rows of `cost`) and `demand`
/// (columns) by successive shortest paths with Dijkstra potentials. Both
/// mass vectors must be non-negative with equal totals; costs non-negative.
double transport_cost(const std::vector<double>& supply, const std::vector<double>& demand,
                      const Eigen::MatrixXd& cost);

/// sup { <f, p - q> : |f| <= M, |f(x) - f(y)| <= (1 - M) d(x, y) } over
/// M in [0, 1], where p and q are the positive and negative parts of a
/// signed measure of zero total mass. For fixed M this equals the transport
/// cost under the truncated metric min((1 - M) d, 2M); the value is concave
/// in M and maximised by golden-section search.
double bounded_lipschitz_dual(const std::vector<double>& supply, const std::vector<double>& demand,
                              const Eigen::MatrixXd& distance);

}  // namespace snsld
