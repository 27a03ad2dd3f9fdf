#include "snsld/linalg.hpp"

#include <cmath>
#include <numbers>

#include "snsld/error.hpp"

namespace snsld {

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("expm needs a square matrix");
  const Eigen::Index n = a.rows();
  if (n == 0) return a;
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  const Eigen::MatrixXd x = a / std::ldexp(1.0, squarings);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd x2 = x * x;
  const Eigen::MatrixXd x4 = x2 * x2;
  const Eigen::MatrixXd x6 = x4 * x2;
  const Eigen::MatrixXd u_inner = b[13] * x6 + b[11] * x4 + b[9] * x2;
  const Eigen::MatrixXd u = x * (x6 * u_inner + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
  const Eigen::MatrixXd v_inner = b[12] * x6 + b[10] * x4 + b[8] * x2;
  const Eigen::MatrixXd v = x6 * v_inner + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;

  Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw Error("Gauss-Legendre rule needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = mid - half * z;
    rule.nodes[n - 1 - i] = mid + half * z;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(int panels, int order, double a, double b) {
  if (panels < 1) throw Error("composite rule needs at least one panel");
  QuadratureRule out;
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const auto panel = gauss_legendre(order, a + p * width, a + (p + 1) * width);
    out.nodes.insert(out.nodes.end(), panel.nodes.begin(), panel.nodes.end());
    out.weights.insert(out.weights.end(), panel.weights.begin(), panel.weights.end());
  }
  return out;
}

QuadratureRule trapezoid(int n, double a, double b) {
  if (n < 2) throw Error("trapezoid rule needs at least two nodes");
  QuadratureRule rule;
  const double h = (b - a) / (n - 1);
  for (int i = 0; i < n; ++i) {
    rule.nodes.push_back(a + i * h);
    rule.weights.push_back((i == 0 || i == n - 1) ? 0.5 * h : h);
  }
  return rule;
}

}  // namespace snsld
