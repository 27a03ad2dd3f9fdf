#include "snsld/transport.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "snsld/error.hpp"

namespace snsld {

double transport_cost(const std::vector<double>& supply, const std::vector<double>& demand,
                      const Eigen::MatrixXd& cost) {
  const std::size_t ns = supply.size(), nt = demand.size();
  if (cost.rows() != static_cast<Eigen::Index>(ns) || cost.cols() != static_cast<Eigen::Index>(nt))
    throw DimensionMismatch("transport cost matrix does not match the mass vectors");
  if (ns == 0 || nt == 0) return 0.0;
  const double total = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double eps = 1e-14 * std::max(total, 1e-300);

  std::vector<double> rem_s = supply, rem_t = demand;
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(nt));
  std::vector<double> pot_s(ns, 0.0), pot_t(nt, 0.0);
  const double inf = std::numeric_limits<double>::infinity();

  // Node ids: sources [0, ns), sinks [ns, ns + nt).
  const std::size_t nv = ns + nt;
  std::vector<double> dist(nv);
  std::vector<long> parent(nv);
  std::vector<char> done(nv);

  std::size_t guard = 0;
  const std::size_t max_rounds = 50 * (nv + 10) * (nv + 10);
  while (std::accumulate(rem_s.begin(), rem_s.end(), 0.0) > eps && guard++ < max_rounds) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < ns; ++i)
      if (rem_s[i] > eps) dist[i] = 0.0;

    for (std::size_t round = 0; round < nv; ++round) {
      std::size_t v = nv;
      double best = inf;
      for (std::size_t x = 0; x < nv; ++x)
        if (!done[x] && dist[x] < best) {
          best = dist[x];
          v = x;
        }
      if (v == nv) break;
      done[v] = 1;
      if (v < ns) {
        for (std::size_t j = 0; j < nt; ++j) {
          const double rc = std::max(0.0, cost(v, j) + pot_s[v] - pot_t[j]);
          if (dist[v] + rc < dist[ns + j]) {
            dist[ns + j] = dist[v] + rc;
            parent[ns + j] = static_cast<long>(v);
          }
        }
      } else {
        const std::size_t j = v - ns;
        for (std::size_t i = 0; i < ns; ++i) {
          if (flow(i, j) <= eps) continue;
          const double rc = std::max(0.0, -cost(i, j) + pot_t[j] - pot_s[i]);
          if (dist[v] + rc < dist[i]) {
            dist[i] = dist[v] + rc;
            parent[i] = static_cast<long>(v);
          }
        }
      }
    }

    std::size_t sink = nt;
    double best = inf;
    for (std::size_t j = 0; j < nt; ++j)
      if (rem_t[j] > eps && dist[ns + j] < best) {
        best = dist[ns + j];
        sink = j;
      }
    if (sink == nt) break;

    for (std::size_t i = 0; i < ns; ++i) pot_s[i] += std::min(dist[i], best);
    for (std::size_t j = 0; j < nt; ++j) pot_t[j] += std::min(dist[ns + j], best);

    // Bottleneck along the path.
    double delta = rem_t[sink];
    std::size_t v = ns + sink;
    while (true) {
      const long p = parent[v];
      if (p < 0) {
        delta = std::min(delta, rem_s[v]);
        break;
      }
      if (v < ns) delta = std::min(delta, flow(v, static_cast<std::size_t>(p) - ns));
      v = static_cast<std::size_t>(p);
    }
    v = ns + sink;
    while (true) {
      const long p = parent[v];
      if (p < 0) {
        rem_s[v] -= delta;
        break;
      }
      if (v >= ns)
        flow(static_cast<std::size_t>(p), v - ns) += delta;
      else
        flow(v, static_cast<std::size_t>(p) - ns) -= delta;
      v = static_cast<std::size_t>(p);
    }
    rem_t[sink] -= delta;
  }
  return (flow.array() * cost.array()).sum();
}

double bounded_lipschitz_dual(const std::vector<double>& supply, const std::vector<double>& demand,
                              const Eigen::MatrixXd& distance) {
  if (supply.empty() || demand.empty()) return 0.0;
  auto value = [&](double m) {
    const Eigen::MatrixXd cost = ((1.0 - m) * distance.array()).min(2.0 * m).matrix();
    return transport_cost(supply, demand, cost);
  };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = value(x1), f2 = value(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = value(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = value(x1);
    }
  }
  return std::max(f1, f2);
}

}  // namespace snsld
