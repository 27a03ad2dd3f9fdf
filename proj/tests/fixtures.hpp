#pragma once

#include <Eigen/Dense>

#include "snsld/chain.hpp"
#include "snsld/galerkin_model.hpp"
#include "snsld/rng.hpp"

namespace fixtures {

inline snsld::GalerkinModel torus(int k, double amplitude = 0.5) {
  snsld::TorusForcingSpec f;
  f.entries = {{0, 1.0}};
  snsld::TorusNoiseSpec n;
  n.amplitude = amplitude;
  return snsld::build_torus_model(k, f, n);
}

inline Eigen::MatrixXd two_state() {
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  return p;
}

inline Eigen::MatrixXd random_stochastic(int n, snsld::NormalStream& rng) {
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = 0.05 + rng.uniform();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline Eigen::MatrixXd random_rates(int n, snsld::NormalStream& rng) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) g(i, j) = 0.1 + rng.uniform();
    }
    g(i, i) = -g.row(i).sum();
  }
  return g;
}

inline snsld::State random_state(int n, snsld::NormalStream& rng, double scale = 1.0) {
  snsld::State u(n);
  for (int j = 0; j < n; ++j) u[j] = scale * rng();
  return u;
}

}  // namespace fixtures
