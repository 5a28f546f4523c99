#pragma once

#include <random>

#include "spinsme/operator_core.hpp"

namespace testutil {

using spinsme::Complex;
using spinsme::Matrix;

inline Matrix random_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(normal(rng), normal(rng));
  return m;
}

inline Matrix random_hermitian(int n, std::mt19937_64& rng) {
  const Matrix m = random_matrix(n, rng);
  return 0.5 * (m + m.adjoint());
}

inline Matrix random_density(int n, std::mt19937_64& rng) {
  const Matrix m = random_matrix(n, rng);
  Matrix rho = m * m.adjoint();
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

}  // namespace testutil
