#pragma once

#include <random>

#include "qvdp/fock.hpp"

namespace qvdp::testing {

inline DenseMatrix random_matrix(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  DenseMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

// Full-rank random state G G^dag / Tr.
inline DensityMatrix random_state(const FockSpace& space, std::mt19937_64& rng) {
  const DenseMatrix g = random_matrix(space.size(), rng);
  DenseMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {space, rho};
}

inline DenseMatrix random_hermitian(Index n, std::mt19937_64& rng) {
  const DenseMatrix g = random_matrix(n, rng);
  return 0.5 * (g + g.adjoint());
}

}  // namespace qvdp::testing
