#pragma once

#include <vector>

#include "qvdp/model.hpp"

namespace qvdp {

/// Diagonal occupation weights of the uncoupled steady state, one list per mode.
struct DiagonalWeights {
  std::vector<std::vector<double>> modes;

  const std::vector<double>& operator[](int mode) const { return modes.at(static_cast<size_t>(mode)); }
  double mean(int mode) const;
};

// Closed-form single-oscillator weights
//   p_n = r^n 1F1(1+n; r+n; r) / ((r)_n 1F1(1; r; 2r)),   r = gamma1/gamma2,
// renormalized over the cutoff. Throws TruncationTooSmall when the cutoff
// holds less than 1 - 1e-8 of the mass.
DiagonalWeights unperturbed_weights(double gamma_ratio, const FockSpace& cutoff);

// rho0 = rho1 (x) rho2 built from the weights above.
DensityMatrix unperturbed_state(const SystemParams& params);

enum class PerturbativeMode {
  printed_lambda,    // lambda_nm exactly as the closed form reads
  numerical_lambda,  // lambda taken from the L0 diagonal
  subspace_inverse,  // exact solve of L0 x = -L_I rho0 on the coherence block
};

/// One coherence |n+2, m-1><n, m| and its denominator.
struct PerturbationTerm {
  int n = 0;
  int m = 1;
  cplx lambda;
  double weight_diff = 0.0;  // rho0(n,m) - rho0(n+2,m-1)
};

// lambda = i(Delta - 2 K1 (2n+1) + 2 K2 (m-1)) - Gamma with
// Gamma = gamma1/2 (2(n+m)+5) + gamma2((n+2)^2 + (m-1)^2 - 2(n+3)).
// For K1 = K2 = K the detuning part is Delta - 2K(2n - m + 2).
cplx lambda_nm(int n, int m, const SystemParams& params);

// Diagonal element of L0 on |n+2, m-1><n, m|, read off the assembled superoperator.
cplx lambda_numerical(int n, int m, const SystemParams& params, const SuperOperator& l0);

struct LambdaDiscrepancy {
  int n = 0;
  int m = 1;
  cplx printed;
  cplx numerical;
};

// Every (n, m) term where the closed-form lambda and the L0 diagonal differ by more than tol.
std::vector<LambdaDiscrepancy> validate_lambda(const SystemParams& params, double tol = 1e-9);

// All terms inside the cutoff (n + 2 < dims[0], 1 <= m < dims[1]).
std::vector<PerturbationTerm> perturbation_terms(const SystemParams& params,
                                                 PerturbativeMode mode = PerturbativeMode::printed_lambda);

/// First-order steady-state correction. It already carries the factor zeta, so
/// the approximate state is rho0 + first_order_density(params). Hermitian and
/// traceless; throws DegenerateDenominator when some lambda vanishes.
DenseMatrix first_order_density(const SystemParams& params,
                                PerturbativeMode mode = PerturbativeMode::printed_lambda);

/// <a1^dag a1^dag a2> / sqrt(n1 n2) of the first-order state, populations from rho0.
/// Same sign convention as sync_measure.
cplx perturbative_sync(const SystemParams& params, PerturbativeMode mode = PerturbativeMode::printed_lambda);

}  // namespace qvdp
