#include "qvdp/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>

#include <Eigen/SparseLU>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>

#include "qvdp/errors.hpp"

namespace qvdp {

double DiagonalWeights::mean(int mode) const {
  const auto& p = (*this)[mode];
  double s = 0.0;
  for (size_t k = 0; k < p.size(); ++k) s += static_cast<double>(k) * p[k];
  return s;
}

DiagonalWeights unperturbed_weights(double gamma_ratio, const FockSpace& cutoff) {
  if (!(gamma_ratio > 0.0) || !std::isfinite(gamma_ratio)) {
    throw InvalidArgument("gamma1/gamma2 must be positive and finite");
  }
  using boost::math::hypergeometric_1F1;
  const double r = gamma_ratio;
  const double norm = hypergeometric_1F1(1.0, r, 2.0 * r);
  DiagonalWeights w;
  for (int mode = 0; mode < cutoff.modes(); ++mode) {
    const int d = cutoff.dim(mode);
    std::vector<double> p(static_cast<size_t>(d));
    double ratio = 1.0;  // r^n / (r)_n, accumulated to avoid overflow
    for (int n = 0; n < d; ++n) {
      if (n > 0) ratio *= r / (r + n - 1);
      p[static_cast<size_t>(n)] = ratio * hypergeometric_1F1(1.0 + n, r + n, r) / norm;
    }
    const double mass = std::accumulate(p.begin(), p.end(), 0.0);
    if (mass < 1.0 - 1e-8) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "cutoff %d misses %.3g of the unperturbed weight (limit 1e-8)", d, 1.0 - mass);
      throw TruncationTooSmall(buf);
    }
    for (double& x : p) x /= mass;
    w.modes.push_back(std::move(p));
  }
  return w;
}

namespace {

void require_positive_rates(const SystemParams& params) {
  params.validate();
  if (!(params.gamma1 > 0.0) || !(params.gamma2 > 0.0)) {
    throw InvalidArgument("perturbation theory needs gamma1 > 0 and gamma2 > 0");
  }
}

DensityMatrix product_of_weights(const FockSpace& space, const DiagonalWeights& w) {
  Eigen::VectorXd diag(space.size());
  for (Index s = 0; s < space.size(); ++s) {
    const auto occ = space.occupations(s);
    diag[s] = w[0][static_cast<size_t>(occ[0])] * w[1][static_cast<size_t>(occ[1])];
  }
  return DensityMatrix::diagonal(space, diag);
}

Index coherence_vec_index(const FockSpace& s, int n, int m) {
  const Index ket = s.index({n + 2, m - 1});
  const Index bra = s.index({n, m});
  return ket + s.size() * bra;
}

void check_denominator(const PerturbationTerm& t, const SystemParams& p) {
  const double scale = p.gamma1 + p.gamma2 + std::abs(p.delta) + std::abs(p.kerr1) + std::abs(p.kerr2);
  if (std::abs(t.lambda) <= 1e-14 * scale) {
    throw DegenerateDenominator("lambda vanishes for n = " + std::to_string(t.n) + ", m = " + std::to_string(t.m));
  }
}

// ket (n+2, m-1), bra (n, m) coefficient sqrt(m (n+1)(n+2)) of H_I.
double coupling_element(int n, int m) { return std::sqrt(static_cast<double>(m) * (n + 1) * (n + 2)); }

}  // namespace

DensityMatrix unperturbed_state(const SystemParams& params) {
  require_positive_rates(params);
  return product_of_weights(params.dims, unperturbed_weights(params.gamma1 / params.gamma2, params.dims));
}

cplx lambda_nm(int n, int m, const SystemParams& p) {
  if (m < 1 || n < 0) throw InvalidArgument("lambda_nm needs n >= 0 and m >= 1");
  const double gamma = 0.5 * p.gamma1 * (2.0 * (n + m) + 5.0) +
                       p.gamma2 * ((n + 2.0) * (n + 2.0) + (m - 1.0) * (m - 1.0) - 2.0 * (n + 3.0));
  const double detuning = p.delta - 2.0 * p.kerr1 * (2.0 * n + 1.0) + 2.0 * p.kerr2 * (m - 1.0);
  return {-gamma, detuning};
}

cplx lambda_numerical(int n, int m, const SystemParams& p, const SuperOperator& l0) {
  if (m < 1 || n < 0) throw InvalidArgument("lambda_numerical needs n >= 0 and m >= 1");
  if (l0.space() != p.dims) throw ShapeMismatch("L0 built on a different truncation");
  const Index k = coherence_vec_index(p.dims, n, m);
  return l0.matrix().coeff(k, k);
}

std::vector<LambdaDiscrepancy> validate_lambda(const SystemParams& params, double tol) {
  require_positive_rates(params);
  const auto l0 = build_unperturbed_liouvillian(params);
  std::vector<LambdaDiscrepancy> out;
  for (int n = 0; n + 2 < params.dims.dim(0); ++n) {
    for (int m = 1; m < params.dims.dim(1); ++m) {
      const cplx a = lambda_nm(n, m, params);
      const cplx b = lambda_numerical(n, m, params, l0);
      if (std::abs(a - b) > tol * std::max(1.0, std::abs(b))) out.push_back({n, m, a, b});
    }
  }
  return out;
}

std::vector<PerturbationTerm> perturbation_terms(const SystemParams& params, PerturbativeMode mode) {
  require_positive_rates(params);
  if (mode == PerturbativeMode::subspace_inverse) {
    throw InvalidArgument("subspace_inverse has no per-term denominators");
  }
  const auto w = unperturbed_weights(params.gamma1 / params.gamma2, params.dims);
  std::optional<SuperOperator> l0;
  if (mode == PerturbativeMode::numerical_lambda) l0 = build_unperturbed_liouvillian(params);
  std::vector<PerturbationTerm> terms;
  for (int n = 0; n + 2 < params.dims.dim(0); ++n) {
    for (int m = 1; m < params.dims.dim(1); ++m) {
      PerturbationTerm t;
      t.n = n;
      t.m = m;
      t.lambda = l0 ? lambda_numerical(n, m, params, *l0) : lambda_nm(n, m, params);
      t.weight_diff = w[0][static_cast<size_t>(n)] * w[1][static_cast<size_t>(m)] -
                      w[0][static_cast<size_t>(n + 2)] * w[1][static_cast<size_t>(m - 1)];
      terms.push_back(t);
    }
  }
  return terms;
}

namespace {

// Solves L0 x = -L_I rho0 on the block of coherences |n1+2, n2-1><n1, n2|.
DenseMatrix subspace_correction(const SystemParams& params) {
  const FockSpace& s = params.dims;
  const Index n = s.size();
  const DensityMatrix rho0 = unperturbed_state(params);
  const auto a1 = ladder(s, 0, Ladder::lower);
  const auto a2 = ladder(s, 1, Ladder::lower);
  const SparseOperator hi = (a1.adjoint() * a1.adjoint() * a2 + a1 * a1 * a2.adjoint()) * cplx(params.zeta);
  const DenseMatrix source = cplx(0.0, -1.0) * (hi * rho0.matrix() - (hi * rho0.matrix()).adjoint());

  std::vector<Index> block;
  for (Index bra = 0; bra < n; ++bra) {
    const auto ob = s.occupations(bra);
    if (ob[0] + 2 >= s.dim(0) || ob[1] < 1) continue;
    block.push_back(s.index({ob[0] + 2, ob[1] - 1}) + n * bra);
  }
  std::sort(block.begin(), block.end());
  const auto l0 = build_unperturbed_liouvillian(params);
  const SparseMatrix sub = l0.restricted(block);
  const Vector vs = vectorize(source);
  Vector rhs(static_cast<Index>(block.size()));
  for (size_t k = 0; k < block.size(); ++k) rhs[static_cast<Index>(k)] = -vs[block[k]];

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(sub);
  if (lu.info() != Eigen::Success) throw DegenerateDenominator("L0 is singular on the coherence block");
  const Vector x = lu.solve(rhs);

  Vector full = Vector::Zero(n * n);
  for (size_t k = 0; k < block.size(); ++k) full[block[k]] = x[static_cast<Index>(k)];
  DenseMatrix upper = unvectorize(full, n);
  return upper + upper.adjoint();
}

}  // namespace

DenseMatrix first_order_density(const SystemParams& params, PerturbativeMode mode) {
  require_positive_rates(params);
  if (mode == PerturbativeMode::subspace_inverse) return subspace_correction(params);
  const FockSpace& s = params.dims;
  DenseMatrix rho1 = DenseMatrix::Zero(s.size(), s.size());
  for (const auto& t : perturbation_terms(params, mode)) {
    check_denominator(t, params);
    const cplx v = cplx(0.0, params.zeta) * coupling_element(t.n, t.m) * t.weight_diff / t.lambda;
    const Index ket = s.index({t.n + 2, t.m - 1});
    const Index bra = s.index({t.n, t.m});
    rho1(ket, bra) = v;
    rho1(bra, ket) = std::conj(v);
  }
  return rho1;
}

cplx perturbative_sync(const SystemParams& params, PerturbativeMode mode) {
  require_positive_rates(params);
  const auto w = unperturbed_weights(params.gamma1 / params.gamma2, params.dims);
  const double norm = std::sqrt(w.mean(0) * w.mean(1));
  if (mode == PerturbativeMode::subspace_inverse) {
    const FockSpace& s = params.dims;
    const auto a1 = ladder(s, 0, Ladder::lower);
    const auto a2 = ladder(s, 1, Ladder::lower);
    return trace_product((a1.adjoint() * a1.adjoint() * a2).matrix(), subspace_correction(params)) / norm;
  }
  // Tr[a1^dag2 a2 rho1] picks up rho1(bra, ket) = conj of the stored coherence.
  cplx sum = 0.0;
  for (const auto& t : perturbation_terms(params, mode)) {
    check_denominator(t, params);
    const double c = static_cast<double>(t.m) * (t.n + 1) * (t.n + 2);
    sum += t.weight_diff * cplx(0.0, params.zeta) * c / t.lambda;
  }
  return std::conj(sum) / norm;
}

}  // namespace qvdp
