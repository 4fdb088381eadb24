#include "qvdp/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "qvdp/errors.hpp"

namespace qvdp {

namespace {

constexpr double kMinPopulation = 1e-14;

void require_two_modes(const DensityMatrix& rho) {
  if (rho.space().modes() != 2) throw InvalidArgument("observable needs a two-mode state");
}

std::pair<double, double> populations_checked(const DensityMatrix& rho) {
  const auto [n1, n2] = phonon_numbers(rho);
  if (n1 < kMinPopulation || n2 < kMinPopulation) {
    throw ZeroPopulation("a mode population vanishes (n1 = " + std::to_string(n1) + ", n2 = " + std::to_string(n2) +
                         ")");
  }
  return {n1, n2};
}

void require_single_mode(const DensityMatrix& rho) {
  if (rho.space().modes() != 1) throw InvalidArgument("expected a single-mode reduced state");
}

}  // namespace

std::pair<double, double> phonon_numbers(const DensityMatrix& rho) {
  require_two_modes(rho);
  const FockSpace& s = rho.space();
  return {expectation(number(s, 0), rho).real(), expectation(number(s, 1), rho).real()};
}

SyncResult sync_measure(const DensityMatrix& rho) {
  const auto [n1, n2] = populations_checked(rho);
  const FockSpace& s = rho.space();
  const auto a1 = ladder(s, 0, Ladder::lower);
  const auto a2 = ladder(s, 1, Ladder::lower);
  const cplx v = expectation(a1.adjoint() * a1.adjoint() * a2, rho) / std::sqrt(n1 * n2);
  return {std::abs(v), std::arg(v), v};
}

double cross_g2(const DensityMatrix& rho) {
  const auto [n1, n2] = populations_checked(rho);
  const FockSpace& s = rho.space();
  return expectation(number(s, 0) * number(s, 1), rho).real() / (n1 * n2);
}

std::vector<double> PhaseGrid::axis() const {
  if (!(extent > 0.0) || points < 2) throw InvalidArgument("phase grid needs extent > 0 and >= 2 points");
  std::vector<double> v(static_cast<size_t>(points));
  for (int k = 0; k < points; ++k) v[static_cast<size_t>(k)] = -extent + 2.0 * extent * k / (points - 1);
  return v;
}

double PhaseGrid::spacing() const { return 2.0 * extent / (points - 1); }

double wigner_at(const DensityMatrix& rho_single, double x, double p) {
  require_single_mode(rho_single);
  const DenseMatrix& r = rho_single.matrix();
  const int d = static_cast<int>(r.rows());
  const cplx two_a = std::sqrt(2.0) * cplx(x, p);
  const double b = 2.0 * (x * x + p * p);
  std::vector<double> lag(static_cast<size_t>(d));
  double total = 0.0;
  cplx power = 1.0;  // (2A)^k / sqrt(k!) for the m = 0 entry of each band
  for (int k = 0; k < d; ++k) {
    if (k > 0) power *= two_a / std::sqrt(static_cast<double>(k));
    const int len = d - k;
    // Generalized Laguerre L_m^k(b) by the three-term recurrence.
    lag[0] = 1.0;
    if (len > 1) lag[1] = 1.0 + k - b;
    for (int m = 1; m + 1 < len; ++m) {
      lag[static_cast<size_t>(m + 1)] =
          ((2.0 * m + 1.0 + k - b) * lag[static_cast<size_t>(m)] - (m + k) * lag[static_cast<size_t>(m - 1)]) / (m + 1);
    }
    cplx band = 0.0;
    double root = 1.0;  // sqrt(m! k! / (m+k)!)
    for (int m = 0; m < len; ++m) {
      if (m > 0) root *= std::sqrt(static_cast<double>(m) / (m + k));
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      band += r(m, m + k) * sign * root * lag[static_cast<size_t>(m)];
    }
    band *= power;
    total += k == 0 ? band.real() : 2.0 * band.real();
  }
  return total * std::exp(-0.5 * b) / std::numbers::pi;
}

WignerGrid wigner(const DensityMatrix& rho_single, const PhaseGrid& grid) {
  require_single_mode(rho_single);
  WignerGrid w;
  w.x = grid.axis();
  w.p = w.x;
  const auto n = static_cast<Index>(w.x.size());
  w.values.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      w.values(i, j) = wigner_at(rho_single, w.x[static_cast<size_t>(j)], w.p[static_cast<size_t>(i)]);
  const double h = grid.spacing();
  w.normalization = w.values.sum() * h * h;
  if (std::abs(w.normalization - 1.0) > 0.01) {
    throw GridTooCoarse("Wigner grid integrates to " + std::to_string(w.normalization) +
                        "; enlarge the extent or add points");
  }
  return w;
}

double wigner_rms_radius(const WignerGrid& w) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < w.values.rows(); ++i) {
    for (Index j = 0; j < w.values.cols(); ++j) {
      const double x = w.x[static_cast<size_t>(j)], p = w.p[static_cast<size_t>(i)];
      num += (x * x + p * p) * w.values(i, j);
      den += w.values(i, j);
    }
  }
  if (!(den > 0.0)) throw InvalidArgument("Wigner grid has no positive mass");
  return std::sqrt(num / den);
}

double quadrature_density(const DensityMatrix& rho_single, double x) {
  require_single_mode(rho_single);
  const DenseMatrix& r = rho_single.matrix();
  const auto d = static_cast<size_t>(r.rows());
  std::vector<double> psi(d);
  psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (d > 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (size_t k = 1; k + 1 < d; ++k) {
    psi[k + 1] = std::sqrt(2.0 / (k + 1)) * x * psi[k] - std::sqrt(static_cast<double>(k) / (k + 1)) * psi[k - 1];
  }
  double v = 0.0;
  for (size_t m = 0; m < d; ++m)
    for (size_t n = 0; n < d; ++n) v += psi[m] * psi[n] * r(static_cast<Index>(m), static_cast<Index>(n)).real();
  return v;
}

std::vector<double> resonance_detunings(double kerr, int n_max, int m_max) {
  if (!(kerr >= 0.0)) throw InvalidArgument("Kerr strength must be non-negative");
  if (n_max < 0 || m_max < 1) throw InvalidArgument("need n_max >= 0 and m_max >= 1");
  std::set<long> orders;
  for (int n = 0; n <= n_max; ++n)
    for (int m = 1; m <= m_max; ++m) orders.insert(2L * n - m + 2);
  std::vector<double> out;
  for (long k : orders) {
    const double v = 2.0 * kerr * static_cast<double>(k);
    if (out.empty() || v != out.back()) out.push_back(v);
  }
  return out;
}

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("empty frequency grid");
  for (size_t k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(grid[k])) throw InvalidArgument("non-finite frequency");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw InvalidArgument("frequency grid must be strictly increasing");
  }
}

// Rough bound on the oscillation frequencies present in the correlation.
double frequency_bound(const SystemParams& p, const SuperOperator& l) {
  double diag = 0.0;
  const SparseMatrix& m = l.matrix();
  for (Index k = 0; k < m.outerSize(); ++k) diag = std::max(diag, std::abs(m.coeff(k, k).imag()));
  const double d0 = p.dims.dim(0), d1 = p.dims.dim(1);
  return diag + 2.0 * std::abs(p.zeta) * d0 * std::sqrt(d1);
}

std::vector<double> resolvent_spectrum(const SuperOperator& l, const DenseMatrix& x0, const SparseOperator& adag,
                                       const std::vector<double>& omega, int mode, const SolveOptions& solve) {
  const Index n = l.space().size();
  std::vector<Index> block;
  SparseMatrix sub;
  if (solve.use_symmetry && l.has_charge()) {
    block = l.sector(-l.charge()[static_cast<size_t>(l.space().index(mode == 0 ? std::vector<int>{1, 0}
                                                                                  : std::vector<int>{0, 1}))]);
    sub = l.restricted(block);
  } else {
    block.resize(static_cast<size_t>(n * n));
    for (Index k = 0; k < n * n; ++k) block[static_cast<size_t>(k)] = k;
    sub = l.matrix();
  }
  const auto m = static_cast<Index>(block.size());
  const Vector xv = vectorize(x0);
  const Vector fv = vectorize(DenseMatrix(SparseMatrix(adag.matrix().transpose())));
  Vector rhs(m), f(m);
  for (Index k = 0; k < m; ++k) {
    rhs[k] = xv[block[static_cast<size_t>(k)]];
    f[k] = fv[block[static_cast<size_t>(k)]];
  }
  std::vector<double> out(omega.size());
  if (m <= 3000) {
    // Reduce once to Hessenberg form; each shift then costs one O(m^2) elimination.
    const Eigen::HessenbergDecomposition<DenseMatrix> hess(-DenseMatrix(sub));
    const DenseMatrix q = hess.matrixQ();
    using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMatrix h = hess.matrixH();
    const Vector qb = q.adjoint() * rhs;
    const Vector qf = q.transpose() * f;
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    RowMatrix a;
    Vector c;
    for (size_t k = 0; k < omega.size(); ++k) {
      a = h;
      a.diagonal().array() += cplx(0.0, omega[k]);
      c = qb;
      for (Index r = 0; r + 1 < m; ++r) {
        if (std::abs(a(r + 1, r)) > std::abs(a(r, r))) {
          a.row(r).tail(m - r).swap(a.row(r + 1).tail(m - r));
          std::swap(c[r], c[r + 1]);
        }
        if (a(r + 1, r) == cplx(0.0)) continue;
        const cplx l = a(r + 1, r) / a(r, r);
        a.row(r + 1).tail(m - r - 1) -= l * a.row(r).tail(m - r - 1);
        c[r + 1] -= l * c[r];
      }
      if (a.diagonal().cwiseAbs().minCoeff() <= 1e-13 * scale) {
        throw NonUniqueSteadyState("resolvent (i w - L) is singular");
      }
      const Vector y = a.triangularView<Eigen::Upper>().solve(c);
      out[k] = 2.0 * qf.cwiseProduct(y).sum().real();
    }
    return out;
  }
  SparseMatrix identity(m, m);
  identity.setIdentity();
  SparseMatrix base = -sub + identity * cplx(0.0);  // keeps an explicit diagonal
  base.makeCompressed();
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(base);
  for (size_t k = 0; k < omega.size(); ++k) {
    SparseMatrix a = base;
    for (Index j = 0; j < m; ++j) a.coeffRef(j, j) += cplx(0.0, omega[k]);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw NonUniqueSteadyState("resolvent (i w - L) is singular");
    const Vector x = lu.solve(rhs);
    out[k] = 2.0 * f.cwiseProduct(x).sum().real();
  }
  return out;
}

}  // namespace

Spectrum power_spectrum(const SystemParams& params, const SuperOperator& liouvillian, const DensityMatrix& rho_ss,
                        int mode, std::span<const double> freq_grid, const SpectrumOptions& opts) {
  if (mode != 0 && mode != 1) throw InvalidArgument("spectrum mode must be 0 or 1");
  if (rho_ss.space() != liouvillian.space() || params.dims != liouvillian.space()) {
    throw ShapeMismatch("spectrum inputs live on different spaces");
  }
  if (!(params.gamma1 > 0.0)) throw InvalidArgument("spectra are reported in units of gamma1 > 0");
  if (!(opts.window_scale >= 1.0)) throw InvalidArgument("window_scale must be >= 1");
  if (!(opts.decay_tol > 0.0) || !(opts.target_tol > 0.0)) throw InvalidArgument("decay tolerances must be positive");
  check_grid(freq_grid);

  const FockSpace& s = liouvillian.space();
  const auto a = ladder(s, mode, Ladder::lower);
  const auto adag = a.adjoint();
  const DenseMatrix x0 = a.matrix() * rho_ss.matrix();
  const double offset = mode == 1 ? params.delta : 0.0;

  Spectrum out;
  out.freqs.assign(freq_grid.begin(), freq_grid.end());
  out.population = expectation(number(s, mode), rho_ss).real();
  std::vector<double> omega(freq_grid.size());
  for (size_t k = 0; k < omega.size(); ++k) omega[k] = params.gamma1 * freq_grid[k] + offset;

  if (opts.method == SpectrumMethod::resolvent) {
    out.values = resolvent_spectrum(liouvillian, x0, adag, omega, mode, opts.solve);
    return out;
  }

  double wmax = 1.0;
  for (double w : omega) wmax = std::max(wmax, std::abs(w));
  const double dt = opts.dt > 0.0 ? opts.dt
                                  : std::min(0.02 / params.gamma1,
                                             std::numbers::pi / (4.0 * std::max(wmax, frequency_bound(params, liouvillian))));
  const auto steps = static_cast<size_t>(std::ceil(opts.max_time / dt));
  std::vector<double> times(steps + 1);
  for (size_t k = 0; k <= steps; ++k) times[k] = static_cast<double>(k) * dt;

  // Window: stay below a threshold for a hold time proportional to the decay
  // time, so beats in |C| that briefly touch zero do not end the window.
  const double min_hold = 5.0 / params.gamma1;
  auto hold = [&](double t) { return std::max(min_hold, 0.25 * t); };
  double c0 = 0.0, last_above_target = 0.0, last_above_decay = 0.0;
  auto keep_going = [&](size_t k, cplx c) {
    const double mag = std::abs(c);
    if (k == 0) c0 = mag;
    if (c0 == 0.0) return false;
    const double t = times[k];
    if (mag >= opts.target_tol * c0) last_above_target = t;
    if (mag >= opts.decay_tol * c0) last_above_decay = t;
    return t < opts.window_scale * (last_above_target + hold(last_above_target));
  };
  // The absolute tolerance must sit well below the target decay level.
  SolveOptions solve = opts.solve;
  solve.ode.atol = std::min(solve.ode.atol, 1e-3 * opts.target_tol * x0.cwiseAbs().maxCoeff());
  const std::vector<cplx> c = propagate_functional(liouvillian, x0, adag.matrix(), times, solve, keep_going);
  out.dt = dt;
  if (c0 == 0.0) {
    out.values.assign(omega.size(), 0.0);
    return out;
  }
  const double t_end = times[c.size() - 1];
  if (t_end - last_above_decay < hold(last_above_decay)) {
    throw InsufficientDecay("correlation still above " + std::to_string(opts.decay_tol) + " |C(0)| at t = " +
                            std::to_string(t_end));
  }
  out.window = t_end;

  // Trapezoid rule for 2 Re int_0^T e^{-i w t} C(t) dt.
  out.values.resize(omega.size());
  const size_t last = c.size() - 1;
  for (size_t k = 0; k < omega.size(); ++k) {
    const cplx step = std::polar(1.0, -omega[k] * dt);
    cplx phase = 1.0;
    cplx acc = 0.5 * c[0];
    for (size_t j = 1; j <= last; ++j) {
      phase = (j % 512 == 0) ? std::polar(1.0, -omega[k] * times[j]) : phase * step;
      acc += (j == last ? 0.5 : 1.0) * c[j] * phase;
    }
    out.values[k] = 2.0 * dt * acc.real();
  }
  return out;
}

Spectrum power_spectrum(const SystemParams& params, int mode, std::span<const double> freq_grid,
                        const SpectrumOptions& opts) {
  const auto l = build_liouvillian(params);
  const auto rho = steady_state(l, opts.solve);
  return power_spectrum(params, l, rho, mode, freq_grid, opts);
}

double spectrum_integral(const Spectrum& s, double gamma1) {
  double acc = 0.0;
  for (size_t k = 1; k < s.freqs.size(); ++k) {
    acc += 0.5 * (s.values[k] + s.values[k - 1]) * (s.freqs[k] - s.freqs[k - 1]);
  }
  return gamma1 * acc / (2.0 * std::numbers::pi);
}

std::vector<size_t> local_maxima(std::span<const double> values, double min_fraction) {
  std::vector<size_t> out;
  if (values.size() < 3) return out;
  const double top = *std::max_element(values.begin(), values.end());
  for (size_t k = 1; k + 1 < values.size(); ++k) {
    if (values[k] > values[k - 1] && values[k] > values[k + 1] && values[k] >= min_fraction * top) out.push_back(k);
  }
  return out;
}

}  // namespace qvdp
