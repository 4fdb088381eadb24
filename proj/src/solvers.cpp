#include "qvdp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "qvdp/errors.hpp"

namespace qvdp {

namespace {

std::vector<Index> all_indices(Index n) {
  std::vector<Index> idx(static_cast<size_t>(n));
  for (Index k = 0; k < n; ++k) idx[static_cast<size_t>(k)] = k;
  return idx;
}

struct Block {
  std::vector<Index> indices;
  SparseMatrix matrix;
};

// Charge blocks touched by x0; a single full block without labels.
std::vector<Block> blocks_for(const SuperOperator& l, const Vector& x0, bool use_symmetry) {
  std::vector<Block> blocks;
  if (!use_symmetry || !l.has_charge()) {
    blocks.push_back({all_indices(l.matrix().cols()), l.matrix()});
    return blocks;
  }
  std::map<int, bool> touched;
  for (Index k = 0; k < x0.size(); ++k) {
    if (x0[k] != cplx{0.0}) touched[l.element_charge(k)] = true;
  }
  for (const auto& [q, unused] : touched) {
    Block b;
    b.indices = l.sector(q);
    b.matrix = l.restricted(b.indices);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

DensityMatrix finalize_state(const FockSpace& space, DenseMatrix rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(rho);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin < -kPositivityTol) {
    throw InvalidDensityMatrix("steady state has eigenvalue " + std::to_string(lmin) + " below -1e-8");
  }
  if (lmin < 0.0) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    rho = eig.eigenvectors() * clipped.cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
  }
  return {space, std::move(rho)};
}

}  // namespace

double steady_state_residual(const SuperOperator& liouvillian, const DenseMatrix& rho) {
  return (liouvillian.matrix() * vectorize(rho)).cwiseAbs().maxCoeff();
}

SteadyStateSolution solve_steady_state(const SuperOperator& liouvillian, const SolveOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
  const Index n = liouvillian.space().size();
  const bool blocked = opts.use_symmetry && liouvillian.has_charge();
  const std::vector<Index> indices = blocked ? liouvillian.sector(0) : all_indices(n * n);
  const SparseMatrix sub = blocked ? liouvillian.restricted(indices) : liouvillian.matrix();
  const auto m = static_cast<Index>(indices.size());

  // Row 0 (the rho(0,0) equation) becomes the trace functional.
  std::vector<Eigen::Triplet<cplx>> entries;
  entries.reserve(static_cast<size_t>(sub.nonZeros() + n));
  for (Index col = 0; col < sub.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(sub, col); it; ++it) {
      if (it.row() != 0) entries.emplace_back(it.row(), col, it.value());
    }
  }
  for (Index k = 0; k < m; ++k) {
    const Index full = indices[static_cast<size_t>(k)];
    if (full % n == full / n) entries.emplace_back(0, k, 1.0);
  }
  SparseMatrix system(m, m);
  system.setFromTriplets(entries.begin(), entries.end());
  system.makeCompressed();
  Vector rhs = Vector::Zero(m);
  rhs[0] = 1.0;

  Vector x;
  int iterations = 0;
  if (opts.method == SolveMethod::direct) {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(system);
    lu.factorize(system);
    if (lu.info() != Eigen::Success) {
      throw NonUniqueSteadyState("trace-constrained Liouvillian is singular: " + lu.lastErrorMessage());
    }
    x = lu.solve(rhs);
    // A few rounds of iterative refinement with the same factors.
    for (int round = 0; round < 3; ++round) {
      const Vector r = rhs - system * x;
      if (r.cwiseAbs().maxCoeff() < 1e-3 * opts.tol) break;
      x += lu.solve(r);
      ++iterations;
    }
    if (!x.allFinite()) throw NonUniqueSteadyState("steady-state solve produced non-finite values");
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<cplx>> solver;
    solver.setTolerance(opts.tol * 1e-2);
    solver.setMaxIterations(opts.max_iter);
    solver.compute(system);
    x = solver.solve(rhs);
    iterations = static_cast<int>(solver.iterations());
    if (solver.info() != Eigen::Success || !x.allFinite()) {
      const double res = x.allFinite() ? (rhs - system * x).cwiseAbs().maxCoeff() : INFINITY;
      throw ConvergenceError("iterative steady-state solve did not converge after " +
                                 std::to_string(iterations) + " iterations",
                             res);
    }
  }

  Vector full = Vector::Zero(n * n);
  for (Index k = 0; k < m; ++k) full[indices[static_cast<size_t>(k)]] = x[k];
  DensityMatrix rho = finalize_state(liouvillian.space(), unvectorize(full, n));
  const double residual = steady_state_residual(liouvillian, rho.matrix());
  if (!(residual < opts.tol)) {
    throw ConvergenceError("steady state residual above tolerance", residual);
  }
  return {std::move(rho), residual, m, iterations};
}

DensityMatrix steady_state(const SuperOperator& liouvillian, const SolveOptions& opts) {
  return solve_steady_state(liouvillian, opts).rho;
}

double tail_population(const DensityMatrix& rho, int levels) {
  const FockSpace& space = rho.space();
  double worst = 0.0;
  for (int mode = 0; mode < space.modes(); ++mode) {
    const int d = space.dim(mode);
    double tail = 0.0;
    for (Index s = 0; s < space.size(); ++s) {
      if (space.occupations(s)[static_cast<size_t>(mode)] >= d - levels) tail += rho.matrix()(s, s).real();
    }
    worst = std::max(worst, tail);
  }
  return worst;
}

AdaptiveSolution adaptive_steady_state(SystemParams params, const SolveOptions& opts,
                                       const AdaptiveTruncation& truncation) {
  if (truncation.step < 1 || truncation.start < 4) throw InvalidArgument("invalid adaptive truncation settings");
  double tail = 1.0;
  for (int d = truncation.start; d <= truncation.max; d += truncation.step) {
    params.set_dims(d);
    SteadyStateSolution sol = solve_steady_state(build_liouvillian(params), opts);
    tail = tail_population(sol.rho, truncation.tail_levels);
    if (tail < truncation.tail_tol) return {std::move(sol), params, tail};
  }
  throw ConvergenceError("Fock truncation did not converge up to " + std::to_string(truncation.max) +
                             " levels per mode",
                         tail);
}

namespace {

void check_times(std::span<const double> times) {
  for (size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0.0)) throw InvalidArgument("times must be non-negative");
    if (k > 0 && !(times[k] > times[k - 1])) throw InvalidArgument("times must be strictly increasing");
  }
}

void merge(OdeStats& into, const OdeStats& s) {
  into.accepted += s.accepted;
  into.rejected += s.rejected;
  into.rhs_evaluations += s.rhs_evaluations;
  into.stiffness_detected = into.stiffness_detected || s.stiffness_detected;
  into.final_step = s.final_step;
}

}  // namespace

Trajectory evolve(const SuperOperator& liouvillian, const DensityMatrix& rho0, std::span<const double> times,
                  const SolveOptions& opts) {
  if (rho0.space() != liouvillian.space()) throw ShapeMismatch("initial state and Liouvillian spaces differ");
  check_times(times);
  const Index n = liouvillian.space().size();
  const Vector x0 = vectorize(rho0.matrix());
  std::vector<Vector> out(times.size(), Vector::Zero(n * n));
  Trajectory traj;
  for (const Block& block : blocks_for(liouvillian, x0, opts.use_symmetry)) {
    Vector xb(static_cast<Index>(block.indices.size()));
    for (size_t k = 0; k < block.indices.size(); ++k) xb[static_cast<Index>(k)] = x0[block.indices[k]];
    if (xb.cwiseAbs().maxCoeff() == 0.0) continue;
    const SparseMatrix& lb = block.matrix;
    auto rhs = [&lb](double, const Vector& v) -> Vector { return lb * v; };
    auto store = [&](size_t k, const Vector& v) {
      for (size_t j = 0; j < block.indices.size(); ++j) out[k][block.indices[j]] = v[static_cast<Index>(j)];
      return true;
    };
    merge(traj.stats, integrate_dopri5<Vector>(rhs, 0.0, xb, times, store, opts.ode));
  }
  traj.times.assign(times.begin(), times.end());
  traj.states.reserve(times.size());
  for (const Vector& v : out) traj.states.emplace_back(liouvillian.space(), unvectorize(v, n), 1e-6);
  return traj;
}

std::vector<cplx> propagate_functional(const SuperOperator& liouvillian, const DenseMatrix& x0,
                                       const SparseMatrix& observable, std::span<const double> times,
                                       const SolveOptions& opts, const SeriesStop& keep_going, OdeStats* stats) {
  const Index n = liouvillian.space().size();
  if (x0.rows() != n || x0.cols() != n || observable.rows() != n || observable.cols() != n) {
    throw ShapeMismatch("propagate_functional shape mismatch");
  }
  check_times(times);
  const Vector xv = vectorize(x0);
  // Tr[A X] = sum_k vec(A^T)_k vec(X)_k
  const Vector functional = vectorize(DenseMatrix(SparseMatrix(observable.transpose())));
  std::vector<cplx> series(times.size(), cplx{0.0});
  size_t produced = times.size();
  OdeStats total;
  for (const Block& block : blocks_for(liouvillian, xv, opts.use_symmetry)) {
    const auto m = static_cast<Index>(block.indices.size());
    Vector xb(m);
    Vector fb(m);
    for (Index k = 0; k < m; ++k) {
      xb[k] = xv[block.indices[static_cast<size_t>(k)]];
      fb[k] = functional[block.indices[static_cast<size_t>(k)]];
    }
    if (xb.cwiseAbs().maxCoeff() == 0.0 || fb.cwiseAbs().maxCoeff() == 0.0) continue;
    const SparseMatrix& lb = block.matrix;
    auto rhs = [&lb](double, const Vector& v) -> Vector { return lb * v; };
    size_t last = 0;
    auto observe = [&](size_t k, const Vector& v) {
      series[k] += fb.cwiseProduct(v).sum();
      last = k + 1;
      return !keep_going || keep_going(k, series[k]);
    };
    merge(total, integrate_dopri5<Vector>(rhs, 0.0, xb, times, observe, opts.ode));
    produced = std::min(produced, std::max(last, size_t{1}));
  }
  if (keep_going) series.resize(produced);
  if (stats) *stats = total;
  return series;
}

std::vector<cplx> two_time_correlation(const SuperOperator& liouvillian, const DensityMatrix& rho_ss,
                                       const SparseOperator& a, const SparseOperator& b,
                                       std::span<const double> times, const SolveOptions& opts) {
  if (rho_ss.space() != liouvillian.space() || a.space() != rho_ss.space() || b.space() != rho_ss.space()) {
    throw ShapeMismatch("correlation operands live on different spaces");
  }
  const double residual = steady_state_residual(liouvillian, rho_ss.matrix());
  if (residual > 1e-6) {
    throw InvalidArgument("rho_ss is not a steady state of L (residual " + std::to_string(residual) + ")");
  }
  const DenseMatrix x0 = b.matrix() * rho_ss.matrix();
  return propagate_functional(liouvillian, x0, a.matrix(), times, opts);
}

}  // namespace qvdp
