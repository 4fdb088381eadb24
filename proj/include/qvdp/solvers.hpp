#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qvdp/model.hpp"
#include "qvdp/ode.hpp"

namespace qvdp {

enum class SolveMethod { direct, iterative };

struct SolveOptions {
  SolveMethod method = SolveMethod::direct;
  double tol = 1e-10;  // residual infinity-norm bound on L rho
  int max_iter = 20000;
  bool use_symmetry = true;  // solve per charge sector when L carries labels
  OdeOptions ode{};
};

struct SteadyStateSolution {
  DensityMatrix rho;
  double residual = 0.0;
  Index system_size = 0;
  int iterations = 0;
};

// The trace condition replaces the linear-system row belonging to rho(0,0).
SteadyStateSolution solve_steady_state(const SuperOperator& liouvillian, const SolveOptions& opts = {});
DensityMatrix steady_state(const SuperOperator& liouvillian, const SolveOptions& opts = {});

double steady_state_residual(const SuperOperator& liouvillian, const DenseMatrix& rho);

struct AdaptiveTruncation {
  int start = 20;
  int step = 4;
  int max = 64;
  double tail_tol = 1e-6;
  int tail_levels = 2;
};

struct AdaptiveSolution {
  SteadyStateSolution solution;
  SystemParams params;  // with the truncation that met the tail bound
  double tail = 0.0;
};

// Grows the per-mode cutoff until the population of the top tail_levels Fock
// levels of each mode falls below tail_tol.
AdaptiveSolution adaptive_steady_state(SystemParams params, const SolveOptions& opts = {},
                                       const AdaptiveTruncation& truncation = {});

double tail_population(const DensityMatrix& rho, int levels = 2);

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  OdeStats stats;
};

Trajectory evolve(const SuperOperator& liouvillian, const DensityMatrix& rho0, std::span<const double> times,
                  const SolveOptions& opts = {});

// Observer for functional series: (output index, value so far) -> keep going.
using SeriesStop = std::function<bool(size_t, cplx)>;

/// Tr[A exp(L t) X0] at each requested time, propagated one charge block at a time.
std::vector<cplx> propagate_functional(const SuperOperator& liouvillian, const DenseMatrix& x0,
                                       const SparseMatrix& observable, std::span<const double> times,
                                       const SolveOptions& opts = {}, const SeriesStop& keep_going = {},
                                       OdeStats* stats = nullptr);

/// Quantum-regression correlation Tr[A exp(L t)(B rho_ss)].
std::vector<cplx> two_time_correlation(const SuperOperator& liouvillian, const DensityMatrix& rho_ss,
                                       const SparseOperator& a, const SparseOperator& b,
                                       std::span<const double> times, const SolveOptions& opts = {});

}  // namespace qvdp
