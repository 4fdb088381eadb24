#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qvdp/model.hpp"
#include "qvdp/solvers.hpp"

namespace qvdp {

struct SyncResult {
  double magnitude = 0.0;
  double phase = 0.0;  // principal value of arg S, in (-pi, pi]
  cplx value;
};

// S = <a1^dag a1^dag a2> / sqrt(<n1><n2>); throws ZeroPopulation if either population < 1e-14.
SyncResult sync_measure(const DensityMatrix& rho);

// Zero-delay cross correlation <n1 n2> / (<n1><n2>).
double cross_g2(const DensityMatrix& rho);

std::pair<double, double> phonon_numbers(const DensityMatrix& rho);

/// Square phase-space grid [-extent, extent]^2 with `points` samples per axis.
struct PhaseGrid {
  double extent = 4.0;
  int points = 101;

  std::vector<double> axis() const;
  double spacing() const;
};

/// W(x, p) with a = (x + i p)/sqrt(2); values(i, j) is at (x_j, p_i).
struct WignerGrid {
  std::vector<double> x;
  std::vector<double> p;
  Eigen::MatrixXd values;
  double normalization = 0.0;  // Riemann sum of W dx dp
};

// Laguerre-series evaluation for a single-mode state. Throws GridTooCoarse
// when the grid integral misses 1 by more than 1%.
WignerGrid wigner(const DensityMatrix& rho_single, const PhaseGrid& grid);
double wigner_at(const DensityMatrix& rho_single, double x, double p);

// sqrt(<x^2 + p^2>_W) on the grid.
double wigner_rms_radius(const WignerGrid& w);

// <x|rho|x> for the quadrature x = (a + a^dag)/sqrt(2).
double quadrature_density(const DensityMatrix& rho_single, double x);

// Sorted distinct Delta = 2K(2n - m + 2), 0 <= n <= n_max, 1 <= m <= m_max.
std::vector<double> resonance_detunings(double kerr, int n_max, int m_max);

enum class SpectrumMethod { time_domain, resolvent };

struct SpectrumOptions {
  SpectrumMethod method = SpectrumMethod::time_domain;
  double decay_tol = 1e-4;     // |C(T)| must fall below this fraction of |C(0)|
  double target_tol = 1e-8;    // integration continues to this level when reachable
  double window_scale = 1.0;   // multiplies the window found from the decay rule
  double max_time = 1000.0;    // in units of 1/gamma1
  double dt = 0.0;             // 0 selects a sampling step automatically
  SolveOptions solve{};
};

/// P_ii on the dimensionless axis w~ = (w - w_i)/gamma1.
struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> values;
  double population = 0.0;  // C(0) = <a_i^dag a_i>
  double window = 0.0;      // time-domain duration used (0 in resolvent mode)
  double dt = 0.0;
};

// P(w) = 2 Re int_0^inf e^{-i w t} <a^dag(t) a(0)> dt from the regression
// correlation; mode is 0 or 1. Throws InsufficientDecay when the correlation
// does not decay to decay_tol within max_time.
Spectrum power_spectrum(const SystemParams& params, int mode, std::span<const double> freq_grid,
                        const SpectrumOptions& opts = {});

// Same, reusing a known steady state.
Spectrum power_spectrum(const SystemParams& params, const SuperOperator& liouvillian, const DensityMatrix& rho_ss,
                        int mode, std::span<const double> freq_grid, const SpectrumOptions& opts = {});

// (gamma1 / 2 pi) * trapezoid integral of P over the w~ grid.
double spectrum_integral(const Spectrum& s, double gamma1);

// Strict interior local maxima above min_fraction * global maximum.
std::vector<size_t> local_maxima(std::span<const double> values, double min_fraction = 1e-3);

}  // namespace qvdp
