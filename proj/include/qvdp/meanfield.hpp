#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qvdp/model.hpp"

namespace qvdp {

struct MeanFieldState {
  cplx alpha1;
  cplx alpha2;
};

struct PolarState {
  double r1 = 0.0;
  double r2 = 0.0;
  double phi = 0.0;  // theta2 - 2 theta1
};

// Rotating-frame mean-field equations (mode 1 at omega1, mode 2 at 2 omega1).
MeanFieldState mean_field_rhs(const MeanFieldState& s, const SystemParams& p);

// (r1', r2', phi'). Throws SingularPhase at r2 = 0 where phi' is undefined.
PolarState polar_rhs(const PolarState& s, const SystemParams& p);

// Ascending coefficients of the fixed-point quintic in z = r1^2 / r2^2:
//   c zeta^2 (z+2)(z^2+2)(z-4)^2 - gamma1^2/4 (z-1)^2 (z-4)^2
//   - (Delta (z^2+2) + 2c (z+2)(K2 - 2 K1 z))^2,   c = gamma1 / (2 gamma2).
std::array<double, 6> quintic_coefficients(const SystemParams& p);

// |q(z)| / sum_k |a_k| |z|^k with q evaluated in the factored form above.
double quintic_residual(double z, const SystemParams& p);

// Positive real roots from the companion matrix, Newton-polished and deduplicated.
std::vector<double> quintic_roots(const SystemParams& p);

enum class Stability { stable, unstable, marginal };
enum class PhaseSource { formula, degenerate_fallback };

struct PolarFixedPoint {
  double r1 = 0.0;
  double r2 = 0.0;
  double phi = 0.0;
  double z = 0.0;
  Stability stability = Stability::unstable;
  std::vector<cplx> eigenvalues;
  // degenerate_fallback: the arctangent for phi was 0/0 and the branch was
  // found from sin(phi) alone (the critical-phase pair at Delta = K = 0, z = 4).
  PhaseSource phase_source = PhaseSource::formula;
  double residual = 0.0;

  bool stable() const { return stability == Stability::stable; }
  PolarState state() const { return {r1, r2, phi}; }
};

struct StabilityResult {
  Stability stability = Stability::unstable;
  std::vector<cplx> eigenvalues;
};

// Central-difference Jacobian of polar_rhs (step 1e-6 relative); stable iff all
// real parts < -1e-9, marginal if the largest real part is within 1e-9 of zero.
// Throws ResidualTooLarge if the point is not a fixed point to 1e-9.
StabilityResult classify_stability(const PolarState& fp, const SystemParams& p);

// The trivial fixed point alpha1 = alpha2 = 0, from the 4x4 Cartesian Jacobian.
StabilityResult classify_origin(const SystemParams& p);

std::vector<PolarFixedPoint> fixed_points(const SystemParams& p);

// asin((1/2 zeta) sqrt(gamma1 gamma2 / 6)), or none below the critical coupling.
std::optional<double> critical_phase(double zeta, double gamma1, double gamma2);
double critical_coupling(double gamma1, double gamma2);

struct RelaxResult {
  PolarState state;
  bool converged = false;
  double time = 0.0;
};

// Integrates the polar equations until |rhs| < tol or t_max. Near a stable
// fixed point the last stretch is done by Newton.
RelaxResult relax_polar(const PolarState& start, const SystemParams& p, double t_max = 2000.0, double tol = 1e-10);

// max(|dr1|, |dr2|, |dphi| mod 2 pi)
double polar_distance(const PolarState& a, const PolarState& b);

struct TongueCell {
  double zeta = 0.0;
  double delta = 0.0;
  bool synchronized = false;
  bool marginal = false;
  std::vector<double> phases;            // every stable branch
  std::optional<double> canonical_phase;  // branch reached from r1 = r2 = 0.1, phi = 0
  std::string error;
};

struct TongueOptions {
  bool canonical_branch = true;
  double relax_time = 2000.0;
  int workers = 1;
};

// Row-major over zeta (outer) and delta (inner).
std::vector<TongueCell> arnold_tongue(const SystemParams& base, const std::vector<double>& zetas,
                                      const std::vector<double>& deltas, const TongueOptions& opts = {});

// Mean synchronized delta in the lowest zeta row holding any synchronized cell.
std::optional<double> tongue_tip(const std::vector<TongueCell>& cells);

inline constexpr PolarState kCanonicalStart{0.1, 0.1, 0.0};

}  // namespace qvdp
