#include "qvdp/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "qvdp/errors.hpp"
#include "qvdp/ode.hpp"
#include "qvdp/parallel.hpp"

namespace qvdp {

namespace {

double wrap_phase(double phi) {
  double w = std::remainder(phi, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

using Poly = std::vector<double>;  // ascending

Poly mul(const Poly& a, const Poly& b) {
  Poly c(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

Poly add(Poly a, const Poly& b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
  return a;
}

Poly scaled(Poly a, double s) {
  for (double& x : a) x *= s;
  return a;
}

void require_meanfield_rates(const SystemParams& p) {
  if (!(p.gamma1 > 0.0) || !(p.gamma2 > 0.0)) throw InvalidArgument("mean-field analysis needs gamma1, gamma2 > 0");
  if (!std::isfinite(p.delta) || !std::isfinite(p.zeta) || !std::isfinite(p.kerr1) || !std::isfinite(p.kerr2)) {
    throw InvalidArgument("parameters must be finite");
  }
}

struct QuinticTerms {
  double coupling, gain, detuning;
};

QuinticTerms quintic_terms(double z, const SystemParams& p) {
  const double c = p.gamma1 / (2.0 * p.gamma2);
  const double zm4 = (z - 4.0) * (z - 4.0);
  const double inner = p.delta * (z * z + 2.0) + 2.0 * c * (z + 2.0) * (p.kerr2 - 2.0 * p.kerr1 * z);
  return {c * p.zeta * p.zeta * (z + 2.0) * (z * z + 2.0) * zm4,
          0.25 * p.gamma1 * p.gamma1 * (z - 1.0) * (z - 1.0) * zm4, inner * inner};
}

double horner(const std::array<double, 6>& a, double z, double* deriv) {
  double v = 0.0, d = 0.0;
  for (int k = 5; k >= 0; --k) {
    d = d * z + v;
    v = v * z + a[static_cast<size_t>(k)];
  }
  if (deriv) *deriv = d;
  return v;
}

std::array<double, 3> as_array(const PolarState& s) { return {s.r1, s.r2, s.phi}; }
PolarState from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

double residual_norm(const PolarState& s, const SystemParams& p) {
  const PolarState f = polar_rhs(s, p);
  return std::max({std::abs(f.r1), std::abs(f.r2), std::abs(f.phi)});
}

Eigen::Matrix3d polar_jacobian(const PolarState& s, const SystemParams& p) {
  Eigen::Matrix3d j;
  const auto x = as_array(s);
  for (int k = 0; k < 3; ++k) {
    const double h = 1e-6 * std::max(std::abs(x[static_cast<size_t>(k)]), 1.0);
    auto xp = x, xm = x;
    xp[static_cast<size_t>(k)] += h;
    xm[static_cast<size_t>(k)] -= h;
    const auto fp = as_array(polar_rhs(from_array(xp), p));
    const auto fm = as_array(polar_rhs(from_array(xm), p));
    for (int r = 0; r < 3; ++r) j(r, k) = (fp[static_cast<size_t>(r)] - fm[static_cast<size_t>(r)]) / (2.0 * h);
  }
  return j;
}

StabilityResult classify_matrix(const Eigen::MatrixXd& j) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(j, false);
  StabilityResult out;
  double top = -INFINITY;
  for (Index k = 0; k < es.eigenvalues().size(); ++k) {
    out.eigenvalues.push_back(es.eigenvalues()[k]);
    top = std::max(top, es.eigenvalues()[k].real());
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(),
            [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  out.stability = top < -1e-9 ? Stability::stable : (top <= 1e-9 ? Stability::marginal : Stability::unstable);
  return out;
}

// Newton on polar_rhs; returns the polished point or nothing if it wanders off.
std::optional<PolarState> polish(PolarState s, const SystemParams& p) {
  for (int it = 0; it < 60; ++it) {
    if (!(s.r1 > 0.0) || !(s.r2 > 0.0)) return std::nullopt;
    const double res = residual_norm(s, p);
    if (res < 1e-14) break;
    const auto f = as_array(polar_rhs(s, p));
    const Eigen::Vector3d step = polar_jacobian(s, p).fullPivLu().solve(Eigen::Vector3d(f[0], f[1], f[2]));
    if (!step.allFinite()) return std::nullopt;
    s.r1 -= step[0];
    s.r2 -= step[1];
    s.phi -= step[2];
    if (step.cwiseAbs().maxCoeff() < 1e-15 * std::max(1.0, std::abs(s.phi))) break;
  }
  if (!(s.r1 > 0.0) || !(s.r2 > 0.0)) return std::nullopt;
  s.phi = wrap_phase(s.phi);
  return s;
}

}  // namespace

MeanFieldState mean_field_rhs(const MeanFieldState& s, const SystemParams& p) {
  const cplx i(0.0, 1.0);
  const double n1 = std::norm(s.alpha1), n2 = std::norm(s.alpha2);
  return {(-2.0 * i * p.kerr1 * n1 + 0.5 * p.gamma1 - p.gamma2 * n1) * s.alpha1 -
              2.0 * i * p.zeta * std::conj(s.alpha1) * s.alpha2,
          (-i * p.delta - 2.0 * i * p.kerr2 * n2 + 0.5 * p.gamma1 - p.gamma2 * n2) * s.alpha2 -
              i * p.zeta * s.alpha1 * s.alpha1};
}

PolarState polar_rhs(const PolarState& s, const SystemParams& p) {
  if (s.r2 == 0.0) throw SingularPhase("phase equation is singular at r2 = 0");
  const double r1s = s.r1 * s.r1, r2s = s.r2 * s.r2;
  const double sn = std::sin(s.phi), cs = std::cos(s.phi);
  return {(0.5 * p.gamma1 - p.gamma2 * r1s) * s.r1 + 2.0 * p.zeta * s.r1 * s.r2 * sn,
          (0.5 * p.gamma1 - p.gamma2 * r2s) * s.r2 - p.zeta * r1s * sn,
          -p.delta - 2.0 * (p.kerr2 * r2s - 2.0 * p.kerr1 * r1s) - p.zeta * ((r1s - 4.0 * r2s) / s.r2) * cs};
}

std::array<double, 6> quintic_coefficients(const SystemParams& p) {
  require_meanfield_rates(p);
  const double c = p.gamma1 / (2.0 * p.gamma2);
  const Poly zp2{2.0, 1.0}, zsq2{2.0, 0.0, 1.0}, zm1{-1.0, 1.0}, zm4{-4.0, 1.0};
  const Poly zm4sq = mul(zm4, zm4);
  const Poly coupling = scaled(mul(mul(zp2, zsq2), zm4sq), c * p.zeta * p.zeta);
  const Poly gain = scaled(mul(mul(zm1, zm1), zm4sq), 0.25 * p.gamma1 * p.gamma1);
  const Poly inner = add(scaled(zsq2, p.delta), scaled(mul(zp2, Poly{p.kerr2, -2.0 * p.kerr1}), 2.0 * c));
  const Poly q = add(add(coupling, gain, -1.0), mul(inner, inner), -1.0);
  std::array<double, 6> out{};
  for (size_t k = 0; k < q.size() && k < 6; ++k) out[k] = q[k];
  return out;
}

double quintic_residual(double z, const SystemParams& p) {
  require_meanfield_rates(p);
  const auto t = quintic_terms(z, p);
  const double v = t.coupling - t.gain - t.detuning;
  // Coefficient-magnitude scale; term magnitudes all vanish at a double root.
  const auto a = quintic_coefficients(p);
  double scale = 0.0, zk = 1.0;
  for (double c : a) {
    scale += std::abs(c) * zk;
    zk *= std::abs(z);
  }
  return scale == 0.0 ? 0.0 : std::abs(v) / scale;
}

std::vector<double> quintic_roots(const SystemParams& p) {
  const auto a = quintic_coefficients(p);
  int deg = 5;
  double big = 0.0;
  for (double x : a) big = std::max(big, std::abs(x));
  while (deg > 0 && std::abs(a[static_cast<size_t>(deg)]) <= 1e-14 * big) --deg;
  if (deg == 0) return {};
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int k = 0; k < deg; ++k) comp(0, k) = -a[static_cast<size_t>(deg - 1 - k)] / a[static_cast<size_t>(deg)];
  for (int k = 1; k < deg; ++k) comp(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);

  std::vector<double> roots;
  for (Index k = 0; k < es.eigenvalues().size(); ++k) {
    const cplx r = es.eigenvalues()[k];
    // Near-double roots come back as pairs with a tiny imaginary part.
    if (std::abs(r.imag()) > 1e-5 * std::max(1.0, std::abs(r)) || r.real() <= 0.0) continue;
    double z = r.real();
    double best_z = z, best = quintic_residual(z, p);
    for (int it = 0; it < 100 && best > 0.0; ++it) {
      double d = 0.0;
      const double v = horner(a, z, &d);
      if (d == 0.0) break;
      const double step = v / d;
      z -= step;
      if (!(z > 0.0)) break;
      const double res = quintic_residual(z, p);
      if (res < best) {
        best = res;
        best_z = z;
      }
      if (std::abs(step) <= 1e-16 * z) break;
    }
    if (best > 1e-9) continue;
    roots.push_back(best_z);
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> distinct;
  for (double z : roots) {
    if (distinct.empty() || std::abs(z - distinct.back()) > 1e-7 * std::max(1.0, z)) distinct.push_back(z);
  }
  return distinct;
}

StabilityResult classify_stability(const PolarState& fp, const SystemParams& p) {
  require_meanfield_rates(p);
  const double res = residual_norm(fp, p);
  if (!(res < 1e-9)) throw ResidualTooLarge("not a fixed point: residual " + std::to_string(res));
  return classify_matrix(polar_jacobian(fp, p));
}

StabilityResult classify_origin(const SystemParams& p) {
  require_meanfield_rates(p);
  // Real coordinates (Re a1, Im a1, Re a2, Im a2); the system is smooth at 0.
  auto f = [&](const Eigen::Vector4d& x) {
    const auto d = mean_field_rhs({cplx(x[0], x[1]), cplx(x[2], x[3])}, p);
    return Eigen::Vector4d(d.alpha1.real(), d.alpha1.imag(), d.alpha2.real(), d.alpha2.imag());
  };
  Eigen::Matrix4d j;
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    Eigen::Vector4d e = Eigen::Vector4d::Zero();
    e[k] = h;
    j.col(k) = (f(e) - f(-e)) / (2.0 * h);
  }
  return classify_matrix(j);
}

std::vector<PolarFixedPoint> fixed_points(const SystemParams& p) {
  require_meanfield_rates(p);
  if (p.zeta == 0.0) return {};  // no coupling, no locked phase
  struct Candidate {
    PolarState start;
    double z;
    PhaseSource source;
  };
  std::vector<Candidate> formula, fallback;
  for (double z : quintic_roots(p)) {
    const double u = p.gamma1 * (z + 2.0) / (2.0 * p.gamma2 * (z * z + 2.0));
    const double r2 = std::sqrt(u), r1 = std::sqrt(z) * r2;
    double s = p.gamma1 * (z - 1.0) / (2.0 * p.zeta * r2 * (z * z + 2.0));
    if (std::abs(s) > 1.0 + 1e-6) continue;
    s = std::clamp(s, -1.0, 1.0);
    const double cphi = p.zeta * r2 * (z - 4.0);
    const double d = p.delta + 2.0 * u * (p.kerr2 - 2.0 * p.kerr1 * z);
    const double scale = std::abs(p.delta) + std::abs(p.zeta) * r2 + 2.0 * u * (std::abs(p.kerr1) + std::abs(p.kerr2));
    if (std::abs(cphi) > 1e-9 * scale) {
      const double c = -d / cphi;
      if (std::abs(c) <= 1.0 + 1e-6) formula.push_back({{r1, r2, std::atan2(s, std::clamp(c, -1.0, 1.0))}, z, PhaseSource::formula});
    }
    const double c = std::sqrt(std::max(0.0, 1.0 - s * s));
    fallback.push_back({{r1, r2, std::atan2(s, c)}, z, PhaseSource::degenerate_fallback});
    fallback.push_back({{r1, r2, std::atan2(s, -c)}, z, PhaseSource::degenerate_fallback});
  }
  std::vector<PolarFixedPoint> out;
  auto consider = [&](const Candidate& cand) {
    const auto s = polish(cand.start, p);
    if (!s) return;
    const double res = residual_norm(*s, p);
    if (!(res < 1e-9)) return;
    for (const auto& f : out)
      if (polar_distance(f.state(), *s) < 1e-7) return;
    PolarFixedPoint fp;
    fp.r1 = s->r1;
    fp.r2 = s->r2;
    fp.phi = s->phi;
    fp.z = s->r1 * s->r1 / (s->r2 * s->r2);
    fp.residual = res;
    fp.phase_source = cand.source;
    const auto st = classify_matrix(polar_jacobian(*s, p));
    fp.stability = st.stability;
    fp.eigenvalues = st.eigenvalues;
    out.push_back(std::move(fp));
  };
  for (const auto& c : formula) consider(c);
  for (const auto& c : fallback) consider(c);
  std::sort(out.begin(), out.end(), [](const PolarFixedPoint& a, const PolarFixedPoint& b) {
    return a.z != b.z ? a.z < b.z : a.phi < b.phi;
  });
  return out;
}

double critical_coupling(double gamma1, double gamma2) { return 0.5 * std::sqrt(gamma1 * gamma2 / 6.0); }

std::optional<double> critical_phase(double zeta, double gamma1, double gamma2) {
  if (!(zeta > 0.0)) throw InvalidArgument("critical_phase needs zeta > 0");
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw InvalidArgument("critical_phase needs positive rates");
  const double arg = std::sqrt(gamma1 * gamma2 / 6.0) / (2.0 * zeta);
  if (arg > 1.0) return std::nullopt;
  return std::asin(arg);
}

double polar_distance(const PolarState& a, const PolarState& b) {
  return std::max({std::abs(a.r1 - b.r1), std::abs(a.r2 - b.r2), std::abs(wrap_phase(a.phi - b.phi))});
}

RelaxResult relax_polar(const PolarState& start, const SystemParams& p, double t_max, double tol) {
  require_meanfield_rates(p);
  std::vector<double> times;
  for (double t = 0.0; t <= t_max; t += 0.5) times.push_back(t);
  RelaxResult out{start, false, 0.0};
  auto rhs = [&](double, const Eigen::Vector3d& x) -> Eigen::Vector3d {
    const auto f = polar_rhs({x[0], x[1], x[2]}, p);
    return {f.r1, f.r2, f.phi};
  };
  auto observe = [&](size_t k, const Eigen::Vector3d& x) {
    out.state = {x[0], x[1], x[2]};
    out.time = times[k];
    if (!x.allFinite() || x[1] <= 0.0) return false;
    const double res = residual_norm(out.state, p);
    if (res < tol) {
      out.converged = true;
      return false;
    }
    // The integrator's rounding floor can sit above tol; finish with Newton once
    // the trajectory is close to an attracting point.
    if (res < 1e-7) {
      const auto fp = polish(out.state, p);
      if (fp && residual_norm(*fp, p) < tol && polar_distance(*fp, out.state) < 1e-5 &&
          classify_stability(*fp, p).stability == Stability::stable) {
        out.state = *fp;
        out.converged = true;
        return false;
      }
    }
    return true;
  };
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  try {
    integrate_dopri5<Eigen::Vector3d>(rhs, 0.0, Eigen::Vector3d(start.r1, start.r2, start.phi), times, observe, opt);
  } catch (const SingularPhase&) {
    out.converged = false;
  }
  out.state.phi = wrap_phase(out.state.phi);
  return out;
}

std::vector<TongueCell> arnold_tongue(const SystemParams& base, const std::vector<double>& zetas,
                                      const std::vector<double>& deltas, const TongueOptions& opts) {
  require_meanfield_rates(base);
  std::vector<TongueCell> cells(zetas.size() * deltas.size());
  parallel_for(cells.size(), opts.workers, [&](size_t idx) {
    TongueCell& cell = cells[idx];
    SystemParams p = base;
    p.zeta = zetas[idx / deltas.size()];
    p.delta = deltas[idx % deltas.size()];
    cell.zeta = p.zeta;
    cell.delta = p.delta;
    try {
      const auto fps = fixed_points(p);
      std::vector<PolarState> stable;
      for (const auto& fp : fps) {
        if (fp.stability == Stability::marginal) cell.marginal = true;
        if (!fp.stable()) continue;
        stable.push_back(fp.state());
        cell.phases.push_back(fp.phi);
      }
      cell.synchronized = !stable.empty();
      if (cell.synchronized && opts.canonical_branch) {
        const auto r = relax_polar(kCanonicalStart, p, opts.relax_time);
        if (r.converged) {
          for (const auto& s : stable) {
            if (polar_distance(s, r.state) < 1e-4) {
              cell.canonical_phase = s.phi;
              break;
            }
          }
        }
      }
    } catch (const Error& e) {
      cell.error = e.what();
    }
  });
  return cells;
}

std::optional<double> tongue_tip(const std::vector<TongueCell>& cells) {
  std::map<double, std::pair<double, int>> rows;
  for (const auto& c : cells) {
    if (!c.synchronized) continue;
    auto& r = rows[c.zeta];
    r.first += c.delta;
    r.second += 1;
  }
  if (rows.empty()) return std::nullopt;
  const auto& low = rows.begin()->second;
  return low.first / low.second;
}

}  // namespace qvdp
