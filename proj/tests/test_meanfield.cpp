#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qvdp/errors.hpp"
#include "qvdp/meanfield.hpp"
#include "qvdp/ode.hpp"

using namespace qvdp;

namespace {

SystemParams params(double zeta, double delta = 0.0, double kerr = 0.0) {
  SystemParams p;
  p.zeta = zeta;
  p.delta = delta;
  p.set_kerr(kerr);
  return p;
}

constexpr double kPi = std::numbers::pi;

bool has_root(const std::vector<double>& roots, double z, double tol) {
  return std::any_of(roots.begin(), roots.end(), [&](double r) { return std::abs(r - z) < tol; });
}

}  // namespace

TEST_CASE("origin is a fixed point and is unstable") {
  const auto d = mean_field_rhs({0.0, 0.0}, params(1.0, 0.5, 2.0));
  CHECK(d.alpha1 == cplx(0.0));
  CHECK(d.alpha2 == cplx(0.0));
  for (double zeta : {0.0, 0.3, 5.0}) CHECK(classify_origin(params(zeta, 1.0)).stability == Stability::unstable);
}

TEST_CASE("uncoupled amplitudes relax to the van der Pol radius") {
  SystemParams p = params(0.0);
  const double times[] = {200.0};
  Eigen::Vector4d end;
  integrate_dopri5<Eigen::Vector4d>(
      [&](double, const Eigen::Vector4d& x) -> Eigen::Vector4d {
        const auto d = mean_field_rhs({cplx(x[0], x[1]), cplx(x[2], x[3])}, p);
        return {d.alpha1.real(), d.alpha1.imag(), d.alpha2.real(), d.alpha2.imag()};
      },
      0.0, Eigen::Vector4d(0.05, 0.02, -0.01, 0.3), times,
      [&](size_t, const Eigen::Vector4d& x) {
        end = x;
        return true;
      });
  const double radius = std::sqrt(p.gamma1 / (2 * p.gamma2));
  CHECK(std::hypot(end[0], end[1]) == doctest::Approx(radius).epsilon(1e-8));
  CHECK(std::hypot(end[2], end[3]) == doctest::Approx(radius).epsilon(1e-8));
}

TEST_CASE("polar equations are the Cartesian ones in polar coordinates") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 1.5), ph(-kPi, kPi), par(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    SystemParams p = params(std::abs(par(rng)), par(rng));
    p.kerr1 = par(rng);
    p.kerr2 = par(rng);
    const double r1 = u(rng), r2 = u(rng), t1 = ph(rng), t2 = ph(rng);
    const cplx a1 = std::polar(r1, t1), a2 = std::polar(r2, t2);
    const auto d = mean_field_rhs({a1, a2}, p);
    const cplx w1 = d.alpha1 * std::polar(1.0, -t1), w2 = d.alpha2 * std::polar(1.0, -t2);
    const auto f = polar_rhs({r1, r2, t2 - 2 * t1}, p);
    CHECK(std::abs(f.r1 - w1.real()) < 1e-12);
    CHECK(std::abs(f.r2 - w2.real()) < 1e-12);
    CHECK(std::abs(f.phi - (w2.imag() / r2 - 2 * w1.imag() / r1)) < 1e-11);
  }
}

TEST_CASE("dynamics are equivariant under the relative-phase symmetry") {
  SystemParams p = params(1.3, 0.4, 0.8);
  const cplx a1(0.3, -0.2), a2(-0.1, 0.25);
  const cplx g = std::polar(1.0, 0.9);
  const auto d = mean_field_rhs({a1, a2}, p);
  const auto dr = mean_field_rhs({a1 * g, a2 * g * g}, p);
  CHECK(std::abs(dr.alpha1 - d.alpha1 * g) < 1e-14);
  CHECK(std::abs(dr.alpha2 - d.alpha2 * g * g) < 1e-14);
}

TEST_CASE("polar equation examples") {
  // At the critical coupling phi = pi/2 with r1 = 2 r2 = 2 sqrt(gamma1/6gamma2) is a fixed point.
  SystemParams p = params(critical_coupling(1.0, 10.0));
  const double r2 = std::sqrt(1.0 / 60.0);
  const auto f = polar_rhs({2 * r2, r2, kPi / 2}, p);
  CHECK(std::abs(f.r1) < 1e-15);
  CHECK(std::abs(f.r2) < 1e-15);
  CHECK(std::abs(f.phi) < 1e-15);

  SystemParams q = params(0.0, 0.7, 1.2);
  const auto g = polar_rhs({0.4, 0.3, 1.0}, q);
  CHECK(g.phi == doctest::Approx(-0.7 - 2 * 1.2 * (0.09 - 2 * 0.16)));
  CHECK_THROWS_AS(polar_rhs({0.4, 0.0, 1.0}, q), SingularPhase);
}

TEST_CASE("z = 4 is an exact quintic root without detuning or Kerr") {
  for (double zeta : {0.3, 1.0, 5.0, 10.0}) {
    const auto p = params(zeta);
    CHECK(quintic_residual(4.0, p) < 1e-12);
    CHECK(has_root(quintic_roots(p), 4.0, 1e-6));
  }
}

TEST_CASE("quintic roots agree with an independent companion solve") {
  // Frozen from numpy.roots on the expanded polynomial (and the cubic factor).
  const auto r = quintic_roots(params(0.3));
  for (double z : {0.65871038, 1.52350238, 4.0, 51.37334279}) CHECK(has_root(r, z, 1e-7));
  CHECK(r.size() == 4);
  // zeta = 5: the cubic factor has no positive roots.
  const auto r5 = quintic_roots(params(5.0));
  REQUIRE(r5.size() == 1);
  CHECK(r5[0] == doctest::Approx(4.0).epsilon(1e-6));
  for (double z : r) CHECK(quintic_residual(z, params(0.3)) < 1e-12);
}

TEST_CASE("roots move continuously with detuning") {
  std::vector<double> prev = quintic_roots(params(5.0, -0.1));
  for (int k = -9; k <= 10; ++k) {
    const auto cur = quintic_roots(params(5.0, 0.01 * k));
    for (double z : cur) {
      double best = INFINITY;
      for (double q : prev) best = std::min(best, std::abs(z - q));
      CHECK(best < 0.05);
    }
    prev = cur;
  }
}

TEST_CASE("fixed point amplitudes at z = 4") {
  const auto fps = fixed_points(params(5.0));
  REQUIRE(fps.size() == 2);
  for (const auto& fp : fps) {
    CHECK(fp.r2 == doctest::Approx(std::sqrt(1.0 / 60.0)).epsilon(1e-9));
    CHECK(std::abs(fp.r1 - 2 * fp.r2) < 1e-10);
    CHECK(std::abs(fp.r1 - std::sqrt(fp.z) * fp.r2) < 1e-10);
    CHECK(fp.residual < 1e-9);
    CHECK(fp.phase_source == PhaseSource::degenerate_fallback);
  }
}

TEST_CASE("above the critical coupling both critical-phase branches are stable") {
  const double phi0 = *critical_phase(5.0, 1.0, 10.0);
  const auto fps = fixed_points(params(5.0));
  REQUIRE(fps.size() == 2);
  CHECK(fps[0].phi == doctest::Approx(phi0).epsilon(1e-9));
  CHECK(fps[1].phi == doctest::Approx(kPi - phi0).epsilon(1e-9));
  CHECK(fps[0].stable());
  CHECK(fps[1].stable());
}

TEST_CASE("below the critical coupling the pi/2 point is the unique stable one") {
  const auto fps = fixed_points(params(0.3));
  int stable = 0;
  for (const auto& fp : fps) {
    if (!fp.stable()) continue;
    ++stable;
    CHECK(fp.phi == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(fp.z == doctest::Approx(1.52350238).epsilon(1e-7));
  }
  CHECK(stable == 1);
}

TEST_CASE("just above the critical coupling the pi/2 point is unstable") {
  const auto fps = fixed_points(params(0.65));
  bool found = false;
  for (const auto& fp : fps) {
    if (std::abs(fp.phi - kPi / 2) < 1e-9) {
      found = true;
      CHECK(fp.stability == Stability::unstable);
    }
  }
  CHECK(found);
}

TEST_CASE("stability classification rejects non-fixed points") {
  CHECK_THROWS_AS(classify_stability({0.2, 0.1, 0.3}, params(1.0)), ResidualTooLarge);
  const auto fps = fixed_points(params(0.3));
  for (const auto& fp : fps) CHECK(classify_stability(fp.state(), params(0.3)).stability == fp.stability);
}

TEST_CASE("critical phase") {
  CHECK(critical_phase(5.0, 1.0, 10.0).value() == doctest::Approx(0.12946).epsilon(1e-4));
  CHECK(std::asin(std::sqrt(10.0 / 6.0) / 10.0) == doctest::Approx(*critical_phase(5.0, 1.0, 10.0)));
  const double zc = critical_coupling(1.0, 10.0);
  CHECK(zc == doctest::Approx(0.6455).epsilon(1e-4));
  CHECK(critical_phase(zc, 1.0, 10.0).value() == doctest::Approx(kPi / 2).epsilon(1e-7));
  CHECK(!critical_phase(0.99 * zc, 1.0, 10.0));
  CHECK(*critical_phase(1e6, 1.0, 10.0) < 1e-6);
  CHECK_THROWS_AS(critical_phase(0.0, 1.0, 10.0), InvalidArgument);
}

TEST_CASE("random initial conditions land on a reported stable branch") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> amp(0.02, 0.6), ph(-kPi, kPi);
  for (const auto& p : {params(5.0), params(2.0, 1.0), params(1.0, -0.5, 3.0)}) {
    const auto fps = fixed_points(p);
    for (int trial = 0; trial < 10; ++trial) {
      const auto r = relax_polar({amp(rng), amp(rng), ph(rng)}, p);
      REQUIRE(r.converged);
      double best = INFINITY;
      for (const auto& fp : fps)
        if (fp.stable()) best = std::min(best, polar_distance(fp.state(), r.state));
      CHECK(best < 1e-4);
    }
  }
}

TEST_CASE("fixed-point classification agrees with long-time integration") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> dz(0.1, 3.0), dd(-3.0, 3.0), dk(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double zeta = dz(rng), delta = dd(rng), kerr = dk(rng);
    const auto p = params(zeta, delta, kerr);
    const auto fps = fixed_points(p);
    const bool any_stable = std::any_of(fps.begin(), fps.end(), [](const auto& f) { return f.stable(); });
    const auto r = relax_polar(kCanonicalStart, p, 3000.0);
    if (r.converged) {
      double best = INFINITY;
      for (const auto& fp : fps)
        if (fp.stable()) best = std::min(best, polar_distance(fp.state(), r.state));
      CHECK(best < 1e-4);
    } else {
      // No convergence: either nothing is stable or the start sits in the basin of a
      // coexisting drifting orbit, which must then stay away from the stable points.
      for (const auto& fp : fps)
        if (fp.stable()) CHECK(polar_distance(fp.state(), r.state) > 1e-3);
    }
    if (!any_stable) CHECK(!r.converged);
  }
}

TEST_CASE("Arnold tongue structure") {
  std::vector<double> zetas, deltas;
  for (int k = 0; k < 21; ++k) zetas.push_back(0.05 + 0.15 * k);
  for (int k = -20; k <= 20; ++k) deltas.push_back(0.3 * k);
  SystemParams p;
  const auto cells = arnold_tongue(p, zetas, deltas, {.canonical_branch = true, .workers = 2});
  const size_t nd = deltas.size();
  for (size_t r = 0; r < zetas.size(); ++r)
    for (size_t c = 0; c < nd; ++c) {
      CHECK(cells[r * nd + c].error.empty());
      CHECK(cells[r * nd + c].synchronized == cells[r * nd + (nd - 1 - c)].synchronized);
    }
  // Delta = 0 column synchronized all the way down.
  for (size_t r = 0; r < zetas.size(); ++r) CHECK(cells[r * nd + nd / 2].synchronized);
  CHECK(std::abs(tongue_tip(cells).value()) < 1e-12);
  // Every synchronized cell reached from the canonical start names one of its branches.
  for (const auto& cell : cells) {
    if (!cell.canonical_phase) continue;
    CHECK(std::any_of(cell.phases.begin(), cell.phases.end(), [&](double ph) { return ph == *cell.canonical_phase; }));
  }

  p.set_kerr(10.0);
  const auto shifted = arnold_tongue(p, zetas, deltas, {.canonical_branch = false});
  CHECK(std::abs(tongue_tip(shifted).value()) > 0.3);
}

TEST_CASE("two-phonon loss rescales the tongue monotonically") {
  std::vector<double> zetas, deltas;
  for (int k = 0; k < 15; ++k) zetas.push_back(0.05 + 0.2 * k);
  for (int k = -15; k <= 15; ++k) deltas.push_back(0.4 * k);
  int previous = 1 << 30;
  for (double g2 : {2.5, 5.0, 10.0, 20.0}) {
    SystemParams p;
    p.gamma2 = g2;
    int count = 0;
    for (const auto& c : arnold_tongue(p, zetas, deltas, {.canonical_branch = false})) count += c.synchronized;
    CHECK(count < previous);
    previous = count;
  }
}
