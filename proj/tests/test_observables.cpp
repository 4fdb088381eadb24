#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "qvdp/errors.hpp"
#include "qvdp/observables.hpp"
#include "qvdp/perturbation.hpp"

using namespace qvdp;

namespace {

SystemParams params(int d, double zeta) {
  SystemParams p;
  p.set_dims(d);
  p.zeta = zeta;
  return p;
}

DensityMatrix coherent(int d, cplx alpha) {
  FockSpace s({d});
  Vector v(d);
  double f = 1.0;
  for (int n = 0; n < d; ++n) {
    if (n > 0) f *= std::sqrt(static_cast<double>(n));
    v[n] = std::pow(alpha, n) / f;
  }
  return DensityMatrix::pure(s, v);
}

}  // namespace

TEST_CASE("sync measure examples") {
  FockSpace s({4, 4});
  Vector psi = Vector::Zero(16);
  psi[s.index({0, 1})] = 1.0;
  psi[s.index({2, 0})] = 1.0;
  const auto r = sync_measure(DensityMatrix::pure(s, psi));
  CHECK(r.magnitude == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r.phase) < 1e-12);

  Eigen::VectorXd w = Eigen::VectorXd::Constant(16, 1.0 / 16);
  CHECK(sync_measure(DensityMatrix::diagonal(s, w)).magnitude == 0.0);
  CHECK_THROWS_AS(sync_measure(DensityMatrix::basis(s, {0, 0})), ZeroPopulation);
  CHECK_THROWS_AS(cross_g2(DensityMatrix::basis(s, {1, 0})), ZeroPopulation);
}

TEST_CASE("sync measure is invariant under the model's phase rotation") {
  std::mt19937_64 rng(21);
  FockSpace s({4, 4});
  const auto rho = testing::random_state(s, rng);
  const double theta = 0.73;
  Vector phases(s.size());
  for (Index k = 0; k < s.size(); ++k) {
    const auto o = s.occupations(k);
    phases[k] = std::polar(1.0, theta * (2 * o[0] + o[1]));
  }
  const DenseMatrix rotated = phases.asDiagonal() * rho.matrix() * phases.conjugate().asDiagonal();
  const auto a = sync_measure(rho);
  const auto b = sync_measure(DensityMatrix(s, rotated));
  CHECK(std::abs(a.magnitude - b.magnitude) < 1e-12);
}

TEST_CASE("zero-coupling steady state has no synchronization") {
  SystemParams p = params(8, 0.0);
  const auto rho = steady_state(build_liouvillian(p));
  CHECK(sync_measure(rho).magnitude < 1e-12);
  CHECK(cross_g2(rho) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cross g2 examples") {
  std::mt19937_64 rng(5);
  FockSpace one({5});
  const auto prod = DensityMatrix::product(testing::random_state(one, rng), testing::random_state(one, rng));
  CHECK(cross_g2(prod) == doctest::Approx(1.0).epsilon(1e-12));
  FockSpace s({3, 3});
  DenseMatrix m = DenseMatrix::Zero(9, 9);
  m(s.index({0, 1}), s.index({0, 1})) = 0.5;
  m(s.index({1, 0}), s.index({1, 0})) = 0.5;
  CHECK(cross_g2(DensityMatrix(s, m)) == 0.0);
}

TEST_CASE("phonon numbers") {
  FockSpace s({4, 4});
  const auto [v1, v2] = phonon_numbers(DensityMatrix::basis(s, {0, 0}));
  CHECK(v1 == 0.0);
  CHECK(v2 == 0.0);
  SystemParams p = params(8, 0.0);
  p.gamma2 = 1000.0;
  const auto [n1, n2] = phonon_numbers(unperturbed_state(p));
  CHECK(std::abs(n1 - 1.0 / 3) < 2e-3);
  CHECK(std::abs(n2 - 1.0 / 3) < 2e-3);
}

TEST_CASE("Laguerre series agrees with std::assoc_laguerre") {
  std::mt19937_64 rng(9);
  const auto rho = testing::random_state(FockSpace({6}), rng);
  const DenseMatrix& r = rho.matrix();
  for (auto [x, p] : {std::pair{0.3, -0.8}, std::pair{1.7, 0.2}, std::pair{-2.1, 1.4}}) {
    const cplx a = cplx(x, p) / std::sqrt(2.0);
    const double b = 4.0 * std::norm(a);
    double ref = 0.0;
    for (unsigned m = 0; m < 6; ++m) {
      ref += r(m, m).real() * (m % 2 ? -1.0 : 1.0) * std::laguerre(m, b);
      for (unsigned n = m + 1; n < 6; ++n) {
        const double c = std::sqrt(std::tgamma(m + 1.0) / std::tgamma(n + 1.0));
        ref += 2.0 * (r(m, n) * (m % 2 ? -1.0 : 1.0) * std::pow(2.0 * a, n - m) * c *
                      std::assoc_laguerre(m, n - m, b))
                         .real();
      }
    }
    ref *= std::exp(-0.5 * b) / std::numbers::pi;
    CHECK(std::abs(wigner_at(rho, x, p) - ref) < 1e-12);
  }
}

TEST_CASE("vacuum Wigner function") {
  const auto vac = DensityMatrix::basis(FockSpace({6}), {0});
  CHECK(wigner_at(vac, 0.0, 0.0) == doctest::Approx(1.0 / std::numbers::pi));
  CHECK(wigner_at(vac, 1.0, 0.5) == doctest::Approx(std::exp(-1.25) / std::numbers::pi));
  const auto w = wigner(vac, {});
  CHECK(std::abs(w.normalization - 1.0) < 1e-6);
  CHECK(wigner_rms_radius(w) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("coherent state Wigner peak sits at sqrt(2) alpha") {
  const cplx alpha(0.8, -0.5);
  const auto rho = coherent(30, alpha);
  const double x0 = std::sqrt(2.0) * alpha.real(), p0 = std::sqrt(2.0) * alpha.imag();
  CHECK(wigner_at(rho, x0, p0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-8));
  CHECK(wigner_at(rho, x0 + 0.3, p0) < wigner_at(rho, x0, p0));
  CHECK(quadrature_density(rho, x0) == doctest::Approx(std::pow(std::numbers::pi, -0.5)).epsilon(1e-8));
}

TEST_CASE("coarse grids are rejected") {
  const auto vac = DensityMatrix::basis(FockSpace({4}), {0});
  CHECK_THROWS_AS(wigner(vac, {.extent = 0.5, .points = 11}), GridTooCoarse);
  CHECK_THROWS_AS(wigner(DensityMatrix::basis(FockSpace({2, 2}), {0, 0}), {}), InvalidArgument);
}

TEST_CASE("Wigner marginals reproduce quadrature distributions") {
  std::mt19937_64 rng(13);
  const auto rho = testing::random_state(FockSpace({8}), rng);
  PhaseGrid g{.extent = 7.0, .points = 141};
  const auto w = wigner(rho, g);
  CHECK(std::abs(w.normalization - 1.0) < 0.01);
  const double h = g.spacing();
  double worst = 0.0, peak = 0.0;
  for (size_t j = 0; j < w.x.size(); j += 7) {
    const double marg = w.values.col(static_cast<Index>(j)).sum() * h;
    const double q = quadrature_density(rho, w.x[j]);
    worst = std::max(worst, std::abs(marg - q));
    peak = std::max(peak, q);
  }
  CHECK(worst < 0.01 * peak);
}

TEST_CASE("uncoupled limit cycle is rotationally symmetric") {
  SystemParams p = params(10, 0.0);
  const auto rho = partial_trace(steady_state(build_liouvillian(p)), 0);
  for (double r : {0.3, 0.9, 1.6}) {
    std::vector<double> ring;
    for (int k = 0; k < 16; ++k) {
      const double t = 2 * std::numbers::pi * k / 16;
      ring.push_back(wigner_at(rho, r * std::cos(t), r * std::sin(t)));
    }
    double mean = 0.0;
    for (double v : ring) mean += v / 16;
    double var = 0.0;
    for (double v : ring) var += (v - mean) * (v - mean) / 16;
    CHECK(var < 1e-6);
  }
}

TEST_CASE("resonance detunings") {
  CHECK(resonance_detunings(0.0, 3, 3) == std::vector<double>{0.0});
  const auto r = resonance_detunings(250.0, 1, 2);
  for (double v : {500.0, 1000.0, 1500.0}) CHECK(std::find(r.begin(), r.end(), v) != r.end());
  CHECK(std::is_sorted(r.begin(), r.end()));
  CHECK_THROWS_AS(resonance_detunings(-1.0, 1, 1), InvalidArgument);
}

TEST_CASE("resonance list equals brute-force level crossings of H0") {
  // Delta at which |n+2, m-1> and |n, m> are degenerate under H0.
  const double k = 1.25;
  const int nmax = 3, mmax = 4;
  const auto r = resonance_detunings(k, nmax, mmax);
  std::vector<double> brute;
  for (int n = 0; n <= nmax; ++n) {
    for (int m = 1; m <= mmax; ++m) {
      auto energy = [&](int n1, int n2, double delta) { return delta * n2 + k * n1 * (n1 - 1) + k * n2 * (n2 - 1); };
      // energy difference is linear in delta with slope -1
      const double at0 = energy(n + 2, m - 1, 0.0) - energy(n, m, 0.0);
      brute.push_back(at0);
    }
  }
  std::sort(brute.begin(), brute.end());
  brute.erase(std::unique(brute.begin(), brute.end()), brute.end());
  CHECK(r == brute);
}

TEST_CASE("spectrum sum rule and single peak at weak coupling") {
  SystemParams p = params(10, 0.5);
  std::vector<double> grid;
  for (int k = -2000; k <= 2000; ++k) grid.push_back(k * 0.1);
  for (int mode = 0; mode < 2; ++mode) {
    const auto s = power_spectrum(p, mode, grid);
    CHECK(std::abs(spectrum_integral(s, p.gamma1) / s.population - 1.0) < 0.02);
    for (double v : s.values) CHECK(v > -1e-8);
    const auto peaks = local_maxima(s.values);
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(s.freqs[peaks[0]]) < 0.11);
  }
}

TEST_CASE("resolvent and time-domain spectra agree") {
  SystemParams p = params(8, 1.5);
  p.delta = 0.8;
  std::vector<double> grid;
  for (int k = -40; k <= 40; ++k) grid.push_back(k * 0.25);
  for (int mode = 0; mode < 2; ++mode) {
    const auto a = power_spectrum(p, mode, grid);
    const auto b = power_spectrum(p, mode, grid, {.method = SpectrumMethod::resolvent});
    double worst = 0.0, top = 0.0;
    for (size_t k = 0; k < grid.size(); ++k) {
      worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
      top = std::max(top, b.values[k]);
    }
    CHECK(worst < 1e-3 * top);
  }
}

TEST_CASE("detuned second mode peaks at its own frequency") {
  // Uncoupled: mode 2 emits at omega2, i.e. w~2 = 0, whatever Delta is.
  SystemParams p = params(8, 0.0);
  p.delta = 3.0;
  std::vector<double> grid;
  for (int k = -80; k <= 80; ++k) grid.push_back(k * 0.1);
  const auto s = power_spectrum(p, 1, grid, {.method = SpectrumMethod::resolvent});
  const auto peaks = local_maxima(s.values);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(s.freqs[peaks[0]]) < 1e-9);
}

TEST_CASE("peak positions are stable under doubling the window") {
  SystemParams p = params(10, 3.5);
  p.gamma2 = 1.0;
  std::vector<double> grid;
  for (int k = -150; k <= 150; ++k) grid.push_back(k * 0.05);
  const auto a = power_spectrum(p, 0, grid);
  const auto b = power_spectrum(p, 0, grid, {.window_scale = 2.0});
  CHECK(b.window > 1.9 * a.window);
  CHECK(local_maxima(a.values) == local_maxima(b.values));
}

TEST_CASE("spectrum input validation") {
  SystemParams p = params(6, 0.5);
  const std::vector<double> bad = {0.0, 0.0};
  CHECK_THROWS_AS(power_spectrum(p, 0, bad), InvalidArgument);
  const std::vector<double> ok = {0.0};
  CHECK_THROWS_AS(power_spectrum(p, 2, ok), InvalidArgument);
  CHECK_THROWS_AS(power_spectrum(p, 0, ok, {.max_time = 0.5}), InsufficientDecay);
}
