#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rydloss/interactions.hpp"
#include "rydloss/polaritons.hpp"
#include "support/fixtures.hpp"

using namespace rydloss;

namespace {

MediumParams random_params(std::mt19937_64& rng, bool lossless) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto p = fixtures::experiment(5.0 + 40.0 * u(rng), -3.0 + 6.0 * u(rng));
  p.omega_c = kTwoPi * (10.0 + 30.0 * u(rng));
  p.gamma_p = kTwoPi * (1.0 + 10.0 * u(rng));
  p.gamma_s = kTwoPi * (0.05 + 0.5 * u(rng));
  return lossless ? p.lossless() : p;
}

}  // namespace

TEST_CASE("chi_bar reduces to the two-body expression at zero energy") {
  for (double d : {5.0, 15.0, 25.0}) {
    auto p = fixtures::experiment(d);
    p.gamma_s = 0.0;
    const cplx dt = p.cap_delta_tilde();
    const double om2 = p.omega_c * p.omega_c;
    CHECK(std::abs(chi_bar(0.0, p) - (om2 - 4.0 * dt * dt) / (2.0 * dt * om2)) < 1e-12 * std::abs(chi_bar(0.0, p)));
    const auto z = p.lossless();
    CHECK(chi_bar(0.0, z).real() ==
          doctest::Approx((om2 - 4 * z.delta * z.delta) / (2 * z.delta * om2)).epsilon(1e-13));
  }
  auto at_d0 = fixtures::experiment(11.75).lossless();
  CHECK(std::abs(chi_bar(0.0, at_d0)) < 1e-14);
  // the Δ substitution differs only through γ_s
  auto p = fixtures::experiment(20.0);
  CHECK(chi_bar(0.0, p, DeltaConvention::Plain) != chi_bar(0.0, p, DeltaConvention::Tilde));
  p.gamma_s = 0.0;
  CHECK(chi_bar(0.0, p, DeltaConvention::Plain) == chi_bar(0.0, p, DeltaConvention::Tilde));
}

TEST_CASE("resonance detunings at the measured control Rabi frequency") {
  const auto p = fixtures::experiment();
  for (auto m : {ResonanceMethod::ClosedForm, ResonanceMethod::NumericRoot}) {
    const auto r = resonance_detunings(p, m);
    CHECK(angular_to_mhz(r.delta0) == doctest::Approx(11.75).epsilon(1e-6));
    CHECK(std::abs(angular_to_mhz(r.delta_plus) - 16.44) < 0.02);
  }
  const auto shifted = resonance_detunings(fixtures::experiment(15.0, 1.0), ResonanceMethod::ClosedForm);
  CHECK(angular_to_mhz(shifted.delta0) == doctest::Approx(10.25));
  // closed forms hold to 1e-3 Ω_c in the small-δ_s window
  for (double ds : {-1.175, -0.5, 0.0, 0.5, 1.175}) {
    const auto q = fixtures::experiment(15.0, ds);
    const auto a = resonance_detunings(q, ResonanceMethod::ClosedForm);
    const auto b = resonance_detunings(q, ResonanceMethod::NumericRoot);
    CHECK(std::abs(a.delta0 - b.delta0) < 1e-3 * q.omega_c);
    CHECK(std::abs(a.delta_plus - b.delta_plus) < 1e-3 * q.omega_c);
  }
  // at the numeric δ₊ the zero-loss χ̄(-ω₊) vanishes
  auto z = fixtures::experiment().lossless();
  z.delta = resonance_detunings(z, ResonanceMethod::NumericRoot).delta_plus;
  CHECK(std::abs(chi_bar(-omega_plus(z), z)) < 1e-8 * std::abs(chi_bar(0.0, fixtures::experiment(25.0))));
}

TEST_CASE("effective potential saturates at short distance") {
  const auto p = fixtures::experiment(25.0);
  const cplx chi = chi_bar(0.0, p);
  const double rb = blockade_radius(0.0, p);
  const auto near = effective_potential(0.0, 1e-3 * rb, p);
  CHECK(std::abs(near.value + 1.0 / chi) < 1e-10 * std::abs(1.0 / chi));
  const auto far = effective_potential(0.0, 10.0 * rb, p);
  const double bare = p.c6 / std::pow(10.0 * rb, 6);
  CHECK(std::abs(far.value - bare) / bare < 1e-5);
  CHECK_THROWS_AS(effective_potential(0.0, 0.0, p), ValidationError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_params(rng, false);
    const cplx w{kTwoPi * (20.0 * u(rng) - 10.0), 0.0};
    const cplx x = chi_bar(w, q) * q.c6;
    const double r = blockade_radius(w, q) * 3.0 * u(rng) + 1e-3;
    const double v = std::abs(effective_potential(w, r, q).value);
    // |r⁶ - χ̄C₆| ≥ |χ̄C₆| needs Re χ̄C₆ ≤ 0; otherwise only |Im χ̄C₆| bounds it
    if (x.real() <= 0.0)
      CHECK(v <= std::abs(q.c6 / x) * (1.0 + 1e-12));
    else
      CHECK(v <= std::abs(q.c6 / x.imag()) * (1.0 + 1e-12));
  }
}

TEST_CASE("blockade radius across the scanned detunings") {
  for (double d = 15.0; d <= 30.0; d += 2.5) {
    const double rb = blockade_radius(0.0, fixtures::experiment(d));
    CHECK(rb >= 7.0);
    CHECK(rb <= 10.0);
  }
  // sixth-root homogeneity
  auto p = fixtures::experiment(25.0);
  const double r1 = blockade_radius(0.0, p);
  p.c6 *= 64.0;
  CHECK(blockade_radius(0.0, p) == doctest::Approx(2.0 * r1).epsilon(1e-12));
  // δ^{1/6} growth far from resonance
  const auto a = fixtures::experiment(500.0).lossless(), b = fixtures::experiment(2000.0).lossless();
  const double slope = std::log(blockade_radius(0.0, b) / blockade_radius(0.0, a)) / std::log(4.0);
  CHECK(std::abs(slope - 1.0 / 6.0) < 0.01);
  CHECK_THROWS_AS(blockade_radius(0.0, fixtures::experiment(11.75).lossless()), ResonanceError);
}

TEST_CASE("potential Fourier transform: closed form, both methods, symmetry, decay") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst0 = 0.0;
  for (int draw = 0; draw < 6; ++draw) {
    const auto p = random_params(rng, false);
    const cplx w{kTwoPi * (10.0 * u(rng) - 5.0), 0.0};
    const double rb = blockade_radius(w, p);
    const cplx v0 = potential_ft(0.0, w, p);
    worst0 = std::max(worst0, std::abs(v0 - potential_ft_zero_closed_form(w, p)) / std::abs(v0));
    for (double qr : {0.0, 0.5, 2.0, 5.0, 10.0, 20.0}) {
      const double q = qr / rb;
      const cplx a = potential_ft(q, w, p, FourierMethod::Residues);
      const cplx b = potential_ft(q, w, p, FourierMethod::Quadrature);
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-6 * std::abs(v0)));
      CHECK(std::abs(potential_ft(-q, w, p) - a) <= 1e-12 * std::abs(v0));
    }
  }
  {
    // decay set by the distance of the nearest pole from the real axis
    const auto p = fixtures::experiment(25.0);
    const double rb = blockade_radius(0.0, p);
    const double v0 = std::abs(potential_ft(0.0, 0.0, p));
    double prev = v0;
    for (double qr : {5.0, 10.0, 20.0, 30.0}) {
      const double v = std::abs(potential_ft(qr / rb, 0.0, p));
      CHECK(v < prev);
      prev = v;
    }
    CHECK(prev < 1e-5 * v0);
  }
  CHECK(worst < 1e-6);
  CHECK(worst0 < 1e-8);
  // a real positive χ̄C₆ puts a pole on the integration path
  auto z = fixtures::experiment(25.0).lossless();
  z.c6 = -z.c6;
  CHECK_THROWS_AS(potential_ft(0.1, 0.0, z), PoleError);
}

TEST_CASE("1/chi_bar(-omega_plus) closed form") {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto p = random_params(rng, true);
    const cplx direct = 1.0 / chi_bar(-omega_plus(p), p);
    worst = std::max(worst, std::abs(inv_chi_at_minus_omega_plus(p).value - direct) / std::abs(direct));
  }
  CHECK(worst < 1e-9);
  auto p = fixtures::experiment(20.0);
  p.delta_s = 0.0;
  p.gamma_s = 0.0;
  const auto r = inv_chi_at_minus_omega_plus(p);
  CHECK(std::abs(r.value - r.value_ds0) < 1e-12 * std::abs(r.value));
  auto c = fixtures::experiment().lossless();
  c.delta = c.omega_c / (2.0 * std::sqrt(2.0));
  CHECK(std::abs(inv_chi_at_minus_omega_plus(c).cancellation) < 1e-12 * c.omega_c);
}

TEST_CASE("density of states and 1/chi_bar(-omega_plus) cancel across the critical detuning") {
  const auto base = from_experiment_units({{"omega_c_MHz", 23.5}, {"gamma_MHz", 7.0}, {"gamma_s_MHz", 0.0},
                                           {"delta_MHz", 10.0}, {"delta_s_MHz", 0.0}, {"OD", 37.0},
                                           {"sigma_z_um", 40.0}, {"g_MHz", 1000.0}})
                        .lossless();
  const double crit = base.omega_c / (2.0 * std::sqrt(2.0));
  double pmin = INFINITY, pmax = 0.0, dmin = INFINITY, dmax = 0.0;
  for (double x : {-1e-2, -1e-3, -1e-4, 1e-4, 1e-3, 1e-2}) {
    auto p = base;
    p.delta = crit * (1.0 + x);
    const double dos = std::abs(inverse_group_velocity_at(-2.0 * omega_plus(p), p));
    const double prod = dos * std::norm(inv_chi_at_minus_omega_plus(p).value);
    pmin = std::min(pmin, prod);
    pmax = std::max(pmax, prod);
    dmin = std::min(dmin, dos);
    dmax = std::max(dmax, dos);
  }
  CHECK(pmax / pmin < 10.0);
  CHECK(dmax / dmin > 1e3);
}

TEST_CASE("finite linewidths leave broadened minima of |chi_bar|") {
  const auto p = fixtures::experiment();
  const auto b = broadened_resonances(p, kTwoPi * 5.0, kTwoPi * 30.0, 501);
  REQUIRE_FALSE(b.chi0_minima.empty());
  CHECK(std::abs(angular_to_mhz(b.chi0_minima.front()) - 11.75) < 1.0);
  REQUIRE_FALSE(b.chi_plus_minima.empty());
  CHECK(std::abs(angular_to_mhz(b.chi_plus_minima.front()) - 16.44) < 1.5);
}
