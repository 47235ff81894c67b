#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rydloss/polaritons.hpp"
#include "support/fixtures.hpp"

using namespace rydloss;

namespace {

MediumParams reference(double delta = 25.0, double g = 1000.0) {
  return from_experiment_units({{"omega_c_MHz", 23.5}, {"gamma_MHz", 7.0}, {"gamma_s_MHz", 0.4},
                                {"delta_MHz", delta},   {"delta_s_MHz", 0.0}, {"OD", 37.0},
                                {"sigma_z_um", 40.0},   {"g_MHz", g}});
}

/// Dense near q = 0, reaching |q| = qmax.
std::vector<double> sinh_grid(int n, double qmax, double scale) {
  std::vector<double> q(2 * n + 1);
  const double umax = std::asinh(qmax / scale);
  for (int i = -n; i <= n; ++i) q[i + n] = scale * std::sinh(umax * i / n);
  return q;
}

Matrix3c resolvent(double k, cplx w, const MediumParams& p) {
  return (w * Matrix3c::Identity() - hamiltonian(k, p)).inverse();
}

}  // namespace

TEST_CASE("hamiltonian has the EIT structure and is symmetric") {
  const auto p = reference();
  for (double q : {-3.0, 0.0, 0.02, 7.0}) {
    const Matrix3c h = hamiltonian(q, p);
    CHECK((h - h.transpose()).norm() == 0.0);
    CHECK(h(0, 0) == cplx{p.light_speed * q, 0.0});
    CHECK(h(0, 1) == cplx{p.g_peak, 0.0});
    CHECK(h(0, 2) == cplx{});
    CHECK(h(1, 1) == -p.cap_delta() - p.delta_s);
    CHECK(h(1, 2) == cplx{0.5 * p.omega_c, 0.0});
    CHECK(h(2, 2) == -p.cap_delta_s());
  }
}

TEST_CASE("zero momentum spectrum: dark state and bright pair") {
  const auto p = reference().lossless();
  Eigen::ComplexEigenSolver<Matrix3c> es(hamiltonian(0.0, p));
  std::vector<double> ev;
  for (int i = 0; i < 3; ++i) ev.push_back(angular_to_mhz(es.eigenvalues()(i).real()));
  std::sort(ev.begin(), ev.end());
  CHECK(ev[0] == doctest::Approx(-1012.6).epsilon(1e-4));
  CHECK(std::abs(ev[1]) < 1e-9);
  CHECK(ev[2] == doctest::Approx(987.6).epsilon(1e-4));
}

TEST_CASE("tracked spectrum reproduces eigenvalues with unit vectors and no swaps") {
  const auto p = reference();
  const auto grid = sinh_grid(400, 50.0, 0.01);
  const auto spec = branch_spectrum(grid, p);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Matrix3c h = hamiltonian(grid[i], p);
    cplx sum = 0.0;
    for (int b = 0; b < 3; ++b) {
      sum += spec.omega[b][i];
      CHECK(spec.eigenvectors[b][i].norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::norm(spec.rydberg_overlap[b][i]) <= 1.0 + 1e-12);
      // each branch value is an eigenvalue of H(q)
      const double resid = (h * spec.eigenvectors[b][i] - spec.omega[b][i] * spec.eigenvectors[b][i]).norm();
      CHECK(resid < 1e-10 * std::max(1.0, std::abs(spec.omega[b][i])));
    }
    CHECK(std::abs(sum - h.trace()) <= 1e-12 * std::max(1.0, std::abs(h.trace())) * 10);
    if (i > 0)
      for (int b = 0; b < 3; ++b)
        CHECK(std::abs(spec.eigenvectors[b][i].dot(spec.eigenvectors[b][i - 1])) > 0.5);
  }
}

TEST_CASE("dark branch: transparency point and large-momentum saturation") {
  auto p = reference().lossless();
  const auto grid = sinh_grid(800, 1e5, 0.01);
  const auto spec = branch_spectrum(grid, p);
  const std::size_t zero = grid.size() / 2;
  CHECK(std::abs(spec.omega_of(Branch::D)[zero]) < 1e-8);
  const double g = p.g_peak, om = p.omega_c;
  CHECK(std::norm(spec.overlap_of(Branch::D)[zero]) ==
        doctest::Approx(g * g / (g * g + om * om / 4.0)).epsilon(1e-12));
  CHECK(std::norm(spec.overlap_of(Branch::D)[zero]) == doctest::Approx(0.99986).epsilon(1e-5));

  const double wp = omega_plus(p).real();
  CHECK(spec.omega_of(Branch::D).back().real() == doctest::Approx(wp).epsilon(1e-3));
  const double d = p.delta;
  CHECK(spec.omega_of(Branch::L).back().real() ==
        doctest::Approx(0.5 * (-d - std::sqrt(d * d + om * om))).epsilon(1e-3));
  CHECK(spec.omega_of(Branch::U).back().real() > spec.omega_of(Branch::D).back().real());
}

TEST_CASE("branch labels do not depend on grid density") {
  const auto p = reference(18.0, 175.5);
  const auto coarse = sinh_grid(150, 20.0, 0.02), fine = sinh_grid(300, 20.0, 0.02);
  const auto a = branch_spectrum(coarse, p), b = branch_spectrum(fine, p);
  for (std::size_t i = 0; i < coarse.size(); ++i)
    for (int br = 0; br < 3; ++br)
      CHECK(std::abs(a.omega[br][i] - b.omega[br][2 * i]) < 1e-9 * std::max(1.0, std::abs(a.omega[br][i])));
}

TEST_CASE("group velocity limits") {
  SUBCASE("slow light at the EIT point") {
    auto p = reference(0.0, 175.5).lossless();
    const auto grid = sinh_grid(200, 1.0, 0.01);
    const auto spec = branch_spectrum(grid, p);
    const auto v = group_velocity(Branch::D, 0.0, spec, p);
    const double g = p.g_peak, om = p.omega_c;
    CHECK(v.value.real() == doctest::Approx(p.light_speed * om * om / (4 * g * g + om * om)).epsilon(1e-6));
    CHECK(v.error_estimate < 1e-6 * std::abs(v.value));
  }
  SUBCASE("free photon far from the atomic resonances") {
    const auto p = reference();
    const auto grid = sinh_grid(200, 2000.0, 0.01);
    const auto spec = branch_spectrum(grid, p);
    const auto v = group_velocity(Branch::U, 1000.0, spec, p);
    CHECK(v.value.real() == doctest::Approx(p.light_speed).epsilon(1e-3));
  }
  SUBCASE("edges are refused") {
    const auto p = reference();
    const std::vector<double> grid{-1.0, 0.0, 1.0};
    const auto spec = branch_spectrum(grid, p);
    CHECK_THROWS_AS(group_velocity(Branch::D, 1.0, spec, p), ValidationError);
    CHECK_THROWS_AS(group_velocity(Branch::D, 2.0, spec, p), ValidationError);
  }
}

TEST_CASE("omega_plus limits") {
  auto p = reference(0.0).lossless();
  p.delta_s = 0.0;
  CHECK(angular_to_mhz(omega_plus(p).real()) == doctest::Approx(11.75).epsilon(1e-12));
  auto far = reference(235.0).lossless();
  const double approx = far.omega_c * far.omega_c / (4.0 * far.delta);
  CHECK(omega_plus(far).real() == doctest::Approx(approx).epsilon(0.01));
}

TEST_CASE("G_ss closed form equals the resolvent element") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    MediumParams p = reference();
    p.g_peak = kTwoPi * (100.0 + 900.0 * std::abs(u(rng)));
    p.omega_c = kTwoPi * (5.0 + 40.0 * std::abs(u(rng)));
    p.gamma_p = kTwoPi * (1.0 + 10.0 * std::abs(u(rng)));
    p.gamma_s = kTwoPi * (0.05 + std::abs(u(rng)));
    p.delta = kTwoPi * 40.0 * u(rng);
    p.delta_s = kTwoPi * 5.0 * u(rng);
    const double k = 0.5 * u(rng);
    const cplx w{kTwoPi * 50.0 * u(rng), kTwoPi * 5.0 * u(rng)};
    const cplx exact = resolvent(k, w, p)(2, 2);
    worst = std::max(worst, std::abs(g_ss(PropagatorQuery::finite(k, w), p) - exact) / std::abs(exact));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("G_ss at infinite momentum is the large-k limit") {
  const auto p = reference(25.0, 175.5);
  const cplx w = -omega_plus(p);
  const cplx inf = g_ss(PropagatorQuery::infinite(w), p);
  const double scale = std::abs(p.cap_delta()) / p.light_speed;
  const cplx a = g_ss(PropagatorQuery::finite(1e3 * scale, w), p);
  const cplx b = g_ss(PropagatorQuery::finite(1e4 * scale, w), p);
  // error falls like 1/k: Richardson on the two points
  const cplx extrapolated = (10.0 * b - a) / 9.0;
  CHECK(std::abs(extrapolated - inf) < 1e-4 * std::abs(inf));

  auto bare = reference().lossless();
  bare.omega_c = 0.0;
  CHECK_THROWS_AS(g_ss(PropagatorQuery::infinite(0.0), bare), PoleError);
}

TEST_CASE("inverse group velocity at -2 omega_plus matches the closed form") {
  for (double d : {15.0, 25.0, 40.0}) {
    const auto p = reference(d).lossless();
    const cplx w = -2.0 * omega_plus(p);
    const cplx numeric = inverse_group_velocity_at(w, p);
    CHECK(std::abs(numeric - inverse_group_velocity_closed_form_ds0(p)) < 0.01 * std::abs(numeric));
    CHECK(std::abs(numeric - inverse_group_velocity_closed_form(p)) < 0.01 * std::abs(numeric));
    // and the dispersion really passes through that energy
    LosslessDispersion disp(p);
    const double q = disp.momentum_at(w.real());
    CHECK(disp.omega(Branch::D, q) == doctest::Approx(w.real()).epsilon(1e-9));
  }
}

TEST_CASE("lossy branch resolution stays close to the lossless branch") {
  const auto p = fixtures::experiment(20.0);
  LosslessDispersion disp(p.lossless());
  for (double q : {-0.5, -0.05, 0.0, 0.05, 0.5}) {
    const auto s = resolve_branch(Branch::D, q, p);
    CHECK(std::abs(s.omega.real() - disp.omega(Branch::D, q)) < 0.1 * p.gamma_p);
    CHECK(s.vector.norm() == doctest::Approx(1.0));
  }
}
