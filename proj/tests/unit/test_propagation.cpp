#include <cmath>
#include <vector>

#include "doctest.h"
#include "rydloss/interactions.hpp"
#include "rydloss/propagation.hpp"
#include "support/fixtures.hpp"

using namespace rydloss;

namespace {

SimulationGrid grid_of(int m) {
  SimulationGrid g;
  g.points = m;
  return g;
}

MediumParams with(MediumParams p, const std::string& key, double value) {
  auto v = to_experiment_units(p);
  v.erase("g_MHz");
  v[key] = value;
  return from_experiment_units(v, p.profile);
}

}  // namespace

TEST_CASE("density profiles satisfy the OD calibration") {
  for (auto kind : {ProfileKind::Gaussian, ProfileKind::Homogeneous}) {
    auto v = to_experiment_units(fixtures::simulation());
    v.erase("g_MHz");
    const auto p = from_experiment_units(v, kind);
    const auto prof = make_profile(p);
    const auto [a, b] = prof.support(20.0);
    const double od = 4.0 * prof.integral(a, b) / (p.light_speed * p.gamma_p);
    CHECK(od == doctest::Approx(37.0).epsilon(1e-10));
    CHECK(prof.coupling(0.0) == doctest::Approx(p.g_peak));
  }
}

TEST_CASE("single-photon transmission") {
  SUBCASE("bare two-level resonance gives e^-OD") {
    auto p = fixtures::simulation(0.0, 0.0);
    p.omega_c = 0.0;
    const auto s = solve_single(p, make_profile(p));
    CHECK(std::abs(std::norm(s.transmission) - std::exp(-37.0)) < 1e-6 * std::exp(-37.0) + 1e-300);
    CHECK(std::norm(s.transmission) == doctest::Approx(std::exp(-37.0)).epsilon(1e-6));
  }
  SUBCASE("EIT transparency") {
    auto p = fixtures::simulation(20.0, 0.0);
    p.gamma_s = 1e-7;
    const auto s = solve_single(p, make_profile(p));
    CHECK(std::abs(std::norm(s.transmission) - 1.0) < 1e-4);
  }
  SUBCASE("integrator equals the closed form at every detuning") {
    for (double d : {10.0, 15.0, 20.0, 25.0, 30.0})
      for (double ds : {-3.0, 0.0, 3.0}) {
        const auto p = fixtures::simulation(d, ds);
        const auto prof = make_profile(p);
        const auto s = solve_single(p, prof);
        const auto [a, b] = prof.support(8.0);
        CHECK(std::abs(s.transmission - single_transmission_closed_form(p, prof, a, b)) < 1e-4);
      }
  }
  SUBCASE("the eliminated equation needs a Rydberg linewidth") {
    auto p = fixtures::simulation(20.0, 0.0);
    p.gamma_s = 0.0;
    CHECK_THROWS_AS(solve_single(p, make_profile(p)), PoleError);
  }
}

TEST_CASE("two-body solver: factorization without interactions") {
  auto p = fixtures::simulation(18.0, 1.0);
  p.c6 = 0.0;
  const auto sol = solve_two(p, make_profile(p), grid_of(48));
  CHECK(std::abs(sol.correlation.g2_0 - 1.0) < 1e-12);
  // ψ_EE = ψ_E ⊗ ψ_E on every node
  const std::size_t n = sol.psi.nodes(), c = sol.psi.components();
  REQUIRE(c == 9);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const cplx ee = sol.psi.data[(i * n + j) * c];
      const cplx prod = sol.single[3 * i] * sol.single[3 * j];
      worst = std::max(worst, std::abs(ee - prod));
    }
  CHECK(worst < 1e-12);
  const std::vector<double> tau{0.0, 0.5, 2.0};
  for (double g : g2_tau_profile(sol, p, make_profile(p), tau)) CHECK(std::abs(g - 1.0) < 1e-6);
}

TEST_CASE("two-body solver: antibunching and bunching sides") {
  const auto lo = solve_two(fixtures::simulation(15.0, -2.0), make_profile(fixtures::simulation(15.0, -2.0)), grid_of(96));
  CHECK(lo.correlation.g2_0 < 1.0);
  const auto hi = solve_two(fixtures::simulation(22.5, 2.0), make_profile(fixtures::simulation(22.5, 2.0)), grid_of(96));
  CHECK(hi.correlation.g2_0 >= 1.0);
  CHECK(lo.correlation.asymmetry < 1e-8);
  CHECK(hi.correlation.asymmetry < 1e-8);
}

TEST_CASE("two-body solver: sweep order, potential cap and refinement") {
  const auto p = fixtures::simulation(15.0, -2.0);
  const auto prof = make_profile(p);
  auto g = grid_of(64);
  const double base = solve_two(p, prof, g).correlation.g2_0;
  g.reverse_sweep = true;
  CHECK(std::abs(solve_two(p, prof, g).correlation.g2_0 - base) < 1e-10 * base);
  g.reverse_sweep = false;
  g.potential_cap *= 10.0;
  CHECK(std::abs(solve_two(p, prof, g).correlation.g2_0 - base) < 1e-3);
  const double m192 = solve_two(p, prof, grid_of(192)).correlation.g2_0;
  const double m384 = solve_two(p, prof, grid_of(384)).correlation.g2_0;
  CHECK(std::abs(m384 - m192) < 1e-3);
}

TEST_CASE("two-body solver: blockade deepens with optical depth") {
  // short cloud, long blockade radius
  auto p = with(fixtures::simulation(15.0, -2.0), "sigma_z_um", 5.0);
  double prev = 2.0;
  for (double od : {5.0, 10.0, 20.0}) {
    const auto q = with(p, "OD", od);
    const double g2 = solve_two(q, make_profile(q), grid_of(96)).correlation.g2_0;
    CHECK(g2 < prev);
    prev = g2;
  }
}

TEST_CASE("g2(tau): exact at zero delay, decorrelates at long delay") {
  const auto p = fixtures::simulation(15.0, -2.0);
  const auto prof = make_profile(p);
  const auto sol = solve_two(p, prof, grid_of(96));
  const std::vector<double> tau{0.0, 0.05, 0.2, 0.5, 1.0, 3.0, 10.0};
  const auto g = g2_tau_profile(sol, p, prof, tau);
  CHECK(g[0] == sol.correlation.g2_0);
  CHECK(std::abs(g.back() - 1.0) < 1e-2);
  CHECK(g[2] > g[0]);  // recovery from the dip
  CHECK_THROWS_AS(g2_tau_profile(sol, p, prof, {0.0, 100.0}), WindowError);
}

TEST_CASE("three-body solver: null test, symmetry and the eta3 identity") {
  auto p = fixtures::simulation(20.0, 0.0);
  p.c6 = 0.0;
  const auto free = solve_three(p, make_profile(p), grid_of(24));
  CHECK(std::abs(free.correlation.g3_00 - 1.0) < 1e-12);
  CHECK(std::abs(free.correlation.eta3_00) < 1e-12);

  const auto q = fixtures::simulation(15.0, -2.0);
  auto g = grid_of(32);
  const auto a = solve_three(q, make_profile(q), g);
  CHECK(a.correlation.asymmetry < 1e-8);
  CHECK(a.correlation.eta3_00 == 3.0 * a.correlation.g2_0 - a.correlation.g3_00 - 2.0);
  CHECK(a.correlation.g3_00 >= 0.0);
  g.reverse_sweep = true;
  const auto b = solve_three(q, make_profile(q), g);
  CHECK(std::abs(b.correlation.g3_00 - a.correlation.g3_00) < 1e-10 * a.correlation.g3_00);
  const auto tau = g3_tau_profile(a, q, make_profile(q), {0.0, 20.0});
  CHECK(tau[0] == a.correlation.g3_00);
  // the late third photon decouples; the simultaneous pair keeps g²(0)
  CHECK(std::abs(tau[1] - a.correlation.g2_0) < 1e-2 * a.correlation.g2_0);
}

TEST_CASE("three-body solver refuses grids beyond the memory budget") {
  const auto p = fixtures::simulation();
  auto g = grid_of(400);
  g.memory_budget_bytes = 1e6;
  CHECK(three_body_memory_bytes(400) > 1e6);
  CHECK_THROWS_AS(solve_three(p, make_profile(p), g), BudgetError);
  CHECK_THROWS_AS(solve_two(p, make_profile(p), grid_of(2)), ValidationError);
}

TEST_CASE("correlation map without interactions is identically (1, 1, 0)") {
  auto p = fixtures::simulation();
  p.c6 = 0.0;
  const std::vector<double> dg{mhz_to_angular(12.0), mhz_to_angular(24.0)};
  const std::vector<double> sg{mhz_to_angular(-1.0), mhz_to_angular(1.0)};
  const auto map = correlation_map(dg, sg, p, grid_of(16), 2);
  CHECK(map.holes.empty());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(map.g2[i][j] - 1.0) < 1e-12);
      CHECK(std::abs(map.g3[i][j] - 1.0) < 1e-12);
      CHECK(std::abs(map.eta3[i][j]) < 1e-12);
      CHECK(map.eta3[i][j] == 3.0 * map.g2[i][j] - map.g3[i][j] - 2.0);
    }
}
