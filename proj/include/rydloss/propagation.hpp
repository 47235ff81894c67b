#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rydloss/medium.hpp"

namespace rydloss {

/// Axial coupling profile with g(z)² ∝ density and 4∫g²dz/(cΓ) = OD.
struct DensityProfile {
  ProfileKind kind = ProfileKind::Gaussian;
  double g_peak = 0.0;
  double sigma_z = 0.0;
  double length = 0.0;  ///< flat-cloud length (homogeneous only)

  double coupling_sq(double z) const;
  double coupling(double z) const;
  /// ∫_a^b g(z)² dz, exact.
  double integral(double a, double b) const;
  /// Interval outside which g vanishes or is negligible at `extent_sigma`.
  std::pair<double, double> support(double extent_sigma) const;
};

DensityProfile make_profile(const MediumParams& params);

struct SimulationGrid {
  int points = 96;                ///< intervals per axis (M); M+1 nodes
  double extent_sigma = 3.5;      ///< Gaussian clouds span ±extent·σ_z
  double potential_cap = 1e3;     ///< |V| ≤ cap·|1/χ̄(0)|
  bool reverse_sweep = false;     ///< within-slab order (results must not depend on it)
  unsigned workers = 1;
  double memory_budget_bytes = 2.0e9;
};

struct SingleResult {
  cplx transmission;
  std::vector<double> z;
  std::vector<cplx> psi_e;
};

/// Adaptive Runge-Kutta integration of the eliminated single-photon equation
/// ∂_z E = -i g(z)² E / [c(Δ + δ_s - Ω_c²/(4Δ_s))] across the whole cloud.
SingleResult solve_single(const MediumParams& params, const DensityProfile& profile,
                          int samples = 200, double extent_sigma = 8.0);

/// Closed-form transmission exp(-i ∫g² dz / [c(Δ + δ_s - Ω_c²/(4Δ_s))]) over [a, b].
cplx single_transmission_closed_form(const MediumParams& params, const DensityProfile& profile,
                                     double a, double b);

/// Amplitudes on an (M+1)^N grid, components {E,P,S}^N with slot 1 most significant.
/// Three-body solutions keep only the exit face z₁ = z_max (order stays 3, `face` set).
struct WavefunctionGrid {
  int order = 0;
  bool face = false;
  std::vector<double> z;
  std::vector<cplx> data;

  std::size_t components() const;
  std::size_t nodes() const { return z.size(); }
};

struct CorrelationResult {
  double g2_0 = 1.0;
  double g3_00 = 1.0;
  double eta3_00 = 0.0;
  double asymmetry = 0.0;  ///< max relative bosonic-symmetry defect
  int grid_points = 0;
  cplx transmission;       ///< discrete single-photon amplitude on the same grid
  std::vector<double> tau;
  std::vector<double> g2_tau;
};

struct TwoBodySolution {
  WavefunctionGrid psi;
  std::vector<cplx> single;  ///< discrete one-body solution, 3 components per node
  CorrelationResult correlation;
};

struct ThreeBodySolution {
  TwoBodySolution two;
  WavefunctionGrid exit_face;  ///< ψ(z_max, z₂, z₃)
  CorrelationResult correlation;
};

/// Grid nodes used by the many-body solvers.
std::vector<double> simulation_nodes(const DensityProfile& profile, const SimulationGrid& grid);

/// Peak bytes held by a three-body march at `points`.
double three_body_memory_bytes(int points);

TwoBodySolution solve_two(const MediumParams& params, const DensityProfile& profile,
                          const SimulationGrid& grid);
ThreeBodySolution solve_three(const MediumParams& params, const DensityProfile& profile,
                              const SimulationGrid& grid);

struct TauOptions {
  double horizon_us = 20.0;
};

/// g²(τ) after the first photon leaves: the remaining excitation evolves freely.
std::vector<double> g2_tau_profile(const TwoBodySolution& solution, const MediumParams& params,
                                   const DensityProfile& profile,
                                   const std::vector<double>& tau_us,
                                   const TauOptions& options = {});

/// g³(0, τ): two photons leave together, the third follows after τ.
std::vector<double> g3_tau_profile(const ThreeBodySolution& solution, const MediumParams& params,
                                   const DensityProfile& profile,
                                   const std::vector<double>& tau_us,
                                   const TauOptions& options = {});

struct CorrelationMap {
  std::vector<double> delta_grid;    ///< rad/µs
  std::vector<double> delta_s_grid;  ///< rad/µs
  std::vector<std::vector<double>> g2, g3, eta3;  ///< [i][j] ↔ (delta_i, delta_s_j); NaN = hole
  std::vector<std::pair<std::size_t, std::string>> holes;
};

CorrelationMap correlation_map(const std::vector<double>& delta_grid,
                               const std::vector<double>& delta_s_grid, const MediumParams& params,
                               const SimulationGrid& grid, unsigned workers = 1,
                               const std::function<void(std::size_t, std::size_t)>& progress = {});

}  // namespace rydloss
