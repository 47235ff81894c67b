#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rydloss/medium.hpp"

namespace rydloss {

enum class RateMethod { Full, Simplified, Asymptotic };

const char* to_string(RateMethod m);
RateMethod rate_method_from_string(const std::string& name);

struct RateDiagnostics {
  double error_estimate = 0.0;
  double tail_bound = 0.0;
  std::size_t conservation_roots = 0;
  std::size_t near_degenerate_roots = 0;
  double q_min = 0.0;
  double q_max = 0.0;
  double incoming_momentum = 0.0;
  bool flat_regime = true;  ///< 1/r_b > k_c
  std::string note;
};

struct RateResult {
  cplx beta;
  double magnitude = 0.0;
  RateMethod method = RateMethod::Simplified;
  RateDiagnostics diagnostics;

  bool accepted() const {
    return magnitude == 0.0 || diagnostics.error_estimate <= 1e-3 * magnitude;
  }
};

/// Zero-loss momentum of the dark branch at zero energy.
/// Channel multiplicity: which incoming leg scatters into U, times the
/// order of the two outgoing legs.
inline constexpr int kIncomingOrderings = 3;
inline constexpr int kOutgoingOrderings = 2;
/// 18/π: the channel multiplicity times 3/π from the momentum measure.
double rate_prefactor();

double incoming_momentum(const MediumParams& params);

struct FullRateOptions {
  double window_in_rb = 40.0;  ///< |q| ≤ window/r_b
  int energy_scan = 600;       ///< samples of the outgoing dark energy per q₁
  int breakpoint_scan = 400;  ///< q₁ samples used to locate integrand jumps
  double tolerance = 1e-5;
  int max_depth = 14;
  /// Replace every Ṽ_q[ω] by its far-detuned form Ṽ_q[ω → 0] when set; used to
  /// probe the relative size of the two diagrams.
  bool vertices_at_zero_energy = false;
  /// Keep only diagram A (or only B); both when unset.
  std::optional<char> only_term;
  /// Drop the exchanged labeling and keep only the one where the q₁ leg is the
  /// flat dark polariton (the labeling of the term-B suppression argument).
  bool flat_leg_first_only = false;
  /// Evaluate vertex and propagator energies at their flat-band values
  /// (-ω_U → -ω₊, -ω_D → 2ω₊); meaningful together with flat_leg_first_only.
  bool flat_vertex_energies = false;
};

/// Double integral over (q₁, q₂) with the energy delta resolved on the lossless
/// conservation manifold and both second-order diagrams included.
RateResult beta_full(const MediumParams& params, const FullRateOptions& options = {});

/// Flat-dispersion form with the outgoing density of states 1/v_g(-2ω₊).
RateResult beta_simplified(const MediumParams& params, double window_in_rb = 40.0);

/// φ r_b² Ω_c²/δ normalized once per medium against beta_simplified at δ = 8Ω_c, δ_s = 0.
RateResult beta_asymptotic(const MediumParams& params);

RateResult beta(const MediumParams& params, RateMethod method);

struct RateMap {
  std::vector<double> delta_grid;    ///< rad/µs
  std::vector<double> delta_s_grid;  ///< rad/µs
  /// values[i][j] at delta_grid[i], delta_s_grid[j]; NaN marks a failed point.
  std::vector<std::vector<RateResult>> values;
  std::vector<std::pair<std::size_t, std::string>> holes;  ///< flat index, reason
};

struct MapOptions {
  unsigned workers = 1;
  std::string checkpoint_path;  ///< empty disables checkpointing
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Per-point rates in deterministic row-major order (δ outer, δ_s inner).
RateMap beta_map(const std::vector<double>& delta_grid, const std::vector<double>& delta_s_grid,
                 const MediumParams& params, RateMethod method, const MapOptions& options = {});

struct LocusPoint {
  double delta_s;
  double delta_star;               ///< global maximum of |β| in the scan window
  std::vector<double> local_maxima;
  bool multimodal = false;
};

/// For each δ_s, coarse scan of |β(δ)| over [delta_lo, delta_hi] then golden-section
/// refinement to 10⁻³Ω_c.
std::vector<LocusPoint> beta_max_locus(const std::vector<double>& delta_s_grid,
                                       const MediumParams& params, double delta_lo,
                                       double delta_hi, RateMethod method = RateMethod::Simplified,
                                       int coarse_points = 41);

}  // namespace rydloss
