#pragma once

#include <map>
#include <string>

#include "rydloss/common.hpp"

namespace rydloss {

enum class ProfileKind { Gaussian, Homogeneous };

std::string to_string(ProfileKind kind);
ProfileKind profile_from_string(const std::string& name);

/// Homogeneous clouds are modelled with length L = 4.2 σ_z.
inline constexpr double kHomogeneousLengthPerSigma = 4.2;

/// Default C₆/2π in MHz·µm⁶. Calibrated so that r_b = 10 µm at δ/2π = 30 MHz for
/// the experimental operating point (Ω_c/2π = 23.5, Γ/2π = 7, γ_s/2π = 0.4 MHz),
/// which keeps r_b inside [8, 10] µm for δ/2π ∈ [15, 30] MHz.
inline constexpr double kDefaultC6MHz = 1.07e7;

/// Physical inputs. All frequencies are angular (rad/µs), lengths in µm.
struct MediumParams {
  double g_peak = 0.0;        ///< collective coupling at peak density
  double omega_c = 0.0;       ///< control Rabi frequency Ω_c
  double gamma_p = 0.0;       ///< intermediate-state linewidth Γ
  double gamma_s = 0.0;       ///< Rydberg linewidth γ_s
  double delta = 0.0;         ///< single-photon detuning δ
  double delta_s = 0.0;       ///< two-photon detuning δ_s
  double c6 = 0.0;            ///< van der Waals coefficient, rad/µs·µm⁶, sign included
  double od = 0.0;            ///< resonant optical depth
  double sigma_z = 0.0;       ///< rms axial cloud size
  double light_speed = kLightSpeed;
  ProfileKind profile = ProfileKind::Gaussian;

  /// Throws ValidationError naming the first offending field.
  void validate() const;

  cplx cap_delta() const { return {delta, 0.5 * gamma_p}; }
  cplx cap_delta_s() const { return {delta_s, 0.5 * gamma_s}; }
  cplx cap_delta_tilde() const { return {delta, 0.5 * gamma_p - 0.5 * gamma_s}; }

  /// Same medium with Γ = γ_s = 0. Used for dispersion manifolds and
  /// analytic limits; bypasses validate() on purpose.
  MediumParams lossless() const;
};

/// Peak coupling g for which the bare two-level resonant intensity
/// transmission of the profile equals e^{-OD}: 4∫g(z)²dz/(cΓ) = OD.
double calibrated_coupling(double od, double gamma_p, double sigma_z, ProfileKind kind,
                           double light_speed = kLightSpeed);

/// Build params from experiment-style keys (frequencies as ν in MHz, lengths in µm).
/// Required: omega_c_MHz, gamma_MHz, gamma_s_MHz, delta_MHz, delta_s_MHz, OD, sigma_z_um.
/// Optional: g_MHz (calibrated from OD when absent), C6 (C₆/2π in MHz·µm⁶),
/// light_speed_um_per_us.
MediumParams from_experiment_units(const std::map<std::string, double>& values,
                                   ProfileKind profile = ProfileKind::Gaussian);

/// Inverse of from_experiment_units (always emits g_MHz and C6).
std::map<std::string, double> to_experiment_units(const MediumParams& params);

struct DerivedScales {
  cplx cap_delta;
  cplx cap_delta_s;
  cplx cap_delta_tilde;
  cplx mass;            ///< m = -2g⁴/(ΔΩ_c²c²)
  double omega_c_scale; ///< Ω_c²/4|Δ|
  double k_c;           ///< g²/(c|Δ|)
  double od_b;          ///< OD·r_b/(√(2π)σ_z)
  double phi;           ///< |r_b/√(χ̄(0)/m)|
  double r_b;           ///< (|C₆ χ̄(0)|)^{1/6}
};

/// `chi0` is χ̄(ω = 0), evaluated by the caller (see interactions.hpp).
/// Throws ResonanceError when chi0 == 0.
DerivedScales derive_scales(const MediumParams& params, cplx chi0);

}  // namespace rydloss
