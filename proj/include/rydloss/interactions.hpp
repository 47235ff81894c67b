#pragma once

#include <vector>

#include "rydloss/medium.hpp"

namespace rydloss {

/// Which detuning enters χ̄. The exact form uses Δ̃; Plain substitutes Δ for
/// side-by-side comparison with the "neglect the difference" approximation.
enum class DeltaConvention { Tilde, Plain };

/// Two-excitation saturation response χ̄(ω).
cplx chi_bar(cplx omega, const MediumParams& params,
             DeltaConvention convention = DeltaConvention::Tilde);

struct PotentialSample {
  double r;
  cplx value;
};

/// V_e(ω, r) = C₆/(r⁶ - χ̄C₆).
PotentialSample effective_potential(cplx omega, double r, const MediumParams& params);

/// (|C₆ χ̄(ω)|)^{1/6}; throws ResonanceError where χ̄ vanishes.
double blockade_radius(cplx omega, const MediumParams& params);

enum class FourierMethod { Residues, Quadrature };

/// Ṽ_q[ω] = ∫dr e^{-iqr} V_e(ω, r) over the whole line.
cplx potential_ft(double q, cplx omega, const MediumParams& params,
                  FourierMethod method = FourierMethod::Residues);

/// Same transform for a precomputed χ̄ (hot loops evaluate χ̄ once per energy).
cplx potential_ft_from_chi(double q, cplx chi, double c6);

/// (2π/3)C₆/a⁵ with a the principal sixth root of -χ̄C₆.
cplx potential_ft_zero_closed_form(cplx omega, const MediumParams& params);

enum class ResonanceMethod { ClosedForm, NumericRoot };

struct ResonanceCurves {
  double delta0;
  double delta_plus;
  ResonanceMethod method;
};

const char* to_string(ResonanceMethod m);

/// δ₀ (χ̄(0) = 0) and δ₊ (χ̄(-ω₊) = 0) for the params' Ω_c and δ_s.
/// The closed form holds for |δ_s| ≪ Ω_c; numeric roots use the lossless problem.
ResonanceCurves resonance_detunings(const MediumParams& params, ResonanceMethod method);

/// Positions of the local minima of |χ̄(0)| and |χ̄(-ω₊)| in δ over [lo, hi]
/// for the lossy problem (broadened resonances).
struct BroadenedResonances {
  std::vector<double> chi0_minima;
  std::vector<double> chi_plus_minima;
};
BroadenedResonances broadened_resonances(const MediumParams& params, double lo, double hi,
                                         int samples = 400);

struct InverseChiPlus {
  cplx value;          ///< 1/χ̄(-ω₊), general Δ_s
  cplx value_ds0;      ///< same expression with Δ_s → 0
  cplx cancellation;   ///< √(Δ̃² + Ω²) - 3Δ̃, squared away against the density of states
};

/// Closed form of 1/χ̄ at -ω₊ (Δ replaced by Δ̃).
InverseChiPlus inv_chi_at_minus_omega_plus(const MediumParams& params);

}  // namespace rydloss
