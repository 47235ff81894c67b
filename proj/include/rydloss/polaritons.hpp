#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rydloss/medium.hpp"

namespace rydloss {

using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

/// Polariton branches. Values index the ascending real-eigenvalue order at the seed.
enum class Branch { L = 0, D = 1, U = 2 };

const char* to_string(Branch b);

/// Single-excitation Hamiltonian in the {E, P, S} basis.
Matrix3c hamiltonian(double q, const MediumParams& params);

/// Continuity-tracked branches over a momentum grid.
struct BranchSpectrum {
  std::vector<double> q;
  std::array<std::vector<cplx>, 3> omega;
  std::array<std::vector<cplx>, 3> rydberg_overlap;  ///< S component of the unit eigenvector
  std::array<std::vector<Vector3c>, 3> eigenvectors;
  std::size_t seed_index = 0;

  const std::vector<cplx>& omega_of(Branch b) const { return omega[static_cast<int>(b)]; }
  const std::vector<cplx>& overlap_of(Branch b) const {
    return rydberg_overlap[static_cast<int>(b)];
  }
  const std::vector<Vector3c>& vectors_of(Branch b) const {
    return eigenvectors[static_cast<int>(b)];
  }
};

/// Tracks branches outward from the grid point nearest `q0` by maximal
/// eigenvector overlap. Throws TrackingError when adjacent overlaps drop below 0.5.
BranchSpectrum branch_spectrum(std::span<const double> q_grid, const MediumParams& params,
                               double q0 = 0.0);

struct VelocityEstimate {
  cplx value;
  double error_estimate;
};

/// dω/dq on a branch by a refined centered stencil around `q`.
/// `q` must be interior to the spectrum's grid.
VelocityEstimate group_velocity(Branch branch, double q, const BranchSpectrum& spectrum,
                                const MediumParams& params);

/// Flat-band saturation energy ω₊ (Δ replaced by Δ̃ for finite γ_s).
cplx omega_plus(const MediumParams& params);

/// Momentum argument of G_ss; an empty k means the k → ∞ limit.
struct PropagatorQuery {
  std::optional<double> k;
  cplx omega;

  static PropagatorQuery finite(double k, cplx omega) { return {k, omega}; }
  static PropagatorQuery infinite(cplx omega) { return {std::nullopt, omega}; }
};

/// Rydberg-projected single-body propagator ((ω - H(k))⁻¹)_SS in closed form.
cplx g_ss(const PropagatorQuery& query, const MediumParams& params);

/// 1/v_g at complex energy ω from the exact inverse of the dispersion relation,
/// cq(ω) = ω - g²(ω - h_S)/[(ω - h_S)(ω - h_P) - Ω²/4].
cplx inverse_group_velocity_at(cplx omega, const MediumParams& params);

/// Momentum on the dispersion surface at energy ω (same inverse relation).
cplx momentum_at_energy(cplx omega, const MediumParams& params);

/// 1/v_g(-2ω₊) from the large-g closed form (general Δ_s).
cplx inverse_group_velocity_closed_form(const MediumParams& params);
/// The Δ_s → 0 reduction of the closed form.
cplx inverse_group_velocity_closed_form_ds0(const MediumParams& params);

/// Hermitian (Γ = γ_s = 0) dispersion: branches are the sorted eigenvalues.
class LosslessDispersion {
 public:
  explicit LosslessDispersion(const MediumParams& params);

  struct Point {
    double omega;
    double velocity;  ///< c|E|² by Hellmann-Feynman
    Eigen::Vector3d vector;
  };

  Point at(Branch b, double q) const;
  double omega(Branch b, double q) const { return at(b, q).omega; }
  /// Inverse dispersion; unique on each branch's energy range.
  double momentum_at(double omega) const;
  /// Open energy interval spanned by the dark branch, (ω₋, ω₊^block).
  std::pair<double, double> dark_range() const { return dark_range_; }
  const MediumParams& params() const { return params_; }

 private:
  MediumParams params_;
  std::pair<double, double> dark_range_;
};

/// A branch eigenpair of the lossy Hamiltonian, labelled by continuation
/// from the lossless eigenvector of the same branch at the same q.
struct BranchState {
  cplx omega;
  cplx rydberg;
  Vector3c vector;
};

BranchState resolve_branch(Branch b, double q, const MediumParams& params);

}  // namespace rydloss
