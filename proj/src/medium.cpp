#include "rydloss/medium.hpp"

#include <cmath>

namespace rydloss {

std::string to_string(ProfileKind kind) {
  return kind == ProfileKind::Gaussian ? "gaussian" : "homogeneous";
}

ProfileKind profile_from_string(const std::string& name) {
  if (name == "gaussian") return ProfileKind::Gaussian;
  if (name == "homogeneous") return ProfileKind::Homogeneous;
  throw ValidationError("profile", "expected 'gaussian' or 'homogeneous', got '" + name + "'");
}

void MediumParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(name, "must be positive and finite");
  };
  positive(g_peak, "g_peak");
  positive(omega_c, "omega_c_rabi");
  positive(gamma_p, "gamma_p");
  if (!(gamma_s >= 0.0) || !std::isfinite(gamma_s))
    throw ValidationError("gamma_s", "must be non-negative and finite");
  positive(od, "od");
  positive(sigma_z, "sigma_z");
  positive(light_speed, "light_speed");
  if (!std::isfinite(delta)) throw ValidationError("delta", "must be finite");
  if (!std::isfinite(delta_s)) throw ValidationError("delta_s", "must be finite");
  if (!std::isfinite(c6)) throw ValidationError("c6", "must be finite");
}

MediumParams MediumParams::lossless() const {
  MediumParams p = *this;
  p.gamma_p = 0.0;
  p.gamma_s = 0.0;
  return p;
}

double calibrated_coupling(double od, double gamma_p, double sigma_z, ProfileKind kind,
                           double light_speed) {
  // ∫g² dz = g_peak² · (√(2π)σ_z for a Gaussian, L for a flat cloud)
  const double integral = kind == ProfileKind::Gaussian
                              ? std::sqrt(kTwoPi) * sigma_z
                              : kHomogeneousLengthPerSigma * sigma_z;
  return std::sqrt(od * light_speed * gamma_p / (4.0 * integral));
}

namespace {

double require(const std::map<std::string, double>& values, const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw ValidationError(key, "missing required key");
  return it->second;
}

}  // namespace

MediumParams from_experiment_units(const std::map<std::string, double>& values,
                                   ProfileKind profile) {
  MediumParams p;
  p.profile = profile;
  p.omega_c = mhz_to_angular(require(values, "omega_c_MHz"));
  p.gamma_p = mhz_to_angular(require(values, "gamma_MHz"));
  p.gamma_s = mhz_to_angular(require(values, "gamma_s_MHz"));
  p.delta = mhz_to_angular(require(values, "delta_MHz"));
  p.delta_s = mhz_to_angular(require(values, "delta_s_MHz"));
  p.od = require(values, "OD");
  p.sigma_z = require(values, "sigma_z_um");
  if (auto it = values.find("light_speed_um_per_us"); it != values.end())
    p.light_speed = it->second;
  auto c6 = values.find("C6");
  p.c6 = mhz_to_angular(c6 != values.end() ? c6->second : kDefaultC6MHz);

  // Validate the linewidth/OD/size fields before they feed the calibration.
  if (!(p.gamma_p > 0.0)) throw ValidationError("gamma_p", "must be positive and finite");
  if (!(p.od > 0.0)) throw ValidationError("od", "must be positive and finite");
  if (!(p.sigma_z > 0.0)) throw ValidationError("sigma_z", "must be positive and finite");

  if (auto it = values.find("g_MHz"); it != values.end())
    p.g_peak = mhz_to_angular(it->second);
  else
    p.g_peak = calibrated_coupling(p.od, p.gamma_p, p.sigma_z, profile, p.light_speed);
  p.validate();
  return p;
}

std::map<std::string, double> to_experiment_units(const MediumParams& p) {
  return {
      {"g_MHz", angular_to_mhz(p.g_peak)},
      {"omega_c_MHz", angular_to_mhz(p.omega_c)},
      {"gamma_MHz", angular_to_mhz(p.gamma_p)},
      {"gamma_s_MHz", angular_to_mhz(p.gamma_s)},
      {"delta_MHz", angular_to_mhz(p.delta)},
      {"delta_s_MHz", angular_to_mhz(p.delta_s)},
      {"C6", angular_to_mhz(p.c6)},
      {"OD", p.od},
      {"sigma_z_um", p.sigma_z},
      {"light_speed_um_per_us", p.light_speed},
  };
}

DerivedScales derive_scales(const MediumParams& p, cplx chi0) {
  if (chi0 == cplx{0.0, 0.0} || !std::isfinite(std::abs(chi0)))
    throw ResonanceError(
        "chi_bar(0) vanishes: operating point sits on the delta_0 resonance; "
        "evaluate with finite linewidths or move off resonance");
  DerivedScales s;
  s.cap_delta = p.cap_delta();
  s.cap_delta_s = p.cap_delta_s();
  s.cap_delta_tilde = p.cap_delta_tilde();
  const double c = p.light_speed;
  const double g2 = p.g_peak * p.g_peak;
  s.mass = -2.0 * g2 * g2 / (s.cap_delta * p.omega_c * p.omega_c * c * c);
  const double abs_delta = std::abs(s.cap_delta);
  s.omega_c_scale = p.omega_c * p.omega_c / (4.0 * abs_delta);
  s.k_c = g2 / (c * abs_delta);
  s.r_b = std::pow(std::abs(p.c6 * chi0), 1.0 / 6.0);
  s.od_b = p.od * s.r_b / (std::sqrt(kTwoPi) * p.sigma_z);
  s.phi = s.r_b * std::sqrt(std::abs(s.mass) / std::abs(chi0));
  return s;
}

}  // namespace rydloss
