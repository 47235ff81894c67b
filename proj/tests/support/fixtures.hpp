#pragma once

#include <map>
#include <string>

#include "rydloss/medium.hpp"

namespace fixtures {

/// Measured values (Ω_c 23.5, γ_s 0.4 MHz).
inline rydloss::MediumParams experiment(double delta = 15.0, double delta_s = 0.0) {
  return rydloss::from_experiment_units({{"omega_c_MHz", 23.5},
                                         {"gamma_MHz", 7.0},
                                         {"gamma_s_MHz", 0.4},
                                         {"delta_MHz", delta},
                                         {"delta_s_MHz", delta_s},
                                         {"OD", 37.0},
                                         {"sigma_z_um", 40.0}});
}

/// Simulation parameters of the correlation maps (Ω_c 25, γ 0.3 MHz).
inline rydloss::MediumParams simulation(double delta = 20.0, double delta_s = 0.0) {
  return rydloss::from_experiment_units({{"omega_c_MHz", 25.0},
                                         {"gamma_MHz", 7.0},
                                         {"gamma_s_MHz", 0.3},
                                         {"delta_MHz", delta},
                                         {"delta_s_MHz", delta_s},
                                         {"OD", 37.0},
                                         {"sigma_z_um", 40.0}});
}

}  // namespace fixtures
