"""Rydberg-polariton three-body loss.

Frequencies are nu = omega/2pi in MHz, lengths in um, time tags in integer ns.
"""

from ._rydloss import (
    BudgetError,
    ConvergenceError,
    Medium,
    NumericalError,
    PoleError,
    ResonanceError,
    TrackingError,
    ValidationError,
    WindowError,
    beta,
    beta_map,
    blockade_radius,
    chi_bar,
    correlate,
    dispersion,
    effective_potential,
    eta3,
    g_ss,
    omega_plus,
    resonances,
    scales,
    simulate,
    single_transmission,
    synth_tags,
)

SIMULATION_DEFAULTS = {
    "omega_c_MHz": 25.0,
    "gamma_MHz": 7.0,
    "gamma_s_MHz": 0.3,
    "delta_MHz": 22.5,
    "delta_s_MHz": 2.0,
    "OD": 37.0,
    "sigma_z_um": 40.0,
}


def preset(**overrides):
    """Medium at the simulation defaults, with keyword overrides in MHz/um."""
    values = dict(SIMULATION_DEFAULTS)
    profile = overrides.pop("profile", "gaussian")
    values.update(overrides)
    return Medium(values, profile)
