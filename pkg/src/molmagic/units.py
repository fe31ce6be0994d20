"""Physical constants and lab-unit conversions.

Internal quantities are SI: energies in J, frequencies as angular
frequencies in rad/s, fields in T and V/m, intensities in W/m^2 and
polarizabilities in J/(W/m^2).
"""

from math import pi

from scipy import constants as _c

h = _c.h
hbar = _c.hbar
c = _c.c
epsilon_0 = _c.epsilon_0
mu_N = _c.physical_constants["nuclear magneton"][0]
debye = 1e-21 / _c.c
TWO_PI = 2.0 * pi

GAUSS = 1e-4  # T
KV_PER_CM = 1e5  # V/m
W_PER_CM2 = 1e4  # W/m^2
# h * kHz / (W/cm^2) expressed in J / (W/m^2)
POL_UNIT = h * 1e3 / W_PER_CM2

FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12}


def angular(value: float, unit: str = "Hz") -> float:
    """Ordinary frequency in ``unit`` -> angular frequency in rad/s."""
    return TWO_PI * value * FREQ_UNITS[unit]


def to_freq(omega: float, unit: str = "Hz") -> float:
    """Angular frequency in rad/s -> ordinary frequency in ``unit``."""
    return omega / (TWO_PI * FREQ_UNITS[unit])


def energy_to_hz(energy):
    return energy / h


def pol_to_lab(alpha):
    """SI polarizability -> h*kHz/(W/cm^2)."""
    return alpha / POL_UNIT


def pol_from_lab(alpha):
    """h*kHz/(W/cm^2) -> SI polarizability."""
    return alpha * POL_UNIT
