"""Physical constants.

Unit conventions used across the package: energies in eV, rates and Rabi
frequencies in 1/s (ordinary rates, no 2*pi), times in s, voltages in V,
magnetic field in T.  Detunings stored in eV are converted to angular
frequency by dividing by HBAR_EVS.
"""

HBAR_EVS = 6.582119569e-16
"""Reduced Planck constant, eV*s."""

MU_B_EV_PER_T = 5.7883818060e-5
"""Bohr magneton, eV/T."""

PACKAGE_VERSION = "0.1.0"
"""Artifact version stamped into every metadata document and manifest."""
