"""Keplerian orbit propagation and a centered-dipole geomagnetic field.

Positions are Earth-centered-inertial kilometers. The dipole is a deliberate
simplification: it captures the field-magnitude and direction variation a
detumbling controller sees along a low-Earth orbit without spherical-harmonic
machinery. In "tilted" mode the dipole axis co-rotates with the Earth;
"aligned" mode pins it to +z for deterministic unit tests.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

MU_EARTH_KM3_S2 = 398600.4418
EARTH_RADIUS_KM = 6378.137
EARTH_ROTATION_RAD_S = 7.2921e-5

KEPLER_TOL_RAD = 1e-12
KEPLER_MAX_ITERS = 50


class KeplerConvergenceError(RuntimeError):
    """Newton iteration on Kepler's equation failed to reach tolerance."""


@dataclass(frozen=True)
class OrbitalElements:
    """Classical elements; angles in degrees, semi-major axis in km."""

    semi_major_axis_km: float
    eccentricity: float
    inclination_deg: float
    raan_deg: float
    arg_perigee_deg: float
    mean_anomaly_deg: float

    def __post_init__(self):
        if self.semi_major_axis_km <= EARTH_RADIUS_KM:
            raise ValueError("semi-major axis must exceed the Earth radius")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError("eccentricity must lie in [0, 1)")

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.semi_major_axis_km ** 3 / MU_EARTH_KM3_S2)


@dataclass(frozen=True)
class DipoleModelConfig:
    """Field strength at the reference radius plus axis orientation history."""

    b0_tesla: float = 3.12e-5
    tilt_deg: float = 11.44
    rotation_rate_rad_s: float = EARTH_ROTATION_RAD_S
    phase0_deg: float = 0.0
    mode: str = "tilted"

    def __post_init__(self):
        if self.b0_tesla <= 0.0:
            raise ValueError("reference field strength must be positive")
        if not 0.0 <= self.tilt_deg <= 20.0:
            raise ValueError("dipole tilt outside the supported [0, 20] deg band")
        if self.mode not in ("aligned", "tilted"):
            raise ValueError(f"unknown dipole mode {self.mode!r}")


def solve_kepler(mean_anomaly: float, eccentricity: float) -> float:
    """Eccentric anomaly E with |E - e*sin(E) - M| < 1e-12 rad."""
    if not 0.0 <= eccentricity < 1.0:
        raise ValueError("eccentricity must lie in [0, 1)")
    e_anom, ok = kernels.kepler_eccentric_anomaly(
        float(mean_anomaly), float(eccentricity), KEPLER_TOL_RAD, KEPLER_MAX_ITERS)
    if not ok:
        raise KeplerConvergenceError(
            f"Kepler iteration did not converge for M={mean_anomaly!r}, e={eccentricity!r}")
    return float(e_anom)


def propagate_position(elements: OrbitalElements, t: float) -> np.ndarray:
    """Two-body inertial position [km] at t seconds past the element epoch."""
    r, ok = kernels.orbit_position(
        elements.semi_major_axis_km,
        elements.eccentricity,
        math.radians(elements.inclination_deg),
        math.radians(elements.raan_deg),
        math.radians(elements.arg_perigee_deg),
        math.radians(elements.mean_anomaly_deg),
        MU_EARTH_KM3_S2,
        float(t),
        KEPLER_TOL_RAD,
        KEPLER_MAX_ITERS,
    )
    if not ok:
        raise KeplerConvergenceError(f"Kepler iteration did not converge at t={t!r}")
    return r


def dipole_field_inertial(r_eci_km: np.ndarray, t: float, cfg: DipoleModelConfig) -> np.ndarray:
    """Geomagnetic field [T] at an inertial position, at t seconds past epoch."""
    return kernels.dipole_field(
        np.asarray(r_eci_km, dtype=float),
        float(t),
        cfg.b0_tesla,
        EARTH_RADIUS_KM,
        math.radians(cfg.tilt_deg),
        cfg.rotation_rate_rad_s,
        math.radians(cfg.phase0_deg),
        cfg.mode == "tilted",
    )


def field_in_body(q: np.ndarray, b_eci: np.ndarray) -> np.ndarray:
    """Express an inertial field vector in the body frame of attitude q."""
    return kernels.rotate_to_body(np.asarray(q, dtype=float),
                                  np.asarray(b_eci, dtype=float))


def bdot_estimate(b_prev: np.ndarray, b_curr: np.ndarray, dt: float) -> np.ndarray:
    """Backward-difference estimate of the body-frame field rate [T/s]."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return (np.asarray(b_curr, dtype=float) - np.asarray(b_prev, dtype=float)) / dt
