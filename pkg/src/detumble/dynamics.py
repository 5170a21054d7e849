"""Rigid-body rotational dynamics, magnetic torque, and energy diagnostics.

Angular rates are body-frame 3-vectors [rad/s], torques body-frame [N*m],
dipole commands [A*m^2], magnetic fields [T]. All functions are pure.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class InertiaTensor:
    """Principal moments of inertia [kg*m^2].

    The principal frame is assumed aligned with the body axes; products of
    inertia are out of scope. Physical realizability requires positive
    moments satisfying the triangle inequalities.
    """

    jx: float
    jy: float
    jz: float

    def __post_init__(self):
        if min(self.jx, self.jy, self.jz) <= 0.0:
            raise ValueError("principal moments of inertia must be strictly positive")
        if (self.jx + self.jy < self.jz or self.jy + self.jz < self.jx
                or self.jz + self.jx < self.jy):
            raise ValueError("inertia moments violate the triangle inequalities")

    def as_array(self) -> np.ndarray:
        return np.array([self.jx, self.jy, self.jz])


def magnetic_torque(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Torque m x b produced by a dipole m in field b.

    For a single-axis dipole [m_x, 0, 0] this reduces to
    [0, -b_z*m_x, b_y*m_x]: no torque can be produced along the coil axis.
    """
    return kernels.cross3(np.asarray(m, dtype=float), np.asarray(b, dtype=float))


def euler_rates(w: np.ndarray, torque: np.ndarray, inertia: InertiaTensor) -> np.ndarray:
    """Body-frame angular acceleration from the rigid-body Euler equations."""
    return kernels.euler_rates(np.asarray(w, dtype=float),
                               np.asarray(torque, dtype=float),
                               inertia.as_array())


def quaternion_rate(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Kinematic rate of the scalar-first attitude quaternion for body rates w."""
    return kernels.quat_rate(np.asarray(q, dtype=float), np.asarray(w, dtype=float))


def quaternion_normalize(q: np.ndarray) -> np.ndarray:
    return kernels.quat_normalize(np.asarray(q, dtype=float))


def lyapunov_value(w: np.ndarray, inertia: InertiaTensor) -> float:
    """Rotational kinetic energy 0.5 * w^T J w [J]; zero only at rest."""
    return float(kernels.kinetic_energy(np.asarray(w, dtype=float), inertia.as_array()))


def lyapunov_rate(w: np.ndarray, torque: np.ndarray) -> float:
    """Time derivative of the kinetic energy under a control torque: w^T T [W].

    The gyroscopic terms do no work, so only the applied torque appears.
    """
    w = np.asarray(w, dtype=float)
    torque = np.asarray(torque, dtype=float)
    return float(w[0] * torque[0] + w[1] * torque[1] + w[2] * torque[2])


def angular_momentum(w: np.ndarray, inertia: InertiaTensor) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    j = inertia.as_array()
    return j * w
