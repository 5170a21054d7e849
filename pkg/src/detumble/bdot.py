"""B-dot detumbling laws: full 3-axis and the single-axis restriction.

Both command the maximum dipole magnitude against the measured field rate.
The single-axis variant keeps the full-vector normalization and simply takes
the x row, so its output is the x component of the 3-axis command.
"""

import numpy as np

# Field rates in LEO are orders of magnitude above this; the guard only
# protects the normalization against a genuinely unobservable rate.
BDOT_EPS_T_PER_S = 1e-12


def bdot_command_full(bdot: np.ndarray, m_max: float) -> np.ndarray:
    """Dipole command -m_max * bdot/|bdot| on all three axes."""
    if m_max <= 0.0:
        raise ValueError("m_max must be positive")
    bdot = np.asarray(bdot, dtype=float)
    norm = float(np.sqrt(bdot @ bdot))
    if norm < BDOT_EPS_T_PER_S:
        return np.zeros(3)
    return -m_max / norm * bdot


def bdot_command_single_axis(bdot: np.ndarray, m_max: float) -> np.ndarray:
    """x-axis-only dipole command [-m_max * bdot_x/|bdot|, 0, 0]."""
    if m_max <= 0.0:
        raise ValueError("m_max must be positive")
    bdot = np.asarray(bdot, dtype=float)
    norm = float(np.sqrt(bdot @ bdot))
    if norm < BDOT_EPS_T_PER_S:
        return np.zeros(3)
    return np.array([-m_max / norm * bdot[0], 0.0, 0.0])
