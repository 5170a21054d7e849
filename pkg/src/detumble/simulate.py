"""Closed-loop scenario execution and detumbling metrics.

The loop runs one controller evaluation per control period: propagate the
orbit, evaluate the geomagnetic field, rotate it into the body frame with the
current attitude, command the dipole, then integrate the rigid-body state
with RK4 while both the command and the field sample are held (zero-order
hold). One record is logged per control step, including the step at the
final time, so a run of duration D with period dt yields floor(D/dt)+1 rows.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .bdot import bdot_command_full, bdot_command_single_axis
from .cgmres import ContinuationParams, HorizonConfig, MpcController, WeightSchedule
from .config import ScenarioConfig
from .dynamics import InertiaTensor


@dataclass(frozen=True)
class BodyState:
    """Angular velocity [rad/s] plus scalar-first attitude quaternion."""

    w: np.ndarray
    q: np.ndarray

    @staticmethod
    def at_rest() -> "BodyState":
        return BodyState(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


def rk4_step(state: BodyState, torque: np.ndarray, inertia: InertiaTensor,
             dt: float) -> BodyState:
    """One RK4 step of the coupled (w, q) system with the torque held fixed."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    w_new, q_new = kernels.rk4_step(np.asarray(state.w, dtype=float),
                                    np.asarray(state.q, dtype=float),
                                    np.asarray(torque, dtype=float),
                                    inertia.as_array(), float(dt))
    return BodyState(w_new, q_new)


class Trace:
    """Column-oriented log of a closed-loop run, one row per control step.

    MPC-only columns (v, rho0, f_norm, condition, clamped) hold NaN / 0 for
    the B-dot controllers and are skipped on CSV output.
    """

    def __init__(self, n: int, controller: str):
        self.controller = controller
        self.t = np.zeros(n)
        self.omega = np.zeros((n, 3))
        self.quat = np.zeros((n, 4))
        self.b_body = np.zeros((n, 3))
        self.mx = np.zeros(n)
        self.v = np.full(n, np.nan)
        self.rho0 = np.full(n, np.nan)
        self.f_norm = np.full(n, np.nan)
        self.lyap = np.zeros(n)
        self.condition = np.zeros(n, dtype=np.int64)
        self.clamped = np.zeros(n, dtype=bool)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def is_mpc(self) -> bool:
        return self.controller == "mpc"

    def truncated(self, n: int) -> "Trace":
        out = Trace(0, self.controller)
        for name in ("t", "omega", "quat", "b_body", "mx", "v", "rho0",
                     "f_norm", "lyap", "condition", "clamped"):
            setattr(out, name, getattr(self, name)[:n].copy())
        return out


@dataclass
class DetumbleMetrics:
    """Per-axis settle times and run extrema.

    A settle time is the first instant from which the axis rate stays below
    the threshold for the remainder of the run; None marks an unsettled axis.
    min_v and max_f_norm are None for the B-dot controllers.
    """

    settle_time_s: dict
    final_rates_rad_s: tuple
    max_f_norm: float
    min_v: float
    settle_threshold_deg_s: float


class SimulationAborted(RuntimeError):
    """Non-finite state was detected; the partial trace is preserved."""

    def __init__(self, step_index: int, trace: Trace):
        super().__init__(f"non-finite state after record {step_index - 1}; "
                         f"{step_index} records retained")
        self.step_index = step_index
        self.trace = trace


def _make_controller(cfg: ScenarioConfig):
    if cfg.controller == "mpc":
        return MpcController(cfg.inertia, cfg.m_max, cfg.weights, cfg.horizon, cfg.mpc)
    return None


def run_scenario(cfg: ScenarioConfig):
    """Run the closed loop described by cfg; returns (trace, metrics)."""
    dt = cfg.control_period_s
    n_steps = int(math.floor(cfg.duration_s / dt + 1e-9))
    n_inner = int(round(dt / cfg.inner_step_s))
    n_records = n_steps + 1

    j = cfg.inertia.as_array()
    inc = math.radians(cfg.orbit.inclination_deg)
    raan = math.radians(cfg.orbit.raan_deg)
    argp = math.radians(cfg.orbit.arg_perigee_deg)
    m0 = math.radians(cfg.orbit.mean_anomaly_deg)
    tilt = math.radians(cfg.field.tilt_deg)
    phase0 = math.radians(cfg.field.phase0_deg)
    rotating = cfg.field.mode == "tilted"

    from .orbit import EARTH_RADIUS_KM, KEPLER_MAX_ITERS, KEPLER_TOL_RAD, MU_EARTH_KM3_S2

    mpc = _make_controller(cfg)
    w = np.array(cfg.initial_rates, dtype=float)
    q = np.array([1.0, 0.0, 0.0, 0.0])
    b_prev = None

    trace = Trace(n_records, cfg.controller)
    for k in range(n_records):
        t = k * dt
        r_eci, ok = kernels.orbit_position(
            cfg.orbit.semi_major_axis_km, cfg.orbit.eccentricity,
            inc, raan, argp, m0, MU_EARTH_KM3_S2, t,
            KEPLER_TOL_RAD, KEPLER_MAX_ITERS)
        if not ok:
            raise SimulationAborted(k, trace.truncated(k))
        b_eci = kernels.dipole_field(r_eci, t, cfg.field.b0_tesla, EARTH_RADIUS_KM,
                                     tilt, cfg.field.rotation_rate_rad_s,
                                     phase0, rotating)
        b_body = kernels.rotate_to_body(q, b_eci)

        if mpc is not None:
            if k == 0:
                mpc.initialize(w, b_body)
            step = mpc.step(w, b_body)
            m_cmd = step.command
            trace.v[k] = step.v0
            trace.rho0[k] = step.rho0
            trace.f_norm[k] = step.f_norm
            trace.condition[k] = step.condition
            trace.clamped[k] = step.clamped
        else:
            if b_prev is None:
                bdot = np.zeros(3)
            else:
                bdot = (b_body - b_prev) / dt
            b_prev = b_body
            if cfg.controller == "bdot-full":
                m_cmd = bdot_command_full(bdot, cfg.m_max)
            else:
                m_cmd = bdot_command_single_axis(bdot, cfg.m_max)

        torque = kernels.cross3(m_cmd, b_body)

        trace.t[k] = t
        trace.omega[k] = w
        trace.quat[k] = q
        trace.b_body[k] = b_body
        trace.mx[k] = m_cmd[0]
        trace.lyap[k] = kernels.kinetic_energy(w, j)

        if k < n_steps:
            for _ in range(n_inner):
                w, q = kernels.rk4_step(w, q, torque, j, cfg.inner_step_s)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
                raise SimulationAborted(k + 1, trace.truncated(k + 1))

    metrics = compute_metrics(trace, cfg.settle_threshold_deg_s)
    return trace, metrics


def compute_metrics(trace: Trace, settle_threshold_deg_s: float) -> DetumbleMetrics:
    """Settle times ("stays below" definition) and run extrema from a trace."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    thr = math.radians(settle_threshold_deg_s)
    settle = {}
    for idx, axis in enumerate("xyz"):
        above = np.abs(trace.omega[:, idx]) >= thr
        if not above.any():
            settle[axis] = float(trace.t[0])
        else:
            last_above = int(np.flatnonzero(above)[-1])
            if last_above + 1 >= len(trace):
                settle[axis] = None
            else:
                settle[axis] = float(trace.t[last_above + 1])
    if trace.is_mpc:
        max_f = float(np.nanmax(trace.f_norm))
        min_v = float(np.nanmin(trace.v))
    else:
        max_f = None
        min_v = None
    return DetumbleMetrics(
        settle_time_s=settle,
        final_rates_rad_s=tuple(float(x) for x in trace.omega[-1]),
        max_f_norm=max_f,
        min_v=min_v,
        settle_threshold_deg_s=settle_threshold_deg_s,
    )
