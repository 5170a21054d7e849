"""Continuation/GMRES model-predictive controller for single-axis detumbling.

The controller minimizes a switched quadratic rate cost over a short receding
horizon, with the actuator limit |m_x| <= m_max rewritten as the equality
m_x^2 + v^2 = m_max^2 through a dummy input v. Stationarity of the stage
Hamiltonian in (m_x, v) plus the equality itself form a 3N algebraic system
F(U, w, t) = 0 in the stacked per-stage unknowns U = [m_x, v, rho, ...].

Rather than re-solving F = 0 at every sampling instant, the solution is
tracked by integrating dF/dt = -zeta*F: each control period one matrix-free
GMRES solve yields dU/dt from forward differences of F, and U advances by a
single explicit step. A damped Newton solve provides the consistent U at the
initial time.

The heavy lifting lives in :mod:`detumble.kernels`; this module owns the
parameter types, the public operation surface, and the stateful controller
wrapper used by the simulation loop.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import InertiaTensor

Q_AXIS_DEFAULT = 10.0 ** 3.5


class InitializationError(RuntimeError):
    """Newton iteration on the initial KKT system failed to converge."""


@dataclass(frozen=True)
class WeightSchedule:
    """Switched state weights plus constant input weights.

    ``q_high_rate`` applies while |w_x| is at or above the threshold,
    ``q_low_rate`` below it. The x weight stays large in both regimes; the
    transverse weights are small at first (so the controller may amplify
    those axes while it works on x) and large at the end (to finish all
    three axes).
    """

    threshold_deg_s: float = 0.1
    q_high_rate: tuple = (Q_AXIS_DEFAULT, 1e-2, 1e-2)
    q_low_rate: tuple = (Q_AXIS_DEFAULT, 10.0, 10.0)
    r1: float = 1e-2
    r2: float = 1e-5

    def __post_init__(self):
        if self.threshold_deg_s <= 0.0:
            raise ValueError("switch threshold must be positive")
        for q in (*self.q_high_rate, *self.q_low_rate, self.r1, self.r2):
            if q <= 0.0:
                raise ValueError("all weights must be positive")

    @property
    def threshold_rad_s(self) -> float:
        return math.radians(self.threshold_deg_s)


@dataclass(frozen=True)
class HorizonConfig:
    """Prediction horizon length [s] and its discretization count."""

    horizon_s: float = 14.0
    steps: int = 40

    def __post_init__(self):
        if self.horizon_s <= 0.0:
            raise ValueError("horizon length must be positive")
        if self.steps < 1:
            raise ValueError("horizon must contain at least one stage")

    @property
    def dtau(self) -> float:
        return self.horizon_s / self.steps


@dataclass(frozen=True)
class ContinuationParams:
    """Continuation gain, difference step, sampling period, GMRES limits.

    In the closed loop each continuation update is followed by Newton
    corrector passes that drive |F| back below ``restore_tol`` (at most
    ``restore_passes`` of them); they scrub the second-order error the
    explicit update leaves in the optimality system, which otherwise
    accumulates in the actuator-equality rows. Zero passes give the plain
    continuation method.
    """

    zeta: float = 10.0
    fd_step: float = 1e-6
    sampling_period: float = 0.1
    gmres_max_iters: int = 120
    gmres_tol: float = 1e-8
    restore_passes: int = 10
    restore_tol: float = 1e-6

    def __post_init__(self):
        if self.zeta <= 0.0:
            raise ValueError("continuation gain zeta must be positive")
        if not 0.0 < self.fd_step < self.sampling_period:
            raise ValueError("difference step must satisfy 0 < h < sampling period")
        if self.gmres_max_iters < 1:
            raise ValueError("gmres_max_iters must be at least 1")
        if self.restore_passes < 0:
            raise ValueError("restore_passes must be non-negative")
        if self.restore_tol <= 0.0:
            raise ValueError("restore_tol must be positive")


@dataclass(frozen=True)
class ControlStage:
    """One horizon stage: dipole command, dummy input, constraint multiplier."""

    mx: float
    v: float
    rho: float = 0.0


@dataclass(frozen=True)
class HorizonContext:
    """Frozen per-step problem data consumed by the KKT residual."""

    b_profile: np.ndarray  # (N, 3) body-frame field per stage
    weights: np.ndarray    # [q1, q2, q3, r1, r2]
    horizon: HorizonConfig
    inertia: InertiaTensor
    m_max: float

    def inertia_array(self) -> np.ndarray:
        return self.inertia.as_array()


def select_weights(w: np.ndarray, schedule: WeightSchedule):
    """Active weight vector [q1, q2, q3, r1, r2] and the condition index.

    The boundary |w_x| == threshold maps to condition 1 (high-rate set).
    """
    cond = 1 if abs(float(w[0])) >= schedule.threshold_rad_s else 2
    q = schedule.q_high_rate if cond == 1 else schedule.q_low_rate
    return np.array([q[0], q[1], q[2], schedule.r1, schedule.r2]), cond


def stage_cost(w: np.ndarray, stage: ControlStage, weights: np.ndarray) -> float:
    """Running cost rate: quadratic rate penalty + R1*m_x^2 - R2*v."""
    return float(kernels.stage_cost(np.asarray(w, dtype=float),
                                    stage.mx, stage.v,
                                    np.asarray(weights, dtype=float)))


def terminal_cost(w: np.ndarray) -> float:
    """Unit-weight terminal penalty 0.5*|w|^2 (deliberately not Q-weighted)."""
    w = np.asarray(w, dtype=float)
    return float(0.5 * (w @ w))


def hamiltonian(w, stage: ControlStage, lam, b, weights, inertia: InertiaTensor,
                m_max: float) -> float:
    """Stage cost + costate-weighted dynamics + multiplier-weighted equality."""
    return float(kernels.hamiltonian(
        np.asarray(w, dtype=float), stage.mx, stage.v, stage.rho,
        np.asarray(lam, dtype=float), np.asarray(b, dtype=float),
        np.asarray(weights, dtype=float), inertia.as_array(), m_max))


def hamiltonian_grad_u(stage: ControlStage, lam, b, weights,
                       inertia: InertiaTensor) -> np.ndarray:
    """[dH/dm_x, dH/dv]; the angular rate does not enter either component."""
    g_mx, g_v = kernels.hamiltonian_grad_u(
        stage.mx, stage.v, stage.rho,
        np.asarray(lam, dtype=float), np.asarray(b, dtype=float),
        np.asarray(weights, dtype=float), inertia.as_array())
    return np.array([g_mx, g_v])


def hamiltonian_grad_w(w, lam, weights, inertia: InertiaTensor) -> np.ndarray:
    """dH/dw: weighted rates plus gyroscopic coupling through the costate."""
    return kernels.hamiltonian_grad_w(
        np.asarray(w, dtype=float), np.asarray(lam, dtype=float),
        np.asarray(weights, dtype=float), inertia.as_array())


def forward_rollout(w_now, u_traj, b_profile, horizon: HorizonConfig,
                    inertia: InertiaTensor) -> np.ndarray:
    """Explicit-Euler predicted rates over the horizon, shape (N+1, 3)."""
    u_traj = np.asarray(u_traj, dtype=float)
    b_profile = np.ascontiguousarray(b_profile, dtype=float)
    if u_traj.shape[0] != 3 * b_profile.shape[0]:
        raise ValueError("solution vector length must be 3x the stage count")
    return kernels.rollout(np.asarray(w_now, dtype=float), u_traj, b_profile,
                           horizon.dtau, inertia.as_array())


def backward_costates(states, u_traj, b_profile, weights,
                      horizon: HorizonConfig, inertia: InertiaTensor) -> np.ndarray:
    """Backward sweep of the costates; row i pairs with stage i, shape (N, 3)."""
    return kernels.costates(np.ascontiguousarray(states, dtype=float),
                            np.asarray(u_traj, dtype=float),
                            np.ascontiguousarray(b_profile, dtype=float),
                            np.asarray(weights, dtype=float),
                            horizon.dtau, inertia.as_array())


def kkt_residual(u_traj, w_now, ctx: HorizonContext) -> np.ndarray:
    """Stacked optimality residual F(U, w), length 3N."""
    return kernels.kkt_residual(np.asarray(u_traj, dtype=float),
                                np.asarray(w_now, dtype=float),
                                np.ascontiguousarray(ctx.b_profile, dtype=float),
                                np.asarray(ctx.weights, dtype=float),
                                ctx.horizon.dtau, ctx.inertia_array(), ctx.m_max)


@dataclass(frozen=True)
class GmresResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    breakdown: bool


def gmres_solve(apply_operator, rhs, max_iters: int, tol: float) -> GmresResult:
    """Matrix-free GMRES with modified Gram-Schmidt and Givens rotations.

    ``apply_operator`` maps a vector to A@v. Iteration stops when the rotated
    residual estimate drops below tol*|rhs|, the Krylov space exhausts, or a
    zero Arnoldi norm is hit; the returned residual norm is recomputed as the
    true |rhs - A@x|. ``breakdown`` is set when a zero Arnoldi norm leaves
    the residual above tolerance (a singular operator on the visited space).
    """
    rhs = np.asarray(rhs, dtype=float)
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    n = rhs.shape[0]
    beta = float(np.linalg.norm(rhs))
    if beta == 0.0:
        return GmresResult(np.zeros(n), 0.0, 0, False)

    m = min(max_iters, n)
    basis = np.zeros((m + 1, n))
    hess = np.zeros((m + 1, m))
    resid_rot = np.zeros(m + 1)
    giv_c = np.zeros(m)
    giv_s = np.zeros(m)
    basis[0] = rhs / beta
    resid_rot[0] = beta

    k_used = 0
    iters = 0
    hit_zero_norm = False
    for k in range(m):
        vec = np.asarray(apply_operator(basis[k]), dtype=float)
        for i in range(k + 1):
            hij = float(basis[i] @ vec)
            hess[i, k] = hij
            vec = vec - hij * basis[i]
        h_next = float(np.linalg.norm(vec))
        hess[k + 1, k] = h_next
        for i in range(k):
            tmp = giv_c[i] * hess[i, k] + giv_s[i] * hess[i + 1, k]
            hess[i + 1, k] = -giv_s[i] * hess[i, k] + giv_c[i] * hess[i + 1, k]
            hess[i, k] = tmp
        denom = math.hypot(hess[k, k], h_next)
        if denom == 0.0:
            hit_zero_norm = True
            break
        giv_c[k] = hess[k, k] / denom
        giv_s[k] = h_next / denom
        hess[k, k] = denom
        hess[k + 1, k] = 0.0
        resid_rot[k + 1] = -giv_s[k] * resid_rot[k]
        resid_rot[k] = giv_c[k] * resid_rot[k]
        k_used = k + 1
        iters = k + 1
        if h_next == 0.0:
            hit_zero_norm = True
            break
        basis[k + 1] = vec / h_next
        if abs(resid_rot[k + 1]) <= tol * beta:
            break

    x = np.zeros(n)
    if k_used > 0:
        y = np.zeros(k_used)
        for i in range(k_used - 1, -1, -1):
            acc = resid_rot[i]
            for col in range(i + 1, k_used):
                acc -= hess[i, col] * y[col]
            y[i] = acc / hess[i, i]
        x = basis[:k_used].T @ y

    true_resid = float(np.linalg.norm(rhs - np.asarray(apply_operator(x), dtype=float)))
    breakdown = hit_zero_norm and true_resid > tol * beta
    return GmresResult(x, true_resid, iters, breakdown)


@dataclass(frozen=True)
class ContinuationResult:
    u_traj: np.ndarray
    fnorm_before: float
    gmres_iterations: int
    breakdown: bool


def continuation_step(u_traj, w_now, w_rate, params: ContinuationParams,
                      ctx: HorizonContext) -> ContinuationResult:
    """Advance the solution vector by one sampling period of dF/dt = -zeta*F.

    On GMRES breakdown the solution vector is returned unchanged with the
    flag set; the caller logs it and carries on.
    """
    u_new, fnorm, iters, broke = kernels.continuation_step(
        np.asarray(u_traj, dtype=float),
        np.asarray(w_now, dtype=float),
        np.asarray(w_rate, dtype=float),
        np.ascontiguousarray(ctx.b_profile, dtype=float),
        np.asarray(ctx.weights, dtype=float),
        ctx.horizon.dtau, ctx.inertia_array(), ctx.m_max,
        params.zeta, params.fd_step, params.sampling_period,
        params.gmres_max_iters, params.gmres_tol)
    return ContinuationResult(u_new, float(fnorm), int(iters), bool(broke))


def init_tolerance(stages: int, m_max: float) -> float:
    """Newton stopping tolerance for the initial-time solve."""
    return 1e-8 * math.sqrt(3.0 * stages) * m_max * m_max


def initialize_solution(w0, ctx: HorizonContext, max_iters: int = 100) -> np.ndarray:
    """Solve F(U, w0) = 0 at the initial time by damped Newton iteration.

    Seeded at (m_x, v, rho) = (0, m_max, r2/(2 m_max)) per stage, which makes
    the dummy-input stationarity and equality rows exactly zero; for w0 = 0
    the seed is already the solution.
    """
    nstage = ctx.b_profile.shape[0]
    tol = init_tolerance(nstage, ctx.m_max)
    u, fnorm, iters, ok = kernels.newton_init(
        np.asarray(w0, dtype=float),
        np.ascontiguousarray(ctx.b_profile, dtype=float),
        np.asarray(ctx.weights, dtype=float),
        ctx.horizon.dtau, ctx.inertia_array(), ctx.m_max,
        tol, max_iters, 1e-7)
    if not ok:
        raise InitializationError(
            f"initial KKT solve stalled at |F|={fnorm:.3e} after {iters} iterations "
            f"(tolerance {tol:.3e})")
    return u


def mpc_command(u_traj, m_max: float) -> np.ndarray:
    """First-stage dipole command, clamped to the actuator limit."""
    mx = float(np.clip(u_traj[0], -m_max, m_max))
    return np.array([mx, 0.0, 0.0])


@dataclass
class MpcStepResult:
    command: np.ndarray
    mx: float
    v0: float
    rho0: float
    f_norm: float
    condition: int
    clamped: bool
    gmres_iterations: int
    breakdown: bool


@dataclass
class MpcController:
    """Stateful wrapper owning the solution vector across control steps.

    One instance serves one simulation loop; the field over the horizon is
    held at the current body-frame sample and the weights are frozen at the
    set selected from the current rate.
    """

    inertia: InertiaTensor
    m_max: float
    schedule: WeightSchedule = field(default_factory=WeightSchedule)
    horizon: HorizonConfig = field(default_factory=HorizonConfig)
    params: ContinuationParams = field(default_factory=ContinuationParams)

    def __post_init__(self):
        self.u_traj = None
        self._j = self.inertia.as_array()
        self._wts = {
            1: np.array([*self.schedule.q_high_rate, self.schedule.r1, self.schedule.r2]),
            2: np.array([*self.schedule.q_low_rate, self.schedule.r1, self.schedule.r2]),
        }
        self._b_profile = np.zeros((self.horizon.steps, 3))

    def _select(self, w, b_body):
        cond = 1 if abs(float(w[0])) >= self.schedule.threshold_rad_s else 2
        self._b_profile[:] = b_body
        return self._wts[cond], cond

    def context(self, w, b_body) -> HorizonContext:
        weights, _ = select_weights(w, self.schedule)
        b_profile = np.tile(np.asarray(b_body, dtype=float), (self.horizon.steps, 1))
        return HorizonContext(b_profile, weights, self.horizon, self.inertia, self.m_max)

    def initialize(self, w0, b_body) -> float:
        """Newton-solve the initial solution vector; returns its |F|."""
        w0 = np.asarray(w0, dtype=float)
        ctx = self.context(w0, b_body)
        self.u_traj = initialize_solution(w0, ctx)
        resid = kkt_residual(self.u_traj, w0, ctx)
        return float(np.linalg.norm(resid))

    def step(self, w, b_body) -> MpcStepResult:
        """One control period: continuation update, correctors, stage-0 command."""
        w = np.asarray(w, dtype=float)
        b = np.asarray(b_body, dtype=float)
        if self.u_traj is None:
            self.initialize(w, b)
        wts, cond = self._select(w, b)
        dtau = self.horizon.dtau
        p = self.params

        mx_prev = min(max(self.u_traj[0], -self.m_max), self.m_max)
        torque = np.array([0.0, -b[2] * mx_prev, b[1] * mx_prev])
        w_rate = kernels.euler_rates(w, torque, self._j)

        u_new, _, iters, breakdown = kernels.continuation_step(
            self.u_traj, w, w_rate, self._b_profile, wts, dtau, self._j,
            self.m_max, p.zeta, p.fd_step, p.sampling_period,
            p.gmres_max_iters, p.gmres_tol)
        if p.restore_passes > 0:
            u_new, f_norm, extra = kernels.restoration_steps(
                u_new, w, self._b_profile, wts, dtau, self._j, self.m_max,
                p.fd_step, p.gmres_max_iters, p.gmres_tol, p.restore_passes,
                p.restore_tol)
            iters += extra
        else:
            resid = kernels.kkt_residual(u_new, w, self._b_profile, wts, dtau,
                                         self._j, self.m_max)
            f_norm = np.sqrt(resid @ resid)
        self.u_traj = u_new

        mx = min(max(float(u_new[0]), -self.m_max), self.m_max)
        return MpcStepResult(
            command=np.array([mx, 0.0, 0.0]),
            mx=mx,
            v0=float(u_new[1]),
            rho0=float(u_new[2]),
            f_norm=float(f_norm),
            condition=cond,
            clamped=abs(float(u_new[0])) > self.m_max,
            gmres_iterations=int(iters),
            breakdown=bool(breakdown),
        )
