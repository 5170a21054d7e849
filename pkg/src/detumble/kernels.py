"""Hot numerical kernels shared by the dynamics, orbit, and MPC layers.

Everything here is plain Python over float64 numpy arrays, compiled with
numba when :data:`detumble.accel.USING_NUMBA` is true. The functions are
deliberately scalar-indexed rather than vectorized: the arrays involved are
tiny (3-vectors, a 3N solution vector) and the call counts are huge (tens of
residual evaluations per control step, ~1.5e5 control steps per scenario).

Conventions:
    * quaternions are scalar-first [q0, q1, q2, q3] and map body vectors to
      inertial ones; ``rotate_to_body`` applies the conjugate rotation.
    * the solution vector of the predictive controller packs one
      [m_x, v, rho] triple per horizon stage, length 3*N.
    * weight vectors ``wts`` pack [q1, q2, q3, r1, r2].
"""

import numpy as np

from .accel import jit

# ---------------------------------------------------------------------------
# rigid-body dynamics
# ---------------------------------------------------------------------------


@jit
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@jit
def euler_rates(w, torque, j):
    """Angular acceleration of a principal-axes rigid body."""
    out = np.empty(3)
    out[0] = ((j[1] - j[2]) * w[1] * w[2] + torque[0]) / j[0]
    out[1] = ((j[2] - j[0]) * w[2] * w[0] + torque[1]) / j[1]
    out[2] = ((j[0] - j[1]) * w[0] * w[1] + torque[2]) / j[2]
    return out


@jit
def kinetic_energy(w, j):
    return 0.5 * (j[0] * w[0] * w[0] + j[1] * w[1] * w[1] + j[2] * w[2] * w[2])


@jit
def quat_rate(q, w):
    """dq/dt = 0.5 * q * (0, w) for body rates w (Hamilton product)."""
    out = np.empty(4)
    out[0] = -0.5 * (q[1] * w[0] + q[2] * w[1] + q[3] * w[2])
    out[1] = 0.5 * (q[0] * w[0] + q[2] * w[2] - q[3] * w[1])
    out[2] = 0.5 * (q[0] * w[1] + q[3] * w[0] - q[1] * w[2])
    out[3] = 0.5 * (q[0] * w[2] + q[1] * w[1] - q[2] * w[0])
    return out


@jit
def quat_normalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@jit
def rotate_to_body(q, v):
    """Apply R(q)^T to an inertial vector, giving body-frame components."""
    q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
    out = np.empty(3)
    out[0] = ((1.0 - 2.0 * (q2 * q2 + q3 * q3)) * v[0]
              + 2.0 * (q1 * q2 + q0 * q3) * v[1]
              + 2.0 * (q1 * q3 - q0 * q2) * v[2])
    out[1] = (2.0 * (q1 * q2 - q0 * q3) * v[0]
              + (1.0 - 2.0 * (q1 * q1 + q3 * q3)) * v[1]
              + 2.0 * (q2 * q3 + q0 * q1) * v[2])
    out[2] = (2.0 * (q1 * q3 + q0 * q2) * v[0]
              + 2.0 * (q2 * q3 - q0 * q1) * v[1]
              + (1.0 - 2.0 * (q1 * q1 + q2 * q2)) * v[2])
    return out


@jit
def rk4_step(w, q, torque, j, dt):
    """One classical RK4 step of the coupled (w, q) system, torque held fixed.

    The quaternion is renormalized after the step.
    """
    k1w = euler_rates(w, torque, j)
    k1q = quat_rate(q, w)

    w2 = w + 0.5 * dt * k1w
    q2 = q + 0.5 * dt * k1q
    k2w = euler_rates(w2, torque, j)
    k2q = quat_rate(q2, w2)

    w3 = w + 0.5 * dt * k2w
    q3 = q + 0.5 * dt * k2q
    k3w = euler_rates(w3, torque, j)
    k3q = quat_rate(q3, w3)

    w4 = w + dt * k3w
    q4 = q + dt * k3q
    k4w = euler_rates(w4, torque, j)
    k4q = quat_rate(q4, w4)

    w_new = w + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    q_new = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    return w_new, quat_normalize(q_new)


# ---------------------------------------------------------------------------
# orbit and geomagnetic field
# ---------------------------------------------------------------------------


@jit
def kepler_eccentric_anomaly(mean_anom, ecc, tol, max_iters):
    """Newton solve of E - e*sin(E) = M, seeded at M. Returns (E, converged)."""
    e_anom = mean_anom
    for _ in range(max_iters):
        resid = e_anom - ecc * np.sin(e_anom) - mean_anom
        if np.abs(resid) < tol:
            return e_anom, True
        e_anom -= resid / (1.0 - ecc * np.cos(e_anom))
    resid = e_anom - ecc * np.sin(e_anom) - mean_anom
    return e_anom, np.abs(resid) < tol


@jit
def orbit_position(a, ecc, inc, raan, argp, mean_anom0, mu, t, tol, max_iters):
    """Two-body inertial position [km] at epoch + t seconds.

    Angles in radians. Returns (r_eci, converged).
    """
    n_mean = np.sqrt(mu / (a * a * a))
    mean_anom = np.mod(mean_anom0 + n_mean * t, 2.0 * np.pi)
    e_anom, ok = kepler_eccentric_anomaly(mean_anom, ecc, tol, max_iters)
    half = 0.5 * e_anom
    true_anom = 2.0 * np.arctan2(np.sqrt(1.0 + ecc) * np.sin(half),
                                 np.sqrt(1.0 - ecc) * np.cos(half))
    r = a * (1.0 - ecc * np.cos(e_anom))
    x_pf = r * np.cos(true_anom)
    y_pf = r * np.sin(true_anom)

    co, so = np.cos(raan), np.sin(raan)
    ci, si = np.cos(inc), np.sin(inc)
    cw, sw = np.cos(argp), np.sin(argp)
    # perifocal basis vectors expressed in ECI
    px = co * cw - so * sw * ci
    py = so * cw + co * sw * ci
    pz = sw * si
    qx = -co * sw - so * cw * ci
    qy = -so * sw + co * cw * ci
    qz = cw * si

    out = np.empty(3)
    out[0] = x_pf * px + y_pf * qx
    out[1] = x_pf * py + y_pf * qy
    out[2] = x_pf * pz + y_pf * qz
    return out, ok


@jit
def dipole_field(r, t, b0, r_ref, tilt, rot_rate, phase0, rotating):
    """Centered-dipole field [T] at inertial position r [km].

    B = b0 * (r_ref/|r|)^3 * (3 (m.r^)r^ - m) with unit dipole axis m tilted
    off +z and, in rotating mode, spun about +z at rot_rate.
    """
    phase = phase0 + (rot_rate * t if rotating else 0.0)
    st, ct = np.sin(tilt), np.cos(tilt)
    ax = st * np.cos(phase)
    ay = st * np.sin(phase)
    az = ct

    rmag = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    rx, ry, rz = r[0] / rmag, r[1] / rmag, r[2] / rmag
    dot = ax * rx + ay * ry + az * rz
    scale = b0 * (r_ref / rmag) ** 3

    out = np.empty(3)
    out[0] = scale * (3.0 * dot * rx - ax)
    out[1] = scale * (3.0 * dot * ry - ay)
    out[2] = scale * (3.0 * dot * rz - az)
    return out


# ---------------------------------------------------------------------------
# predictive controller: horizon rollout, costates, KKT residual
# ---------------------------------------------------------------------------


@jit
def stage_cost(w, mx, v, wts):
    return (0.5 * (wts[0] * w[0] * w[0] + wts[1] * w[1] * w[1] + wts[2] * w[2] * w[2])
            + wts[3] * mx * mx - wts[4] * v)


@jit
def hamiltonian(w, mx, v, rho, lam, b, wts, j, m_max):
    wdx = (j[1] - j[2]) * w[1] * w[2] / j[0]
    wdy = ((j[2] - j[0]) * w[2] * w[0] - b[2] * mx) / j[1]
    wdz = ((j[0] - j[1]) * w[0] * w[1] + b[1] * mx) / j[2]
    return (stage_cost(w, mx, v, wts)
            + lam[0] * wdx + lam[1] * wdy + lam[2] * wdz
            + rho * (mx * mx + v * v - m_max * m_max))


@jit
def hamiltonian_grad_u(mx, v, rho, lam, b, wts, j):
    """(dH/dm_x, dH/dv); independent of the angular rate."""
    g_mx = 2.0 * wts[3] * mx - lam[1] * b[2] / j[1] + lam[2] * b[1] / j[2] + 2.0 * rho * mx
    g_v = -wts[4] + 2.0 * rho * v
    return g_mx, g_v


@jit
def hamiltonian_grad_w(w, lam, wts, j):
    """dH/dw; the torque terms drop out, only cost + gyroscopic coupling remain."""
    cx = (j[1] - j[2]) / j[0]
    cy = (j[2] - j[0]) / j[1]
    cz = (j[0] - j[1]) / j[2]
    out = np.empty(3)
    out[0] = wts[0] * w[0] + lam[1] * cy * w[2] + lam[2] * cz * w[1]
    out[1] = wts[1] * w[1] + lam[0] * cx * w[2] + lam[2] * cz * w[0]
    out[2] = wts[2] * w[2] + lam[0] * cx * w[1] + lam[1] * cy * w[0]
    return out


@jit
def rollout(w_now, u_traj, b_profile, dtau, j):
    """Explicit-Euler state prediction over the horizon; returns (N+1, 3)."""
    nstage = b_profile.shape[0]
    states = np.empty((nstage + 1, 3))
    states[0, 0] = w_now[0]
    states[0, 1] = w_now[1]
    states[0, 2] = w_now[2]
    for i in range(nstage):
        wx, wy, wz = states[i, 0], states[i, 1], states[i, 2]
        mx = u_traj[3 * i]
        states[i + 1, 0] = wx + dtau * ((j[1] - j[2]) * wy * wz / j[0])
        states[i + 1, 1] = wy + dtau * (((j[2] - j[0]) * wz * wx - b_profile[i, 2] * mx) / j[1])
        states[i + 1, 2] = wz + dtau * (((j[0] - j[1]) * wx * wy + b_profile[i, 1] * mx) / j[2])
    return states


@jit
def costates(states, u_traj, b_profile, wts, dtau, j):
    """Backward costate sweep; row i holds the costate paired with stage i.

    Terminal condition is the gradient of the unit-weight terminal cost,
    i.e. the predicted final rate itself.
    """
    nstage = b_profile.shape[0]
    lam = np.empty((nstage, 3))
    lam[nstage - 1, 0] = states[nstage, 0]
    lam[nstage - 1, 1] = states[nstage, 1]
    lam[nstage - 1, 2] = states[nstage, 2]
    cx = (j[1] - j[2]) / j[0]
    cy = (j[2] - j[0]) / j[1]
    cz = (j[0] - j[1]) / j[2]
    for i in range(nstage - 1, 0, -1):
        wx, wy, wz = states[i, 0], states[i, 1], states[i, 2]
        lx, ly, lz = lam[i, 0], lam[i, 1], lam[i, 2]
        lam[i - 1, 0] = lx + dtau * (wts[0] * wx + ly * cy * wz + lz * cz * wy)
        lam[i - 1, 1] = ly + dtau * (wts[1] * wy + lx * cx * wz + lz * cz * wx)
        lam[i - 1, 2] = lz + dtau * (wts[2] * wz + lx * cx * wy + ly * cy * wx)
    return lam


@jit
def kkt_residual(u_traj, w_now, b_profile, wts, dtau, j, m_max):
    """Stacked first-order optimality system, 3 rows per stage.

    Rows per stage i: dH/dm_x and dH/dv at (state_i, u_i, costate_{i+1}),
    then the dummy-input equality m_x^2 + v^2 - m_max^2.
    """
    nstage = b_profile.shape[0]
    states = rollout(w_now, u_traj, b_profile, dtau, j)
    lam = costates(states, u_traj, b_profile, wts, dtau, j)
    out = np.empty(3 * nstage)
    mm2 = m_max * m_max
    for i in range(nstage):
        mx = u_traj[3 * i]
        v = u_traj[3 * i + 1]
        rho = u_traj[3 * i + 2]
        out[3 * i] = (2.0 * wts[3] * mx
                      - lam[i, 1] * b_profile[i, 2] / j[1]
                      + lam[i, 2] * b_profile[i, 1] / j[2]
                      + 2.0 * rho * mx)
        out[3 * i + 1] = -wts[4] + 2.0 * rho * v
        out[3 * i + 2] = mx * mx + v * v - mm2
    return out


# ---------------------------------------------------------------------------
# continuation update with matrix-free GMRES
# ---------------------------------------------------------------------------


@jit
def gmres_fd(u_base, w_eval, f_base, rhs, b_profile, wts, dtau, j, m_max,
             fd_step, max_iters, tol):
    """GMRES on the forward-difference Jacobian action of the KKT residual.

    The operator is v -> (F(u_base + fd_step*v, w_eval) - f_base)/fd_step.
    Returns (solution, iterations, breakdown); breakdown means a zero Arnoldi
    norm before the rotated residual estimate reached tol*|rhs|.
    """
    n = u_base.shape[0]
    sol = np.zeros(n)
    beta = np.sqrt(np.dot(rhs, rhs))
    if beta == 0.0:
        return sol, 0, False

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
    breakdown = False
    for k in range(m):
        pert = u_base + fd_step * basis[k]
        f_pert = kkt_residual(pert, w_eval, b_profile, wts, dtau, j, m_max)
        vec = (f_pert - f_base) / fd_step
        for i in range(k + 1):
            hij = np.dot(basis[i], vec)
            hess[i, k] = hij
            vec = vec - hij * basis[i]
        h_next = np.sqrt(np.dot(vec, vec))
        hess[k + 1, k] = h_next
        for i in range(k):
            tmp = giv_c[i] * hess[i, k] + giv_s[i] * hess[i + 1, k]
            hess[i + 1, k] = -giv_s[i] * hess[i, k] + giv_c[i] * hess[i + 1, k]
            hess[i, k] = tmp
        denom = np.sqrt(hess[k, k] ** 2 + h_next ** 2)
        if denom == 0.0:
            breakdown = True
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
            breakdown = np.abs(resid_rot[k + 1]) > tol * beta
            break
        basis[k + 1] = vec / h_next
        if np.abs(resid_rot[k + 1]) <= tol * beta:
            break

    if k_used > 0:
        y = np.zeros(k_used)
        for i in range(k_used - 1, -1, -1):
            acc = resid_rot[i]
            for col in range(i + 1, k_used):
                acc -= hess[i, col] * y[col]
            y[i] = acc / hess[i, i]
        for i in range(k_used):
            sol = sol + y[i] * basis[i]
    return sol, iters, breakdown


@jit
def continuation_step(u_traj, w_now, w_rate, b_profile, wts, dtau, j, m_max,
                      zeta, fd_step, dt, max_iters, tol):
    """One continuation update of the solution vector.

    Solves the forward-difference linearization of the exponential-decay
    condition dF/dt = -zeta*F for dU/dt with matrix-free GMRES, then returns
    U + dt*dU/dt. A breakdown (zero Arnoldi norm with the residual still
    above tolerance) leaves U unchanged and sets the flag.

    Returns (u_new, fnorm_before, gmres_iters, breakdown).
    """
    f_now = kkt_residual(u_traj, w_now, b_profile, wts, dtau, j, m_max)
    fnorm = np.sqrt(np.dot(f_now, f_now))

    w_adv = w_now + fd_step * w_rate
    f_adv = kkt_residual(u_traj, w_adv, b_profile, wts, dtau, j, m_max)

    rhs = -zeta * f_now - (f_adv - f_now) / fd_step
    udot, iters, breakdown = gmres_fd(u_traj, w_adv, f_adv, rhs, b_profile,
                                      wts, dtau, j, m_max, fd_step, max_iters, tol)
    if breakdown:
        return u_traj.copy(), fnorm, iters, True
    return u_traj + dt * udot, fnorm, iters, False


@jit
def restoration_steps(u_traj, w_now, b_profile, wts, dtau, j, m_max,
                      fd_step, max_iters, tol, passes, target):
    """Newton corrector passes that pin the residual back below ``target``.

    One continuation update leaves second-order error in the optimality
    system, most visibly in the actuator-equality rows (their curvature is
    exactly 2); each pass solves J dU = -F at the current state with the
    same matrix-free GMRES and applies dU, halving the step while it fails
    to reduce |F|. Far from the solution the curvature makes early passes
    only mildly contractive, so the pass budget should be generous; typical
    tracking steps exit after one. Returns (u_new, fnorm_after,
    total_gmres_iters).
    """
    u = u_traj
    f = kkt_residual(u, w_now, b_profile, wts, dtau, j, m_max)
    fnorm = np.sqrt(np.dot(f, f))
    total_iters = 0
    for _ in range(passes):
        if fnorm <= target:
            break
        du, iters, breakdown = gmres_fd(u, w_now, f, -f, b_profile, wts,
                                        dtau, j, m_max, fd_step, max_iters, tol)
        total_iters += iters
        if breakdown:
            break
        alpha = 1.0
        accepted = False
        for _ in range(12):
            u_try = u + alpha * du
            f_try = kkt_residual(u_try, w_now, b_profile, wts, dtau, j, m_max)
            fn_try = np.sqrt(np.dot(f_try, f_try))
            if fn_try < fnorm:
                u = u_try
                f = f_try
                fnorm = fn_try
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
    return u, fnorm, total_iters


@jit
def newton_init(w_now, b_profile, wts, dtau, j, m_max, tol, max_iters, fd_step):
    """Damped Newton solve of the KKT system for the warm-start solution.

    Seeds every stage at (m_x, v, rho) = (0, m_max, r2/(2 m_max)), which
    already satisfies the dummy-input rows exactly. Jacobian columns come
    from forward differences. Returns (u, fnorm, iterations, converged).
    """
    nstage = b_profile.shape[0]
    n = 3 * nstage
    u = np.empty(n)
    rho_seed = wts[4] / (2.0 * m_max)
    for i in range(nstage):
        u[3 * i] = 0.0
        u[3 * i + 1] = m_max
        u[3 * i + 2] = rho_seed
    f = kkt_residual(u, w_now, b_profile, wts, dtau, j, m_max)
    fnorm = np.sqrt(np.dot(f, f))
    it = 0
    while fnorm > tol and it < max_iters:
        jac = np.empty((n, n))
        for col in range(n):
            u_pert = u.copy()
            u_pert[col] += fd_step
            f_pert = kkt_residual(u_pert, w_now, b_profile, wts, dtau, j, m_max)
            for row in range(n):
                jac[row, col] = (f_pert[row] - f[row]) / fd_step
        step = np.linalg.solve(jac, -f)
        alpha = 1.0
        improved = False
        for _ in range(40):
            u_try = u + alpha * step
            f_try = kkt_residual(u_try, w_now, b_profile, wts, dtau, j, m_max)
            fn_try = np.sqrt(np.dot(f_try, f_try))
            if fn_try < fnorm:
                u = u_try
                f = f_try
                fnorm = fn_try
                improved = True
                break
            alpha *= 0.5
        it += 1
        if not improved:
            break
    return u, fnorm, it, fnorm <= tol
