"""Closed-loop time-domain simulation of the delayed boundary-controlled plant.

The PDE is advanced by Crank-Nicolson on a uniform grid with the two
boundary conditions imposed as algebraic rows at the new time level, the
right one carrying the delayed control value.  The modal observer is
integrated by the trapezoidal rule with endpoint-averaged innovation, and
the predictor integral is discretized by the composite trapezoid over the
stored control history, solving the resulting scalar fixed point for the
current control value exactly.  All three pieces are second order in dt,
which is checked by the test suite through dt-halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_banded

from .certification import Certificate
from .errors import (BlowupDetected, ConfigError, DimensionError,
                     MissingHistory, NonPositiveData)
from .spectral import CertificateKind, Measurement, PlantSpec, SpectralData

__all__ = ["Trajectory", "simulate", "fit_decay_rate", "lyapunov_diagnostic"]

#: Simulation aborts when max|z| exceeds this multiple of 1 + max|z0|.
BLOWUP_FACTOR = 1e6

_REL_TOL = 1e-9


@dataclass(frozen=True)
class Trajectory:
    """Recorded closed-loop (or open-loop) trajectory.

    Arrays are indexed by recorded time; ``snapshots[k]`` is the full grid
    state at ``times[k]``.  ``u`` is the control value and ``u_delayed``
    the value actually entering the boundary at that instant.
    ``modal_error`` holds z_n - zhat_n for the observed modes.
    ``v_series`` stays None until :func:`lyapunov_diagnostic` fills it.
    """

    times: np.ndarray
    x: np.ndarray
    snapshots: np.ndarray
    u: np.ndarray
    u_delayed: np.ndarray
    zhat: np.ndarray
    artstein: np.ndarray
    modal_error: np.ndarray
    norms_l2: np.ndarray
    norms_h1: np.ndarray
    dt: float
    delay: float
    n0: int
    v_series: np.ndarray | None = None


def _steps_of(span: float, dt: float, what: str) -> int:
    steps = int(round(span / dt))
    if steps < 1 or abs(steps * dt - span) > _REL_TOL * max(1.0, span):
        raise ConfigError(f"{what} = {span} is not a positive multiple of dt = {dt}")
    return steps


def _boundary_rows(plant: PlantSpec, dx: float) -> tuple[np.ndarray, np.ndarray]:
    c1, s1 = math.cos(plant.theta1), math.sin(plant.theta1)
    c2, s2 = math.cos(plant.theta2), math.sin(plant.theta2)
    left = np.array([c1 + 3.0 * s1 / (2.0 * dx), -4.0 * s1 / (2.0 * dx),
                     s1 / (2.0 * dx)])
    right = np.array([s2 / (2.0 * dx), -4.0 * s2 / (2.0 * dx),
                      c2 + 3.0 * s2 / (2.0 * dx)])
    return left, right


def _initial_state(plant: PlantSpec, z0, x: np.ndarray) -> np.ndarray:
    vals = np.asarray([float(z0(xi)) for xi in x])
    if not np.all(np.isfinite(vals)):
        raise ConfigError("initial condition evaluates to non-finite values")
    deriv = getattr(z0, "derivative", None)
    if deriv is not None:
        d0, d1 = float(deriv(0.0)), float(deriv(1.0))
    else:
        e = 1e-5
        d0 = (-3.0 * z0(0.0) + 4.0 * z0(e) - z0(2 * e)) / (2 * e)
        d1 = (3.0 * z0(1.0) - 4.0 * z0(1 - e) + z0(1 - 2 * e)) / (2 * e)
    c1, s1 = math.cos(plant.theta1), math.sin(plant.theta1)
    c2, s2 = math.cos(plant.theta2), math.sin(plant.theta2)
    tol = 1e-6 * (1.0 + float(np.max(np.abs(vals))))
    res_left = abs(c1 * vals[0] - s1 * d0)
    res_right = abs(c2 * vals[-1] + s2 * d1)
    if res_left > tol or res_right > tol:
        raise ConfigError(
            f"initial condition violates the boundary conditions "
            f"(residuals {res_left:.2e}, {res_right:.2e}, tolerance {tol:.2e}); "
            "the delayed control is zero at t = 0 so both must be homogeneous")
    return vals


def _project_onto_modes(data: SpectralData, x_sim: np.ndarray,
                        snapshots: np.ndarray) -> np.ndarray:
    """Modal coefficients of grid snapshots, via the spectral grid.

    Snapshots are interpolated onto the fine eigenfunction grid before
    quadrature so that high modes stay resolved.
    """
    fine = np.vstack([np.interp(data.x, x_sim, row) for row in snapshots])
    weights = np.full(data.x.size, data.dx)
    weights[0] = weights[-1] = 0.5 * data.dx
    return fine @ (data.eigvecs * weights[:, None])


def _grid_norms(x: np.ndarray, snapshots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dx = x[1] - x[0]
    trapz = getattr(np, "trapezoid", np.trapz)
    l2_sq = trapz(snapshots ** 2, dx=dx, axis=1)
    grad = np.gradient(snapshots, dx, axis=1)
    h1_sq = l2_sq + trapz(grad ** 2, dx=dx, axis=1)
    return np.sqrt(l2_sq), np.sqrt(h1_sq)


def simulate(plant: PlantSpec, data: SpectralData, gains, N: int, z0,
             T: float, dt: float | None = None, grid_points: int = 201,
             record_stride: int = 1, open_loop: bool = False) -> Trajectory:
    """Run the delayed closed loop from rest observer state.

    ``z0`` must be callable on [0, 1] and satisfy both boundary conditions
    (the control history is identically zero for t < 0).  ``dt`` defaults
    to delay/200 and must divide both the delay and the horizon exactly.
    The control at each step solves the implicit predictor relation, so no
    extrapolation of the input history is involved.
    """
    if data.beta_n is None or data.b_n is None:
        raise DimensionError("spectral data lacks projections; run project_sources")
    if not gains.n0 <= N <= data.n_modes:
        raise DimensionError(
            f"observer dimension N = {N} outside [{gains.n0}, {data.n_modes}]")
    if grid_points < 5:
        raise ConfigError("grid_points must be at least 5")
    h = plant.delay
    if dt is None:
        dt = h / 200.0
    if dt > h + _REL_TOL:
        raise ConfigError("dt must not exceed the delay")
    m_h = _steps_of(h, dt, "delay")
    n_steps = _steps_of(T, dt, "horizon")
    if record_stride < 1 or n_steps % record_stride != 0:
        raise ConfigError(
            f"record_stride = {record_stride} must divide n_steps = {n_steps}")

    x = np.linspace(0.0, 1.0, grid_points)
    dx = x[1] - x[0]
    z = _initial_state(plant, z0, x)
    blow_limit = BLOWUP_FACTOR * (1.0 + float(np.max(np.abs(z))))

    # Interior operator (p z_x)_x - q~ z; boundary rows are algebraic.
    p_half = np.asarray([plant.p(xi) for xi in 0.5 * (x[:-1] + x[1:])])
    q_vals = np.asarray([plant.q_tilde(xi) for xi in x])
    lo = p_half[:-1] / dx ** 2
    hi = p_half[1:] / dx ** 2
    dg = -(p_half[:-1] + p_half[1:]) / dx ** 2 - q_vals[1:-1]

    G = grid_points
    ab = np.zeros((5, G))
    ab[1, 2:] = -0.5 * dt * hi
    ab[2, 1:-1] = 1.0 - 0.5 * dt * dg
    ab[3, :-2] = -0.5 * dt * lo
    row_l, row_r = _boundary_rows(plant, dx)
    ab[2, 0], ab[1, 1], ab[0, 2] = row_l
    ab[4, G - 3], ab[3, G - 2], ab[2, G - 1] = row_r

    def apply_interior(v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[1:-1] = lo * v[:-2] + dg * v[1:-1] + hi * v[2:]
        out[0] = out[-1] = 0.0
        return out

    neumann = plant.measurement is Measurement.NEUMANN

    def measure(v: np.ndarray) -> float:
        if neumann:
            return float((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx))
        return float(v[0])

    # Observer: d zhat/dt = M zhat + r(t) with output injection on the
    # first n0 components only.
    n0 = gains.n0
    mu = -data.lam[:N] + data.split.q_c
    traces = (data.dphi0 if neumann else data.phi0)[:N]
    beta_N = data.beta_n[:N]
    b_N = data.b_n[:N]
    l_full = np.zeros(N)
    l_full[:n0] = gains.L
    M = np.diag(mu) - np.outer(l_full, traces)
    lu = lu_factor(np.eye(N) - 0.5 * dt * M)
    expl = np.eye(N) + 0.5 * dt * M
    phib = float(traces @ b_N)

    def injection(y: float, u_d: float) -> np.ndarray:
        return beta_N * u_d + l_full * (y - phib * u_d)

    # Predictor quadrature weights over the delay window.
    mu0 = mu[:n0]
    exp_h = np.exp(mu0 * h)
    j = np.arange(m_h + 1)
    W = dt * np.exp(np.outer(j * dt, mu0)) * data.beta_n[:n0]
    W[0] *= 0.5
    W[-1] *= 0.5
    W_rev = W[1:][::-1]
    K = gains.K
    denom = 1.0 - float(K @ W[0])

    u_pad = np.zeros(m_h + n_steps + 1)
    zhat = np.zeros(N)
    za = exp_h * zhat[:n0]

    n_rec = n_steps // record_stride
    times = np.empty(n_rec + 1)
    snapshots = np.empty((n_rec + 1, G))
    u_rec = np.empty(n_rec + 1)
    ud_rec = np.empty(n_rec + 1)
    zhat_rec = np.empty((n_rec + 1, N))
    za_rec = np.empty((n_rec + 1, n0))
    times[0], snapshots[0] = 0.0, z
    u_rec[0] = ud_rec[0] = 0.0
    zhat_rec[0], za_rec[0] = zhat, za

    for m in range(n_steps):
        y_old = measure(z)
        ud_old = u_pad[m]
        rhs = z + 0.5 * dt * apply_interior(z)
        rhs[0] = 0.0
        rhs[-1] = u_pad[m + 1]
        z = solve_banded((2, 2), ab, rhs)
        peak = float(np.max(np.abs(z)))
        if not np.isfinite(peak) or peak > blow_limit:
            raise BlowupDetected(
                f"solution magnitude {peak:.3e} exceeded the blow-up limit",
                time=(m + 1) * dt, norm=peak)
        ud_new = u_pad[m + 1]
        rhs_o = expl @ zhat + 0.5 * dt * (injection(y_old, ud_old)
                                          + injection(measure(z), ud_new))
        zhat = lu_solve(lu, rhs_o)
        za_part = exp_h * zhat[:n0] + u_pad[m + 1:m + 1 + m_h] @ W_rev
        if open_loop:
            u_new = 0.0
        else:
            u_new = float(K @ za_part) / denom
        za = za_part + W[0] * u_new
        u_pad[m_h + m + 1] = u_new
        step = m + 1
        if step % record_stride == 0:
            k = step // record_stride
            times[k] = step * dt
            snapshots[k] = z
            u_rec[k] = u_new
            ud_rec[k] = ud_new
            zhat_rec[k] = zhat
            za_rec[k] = za

    modal = _project_onto_modes(data, x, snapshots)[:, :N] - zhat_rec
    norms_l2, norms_h1 = _grid_norms(x, snapshots)
    return Trajectory(times=times, x=x, snapshots=snapshots, u=u_rec,
                      u_delayed=ud_rec, zhat=zhat_rec, artstein=za_rec,
                      modal_error=modal, norms_l2=norms_l2, norms_h1=norms_h1,
                      dt=dt, delay=h, n0=n0)


def fit_decay_rate(series: np.ndarray, times: np.ndarray,
                   window: tuple[float, float]) -> float:
    """Exponential rate of ``series`` over the window, by log-linear fit.

    Positive return value means decay at that rate; negative means growth.
    """
    t0, t1 = window
    mask = (times >= t0 - _REL_TOL) & (times <= t1 + _REL_TOL)
    if int(mask.sum()) < 2:
        raise ConfigError(f"window [{t0}, {t1}] selects fewer than two samples")
    vals = np.asarray(series, dtype=float)[mask]
    if np.any(vals <= 0.0):
        raise NonPositiveData("series must be strictly positive for a log fit")
    slope = np.polyfit(times[mask], np.log(vals), 1)[0]
    return -float(slope)


def lyapunov_diagnostic(traj: Trajectory, plant: PlantSpec, data: SpectralData,
                        gains, cert: Certificate) -> np.ndarray:
    """Evaluate the certified Lyapunov functional along a trajectory.

    Rebuilds the certificate's extended state from recorded data (modal
    projections, scaled estimation errors, both predictor transforms) and
    adds the two exponentially weighted control-history integrals.  The
    certificate guarantees that the result times exp(2 delta t) is
    nonincreasing; the test suite checks this within a small tolerance.
    """
    if traj.zhat.shape[1] != cert.N:
        raise DimensionError(
            f"trajectory recorded N = {traj.zhat.shape[1]} modes, "
            f"certificate uses N = {cert.N}")
    if traj.times.size < 2:
        raise MissingHistory("trajectory holds fewer than two samples")
    dt_rec = float(traj.times[1] - traj.times[0])
    h = traj.delay
    s = int(round(h / dt_rec))
    if abs(s * dt_rec - h) > _REL_TOL * max(1.0, h):
        raise MissingHistory("recording stride is incommensurate with the delay")
    if s < 4:
        raise MissingHistory(
            f"only {s} recorded samples per delay window; need at least 4")

    N, n0 = cert.N, gains.n0
    delta, gamma = cert.delta, cert.gamma
    n_rec = traj.times.size
    mods = _project_onto_modes(data, traj.x, traj.snapshots)

    lam_mid = data.lam[n0:N]
    if cert.kind is CertificateKind.H1_NEUMANN:
        err_scale = lam_mid
    else:
        err_scale = np.sqrt(lam_mid)
    e_all = mods[:, :N] - traj.zhat
    z_tilde = traj.zhat[:, n0:N] / lam_mid

    # Second predictor transform on the remainder block, from recorded
    # control samples with zero history before t = 0.
    mu1 = -lam_mid + data.split.q_c
    b1t = data.beta_n[n0:N] / lam_mid
    jj = np.arange(s + 1)
    W2 = dt_rec * np.exp(np.outer(jj * dt_rec, mu1)) * b1t
    W2[0] *= 0.5
    W2[-1] *= 0.5
    u_hist = np.concatenate([np.zeros(s), traj.u])
    za2 = np.empty((n_rec, N - n0))
    exp_h1 = np.exp(mu1 * h)
    for k in range(n_rec):
        seg = u_hist[k:k + s + 1][::-1]
        za2[k] = exp_h1 * z_tilde[k] + seg @ W2

    X = np.hstack([traj.artstein, e_all[:, :n0], za2, e_all[:, n0:N] * err_scale])
    v0 = np.einsum("ki,ij,kj->k", X, cert.P, X)

    w_tail = mods[:, N:] + data.b_n[None, N:] * traj.u_delayed[:, None]
    if cert.kind is CertificateKind.L2_DIRICHLET:
        v0 = v0 + gamma * np.sum(w_tail ** 2, axis=1)
    else:
        v0 = v0 + gamma * (w_tail ** 2) @ data.lam[N:]

    g1 = np.einsum("ki,ij,kj->k", traj.artstein, cert.Q1, traj.artstein)
    dza = np.gradient(traj.artstein, dt_rec, axis=0)
    g2 = np.einsum("ki,ij,kj->k", dza, cert.Q2, dza)

    def weighted_window(g: np.ndarray) -> np.ndarray:
        out = np.empty(n_rec)
        for k in range(n_rec):
            j0 = max(0, k - s)
            idx = np.arange(j0, k + 1)
            if idx.size < 2:
                out[k] = 0.0
                continue
            integrand = np.exp(-2.0 * delta * (traj.times[k] - traj.times[idx])) * g[idx]
            w = np.full(idx.size, dt_rec)
            w[0] = w[-1] = 0.5 * dt_rec
            out[k] = float(integrand @ w)
        return out

    return v0 + weighted_window(g1) + weighted_window(g2)
