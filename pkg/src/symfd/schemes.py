"""Invariant numerical schemes and their non-invariant baselines.

Schwarzian ODE (third order, Mobius symmetry)
    The invariant step enforces a target cross-ratio
    R* = 1 / (2 (2 - h^2 F(x_i))) on each four-point window and solves the
    resulting fractional-linear equation for the new value in closed form.
    The invariantized residual uses the conjugate ratio Rbar:
    (1/h^2) [1/(Rbar - R) - 2] - F(x_i).

KdV equation u_t + u u_x + u_xxx = 0
    Six-point scheme (one node on the upper row):
        (u1_i - u0_i)/k + (u0_i - sigma_i/k)(Du_i + Du_{i-1})/2
                        + (D3u_i + D3u_{i-1})/2 = 0,
    with the nonuniform third difference
        D3u_i = (2/h_i) [ (Du_{i+1}-Du_i)/(h_{i+1}+h_i)
                        - (Du_i-Du_{i-1})/(h_i+h_{i-1}) ].
    Ten-point scheme: same structure with slopes and third differences
    averaged over both rows (implicit, solved by damped Newton with a
    banded finite-difference Jacobian).  Both residuals are relative
    invariants of weight lam^-5; k h_i^2 times the residual is the exact
    invariant combination, which is what invariance audits compare.

Burgers equation u_t + u u_x = nu u_xx
    Finite-volume step in conservative computational-variable form
    Delta_tau(x_s u) + k Delta_s f = 0 with high-order (centered) and
    low-order (upwind) flux discretizations blended by the minmod limiter
    evaluated on the smoothness ratio theta.  Upwinding follows the sign of
    the mesh-relative speed u - sigma/k, which is invariant under Galilean
    boosts (the raw sign of u is not).  The blended update is diagonal in
    u^{n+1} and solved per node.

The naive KdV baseline lives on a uniform static mesh and is deliberately
not Galilean invariant; the adaptive Runge-Kutta-Fehlberg 4(5) solver is the
non-invariant ODE baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    DegenerateDenominator,
    NewtonDivergence,
    SchemeSingularity,
)
from .invariants import cross_ratio, cross_ratio_conjugate
from .mesh import (
    MeshUpdate,
    MonitorParams,
    equidistribute,
    lagrangian_update,
    monitor_arclength,
    spline_project,
)

_DEN_TOL = 1e-14


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridState:
    """One time level: scalar t, strictly increasing x, values u."""

    t: float
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if x.ndim != 1 or x.shape != u.shape:
            raise ValueError("x and u must be 1-d arrays of equal length")
        if x.size < 3:
            raise ValueError("need at least three nodes")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class NewtonConfig:
    """Damped-Newton controls for the implicit solves."""

    tol: float = 1e-10
    max_iter: int = 50
    jacobian_fd_step: float = 1e-7

    def __post_init__(self):
        if not (self.tol > 0.0 and self.max_iter >= 1):
            raise ValueError("tol must be positive and max_iter >= 1")


@dataclass(frozen=True)
class SchwarzianState:
    """Sliding window for the Schwarzian recurrence."""

    h: float
    x_i: float
    u_im1: float
    u_i: float
    u_ip1: float
    source: Callable[[float], float]

    def __post_init__(self):
        if not self.h > 0.0:
            raise ValueError("step must be positive")
        if self.u_im1 == self.u_i or self.u_i == self.u_ip1:
            raise ValueError("consecutive u values must be distinct")


@dataclass(frozen=True)
class StepInfo:
    """Diagnostics of one scheme step."""

    newton_iters: int
    residual_inf: float
    min_spacing: float
    equi_residual: float = 0.0


# ---------------------------------------------------------------------------
# Schwarzian ODE
# ---------------------------------------------------------------------------

def _solve_cross_ratio_target(u_im1: float, u_i: float, u_ip1: float,
                              target: float) -> float:
    """The unique w with cross_ratio(u_{i-1}, u_i, u_{i+1}, w) = target."""
    i_im1 = u_i - u_im1
    span = u_ip1 - u_im1
    num = i_im1 * u_ip1 - target * span * u_i
    den = i_im1 - target * span
    if abs(den) < _DEN_TOL * (1.0 + abs(num)):
        raise SchemeSingularity("cross-ratio solve degenerated")
    return num / den


def schwarzian_step(s: SchwarzianState) -> float:
    """Advance the invariant Schwarzian recurrence by one node.

    Enforces cross_ratio = 1 / (2 (2 - h^2 F(x_i))); the step is a closed
    form fractional-linear solve, no iteration.
    """
    f_i = s.source(s.x_i)
    den = 2.0 * (2.0 - s.h**2 * f_i)
    if abs(den) < _DEN_TOL:
        raise SchemeSingularity("target cross-ratio undefined: h^2 F = 2")
    return _solve_cross_ratio_target(s.u_im1, s.u_i, s.u_ip1, 1.0 / den)


def schwarzian_step_through_pole(u_ip1: float, u_ip2: float) -> bool:
    """Heuristic pole-crossing flag: large values of opposite sign."""
    return u_ip1 * u_ip2 < 0.0 and min(abs(u_ip1), abs(u_ip2)) > 1.0


def schwarzian_invariant_residual(u_im1, u_i, u_ip1, u_ip2, h, f_at_x) -> float:
    """(1/h^2) [2 - 1/(2 R_i)] - F(x_i); Mobius invariant at value level."""
    r = cross_ratio(u_im1, u_i, u_ip1, u_ip2)
    if abs(r) < _DEN_TOL:
        raise DegenerateDenominator("cross-ratio vanished")
    return (2.0 - 0.5 / r) / h**2 - f_at_x


def schwarzian_invariantized_residual(u_im1, u_i, u_ip1, u_ip2, h, f_at_x) -> float:
    """(1/h^2) [1/(Rbar_i - R_i) - 2] - F(x_i)."""
    r = cross_ratio(u_im1, u_i, u_ip1, u_ip2)
    rbar = cross_ratio_conjugate(u_im1, u_i, u_ip1, u_ip2)
    if abs(rbar - r) < _DEN_TOL:
        raise DegenerateDenominator("Rbar - R vanished")
    return (1.0 / (rbar - r) - 2.0) / h**2 - f_at_x


def schwarzian_invariantized_step(s: SchwarzianState) -> float:
    """Advance the invariantized form: enforce Rbar - R = 1/(2 + h^2 F).

    Rbar - R = (w D2 + M) / ((w - u_i) S) with D2 the second difference,
    S = u_{i+1} - u_{i-1} and M = u_i (u_{i-1} + u_{i+1}) - 2 u_{i-1} u_{i+1},
    fractional linear in the unknown w, so this too is a closed form solve.
    """
    f_i = s.source(s.x_i)
    rho = 1.0 / (2.0 + s.h**2 * f_i)
    d2 = s.u_ip1 - 2.0 * s.u_i + s.u_im1
    m = s.u_i * (s.u_im1 + s.u_ip1) - 2.0 * s.u_im1 * s.u_ip1
    span = s.u_ip1 - s.u_im1
    den = rho * span - d2
    num = rho * span * s.u_i + m
    if abs(den) < _DEN_TOL * (1.0 + abs(num)):
        raise SchemeSingularity("invariantized solve degenerated")
    return num / den


# ---------------------------------------------------------------------------
# straight-line scheme (weakly invariant second difference)
# ---------------------------------------------------------------------------

def uxx_w_residual(x_im1, x_i, x_ip1, u_im1, u_i, u_ip1) -> float:
    """W = h_{i-1}(u_{i+1} - u_i) - h_i (u_i - u_{i-1}).

    Weakly invariant under the five-parameter affine algebra: the zero set
    is preserved although W itself is only a relative invariant.
    """
    return (x_i - x_im1) * (u_ip1 - u_i) - (x_ip1 - x_i) * (u_i - u_im1)


def uxx_step(x_im1: float, x_i: float, u_im1: float, u_i: float,
             f_i: float) -> tuple[float, float]:
    """One step of the mesh recurrence x_{i+1} = (1 + f) x_i - f x_{i-1}
    together with the W = 0 update, which keeps u affine in x."""
    if not x_i > x_im1:
        raise ValueError("mesh must be increasing")
    if not f_i > 0.0:
        raise ValueError("mesh ratio must be positive")
    x_ip1 = (1.0 + f_i) * x_i - f_i * x_im1
    u_ip1 = u_i + f_i * (u_i - u_im1)
    return (x_ip1, u_ip1)


# ---------------------------------------------------------------------------
# KdV schemes
# ---------------------------------------------------------------------------

def _d3u(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Nonuniform third difference; entry i valid for 1 <= i <= N-3, else nan."""
    n = x.size
    h = np.diff(x)
    du = np.diff(u) / h
    d3 = np.full(n, np.nan)
    i = np.arange(1, n - 2)
    d3[i] = (2.0 / h[i]) * (
        (du[i + 1] - du[i]) / (h[i + 1] + h[i]) - (du[i] - du[i - 1]) / (h[i] + h[i - 1])
    )
    return d3


def _check_kdv_pair(prev: GridState, nxt: GridState, k: float):
    if prev.n != nxt.n:
        raise ValueError("states must share the node count")
    if prev.n < 5:
        raise ValueError("KdV stencils need at least five nodes")
    if not k > 0.0:
        raise ValueError("time step must be positive")


def kdv_residual_6pt(prev: GridState, nxt: GridState, k: float) -> np.ndarray:
    """Per-node residual of the six-point invariant scheme, nodes 2..N-3."""
    _check_kdv_pair(prev, nxt, k)
    x0, u0, u1 = prev.x, prev.u, nxt.u
    h0 = np.diff(x0)
    if np.any(np.abs(h0) < _DEN_TOL):
        raise DegenerateDenominator("vanishing spacing")
    du0 = np.diff(u0) / h0
    d30 = _d3u(x0, u0)
    sig = nxt.x - prev.x
    i = np.arange(2, prev.n - 2)
    return (
        (u1[i] - u0[i]) / k
        + (u0[i] - sig[i] / k) * (du0[i] + du0[i - 1]) / 2.0
        + (d30[i] + d30[i - 1]) / 2.0
    )


def kdv_residual_10pt(prev: GridState, nxt: GridState, k: float) -> np.ndarray:
    """Per-node residual of the ten-point invariant scheme, nodes 2..N-3."""
    _check_kdv_pair(prev, nxt, k)
    x0, u0, x1, u1 = prev.x, prev.u, nxt.x, nxt.u
    h0, h1 = np.diff(x0), np.diff(x1)
    if np.any(np.abs(h0) < _DEN_TOL) or np.any(np.abs(h1) < _DEN_TOL):
        raise DegenerateDenominator("vanishing spacing")
    du0 = np.diff(u0) / h0
    du1 = np.diff(u1) / h1
    d30 = _d3u(x0, u0)
    d31 = _d3u(x1, u1)
    sig = x1 - x0
    i = np.arange(2, prev.n - 2)
    return (
        (u1[i] - u0[i]) / k
        + (u0[i] - sig[i] / k) * (du0[i] + du0[i - 1] + du1[i] + du1[i - 1]) / 4.0
        + (d31[i] + d31[i - 1] + d30[i] + d30[i - 1]) / 4.0
    )


def kdv_invariant_normalizer(prev: GridState, k: float) -> np.ndarray:
    """k h_i^2 on the residual nodes.

    The coordinate residuals are relative invariants of weight lam^-5;
    multiplying by k h_i^2 (weight lam^5) gives the value-level invariant
    combination that audits compare.
    """
    h0 = np.diff(prev.x)
    i = np.arange(2, prev.n - 2)
    return k * h0[i] ** 2


def _newton_banded(res_fn: Callable[[np.ndarray], np.ndarray], v0: np.ndarray,
                   cfg: NewtonConfig, halfband: int = 2) -> tuple[np.ndarray, int, float]:
    """Damped Newton with a banded finite-difference Jacobian (colored)."""
    v = v0.astype(float).copy()
    m = v.size
    width = 2 * halfband + 1
    r = res_fn(v)
    rnorm = float(np.max(np.abs(r))) if m else 0.0
    for it in range(1, cfg.max_iter + 1):
        if not np.all(np.isfinite(r)) or rnorm > 1e12:
            raise NewtonDivergence(f"residual blew up at iteration {it}")
        if rnorm <= cfg.tol:
            return v, it - 1, rnorm
        ab = np.zeros((width, m))
        for color in range(width):
            cols = np.arange(color, m, width)
            if cols.size == 0:
                continue
            dv = cfg.jacobian_fd_step * (1.0 + np.abs(v[cols]))
            vp = v.copy()
            vp[cols] += dv
            rp = res_fn(vp)
            for j, dvj in zip(cols, dv):
                lo, hi = max(0, j - halfband), min(m, j + halfband + 1)
                rows = np.arange(lo, hi)
                ab[halfband + rows - j, j] = (rp[rows] - r[rows]) / dvj
        try:
            step = solve_banded((halfband, halfband), ab, r)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NewtonDivergence(f"banded solve failed: {exc}") from exc
        eta = 1.0
        while True:
            v_try = v - eta * step
            r_try = res_fn(v_try)
            rn_try = float(np.max(np.abs(r_try)))
            if np.isfinite(rn_try) and rn_try < rnorm:
                v, r, rnorm = v_try, r_try, rn_try
                break
            eta *= 0.5
            if eta < 1.0 / 64.0:
                raise NewtonDivergence(
                    f"damping failed at iteration {it}, residual {rnorm:.3e}"
                )
    raise NewtonDivergence(
        f"no convergence in {cfg.max_iter} iterations, residual {rnorm:.3e}"
    )


def _kdv_mesh(prev: GridState, k: float, mesh_strategy: str,
              monitor: MonitorParams | None, spacing_floor: float,
              drift: float) -> MeshUpdate:
    if mesh_strategy in ("lagrangian", "projection"):
        return lagrangian_update(prev, k, floor=spacing_floor)
    if mesh_strategy == "adaptive":
        if monitor is None:
            raise ValueError("adaptive strategy needs monitor parameters")
        delta = monitor_arclength(prev, k, monitor)
        a = float(prev.x[0]) + k * drift
        b = float(prev.x[-1]) + k * drift
        return equidistribute(delta, (a, b), floor=spacing_floor)
    raise ValueError(f"unknown mesh strategy {mesh_strategy!r}")


def kdv_step_detailed(
    prev: GridState,
    k: float,
    mesh_strategy: str = "lagrangian",
    scheme: str = "6pt",
    newton: NewtonConfig | None = None,
    *,
    monitor: MonitorParams | None = None,
    spacing_floor: float = 0.0,
    drift: float = 0.0,
) -> tuple[GridState, StepInfo]:
    """One KdV step: mesh update first, then the solve for u^{n+1}.

    Two boundary nodes on each side carry Dirichlet values copied from the
    previous level.  The six-point scheme is explicit in u^{n+1}; the
    ten-point scheme is solved by damped Newton from the initial guess
    u^{n+1} = u^n.  With ``mesh_strategy='projection'`` the step advances on
    the Lagrangian mesh and projects the result back onto the previous
    abscissae with a natural cubic spline (extreme targets clamped into the
    moved hull, a constant extrapolation over at most k |u_boundary|).
    """
    if scheme not in ("6pt", "10pt"):
        raise ValueError(f"unknown scheme {scheme!r}")
    newton = newton or NewtonConfig()
    upd = _kdv_mesh(prev, k, mesh_strategy, monitor, spacing_floor, drift)
    x1 = upd.x_next
    n = prev.n
    idx = np.arange(2, n - 2)

    u1 = prev.u.copy()
    if scheme == "6pt":
        r0 = kdv_residual_6pt(prev, GridState(prev.t + k, x1, u1), k)
        u1[idx] = prev.u[idx] - k * r0  # first term vanished at the guess u1 = u0
        nxt = GridState(prev.t + k, x1, u1)
        rfin = float(np.max(np.abs(kdv_residual_6pt(prev, nxt, k))))
        iters = 0
    else:
        def res_fn(v: np.ndarray) -> np.ndarray:
            uu = prev.u.copy()
            uu[idx] = v
            return kdv_residual_10pt(prev, GridState(prev.t + k, x1, uu), k)

        v, iters, rfin = _newton_banded(res_fn, prev.u[idx], newton)
        u1[idx] = v
        nxt = GridState(prev.t + k, x1, u1)

    if mesh_strategy == "projection":
        target = np.clip(prev.x, x1[0], x1[-1])
        u_proj = spline_project(x1, u1, target)
        nxt = GridState(prev.t + k, prev.x, u_proj)

    return nxt, StepInfo(iters, rfin, upd.min_spacing, upd.equi_residual)


def kdv_step(prev: GridState, k: float, mesh_strategy: str = "lagrangian",
             scheme: str = "6pt", newton: NewtonConfig | None = None,
             **kwargs) -> GridState:
    return kdv_step_detailed(prev, k, mesh_strategy, scheme, newton, **kwargs)[0]


def naive_kdv_residual(u0: np.ndarray, u1: np.ndarray, k: float, h: float) -> np.ndarray:
    """Residual of the uniform-mesh baseline, periodic in space."""
    up1 = np.roll(u0, -1)
    um1 = np.roll(u0, 1)
    up2 = np.roll(u0, -2)
    um2 = np.roll(u0, 2)
    return (
        (u1 - u0) / k
        + u0 * (up1 - um1) / (2.0 * h)
        + (up2 - 2.0 * up1 + 2.0 * um1 - um2) / (2.0 * h**3)
    )


def naive_kdv_step(prev: GridState, k: float, h: float) -> GridState:
    """Explicit baseline update on a uniform periodic mesh.

    Stability is the caller's concern: k/h^3 must stay small enough that the
    amplified roundoff remains below the truncation error over the intended
    horizon.
    """
    u0 = prev.u
    r = naive_kdv_residual(u0, u0, k, h)  # u1 = u0 zeroes the time term
    return GridState(prev.t + k, prev.x, u0 - k * r)


# ---------------------------------------------------------------------------
# Burgers finite-volume scheme
# ---------------------------------------------------------------------------

def minmod(theta: float) -> float:
    """Flux limiter max(0, min(1, theta))."""
    return max(0.0, min(1.0, theta))


def theta_ratio(u_jm2: float, u_jm1: float, u_j: float, u_jp1: float,
                upwind_sign: float) -> float:
    """Smoothness ratio theta_j = Delta u_{J-1} / Delta u_{j-1}.

    J = j - 1 for upwind_sign >= 0 and J = j + 1 otherwise.  A vanishing
    denominator maps to sign(numerator) * 1e15 so the limiter saturates; if
    both differences vanish the smooth-region value 1 is returned.
    """
    den = u_j - u_jm1
    num = (u_jm1 - u_jm2) if upwind_sign >= 0.0 else (u_jp1 - u_j)
    if abs(den) < _DEN_TOL:
        if abs(num) < _DEN_TOL:
            return 1.0
        return math.copysign(1e15, num)
    return num / den


def _burgers_parts(x0: np.ndarray, u0: np.ndarray, x1: np.ndarray,
                   k: float, nu: float, phi_override: float | None = None):
    """Blended coefficient of u^{n+1}_i, constant part, and flux difference.

    Valid on the interior i = 1..N-2.  Slopes and differences that the
    low-order stencil needs beyond the mesh are constant-extrapolated from
    the boundary.
    """
    n = u0.size
    h0 = np.diff(x0)
    h1 = np.diff(x1)
    sig = x1 - x0
    du = np.diff(u0) / h0                            # du[m] = Du_m
    du_e = np.concatenate([du[:1], du, du[-1:]])     # du_e[m+1] = Du_m with ghosts
    dlt = np.diff(u0)                                # dlt[m] = u_{m+1} - u_m
    dlt_e = np.concatenate([dlt[:1], dlt[:1], dlt])  # dlt_e[m+2] = Delta u_m

    i = np.arange(1, n - 1)
    up = (u0[i] - sig[i] / k) >= 0.0

    coef_hi = h1[i] + h1[i - 1]
    const_hi = -(h0[i] + h0[i - 1]) * u0[i]
    dsf_hi = (
        0.5 * (u0[i + 1] ** 2 - u0[i - 1] ** 2)
        - nu * (du_e[i + 1] - du_e[i])
        - (sig[i + 1] * u0[i + 1] - sig[i - 1] * u0[i - 1]) / k
    )

    coef_lo = np.where(up, h1[i - 1], h1[i])
    const_lo = np.where(up, -h0[i - 1] * u0[i], -h0[i] * u0[i])
    dsf_lo_up = (
        0.5 * (u0[i] ** 2 - u0[i - 1] ** 2)
        - nu * (du_e[i] - du_e[i - 1])
        - (sig[i] * u0[i] - sig[i - 1] * u0[i - 1]) / k
    )
    dsf_lo_dn = (
        0.5 * (u0[i + 1] ** 2 - u0[i] ** 2)
        - nu * (du_e[i + 2] - du_e[i + 1])
        - (sig[i + 1] * u0[i + 1] - sig[i] * u0[i]) / k
    )
    dsf_lo = np.where(up, dsf_lo_up, dsf_lo_dn)

    if phi_override is not None:
        phi = np.full(i.shape, float(phi_override))
    else:
        # limiter weight Phi(theta_i): the ratio over [x_{i-1}, x_i], the
        # interval whose smoothness governs the update at node i; a lagged
        # index here displaces the discrete shock and breaks TV non-growth
        j = i
        up_j = up
        den = dlt_e[j + 1]                                 # Delta u_{j-1}
        num = np.where(up_j, dlt_e[j], dlt_e[j + 2])       # Delta u_{j-2} or Delta u_j
        theta = np.empty_like(den)
        small_den = np.abs(den) < _DEN_TOL
        both = small_den & (np.abs(num) < _DEN_TOL)
        ok = ~small_den
        theta[ok] = num[ok] / den[ok]
        theta[small_den] = np.sign(num[small_den]) * 1e15
        theta[both] = 1.0
        phi = np.clip(theta, 0.0, 1.0)

    coef = coef_lo - phi * (coef_lo - coef_hi)
    const = const_lo - phi * (const_lo - const_hi)
    dsf = dsf_lo - phi * (dsf_lo - dsf_hi)
    return coef, const, dsf


def burgers_fv_residual(prev: GridState, nxt: GridState, k: float, nu: float,
                        phi_override: float | None = None) -> np.ndarray:
    """Blended Delta_tau(x_s u) + k Delta_s f on the interior nodes 1..N-2.

    Value-level invariant under the four-parameter group thanks to the
    conservative form and the mesh-relative upwinding.
    """
    if prev.n != nxt.n:
        raise ValueError("states must share the node count")
    if not k > 0.0:
        raise ValueError("time step must be positive")
    coef, const, dsf = _burgers_parts(prev.x, prev.u, nxt.x, k, nu, phi_override)
    i = np.arange(1, prev.n - 1)
    return coef * nxt.u[i] + const + k * dsf


def burgers_fv_step_detailed(
    prev: GridState,
    k: float,
    nu: float,
    alpha: float,
    newton: NewtonConfig | None = None,
    *,
    spacing_floor: float = 0.0,
    drift: float = 0.0,
    phi_override: float | None = None,
) -> tuple[GridState, StepInfo]:
    """One finite-volume step: equidistributed mesh, then per-node solve.

    The blended Delta_tau term is linear in u^{n+1}_i with a positive
    spacing coefficient, so the update is a diagonal solve; ``newton`` only
    supplies a verification tolerance for the assembled residual.  Boundary
    values are held (Dirichlet).  ``phi_override`` pins the limiter weight
    (0 = pure low order, 1 = pure high order) for conservation probes.
    """
    if nu < 0.0:
        raise ValueError("viscosity must be nonnegative")
    if not k > 0.0:
        raise ValueError("time step must be positive")
    upd = equidistribute(
        monitor_arclength(prev, k, MonitorParams(alpha)),
        (float(prev.x[0]) + k * drift, float(prev.x[-1]) + k * drift),
        floor=spacing_floor,
    )
    x1 = upd.x_next
    coef, const, dsf = _burgers_parts(prev.x, prev.u, x1, k, nu, phi_override)
    if np.any(coef <= 0.0):
        raise SchemeSingularity("nonpositive volume coefficient")
    u1 = prev.u.copy()
    u1[1:-1] = -(const + k * dsf) / coef
    nxt = GridState(prev.t + k, x1, u1)
    rfin = float(np.max(np.abs(coef * u1[1:-1] + const + k * dsf)))
    if newton is not None and rfin > newton.tol * (1.0 + float(np.max(np.abs(u1)))):
        raise NewtonDivergence(f"diagonal solve residual {rfin:.3e} above tolerance")
    return nxt, StepInfo(0, rfin, upd.min_spacing, upd.equi_residual)


def burgers_fv_step(prev: GridState, k: float, nu: float, alpha: float,
                    newton: NewtonConfig | None = None, **kwargs) -> GridState:
    return burgers_fv_step_detailed(prev, k, nu, alpha, newton, **kwargs)[0]


# ---------------------------------------------------------------------------
# adaptive Runge-Kutta-Fehlberg 4(5) baseline
# ---------------------------------------------------------------------------

_RKF_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_RKF_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RKF_ERR = np.array([1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55])

_DIVERGE_LIMIT = 1e12


@dataclass
class RKTrajectory:
    """Accepted nodes of an adaptive integration, plus control statistics."""

    xs: np.ndarray
    ys: np.ndarray
    rejections: int
    diverged: bool

    def final(self) -> tuple[float, np.ndarray]:
        return float(self.xs[-1]), self.ys[-1]


def rk_adaptive_solve(f: Callable[[float, np.ndarray], np.ndarray],
                      y0, x_span: tuple[float, float],
                      rel_tol: float) -> RKTrajectory:
    """Runge-Kutta-Fehlberg 4(5) with proportional step control.

    The 4th/5th order difference drives the step size and the 5th order
    value is propagated (local extrapolation).  Integration stops with
    ``diverged=True`` once any state component exceeds 1e12 or the step
    size underflows (the two symptoms of a finite-x blow-up).
    """
    if not rel_tol > 0.0:
        raise ValueError("rel_tol must be positive")
    x0, x1 = x_span
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    xs = [x0]
    ys = [y.copy()]
    span = x1 - x0
    direction = math.copysign(1.0, span)
    h = span / 100.0
    rejections = 0
    diverged = False
    x = x0
    while (x1 - x) * direction > 0.0:
        if abs(h) > abs(x1 - x):
            h = x1 - x
        ks = []
        bad = False
        err = math.inf
        y_new = y
        for s in range(6):
            ya = y.copy()
            for m, a in enumerate(_RKF_A[s]):
                ya = ya + h * a * ks[m]
            with np.errstate(all="ignore"):
                k_s = np.atleast_1d(np.asarray(f(x + _RKF_C[s] * h, ya), dtype=float))
            if not np.all(np.isfinite(k_s)):
                bad = True
                break
            ks.append(k_s)
        if not bad:
            err_vec = h * sum(e * k for e, k in zip(_RKF_ERR, ks))
            y_new = y + h * sum(b * k for b, k in zip(_RKF_B4, ks)) + err_vec
            scale = 1.0 + float(np.max(np.abs(y)))
            err = float(np.max(np.abs(err_vec))) / (rel_tol * scale)
        if bad or not math.isfinite(err):
            rejections += 1
            h *= 0.25
        elif err <= 1.0:
            x += h
            y = y_new
            xs.append(x)
            ys.append(y.copy())
            if float(np.max(np.abs(y))) > _DIVERGE_LIMIT:
                diverged = True
                break
            h *= min(5.0, max(0.2, 0.9 * err**-0.2 if err > 0 else 5.0))
        else:
            rejections += 1
            h *= max(0.2, 0.9 * err**-0.2)
        if abs(h) < 1e-14 * (1.0 + abs(x)):
            diverged = True
            break
    return RKTrajectory(np.array(xs), np.array(ys), rejections, diverged)
