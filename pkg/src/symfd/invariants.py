"""Closed-form difference invariants of the three group actions.

The Mobius family admits the cross-ratio of four consecutive u values; the
KdV family admits 18 functionally independent invariants on a two-row,
five-column stencil; the Burgers family admits 9 invariants on a two-row,
three-column stencil.  Every catalog is exposed both as a named record and
as a flat ordered vector so that schemes and rank tests share one code path.

Notation for the stencils (shared with the schemes module)::

    k       = t^{n+1} - t^n           time step (rows are flat in t)
    h^l_j   = x^l_{j+1} - x^l_j       spacings within a row
    sigma   = x^{n+1}_i - x^n_i       center column displacement
    Du^l_j  = (u^l_{j+1} - u^l_j) / h^l_j
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominator
from .groups import Stencil

_DEN_TOL = 1e-14


def _checked_div(num: float, den: float) -> float:
    if abs(den) < _DEN_TOL:
        raise DegenerateDenominator(f"denominator {den} below 1e-14")
    return num / den


# ---------------------------------------------------------------------------
# Mobius invariants
# ---------------------------------------------------------------------------

def cross_ratio(u_im1: float, u_i: float, u_ip1: float, u_ip2: float) -> float:
    """(u_i - u_{i-1})(u_{i+2} - u_{i+1}) / ((u_{i+1} - u_{i-1})(u_{i+2} - u_i)).

    The fundamental difference invariant of the fractional linear action on
    four consecutive values.
    """
    den = (u_ip1 - u_im1) * (u_ip2 - u_i)
    return _checked_div((u_i - u_im1) * (u_ip2 - u_ip1), den)


def cross_ratio_conjugate(u_im1: float, u_i: float, u_ip1: float, u_ip2: float) -> float:
    """(u_{i+2} - u_{i-1})(u_{i+1} - u_i) / ((u_{i+2} - u_i)(u_{i+1} - u_{i-1}))."""
    den = (u_ip2 - u_i) * (u_ip1 - u_im1)
    return _checked_div((u_ip2 - u_im1) * (u_ip1 - u_i), den)


def sl2_invariant_chain(u_im1: float, u_i: float, u_ip1: float, u_ip2: float):
    """Stepwise reduction: differences I, ratios J, and the cross-ratio R.

    Returns (I_{i-1}, I_i, I_{i+1}, J_i, J_{i+1}, R_i) where
    R_i = J_i / ((1 + J_i)(1 + J_{i+1})) coincides with :func:`cross_ratio`.
    """
    i_im1 = u_i - u_im1
    i_i = u_ip1 - u_i
    i_ip1 = u_ip2 - u_ip1
    j_i = _checked_div(i_im1, i_i)
    j_ip1 = _checked_div(i_i, i_ip1)
    r = _checked_div(j_i, (1.0 + j_i) * (1.0 + j_ip1))
    return (i_im1, i_i, i_ip1, j_i, j_ip1, r)


# ---------------------------------------------------------------------------
# KdV stencil and invariants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KdVStencil:
    """Two flat time rows, five columns j = i-2 .. i+2.

    ``x`` and ``u`` are 2x5 arrays (row 0 at time t0, row 1 at t0 + k).
    """

    k: float
    x: np.ndarray
    u: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if x.shape != (2, 5) or u.shape != (2, 5):
            raise ValueError("KdV stencil needs 2x5 x and u arrays")
        if not self.k > 0.0:
            raise ValueError("time step must be positive")
        if np.any(np.diff(x, axis=1) <= 0.0):
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def h(self) -> np.ndarray:
        """Spacings h[l, m] = x[l, m+1] - x[l, m]; column m holds h_{i+m-2}."""
        return np.diff(self.x, axis=1)

    @property
    def sigma(self) -> float:
        return float(self.x[1, 2] - self.x[0, 2])

    @property
    def du(self) -> np.ndarray:
        """First differences Du[l, m] = Du_{i+m-2}."""
        return np.diff(self.u, axis=1) / self.h

    def to_stencil(self) -> Stencil:
        nodes = {}
        for l in range(2):
            for m in range(5):
                nodes[(l, m - 2)] = (
                    self.t0 + l * self.k,
                    float(self.x[l, m]),
                    float(self.u[l, m]),
                )
        return Stencil.from_dict(nodes)

    @staticmethod
    def from_stencil(z: Stencil) -> "KdVStencil":
        x = np.empty((2, 5))
        u = np.empty((2, 5))
        t0 = z.t(0, 0)
        t1 = z.t(1, 0)
        for l in range(2):
            for m in range(5):
                _, x[l, m], u[l, m] = z.node(l, m - 2)
        k = t1 - t0
        if not k > 0.0:
            raise ValueError("rows must be ordered in time")
        return KdVStencil(k, x, u, t0)


KDV_INVARIANT_NAMES = (
    "H(0,-1)", "H(0,0)", "H(0,+1)",
    "H(1,-1)", "H(1,0)", "H(1,+1)",
    "I", "J", "L", "T",
    "K(0,-2)", "K(0,-1)", "K(0,0)", "K(0,+1)",
    "K(1,-2)", "K(1,-1)", "K(1,0)", "K(1,+1)",
)


def kdv_invariants(z: KdVStencil) -> dict[str, float]:
    """The 18 invariants of the KdV group action on the ten-point stencil.

    * H(l, j)  = h^l_{i+j-1} / h^l_{i+j}            spacing ratios
    * I        = h^{n+1}_i / h^n_i                  row spacing ratio
    * J        = (h^n_i)^3 / k                      dispersive mesh number
    * L        = (sigma - k u^n_i) / h^n_i          Lagrangian defect
    * T        = (u^{n+1}_i - u^n_i) (h^n_i)^2      scaled time increment
    * K(l, j)  = k Du^l_{i+j}                       scaled slopes
    """
    h = z.h
    if np.any(np.abs(h) < _DEN_TOL) or abs(z.k) < _DEN_TOL:
        raise DegenerateDenominator("vanishing spacing or time step")
    du = z.du
    out: dict[str, float] = {}
    for l in range(2):
        for j in (-1, 0, 1):
            out[f"H({l},{j:+d})" if j else f"H({l},0)"] = float(h[l, j + 1] / h[l, j + 2])
    out["I"] = float(h[1, 2] / h[0, 2])
    out["J"] = float(h[0, 2] ** 3 / z.k)
    out["L"] = float((z.sigma - z.k * z.u[0, 2]) / h[0, 2])
    out["T"] = float((z.u[1, 2] - z.u[0, 2]) * h[0, 2] ** 2)
    for l in range(2):
        for j in (-2, -1, 0, 1):
            out[f"K({l},{j:+d})" if j else f"K({l},0)"] = float(z.k * du[l, j + 2])
    return out


def kdv_invariant_vector(z: KdVStencil) -> np.ndarray:
    inv = kdv_invariants(z)
    return np.array([inv[name] for name in KDV_INVARIANT_NAMES])


def kdv_Q(z: KdVStencil, row: int = 0, column_shift: int = 0) -> float:
    """Q_{i+s} = H_{i+s+1} (K_{i+s+1} - K_{i+s})/(1 + H_{i+s+1})
               - (K_{i+s} - K_{i+s-1})/(1 + H_{i+s}) on the requested row.

    Equal to k h_{i+s}^2 / 2 times the discrete third x-derivative, which is
    how it enters the invariant schemes.  Only shifts 0 and -1 fit on the
    stencil.
    """
    if row not in (0, 1) or column_shift not in (0, -1):
        raise ValueError("row must be 0/1 and column_shift 0/-1")
    h = z.h
    if np.any(np.abs(h[row]) < _DEN_TOL) or abs(z.k) < _DEN_TOL:
        raise DegenerateDenominator("vanishing spacing or time step")
    du = z.du
    s = column_shift + 2  # array column of h_{i+s}, Du_{i+s}
    k_m1, k_0, k_p1 = (z.k * du[row, s - 1], z.k * du[row, s], z.k * du[row, s + 1])
    h_0 = h[row, s - 1] / h[row, s]          # H_{i+s}
    h_p1 = h[row, s] / h[row, s + 1]         # H_{i+s+1}
    return float(h_p1 * (k_p1 - k_0) / (1.0 + h_p1) - (k_0 - k_m1) / (1.0 + h_0))


# ---------------------------------------------------------------------------
# Burgers stencil and invariants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BurgersStencil:
    """Two flat time rows, three columns j = i-1, i, i+1 (2x3 arrays)."""

    k: float
    x: np.ndarray
    u: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if x.shape != (2, 3) or u.shape != (2, 3):
            raise ValueError("Burgers stencil needs 2x3 x and u arrays")
        if not self.k > 0.0:
            raise ValueError("time step must be positive")
        if np.any(np.diff(x, axis=1) <= 0.0):
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.x, axis=1)

    @property
    def sigma(self) -> float:
        return float(self.x[1, 1] - self.x[0, 1])

    @property
    def du(self) -> np.ndarray:
        return np.diff(self.u, axis=1) / self.h

    def to_stencil(self) -> Stencil:
        nodes = {}
        for l in range(2):
            for m in range(3):
                nodes[(l, m - 1)] = (
                    self.t0 + l * self.k,
                    float(self.x[l, m]),
                    float(self.u[l, m]),
                )
        return Stencil.from_dict(nodes)

    @staticmethod
    def from_stencil(z: Stencil) -> "BurgersStencil":
        x = np.empty((2, 3))
        u = np.empty((2, 3))
        t0 = z.t(0, 0)
        k = z.t(1, 0) - t0
        for l in range(2):
            for m in range(3):
                _, x[l, m], u[l, m] = z.node(l, m - 1)
        return BurgersStencil(k, x, u, t0)


BURGERS_INVARIANT_NAMES = ("I1", "I2", "I3", "I4", "I5", "I6", "I7", "I8", "I9")


def burgers_invariants(z: BurgersStencil) -> dict[str, float]:
    """The 9 invariants of the four-parameter Burgers group action."""
    h = z.h
    if np.any(np.abs(h) < _DEN_TOL) or abs(z.k) < _DEN_TOL:
        raise DegenerateDenominator("vanishing spacing or time step")
    du = z.du
    k = z.k
    sig = z.sigma
    return {
        "I1": float(h[0, 1] / h[0, 0]),
        "I2": float(h[1, 1] / h[1, 0]),
        "I3": float(h[0, 1] * h[1, 1] / k),
        "I4": float(h[0, 1] * h[0, 0] * (du[0, 1] - du[0, 0])),
        "I5": float(h[1, 1] * h[1, 0] * (du[1, 1] - du[1, 0])),
        "I6": float(h[0, 1] * (sig / k - z.u[0, 1])),
        "I7": float(h[1, 1] * (sig / k - z.u[1, 1])),
        "I8": float(h[0, 1] ** 2 * (du[0, 1] + 1.0 / k)),
        "I9": float(h[1, 1] ** 2 * (du[1, 1] - 1.0 / k)),
    }


def burgers_invariant_vector(z: BurgersStencil) -> np.ndarray:
    inv = burgers_invariants(z)
    return np.array([inv[name] for name in BURGERS_INVARIANT_NAMES])


def burgers_d2u(z: BurgersStencil, row: int = 0) -> float:
    """Discrete second x-derivative 2 (Du_i - Du_{i-1}) / (h_i + h_{i-1})."""
    h = z.h
    du = z.du
    den = h[row, 0] + h[row, 1]
    return float(_checked_div(2.0 * (du[row, 1] - du[row, 0]), den))
