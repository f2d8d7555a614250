"""Concrete symmetry group actions, generator flows and invariance checks.

Three transformation families act on points (t, x, u):

* ``SL2Element`` -- the fractional linear (Mobius) action on u alone,
  U = (a u + b)/(c u + d) with ad - bc = 1.  This is the symmetry group of
  the Schwarzian ODE.
* ``KdVGroupElement`` -- scalings, Galilean boosts and shifts,
  T = lam^3 t + b,  X = lam x + lam^3 v t + a,  U = u / lam^2 + v.
  The x-tilt carries the factor lam^3 so that composing a scaling with a
  boost stays inside the four-parameter family; v is the velocity added to
  u.  One-parameter boosts (lam = 1) reduce to X = x + v t, U = u + v.
* ``BurgersGroupElement`` -- the four-parameter subgroup
  shift-x, shift-t, boost, log-scale acting as the ordered product
  scale o boost o shift:
  T = e^{2 e4} (t + e2),  X = e^{e4} (x + e1 + e3 (t + e2)),
  U = e^{-e4} (u + e3).

Each element knows how to compose with and invert against its own family,
so group-law checks can be phrased directly on parameters.  Infinitesimal
generators are represented by :class:`VectorFieldSpec`; their prolongation
to a stencil acts on every node with the same flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import FlowDivergence, PoleError, ProjectionFailure
from .rng import DeterministicRng

Node = tuple[float, float, float]  # (t, x, u)

_POLE_TOL = 1e-14
_FLOW_LIMIT = 1e12


def sign_pos(x: float) -> float:
    """sign with the convention sign(0) = +1, keeping branches total."""
    return 1.0 if x >= 0.0 else -1.0


# ---------------------------------------------------------------------------
# group elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SL2Element:
    """Unimodular 2x2 matrix acting on u by fractional linear maps.

    The determinant is rescaled to one at construction; a negative
    determinant cannot be repaired by real rescaling and is rejected.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det <= 0.0 or not math.isfinite(det):
            raise ValueError(f"SL2Element needs ad - bc > 0, got {det}")
        s = 1.0 / math.sqrt(det)
        object.__setattr__(self, "a", self.a * s)
        object.__setattr__(self, "b", self.b * s)
        object.__setattr__(self, "c", self.c * s)
        object.__setattr__(self, "d", self.d * s)

    @staticmethod
    def identity() -> "SL2Element":
        return SL2Element(1.0, 0.0, 0.0, 1.0)

    def compose(self, other: "SL2Element") -> "SL2Element":
        """Matrix product self * other (self applied after other)."""
        return SL2Element(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "SL2Element":
        return SL2Element(self.d, -self.b, -self.c, self.a)

    def params(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)


def apply_sl2(g: SL2Element, u: float) -> float:
    """Fractional linear action (a u + b)/(c u + d)."""
    den = g.c * u + g.d
    if abs(den) < _POLE_TOL:
        raise PoleError(f"Mobius map evaluated at pole: cu + d = {den}")
    return (g.a * u + g.b) / den


@dataclass(frozen=True)
class KdVGroupElement:
    """Element (lam, v, a, b): scaling, boost velocity, space and time shift."""

    lam: float
    v: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"scaling parameter must be positive, got {self.lam}")

    @staticmethod
    def identity() -> "KdVGroupElement":
        return KdVGroupElement(1.0, 0.0, 0.0, 0.0)

    def compose(self, other: "KdVGroupElement") -> "KdVGroupElement":
        """self applied after other."""
        lam, v, a, b = self.lam, self.v, self.a, self.b
        mu, w, c, d = other.lam, other.v, other.a, other.b
        return KdVGroupElement(
            lam * mu,
            w / lam**2 + v,
            lam * c + lam**3 * v * d + a,
            lam**3 * d + b,
        )

    def inverse(self) -> "KdVGroupElement":
        lam, v, a, b = self.lam, self.v, self.a, self.b
        return KdVGroupElement(1.0 / lam, -(lam**2) * v, (v * b - a) / lam, -b / lam**3)

    def params(self) -> tuple[float, float, float, float]:
        return (self.lam, self.v, self.a, self.b)


def apply_kdv(g: KdVGroupElement, node: Node) -> Node:
    t, x, u = node
    lam = g.lam
    return (
        lam**3 * t + g.b,
        lam * x + lam**3 * g.v * t + g.a,
        u / lam**2 + g.v,
    )


@dataclass(frozen=True)
class BurgersGroupElement:
    """Element (e1, e2, e3, e4): shift-x, shift-t, boost, log-scale."""

    eps1: float = 0.0
    eps2: float = 0.0
    eps3: float = 0.0
    eps4: float = 0.0

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3", "eps4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @staticmethod
    def identity() -> "BurgersGroupElement":
        return BurgersGroupElement()

    def compose(self, other: "BurgersGroupElement") -> "BurgersGroupElement":
        """self applied after other."""
        s = math.exp(other.eps4)  # scale factor of the inner element
        e1, e2, e3, e4 = self.eps1, self.eps2, self.eps3, self.eps4
        f1, f2, f3, f4 = other.eps1, other.eps2, other.eps3, other.eps4
        return BurgersGroupElement(
            f1 + e1 / s - f3 * e2 / s**2,
            f2 + e2 / s**2,
            f3 + e3 * s,
            e4 + f4,
        )

    def inverse(self) -> "BurgersGroupElement":
        s = math.exp(self.eps4)
        return BurgersGroupElement(
            -s * (self.eps1 + self.eps2 * self.eps3),
            -(s**2) * self.eps2,
            -self.eps3 / s,
            -self.eps4,
        )

    def params(self) -> tuple[float, float, float, float]:
        return (self.eps1, self.eps2, self.eps3, self.eps4)


def apply_burgers(g: BurgersGroupElement, node: Node) -> Node:
    t, x, u = node
    s = math.exp(g.eps4)
    return (
        s**2 * (t + g.eps2),
        s * (x + g.eps1 + g.eps3 * (t + g.eps2)),
        (u + g.eps3) / s,
    )


# ---------------------------------------------------------------------------
# vector fields and stencils
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorFieldSpec:
    """An infinitesimal generator xi d/dx + eta d/dt + phi d/du.

    The coefficients are evaluable functions of (t, x, u).  ``weight`` is an
    optional multiplicative lattice factor w(n, i) used by generators whose
    coefficients alternate with the multi-index (e.g. the dpKdV dilations);
    it multiplies all three coefficients at a node with absolute index
    (n, i).
    """

    xi: Callable[[float, float, float], float]
    eta: Callable[[float, float, float], float]
    phi: Callable[[float, float, float], float]
    weight: Callable[[int, int], float] | None = None
    name: str = ""

    def coeffs(self, node: Node, index: tuple[int, int] = (0, 0)) -> Node:
        t, x, u = node
        w = 1.0 if self.weight is None else self.weight(*index)
        return (w * self.eta(t, x, u), w * self.xi(t, x, u), w * self.phi(t, x, u))


def _zero(t, x, u):
    return 0.0


def _one(t, x, u):
    return 1.0


def make_field(xi=None, eta=None, phi=None, weight=None, name="") -> VectorFieldSpec:
    return VectorFieldSpec(xi or _zero, eta or _zero, phi or _zero, weight, name)


def sl2_generators() -> list[VectorFieldSpec]:
    """Generators of the Mobius action: d/du, u d/du, u^2 d/du."""
    return [
        make_field(phi=_one, name="shift_u"),
        make_field(phi=lambda t, x, u: u, name="dilate_u"),
        make_field(phi=lambda t, x, u: u * u, name="special_u"),
    ]


def kdv_generators() -> list[VectorFieldSpec]:
    """Shift-x, shift-t, Galilean boost, scaling for the KdV dynamics."""
    return [
        make_field(xi=_one, name="shift_x"),
        make_field(eta=_one, name="shift_t"),
        make_field(xi=lambda t, x, u: t, phi=_one, name="boost"),
        make_field(
            xi=lambda t, x, u: x,
            eta=lambda t, x, u: 3.0 * t,
            phi=lambda t, x, u: -2.0 * u,
            name="scale",
        ),
    ]


def burgers_generators() -> list[VectorFieldSpec]:
    """Shift-x, shift-t, Galilean boost, scaling for the Burgers dynamics."""
    return [
        make_field(xi=_one, name="shift_x"),
        make_field(eta=_one, name="shift_t"),
        make_field(xi=lambda t, x, u: t, phi=_one, name="boost"),
        make_field(
            xi=lambda t, x, u: x,
            eta=lambda t, x, u: 2.0 * t,
            phi=lambda t, x, u: -u,
            name="scale",
        ),
    ]


def affine_5d_generators() -> list[VectorFieldSpec]:
    """The five-dimensional algebra d/dx, d/du, x d/dx, x d/du, u d/du.

    Its product action on three-point windows drops rank exactly on the
    discrete straight-line locus, which is how the weakly invariant
    second-difference equation is detected.
    """
    return [
        make_field(xi=_one, name="shift_x"),
        make_field(phi=_one, name="shift_u"),
        make_field(xi=lambda t, x, u: x, name="scale_x"),
        make_field(phi=lambda t, x, u: x, name="shear"),
        make_field(phi=lambda t, x, u: u, name="scale_u"),
    ]


def dpkdv_generators() -> list[VectorFieldSpec]:
    """Generators of the discrete potential KdV lattice equation.

    The first two alternate in sign with the lattice parity (-1)^(n+i); the
    third is a plain shift of u.
    """
    parity = lambda n, i: float((-1) ** ((n + i) % 2))
    return [
        make_field(phi=lambda t, x, u: u, weight=parity, name="alt_dilate"),
        make_field(phi=_one, weight=parity, name="alt_shift"),
        make_field(phi=_one, name="shift_u"),
    ]


@dataclass(frozen=True)
class Stencil:
    """Finite collection of nodes approximating a discrete jet.

    ``nodes`` maps an integer offset pair (l, j) -- time shift and space
    shift relative to the reference index -- to a point (t, x, u).  The
    reference multi-index ``ref`` = (n, i) matters only for generators with
    lattice-dependent weights.
    """

    nodes: tuple[tuple[tuple[int, int], Node], ...]
    ref: tuple[int, int] = (0, 0)

    def __post_init__(self):
        offsets = [o for o, _ in self.nodes]
        if len(set(offsets)) != len(offsets):
            raise ValueError("stencil offsets must be distinct")
        seen = {}
        for off, (t, x, _u) in self.nodes:
            key = (t, x)
            if key in seen:
                raise ValueError(
                    f"nodes {seen[key]} and {off} share independent variables {key}"
                )
            seen[key] = off

    @staticmethod
    def from_dict(nodes: dict[tuple[int, int], Node], ref=(0, 0)) -> "Stencil":
        return Stencil(tuple(sorted(nodes.items())), ref)

    def as_dict(self) -> dict[tuple[int, int], Node]:
        return dict(self.nodes)

    def node(self, l: int, j: int) -> Node:
        for off, val in self.nodes:
            if off == (l, j):
                return val
        raise KeyError((l, j))

    def u(self, l: int, j: int) -> float:
        return self.node(l, j)[2]

    def x(self, l: int, j: int) -> float:
        return self.node(l, j)[1]

    def t(self, l: int, j: int) -> float:
        return self.node(l, j)[0]

    def with_u(self, l: int, j: int, u_new: float) -> "Stencil":
        nodes = []
        for off, (t, x, u) in self.nodes:
            nodes.append((off, (t, x, u_new) if off == (l, j) else (t, x, u)))
        return Stencil(tuple(nodes), self.ref)

    def map_nodes(self, fn: Callable[[tuple[int, int], Node], Node]) -> "Stencil":
        return Stencil(tuple((off, fn(off, val)) for off, val in self.nodes), self.ref)

    def sup_norm(self) -> float:
        return max(abs(c) for _, val in self.nodes for c in val)


StencilFunction = Callable[[Stencil], float]


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def flow(field: VectorFieldSpec, node: Node, epsilon: float,
         index: tuple[int, int] = (0, 0), tol: float = 1e-13) -> Node:
    """Exponentiate ``field`` through ``node`` for parameter ``epsilon``.

    Classical RK4 with step doubling; each substep is accepted when the
    doubled-step estimate agrees to ``tol`` relative.  Raises
    :class:`FlowDivergence` once any component exceeds 1e12.
    """
    if epsilon == 0.0:
        return node

    def rhs(z: np.ndarray) -> np.ndarray:
        return np.array(field.coeffs((z[0], z[1], z[2]), index))

    def rk4(z: np.ndarray, h: float) -> np.ndarray:
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    z = np.array(node, dtype=float)
    remaining = epsilon
    h = epsilon / 8.0
    guard = 0
    while remaining != 0.0 and guard < 100_000:
        guard += 1
        if abs(h) > abs(remaining):
            h = remaining
        full = rk4(z, h)
        half = rk4(rk4(z, h / 2.0), h / 2.0)
        err = float(np.max(np.abs(full - half)))
        scale = 1.0 + float(np.max(np.abs(half)))
        if err <= tol * scale:
            z = half + (half - full) / 15.0  # 5th order local extrapolation
            remaining -= h
            if np.max(np.abs(z)) > _FLOW_LIMIT:
                raise FlowDivergence(f"flow state exceeded {_FLOW_LIMIT:g}")
            if err < 0.01 * tol * scale:
                h *= 2.0
        else:
            h /= 2.0
            if abs(h) < 1e-16 * abs(epsilon):
                raise FlowDivergence("flow step size underflow")
    if remaining != 0.0:
        raise FlowDivergence("flow failed to reach requested parameter")
    return (float(z[0]), float(z[1]), float(z[2]))


# ---------------------------------------------------------------------------
# infinitesimal invariance machinery
# ---------------------------------------------------------------------------

def perturb_stencil(z: Stencil, field: VectorFieldSpec, eps: float) -> Stencil:
    """Move every node by eps times the generator (linearized product action)."""
    n, i = z.ref

    def mover(off, val):
        et, xx, ph = field.coeffs(val, (n + off[0], i + off[1]))
        return (val[0] + eps * et, val[1] + eps * xx, val[2] + eps * ph)

    return z.map_nodes(mover)


def prolonged_directional_derivative(F: StencilFunction, field: VectorFieldSpec,
                                     z: Stencil) -> float:
    """d/de F(exp(e field) . z) at e = 0 by central differencing.

    The step 1e-6 * (1 + |z|_inf) balances truncation and roundoff in double
    precision; the even-order flow curvature cancels in the central
    difference, so the linearized node motion is sufficient.
    """
    eps = 1e-6 * (1.0 + z.sup_norm())
    fp = F(perturb_stencil(z, field, eps))
    fm = F(perturb_stencil(z, field, -eps))
    return (fp - fm) / (2.0 * eps)


def lie_matrix(fields: Sequence[VectorFieldSpec], z: Stencil) -> np.ndarray:
    """r x d matrix of prolonged generator coefficients over stencil coordinates.

    Coordinates are ordered (t, x, u) per node, nodes in offset order.
    """
    n, i = z.ref
    rows = []
    for f in fields:
        row = []
        for off, val in z.nodes:
            row.extend(f.coeffs(val, (n + off[0], i + off[1])))
        rows.append(row)
    return np.array(rows, dtype=float)


def lie_matrix_rank(fields: Sequence[VectorFieldSpec], z: Stencil,
                    tol: float = 1e-8) -> int:
    """Numerical rank: singular values above tol * sigma_max."""
    m = lie_matrix(fields, z)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


@dataclass
class SymmetryCheckReport:
    """Outcome of a randomized infinitesimal symmetry check."""

    passed: bool
    max_abs_derivative: float
    samples: int
    resampled: int
    tol: float
    worst_sample: Stencil | None = None


def _solve_for_coordinate(E: StencilFunction, z: Stencil,
                          solve_offset: tuple[int, int]) -> Stencil:
    """Newton solve of E(z) = 0 for the u-value at ``solve_offset``."""
    l, j = solve_offset
    val = z.u(l, j)
    scale = 1.0 + z.sup_norm()
    for _ in range(60):
        r = E(z.with_u(l, j, val))
        if abs(r) <= 1e-12 * scale:
            return z.with_u(l, j, val)
        h = 1e-7 * (1.0 + abs(val))
        drdv = (E(z.with_u(l, j, val + h)) - E(z.with_u(l, j, val - h))) / (2.0 * h)
        if drdv == 0.0 or not math.isfinite(drdv):
            break
        step = r / drdv
        if not math.isfinite(step):
            break
        val -= step
    raise ProjectionFailure(
        f"could not solve E = 0 for coordinate {solve_offset} from {z.as_dict()}"
    )


def check_difference_symmetry(
    E: StencilFunction,
    field: VectorFieldSpec,
    samples: int,
    tol: float,
    *,
    offsets: Iterable[tuple[int, int]],
    solve_offset: tuple[int, int],
    seed: int = 0,
    admissible: Callable[[Stencil], bool] | None = None,
    max_resample: int = 200,
) -> SymmetryCheckReport:
    """Randomized test of the infinitesimal symmetry criterion on E = 0.

    Random stencils are drawn (u uniform on [-2, 2], spacings uniform on
    [0.1, 2]), projected onto the solution set by solving for the designated
    coordinate, and the prolonged directional derivative of E along ``field``
    is evaluated there.  Passes when the largest magnitude stays below
    ``tol``.
    """
    rng = DeterministicRng(seed)
    offsets = list(offsets)
    worst = 0.0
    worst_z = None
    resampled = 0
    done = 0
    while done < samples:
        if resampled > max_resample + samples * 10:
            raise ProjectionFailure("too many degenerate draws")
        nodes = {}
        xrow: dict[int, dict[int, float]] = {}
        for (l, j) in sorted(offsets):
            xrow.setdefault(l, {})
        for l, row in xrow.items():
            js = sorted(j for (ll, j) in offsets if ll == l)
            pos = 0.0
            prev = None
            for j in js:
                if prev is not None:
                    pos += rng.uniform(0.1, 2.0) * (j - prev)
                row[j] = pos
                prev = j
        for (l, j) in offsets:
            nodes[(l, j)] = (float(l), xrow[l][j], rng.uniform(-2.0, 2.0))
        z = Stencil.from_dict(nodes)
        if admissible is not None and not admissible(z):
            resampled += 1
            continue
        try:
            z_star = _solve_for_coordinate(E, z, solve_offset)
        except ProjectionFailure:
            resampled += 1
            continue
        if admissible is not None and not admissible(z_star):
            resampled += 1
            continue
        d = abs(prolonged_directional_derivative(E, field, z_star))
        if d > worst:
            worst, worst_z = d, z_star
        done += 1
    return SymmetryCheckReport(worst <= tol, worst, samples, resampled, tol, worst_z)
