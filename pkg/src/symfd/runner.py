"""Experiment driver: exact solutions, runs, audits, convergence studies.

This is the CLI surface.  Configurations are flat ``key = value`` text files
(UTF-8, ``#`` comments, unknown keys rejected); snapshot output is long-form
CSV ``t,x,u`` and diagnostics are one CSV row per step.  Identical
configuration and seed produce byte-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import schemes
from .errors import (
    ConfigError,
    MeshTangling,
    NewtonDivergence,
    PoleError,
    SchemeSingularity,
    SymfdError,
)
from .groups import (
    BurgersGroupElement,
    KdVGroupElement,
    SL2Element,
    apply_burgers,
    apply_kdv,
    apply_sl2,
)
from .mesh import MonitorParams, detect_tangling
from .rng import DeterministicRng
from .schemes import GridState


# ---------------------------------------------------------------------------
# exact solutions
# ---------------------------------------------------------------------------

def exact_schwarzian(x: float, a: float = 1.0, b: float = 0.0,
                     c: float = 0.0, d: float = 1.0) -> float:
    """(a sin x + b cos x) / (c sin x + d cos x), the general Schwarzian
    solution for constant source 2; (1, 0, 0, 1) gives tan x."""
    if abs(a * d - b * c) < 1e-14:
        raise ValueError("parameters must satisfy ad - bc != 0")
    den = c * math.sin(x) + d * math.cos(x)
    if abs(den) < 1e-12 * math.hypot(c, d):
        raise PoleError(f"denominator vanishes near x = {x}")
    return (a * math.sin(x) + b * math.cos(x)) / den


def _sech2(y):
    y = np.minimum(np.abs(y), 350.0)
    return (2.0 / (np.exp(y) + np.exp(-y))) ** 2


def exact_kdv_double_soliton(t, x, c1: float = 1.0, c2: float = 0.5,
                             a1: float = 20.0, a2: float = 5.0):
    """Two-soliton profile of u_t + u u_x + u_xxx = 0.

    Each component 3 c sech^2(sqrt(c)/2 (x + a - c t)) travels at speed c
    with amplitude 3 c; the sum is exact only while the humps are far apart,
    which is all the runs need (initial data and per-soliton references).
    With c2 = 0 the second term vanishes and the single soliton is exact.
    """
    x = np.asarray(x, dtype=float)
    u = np.zeros_like(x)
    for c, a in ((c1, a1), (c2, a2)):
        if c > 0.0:
            u = u + 3.0 * c * _sech2(0.5 * math.sqrt(c) * (x + a - c * t))
        elif c < 0.0:
            raise ValueError("soliton speeds must be nonnegative")
    return u


def exact_burgers(t, x, nu: float, c: float = 0.25):
    """Viscous shock -sinh(x/2nu) / (cosh(x/2nu) + exp(-(c+t)/4nu)).

    Evaluated with a common rescaling of numerator and denominator so large
    exponents never overflow (the small-nu regime).
    """
    if not nu > 0.0:
        raise ValueError("viscosity must be positive")
    x = np.asarray(x, dtype=float)
    y = x / (2.0 * nu)
    e = -(c + t) / (4.0 * nu) + math.log(2.0)
    m = np.maximum(np.abs(y), e)
    with np.errstate(over="ignore"):
        num = np.exp(y - m) - np.exp(-y - m)
        den = np.exp(y - m) + np.exp(-y - m) + np.exp(e - m)
    return -num / den


def total_variation(u) -> float:
    """Sum of absolute increments; non-growth signals no spurious wiggles."""
    return float(np.sum(np.abs(np.diff(np.asarray(u, dtype=float)))))


def schwarzian_rhs(source: Callable[[float], float]):
    """First-order system for the Schwarzian ODE: y = (u, u', u'')."""

    def f(x, y):
        u, p, q = y
        return np.array([p, q, (source(x) * p**2 + 1.5 * q**2) / p])

    return f


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_CONFIG_KEYS: dict[str, tuple[type, object]] = {
    # key: (type, default); None default means required when relevant
    "equation": (str, None),
    "scheme": (str, None),
    "domain_a": (float, None),
    "domain_b": (float, None),
    "n_points": (int, None),
    "t_final": (float, 0.0),
    "dt_constant": (float, None),
    "mesh": (str, "lagrangian"),
    "alpha": (float, -1.0),
    "nu": (float, 0.0),
    "ic": (str, ""),
    "ic_c1": (float, 1.0),
    "ic_c2": (float, 0.5),
    "ic_a1": (float, 20.0),
    "ic_a2": (float, 5.0),
    "ic_c": (float, 0.25),
    "ic_ma": (float, 1.0),
    "ic_mb": (float, 0.0),
    "ic_mc": (float, 0.0),
    "ic_md": (float, 1.0),
    "ic_p": (float, 1.0),
    "ic_q": (float, 0.0),
    "source_f": (float, 2.0),
    "mesh_f": (float, 1.0),
    "boundary": (str, ""),
    "spacing_floor_rel": (float, 1e-3),
    "snapshot_every": (int, 0),
    "seed": (int, 0),
    "snapshots_path": (str, ""),
    "diagnostics_path": (str, ""),
}

_SCHEMES_BY_EQUATION = {
    "schwarzian": {"schwarzian_invariant"},
    "kdv": {"kdv_6pt", "kdv_10pt", "kdv_naive"},
    "burgers": {"burgers_fv"},
    "uxx": {"uxx"},
}

_DT_DEFAULT = {"kdv": 0.5, "burgers": 0.4}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError as exc:
            raise AttributeError(key) from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` text; unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        typ, _default = _CONFIG_KEYS[key]
        try:
            values[key] = typ(val) if typ is not str else val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from exc
    return validate_config(values)


def validate_config(values: dict) -> ExperimentConfig:
    cfg = dict(values)
    for key, (_typ, default) in _CONFIG_KEYS.items():
        cfg.setdefault(key, default)
    for key in ("equation", "scheme", "domain_a", "domain_b", "n_points"):
        if cfg[key] is None:
            raise ConfigError(f"missing required key {key!r}")
    eq = cfg["equation"]
    if eq not in _SCHEMES_BY_EQUATION:
        raise ConfigError(f"unknown equation {eq!r}")
    if cfg["scheme"] not in _SCHEMES_BY_EQUATION[eq]:
        raise ConfigError(f"scheme {cfg['scheme']!r} does not solve {eq!r}")
    if cfg["n_points"] < 8:
        raise ConfigError("n_points must be at least 8")
    if not cfg["domain_a"] < cfg["domain_b"]:
        raise ConfigError("domain_a must be below domain_b")
    if eq in ("kdv", "burgers"):
        if not cfg["t_final"] > 0.0:
            raise ConfigError(f"{eq} runs need t_final > 0")
        if cfg["dt_constant"] is None:
            cfg["dt_constant"] = _DT_DEFAULT[eq]
        if not cfg["dt_constant"] > 0.0:
            raise ConfigError("dt_constant must be positive")
    if eq == "kdv":
        if cfg["mesh"] not in ("lagrangian", "adaptive", "projection"):
            raise ConfigError(f"unknown mesh strategy {cfg['mesh']!r}")
        if cfg["mesh"] == "adaptive" and cfg["alpha"] < 0.0:
            raise ConfigError("adaptive strategy needs alpha >= 0")
        cfg["ic"] = cfg["ic"] or "double_soliton"
        cfg["boundary"] = cfg["boundary"] or (
            "periodic" if cfg["scheme"] == "kdv_naive" else "dirichlet"
        )
        if cfg["scheme"] == "kdv_naive" and cfg["boundary"] != "periodic":
            raise ConfigError("the naive scheme needs periodic boundaries")
    if eq == "burgers":
        if not cfg["nu"] >= 0.0:
            raise ConfigError("nu must be nonnegative")
        if cfg["alpha"] < 0.0:
            raise ConfigError("burgers_fv needs alpha >= 0")
        cfg["ic"] = cfg["ic"] or "viscous_shock"
        if cfg["ic"] == "viscous_shock" and not cfg["nu"] > 0.0:
            raise ConfigError("the viscous shock profile needs nu > 0")
    if eq == "schwarzian":
        cfg["ic"] = cfg["ic"] or "exact_seed"
    if eq == "uxx":
        cfg["ic"] = cfg["ic"] or "affine"
        if not cfg["mesh_f"] > 0.0:
            raise ConfigError("mesh_f must be positive")
    return ExperimentConfig(cfg)


# ---------------------------------------------------------------------------
# run output
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsRow:
    step: int
    t: float
    min_spacing: float
    tv: float
    residual_inf: float
    newton_iters: int
    status: str


@dataclass
class RunOutput:
    snapshots: list[tuple[float, np.ndarray, np.ndarray]]
    diagnostics: list[DiagnosticsRow]
    status: str
    config: ExperimentConfig

    @property
    def final_state(self) -> GridState:
        t, x, u = self.snapshots[-1]
        return GridState(t, x, u)


def format_snapshots_csv(out: RunOutput) -> str:
    lines = ["t,x,u"]
    for t, x, u in out.snapshots:
        for xi, ui in zip(x, u):
            lines.append(f"{t:.17g},{xi:.17g},{ui:.17g}")
    return "\n".join(lines) + "\n"


def format_diagnostics_csv(out: RunOutput) -> str:
    lines = ["step,t,min_spacing,tv,residual_inf,newton_iters,status"]
    for r in out.diagnostics:
        lines.append(
            f"{r.step},{r.t:.17g},{r.min_spacing:.17g},{r.tv:.17g},"
            f"{r.residual_inf:.17g},{r.newton_iters},{r.status}"
        )
    return "\n".join(lines) + "\n"


def write_outputs(out: RunOutput) -> None:
    cfg = out.config
    if cfg.snapshots_path:
        with open(cfg.snapshots_path, "w", encoding="utf-8") as fh:
            fh.write(format_snapshots_csv(out))
    if cfg.diagnostics_path:
        with open(cfg.diagnostics_path, "w", encoding="utf-8") as fh:
            fh.write(format_diagnostics_csv(out))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _initial_condition(cfg: ExperimentConfig, x: np.ndarray) -> np.ndarray:
    if cfg.equation == "kdv":
        return exact_kdv_double_soliton(0.0, x, cfg.ic_c1, cfg.ic_c2, cfg.ic_a1, cfg.ic_a2)
    if cfg.equation == "burgers":
        return exact_burgers(0.0, x, cfg.nu, cfg.ic_c)
    raise ConfigError(f"no gridded initial condition for {cfg.equation!r}")


def _pde_time_step(cfg: ExperimentConfig, h: float) -> tuple[float, int]:
    power = 3 if cfg.equation == "kdv" else 2
    k_raw = cfg.dt_constant * h**power
    steps = max(1, round(cfg.t_final / k_raw))
    return cfg.t_final / steps, steps


def run_experiment(cfg: ExperimentConfig) -> RunOutput:
    """Time loop (or space march) with snapshot and diagnostics recording.

    Terminates at the final time, on mesh tangling, or on Newton failure;
    the status of the run is recorded and partial output preserved.
    """
    if cfg.equation == "schwarzian":
        return _run_schwarzian(cfg)
    if cfg.equation == "uxx":
        return _run_uxx(cfg)
    if cfg.equation == "kdv" and cfg.scheme == "kdv_naive":
        return _run_kdv_naive(cfg)
    if cfg.equation == "kdv":
        return _run_kdv_invariant(cfg)
    if cfg.equation == "burgers":
        return _run_burgers(cfg)
    raise ConfigError(f"unknown equation {cfg.equation!r}")


def _cadence(steps: int, every: int) -> int:
    return every if every > 0 else max(1, math.ceil(steps / 200))


def _run_schwarzian(cfg: ExperimentConfig) -> RunOutput:
    n = cfg.n_points
    x = np.linspace(cfg.domain_a, cfg.domain_b, n)
    h = float(x[1] - x[0])
    src = lambda _x: cfg.source_f
    exact = lambda xx: exact_schwarzian(xx, cfg.ic_ma, cfg.ic_mb, cfg.ic_mc, cfg.ic_md)
    u = np.empty(n)
    u[0], u[1], u[2] = exact(x[0]), exact(x[1]), exact(x[2])
    diags: list[DiagnosticsRow] = []
    status = "completed"
    poles = 0
    for i in range(1, n - 2):
        win = schemes.SchwarzianState(h, float(x[i]), u[i - 1], u[i], u[i + 1], src)
        try:
            u[i + 2] = schemes.schwarzian_step(win)
        except SymfdError:
            status = "scheme_singularity"
            u = u[: i + 2]
            x = x[: i + 2]
            break
        flag = schemes.schwarzian_step_through_pole(u[i + 1], u[i + 2])
        poles += int(flag)
        res = schemes.schwarzian_invariant_residual(
            u[i - 1], u[i], u[i + 1], u[i + 2], h, cfg.source_f
        )
        diags.append(
            DiagnosticsRow(i, float(x[i]), h, total_variation(u[: i + 3]),
                           abs(res), 0, "pole" if flag else "ok")
        )
    return RunOutput([(0.0, x, u)], diags, status, cfg)


def _run_uxx(cfg: ExperimentConfig) -> RunOutput:
    n = cfg.n_points
    h0 = (cfg.domain_b - cfg.domain_a) / (n - 1)
    x = np.empty(n)
    u = np.empty(n)
    x[0], x[1] = cfg.domain_a, cfg.domain_a + h0
    u[0] = cfg.ic_p * x[0] + cfg.ic_q
    u[1] = cfg.ic_p * x[1] + cfg.ic_q
    diags: list[DiagnosticsRow] = []
    for i in range(1, n - 1):
        x[i + 1], u[i + 1] = schemes.uxx_step(x[i - 1], x[i], u[i - 1], u[i], cfg.mesh_f)
        diags.append(
            DiagnosticsRow(i, float(x[i]), float(x[i + 1] - x[i]),
                           total_variation(u[: i + 2]), 0.0, 0, "ok")
        )
    return RunOutput([(0.0, x, u)], diags, "completed", cfg)


def _run_kdv_naive(cfg: ExperimentConfig) -> RunOutput:
    n = cfg.n_points
    x = np.linspace(cfg.domain_a, cfg.domain_b, n, endpoint=False)
    h = float((cfg.domain_b - cfg.domain_a) / n)
    k, steps = _pde_time_step(cfg, h)
    state = GridState(0.0, x, _initial_condition(cfg, x))
    every = _cadence(steps, cfg.snapshot_every)
    snaps = [(0.0, state.x.copy(), state.u.copy())]
    diags: list[DiagnosticsRow] = []
    for step in range(1, steps + 1):
        state = schemes.naive_kdv_step(state, k, h)
        diags.append(
            DiagnosticsRow(step, state.t, h, total_variation(state.u), 0.0, 0, "ok")
        )
        if step % every == 0 or step == steps:
            snaps.append((state.t, state.x.copy(), state.u.copy()))
    return RunOutput(snaps, diags, "completed", cfg)


def _run_kdv_invariant(cfg: ExperimentConfig) -> RunOutput:
    n = cfg.n_points
    x = np.linspace(cfg.domain_a, cfg.domain_b, n)
    h = float(x[1] - x[0])
    k, steps = _pde_time_step(cfg, h)
    state = GridState(0.0, x, _initial_condition(cfg, x))
    scheme = "6pt" if cfg.scheme == "kdv_6pt" else "10pt"
    monitor = MonitorParams(cfg.alpha) if cfg.mesh == "adaptive" else None
    floor = cfg.spacing_floor_rel * h
    every = _cadence(steps, cfg.snapshot_every)
    snaps = [(0.0, state.x.copy(), state.u.copy())]
    diags: list[DiagnosticsRow] = []
    status = "completed"
    for step in range(1, steps + 1):
        try:
            state, info = schemes.kdv_step_detailed(
                state, k, cfg.mesh, scheme,
                monitor=monitor, spacing_floor=floor,
            )
        except MeshTangling:
            status = "mesh_tangling"
        except NewtonDivergence:
            status = "newton_divergence"
        except SymfdError:
            status = "numerical_failure"
        if status != "completed":
            diags.append(
                DiagnosticsRow(step, state.t,
                               detect_tangling(state.x, floor).min_spacing,
                               total_variation(state.u), math.nan, 0, status)
            )
            snaps.append((state.t, state.x.copy(), state.u.copy()))
            break
        diags.append(
            DiagnosticsRow(step, state.t, info.min_spacing,
                           total_variation(state.u), info.residual_inf,
                           info.newton_iters,
                           "ok" if info.equi_residual <= 1e-10 else "equi_loose")
        )
        if step % every == 0 or step == steps:
            snaps.append((state.t, state.x.copy(), state.u.copy()))
    return RunOutput(snaps, diags, status, cfg)


def _run_burgers(cfg: ExperimentConfig) -> RunOutput:
    n = cfg.n_points
    x = np.linspace(cfg.domain_a, cfg.domain_b, n)
    h = float(x[1] - x[0])
    k, steps = _pde_time_step(cfg, h)
    state = GridState(0.0, x, _initial_condition(cfg, x))
    floor = cfg.spacing_floor_rel * h
    every = _cadence(steps, cfg.snapshot_every)
    snaps = [(0.0, state.x.copy(), state.u.copy())]
    diags: list[DiagnosticsRow] = []
    status = "completed"
    for step in range(1, steps + 1):
        try:
            state, info = schemes.burgers_fv_step_detailed(
                state, k, cfg.nu, cfg.alpha, spacing_floor=floor,
            )
        except MeshTangling:
            status = "mesh_tangling"
        except (NewtonDivergence, SchemeSingularity):
            status = "newton_divergence"
        except SymfdError:
            status = "numerical_failure"
        if status != "completed":
            diags.append(
                DiagnosticsRow(step, state.t,
                               detect_tangling(state.x, floor).min_spacing,
                               total_variation(state.u), math.nan, 0, status)
            )
            snaps.append((state.t, state.x.copy(), state.u.copy()))
            break
        diags.append(
            DiagnosticsRow(step, state.t, info.min_spacing,
                           total_variation(state.u), info.residual_inf, 0,
                           "ok" if info.equi_residual <= 1e-10 else "equi_loose")
        )
        if step % every == 0 or step == steps:
            snaps.append((state.t, state.x.copy(), state.u.copy()))
    return RunOutput(snaps, diags, status, cfg)


# ---------------------------------------------------------------------------
# invariance audits
# ---------------------------------------------------------------------------

AUDIT_SCHEMES = (
    "schwarzian_invariant",
    "schwarzian_invariantized",
    "kdv_6pt",
    "kdv_10pt",
    "burgers_fv",
    "uxx",
    "kdv_naive",
)


@dataclass
class AuditReport:
    """Strong (residual-level) and weak (step-level) invariance deviations."""

    scheme: str
    tol: float
    n_elements: int
    n_configs: int
    strong_max: float
    weak_max: float
    per_direction: dict[str, float]
    resampled: int
    passed: bool
    expected_to_fail: bool = False
    formula_match_error: float = math.nan

    def lines(self) -> list[str]:
        out = [f"audit {self.scheme}: tol {self.tol:g}, "
               f"{self.n_elements} elements x {self.n_configs} configs, "
               f"resampled {self.resampled}"]
        for name, dev in sorted(self.per_direction.items()):
            out.append(f"  direction {name:<10} max deviation {dev:.3e}")
        out.append(f"  strong {self.strong_max:.3e}  weak {self.weak_max:.3e}")
        if self.expected_to_fail:
            out.append(f"  boost-defect formula match error "
                       f"{self.formula_match_error:.3e}")
        out.append(f"  verdict: {'PASS' if self.passed else 'FAIL'}")
        return out


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def _draw_sl2(rng: DeterministicRng, direction: str) -> SL2Element:
    if direction == "shift_u":
        return SL2Element(1.0, rng.uniform(-1.0, 1.0), 0.0, 1.0)
    if direction == "dilate_u":
        s = math.exp(rng.uniform(-0.6, 0.6))
        return SL2Element(s, 0.0, 0.0, 1.0 / s)
    if direction == "special_u":
        return SL2Element(1.0, 0.0, rng.uniform(-0.6, 0.6), 1.0)
    g = _draw_sl2(rng, "shift_u")
    g = g.compose(_draw_sl2(rng, "dilate_u"))
    return g.compose(_draw_sl2(rng, "special_u"))


def _draw_kdv(rng: DeterministicRng, direction: str) -> KdVGroupElement:
    if direction == "shift_x":
        return KdVGroupElement(1.0, 0.0, rng.uniform(-1.0, 1.0), 0.0)
    if direction == "shift_t":
        return KdVGroupElement(1.0, 0.0, 0.0, rng.uniform(-1.0, 1.0))
    if direction == "boost":
        return KdVGroupElement(1.0, rng.uniform(-1.0, 1.0), 0.0, 0.0)
    if direction == "scale":
        return KdVGroupElement(math.exp(rng.uniform(-0.6, 0.6)), 0.0, 0.0, 0.0)
    return KdVGroupElement(
        math.exp(rng.uniform(-0.6, 0.6)),
        rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0),
    )


def _draw_burgers(rng: DeterministicRng, direction: str) -> BurgersGroupElement:
    if direction == "shift_x":
        return BurgersGroupElement(eps1=rng.uniform(-1.0, 1.0))
    if direction == "shift_t":
        return BurgersGroupElement(eps2=rng.uniform(-1.0, 1.0))
    if direction == "boost":
        return BurgersGroupElement(eps3=rng.uniform(-1.0, 1.0))
    if direction == "scale":
        return BurgersGroupElement(eps4=rng.uniform(-0.6, 0.6))
    return BurgersGroupElement(
        rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0), rng.uniform(-0.6, 0.6),
    )


def _draw_affine5(rng: DeterministicRng, direction: str):
    """(lam, alpha, a, b, beta) for X = lam x + a, U = alpha u + beta x + b."""
    lam = alpha = 1.0
    a = b = beta = 0.0
    if direction in ("shift_x", "mixed"):
        a = rng.uniform(-1.0, 1.0)
    if direction in ("shift_u", "mixed"):
        b = rng.uniform(-1.0, 1.0)
    if direction in ("scale_x", "mixed"):
        lam = math.exp(rng.uniform(-0.7, 0.7))
    if direction in ("shear", "mixed"):
        beta = rng.uniform(-1.0, 1.0)
    if direction in ("scale_u", "mixed"):
        alpha = math.exp(rng.uniform(-0.7, 0.7))
    return (lam, alpha, a, b, beta)


def _random_mesh(rng: DeterministicRng, n: int, start_lo=-1.0) -> np.ndarray:
    x = [rng.uniform(start_lo, start_lo + 2.0)]
    for _ in range(n - 1):
        x.append(x[-1] + rng.uniform(0.1, 2.0))
    return np.array(x)


def _random_u(rng: DeterministicRng, n: int) -> np.ndarray:
    return np.array([rng.uniform(-2.0, 2.0) for _ in range(n)])


def _transform_kdv_state(g: KdVGroupElement, st: GridState) -> GridState:
    pts = [apply_kdv(g, (st.t, float(x), float(u))) for x, u in zip(st.x, st.u)]
    return GridState(pts[0][0], np.array([p[1] for p in pts]),
                     np.array([p[2] for p in pts]))


def _transform_burgers_state(g: BurgersGroupElement, st: GridState) -> GridState:
    pts = [apply_burgers(g, (st.t, float(x), float(u))) for x, u in zip(st.x, st.u)]
    return GridState(pts[0][0], np.array([p[1] for p in pts]),
                     np.array([p[2] for p in pts]))


class _SchwarzianAudit:
    directions = ("shift_u", "dilate_u", "special_u", "mixed")

    def __init__(self, invariantized: bool):
        self.invariantized = invariantized

    def draw_config(self, rng: DeterministicRng):
        while True:
            u = [rng.uniform(-2.0, 2.0)]
            for _ in range(3):
                u.append(u[-1] + rng.choice_sign() * rng.uniform(0.1, 2.0))
            if abs(u[2] - u[0]) < 0.05 or abs(u[3] - u[1]) < 0.05:
                continue
            h = rng.uniform(0.05, 1.0)
            f = rng.uniform(-1.0, 1.0)
            return (tuple(u), h, f)

    def draw_element(self, rng, direction):
        return _draw_sl2(rng, direction)

    def admissible(self, g: SL2Element, config) -> bool:
        u, h, f = config
        if any(abs(g.c * v + g.d) < 0.2 for v in u):
            return False
        gu = [apply_sl2(g, v) for v in u]
        if min(abs(gu[m + 1] - gu[m]) for m in range(3)) < 1e-3:
            return False
        if abs(gu[2] - gu[0]) < 1e-3 or abs(gu[3] - gu[1]) < 1e-3:
            return False
        return True

    def strong(self, g, config) -> float:
        u, h, f = config
        res = (schemes.schwarzian_invariantized_residual if self.invariantized
               else schemes.schwarzian_invariant_residual)
        base = res(*u, h, f)
        gu = [apply_sl2(g, v) for v in u]
        return _rel_dev(base, res(*gu, h, f))

    def weak(self, g, config) -> float:
        u, h, f = config
        step = (schemes.schwarzian_invariantized_step if self.invariantized
                else schemes.schwarzian_step)
        src = lambda _x: f
        w = step(schemes.SchwarzianState(h, 0.0, u[0], u[1], u[2], src))
        if abs(g.c * w + g.d) < 0.2:
            raise _Resample
        gu = [apply_sl2(g, v) for v in u[:3]]
        gw = step(schemes.SchwarzianState(h, 0.0, gu[0], gu[1], gu[2], src))
        return _rel_dev(apply_sl2(g, w), gw)


class _KdVAudit:
    directions = ("shift_x", "shift_t", "boost", "scale", "mixed")

    def __init__(self, scheme: str):
        self.scheme = scheme
        self.residual = (schemes.kdv_residual_6pt if scheme == "6pt"
                         else schemes.kdv_residual_10pt)

    def draw_config(self, rng: DeterministicRng):
        n = 9
        prev = GridState(0.0, _random_mesh(rng, n), _random_u(rng, n))
        # keep the Lagrangian mesh of the weak audit untangled: the safe k
        # bound scales exactly like the group action, so it holds on both
        # sides of the commutation check
        slack = float(np.min(np.diff(prev.x) / np.maximum(np.abs(np.diff(prev.u)), 1e-9)))
        k = min(rng.uniform(0.1, 0.5), 0.4 * slack)
        nxt = GridState(k, _random_mesh(rng, n), _random_u(rng, n))
        return (prev, nxt, k)

    def draw_element(self, rng, direction):
        return _draw_kdv(rng, direction)

    def admissible(self, g, config) -> bool:
        return True

    def strong(self, g, config) -> float:
        prev, nxt, k = config
        base = self.residual(prev, nxt, k) * schemes.kdv_invariant_normalizer(prev, k)
        gp = _transform_kdv_state(g, prev)
        gn = _transform_kdv_state(g, nxt)
        gk = gn.t - gp.t
        img = self.residual(gp, gn, gk) * schemes.kdv_invariant_normalizer(gp, gk)
        return _rel_dev(base, img)

    def weak(self, g, config) -> float:
        prev, _nxt, k = config
        try:
            stepped = schemes.kdv_step(prev, k, "lagrangian", self.scheme)
            gp = _transform_kdv_state(g, prev)
            gstepped = schemes.kdv_step(gp, g.lam**3 * k, "lagrangian", self.scheme)
        except (MeshTangling, NewtonDivergence):
            raise _Resample from None
        img = _transform_kdv_state(g, stepped)
        return max(_rel_dev(img.x, gstepped.x), _rel_dev(img.u, gstepped.u))


class _BurgersAudit:
    directions = ("shift_x", "shift_t", "boost", "scale", "mixed")

    def draw_config(self, rng: DeterministicRng):
        n = 8
        while True:
            k = rng.uniform(0.1, 0.5)
            nu = rng.uniform(0.0, 0.5)
            prev = GridState(0.0, _random_mesh(rng, n), _random_u(rng, n))
            nxt = GridState(k, _random_mesh(rng, n), _random_u(rng, n))
            alpha = rng.uniform(0.0, 2.0)
            # keep the upwind branches away from the knife edge: the selector
            # sign is exactly preserved by the group action, so a margin on
            # the base configuration protects both sides of the comparison
            speed = prev.u[1:-1] - (nxt.x - prev.x)[1:-1] / k
            if np.min(np.abs(speed)) < 1e-3:
                continue
            if np.min(np.abs(np.diff(prev.u))) < 1e-6:
                continue
            return (prev, nxt, k, nu, alpha)

    def draw_element(self, rng, direction):
        return _draw_burgers(rng, direction)

    def admissible(self, g, config) -> bool:
        return True

    def strong(self, g, config) -> float:
        prev, nxt, k, nu, alpha = config
        base = schemes.burgers_fv_residual(prev, nxt, k, nu)
        gp = _transform_burgers_state(g, prev)
        gn = _transform_burgers_state(g, nxt)
        img = schemes.burgers_fv_residual(gp, gn, gn.t - gp.t, nu)
        return _rel_dev(base, img)

    def weak(self, g, config) -> float:
        prev, _nxt, k, nu, alpha = config
        s = math.exp(g.eps4)
        stepped = schemes.burgers_fv_step(prev, k, nu, alpha)
        gp = _transform_burgers_state(g, prev)
        gstepped = schemes.burgers_fv_step(gp, s**2 * k, nu, alpha,
                                           drift=g.eps3 / s)
        img = _transform_burgers_state(g, stepped)
        return max(_rel_dev(img.x, gstepped.x), _rel_dev(img.u, gstepped.u))


class _UxxAudit:
    directions = ("shift_x", "shift_u", "scale_x", "shear", "scale_u", "mixed")

    def draw_config(self, rng: DeterministicRng):
        x = _random_mesh(rng, 3)
        u_im1 = rng.uniform(-2.0, 2.0)
        u_i = u_im1 + rng.choice_sign() * rng.uniform(0.1, 2.0)
        f = (x[2] - x[1]) / (x[1] - x[0])
        # put the third value on the straight-line locus W = 0
        u_ip1 = u_i + f * (u_i - u_im1)
        return (x, np.array([u_im1, u_i, u_ip1]), f)

    def draw_element(self, rng, direction):
        return _draw_affine5(rng, direction)

    def admissible(self, g, config) -> bool:
        return True

    @staticmethod
    def _apply(g, x, u):
        lam, alpha, a, b, beta = g
        return lam * x + a, alpha * u + beta * x + b

    def strong(self, g, config) -> float:
        x, u, f = config
        gx, gu = self._apply(g, x, u)
        w = schemes.uxx_w_residual(gx[0], gx[1], gx[2], gu[0], gu[1], gu[2])
        scale = max(
            1.0,
            abs((gx[1] - gx[0]) * (gu[2] - gu[1])),
            abs((gx[2] - gx[1]) * (gu[1] - gu[0])),
        )
        return abs(w) / scale

    def weak(self, g, config) -> float:
        x, u, f = config
        x_next, u_next = schemes.uxx_step(x[0], x[1], u[0], u[1], f)
        gx, gu = self._apply(g, x[:2], u[:2])
        gx_next, gu_next = schemes.uxx_step(gx[0], gx[1], gu[0], gu[1], f)
        ix, iu = self._apply(g, np.array([x_next]), np.array([u_next]))
        return max(_rel_dev(ix, np.array([gx_next])), _rel_dev(iu, np.array([gu_next])))


class _Resample(Exception):
    pass


def invariance_audit(scheme: str, n_elements: int = 100, n_configs: int = 20,
                     seed: int = 0, tol: float = 1e-9) -> AuditReport:
    """Randomized residual-level and step-level invariance audit.

    Draws ``n_configs`` admissible configurations and ``n_elements`` group
    elements cycling through the generator directions (plus mixed draws),
    and reports the maximum relative deviation per direction.  The naive
    KdV scheme is audited against the Galilean boost only and is expected to
    fail with the analytic defect v (u_{i+1} - u_{i-1}) / (2h); its report
    checks that formula to 1e-10 and passes when the defect is present.
    """
    if scheme == "kdv_naive":
        return _naive_galilean_audit(n_elements, n_configs, seed, tol)
    audits = {
        "schwarzian_invariant": lambda: _SchwarzianAudit(False),
        "schwarzian_invariantized": lambda: _SchwarzianAudit(True),
        "kdv_6pt": lambda: _KdVAudit("6pt"),
        "kdv_10pt": lambda: _KdVAudit("10pt"),
        "burgers_fv": lambda: _BurgersAudit(),
        "uxx": lambda: _UxxAudit(),
    }
    if scheme not in audits:
        raise ConfigError(f"unknown audit scheme {scheme!r}; "
                          f"known: {', '.join(AUDIT_SCHEMES)}")
    audit = audits[scheme]()
    rng = DeterministicRng(seed)
    configs = [audit.draw_config(rng) for _ in range(n_configs)]
    per_direction = {d: 0.0 for d in audit.directions}
    strong_max = weak_max = 0.0
    resampled = 0
    for e in range(n_elements):
        direction = audit.directions[e % len(audit.directions)]
        for config in configs:
            guard = 0
            while True:
                g = audit.draw_element(rng, direction)
                if not audit.admissible(g, config):
                    resampled += 1
                    guard += 1
                    if guard > 500:
                        raise ConfigError("audit sampling stuck on inadmissible draws")
                    continue
                try:
                    s_dev = audit.strong(g, config)
                    w_dev = audit.weak(g, config)
                except _Resample:
                    resampled += 1
                    guard += 1
                    if guard > 500:
                        raise ConfigError("audit sampling stuck on degenerate draws")
                    continue
                break
            dev = max(s_dev, w_dev)
            per_direction[direction] = max(per_direction[direction], dev)
            strong_max = max(strong_max, s_dev)
            weak_max = max(weak_max, w_dev)
    return AuditReport(scheme, tol, n_elements, n_configs, strong_max, weak_max,
                       per_direction, resampled, strong_max <= tol and weak_max <= tol)


def _naive_galilean_audit(n_elements, n_configs, seed, tol) -> AuditReport:
    rng = DeterministicRng(seed)
    worst_dev = 0.0
    worst_formula = 0.0
    for _ in range(n_configs):
        n = 9
        h = rng.uniform(0.1, 2.0)
        k = rng.uniform(0.01, 0.5)
        u0 = _random_u(rng, n)
        u1 = _random_u(rng, n)
        base = schemes.naive_kdv_residual(u0, u1, k, h)
        for _ in range(max(1, n_elements // n_configs)):
            v = rng.uniform(-1.0, 1.0)
            img = schemes.naive_kdv_residual(u0 + v, u1 + v, k, h)
            predicted = v * (np.roll(u0, -1) - np.roll(u0, 1)) / (2.0 * h)
            worst_dev = max(worst_dev, _rel_dev(base, img))
            worst_formula = max(
                worst_formula, float(np.max(np.abs((img - base) - predicted)))
            )
    return AuditReport(
        "kdv_naive", tol, n_elements, n_configs, worst_dev, 0.0,
        {"boost": worst_dev}, 0, worst_dev > tol and worst_formula <= 1e-10,
        expected_to_fail=True, formula_match_error=worst_formula,
    )


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    h: float
    error: float
    observed_order: float


def _schwarzian_manufactured(h: float) -> float:
    """Max-norm error on a manufactured variable-source problem over [0, 1].

    With a constant source the leading O(h) term of the invariant scheme
    cancels and tan-seeded runs superconverge at second order; the generic
    first-order behavior shows on u = x + x^3 with its analytic source
    (6 - 36 x^2) / (1 + 3 x^2)^2.
    """
    u_ex = lambda xx: xx + xx**3
    src = lambda xx: (6.0 - 36.0 * xx**2) / (1.0 + 3.0 * xx**2) ** 2
    n = round(1.0 / h) + 1
    x = np.arange(n) * h
    u = np.empty(n)
    u[:3] = u_ex(x[:3])
    for i in range(1, n - 2):
        win = schemes.SchwarzianState(h, float(x[i]), u[i - 1], u[i], u[i + 1], src)
        u[i + 2] = schemes.schwarzian_step(win)
    return float(np.max(np.abs(u - u_ex(x))))


def convergence_study(scheme: str, h_list: Iterable[float]) -> list[ConvergenceRow]:
    """Max-norm error against the exact solution under mesh refinement.

    ``schwarzian_invariant`` integrates a manufactured variable-source
    problem over [0, 1]; ``kdv_naive`` runs a single soliton to t = 0.1 with
    k = 0.05 h^3 (the small constant keeps the amplified high-wavenumber
    noise of the explicit update far below truncation on refined levels).
    """
    errors = []
    hs = list(h_list)
    for h in hs:
        if scheme == "schwarzian_invariant":
            errors.append(_schwarzian_manufactured(h))
        elif scheme == "kdv_naive":
            a, b = -20.0, 20.0
            n = round((b - a) / h)
            cfg = validate_config({
                "equation": "kdv", "scheme": "kdv_naive",
                "domain_a": a, "domain_b": b, "n_points": n,
                "t_final": 0.1, "dt_constant": 0.05,
                "ic_c1": 1.0, "ic_c2": 0.0, "ic_a1": 0.0, "ic_a2": 0.0,
            })
            out = run_experiment(cfg)
            t, x, u = out.snapshots[-1]
            exact = exact_kdv_double_soliton(t, x, 1.0, 0.0, 0.0, 0.0)
            errors.append(float(np.max(np.abs(u - exact))))
        else:
            raise ConfigError(f"no convergence driver for scheme {scheme!r}")
    rows = []
    for m, (h, err) in enumerate(zip(hs, errors)):
        order = math.nan
        if m > 0 and err > 0 and errors[m - 1] > 0:
            order = math.log2(errors[m - 1] / err) / math.log2(hs[m - 1] / h)
        rows.append(ConvergenceRow(h, err, order))
    return rows


def format_convergence_csv(rows: list[ConvergenceRow]) -> str:
    lines = ["h,error,observed_order"]
    for r in rows:
        lines.append(f"{r.h:.17g},{r.error:.17g},{r.observed_order:.17g}")
    return "\n".join(lines) + "\n"
