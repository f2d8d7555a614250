"""Scheme residuals, steps, invariance, consistency, and baselines."""

import math

import numpy as np
import pytest

from symfd.errors import MeshTangling, SchemeSingularity
from symfd.groups import apply_burgers, apply_kdv, apply_sl2
from symfd.runner import exact_kdv_double_soliton
from symfd.rng import DeterministicRng
from symfd.schemes import (
    GridState,
    NewtonConfig,
    SchwarzianState,
    burgers_fv_residual,
    burgers_fv_step,
    burgers_fv_step_detailed,
    kdv_invariant_normalizer,
    kdv_residual_10pt,
    kdv_residual_6pt,
    kdv_step,
    kdv_step_detailed,
    minmod,
    naive_kdv_residual,
    naive_kdv_step,
    rk_adaptive_solve,
    schwarzian_invariant_residual,
    schwarzian_invariantized_residual,
    schwarzian_invariantized_step,
    schwarzian_step,
    theta_ratio,
    uxx_step,
    uxx_w_residual,
)

from _helpers import (
    rand_admissible_window,
    rand_burgers_element,
    rand_kdv_element,
    rand_mesh_row,
    rand_sl2_safe,
    rel_err,
)


# ---------------------------------------------------------------------------
# Schwarzian recurrence
# ---------------------------------------------------------------------------

def test_schwarzian_step_continues_equal_spacing():
    s = SchwarzianState(1.0, 0.0, -1.0, 0.0, 1.0, lambda x: 0.0)
    assert schwarzian_step(s) == pytest.approx(2.0, abs=1e-12)


def test_schwarzian_step_tracks_tangent():
    h = 0.01
    n = 105
    x = np.arange(n) * h
    u = np.empty(n)
    u[:3] = np.tan(x[:3])
    for i in range(1, n - 2):
        st = SchwarzianState(h, float(x[i]), u[i - 1], u[i], u[i + 1], lambda _x: 2.0)
        u[i + 2] = schwarzian_step(st)
    rel = abs(u[100] - math.tan(1.0)) / abs(math.tan(1.0))
    assert rel < 1e-2


def test_schwarzian_step_mobius_commutation():
    rng = DeterministicRng(80)
    count = 0
    while count < 100:
        u = rand_admissible_window(rng)[:3]
        h = rng.uniform(0.05, 1.0)
        f = rng.uniform(-1.0, 1.0)
        s = SchwarzianState(h, 0.0, u[0], u[1], u[2], lambda _x, ff=f: ff)
        w = schwarzian_step(s)
        g = rand_sl2_safe(rng, list(u) + [w])
        gu = [apply_sl2(g, v) for v in u]
        gw = schwarzian_step(SchwarzianState(h, 0.0, gu[0], gu[1], gu[2],
                                             lambda _x, ff=f: ff))
        assert rel_err(apply_sl2(g, w), gw) <= 1e-9
        count += 1


def test_schwarzian_step_singular_target():
    s = SchwarzianState(1.0, 0.0, 0.0, 1.0, 2.0, lambda x: 2.0)  # h^2 F = 2
    with pytest.raises(SchemeSingularity):
        schwarzian_step(s)


def test_schwarzian_residuals_on_exact_samples():
    # first order bound; with a constant source the O(h) coefficient cancels
    # and the decay is even faster, so assert the bound plus a >= 1.6 shrink
    maxres = {}
    for h in (0.02, 0.01):
        xs = np.arange(0.0, 0.8, h)
        us = np.tan(xs)
        res_i = [abs(schwarzian_invariantized_residual(
            us[i - 1], us[i], us[i + 1], us[i + 2], h, 2.0))
            for i in range(1, len(us) - 2)]
        maxres[h] = max(res_i)
    assert maxres[0.01] <= 0.1
    assert maxres[0.02] / maxres[0.01] >= 1.6


def test_schwarzian_invariantized_residual_defines_source():
    # equal spacing, F chosen as the residual combination: residual vanishes
    u = (0.0, 1.0, 2.0, 3.0)
    h = 0.3
    from symfd.invariants import cross_ratio, cross_ratio_conjugate
    f = (1.0 / (cross_ratio_conjugate(*u) - cross_ratio(*u)) - 2.0) / h**2
    assert schwarzian_invariantized_residual(*u, h, f) == pytest.approx(0.0, abs=1e-12)


def test_schwarzian_residual_mobius_invariance():
    rng = DeterministicRng(81)
    for _ in range(100):
        u = rand_admissible_window(rng)
        h = rng.uniform(0.05, 1.0)
        f = rng.uniform(-1.0, 1.0)
        g = rand_sl2_safe(rng, u)
        gu = [apply_sl2(g, v) for v in u]
        for res in (schwarzian_invariant_residual, schwarzian_invariantized_residual):
            assert rel_err(res(*u, h, f), res(*gu, h, f)) <= 1e-9


def test_schwarzian_invariantized_step_solves_residual():
    rng = DeterministicRng(82)
    for _ in range(50):
        u = rand_admissible_window(rng)[:3]
        h = rng.uniform(0.05, 0.5)
        f = rng.uniform(-1.0, 1.0)
        w = schwarzian_invariantized_step(
            SchwarzianState(h, 0.0, u[0], u[1], u[2], lambda _x, ff=f: ff))
        r = schwarzian_invariantized_residual(u[0], u[1], u[2], w, h, f)
        assert abs(r) <= 1e-8 * (1.0 + abs(f))


# ---------------------------------------------------------------------------
# straight-line scheme
# ---------------------------------------------------------------------------

def test_uxx_step_keeps_affine_data():
    x_im1, x_i = 0.0, 0.4
    p, q = 2.0, 1.0
    x_ip1, u_ip1 = uxx_step(x_im1, x_i, p * x_im1 + q, p * x_i + q, 1.7)
    assert u_ip1 == pytest.approx(p * x_ip1 + q, abs=1e-12)


def test_uxx_step_unit_ratio_uniform_mesh():
    x_ip1, _u = uxx_step(0.0, 0.5, 1.0, 2.0, 1.0)
    assert x_ip1 == pytest.approx(1.0)


def test_uxx_step_five_parameter_invariance():
    rng = DeterministicRng(83)
    for _ in range(100):
        x = rand_mesh_row(rng, 2)
        u = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
        f = rng.uniform(0.2, 3.0)
        lam = math.exp(rng.uniform(-0.7, 0.7))
        alp = math.exp(rng.uniform(-0.7, 0.7))
        a, b, beta = (rng.uniform(-1, 1) for _ in range(3))
        x_n, u_n = uxx_step(x[0], x[1], u[0], u[1], f)
        gx = [lam * v + a for v in x]
        gu = [alp * uu + beta * xx + b for uu, xx in zip(u, x)]
        gx_n, gu_n = uxx_step(gx[0], gx[1], gu[0], gu[1], f)
        assert abs(gx_n - (lam * x_n + a)) <= 1e-10 * (1.0 + abs(gx_n))
        assert abs(gu_n - (alp * u_n + beta * x_n + b)) <= 1e-10 * (1.0 + abs(gu_n))


def test_uxx_w_zero_set_preserved():
    rng = DeterministicRng(84)
    for _ in range(100):
        x = rand_mesh_row(rng, 3)
        u0, u1 = rng.uniform(-2, 2), rng.uniform(-2, 2)
        u2 = u1 + (x[2] - x[1]) / (x[1] - x[0]) * (u1 - u0)
        assert abs(uxx_w_residual(*x, u0, u1, u2)) <= 1e-12
        lam = math.exp(rng.uniform(-0.7, 0.7))
        alp = math.exp(rng.uniform(-0.7, 0.7))
        a, b, beta = (rng.uniform(-1, 1) for _ in range(3))
        gx = [lam * v + a for v in x]
        gu = [alp * uu + beta * xx + b for uu, xx in zip((u0, u1, u2), x)]
        w = uxx_w_residual(*gx, *gu)
        scale = max(1.0, abs((gx[1] - gx[0]) * (gu[2] - gu[1])))
        assert abs(w) / scale <= 1e-12


# ---------------------------------------------------------------------------
# KdV residuals and steps
# ---------------------------------------------------------------------------

def _soliton_pair(h, k, lagrangian=True):
    x = np.arange(-10.0, 10.0, h)
    u0 = exact_kdv_double_soliton(0.0, x, 1.0, 0.0, 0.0, 0.0)
    x1 = x + k * u0 if lagrangian else x
    u1 = exact_kdv_double_soliton(k, x1, 1.0, 0.0, 0.0, 0.0)
    return GridState(0.0, x, u0), GridState(k, x1, u1)


def test_kdv_residual_zero_on_advected_constant():
    x = np.linspace(0, 4, 9)
    c = 0.7
    k = 0.2
    prev = GridState(0.0, x, np.full(9, c))
    nxt = GridState(k, x + k * c, np.full(9, c))
    assert np.max(np.abs(kdv_residual_6pt(prev, nxt, k))) <= 1e-13
    assert np.max(np.abs(kdv_residual_10pt(prev, nxt, k))) <= 1e-13


@pytest.mark.parametrize("residual", [kdv_residual_6pt, kdv_residual_10pt])
def test_kdv_residual_first_order_on_soliton(residual):
    # k tied to h so the O(k) and O(h) pieces refine together
    vals = []
    for h in (0.1, 0.05, 0.025):
        prev, nxt = _soliton_pair(h, h / 2.0)
        vals.append(float(np.max(np.abs(residual(prev, nxt, nxt.t)))))
    assert 1.6 <= vals[0] / vals[1] <= 2.4
    assert 1.6 <= vals[1] / vals[2] <= 2.4


@pytest.mark.parametrize("residual", [kdv_residual_6pt, kdv_residual_10pt])
def test_kdv_residual_group_invariance(residual):
    rng = DeterministicRng(85)
    for _ in range(100):
        n = 9
        k = rng.uniform(0.1, 0.5)
        prev = GridState(0.0, rand_mesh_row(rng, n),
                         np.array([rng.uniform(-2, 2) for _ in range(n)]))
        nxt = GridState(k, rand_mesh_row(rng, n),
                        np.array([rng.uniform(-2, 2) for _ in range(n)]))
        base = residual(prev, nxt, k) * kdv_invariant_normalizer(prev, k)
        g = rand_kdv_element(rng)

        def tr(st):
            pts = [apply_kdv(g, (st.t, float(a), float(b)))
                   for a, b in zip(st.x, st.u)]
            return GridState(pts[0][0], np.array([p[1] for p in pts]),
                             np.array([p[2] for p in pts]))

        gp, gn = tr(prev), tr(nxt)
        img = residual(gp, gn, gn.t - gp.t) * kdv_invariant_normalizer(gp, gn.t - gp.t)
        assert rel_err(base, img) <= 1e-9


def test_kdv_step_constant_state_fixed_point():
    from symfd.mesh import MonitorParams

    x = np.linspace(0, 4, 9)
    c = -0.4
    prev = GridState(0.0, x, np.full(9, c))
    for scheme in ("6pt", "10pt"):
        for strategy in ("lagrangian", "adaptive", "projection"):
            nxt = kdv_step(prev, 0.1, strategy, scheme,
                           monitor=MonitorParams(10.0))
            assert np.max(np.abs(nxt.u - c)) <= 1e-12
            if strategy == "lagrangian":
                assert np.allclose(nxt.x, x + 0.1 * c)
            else:
                assert np.allclose(nxt.x, x, atol=0.1 * abs(c) + 1e-12)


def test_kdv_step_6pt_solves_residual():
    h = 0.25
    prev, _ = _soliton_pair(h, 0.01)
    nxt, info = kdv_step_detailed(prev, 0.01, "lagrangian", "6pt")
    assert info.residual_inf <= 1e-12
    assert np.max(np.abs(kdv_residual_6pt(prev, nxt, 0.01))) <= 1e-12


def test_kdv_step_10pt_newton_converges_fast():
    h = 0.25
    prev, _ = _soliton_pair(h, 0.01)
    nxt, info = kdv_step_detailed(prev, 0.01, "lagrangian", "10pt",
                                  NewtonConfig(tol=1e-12))
    assert info.residual_inf <= 1e-12
    # the system is linear in the unknowns: one Newton update suffices
    assert info.newton_iters <= 2


def test_kdv_step_tangling_abort():
    x = np.linspace(0, 4, 9)
    u = np.array([0.0, 3.0, -3.0, 3.0, -3.0, 3.0, -3.0, 3.0, 0.0])
    with pytest.raises(MeshTangling):
        kdv_step(GridState(0.0, x, u), 0.3, "lagrangian", "6pt")


def test_kdv_adaptive_step_equidistributes():
    from symfd.mesh import MonitorParams

    h = 0.25
    prev, _ = _soliton_pair(h, 0.01)
    nxt, info = kdv_step_detailed(prev, 0.01, "adaptive", "6pt",
                                  monitor=MonitorParams(10.0))
    assert info.equi_residual <= 1e-10
    assert nxt.x[0] == pytest.approx(prev.x[0])
    assert nxt.x[-1] == pytest.approx(prev.x[-1])


def test_naive_kdv_constant_state():
    x = np.linspace(0, 4, 9)
    prev = GridState(0.0, x, np.full(9, 1.3))
    nxt = naive_kdv_step(prev, 0.01, 0.5)
    assert np.max(np.abs(nxt.u - 1.3)) <= 1e-14


def test_naive_kdv_galilean_defect_formula():
    rng = DeterministicRng(86)
    n, h, k = 12, 0.4, 0.05
    u0 = np.array([rng.uniform(-2, 2) for _ in range(n)])
    u1 = np.array([rng.uniform(-2, 2) for _ in range(n)])
    for _ in range(20):
        v = rng.uniform(-1.0, 1.0)
        dev = (naive_kdv_residual(u0 + v, u1 + v, k, h)
               - naive_kdv_residual(u0, u1, k, h))
        predicted = v * (np.roll(u0, -1) - np.roll(u0, 1)) / (2.0 * h)
        assert np.max(np.abs(dev - predicted)) <= 1e-10
        assert np.max(np.abs(dev)) > 1e-3  # the defect is genuinely present


def test_naive_kdv_short_soliton_accuracy():
    h = 0.25
    a, b = -20.0, 20.0
    n = round((b - a) / h)
    x = np.linspace(a, b, n, endpoint=False)
    st = GridState(0.0, x, exact_kdv_double_soliton(0.0, x, 1.0, 0.0, 0.0, 0.0))
    k = 0.05 * h**3
    steps = round(0.1 / k)
    k = 0.1 / steps
    for _ in range(steps):
        st = naive_kdv_step(st, k, h)
    err = np.max(np.abs(st.u - exact_kdv_double_soliton(st.t, x, 1.0, 0.0, 0.0, 0.0)))
    assert err <= 5e-3  # second order in h at t = 0.1


# ---------------------------------------------------------------------------
# Burgers finite volume
# ---------------------------------------------------------------------------

def test_minmod_values():
    assert minmod(0.5) == 0.5
    assert minmod(2.0) == 1.0
    assert minmod(-1.0) == 0.0


def test_theta_ratio_conventions():
    assert theta_ratio(0.0, 1.0, 2.0, 3.0, +1.0) == pytest.approx(1.0)
    assert theta_ratio(0.0, 1.0, 1.0, 1.0, +1.0) == pytest.approx(1e15)
    assert theta_ratio(1.0, 1.0, 1.0, 5.0, +1.0) == pytest.approx(1.0)
    assert theta_ratio(1.0, 1.0, 1.0, 5.0, -1.0) == pytest.approx(1e15)
    assert theta_ratio(3.0, 1.0, 2.0, 0.0, -1.0) == pytest.approx(-2.0)


def test_theta_ratio_group_invariance():
    rng = DeterministicRng(87)
    for _ in range(100):
        w = rand_admissible_window(rng)
        g = rand_burgers_element(rng)
        s = math.exp(g.eps4)
        gw = [(v + g.eps3) / s for v in w]
        t0 = theta_ratio(*w, +1.0)
        t1 = theta_ratio(*gw, +1.0)
        assert abs(t1 - t0) <= 1e-10 * (1.0 + abs(t0))


def test_burgers_constant_state_fixed_point():
    x = np.linspace(0, 1, 12)
    for c in (0.8, -0.8):
        prev = GridState(0.0, x, np.full(12, c))
        for nu in (0.0, 0.3):
            nxt = burgers_fv_step(prev, 0.01, nu, 0.7)
            assert np.max(np.abs(nxt.u - c)) <= 1e-12


def test_burgers_residual_group_invariance():
    rng = DeterministicRng(88)
    count = 0
    while count < 100:
        n = 8
        k = rng.uniform(0.1, 0.5)
        nu = rng.uniform(0.0, 0.5)
        prev = GridState(0.0, rand_mesh_row(rng, n),
                         np.array([rng.uniform(-2, 2) for _ in range(n)]))
        nxt = GridState(k, rand_mesh_row(rng, n),
                        np.array([rng.uniform(-2, 2) for _ in range(n)]))
        speed = prev.u[1:-1] - (nxt.x - prev.x)[1:-1] / k
        if np.min(np.abs(speed)) < 1e-3 or np.min(np.abs(np.diff(prev.u))) < 1e-6:
            continue
        base = burgers_fv_residual(prev, nxt, k, nu)
        g = rand_burgers_element(rng)

        def tr(st):
            pts = [apply_burgers(g, (st.t, float(a), float(b)))
                   for a, b in zip(st.x, st.u)]
            return GridState(pts[0][0], np.array([p[1] for p in pts]),
                             np.array([p[2] for p in pts]))

        gp, gn = tr(prev), tr(nxt)
        img = burgers_fv_residual(gp, gn, gn.t - gp.t, nu)
        assert rel_err(base, img) <= 1e-9
        count += 1


def test_burgers_step_solves_residual():
    x = np.linspace(-1, 1, 24)
    u = np.tanh(-3.0 * x)
    prev = GridState(0.0, x, u)
    nxt, info = burgers_fv_step_detailed(prev, 0.002, 0.05, 0.5,
                                         NewtonConfig(tol=1e-10))
    assert info.residual_inf <= 1e-10 * (1.0 + float(np.max(np.abs(nxt.u))))
    r = burgers_fv_residual(prev, nxt, 0.002, 0.05)
    assert np.max(np.abs(r)) <= 1e-12


def test_burgers_low_order_mass_balance():
    # nu = 0, positive data, uniform static mesh, limiter pinned low order:
    # the interior mass changes only by the boundary flux difference
    n = 24
    x = np.linspace(0.0, 1.0, n)
    h = x[1] - x[0]
    u = 1.0 + 0.5 * np.sin(2.0 * np.pi * x) ** 2
    prev = GridState(0.0, x, u)
    k = 0.001
    nxt, _ = burgers_fv_step_detailed(prev, k, 0.0, 0.0, phi_override=0.0)
    dm = h * float(np.sum(nxt.u[1:-1] - u[1:-1]))
    f = 0.5 * u**2  # sigma = 0 and nu = 0 leave only the advective flux
    assert abs(dm + k * (f[-2] - f[0])) <= 1e-10


def test_burgers_shock_total_variation_bound():
    from symfd.runner import exact_burgers, total_variation

    n = 64
    x = np.linspace(-0.5, 0.5, n)
    h = x[1] - x[0]
    nu = 0.001
    st = GridState(0.0, x, np.asarray(exact_burgers(0.0, x, nu, 0.25)))
    tv0 = total_variation(st.u)
    k = 0.4 * h * h
    for _ in range(400):
        st = burgers_fv_step(st, k, nu, 0.5)
        assert total_variation(st.u) <= tv0 + 1e-8


# ---------------------------------------------------------------------------
# adaptive Runge-Kutta baseline
# ---------------------------------------------------------------------------

def test_rk_exponential():
    tr = rk_adaptive_solve(lambda x, y: y, [1.0], (0.0, 1.0), 1e-10)
    assert not tr.diverged
    assert abs(tr.final()[1][0] - math.e) <= 1e-9


def test_rk_riccati():
    tr = rk_adaptive_solve(lambda x, y: -y**2, [1.0], (0.0, 1.0), 1e-10)
    assert abs(tr.final()[1][0] - 0.5) <= 1e-9


def test_rk_schwarzian_divergence_near_pole():
    from symfd.runner import schwarzian_rhs

    f = schwarzian_rhs(lambda x: 2.0)
    tr = rk_adaptive_solve(f, [0.0, 1.0, 0.0], (0.0, 2.5), 1e-12)
    assert tr.diverged
    assert tr.final()[0] < 1.6
    assert abs(tr.final()[0] - math.pi / 2.0) < 0.05
