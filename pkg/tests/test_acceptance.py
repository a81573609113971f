"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line (also collected into the
pytest terminal summary).  Monte-Carlo criteria are marked ``slow``; run the
file alone with ``pytest tests/test_acceptance.py -s``.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from fmeixner.cfree import kernel_property_test, matrix_cfree_test, counterexample_values
from fmeixner.cfree import AlgebraElement
from fmeixner.fock import (
    FockModel,
    meixner_moment_fock,
    meixner_moment_fock_beta2_zero,
    meixner_moment_fock_psi2,
    state_moment,
)
from fmeixner.jacobi import MeixnerParams, density_eval, density_mass, density_moments, \
    moments_tridiagonal
from fmeixner.partitions import enumerate_nc2, enumerate_nc12, moments_combinatorial
from fmeixner.rmt import BlockSpec, EnsembleSpec, LabelParams, finite_size_sweep, \
    mc_moments_both, oracle_moments

from conftest import ACCEPTANCE_LINES
from oracles import finite_size_moment

M_MAX = 10
GRID_SIZE = 120


def record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def parameter_grid(size=GRID_SIZE, seed=20240611):
    """|a_i| <= 2, b_i in (0, 3]."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-2, 2, (size, 2))
    b = 3.0 * (1.0 - rng.random((size, 2)))
    return [MeixnerParams(a[i, 0], a[i, 1], b[i, 0], b[i, 1]) for i in range(size)]


def scaled_error(x, ref, p: MeixnerParams):
    """Deviation relative to the moments of the law with |alpha| in place of alpha,
    which bound every term of the partition sum."""
    scale = moments_tridiagonal(p.jacobi().absolute(), len(ref) - 1).moments
    return float(np.max(np.abs(np.asarray(x) - np.asarray(ref)) / np.maximum(scale, 1e-300)))


def test_criterion_1_three_route_agreement():
    t0 = time.perf_counter()
    worst = 0.0
    for p in parameter_grid():
        comb = moments_combinatorial(p.jacobi(), M_MAX).moments
        tri = moments_tridiagonal(p.jacobi(), M_MAX).moments
        fock = [meixner_moment_fock(p, m) for m in range(M_MAX + 1)]
        worst = max(worst, scaled_error(tri, comb, p), scaled_error(fock, comb, p),
                    scaled_error(fock, tri, p))
    dt = time.perf_counter() - t0
    ok = record(1, worst <= 1e-9 and dt < 60,
                f"{GRID_SIZE} laws, m <= {M_MAX}, max rel dev {worst:.2e} (tol 1e-9), {dt:.1f} s")
    assert ok


MOTZKIN = [1, 1, 2, 4, 9, 21, 51, 127, 323, 835, 2188, 5798, 15511]
CATALAN = [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862]


def test_criterion_2_counts():
    t0 = time.perf_counter()
    nc12 = [sum(1 for _ in enumerate_nc12(m)) for m in range(13)]
    nc2 = [sum(1 for _ in enumerate_nc2(2 * s)) for s in range(10)]
    dt = time.perf_counter() - t0
    ok = record(2, nc12 == MOTZKIN and nc2 == CATALAN and dt < 30,
                f"NC12 counts m <= 12 {'match' if nc12 == MOTZKIN else nc12}, "
                f"NC2 counts s <= 9 {'match' if nc2 == CATALAN else nc2}, {dt:.1f} s")
    assert ok


def test_criterion_3_worked_examples():
    b1, b2, a1, a2 = 2.0, 3.0, 1.0, -1.0
    model = FockModel(["u"], 6, MeixnerParams(a1, a2, b1, b2))
    pi = state_moment(model, 1, "p1* p2* p2* p2 p2 p2* p2 p1")
    sigma = state_moment(model, 1, "p1* p2* g p2* p2 g p2 p1 g")
    e_pi, e_sigma = b1 * b2 ** 3, a1 * a2 ** 2 * b1 * b2 ** 2
    ok = record(3, abs(pi - e_pi) <= 1e-12 and abs(sigma - e_sigma) <= 1e-12,
                f"pi word {pi} vs {e_pi}, sigma word {sigma} vs {e_sigma}")
    assert ok


def test_criterion_4_degenerate_and_second_state_routes():
    worst_b2, worst_psi2 = 0.0, 0.0
    for p in parameter_grid():
        q = MeixnerParams(p.a1, p.a2, p.b1, 0.0)
        comb = moments_combinatorial(q.jacobi(), M_MAX).moments
        got = [meixner_moment_fock_beta2_zero(q, m) for m in range(M_MAX + 1)]
        worst_b2 = max(worst_b2, scaled_error(got, comb, q))
        law = MeixnerParams(p.a1, p.a2, p.b2, p.b2)
        comb2 = moments_combinatorial(law.jacobi(), M_MAX).moments
        got2 = [meixner_moment_fock_psi2(p, m) for m in range(M_MAX + 1)]
        worst_psi2 = max(worst_psi2, scaled_error(got2, comb2, law))
    ok = record(4, worst_b2 <= 1e-9 and worst_psi2 <= 1e-9,
                f"b2 = 0 route max rel dev {worst_b2:.2e}, Psi2 route max rel dev "
                f"{worst_psi2:.2e} (tol 1e-9)")
    assert ok


DENSITY_POINTS = [(0, 0, 1, 1), (0, 0.5, 1, 1.5), (0, -0.3, 1, 2.0), (0, 0.2, 1, 0.8),
                  (0, 0.0, 1, 2.5), (0, 1.0, 1, 3.0), (0, 3.0, 1, 0.5)]


def test_criterion_5_density_consistency():
    t0 = time.perf_counter()
    used, worst = 0, 0.0
    for t in DENSITY_POINTS:
        p = MeixnerParams(*t)
        if abs(density_mass(p) - 1.0) > 1e-3:
            continue
        used += 1
        quad = density_moments(p, 6)
        comb = moments_combinatorial(p.jacobi(), 6).moments
        worst = max(worst, float(np.max(np.abs(quad - comb))))
    at0 = density_eval(MeixnerParams(0, 0, 1, 1), 0.0)
    dt = time.perf_counter() - t0
    ok = record(5, used >= 2 and worst <= 1e-5 and abs(at0 - 1 / math.pi) <= 1e-9 and dt < 10,
                f"{used} laws with unit mass, max moment error {worst:.1e} (tol 1e-5), "
                f"semicircle f(0) - 1/pi = {at0 - 1 / math.pi:.1e}, {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------- Monte-Carlo criteria

BLOCK_LAWS = [(a, b) for a in ((0.0, 0.0), (0.5, -0.5)) for b in ((1, 1), (1, 2), (2, 1))]
N, TRIALS = 512, 400


@lru_cache(maxsize=None)
def block_tables(a, b):
    spec = BlockSpec.single(N, a[0], a[1], b[0], b[1])
    assert spec.n1 == 22
    return mc_moments_both(spec, "u", 6, TRIALS, seed=41)


def _moment_failures(state, route):
    fails, worst = [], 0.0
    for a, b in BLOCK_LAWS:
        tab = block_tables(a, b)[state - 1]
        lp = LabelParams(a[0], a[1], 0.0, b[0], b[1])
        oracle = oracle_moments(lp, 6, state, route)
        for m in range(7):
            err = abs(tab.moments[m] - oracle[m])
            tol = max(3 * tab.stderr[m], 0.05 * abs(oracle[m]) + 0.02)
            worst = max(worst, err / tol)
            if err > tol:
                fails.append(f"a={a} b={b} m={m}: {tab.moments[m]:.4f} vs {oracle[m]:.4f}")
    return fails, worst


@pytest.mark.slow
def test_criterion_6a_tau1_moments():
    fails, worst = _moment_failures(1, "ensemble")
    ok = record("6a", not fails,
                f"tau_1 moments m <= 6 at n = {N}, n1 = 22, {TRIALS} trials: "
                f"{len(fails)} of {7 * len(BLOCK_LAWS)} outside tolerance, worst err/tol "
                f"{worst:.2f}" + (f"; first: {fails[0]}" if fails else ""))
    assert ok, "\n".join(fails)


@pytest.mark.slow
def test_criterion_6b_tau2_against_restricted_oracle():
    fails, worst = _moment_failures(2, "restricted")
    ok = record("6b", not fails,
                f"tau_2 moments vs law (a1, a2, b2, b2): {len(fails)} of "
                f"{7 * len(BLOCK_LAWS)} outside tolerance, worst err/tol {worst:.2f}"
                + (f"; first: {fails[0]}" if fails else ""))
    assert ok, "\n".join(fails)


@pytest.mark.slow
def test_diagnostic_6_estimates_sit_on_finite_size_prediction():
    """Not a criterion: shows the deviations in 6a/6b are the O(n1/n)
    block-ratio bias of the estimator, not sampling noise or a bug."""
    d = (22 / N, (N - 22) / N)
    worst = 0.0
    for a, b in BLOCK_LAWS:
        V = [[0.0, b[0]], [b[0], b[1]]]
        for state in (1, 2):
            tab = block_tables(a, b)[state - 1]
            for m in range(7):
                pred = finite_size_moment(m, state, d, V, a)
                bound = 4 * tab.stderr[m] + 0.01 * (1 + abs(pred))
                worst = max(worst, abs(tab.moments[m] - pred) / bound)
    ok = worst <= 1.0
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] diagnostic 6: estimates vs "
                            f"finite block-ratio prediction, worst err/bound {worst:.2f}")
    assert ok


def test_criterion_7_kernel_property():
    points = [
        {"s": (0, 0, 1, 2), "u": (0, 0, 1, 2), "t": (0, 0, 1, 2)},
        {"s": (0.5, -0.5, 1, 2), "u": (0.5, -0.5, 2, 1), "t": (0, 1, 1, 1)},
        {"s": (1, -1, 2, 3), "u": (-0.3, 0.7, 0.5, 1.5), "t": (0.2, 0.2, 3, 0.4)},
        {"s": (-2, 2, 0.1, 3), "u": (1.5, -0.5, 2.5, 0.2), "t": (0, -1.2, 1.2, 2.2)},
        {"s": (0.3, 0.3, 1, 1), "u": (0.9, -1.9, 0.7, 2.7), "t": (-1, 0, 2, 2)},
    ]
    words = [["s", "u"], ["s", "u", "s"], ["u", "t", "s", "t"], ["s", "u", "s", "u", "s"],
             ["s", "u", "t", "s", "u"]]
    worst, runs = 0.0, 0
    for k, pt in enumerate(points):
        params = {u: MeixnerParams(*v) for u, v in pt.items()}
        model = FockModel(list(params), 9, params)
        for w in words:
            worst = max(worst, kernel_property_test(model, w, 3, seed=k, samples=200))
            runs += 1
    flat = FockModel(["s", "u"], 4, MeixnerParams(0, 0, 1, 2))
    power = kernel_property_test(flat, ["s", "u", "s"], 2, seed=0, samples=200, centering="psi1")
    need = 0.5 * abs(1 * (2 - 1))
    ok = record(7, worst <= 1e-9 and power >= need,
                f"{runs} word/parameter runs x 200 draws, max |Psi_1| {worst:.1e} (tol 1e-9); "
                f"wrong-centering power {power:.2f} >= {need}")
    assert ok


def _counterexample_espec(b1, b2):
    lp = LabelParams(0, 0, 0, b1, b2)
    return EnsembleSpec(BlockSpec(N, {"s": lp, "u": lp}), TRIALS, seed=51)


def test_criterion_8a_counterexample_fock_values():
    vals = {}
    for b1, b2 in ((1, 2), (1, 3)):
        p = MeixnerParams(0, 0, b1, b2)
        vals[(b1, b2)] = counterexample_values(FockModel(["s", "u"], 3, {"s": p, "u": p}), "s", "u")
    errs = [max(abs(v2 - b1 * (b2 - b1)), abs(v3)) for (b1, b2), (v2, v3) in vals.items()]
    ok = record("8a", max(errs) <= 1e-10,
                "Fock " + ", ".join(f"(b1,b2)={k}: ({v[0]:.12g}, {v[1]:.1e})"
                                    for k, v in vals.items()))
    assert ok


@pytest.mark.slow
def test_criterion_8b_counterexample_matrix_estimates():
    lines, ok = [], True
    for b1, b2 in ((1, 2), (1, 3)):
        espec = _counterexample_espec(b1, b2)
        for c, limit in ((b1, b1 * (b2 - b1)), (b2, 0.0)):
            w = [AlgebraElement("s", (0, 1)), AlgebraElement("u", (-c, 0, 1)),
                 AlgebraElement("s", (0, 1))]
            out = matrix_cfree_test(espec, w, centering=None)
            tol = max(3 * out["stderr"], 0.05)
            good = abs(out["estimate"] - limit) <= tol and abs(out["limit"] - limit) <= 1e-10
            ok &= good
            lines.append(f"({b1},{b2}) c={c}: {out['estimate']:.4f} +- {out['stderr']:.4f} "
                         f"vs {limit:g}")
    assert record("8b", ok, f"matrix estimates n = {N}, {TRIALS} trials: " + "; ".join(lines)), \
        "\n".join(lines)


@pytest.mark.slow
def test_criterion_9_finite_size_trend():
    res = finite_size_sweep(BlockSpec.single(512), "u", 4, [64, 128, 256, 512], TRIALS, seed=9)
    first, last = res.rows[0], res.rows[-1]
    allowance = 2 * math.hypot(first["stderr"], last["stderr"])
    ok = last["abs_error"] <= first["abs_error"] + allowance
    detail = ", ".join(f"n={r['n']}: |err| {r['abs_error']:.4f}" for r in res.rows)
    assert record(9, ok, f"semicircle m = 4 vs 2: {detail}; allowance {allowance:.4f}")
