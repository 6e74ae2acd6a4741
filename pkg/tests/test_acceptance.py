"""Acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed in the pytest terminal summary, or directly when this file is run as
a script (``python3 tests/test_acceptance.py``).
"""

import math
import time

import numpy as np
import pytest

from sglab import backlund as bl
from sglab import geometry as geo
from sglab import scattering as scat
from sglab import soliton as sc
from sglab import spectral as spc
from sglab.errors import NearSingular
from sglab.soliton import HyperbolicConfig, SolitonConfig

pytestmark = pytest.mark.acceptance

RESULTS = []

LAMBDAS = (-3.0, -1.5, -0.5, -0.2, 0.2, 0.5, 1.5, 3.0)
MORSE_CONFIGS = {
    1: SolitonConfig.kink(0.0),
    2: SolitonConfig.saddle(),
    3: SolitonConfig.from_angles(np.radians([10.0, 50.0, 90.0]), [0.0, 0.0, 0.0]),
}
_MORSE_CACHE = {}


def record(number, ok, detail, status=None):
    status = status or ("PASS" if ok else "FAIL")
    line = f"criterion {number:>2}: {status}  {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


def random_config(rng, n):
    while True:
        th = rng.uniform(-1.4, 1.4, n)
        if n == 1 or np.min(np.abs(th[:, None] - th[None, :]) + 10 * np.eye(n)) > 0.05:
            return SolitonConfig.from_angles(th, rng.normal(scale=0.7, size=n))


def test_c01_pde_residual():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = {}
    for n in (1, 2, 3, 4, 6):
        cfg = random_config(rng, n)
        x, y = rng.uniform(-30, 30, (2, 10_000))
        worst[n] = float(np.max(np.abs(sc.pde_residual(cfg, x, y))))
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and dt < 30
    detail = ", ".join(f"n={n}: {v:.1e}" for n, v in worst.items())
    assert record(1, ok, f"max |Delta U - sin U| ({detail}) <= 1e-10; {dt:.1f} s < 30 s")


def test_c02_four_end_closed_form():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    x = np.linspace(-20, 20, 200)
    X, Y = np.meshgrid(x, x)
    worst = 0.0
    for _ in range(5):
        th = rng.uniform(0.1, 1.4)
        p, q = math.cos(th), math.sin(th)
        u = sc.eval_solution(SolitonConfig.four_end(p, q), X, Y, shifted=True)
        worst = max(worst, float(np.max(np.abs(u - sc.four_end_closed_form(p, q, X, Y)))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 10
    assert record(2, ok, f"max |U_2 - phi_pq| = {worst:.1e} <= 1e-12 on 200x200, 5 (p,q); {dt:.1f} s < 10 s")


def morse_reports():
    if not _MORSE_CACHE:
        t0 = time.perf_counter()
        for n, cfg in MORSE_CONFIGS.items():
            _MORSE_CACHE[n] = spc.morse_index(cfg, spc.DEFAULT_SCHEDULE, 0.02)
        _MORSE_CACHE["seconds"] = time.perf_counter() - t0
    return _MORSE_CACHE


def test_c03_morse_table():
    reps = morse_reports()
    found = {n: reps[n].morse_index for n in (1, 2, 3)}
    expected = {n: n * (n - 1) // 2 for n in (1, 2, 3)}
    stable = all(reps[n].stable for n in (1, 2, 3))
    per_delta = all(g.count_delta == g.count_half_delta for n in (1, 2, 3) for g in reps[n].per_grid)
    dt = reps["seconds"]
    ok = found == expected and stable and per_delta and dt <= 600
    assert record(3, ok, f"Morse index {found} vs {expected}; stable over 2 grids and delta in {{0.02, 0.01}}: "
                         f"{stable and per_delta}; {dt:.0f} s <= 600 s")


def test_c04_nondegeneracy():
    reps = morse_reports()
    parts, ok = [], True
    for n in (1, 2, 3):
        g1, g2 = reps[n].per_grid
        clusters = (g1.kernel_cluster, g2.kernel_cluster)
        orders = [math.log(a / b) / math.log(g1.grid.h / g2.grid.h)
                  for a, b in zip(g1.kernel_residual_norms, g2.kernel_residual_norms)]
        ok &= clusters == (n, n) and all(abs(o - 2.0) <= 0.25 for o in orders)
        parts.append(f"n={n}: cluster {clusters}, orders {min(orders):.2f}..{max(orders):.2f}")
    gram = spc.kernel_gram_min_eig(MORSE_CONFIGS[2], spc.DEFAULT_SCHEDULE[0])
    ok &= gram > 1e-3
    assert record(4, ok, "; ".join(parts) + f"; n=2 Gram min eig {gram:.2f} > 1e-3")


def test_c05_backlund():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    hyp_worst, hyp_sens = 0.0, np.inf
    for n in (1, 2, 3):
        r = np.sort(rng.uniform(-1, 1, n))[::-1]
        hc = HyperbolicConfig.from_rapidities(r, rng.normal(size=n))
        pts = rng.uniform(-5, 5, (100, 2))
        for x, z in pts:
            hyp_worst = max(hyp_worst, *map(abs, bl.bilinear_backlund_residual(hc, x, z)))
        sens = max(max(map(abs, bl.bilinear_backlund_residual(hc, x, z, backlund_k=hc.k[-1] * (1 + 1e-3))))
                   for x, z in pts[:10])
        hyp_sens = min(hyp_sens, sens)
    ell_worst, ell_sens, used = 0.0, np.inf, 0
    for n in (1, 2, 3):
        cfg = random_config(rng, n)
        ok_pts = []
        for x, y in rng.uniform(-6, 6, (150, 2)):
            try:
                r = bl.elliptic_backlund_residual(cfg, x, y)
            except NearSingular:
                continue
            ok_pts.append((x, y))
            ell_worst = max(ell_worst, *map(abs, r))
        used += len(ok_pts)
        sens = max(max(map(abs, bl.elliptic_backlund_residual(cfg, x, y, backlund_k=cfg.k[-1] * np.exp(1e-3j))))
                   for x, y in ok_pts[:10])
        ell_sens = min(ell_sens, sens)
    dt = time.perf_counter() - t0
    ok = hyp_worst <= 1e-9 and ell_worst <= 1e-8 and hyp_sens > 1e-5 and ell_sens > 1e-5 and dt < 60
    assert record(5, ok, f"bilinear Backlund {hyp_worst:.1e} <= 1e-9; elliptic Backlund {ell_worst:.1e} <= 1e-8 ({used} pts off S); "
                         f"perturbed {hyp_sens:.1e}, {ell_sens:.1e} > 1e-5; {dt:.1f} s < 60 s")


def test_c06_bilinear():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in (1, 2):
        hc = HyperbolicConfig.from_rapidities(np.sort(rng.uniform(-1, 1, n))[::-1], rng.normal(size=n))
        for x, z in rng.uniform(-5, 5, (200, 2)):
            worst = max(worst, bl.bilinear_residual(hc, x, z))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10
    assert record(6, ok, f"D_s D_t F.F - (F^2 - conj(F)^2)/2: {worst:.1e} <= 1e-9; {dt:.1f} s < 10 s")


def test_c07_scattering():
    t0 = time.perf_counter()
    cfgs = {1: SolitonConfig.kink(0.0, 0.3), 2: SolitonConfig.four_end(0.8, 0.6),
            3: SolitonConfig.from_angles(np.radians([-35.0, 5.0, 30.0]), [0.2, -0.1, 0.3])}
    worst_b, worst_drift, worst_det = 0.0, 0.0, 0.0
    for cfg in cfgs.values():
        for lam in LAMBDAS:
            s0 = scat.scattering_coeffs(cfg, 0.0, lam)
            s5 = scat.scattering_coeffs(cfg, 5.0, lam)
            worst_b = max(worst_b, abs(s0.b), abs(s5.b))
            worst_drift = max(worst_drift, abs(s0.a - s5.a))
            worst_det = max(worst_det, s0.det_error, s5.det_error)
    free = max(float(np.max(np.abs(np.linalg.inv(scat.integrate_lax(None, 0.0, lam)) - np.eye(2))))
               for lam in LAMBDAS)
    dt = time.perf_counter() - t0
    ok = worst_b <= 1e-6 and worst_drift <= 1e-6 and free <= 1e-8 and worst_det <= 1e-6 and dt <= 120
    assert record(7, ok, f"|b| {worst_b:.1e} <= 1e-6; a drift {worst_drift:.1e} <= 1e-6; free |S - I| {free:.1e} "
                         f"<= 1e-8; |det S - 1| {worst_det:.1e}; {dt:.1f} s <= 120 s")


def test_c08_xi_gamma():
    t0 = time.perf_counter()
    cfgs = [SolitonConfig.from_angles([0.3, -0.9], [0.4, -0.2]),
            SolitonConfig.from_angles([0.9, 0.2, -0.7], [0.1, 0.3, -0.4])]
    # (a) Gamma -> 0 at both ends |x| = 40, as stated
    tails = []
    for cfg in cfgs:
        for y in (-5.0, 0.0, 5.0):
            G = bl.gamma_field(cfg, np.array([-40.0, 40.0]), np.array([y, y]))
            tails.append(np.abs(G))
    tails = np.array(tails)
    left, right = float(tails[:, 0].max()), float(tails[:, 1].max())
    tails_ok = left <= 1e-8 and right <= 1e-8
    # (b) xi >= 0 on the scanned lines
    xi_min = min(bl.xi_eval(cfg, x, y) for cfg in cfgs for y in (-10.0, -5.0, 0.0, 5.0, 10.0)
                 for x in np.linspace(-20, 20, 9))
    # (c) vanishing order at far-field singular points
    orders = []
    for cfg in cfgs:
        y0 = 35.0
        x0 = float(bl.line_singularities(cfg, y0, -80.0, 80.0)[0])
        d = np.logspace(-4, -2, 7)
        orders.append(float(np.polyfit(np.log(d), [bl.xi_log(cfg, x0 + v, y0) for v in d], 1)[0]))
    dt = time.perf_counter() - t0
    orders_ok = all(abs(o - 1.0) <= 0.1 for o in orders)
    ok = tails_ok and xi_min >= 0 and orders_ok and dt <= 120
    assert record(8, ok, f"|Gamma| at x = -40: {left:.2e}, at x = +40: {right:.1e} (both <= 1e-8: {tails_ok}); "
                         f"min xi {xi_min:.2e} >= 0; order fits {', '.join(f'{o:.3f}' for o in orders)} in "
                         f"1.0 +- 0.1; {dt:.1f} s <= 120 s")


def test_c09_ends():
    t0 = time.perf_counter()
    corpus = {"kink": SolitonConfig.kink(0.0, 0.3), "saddle": SolitonConfig.saddle(),
              "asymmetric 4-end": SolitonConfig.from_angles(np.radians([20.0, -50.0]), [0.3, -0.2]),
              "generic 6-end": SolitonConfig.from_angles(np.radians([10.0, 50.0, 90.0]), [0.2, -0.1, 0.3])}
    ok, parts = True, []
    for name, cfg in corpus.items():
        ends = geo.trace_nodal(cfg, 40.0)
        ang = max(math.degrees(e.angle_error) for e in ends)
        prof = 0.0
        trend = True
        for e in ends:
            errs = [geo.end_profile_error(cfg, e, s) for s in (25.0, 30.0, 35.0, 45.0)]
            prof = max(prof, errs[1])
            trend &= geo.profile_decreasing([errs[0], errs[2], errs[3]])
        ok &= len(ends) == 2 * cfg.n and ang <= 2.0 and prof <= 5e-2 and trend
        parts.append(f"{name}: {len(ends)} arcs, {ang:.1e} deg, {prof:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt <= 120
    assert record(9, ok, "; ".join(parts) + f"; decreasing in s; {dt:.1f} s <= 120 s")


def test_c10_classification():
    record(10, True, status="N/A", detail="not computable: the claim quantifies over all finite Morse index solutions; "
                     "covered indirectly by criteria 3 and 7")
    pytest.skip("classification over all solutions is not a finite computation")


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except AssertionError:
                failures += 1
            except pytest.skip.Exception:
                pass
    sys.exit(1 if failures else 0)
