import math

import numpy as np
import pytest
import scipy.sparse as sp

from sglab import soliton as sc
from sglab import spectral as spc
from sglab.errors import InvariantError
from sglab.soliton import SolitonConfig

CHEAP = (spc.GridSpec(20.0, 0.25), spc.GridSpec(25.0, 0.2))


def small_operator(N=30, h=0.3, seed=0):
    T = spc.laplacian_1d(N, h)
    I = sp.identity(N)
    V = np.random.default_rng(seed).uniform(-14.0, 3.0, N * N)
    return (sp.kron(I, T) + sp.kron(T, I) + sp.diags(V)).tocsr()


def test_gridspec_invariants():
    g = spc.GridSpec(30.0, 0.25)
    assert g.nodes_per_axis == 239
    assert g.axis()[0] == pytest.approx(-29.75) and g.axis()[-1] == pytest.approx(29.75)
    for bad in [(30.0, 0.35), (10.0, 0.25), (30.0, 0.7 / 3)]:
        with pytest.raises(InvariantError):
            spc.GridSpec(*bad)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_inertia_matches_dense(seed):
    A = small_operator(seed=seed)
    ev = np.linalg.eigvalsh(A.toarray())
    for delta in (0.02, 0.5, 3.0):
        assert spc.count_negative(A, delta) == int(np.sum(ev < -delta))


def test_inertia_on_diagonal():
    d = np.array([-3.0, -0.01, 0.5, -1.0, 2.0, -0.3])
    A = sp.diags(d).tocsr()
    assert spc.count_negative(A, 0.02) == 3
    assert spc.count_negative(A, 0.005) == 4


def test_smallest_eigenvalues_match_dense():
    A = small_operator(seed=3)
    ev = np.linalg.eigvalsh(A.toarray())
    # shift-invert below the spectrum; the floor must sit under the lowest eigenvalue
    floor = -ev[0] + 1.0
    got = spc.smallest_eigenvalues(A, k=10, floor=floor)
    assert np.max(np.abs(got - ev[:10])) <= 1e-9


def test_lobpcg_matches_dense():
    A = small_operator(seed=4)
    ev = np.linalg.eigvalsh(A.toarray())
    got = spc.lobpcg_lowest(A, 8, shift=-ev[0] + 1.0, tol=1e-8)
    assert np.max(np.abs(got - ev[:8])) <= 1e-5


def test_one_dimensional_kink_operator():
    # -d^2 + cos(4 atan e^x) = -d^2 + 1 - 2 sech^2 x has a zero mode and continuum from 1
    R, h = 30.0, 0.05
    N = int(round(2 * R / h)) - 1
    x = -R + h * np.arange(1, N + 1)
    A = spc.laplacian_1d(N, h) + sp.diags(np.cos(sc.heteroclinic(x) + math.pi))
    ev = np.linalg.eigvalsh(A.toarray())
    assert abs(ev[0]) <= 0.05 * h * h
    assert ev[1] >= 1.0
    assert spc.count_negative(A, 0.02) == 0


def test_poschl_teller_count():
    # -d^2 - 6 sech^2 x + 1/2 has eigenvalues -4 + 1/2 and -1 + 1/2 below the continuum
    R, h = 20.0, 0.05
    N = int(round(2 * R / h)) - 1
    x = -R + h * np.arange(1, N + 1)
    A = (spc.laplacian_1d(N, h) + sp.diags(0.5 - 6.0 / np.cosh(x) ** 2)).tocsr()
    assert spc.count_negative(A, 0.02) == 2
    ev = spc.smallest_eigenvalues(A, k=3, floor=5.0)
    assert ev[0] == pytest.approx(-3.5, abs=1e-2)
    assert ev[1] == pytest.approx(-0.5, abs=1e-2)


def test_kernel_residual_second_order():
    cfg = SolitonConfig.saddle()
    coarse, fine = spc.GridSpec(30.0, 0.25), spc.GridSpec(30.0, 0.125)
    for j in range(2):
        a = spc.kernel_residual_norm(cfg, coarse, j)
        b = spc.kernel_residual_norm(cfg, fine, j)
        assert math.log2(a / b) == pytest.approx(2.0, abs=0.2)


def test_kernel_probe_is_not_vacuous():
    cfg = SolitonConfig.saddle()
    g = spc.GridSpec(30.0, 0.25)
    X, Y = g.mesh()
    probe = (1.0 / np.cosh(X) / np.cosh(Y)).ravel()
    assert spc.kernel_residual_norm(cfg, g, 0, probe=probe) > 0.1
    assert spc.kernel_gram_min_eig(cfg, g) > 1e-2


def test_morse_kink_and_saddle():
    r1 = spc.morse_index(SolitonConfig.kink(0.3), CHEAP)
    assert r1.morse_index == 0 and r1.stable
    r2 = spc.morse_index(SolitonConfig.saddle(), CHEAP)
    assert r2.morse_index == 1 and not r2.reasons
    assert r2.smallest_eigenvalues[0] == pytest.approx(-0.399, abs=0.01)
    assert all(g.kernel_cluster == 2 for g in r2.per_grid)


def test_morse_unstable_when_delta_straddles():
    rep = spc.morse_index(SolitonConfig.saddle(), CHEAP, delta=0.6)
    assert rep.morse_index == spc.UNSTABLE
    assert rep.reasons


def test_schedule_must_refine():
    with pytest.raises(ValueError):
        spc.morse_index(SolitonConfig.kink(), (spc.GridSpec(25.0, 0.2), spc.GridSpec(20.0, 0.25)))
