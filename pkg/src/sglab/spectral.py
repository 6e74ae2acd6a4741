"""Negative-eigenvalue counts of ``A = -Delta + cos U_n`` on a Dirichlet box.

The count below ``-delta`` comes from Sylvester's law of inertia applied to a
symmetric (diagonal-pivoting) LU factorization of ``A + delta I``, and is
cross-checked by LOBPCG with an algebraic-multigrid preconditioner. Small
eigenvalues are extracted by shift-invert Lanczos reusing SuperLU.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import soliton as sc
from .errors import FactorizationBreakdown, InvariantError
from .soliton import SolitonConfig

UNSTABLE = "Unstable"
DEFAULT_DELTA = 0.02


@dataclass(frozen=True)
class GridSpec:
    """Square ``[-R, R]^2`` with spacing ``h`` and Dirichlet boundary."""

    R: float
    h: float
    boundary: str = "dirichlet"

    def __post_init__(self):
        ratio = self.R / self.h
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvariantError(f"R/h = {ratio} is not an integer")
        if self.h > 0.3 + 1e-12:
            raise InvariantError(f"h = {self.h} exceeds 0.3")
        if self.R < 20:
            raise InvariantError(f"R = {self.R} is below 20")
        if self.boundary != "dirichlet":
            raise InvariantError("only Dirichlet boundaries are supported")

    @property
    def nodes_per_axis(self) -> int:
        return int(round(2 * self.R / self.h)) - 1

    @property
    def size(self) -> int:
        return self.nodes_per_axis ** 2

    def axis(self) -> np.ndarray:
        N = self.nodes_per_axis
        return -self.R + self.h * np.arange(1, N + 1)

    def mesh(self):
        a = self.axis()
        # row-major with x fastest: node index = iy * N + ix
        X, Y = np.meshgrid(a, a)
        return X, Y


DEFAULT_SCHEDULE = (GridSpec(30.0, 0.25), GridSpec(40.0, 0.125))


def laplacian_1d(N: int, h: float) -> sp.csr_matrix:
    main = np.full(N, 2.0 / h ** 2)
    off = np.full(N - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def assemble_operator(config: SolitonConfig, grid: GridSpec, potential=None) -> sp.csr_matrix:
    """Five-point ``-Delta_h`` plus ``diag(cos U_n)`` at the interior nodes."""
    N = grid.nodes_per_axis
    T = laplacian_1d(N, grid.h)
    I = sp.identity(N, format="csr")
    if potential is None:
        X, Y = grid.mesh()
        potential = np.cos(sc.eval_solution(config, X, Y)).ravel()
    A = sp.kron(I, T, format="csr") + sp.kron(T, I, format="csr") + sp.diags(potential, 0, format="csr")
    A.sort_indices()
    return A


# ---------------------------------------------------------------------------
# inertia


def _symmetric_lu(A, shift):
    M = (A + shift * sp.identity(A.shape[0], format="csc")).tocsc()
    try:
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:  # exactly singular pivot
        raise FactorizationBreakdown(f"factorization of A + {shift} I failed: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationBreakdown("factorization pivoted off the diagonal; inertia unavailable")
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)) or np.min(np.abs(d)) == 0.0:
        raise FactorizationBreakdown("zero or non-finite pivot")
    return lu, d


def count_negative(A, delta: float) -> int:
    """Eigenvalues of symmetric ``A`` strictly below ``-delta`` (Sylvester inertia)."""
    A = sp.csc_matrix(A)
    _, d = _symmetric_lu(A, delta)
    return int(np.count_nonzero(d < 0))


def count_negative_retry(A, delta: float, attempts: int = 3):
    """``count_negative`` with small perturbations of delta on breakdown; returns (count, delta used)."""
    last = None
    for i in range(attempts):
        dl = delta * (1.0 + 1e-6 * i)
        try:
            return count_negative(A, dl), dl
        except FactorizationBreakdown as exc:
            last = exc
    raise last


def lobpcg_lowest(A, m: int, shift: float = 1.2, tol: float = 1e-6, maxiter: int = 400, seed: int = 0):
    """``m`` lowest eigenvalues by LOBPCG with a smoothed-aggregation AMG preconditioner."""
    import pyamg

    n = A.shape[0]
    B = (A + shift * sp.identity(n, format="csr")).tocsr()
    ml = pyamg.smoothed_aggregation_solver(B, max_coarse=500)
    Mpre = ml.aspreconditioner(cycle="V")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    with warnings.catch_warnings():
        # lobpcg warns when the final Rayleigh-Ritz pass misses tol slightly; counts only need the sign
        warnings.simplefilter("ignore", UserWarning)
        vals, _ = spla.lobpcg(B, X, M=Mpre, tol=tol, maxiter=maxiter, largest=False)
    return np.sort(vals) - shift


def count_negative_lobpcg(A, delta: float, start: int = 8, max_block: int = 64):
    """Independent count of eigenvalues below ``-delta``; grows the block until it brackets."""
    m = start
    while True:
        vals = lobpcg_lowest(A, m)
        below = int(np.count_nonzero(vals < -delta))
        if below < m or m >= max_block:
            return below, vals
        m *= 2


def smallest_eigenvalues(A, k: int = 20, floor: float = 1.2):
    """Lowest ``k`` eigenvalues via shift-invert Lanczos below the spectrum."""
    n = A.shape[0]
    k = min(k, n - 2)
    lu, _ = _symmetric_lu(sp.csc_matrix(A), floor)
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    vals = spla.eigsh(A, k=k, sigma=-floor, which="LM", OPinv=op, return_eigenvectors=False, tol=1e-12)
    return np.sort(vals)


# ---------------------------------------------------------------------------
# kernel diagnostics


def _interior_mask(grid: GridSpec, margin: float = 5.0) -> np.ndarray:
    X, Y = grid.mesh()
    return ((np.abs(X) <= grid.R - margin) & (np.abs(Y) <= grid.R - margin)).ravel()


def kernel_residual_norm(config: SolitonConfig, grid: GridSpec, j: int, A=None, probe=None) -> float:
    """``max |(-Delta_h + cos U_n) phi_j|`` over nodes at least 5 from the boundary.

    ``probe`` replaces ``phi_j`` by an arbitrary sampled field (non-vacuousness checks).
    """
    if A is None:
        A = assemble_operator(config, grid)
    if probe is None:
        X, Y = grid.mesh()
        probe = sc.kernel_element(config, j, X, Y).ravel()
    r = A @ probe
    return float(np.max(np.abs(r[_interior_mask(grid)])))


def kernel_gram_min_eig(config: SolitonConfig, grid: GridSpec) -> float:
    """Smallest eigenvalue of the Gram matrix of the unit-normalized sampled kernel basis."""
    X, Y = grid.mesh()
    V = np.stack([sc.kernel_element(config, j, X, Y).ravel() for j in range(config.n)], axis=1)
    V = V / np.linalg.norm(V, axis=0)
    return float(np.linalg.eigvalsh(V.T @ V)[0])


def kernel_window(grid: GridSpec, delta: float) -> tuple[float, float]:
    """Eigenvalue window expected to hold exactly the n discrete kernel modes.

    Kernel modes are bounded but do not decay along the ends, so Dirichlet
    truncation lifts them by about (pi / 2R)^2 (minus a second-order
    discretization shift). The upper edge 0.01 h^2 + 1.1 (pi / 2R)^2 was set
    from the default schedule, where the next mode sits above 1.7 (pi / 2R)^2.
    """
    return -0.5 * delta, 0.01 * grid.h ** 2 + 1.1 * (math.pi / (2 * grid.R)) ** 2


# ---------------------------------------------------------------------------
# reports


@dataclass
class GridResult:
    grid: GridSpec
    count_delta: int
    count_half_delta: int
    count_lobpcg: int
    delta_used: float
    smallest: list
    kernel_residual_norms: list
    kernel_cluster: int
    gap: float
    borderline: bool
    seconds: float


@dataclass
class SpectralReport:
    grid: GridSpec
    delta: float
    count_below_minus_delta: int
    count_below_minus_half_delta: int
    morse_index: object
    smallest_eigenvalues: list
    kernel_residual_norms: list
    per_grid: list = field(default_factory=list)
    reasons: list = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.morse_index != UNSTABLE

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def analyze_grid(config: SolitonConfig, grid: GridSpec, delta: float = DEFAULT_DELTA, k: int = 20,
                 independent: bool = True) -> GridResult:
    t0 = time.perf_counter()
    A = assemble_operator(config, grid)
    c1, dl = count_negative_retry(A, delta)
    c2, _ = count_negative_retry(A, 0.5 * delta)
    evals = smallest_eigenvalues(A, k)
    if independent:
        c3, _ = count_negative_lobpcg(A, dl, start=max(8, c1 + config.n + 4))
    else:
        c3 = c1
    norms = [kernel_residual_norm(config, grid, j, A=A) for j in range(config.n)]
    lo, hi = kernel_window(grid, delta)
    cluster = int(np.count_nonzero((evals > lo) & (evals < hi)))
    neg = evals[evals < -delta]
    nonneg = evals[evals > lo]
    gap = float(nonneg.min() - neg.max()) if neg.size and nonneg.size else float("inf")
    borderline = bool(np.any((evals >= -delta) & (evals <= -0.5 * delta)))
    return GridResult(grid, c1, c2, c3, dl, [float(v) for v in evals], norms, cluster, gap, borderline,
                      time.perf_counter() - t0)


def morse_index(config: SolitonConfig, schedule=DEFAULT_SCHEDULE, delta: float = DEFAULT_DELTA,
                independent: bool = True) -> SpectralReport:
    """Count negative eigenvalues on each grid; the index is reported only when all counts agree."""
    schedule = list(schedule)
    if len(schedule) < 2:
        raise ValueError("the schedule needs at least two grids")
    for a, b in zip(schedule[:-1], schedule[1:]):
        if not (b.h < a.h and b.R > a.R):
            raise ValueError("grids must refine: decreasing h and increasing R")
    results = [analyze_grid(config, g, delta, independent=independent) for g in schedule]
    reasons = []
    for r in results:
        if r.count_delta != r.count_half_delta:
            reasons.append(f"R={r.grid.R}, h={r.grid.h}: counts differ at delta and delta/2")
        if r.count_delta != r.count_lobpcg:
            reasons.append(f"R={r.grid.R}, h={r.grid.h}: inertia {r.count_delta} vs LOBPCG {r.count_lobpcg}")
        if r.borderline:
            reasons.append(f"R={r.grid.R}, h={r.grid.h}: eigenvalue inside [-delta, -delta/2]")
    if results[-1].count_delta != results[-2].count_delta:
        reasons.append("counts differ across the two finest grids")
    fin = results[-1]
    return SpectralReport(
        grid=fin.grid,
        delta=delta,
        count_below_minus_delta=fin.count_delta,
        count_below_minus_half_delta=fin.count_half_delta,
        morse_index=UNSTABLE if reasons else fin.count_delta,
        smallest_eigenvalues=fin.smallest,
        kernel_residual_norms=fin.kernel_residual_norms,
        per_grid=results,
        reasons=reasons,
    )
