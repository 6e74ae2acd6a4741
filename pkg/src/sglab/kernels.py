"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Two kernels dominate runtime:

* ``exp_sum``: weighted sums of exponentials that are linear in (x, y), the
  workhorse behind every tau-function evaluation;
* ``lax_rk4``: fixed-step RK4 transport of a 2x2 system along x.

Set ``SGLAB_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``) to force
the numpy path. Both paths compute the same quantity in the same order of
magnitude; tests compare them to ~1e-13.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SGLAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old on some hosts; workqueue is always available
        numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    HAVE_NUMBA = False

# numpy path: points per chunk are capped so the (points x terms) block stays small
_CHUNK_ENTRIES = 1 << 21


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def set_threads(count: int | None) -> None:
    """Cap the worker count of parallel numba kernels (no-op on the numpy path)."""
    if count is None or not HAVE_NUMBA:
        return
    count = max(1, min(int(count), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(count)


# ---------------------------------------------------------------------------
# exp_sum


def exp_sum_numpy(x, y, b, cx, cy, Z):
    m = x.shape[0]
    T, K = Z.shape
    out = np.empty((m, K), dtype=np.complex128)
    shift = np.empty(m)
    step = max(1, _CHUNK_ENTRIES // max(T, 1))
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        E = b[None, :] + x[lo:hi, None] * cx[None, :] + y[lo:hi, None] * cy[None, :]
        mx = E.max(axis=1)
        W = np.exp(E - mx[:, None])
        out[lo:hi] = W @ Z
        shift[lo:hi] = mx
    return out, shift


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def exp_sum_numba(x, y, b, cx, cy, Z):
        m = x.shape[0]
        T = b.shape[0]
        K = Z.shape[1]
        out = np.zeros((m, K), dtype=np.complex128)
        shift = np.empty(m)
        for i in prange(m):
            e = np.empty(T)
            mx = -np.inf
            xi = x[i]
            yi = y[i]
            for t in range(T):
                v = b[t] + cx[t] * xi + cy[t] * yi
                e[t] = v
                if v > mx:
                    mx = v
            shift[i] = mx
            for t in range(T):
                w = np.exp(e[t] - mx)
                for c in range(K):
                    out[i, c] += w * Z[t, c]
        return out, shift

else:
    exp_sum_numba = None


def exp_sum(x, y, b, cx, cy, Z, use_numba: bool | None = None):
    """Evaluate ``sum_t exp(b_t + cx_t x + cy_t y) Z[t, :]`` at every point.

    Returns ``(S, shift)`` with the true sum equal to ``exp(shift) * S``; the
    shift is the largest exponent at that point, so no term overflows.
    """
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64)
    cx = np.ascontiguousarray(cx, dtype=np.float64)
    cy = np.ascontiguousarray(cy, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.complex128)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return exp_sum_numba(x, y, b, cx, cy, Z)
    return exp_sum_numpy(x, y, b, cx, cy, Z)


# ---------------------------------------------------------------------------
# lax_rk4


def lax_rk4_numpy(W, h):
    """RK4 for ``T' = W(x) T`` with ``W`` sampled at half steps; T(start) = I."""
    nsteps = (W.shape[0] - 1) // 2
    T = np.eye(2, dtype=np.complex128)
    half = 0.5 * h
    for i in range(nsteps):
        A0 = W[2 * i]
        A1 = W[2 * i + 1]
        A2 = W[2 * i + 2]
        k1 = A0 @ T
        k2 = A1 @ (T + half * k1)
        k3 = A1 @ (T + half * k2)
        k4 = A2 @ (T + h * k3)
        T = T + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return T


if HAVE_NUMBA:

    @njit(cache=True)
    def _mm(A, B):
        C = np.empty((2, 2), dtype=np.complex128)
        C[0, 0] = A[0, 0] * B[0, 0] + A[0, 1] * B[1, 0]
        C[0, 1] = A[0, 0] * B[0, 1] + A[0, 1] * B[1, 1]
        C[1, 0] = A[1, 0] * B[0, 0] + A[1, 1] * B[1, 0]
        C[1, 1] = A[1, 0] * B[0, 1] + A[1, 1] * B[1, 1]
        return C

    @njit(cache=True)
    def lax_rk4_numba(W, h):
        nsteps = (W.shape[0] - 1) // 2
        T = np.eye(2, dtype=np.complex128)
        half = 0.5 * h
        for i in range(nsteps):
            k1 = _mm(W[2 * i], T)
            k2 = _mm(W[2 * i + 1], T + half * k1)
            k3 = _mm(W[2 * i + 1], T + half * k2)
            k4 = _mm(W[2 * i + 2], T + h * k3)
            T = T + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return T

else:
    lax_rk4_numba = None


def lax_rk4(W, h, use_numba: bool | None = None):
    W = np.ascontiguousarray(W, dtype=np.complex128)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return lax_rk4_numba(W, float(h))
    return lax_rk4_numpy(W, float(h))
