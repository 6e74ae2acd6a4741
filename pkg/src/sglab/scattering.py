"""Scattering data of the x-part of the Lax pair along horizontal lines.

``Phi_x = A(x) Phi`` with
``A = 1/2 [(i lam/2 + cos u / (2 i lam)) s3 - (i/2)(u_x + i u_y) s2 - (i sin u / (2 lam)) s1]``
tends to ``A_inf = (i/4) k s3``, ``k = lam - 1/lam``, at both ends. Writing
``Phi = E(x) Psi`` with ``E = exp(A_inf x)`` removes the fast free rotation;
``Psi`` solves ``Psi' = E^{-1} (A - A_inf) E Psi`` from ``Psi(-X) = I`` and the
transfer matrix is ``T = Psi(X) = E(X)^{-1} Phi(X)``.

Normalization: ``Phi_-`` is the solution equal to ``E`` at ``-X``, ``Phi_+``
equals ``E`` at ``+X``, so ``Phi_- = Phi_+ T`` and ``Phi_+ = Phi_- S`` with
``S = T^{-1}``; ``a = S_11`` and ``b = S_12``. This orientation gives
``S = I`` for the free potential and ``|b| ~ 0`` for a kink, as required.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from . import soliton as sc
from .errors import StepTooCoarse, TruncationTooShort

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

LAMBDA_MIN, LAMBDA_MAX = 0.05, 20.0
LIMIT_TOL = 1e-10
MAX_STEP_NORM = 0.1


def _fields(config, x, y):
    """``(u, u_x, u_y)`` on the line; ``config=None`` is the free potential u = 0."""
    if config is None:
        z = np.zeros_like(x)
        return z, z, z
    J = sc.eval_jet(config, x, np.full_like(x, y))
    return J.value, J.d_x, J.d_y


def lax_coefficient(config, x, y: float, lam: float) -> np.ndarray:
    """Coefficient matrices ``A(x)`` with shape (len(x), 2, 2)."""
    x = np.asarray(x, dtype=float)
    u, ux, uy = _fields(config, x, y)
    c3 = 0.5 * (0.5j * lam + np.cos(u) / (2j * lam))
    c2 = 0.5 * (-0.5j * (ux + 1j * uy))
    c1 = 0.5 * (-1j * np.sin(u) / (2 * lam))
    return (c3[:, None, None] * SIGMA3 + c2[:, None, None] * SIGMA2 + c1[:, None, None] * SIGMA1)


def _check_lambda(lam):
    if lam == 0 or not (LAMBDA_MIN <= abs(lam) <= LAMBDA_MAX):
        raise ValueError(f"|lambda| = {abs(lam)} outside [{LAMBDA_MIN}, {LAMBDA_MAX}]")


def integrate_lax(config, y: float, lam: float, X: float = 40.0, step: float = 0.005, use_numba=None):
    """Transfer matrix ``T = E(X)^{-1} Phi(X)`` with ``Phi(-X) = E(-X)``, by RK4."""
    _check_lambda(lam)
    nsteps = int(round(2 * X / step))
    if abs(nsteps * step - 2 * X) > 1e-9 * X:
        raise ValueError("2X must be a multiple of the step")
    xs = np.linspace(-X, X, 2 * nsteps + 1)  # whole and half steps
    A = lax_coefficient(config, xs, y, lam)
    k = lam - 1.0 / lam
    Ainf = 0.25j * k * SIGMA3
    for end in (0, -1):
        if np.max(np.abs(A[end] - Ainf)) > LIMIT_TOL:
            raise TruncationTooShort(
                f"coefficient at x = {xs[end]:+g} differs from its limit by {np.max(np.abs(A[end] - Ainf)):.1e}")
    norm = np.max(np.linalg.norm(A, ord=2, axis=(1, 2)))
    if step * norm > MAX_STEP_NORM:
        raise StepTooCoarse(f"step * max|A| = {step * norm:.3g} exceeds {MAX_STEP_NORM}")
    # interaction picture: E^{-1} B E multiplies the (1,2) entry by e^{-i k x / 2}, (2,1) by e^{+i k x / 2}
    B = A - Ainf
    ph = np.exp(-0.5j * k * xs)
    W = B.copy()
    W[:, 0, 1] *= ph
    W[:, 1, 0] *= np.conj(ph)
    return kernels.lax_rk4(W, step, use_numba=use_numba)


@dataclass(frozen=True)
class ScatteringSample:
    lam: float
    y: float
    a: complex
    b: complex
    k: float
    X: float
    step: float
    det_error: float

    def as_row(self) -> dict:
        return {"lambda": self.lam, "y": self.y, "a_re": self.a.real, "a_im": self.a.imag,
                "b_re": self.b.real, "b_im": self.b.imag, "abs_b": abs(self.b), "X": self.X,
                "step": self.step, "det_error": self.det_error}


def scattering_coeffs(config, y: float, lam: float, X: float = 40.0, step: float = 0.005) -> ScatteringSample:
    T = integrate_lax(config, y, lam, X, step)
    S = np.linalg.inv(T)
    det_err = abs(np.linalg.det(S) - 1.0)
    return ScatteringSample(float(lam), float(y), complex(S[0, 0]), complex(S[0, 1]), lam - 1.0 / lam,
                            float(X), float(step), float(det_err))


def evolution_check(config, lam: float, y1: float, y2: float, X: float = 40.0, step: float = 0.005):
    """``(|a(lam, y1) - a(lam, y2)|, |b(lam, y1)| + |b(lam, y2)|)``."""
    if y1 == y2:
        raise ValueError("need two distinct y values")
    s1 = scattering_coeffs(config, y1, lam, X, step)
    s2 = scattering_coeffs(config, y2, lam, X, step)
    return abs(s1.a - s2.a), abs(s1.b) + abs(s2.b)


def convergence_ratio(config, y: float, lam: float, X: float = 40.0, step: float = 0.04) -> float:
    """``|T(h) - T(h/2)| / |T(h/2) - T(h/4)|``; about 16 for a fourth-order scheme."""
    T1 = integrate_lax(config, y, lam, X, step)
    T2 = integrate_lax(config, y, lam, X, step / 2)
    T3 = integrate_lax(config, y, lam, X, step / 4)
    return float(np.max(np.abs(T1 - T2)) / np.max(np.abs(T2 - T3)))
