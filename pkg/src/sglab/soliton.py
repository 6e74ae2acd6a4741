"""Closed-form multi-soliton solutions of the elliptic sine-Gordon equation.

``U_n = 4 arctan(g / f)`` where ``f`` (``g``) sums ``a(S) exp(sum_{i in S} eta_i)``
over subsets ``S`` of even (odd) size, ``eta_i = p_i x - q_i y - eta0_i`` and
``a(S)`` is the product of pairwise interaction coefficients. ``U_n`` solves
``Delta u = sin u`` with ``0 < U_n < 2 pi``; ``U_n - pi`` solves ``-Delta u = sin u``.

All derivatives are analytic. The exponential sums are evaluated through
``kernels.exp_sum`` with a per-point exponent shift, so nothing overflows for
any finite (x, y).

Indices of solitons are 0-based throughout the Python API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigDegenerate, InvariantError

MAX_SOLITONS = 12
UNIT_TOL = 1e-12
DISTINCT_TOL = 1e-10


@dataclass(frozen=True)
class WaveVector:
    """Unit wave vector ``k = p + i q``."""

    p: float
    q: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.q)):
            raise InvariantError("wave vector components must be finite")
        if abs(self.p * self.p + self.q * self.q - 1.0) > UNIT_TOL:
            raise InvariantError(f"wave vector ({self.p}, {self.q}) is not unit length")

    @classmethod
    def from_angle(cls, theta: float) -> "WaveVector":
        return cls(math.cos(theta), math.sin(theta))

    @property
    def k(self) -> complex:
        return complex(self.p, self.q)


def alpha_elliptic(kj: WaveVector, kl: WaveVector) -> float:
    num = (kj.p - kl.p) ** 2 + (kj.q - kl.q) ** 2
    den = (kj.p + kl.p) ** 2 + (kj.q + kl.q) ** 2
    if den < 1e-20:
        raise ConfigDegenerate("opposite wave vectors: interaction coefficient is singular")
    return num / den


def alpha_hyperbolic(Pj: float, Qj: float, Pk: float, Qk: float) -> float:
    den = (Pj + Pk) ** 2 - (Qj + Qk) ** 2
    if abs(den) < 1e-20:
        raise ConfigDegenerate("hyperbolic interaction coefficient has a vanishing denominator")
    return ((Pj - Pk) ** 2 - (Qj - Qk) ** 2) / den


class _SubsetSums:
    """Subset tables shared by the elliptic and hyperbolic tau functions.

    Row ``s`` of every table describes the subset whose bit mask is ``s``.
    """

    def __init__(self, n, cx_single, cy_single, phases, log_alpha, sign_alpha):
        self.n = n
        masks = np.arange(1 << n)
        self.bits = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
        self.size = self.bits.sum(axis=1).astype(int)
        self.odd = (self.size % 2).astype(bool)
        # log|a(S)| and sign(a(S)) from pairwise tables, diag of log_alpha is zero
        self.log_a = 0.5 * np.einsum("si,ij,sj->s", self.bits, log_alpha, self.bits)
        neg = (sign_alpha < 0).astype(np.float64)
        npairs_neg = 0.5 * np.einsum("si,ij,sj->s", self.bits, neg, self.bits)
        self.sign_a = np.where(np.rint(npairs_neg).astype(int) % 2 == 1, -1.0, 1.0)
        self.cx = self.bits @ np.asarray(cx_single, dtype=float)
        self.cy = self.bits @ np.asarray(cy_single, dtype=float)
        self.b = self.log_a - self.bits @ np.asarray(phases, dtype=float)
        # f collects even subsets (real part of F), g odd ones (imaginary part)
        self.z = np.where(self.odd, 1j, 1.0) * self.sign_a

    def columns(self, spec):
        """Build a weight matrix; each entry of ``spec`` is a tuple of multiplier arrays."""
        cols = []
        for factors in spec:
            c = self.z.copy()
            for fac in factors:
                c = c * fac
            cols.append(c)
        return np.stack(cols, axis=1)

    def evaluate(self, x, y, Z):
        return kernels.exp_sum(x, y, self.b, self.cx, self.cy, Z)


@dataclass(frozen=True)
class SolitonConfig:
    """Parameters ``{k_j = p_j + i q_j, eta0_j}`` of the 2n-end solution ``U_n``."""

    waves: tuple[WaveVector, ...]
    phases: tuple[float, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "waves", tuple(self.waves))
        object.__setattr__(self, "phases", tuple(float(v) for v in self.phases))
        n = len(self.waves)
        if n < 1:
            raise InvariantError("need at least one soliton")
        if n > MAX_SOLITONS:
            raise InvariantError(f"n = {n} exceeds the cap of {MAX_SOLITONS}")
        if len(self.phases) != n:
            raise InvariantError("phases and waves differ in length")
        if not all(math.isfinite(v) for v in self.phases):
            raise InvariantError("phases must be finite")
        for j in range(n):
            for l in range(j + 1, n):
                kj, kl = self.waves[j].k, self.waves[l].k
                if abs(kj - kl) <= DISTINCT_TOL:
                    raise ConfigDegenerate(f"wave vectors {j} and {l} coincide")
                if abs(kj + kl) <= DISTINCT_TOL:
                    raise ConfigDegenerate(f"wave vectors {j} and {l} are opposite")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_angles(cls, thetas: Sequence[float], phases: Sequence[float] | None = None):
        if phases is None:
            phases = [0.0] * len(thetas)
        return cls(tuple(WaveVector.from_angle(t) for t in thetas), tuple(phases))

    @classmethod
    def kink(cls, theta: float = 0.0, phase: float = 0.0):
        return cls.from_angles([theta], [phase])

    @classmethod
    def four_end(cls, p: float, q: float):
        """Two-soliton config reproducing ``phi_{p,q}``; the phase is ln(q/p)."""
        c = math.log(q / p)
        return cls((WaveVector(p, q), WaveVector(p, -q)), (c, c))

    @classmethod
    def saddle(cls):
        s = math.sqrt(0.5)
        return cls.four_end(s, s)

    # -- derived data -----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.waves)

    @property
    def p(self) -> np.ndarray:
        return np.array([w.p for w in self.waves])

    @property
    def q(self) -> np.ndarray:
        return np.array([w.q for w in self.waves])

    @property
    def k(self) -> np.ndarray:
        return self.p + 1j * self.q

    @property
    def eta0(self) -> np.ndarray:
        return np.array(self.phases)

    def alpha_matrix(self) -> np.ndarray:
        n = self.n
        A = np.zeros((n, n))
        for j in range(n):
            for l in range(n):
                if j != l:
                    A[j, l] = alpha_elliptic(self.waves[j], self.waves[l])
        return A

    @property
    def sums(self) -> _SubsetSums:
        if "sums" not in self._cache:
            A = self.alpha_matrix()
            with np.errstate(divide="ignore"):
                logA = np.where(A > 0, np.log(np.where(A > 0, A, 1.0)), 0.0)
            self._cache["sums"] = _SubsetSums(self.n, self.p, -self.q, self.eta0, logA, np.ones_like(A))
        return self._cache["sums"]

    def with_phases(self, phases):
        return SolitonConfig(self.waves, tuple(phases))

    def with_waves(self, waves):
        return SolitonConfig(tuple(waves), self.phases)

    def permuted(self, order):
        return SolitonConfig(tuple(self.waves[i] for i in order), tuple(self.phases[i] for i in order))

    def digest_payload(self) -> dict:
        return {"n": self.n, "waves": [{"p": w.p, "q": w.q} for w in self.waves], "phases": list(self.phases)}


def hirota_coefficient(config: SolitonConfig, subset: Sequence[int]) -> float:
    idx = list(subset)
    if len(set(idx)) != len(idx) or any(i < 0 or i >= config.n for i in idx):
        raise ValueError(f"subset {idx} must hold distinct indices in [0, {config.n})")
    out = 1.0
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            out *= alpha_elliptic(config.waves[idx[a]], config.waves[idx[b]])
    return out


# ---------------------------------------------------------------------------
# tau functions and solution values


@dataclass(frozen=True)
class TauPair:
    """Normalized Hirota sums: ``f = exp(exponent_offset) * f_hat`` and likewise ``g``."""

    f_hat: float
    g_hat: float
    exponent_offset: float

    @property
    def ratio(self) -> float:
        return self.g_hat / self.f_hat


def _as_points(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    return x.shape, x.ravel(), y.ravel()


def _normalize_pow2(values, shift):
    """Rescale rows by a power of two so the largest modulus lies in [1/2, 1).

    Multiplying by 2**e is exact in binary floating point, so ratios between
    entries of a row are bit-for-bit unchanged.
    """
    mags = np.max(np.abs(values), axis=1)
    _, e = np.frexp(mags)
    scaled = np.ldexp(values.real, -e[:, None]) + 1j * np.ldexp(values.imag, -e[:, None])
    return scaled, shift + e * math.log(2.0)


def tau_values(config: SolitonConfig, x, y):
    """Vectorized ``(f_hat, g_hat, offset)`` arrays."""
    shape, xs, ys = _as_points(x, y)
    S = config.sums
    F, shift = S.evaluate(xs, ys, S.columns([()]))
    F, off = _normalize_pow2(F, shift)
    return F[:, 0].real.reshape(shape), F[:, 0].imag.reshape(shape), off.reshape(shape)


def tau_pair(config: SolitonConfig, x: float, y: float) -> TauPair:
    f, g, off = tau_values(config, x, y)
    return TauPair(float(f), float(g), float(off))


def eval_solution(config: SolitonConfig, x, y, shifted: bool = False):
    """``U_n(x, y)`` in (0, 2 pi); with ``shifted`` the solution ``U_n - pi``."""
    f, g, _ = tau_values(config, x, y)
    u = 4.0 * np.arctan2(g, f)
    if shifted:
        u = u - math.pi
    return u if np.ndim(u) else float(u)


@dataclass(frozen=True)
class Jet2:
    """Value and partial derivatives up to order two at one or many points."""

    value: np.ndarray
    d_x: np.ndarray
    d_y: np.ndarray
    d_xx: np.ndarray
    d_xy: np.ndarray
    d_yy: np.ndarray

    @property
    def laplacian(self):
        return self.d_xx + self.d_yy


def _log_jets(F):
    """Columns of F are (F, F_x, F_y, F_xx, F_xy, F_yy); return jets of log F."""
    F0 = F[:, 0]
    Gx = F[:, 1] / F0
    Gy = F[:, 2] / F0
    Gxx = F[:, 3] / F0 - Gx * Gx
    Gxy = F[:, 4] / F0 - Gx * Gy
    Gyy = F[:, 5] / F0 - Gy * Gy
    return F0, Gx, Gy, Gxx, Gxy, Gyy


def _jet_columns(S, extra=None):
    cx, cy = S.cx, S.cy
    base = [(), (cx,), (cy,), (cx, cx), (cx, cy), (cy, cy)]
    if extra is None:
        return S.columns(base)
    return S.columns([tuple(extra) + t for t in base])


def eval_jet(config: SolitonConfig, x, y) -> Jet2:
    shape, xs, ys = _as_points(x, y)
    S = config.sums
    F, _ = S.evaluate(xs, ys, _jet_columns(S))
    F0, Gx, Gy, Gxx, Gxy, Gyy = _log_jets(F)
    u = 4.0 * np.arctan2(F0.imag, F0.real)
    parts = [u, 4 * Gx.imag, 4 * Gy.imag, 4 * Gxx.imag, 4 * Gxy.imag, 4 * Gyy.imag]
    return Jet2(*[np.reshape(v, shape) for v in parts])


def pde_residual(config: SolitonConfig, x, y):
    """``Delta U_n - sin U_n`` from analytic derivatives."""
    J = eval_jet(config, x, y)
    r = J.laplacian - np.sin(J.value)
    return r if np.ndim(r) else float(r)


def heteroclinic(x):
    """One-dimensional profile ``H(x) = 4 arctan(e^x) - pi``, odd and increasing."""
    x = np.asarray(x, dtype=float)
    # 4 arctan(e^x) - pi == 2 * (2 arctan(e^x) - pi/2) == 2 * gd(x)
    h = 4.0 * np.arctan(np.tanh(0.5 * x))
    return h if h.ndim else float(h)


def heteroclinic_derivative(x):
    x = np.asarray(x, dtype=float)
    d = 2.0 / np.cosh(x)
    return d if d.ndim else float(d)


def four_end_closed_form(p: float, q: float, x, y):
    """``phi_{p,q} = 4 arctan(p cosh(q y) / (q cosh(p x))) - pi``."""
    if q == 0:
        raise ConfigDegenerate("four-end family needs q != 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # log-domain ratio: cosh overflows for |arg| > 710
    lr = math.log(p / q) + _logcosh(q * y) - _logcosh(p * x)
    r = 4.0 * np.arctan(np.exp(np.clip(lr, -745.0, 709.0))) - math.pi
    return r if np.ndim(r) else float(r)


def _logcosh(t):
    a = np.abs(t)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


# ---------------------------------------------------------------------------
# bounded kernel


def kernel_jet(config: SolitonConfig, j: int, x, y) -> Jet2:
    """Jet of ``phi_j = d U_n / d eta0_j`` (the n bounded Jacobi fields)."""
    if not 0 <= j < config.n:
        raise IndexError(f"kernel index {j} outside [0, {config.n})")
    shape, xs, ys = _as_points(x, y)
    S = config.sums
    dj = -S.bits[:, j]
    F, _ = S.evaluate(xs, ys, np.concatenate([_jet_columns(S), _jet_columns(S, (dj,))], axis=1))
    F0, Gx, Gy, Gxx, Gxy, Gyy = _log_jets(F[:, :6])
    D = F[:, 6:] / F0[:, None]
    # derivatives of G_d = F_d / F via the quotient rule, using log-derivatives of F
    Gd = D[:, 0]
    Gdx = D[:, 1] - Gd * Gx
    Gdy = D[:, 2] - Gd * Gy
    Gdxx = D[:, 3] - 2 * Gdx * Gx - Gd * (Gxx + Gx * Gx)
    Gdxy = D[:, 4] - Gdx * Gy - Gdy * Gx - Gd * (Gxy + Gx * Gy)
    Gdyy = D[:, 5] - 2 * Gdy * Gy - Gd * (Gyy + Gy * Gy)
    parts = [4 * Gd.imag, 4 * Gdx.imag, 4 * Gdy.imag, 4 * Gdxx.imag, 4 * Gdxy.imag, 4 * Gdyy.imag]
    return Jet2(*[np.reshape(v, shape) for v in parts])


def kernel_element(config: SolitonConfig, j: int, x, y):
    v = kernel_jet(config, j, x, y).value
    return v if np.ndim(v) else float(v)


def kernel_residual(config: SolitonConfig, j: int, x, y):
    """``Delta phi_j - phi_j cos U_n`` pointwise (zero for an exact kernel element)."""
    K = kernel_jet(config, j, x, y)
    u = eval_solution(config, x, y)
    r = K.laplacian - K.value * np.cos(u)
    return r if np.ndim(r) else float(r)


# ---------------------------------------------------------------------------
# hyperbolic n-solitons


@dataclass(frozen=True)
class HyperbolicConfig:
    """Real parameters ``P_j, Q_j`` with ``P_j^2 - Q_j^2 = 1`` and phases ``eta0_j``."""

    P: tuple[float, ...]
    Q: tuple[float, ...]
    phases: tuple[float, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("P", "Q", "phases"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        n = len(self.P)
        if not (len(self.Q) == n == len(self.phases)) or n < 1:
            raise InvariantError("P, Q and phases must be non-empty and equally long")
        if n > MAX_SOLITONS:
            raise InvariantError(f"n = {n} exceeds the cap of {MAX_SOLITONS}")
        for P, Q in zip(self.P, self.Q):
            if abs(P * P - Q * Q - 1.0) > UNIT_TOL:
                raise InvariantError(f"(P, Q) = ({P}, {Q}) violates P^2 - Q^2 = 1")
        for j in range(n):
            for l in range(j + 1, n):
                alpha_hyperbolic(self.P[j], self.Q[j], self.P[l], self.Q[l])

    @classmethod
    def from_rapidities(cls, rapidities, phases, signs=None):
        """``P = s cosh r``, ``Q = s sinh r``; sign ``s = -1`` gives an antikink."""
        if signs is None:
            signs = [1.0] * len(rapidities)
        P = [s * math.cosh(r) for s, r in zip(signs, rapidities)]
        Q = [s * math.sinh(r) for s, r in zip(signs, rapidities)]
        return cls(tuple(P), tuple(Q), tuple(phases))

    @property
    def n(self) -> int:
        return len(self.P)

    @property
    def k(self) -> np.ndarray:
        """Light-cone weights ``k_j = P_j + Q_j`` (so ``1/k_j = P_j - Q_j``)."""
        return np.array(self.P) + np.array(self.Q)

    @property
    def sums(self) -> _SubsetSums:
        if "sums" not in self._cache:
            n = self.n
            A = np.zeros((n, n))
            for j in range(n):
                for l in range(n):
                    if j != l:
                        A[j, l] = alpha_hyperbolic(self.P[j], self.Q[j], self.P[l], self.Q[l])
            absA = np.abs(A)
            with np.errstate(divide="ignore"):
                logA = np.where(absA > 0, np.log(np.where(absA > 0, absA, 1.0)), 0.0)
            if np.any((absA == 0) & ~np.eye(n, dtype=bool)):
                raise ConfigDegenerate("coincident hyperbolic wave numbers")
            # second variable is z; eta_j = P_j x - Q_j z - eta0_j
            self._cache["sums"] = _SubsetSums(n, self.P, [-v for v in self.Q], self.phases, logA, np.sign(A))
        return self._cache["sums"]


def hyperbolic_tau(config: HyperbolicConfig, x: float, z: float) -> tuple[float, float]:
    """Unnormalized ``(f, g)``; meant for moderate arguments only."""
    S = config.sums
    F, shift = S.evaluate(np.array([x]), np.array([z]), S.columns([()]))
    val = F[0, 0] * math.exp(shift[0])
    return float(val.real), float(val.imag)


def hyperbolic_jet(config: HyperbolicConfig, x, z) -> Jet2:
    """Jet in (x, z) of ``4 arctan(g/f)``; ``value`` uses the principal arctan branch."""
    shape, xs, zs = _as_points(x, z)
    S = config.sums
    F, _ = S.evaluate(xs, zs, _jet_columns(S))
    F0, Gx, Gy, Gxx, Gxy, Gyy = _log_jets(F)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = 4.0 * np.arctan(F0.imag / F0.real)
    parts = [u, 4 * Gx.imag, 4 * Gy.imag, 4 * Gxx.imag, 4 * Gxy.imag, 4 * Gyy.imag]
    return Jet2(*[np.reshape(v, shape) for v in parts])


def eval_hyperbolic(config: HyperbolicConfig, x, z):
    v = hyperbolic_jet(config, x, z).value
    return v if np.ndim(v) else float(v)


def hyperbolic_residual(config: HyperbolicConfig, x, z):
    """``phi_xx - phi_zz - sin phi``; uses sin(4 atan2) so the arctan branch is irrelevant."""
    shape, xs, zs = _as_points(x, z)
    S = config.sums
    F, _ = S.evaluate(xs, zs, _jet_columns(S))
    F0, Gx, Gy, Gxx, Gxy, Gyy = _log_jets(F)
    u = 4.0 * np.arctan2(F0.imag, F0.real)
    r = 4 * Gxx.imag - 4 * Gyy.imag - np.sin(u)
    r = r.reshape(shape)
    return r if r.ndim else float(r)
