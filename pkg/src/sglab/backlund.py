"""Complex gauge sums, bilinear identities and the elliptic Backlund pair.

The gauge form rewrites the tau functions as sums over sign vectors
``eps in {+1, -1}^m``::

    sum exp(sum_j eps_j/2 (eta~_j + i pi/2) + c i pi/4) prod_{a<b} (k_a - eps_a eps_b k_b)

with ``eta~_j = eta_j - xi_j``. Four families are used: ``f~, g~`` (m = n,
sign products (-1)^n and (-1)^(n+1), c = n and n - 2) and ``gamma, tau``
(m = n - 1, sign products (-1)^(n-1) and (-1)^n, c = n - 1 and n - 3).
Then ``g~/f~ = g/f`` and, for elliptic parameters, ``tau/gamma`` is purely
imaginary; ``v = 4 arctan(tau/gamma)`` is the Backlund partner of ``U_n``.

Orientation notes (all checked numerically in the test-suite):

* with ``eta_j = p_j x - q_j y - eta0_j`` the elliptic pair satisfies
  ``u_x = -i v_y + k sin((u+v)/2) + conj(k) sin((u-v)/2)`` and
  ``i u_y = -v_x - k sin((u+v)/2) + conj(k) sin((u-v)/2)`` with ``k = k_n``;
* the hyperbolic bilinear pair uses ``F = gamma - i tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.sparse import coo_matrix

from . import soliton as sc
from .errors import ConfigDegenerate, InvariantError, NearSingular, QuadratureFailure
from .soliton import HyperbolicConfig, SolitonConfig

NEAR_S = 0.1
LIFT_CLEARANCE = 0.5


def xi_weights(k) -> np.ndarray:
    """``e^{xi_j} = prod_{l<j} (k_l+k_j)/(k_l-k_j) * prod_{l>j} (k_j+k_l)/(k_j-k_l)``."""
    k = np.asarray(k, dtype=complex)
    n = k.size
    out = np.ones(n, dtype=complex)
    for j in range(n):
        for l in range(n):
            if l == j:
                continue
            num, den = (k[l] + k[j], k[l] - k[j]) if l < j else (k[j] + k[l], k[j] - k[l])
            if abs(den) < sc.DISTINCT_TOL or abs(num) < sc.DISTINCT_TOL:
                raise ConfigDegenerate(f"wave numbers {j} and {l} coincide or are opposite")
            out[j] *= num / den
    return out


class _GaugeTable:
    """Two complementary sign-vector families sharing one exponent table.

    Family 0 collects sign vectors with product ``parity``, family 1 the rest.
    """

    def __init__(self, k, cx_single, cy_single, offsets, m, parity, phase_mult):
        k = np.asarray(k, dtype=complex)[:m]
        cx_single = np.asarray(cx_single, dtype=float)[:m]
        cy_single = np.asarray(cy_single, dtype=float)[:m]
        offsets = np.asarray(offsets, dtype=complex)[:m]
        masks = np.arange(1 << m)
        bits = (masks[:, None] >> np.arange(m)[None, :]) & 1
        eps = 1.0 - 2.0 * bits  # bit set means eps = -1
        prod = np.prod(eps, axis=1) if m else np.ones(1)
        self.family = np.where(prod == parity, 0, 1)
        coef = np.ones(eps.shape[0], dtype=complex)
        for a in range(m):
            for b in range(a + 1, m):
                coef = coef * (k[a] - eps[:, a] * eps[:, b] * k[b])
        if np.any(coef == 0):
            raise ConfigDegenerate("vanishing gauge coefficient")
        phase = np.array(phase_mult, dtype=float)[self.family] * math.pi / 4
        half = 0.5 * eps
        self.b = half @ offsets.real + np.log(np.abs(coef))
        self.cx = half @ cx_single
        self.cy = half @ cy_single
        ang = phase + half @ (offsets.imag + 0.5 * math.pi)
        self.z = np.exp(1j * ang) * coef / np.abs(coef)

    def columns(self, multipliers=((),)):
        cols = []
        for fam in (0, 1):
            base = np.where(self.family == fam, self.z, 0.0)
            for factors in multipliers:
                c = base.copy()
                for fac in factors:
                    c = c * fac
                cols.append(c)
        return np.stack(cols, axis=1)

    def jets(self, x, y):
        """Normalized jets: array (points, 2, 6) ordered (v, x, y, xx, xy, yy)."""
        cx, cy = self.cx, self.cy
        mult = [(), (cx,), (cy,), (cx, cx), (cx, cy), (cy, cy)]
        S, shift = sc.kernels.exp_sum(x, y, self.b, self.cx, self.cy, self.columns(mult))
        S, off = sc._normalize_pow2(S, shift)
        return S.reshape(-1, 2, 6), off


def _elliptic_tables(config: SolitonConfig):
    if "gauge" not in config._cache:
        n = config.n
        xi = np.log(xi_weights(config.k))
        off = -config.eta0 - xi
        fg = _GaugeTable(config.k, config.p, -config.q, off, n, (-1) ** n, (n, n - 2))
        gt = _GaugeTable(config.k, config.p, -config.q, off, n - 1, (-1) ** (n - 1), (n - 1, n - 3))
        config._cache["gauge"] = (fg, gt)
    return config._cache["gauge"]


def hyperbolic_gauge_phases(config: HyperbolicConfig) -> np.ndarray:
    """Real gauge phases ``eta~_{j,0}`` (so ``eta~_j = P_j x - Q_j z + eta~_{j,0}``).

    They are real exactly when every ``e^{xi_j}`` is positive, e.g. when the
    light-cone weights ``k_j`` are listed in decreasing order.
    """
    w = xi_weights(config.k)
    if np.any(np.abs(w.imag) > 1e-12 * np.abs(w)) or np.any(w.real <= 0):
        raise InvariantError("gauge phases are not real: some e^{xi_j} is negative (reorder the solitons)")
    return -np.asarray(config.phases) - np.log(w.real)


def _hyperbolic_tables(config: HyperbolicConfig, backlund_k=None):
    n = config.n
    off = hyperbolic_gauge_phases(config)
    P, Q = np.array(config.P), np.array(config.Q)
    k = config.k
    fg = _GaugeTable(k, P, -Q, off, n, (-1) ** n, (n, n - 2))
    gt = _GaugeTable(k, P, -Q, off, n - 1, (-1) ** (n - 1), (n - 1, n - 3))
    return fg, gt


@dataclass(frozen=True)
class GaugeQuad:
    """Normalized gauge sums at a point.

    ``(f_tilde, g_tilde)`` share the scale ``exp(offset_fg)``, ``(gamma, tau)``
    share ``exp(offset_gt)``; all ratios used downstream are scale free.
    """

    f_tilde: complex
    g_tilde: complex
    gamma: complex
    tau: complex
    offset_fg: float
    offset_gt: float
    near_singular: bool
    singular_distance: float

    @property
    def exponent_offset(self) -> complex:
        return complex(self.offset_fg, self.offset_gt)


def _gauge_arrays(config: SolitonConfig, x, y):
    shape, xs, ys = sc._as_points(x, y)
    fg, gt = _elliptic_tables(config)
    A, off1 = fg.jets(xs, ys)
    B, off2 = gt.jets(xs, ys)
    return shape, A, B, off1, off2


def _singular_distance(B):
    """First-order distance to ``|tau/gamma| = 1`` from jets of gamma and tau."""
    g, t = B[:, 0, :], B[:, 1, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = t[:, 0] / g[:, 0]
        rx = (t[:, 1] * g[:, 0] - t[:, 0] * g[:, 1]) / g[:, 0] ** 2
        ry = (t[:, 2] * g[:, 0] - t[:, 0] * g[:, 2]) / g[:, 0] ** 2
        rho = r.imag
        h = rho * rho - 1.0
        grad = 2.0 * np.abs(rho) * np.hypot(rx.imag, ry.imag)
        d = np.abs(h) / grad
    d = np.where(np.isfinite(d), d, np.inf)
    return d


def gauge_quad(config: SolitonConfig, x: float, y: float) -> GaugeQuad:
    _, A, B, o1, o2 = _gauge_arrays(config, x, y)
    d = float(_singular_distance(B)[0])
    return GaugeQuad(complex(A[0, 0, 0]), complex(A[0, 1, 0]), complex(B[0, 0, 0]), complex(B[0, 1, 0]),
                     float(o1[0]), float(o2[0]), d < NEAR_S, d)


def gauge_ratios(config: SolitonConfig, x, y):
    """Vectorized ``(g~/f~, tau/gamma, distance-to-S estimate)``."""
    shape, A, B, _, _ = _gauge_arrays(config, x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = A[:, 1, 0] / A[:, 0, 0]
        r2 = B[:, 1, 0] / B[:, 0, 0]
    return r1.reshape(shape), r2.reshape(shape), _singular_distance(B).reshape(shape)


# ---------------------------------------------------------------------------
# Hirota D-operators on light-cone jets


@dataclass(frozen=True)
class LightConeJet:
    value: complex
    d_s: complex
    d_t: complex
    d_st: complex

    def conj(self) -> "LightConeJet":
        return LightConeJet(np.conj(self.value), np.conj(self.d_s), np.conj(self.d_t), np.conj(self.d_st))

    def __add__(self, other):
        return LightConeJet(self.value + other.value, self.d_s + other.d_s, self.d_t + other.d_t, self.d_st + other.d_st)

    def scale(self, c):
        return LightConeJet(c * self.value, c * self.d_s, c * self.d_t, c * self.d_st)


def cone_from_xz(J) -> LightConeJet:
    """Hyperbolic variables: ``x = s + t``, ``z = s - t``."""
    v, dx, dz, dxx, dxz, dzz = J
    return LightConeJet(v, dx + dz, dx - dz, dxx - dzz)


def cone_from_xy(J) -> LightConeJet:
    """Elliptic variables via ``z = i y``: ``d_s = d_x - i d_y``, ``d_t = d_x + i d_y``."""
    v, dx, dy, dxx, dxy, dyy = J
    return LightConeJet(v, dx - 1j * dy, dx + 1j * dy, dxx + dyy)


def exp_cone(a: complex, b: complex, s: float, t: float) -> LightConeJet:
    """Jet of ``exp(a s + b t)``."""
    e = np.exp(a * s + b * t)
    return LightConeJet(e, a * e, b * e, a * b * e)


def hirota_D(F: LightConeJet, G: LightConeJet, order=(1, 0)):
    """``D_s^a D_t^b F.G`` for ``a, b`` in {0, 1}."""
    a, b = order
    if (a, b) == (0, 0):
        return F.value * G.value
    if (a, b) == (1, 0):
        return F.d_s * G.value - F.value * G.d_s
    if (a, b) == (0, 1):
        return F.d_t * G.value - F.value * G.d_t
    if (a, b) == (1, 1):
        return F.d_st * G.value - F.d_s * G.d_t - F.d_t * G.d_s + F.value * G.d_st
    raise ValueError(f"unsupported multi-order {order}")


def _hyperbolic_cones(config: HyperbolicConfig, x, z):
    fg, gt = _hyperbolic_tables(config)
    xs, zs = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(z, float))
    A, _ = fg.jets(xs, zs)
    B, _ = gt.jets(xs, zs)
    out = []
    for i in range(xs.size):
        f, g = cone_from_xz(A[i, 0]), cone_from_xz(A[i, 1])
        ga, ta = cone_from_xz(B[i, 0]), cone_from_xz(B[i, 1])
        out.append((f, g, ga, ta))
    return out


def bilinear_residual(config: HyperbolicConfig, x: float, z: float) -> float:
    """Relative residual of ``D_s D_t F.F = (F^2 - conj(F)^2)/2`` with ``F = f~ + i g~``."""
    f, g, _, _ = _hyperbolic_cones(config, x, z)[0]
    F = f + g.scale(1j)
    lhs = hirota_D(F, F, (1, 1))
    rhs = 0.5 * (F.value ** 2 - np.conj(F.value) ** 2)
    return float(abs(lhs - rhs) / max(abs(F.value) ** 2, 1e-300))


def bilinear_backlund_residual(config: HyperbolicConfig, x: float, z: float, backlund_k: float | None = None):
    """Relative residuals of the bilinear Backlund pair (G = f~ + i g~, F = gamma - i tau).

    ``D_s G.F = -conj(G) conj(F) / (2 k)`` and ``D_t G.conj(F) = -(k/2) conj(G) F``
    with ``k = k_n`` unless ``backlund_k`` overrides it (sensitivity probes).
    """
    kn = float(config.k[-1]) if backlund_k is None else float(backlund_k)
    f, g, ga, ta = _hyperbolic_cones(config, x, z)[0]
    G = f + g.scale(1j)
    F = ga + ta.scale(-1j)
    Gb, Fb = G.conj(), F.conj()
    scale = max(abs(G.value * F.value), 1e-300)
    r1 = hirota_D(G, F, (1, 0)) + Gb.value * Fb.value / (2.0 * kn)
    r2 = hirota_D(G, Fb, (0, 1)) + 0.5 * kn * Gb.value * F.value
    return complex(r1 / scale), complex(r2 / scale)


# ---------------------------------------------------------------------------
# elliptic Backlund pair


def _uv_terms(config: SolitonConfig, x, y):
    shape, A, B, _, _ = _gauge_arrays(config, x, y)
    J = sc.eval_jet(config, np.reshape(x, -1), np.reshape(y, -1))
    u, ux, uy = np.ravel(J.value), np.ravel(J.d_x), np.ravel(J.d_y)
    g, t = B[:, 0, :], B[:, 1, :]
    D = g[:, 0] ** 2 + t[:, 0] ** 2
    sv = 2 * g[:, 0] * t[:, 0] / D
    cv = (g[:, 0] ** 2 - t[:, 0] ** 2) / D
    vx = 4 * (g[:, 0] * t[:, 1] - t[:, 0] * g[:, 1]) / D
    vy = 4 * (g[:, 0] * t[:, 2] - t[:, 0] * g[:, 2]) / D
    su, cu = np.sin(u / 2), np.cos(u / 2)
    s_plus = su * cv + cu * sv
    s_minus = su * cv - cu * sv
    return shape, ux, uy, vx, vy, s_plus, s_minus, _singular_distance(B)


def elliptic_backlund_residual(config: SolitonConfig, x: float, y: float, backlund_k: complex | None = None):
    """Relative residuals of the elliptic Backlund pair between ``U_n`` and ``v``.

    Raises ``NearSingular`` when the point is within 0.1 of the singular set.
    """
    kn = complex(config.k[-1]) if backlund_k is None else complex(backlund_k)
    _, ux, uy, vx, vy, sp, sm, dist = _uv_terms(config, x, y)
    if dist[0] < NEAR_S:
        raise NearSingular(f"point ({x}, {y}) is about {dist[0]:.3g} from the singular set")
    kb = np.conj(kn)
    r1 = ux + 1j * vy - kn * sp - kb * sm
    r2 = 1j * uy + vx + kn * sp - kb * sm
    scale = 1.0 + abs(ux[0]) + abs(uy[0]) + abs(vx[0]) + abs(vy[0]) + abs(sp[0]) + abs(sm[0])
    return complex(r1[0] / scale), complex(r2[0] / scale)


# ---------------------------------------------------------------------------
# Gamma, singular set, xi and the kernel lift


def gamma_field(config: SolitonConfig, x, y):
    """``Gamma = k_n 2 (f~ gamma - g~ tau)^2 / ((f~^2 + g~^2)(gamma^2 + tau^2))``."""
    shape, A, B, _, _ = _gauge_arrays(config, x, y)
    f, g = A[:, 0, 0], A[:, 1, 0]
    ga, ta = B[:, 0, 0], B[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        G = complex(config.k[-1]) * 2 * (f * ga - g * ta) ** 2 / ((f * f + g * g) * (ga * ga + ta * ta))
    G = G.reshape(shape)
    return G if G.ndim else complex(G)


def _ratio_h(config: SolitonConfig, x, y):
    """``h = |tau/gamma|^2 - 1``; zero exactly on the singular set."""
    _, gt = _elliptic_tables(config)
    xs, ys = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    S, _ = sc.kernels.exp_sum(xs.ravel(), ys.ravel(), gt.b, gt.cx, gt.cy, gt.columns())
    with np.errstate(divide="ignore", invalid="ignore"):
        r = S[:, 1] / S[:, 0]
    h = (r.imag ** 2 - 1.0).reshape(xs.shape)
    return h if h.ndim else float(h)


@dataclass(frozen=True)
class SingularPoint:
    x: float
    y: float
    residual: float
    component_id: int


def _refine(fun, a, b, fa, fb):
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    return optimize.brentq(fun, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def singular_residual(config: SolitonConfig, x: float, y: float) -> float:
    """``|gamma^2 + tau^2| / (|gamma|^2 + |tau|^2)`` (scale free)."""
    _, A, B, _, _ = _gauge_arrays(config, x, y)
    g, t = B[0, 0, 0], B[0, 1, 0]
    return float(abs(g * g + t * t) / (abs(g) ** 2 + abs(t) ** 2))


def line_singularities(config: SolitonConfig, y: float, x_lo: float, x_hi: float, step: float = 0.05):
    """Crossings of the horizontal line ``{y}`` with S inside ``[x_lo, x_hi]``, sorted."""
    if config.n < 2:
        return np.empty(0)
    m = max(2, int(math.ceil((x_hi - x_lo) / step)) + 1)
    xs = np.linspace(x_lo, x_hi, m)
    h = _ratio_h(config, xs, np.full(m, float(y)))
    out = []
    fun = lambda s: _ratio_h(config, s, y)
    for i in np.nonzero(np.sign(h[:-1]) * np.sign(h[1:]) <= 0)[0]:
        if not (np.isfinite(h[i]) and np.isfinite(h[i + 1])):
            continue
        out.append(_refine(fun, xs[i], xs[i + 1], h[i], h[i + 1]))
    return np.unique(np.round(np.array(out), 13)) if out else np.empty(0)


def singular_set_scan(config: SolitonConfig, window=(-20.0, 20.0, -20.0, 20.0), step: float = 0.1):
    """Points of S in ``window = (xmin, xmax, ymin, ymax)`` with component labels.

    Rows and columns of a grid with spacing ``step`` are scanned for sign
    changes of ``h``; each bracket is refined by Brent's method. Scanning both
    directions keeps curves dense whatever their slope.
    """
    if step > 0.1:
        raise ValueError("step must be at most 0.1")
    x0, x1, y0, y1 = map(float, window)
    if config.n < 2:
        return []
    xs = np.arange(x0, x1 + 0.5 * step, step)
    ys = np.arange(y0, y1 + 0.5 * step, step)
    X, Y = np.meshgrid(xs, ys)
    H = _ratio_h(config, X, Y)
    pts = []
    # rows: brackets along x
    rr, cc = np.nonzero(np.sign(H[:, :-1]) * np.sign(H[:, 1:]) <= 0)
    for r, c in zip(rr, cc):
        yv = ys[r]
        pts.append((_refine(lambda s: _ratio_h(config, s, yv), xs[c], xs[c + 1], H[r, c], H[r, c + 1]), yv))
    rr, cc = np.nonzero(np.sign(H[:-1, :]) * np.sign(H[1:, :]) <= 0)
    for r, c in zip(rr, cc):
        xv = xs[c]
        pts.append((xv, _refine(lambda s: _ratio_h(config, xv, s), ys[r], ys[r + 1], H[r, c], H[r + 1, c])))
    if not pts:
        return []
    P = np.unique(np.round(np.array(pts), 12), axis=0)
    res = np.array([singular_residual(config, px, py) for px, py in P])
    keep = res <= 1e-8
    P, res = P[keep], res[keep]
    if len(P) == 0:
        return []
    pairs = cKDTree(P).query_pairs(r=2.5 * step, output_type="ndarray")
    G = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(P), len(P)))
    _, labels = connected_components(G, directed=False)
    order = np.lexsort((P[:, 0], P[:, 1]))
    # relabel components in order of first appearance so output is deterministic
    remap = {}
    out = []
    for i in order:
        lab = remap.setdefault(int(labels[i]), len(remap))
        out.append(SingularPoint(float(P[i, 0]), float(P[i, 1]), float(res[i]), lab))
    return out


def gamma_residue(config: SolitonConfig, x0: float, y: float) -> complex:
    """Residue ``c`` of ``Gamma(., y) ~ c / (x - x0)`` at a crossing with S."""
    _, A, B, _, _ = _gauge_arrays(config, x0, y)
    f, g = A[0, 0, 0], A[0, 1, 0]
    ga, ta = B[0, 0, :], B[0, 1, :]
    dD = 2 * ga[0] * ga[1] + 2 * ta[0] * ta[1]
    return complex(config.k[-1] * 2 * (f * ga[0] - g * ta[0]) ** 2 / ((f * f + g * g) * dD))


def gamma_pole_product(config: SolitonConfig, x0: float, y0: float, offset: float = 1e-3):
    """``Gamma conj(k_j0) (eta_j0(x, y0) - eta_j0(x0, y0))`` at ``x = x0 + offset``.

    ``j0`` is the index whose phase ``eta_j`` is smallest in modulus at the
    singular point (the bounded phase along a far-field branch of S). For
    far-field points the product tends to 1.
    """
    eta = config.p * x0 - config.q * y0 - config.eta0
    j0 = int(np.argmin(np.abs(eta[:-1])))
    x = x0 + offset
    G = gamma_field(config, x, y0)
    d_eta = config.p[j0] * offset
    return complex(G * np.conj(config.k[j0]) * d_eta), j0


def _tail_side(config: SolitonConfig, y: float):
    """End of the line where Gamma vanishes, and a cut-off abscissa beyond which |Gamma| < 1e-10."""
    for X in (40.0, 60.0, 90.0, 140.0, 200.0):
        G = np.abs(gamma_field(config, np.array([-X, X]), np.array([y, y])))
        if G[1] < 1e-10:
            return 1, X
        if G[0] < 1e-10:
            return -1, X
    raise QuadratureFailure(f"Gamma does not vanish at either end of the line y = {y}")


def _re_gamma(config, y):
    return lambda s: float(np.real(gamma_field(config, s, y)))


def xi_log(config: SolitonConfig, x: float, y: float, tol: float = 1e-6) -> float:
    """``log xi(x, y)``; ``-inf`` on S.

    ``xi = exp(-x Re k_n + y Im k_n + int Re Gamma)`` with the integral taken
    from the end of the line where Gamma vanishes, which fixes the
    normalization ``xi ~ exp(-x Re k_n + y Im k_n)`` at that end. Crossings
    with S are simple poles of Gamma; their residues are computed exactly and
    subtracted on a small window so the quadrature sees a smooth integrand.
    """
    kn = complex(config.k[-1])
    side, X = _tail_side(config, y)
    lo, hi = (x, X) if side == 1 else (-X, x)
    if hi <= lo:
        return -x * kn.real + y * kn.imag
    xs = line_singularities(config, y, lo - 1e-9, hi + 1e-9)
    if np.any(np.abs(xs - x) < 1e-13):
        return -math.inf
    res = np.array([gamma_residue(config, s, y).real for s in xs])
    # subtraction windows, kept disjoint and clear of each other
    half = np.full(xs.size, 0.5)
    if xs.size > 1:
        gaps = np.diff(xs)
        half[:-1] = np.minimum(half[:-1], 0.45 * gaps)
        half[1:] = np.minimum(half[1:], 0.45 * gaps)
    fun = _re_gamma(config, y)

    def integrand(s):
        v = fun(s)
        for xi_, c, w in zip(xs, res, half):
            if abs(s - xi_) < w:
                v -= c / (s - xi_)
        return v

    brk = [lo, hi]
    for xi_, w in zip(xs, half):
        # the pole itself is a breakpoint so no quadrature node lands on it
        brk += [xi_ - w, xi_, xi_ + w]
    brk = np.unique(np.clip(brk, lo, hi))
    total, err = 0.0, 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        if b - a <= 0:
            continue
        v, e = integrate.quad(integrand, a, b, epsabs=1e-10, epsrel=1e-10, limit=200)
        total += v
        err += e
    # principal-value contribution of the subtracted poles on [lo, hi]
    for xi_, c, w in zip(xs, res, half):
        a, b = max(lo, xi_ - w), min(hi, xi_ + w)
        total += c * (math.log(abs(b - xi_) if b != xi_ else 1.0) - math.log(abs(a - xi_) if a != xi_ else 1.0))
    if not math.isfinite(total) or err > tol:
        raise QuadratureFailure(f"xi quadrature at ({x}, {y}): error estimate {err:.2e} exceeds {tol:.0e}")
    integral = total if side == -1 else -total
    return -x * kn.real + y * kn.imag + integral


def xi_eval(config: SolitonConfig, x: float, y: float) -> float:
    """Nonnegative solution of ``L xi = T xi = 0`` vanishing to first order on S."""
    return math.exp(xi_log(config, x, y))


# -- kernel lift ------------------------------------------------------------
#
# The lift maps a kernel eta of the linearization at u = U_n to a kernel phi of
# the linearization at v. Linearizing the elliptic pair with (u, v) ->
# (u + eta, v + phi) and writing a = Re(Gamma - k_n), b = Im(Gamma - k_n):
#
#   L phi = phi_x + a phi      = M eta = -i eta_y - i b eta
#   T phi = i phi_y - i b phi  = N eta = -eta_x + a eta
#
# The homogeneous solution of L is 1/xi, so phi = xi^{-1} int xi M eta.

_CHEB_DEG = 32
_CHEB_T = np.polynomial.chebyshev.chebpts1(_CHEB_DEG + 1)
_CHEB_V = np.polynomial.chebyshev.chebvander(_CHEB_T, _CHEB_DEG)
_CHEB_VINV = np.linalg.inv(_CHEB_V)


def kernel_eta(config: SolitonConfig, j: int) -> Callable:
    """The bounded kernel element ``d U_n / d eta0_j`` as a jet-valued callable."""
    return lambda x, y: sc.kernel_jet(config, j, x, y)


def _lift_coefficients(config: SolitonConfig, eta, xs, y):
    kn = complex(config.k[-1])
    ys = np.full(xs.shape, float(y))
    shape, A, B, _, _ = _gauge_arrays(config, xs, ys)
    f, g = A[:, 0, 0], A[:, 1, 0]
    ga, ta = B[:, 0, 0], B[:, 1, 0]
    G = kn * 2 * (f * ga - g * ta) ** 2 / ((f * f + g * g) * (ga * ga + ta * ta))
    a = (G - kn).real
    b = (G - kn).imag
    E = eta(xs, ys)
    M = -1j * np.asarray(E.d_y) - 1j * b * np.asarray(E.value)
    # magnitude of the two terms of M eta, the reference for cancellation
    Mref = np.abs(E.d_y) + np.abs(b * E.value)
    return a, M, Mref, _singular_distance(B)


def _panel_cheb(vals):
    """Chebyshev coefficients per panel (rows) from values at first-kind points."""
    return vals @ _CHEB_VINV.T


def _lift_line(config: SolitonConfig, eta, x: float, y: float, start: float, tol: float):
    """``phi(x, y) = int_start^x exp(-int_s^x a) M eta(s) ds`` on Chebyshev panels."""
    sgn = 1.0 if x >= start else -1.0
    lo, hi = min(start, x), max(start, x)
    edges = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / 0.5)) + 1))
    for _ in range(8):
        a0, b0 = edges[:-1], edges[1:]
        mid, rad = 0.5 * (a0 + b0), 0.5 * (b0 - a0)
        nodes = (mid[:, None] + rad[:, None] * _CHEB_T[None, :])
        a, M, Mref, dist = _lift_coefficients(config, eta, nodes.ravel(), y)
        a = a.reshape(nodes.shape)
        M = M.reshape(nodes.shape)
        Mref = Mref.reshape(nodes.shape)
        ca = _panel_cheb(a)
        tail = np.max(np.abs(ca[:, -4:]), axis=1) / np.maximum(np.max(np.abs(ca), axis=1), 1e-300)
        bad = tail > 1e-13
        if not np.any(bad):
            break
        new = [edges[0]]
        for i in range(len(a0)):
            if bad[i]:
                new.append(mid[i])
            new.append(b0[i])
        edges = np.array(new)
    else:
        raise QuadratureFailure("Chebyshev panels did not resolve the lift integrand")
    if np.min(dist) < LIFT_CLEARANCE:
        raise NearSingular(f"integration line y = {y} passes within {LIFT_CLEARANCE} of the singular set")
    # cumulative integral of a from lo, panel by panel
    C = np.polynomial.chebyshev
    ints = np.array([C.chebint(c, lbnd=-1) for c in ca]) * rad[:, None]
    cum_nodes = np.array([C.chebval(_CHEB_T, c) for c in ints])
    totals = np.array([C.chebval(1.0, c) for c in ints])
    before = np.concatenate([[0.0], np.cumsum(totals)[:-1]])
    Acum = before[:, None] + cum_nodes
    A_end = before[-1] + totals[-1]
    # weight exp(-int_s^x a): the end of interest is x (hi if going right, lo if going left)
    W = np.exp(-(A_end - Acum)) if sgn > 0 else np.exp(Acum)
    vals = W * M
    cv = _panel_cheb(vals)
    # M eta may cancel to round-off (e.g. n = 1), so measure against its terms
    scale = np.max(np.abs(cv))
    tail = np.max(np.abs(cv[:, -4:]))
    if tail > 1e3 * tol * scale and tail > 1e-13 * np.max(W * Mref):
        raise QuadratureFailure(f"lift integrand under-resolved (tail {tail / scale:.1e})")
    iv = np.array([C.chebval(1.0, C.chebint(c, lbnd=-1)) for c in cv]) * rad
    return sgn * complex(np.sum(iv))


def _lift_start(config: SolitonConfig, y: float, x: float):
    """Start of the lift integral: an end of the line where ``exp(-int a)`` decays."""
    kn = complex(config.k[-1])
    for X in (40.0, 80.0, 160.0):
        G = gamma_field(config, np.array([-X, X]), np.array([y, y]))
        a_left, a_right = (G - kn).real
        if a_left > 0.05:
            return -max(X, -x + 45.0 / a_left)
        if a_right < -0.05:
            return max(X, x + 45.0 / -a_right)
    raise QuadratureFailure(f"no decaying end for the lift on the line y = {y}")


def lift_kernel(config: SolitonConfig, eta, x: float, y: float, tol: float = 1e-10) -> complex:
    """Lift a kernel ``eta`` of the linearization at ``U_n`` to a kernel at ``v``.

    ``eta`` is a callable ``(xs, ys) -> Jet2``; integration runs along the
    horizontal line through ``(x, y)`` from the end where the homogeneous
    weight decays. Lines passing within 0.5 of S are refused.
    """
    start = _lift_start(config, y, x)
    return _lift_line(config, eta, float(x), float(y), start, tol)


@dataclass(frozen=True)
class LiftCheck:
    """Finite-difference verification of a lifted kernel at one point.

    Residuals are divided by ``scale = max(|eta|, |phi|, 1e-300)`` at the point.
    """

    phi: complex
    jo_residual: float
    t1_residual: float
    t2_residual: float
    t2_relation: float
    scale: float


def cos_v(config: SolitonConfig, x, y):
    """``cos v = 1 - 2 sin^2(v/2)``, real because v is purely imaginary."""
    shape, A, B, _, _ = _gauge_arrays(config, x, y)
    g, t = B[:, 0, 0], B[:, 1, 0]
    s = 2 * g * t / (g * g + t * t)
    c = (1 - 2 * s * s).real.reshape(shape)
    return c if c.ndim else float(c)


def lift_diagnostics(config: SolitonConfig, eta, x: float, y: float, h: float = 1e-2, homogeneous=None) -> LiftCheck:
    """Check the lifted ``phi`` against both linearized equations and ``Delta phi = phi cos v``.

    Fourth-order central differences with step ``h`` supply the derivatives of
    ``phi``. ``homogeneous`` (a callable of y) adds ``rho(y) / xi`` to ``phi``,
    which keeps ``L phi = M eta`` but breaks the second equation; the residual
    ``T2 = T phi - N eta`` must then obey ``d_x T2 = -Re(Gamma - k_n) T2``.
    """
    kn = complex(config.k[-1])

    def phi(a, b):
        v = lift_kernel(config, eta, a, b)
        if homogeneous is not None:
            v += homogeneous(b) * math.exp(-xi_log(config, a, b))
        return v

    offs = (-2, -1, 1, 2)
    c = phi(x, y)
    px = [phi(x + k * h, y) for k in offs]
    py = [phi(x, y + k * h) for k in offs]
    d1 = lambda m2, m1, p1, p2: (m2 - 8 * m1 + 8 * p1 - p2) / (12 * h)
    d2 = lambda m2, m1, p1, p2: (-m2 + 16 * m1 - 30 * c + 16 * p1 - p2) / (12 * h * h)
    lap = d2(*px) + d2(*py)
    E = eta(np.array([x - h, x, x + h]), np.array([y, y, y]))
    G = gamma_field(config, np.array([x - h, x, x + h]), np.full(3, y)) - kn
    a, b = G.real, G.imag
    scale = max(abs(E.value[1]), abs(c), 1e-300)
    jo = abs(lap - c * cos_v(config, x, y)) / scale
    t1 = d1(*px) + a[1] * c - (-1j * E.d_y[1] - 1j * b[1] * E.value[1])

    def t2_at(i, xv):
        phv = phi(xv, y)
        pyv = d1(*[phi(xv, y + k * h) for k in offs])
        return 1j * pyv - 1j * b[i] * phv - (-E.d_x[i] + a[i] * E.value[i])

    t2 = [t2_at(0, x - h), t2_at(1, x), t2_at(2, x + h)]
    rel = (t2[2] - t2[0]) / (2 * h) + a[1] * t2[1]
    return LiftCheck(c, float(jo), float(abs(t1) / scale), float(abs(t2[1]) / scale), float(abs(rel) / scale), scale)
