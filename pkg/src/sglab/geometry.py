"""Ends of ``U_n``: predicted directions, traced nodal arcs, transverse profiles.

Each phase line ``eta_j = const`` runs along ``(q_j, p_j)``, so the nodal set
``U_n = pi`` leaves every large ball along the 2n rays ``+-(q_j, p_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, linear_sum_assignment
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import soliton as sc
from .errors import ConfigDegenerate, CountMismatch, NoZeroCrossing
from .soliton import SolitonConfig

DIRECTION_TOL = 1e-8
TRANSVERSE_HALF = 10.0


@dataclass(frozen=True)
class EndDescriptor:
    """A traced end matched to the prediction ``sign * (q_j, p_j)``."""

    j: int
    sign: int
    direction: tuple  # fitted unit direction, pointing outward
    measured_angle: float
    predicted_angle: float
    offset: float  # signed distance of the fitted line from the origin; not asserted
    points: int = 0
    profile_error: float = float("nan")

    @property
    def angle_error(self) -> float:
        return abs(_wrap(self.measured_angle - self.predicted_angle))

    def as_row(self) -> dict:
        return {"j": self.j, "sign": self.sign, "dir_x": self.direction[0], "dir_y": self.direction[1],
                "measured_deg": math.degrees(self.measured_angle),
                "predicted_deg": math.degrees(self.predicted_angle),
                "angle_error_deg": math.degrees(self.angle_error), "offset": self.offset,
                "profile_error": self.profile_error}


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def predicted_ends(config: SolitonConfig):
    """The 2n unit directions ``+-(q_j, p_j)`` as ``(j, sign, (dx, dy))`` triples."""
    out = []
    for j, w in enumerate(config.waves):
        for s in (1, -1):
            out.append((j, s, (s * w.q, s * w.p)))
    dirs = np.array([d for _, _, d in out])
    for a in range(len(dirs)):
        for b in range(a + 1, len(dirs)):
            if np.linalg.norm(dirs[a] - dirs[b]) < DIRECTION_TOL:
                raise ConfigDegenerate(f"ends {out[a][:2]} and {out[b][:2]} share a direction")
    return out


def _circle_crossings(config, r, m):
    phi = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
    v = sc.eval_solution(config, r * np.cos(phi), r * np.sin(phi), shifted=True)
    fun = lambda a: sc.eval_solution(config, r * math.cos(a), r * math.sin(a), shifted=True)
    out = []
    nxt = np.roll(v, -1)
    for i in np.nonzero(np.sign(v) != np.sign(nxt))[0]:
        a, b = phi[i], phi[i] + 2 * np.pi / m
        if v[i] == 0.0:
            out.append(a)
            continue
        out.append(brentq(fun, a, b, xtol=1e-13))
    return np.array(out)


def trace_nodal(config: SolitonConfig, R_trace: float = 40.0, band: float = 10.0, circles: int = 11):
    """Trace the nodal arcs crossing the annulus ``|r - R_trace| <= band / 2``.

    Sign changes of ``U_n - pi`` along each circle are refined by bisection,
    crossings on neighbouring circles are chained into arcs, and a total
    least-squares line is fitted to every arc. Arcs are matched to the
    predicted directions by a minimum-cost assignment on angle differences.
    """
    if R_trace < 25:
        raise ValueError("R_trace must be at least 25")
    pred = predicted_ends(config)
    radii = np.linspace(R_trace - 0.5 * band, R_trace + 0.5 * band, circles)
    dr = radii[1] - radii[0] if circles > 1 else band
    m = max(4096, int(math.ceil(2 * math.pi * radii[-1] / 0.05)))
    pts = []
    for r in radii:
        for a in _circle_crossings(config, r, m):
            pts.append((r * math.cos(a), r * math.sin(a)))
    pts = np.array(pts).reshape(-1, 2)
    if len(pts) == 0:
        raise CountMismatch("no nodal crossings in the band", found=0, expected=2 * config.n)
    pairs = cKDTree(pts).query_pairs(1.5 * dr, output_type="ndarray")
    G = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(pts), len(pts)))
    ncomp, labels = connected_components(G, directed=False)
    if ncomp != 2 * config.n:
        raise CountMismatch(f"traced {ncomp} arcs at R = {R_trace}, expected {2 * config.n}",
                            found=ncomp, expected=2 * config.n)
    arcs = []
    for c in range(ncomp):
        P = pts[labels == c]
        ctr = P.mean(axis=0)
        if len(P) >= 2:
            _, _, Vt = np.linalg.svd(P - ctr, full_matrices=False)
            d = Vt[0]
        else:
            d = ctr / np.linalg.norm(ctr)
        if d @ ctr < 0:
            d = -d
        nrm = np.array([-d[1], d[0]])
        arcs.append((d, float(ctr @ nrm), len(P)))
    meas = np.array([math.atan2(d[1], d[0]) for d, _, _ in arcs])
    predang = np.array([math.atan2(d[1], d[0]) for _, _, d in pred])
    cost = np.abs(_wrap(meas[:, None] - predang[None, :]))
    rows, cols = linear_sum_assignment(cost)
    ends = []
    for r, c in zip(rows, cols):
        d, off, npts = arcs[r]
        j, s, _ = pred[c]
        ends.append(EndDescriptor(j, s, (float(d[0]), float(d[1])), float(meas[r]), float(predang[c]),
                                  off, npts))
    ends.sort(key=lambda e: (e.j, -e.sign))
    return ends


def _zero_near(fun, t, v):
    idx = np.nonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0]
    if idx.size == 0:
        raise NoZeroCrossing("transverse slice has no sign change")
    i = idx[np.argmin(np.abs(t[idx]))]
    if v[i] == 0.0:
        return float(t[i])
    return brentq(fun, t[i], t[i + 1], xtol=1e-14)


def end_profile_error(config: SolitonConfig, end: EndDescriptor, s: float, samples: int = 4001) -> float:
    """``min over sigma of sup_t |(U_n - pi)(P + t nu) - sigma H(t - t0)|`` at arclength ``s``.

    ``P`` sits at distance ``s`` along the fitted line of the end, ``nu`` is the
    unit normal and ``t`` ranges over ``[-10, 10]``; ``t0`` is the zero crossing.
    """
    if s < 25:
        raise ValueError("arclength must be at least 25")
    d = np.array(end.direction)
    nu = np.array([-d[1], d[0]])
    P = end.offset * nu + s * d
    t = np.linspace(-TRANSVERSE_HALF, TRANSVERSE_HALF, samples)
    X = P[0] + t * nu[0]
    Y = P[1] + t * nu[1]
    v = sc.eval_solution(config, X, Y, shifted=True)
    fun = lambda tt: sc.eval_solution(config, P[0] + tt * nu[0], P[1] + tt * nu[1], shifted=True)
    t0 = _zero_near(fun, t, v)
    H = sc.heteroclinic(t - t0)
    return float(min(np.max(np.abs(v - H)), np.max(np.abs(v + H))))


def describe_ends(config: SolitonConfig, R_trace: float = 40.0, s: float = 30.0):
    """Traced ends with the transverse profile error at arclength ``s`` filled in."""
    return [replace(e, profile_error=end_profile_error(config, e, s)) for e in trace_nodal(config, R_trace)]


def profile_decreasing(errors, slack: float = 1.2, floor: float = 1e-12) -> bool:
    """Monotone trend test ``e_{i+1} <= slack * e_i + floor``; the floor absorbs roundoff-level values."""
    return all(b <= slack * a + floor for a, b in zip(errors[:-1], errors[1:]))
