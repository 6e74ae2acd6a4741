import math
from dataclasses import replace

import numpy as np
import pytest

from sglab import geometry as geo
from sglab.errors import CountMismatch, NoZeroCrossing
from sglab.soliton import SolitonConfig


def test_predicted_ends_examples():
    d = geo.predicted_ends(SolitonConfig.kink(0.0))
    assert [e[2] for e in d] == [(0.0, 1.0), (-0.0, -1.0)]
    ang = sorted(round(math.degrees(math.atan2(v[1], v[0]))) for _, _, v in geo.predicted_ends(SolitonConfig.saddle()))
    assert ang == [-135, -45, 45, 135]
    six = geo.predicted_ends(SolitonConfig.from_angles(np.radians([10, 50, 90])))
    assert len({tuple(np.round(v, 9)) for _, _, v in six}) == 6


@pytest.mark.parametrize("name,R,tol", [("kink", 40, 0.5), ("saddle", 30, 0.5), ("asym4", 40, 2.0),
                                        ("spread6", 40, 2.0)])
def test_trace_angles(configs, name, R, tol):
    cfg = configs[name]
    ends = geo.trace_nodal(cfg, R)
    assert len(ends) == 2 * cfg.n
    assert {(e.j, e.sign) for e in ends} == {(j, s) for j in range(cfg.n) for s in (1, -1)}
    for e in ends:
        assert math.degrees(e.angle_error) <= tol
        assert math.hypot(*e.direction) == pytest.approx(1.0, abs=1e-12)


def test_angle_error_shrinks_with_radius(configs):
    cfg = configs["spread6"]
    e40 = max(e.angle_error for e in geo.trace_nodal(cfg, 40))
    e60 = max(e.angle_error for e in geo.trace_nodal(cfg, 60))
    assert e60 <= e40


def test_profile_errors(configs):
    kink = configs["kink"]
    for e in geo.trace_nodal(kink, 40):
        assert geo.end_profile_error(kink, e, 30) <= 1e-8
    sad = configs["saddle"]
    for e in geo.trace_nodal(sad, 40):
        errs = [geo.end_profile_error(sad, e, s) for s in (25, 35, 45)]
        assert errs[1] <= 5e-2
        assert geo.profile_decreasing(errs)


def test_profile_check_is_not_vacuous(configs):
    # near the core of the six-end solution the slice is visibly not a 1D kink
    cfg = configs["spread6"]
    e = geo.trace_nodal(cfg, 40)[0]
    assert geo.end_profile_error(cfg, e, 25) > 1e-5


def test_no_zero_crossing(configs):
    cfg = configs["kink"]
    e = replace(geo.trace_nodal(cfg, 40)[0], offset=40.0)
    with pytest.raises(NoZeroCrossing):
        geo.end_profile_error(cfg, e, 30)


def test_missing_ends_are_reported():
    # nodal lines displaced beyond the tracing band leave fewer than 2n arcs
    with pytest.raises(CountMismatch):
        geo.trace_nodal(SolitonConfig.kink(0.0, 100.0), 25)
    with pytest.raises(CountMismatch) as exc:
        geo.trace_nodal(SolitonConfig.from_angles([0.3, -0.9], [0.0, 80.0]), 25)
    assert exc.value.expected == 4 and exc.value.found != 4


def test_decrease_helper():
    assert geo.profile_decreasing([1e-3, 1.1e-3, 1e-5])
    assert not geo.profile_decreasing([1e-3, 2e-3])
    assert geo.profile_decreasing([1e-15, 3e-15])
