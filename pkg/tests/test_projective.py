import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projplane.errors import EqualArguments, OnAxisAtInfinity, ValidationError
from projplane.projective import (
    HomLine, HomPoint, affine_chart, axiom_spotcheck, check_triple, dual_chart, format_hom,
    general_position_5, in_general_position, incidence, inverse_chart, inverse_dual_chart,
    join, meet, parse_hom, random_coords, standard_frame, unit_line, unit_point,
)

coord = st.floats(-10, 10, allow_nan=False)
vec3 = st.tuples(coord, coord, coord).filter(lambda v: max(map(abs, v)) > 1e-3)


def test_normalized_representative():
    p = HomPoint([2, -4, 1])
    assert np.allclose(p.coords, [-0.5, 1, -0.25])
    assert p == HomPoint([-1, 2, -0.5])
    assert HomPoint([1j, 0, 0]) == HomPoint([1, 0, 0])
    assert HomPoint([1j, 0, 0]).is_real


def test_bad_coordinates():
    with pytest.raises(ValidationError):
        HomPoint([0, 0, 0])
    with pytest.raises(ValidationError):
        HomPoint([1, 2])
    with pytest.raises(ValidationError):
        HomPoint([np.nan, 0, 1])


def test_immutable():
    p = HomPoint([1, 2, 3])
    with pytest.raises(AttributeError):
        p.coords = np.zeros(3)
    with pytest.raises(ValueError):
        p.coords[0] = 5


def test_join_meet_basics():
    assert join(HomPoint([1, 0, 0]), HomPoint([0, 1, 0])) == HomLine([0, 0, 1])
    assert meet(HomLine([1, 0, 0]), HomLine([0, 1, 0])) == HomPoint([0, 0, 1])
    with pytest.raises(EqualArguments):
        join(HomPoint([1, 2, 3]), HomPoint([2, 4, 6]))
    with pytest.raises(EqualArguments):
        meet(HomLine([1, 1, 0]), HomLine([-3, -3, 0]))


@pytest.mark.parametrize("field", ["R", "C"])
def test_meet_of_joins_recovers_point(field):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        c = random_coords(rng, field, 3)
        p, q, r = (HomPoint(v) for v in c)
        back = meet(join(p, q), join(p, r))
        assert np.allclose(back.coords, p.coords, atol=1e-9)


@given(vec3, vec3)
def test_join_incident_and_symmetric(a, b):
    p, q = HomPoint(np.array(a)), HomPoint(np.array(b))
    m = np.array([p.coords, q.coords])
    if np.linalg.svd(m, compute_uv=False)[-1] < 1e-6:
        return
    line = join(p, q)
    assert line == join(q, p)
    assert incidence(unit_point(p), unit_line(line), 1e-10)
    assert incidence(unit_point(q), unit_line(line), 1e-10)


@given(vec3, vec3)
def test_meet_is_join_on_coordinates(a, b):
    l, m = HomLine(np.array(a)), HomLine(np.array(b))
    if np.linalg.svd(np.array([l.coords, m.coords]), compute_uv=False)[-1] < 1e-6:
        return
    assert np.allclose(meet(l, m).coords, join(HomPoint(l.coords), HomPoint(m.coords)).coords)


def test_chart_origin_and_errors():
    fr = standard_frame()
    assert affine_chart(fr, fr.O) == (fr.O, fr.O)
    with pytest.raises(OnAxisAtInfinity):
        affine_chart(fr, HomPoint([1, 1, 0]))
    with pytest.raises(EqualArguments):
        dual_chart(fr, HomLine([1, 1, 0]))
    with pytest.raises(ValidationError):
        type(fr)(fr.O, fr.X, HomPoint([1, 0, 1]))


@pytest.mark.parametrize("field", ["R", "C"])
def test_chart_roundtrips(field):
    fr = standard_frame()
    rng = np.random.default_rng(5)
    worst = 0.0
    for c in random_coords(rng, field, 1000):
        p = HomPoint(c)
        back = inverse_chart(fr, *affine_chart(fr, p))
        worst = max(worst, np.max(np.abs(back.coords - p.coords)))
        line = HomLine(c[::-1])
        lb = inverse_dual_chart(fr, *dual_chart(fr, line))
        worst = max(worst, np.max(np.abs(lb.coords - line.coords)))
    assert worst < 1e-10


def test_chart_matches_affine_coordinates():
    fr = standard_frame()
    pX, pY = affine_chart(fr, HomPoint([2, 3, 1]))
    assert pX == HomPoint([2, 0, 1]) and pY == HomPoint([0, 3, 1])


@pytest.mark.parametrize("field", ["R", "C"])
def test_axiom_spotcheck(field):
    r = axiom_spotcheck(field, 10_000, seed=1)
    assert r["violations"] == 0
    assert r["trials"] == 10_000
    assert sum(r["counts"]["join"].values()) == 10_000
    with pytest.raises(ValidationError):
        axiom_spotcheck(field, 0, seed=1)


def test_near_colinear_triple_is_degenerate():
    t = 1e-13
    p, q = HomPoint([1, 0, 1]), HomPoint([-1, 0, 1])
    r = HomPoint([0, np.sin(t), 1])
    assert check_triple(p, q, r) == "degenerate"
    assert check_triple(p, q, HomPoint([0, 1, 1])) == "general"


def test_general_position():
    frame5 = [HomPoint(v) for v in ([1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1], [1, 2, 3])]
    assert in_general_position(frame5)
    assert not in_general_position(frame5[:2] + [HomPoint([1, 1, 0])])
    for field in ("R", "C"):
        pts = general_position_5(field, seed=3)
        assert len(pts) == 5 and in_general_position(pts)
        again = general_position_5(field, seed=3)
        assert all(np.array_equal(a.coords, b.coords) for a, b in zip(pts, again))


@given(st.tuples(coord, coord, coord, coord, coord, coord))
@settings(max_examples=50)
def test_text_roundtrip(v):
    c = np.array(v[:3]) + 1j * np.array(v[3:])
    if np.max(np.abs(c)) < 1e-3:
        return
    for kind in (HomPoint, HomLine):
        h = kind(c)
        assert parse_hom(format_hom(h), kind).same(h, 1e-15)


def test_parse_forms():
    assert parse_hom("(1 : 2 : 3)") == HomPoint([1, 2, 3])
    assert parse_hom("( 1+2i : -i : 0.5 )") == HomPoint([1 + 2j, -1j, 0.5])
    assert format_hom(HomPoint([-1, 0, 1])) == "(1 : 0 : -1)"
    with pytest.raises(ValidationError):
        parse_hom("1 : 2 : 3")
    with pytest.raises(ValidationError):
        parse_hom("(1 : x : 3)")
