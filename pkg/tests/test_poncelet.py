import numpy as np
import pytest

from projplane.errors import (
    ColinearTriple, DriftExceeded, IdenticalConics, InsideConic, InvalidState,
    NotNested, NotOnConic, RankDeficient, TangentPair, UnplottableResult, ValidationError,
)
from projplane.plotting import plot_poncelet
from projplane.poncelet import (
    Conic, PonceletState, check_nested, circle_congruence, closure_detect, common_tangents, conic_residual,
    conic_through_5, format_conic, iota_L, iota_P, nowhere_tangent, orbit, parse_conic,
    point_at_angle, poncelet_step, random_state, real_state, rotation_number, split_degenerate,
    state_distance, tangent_line, tangents_from,
)
from projplane.projective import HomLine, HomPoint

QV = Conic.circle(0, 0, 1)
QE = Conic.circle(0, 0, 0.5)
E2 = Conic.from_coefficients(4, 0.5, 6, 0.3, -0.2, -0.5)
UNIT_POINTS = [(1, 0, 1), (0, 1, 1), (-1, 0, 1), (0, -1, 1), (np.sqrt(0.5), np.sqrt(0.5), 1)]


def test_conic_through_5_unit_circle():
    c = conic_through_5(UNIT_POINTS)
    assert c.same(QV)
    assert conic_residual(c, [np.array(p, float) / np.linalg.norm(p) for p in UNIT_POINTS]) < 1e-9


def test_conic_through_5_random_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        while True:
            A = rng.standard_normal((3, 3))
            A = A + A.T
            w = np.linalg.eigvalsh(A)
            if np.sum(w > 0) in (1, 2) and np.min(np.abs(w)) > 0.1:
                break
        Q = Conic(A)
        M = circle_congruence(Q)
        th = rng.uniform(0, 2 * np.pi, 5)
        pts = [np.linalg.solve(M, [np.cos(t), np.sin(t), 1.0]) for t in th]
        c = conic_through_5(pts)
        assert c.same(Q, tol=1e-6)
        assert conic_residual(c, [p / np.linalg.norm(p) for p in pts]) < 1e-9


def test_conic_through_5_rejects():
    with pytest.raises(ColinearTriple):
        conic_through_5([(0, 0, 1), (1, 0, 1), (2, 0, 1), (0, 1, 1), (1, 3, 1)])
    with pytest.raises(RankDeficient):
        conic_through_5([(1, 0, 1), (1, 0, 1), (-1, 0, 1), (0, -1, 1), (0.6, 0.8, 1)])
    with pytest.raises(ValidationError):
        conic_through_5(UNIT_POINTS[:4])


def test_conic_validation_and_degenerate_split():
    with pytest.raises(ValidationError):
        Conic(np.eye(2))
    with pytest.raises(ValidationError):
        Conic(np.zeros((3, 3)))
    # the matrix is symmetrized on construction
    assert Conic([[1, 2, 0], [0, 1, 0], [0, 0, -1]]).same(Conic.from_coefficients(1, 2, 1, 0, 0, -1))
    g, h = np.array([1.0, 2.0, -1.0]), np.array([0.5, -1.0, 3.0])
    A = np.outer(g, h) + np.outer(h, g)
    l1, l2 = split_degenerate(A)
    got = {tuple(np.round(np.real(HomLine(x.coords).coords), 9)) for x in (l1, l2)}
    want = {tuple(np.round(HomLine(v).coords, 9)) for v in (g, h)}
    assert got == want
    assert not Conic(A).smooth


def test_tangents():
    p = np.array([2.0, 0.0, 1.0])
    ls = tangents_from(QE, p)
    for l in ls:
        v = np.asarray(l.coords)
        v = v / np.linalg.norm(v)
        assert abs(v @ QE.adj @ v) < 1e-12 and abs(v @ p) < 1e-12
    with pytest.raises(InsideConic):
        tangents_from(QE, np.array([0.0, 0.0, 1.0]))
    assert len(tangents_from(QE, np.array([0.0, 0.0, 1.0]), field="C")) == 2
    assert np.allclose(tangent_line(QV, [1.0, 0.0, 1.0]).coords, HomLine([1, 0, -1]).coords)
    with pytest.raises(NotOnConic):
        tangent_line(QV, [0.0, 0.0, 1.0])


@pytest.mark.parametrize("pair", [(QE, QV), (E2, QV)])
def test_involutions_square_to_identity(pair):
    qe, qv = pair
    rng = np.random.default_rng(1)
    for field in ("R", "C"):
        for _ in range(20):
            s = random_state(qe, qv, rng, field)
            assert state_distance(iota_P(qv, iota_P(qv, s, qe), qe), s) < 1e-8
            assert state_distance(iota_L(qe, iota_L(qe, s, qv), qv), s) < 1e-8


def test_poncelet_map_fixed_point_free():
    for qe in (QE, E2):
        assert nowhere_tangent(qe, QV)
        check_nested(qe, QV)
        worst = np.inf
        for th in np.linspace(0, 2 * np.pi, 72, endpoint=False):
            for branch in (0, 1):
                s = real_state(qe, QV, th, branch)
                s1 = poncelet_step(qe, QV, s)
                s2 = poncelet_step(qe, QV, s1)
                worst = min(worst, state_distance(s, s1), state_distance(s, s2))
        assert worst > 1e-4


def test_porism_period_three():
    for th in (0.0, 0.4, 1.7, 3.0, 5.5):
        for branch in (0, 1):
            assert closure_detect(QE, QV, real_state(QE, QV, th, branch), 10) == 3
    rng = np.random.default_rng(2)
    for _ in range(5):
        assert closure_detect(QE, QV, random_state(QE, QV, rng, "C"), 10) == 3


def test_period_four_square():
    qe = Conic.circle(0, 0, np.sqrt(0.5))
    assert closure_detect(qe, QV, real_state(qe, QV, 0.3), 10) == 4


def test_rotation_number():
    r = rotation_number(QE, QV, real_state(QE, QV, 0.2), 300)
    assert r == pytest.approx(1 / 3, abs=1e-3)
    r2 = rotation_number(E2, QV, real_state(E2, QV, 0.0), 300)
    assert 0 < r2 < 0.5
    assert closure_detect(E2, QV, real_state(E2, QV, 0.0), 20) is None
    with pytest.raises(NotNested):
        rotation_number(QV, QE, real_state(QE, QV), 10)


def test_common_tangent_counts():
    disjoint = Conic.circle(3, 0, 1)
    ct = common_tangents(QV, disjoint)
    assert len(ct) == 4 and all(c["real"] and c["multiplicity"] == 1 for c in ct)
    nested = common_tangents(E2, QV)
    assert sum(c["multiplicity"] == 1 for c in nested) == 4 and not any(c["real"] for c in nested)
    for c in ct + nested:
        v = np.asarray(c["line"].coords, complex)
        v = v / np.linalg.norm(v)
        assert abs(v @ QV.adj @ v) < 1e-8
    # concentric circles touch at the circular points, invisible over R
    conc = common_tangents(QE, QV)
    assert all(c["multiplicity"] == 2 and not c["real"] for c in conc)
    with pytest.raises(IdenticalConics):
        common_tangents(QV, QV)


def test_tangent_pair_rejected():
    touching = Conic.circle(0.5, 0, 0.5)
    assert not nowhere_tangent(touching, QV)
    with pytest.raises(TangentPair):
        orbit(touching, QV, real_state(touching, QV, np.pi), 3)


def test_invalid_state_and_drift():
    bad = PonceletState(HomPoint([0.0, 0.0, 1.0]), HomLine([1.0, 0.0, 0.0]))
    with pytest.raises(InvalidState):
        poncelet_step(QE, QV, bad)
    s = real_state(QE, QV, 0.5)
    p = np.asarray(s.p.coords) * (1 + 5e-10)
    nudged = PonceletState(HomPoint(p + [0, 0, 5e-10]), s.lam)
    poncelet_step(QE, QV, nudged)
    far = PonceletState(HomPoint(np.asarray(s.p.coords) + [0, 0, 1e-5]), s.lam)
    with pytest.raises((InvalidState, DriftExceeded)):
        poncelet_step(QE, QV, far)


def test_point_at_angle_roundtrip():
    for qv in (QV, E2):
        for th in (0.1, 2.0, 4.0):
            p = point_at_angle(qv, th)
            assert qv.contains(p.coords, 1e-9)
    assert real_state(QE, QV, 1.25).theta == pytest.approx(1.25)


def test_conic_text_roundtrip():
    for c in (QV, QE, E2, Conic.from_coefficients(1, 0, 1j, 0, 0, -1)):
        assert parse_conic(format_conic(c)).same(c)
    assert parse_conic("# outer\n1 0 1 0 0 -1  # unit\n").same(QV)
    with pytest.raises(ValidationError):
        parse_conic("1 0 1\n")
    with pytest.raises(ValidationError):
        parse_conic("1 0 1 0 0 x\n")


def test_plot_poncelet(tmp_path):
    states = orbit(QE, QV, real_state(QE, QV, 0.0), 3)
    out = plot_poncelet(QE, QV, states, tmp_path / "o.svg")
    assert out["edges"] == 3 and out["tangency_residual"] < 1e-9
    text = (tmp_path / "o.svg").read_text()
    assert text.startswith("<?xml") and "<svg" in text
    plot_poncelet(QE, QV, states, tmp_path / "o2.svg")
    assert (tmp_path / "o2.svg").read_bytes() == (tmp_path / "o.svg").read_bytes()
    with pytest.raises(UnplottableResult):
        plot_poncelet(QE, QV, [], tmp_path / "e.svg")
    rng = np.random.default_rng(3)
    with pytest.raises(UnplottableResult):
        plot_poncelet(QE, QV, [random_state(QE, QV, rng, "C")], tmp_path / "c.svg")
