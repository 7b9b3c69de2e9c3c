import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projplane.chart import CLASSICAL_COMPLEX_CHART, COMPONENTWISE_CHART, parse_chart
from projplane.errors import DependentVectors, NotContracting, TooFewSamples, ValidationError
from projplane.gw import (
    ContractingField, SpherePair, TwoForm4, encode_pencil, fibonacci_sphere, format_field,
    join_sd, line_through_vector, lipschitz_estimate, pairing_sign, parse_field,
    pencil_pairing_signs, plane_to_spheres, spheres_to_plane, split_sd, standard_complex_structure,
    wedge_pairing,
)

R2 = 1 / np.sqrt(2)
E = np.eye(4)
J = standard_complex_structure()
ORIGIN = ([0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
comp = st.floats(-3, 3, allow_nan=False)


def constant_field(n=200):
    return ContractingField(fibonacci_sphere(n), np.tile([1.0, 0.0, 0.0], (n, 1)))


def in_plane(v, a, b):
    """Sine of the angle between v and the plane span(a, b)."""
    q, _ = np.linalg.qr(np.column_stack([a, b]))
    v = v / np.linalg.norm(v)
    return np.linalg.norm(v - q @ (q.T @ v))


def test_split_examples():
    X, Y = split_sd(TwoForm4([1, 0, 0, 0, 0, 0]))
    assert np.allclose(X, [R2, 0, 0]) and np.allclose(Y, [R2, 0, 0])
    X, Y = split_sd(TwoForm4([0, 0, 0, 0, 0, 1]))
    assert np.allclose(X, [R2, 0, 0]) and np.allclose(Y, [-R2, 0, 0])


@given(st.lists(comp, min_size=6, max_size=6))
def test_split_isometry_and_pairing(c):
    w = TwoForm4(c)
    X, Y = split_sd(w)
    assert np.allclose(join_sd(X, Y).components, w.components, atol=1e-14)
    assert X @ X + Y @ Y == pytest.approx(np.dot(c, c), abs=1e-12)
    assert wedge_pairing(w, w) == pytest.approx(X @ X - Y @ Y, abs=1e-12)


def test_wedge_pairing_oracle():
    # (w1 ^ w2)(e1, e2, e3, e4) by the shuffle formula
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = TwoForm4(rng.standard_normal(6)), TwoForm4(rng.standard_normal(6))
        A, B = a.matrix(), b.matrix()
        val = 0.0
        for perm in itertools.permutations(range(4)):
            sgn = np.linalg.det(np.eye(4)[list(perm)])
            val += sgn * A[perm[0], perm[1]] * B[perm[2], perm[3]]
        assert wedge_pairing(a, b) == pytest.approx(val / 4)


def test_plane_to_spheres_examples():
    p = plane_to_spheres(E[0], E[1])
    assert np.allclose(p.xplus, [1, 0, 0]) and np.allclose(p.yminus, [-1, 0, 0])
    q = plane_to_spheres(E[1], E[0])
    assert np.allclose(q.xplus, -p.xplus) and np.allclose(q.yminus, -p.yminus)
    with pytest.raises(DependentVectors):
        plane_to_spheres(E[0], 2 * E[0])


def test_complex_lines_share_xplus():
    rng = np.random.default_rng(1)
    ref = plane_to_spheres(E[0], J @ E[0]).xplus
    for v in rng.standard_normal((100, 4)):
        assert np.allclose(plane_to_spheres(v, J @ v).xplus, ref, atol=1e-12)


@given(st.lists(comp, min_size=8, max_size=8))
@settings(max_examples=50)
def test_spheres_roundtrip(c):
    a, b = np.array(c[:4]), np.array(c[4:])
    if np.linalg.svd(np.array([a, b]), compute_uv=False)[-1] < 1e-3:
        return
    p = plane_to_spheres(a, b)
    a2, b2 = spheres_to_plane(p)
    assert plane_to_spheres(a2, b2).allclose(p, atol=1e-8)
    assert in_plane(a, a2, b2) < 1e-8 and in_plane(b, a2, b2) < 1e-8


def test_pairing_signs():
    assert pairing_sign((E[0], E[1]), (E[2], E[3]))["sign"] == 1
    assert pairing_sign((E[0], E[1]), (E[0], E[1]))["sign"] == 0
    assert pairing_sign((E[0], E[1]), (E[0], E[2]))["sign"] == 0
    rng = np.random.default_rng(2)
    for _ in range(50):
        u, v = rng.standard_normal((2, 4))
        s = pairing_sign((u, J @ u), (v, J @ v))
        assert s["sign"] == 1
        assert s == pairing_sign((v, J @ v), (u, J @ u))


def test_pairing_value_is_wedge():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b, c, d = rng.standard_normal((4, 4))
        # pairing value is proportional to det[a, b, c, d] for unit-normalized planes
        val = pairing_sign((a, b), (c, d))["value"]
        assert np.sign(val) == np.sign(np.linalg.det(np.array([a, b, c, d])))


def test_lipschitz():
    assert lipschitz_estimate(constant_field())["L"] == 0
    ys = fibonacci_sphere(100)
    th = 0.7
    Rz = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1]])
    iso = ContractingField(ys, ys @ Rz.T)
    assert lipschitz_estimate(iso)["L"] == pytest.approx(1, abs=1e-9)
    with pytest.raises(TooFewSamples):
        lipschitz_estimate(ContractingField(ys[:1], ys[:1]))


def test_field_validation():
    with pytest.raises(ValidationError):
        ContractingField([[1, 0, 0]], [[2, 0, 0]])
    with pytest.raises(ValidationError):
        ContractingField(np.eye(3), np.eye(3)[:2])
    f = ContractingField([[1, 0, 0], [1, 0, 0]], [[1, 0, 0], [0, 1, 0]])
    assert not f.is_graph and f.graph_violations == 1


def test_encode_classical_pencil():
    f = encode_pencil(parse_chart(CLASSICAL_COMPLEX_CHART), ORIGIN, 100)
    assert f.is_graph
    assert lipschitz_estimate(f)["L"] < 1e-3
    assert set(pencil_pairing_signs(f)) == {1}
    # off the origin too
    f2 = encode_pencil(parse_chart(CLASSICAL_COMPLEX_CHART), ([0.2, -0.1], [0.3, 0.0], [0.1, 0.4]), 60)
    assert lipschitz_estimate(f2)["L"] < 1e-3


def test_encode_componentwise_pencil():
    f = encode_pencil(parse_chart(COMPONENTWISE_CHART), ORIGIN, 100)
    assert not f.is_graph or lipschitz_estimate(f)["L"] >= 1
    assert -1 in pencil_pairing_signs(f) or 0 in pencil_pairing_signs(f)
    with pytest.raises(TooFewSamples):
        encode_pencil(parse_chart(CLASSICAL_COMPLEX_CHART), ORIGIN, 0)


def test_line_through_vector_complex_lines():
    f = constant_field()
    for v, want in ((E[0], (E[0], E[1])), (E[2], (E[2], E[3]))):
        a, b = spheres_to_plane(line_through_vector(f, v))
        assert in_plane(want[0], a, b) < 1e-7 and in_plane(want[1], a, b) < 1e-7
    rng = np.random.default_rng(4)
    worst = 0.0
    for v in rng.standard_normal((100, 4)):
        a, b = spheres_to_plane(line_through_vector(f, v))
        worst = max(worst, in_plane(v, a, b), in_plane(J @ v, a, b))
    assert worst < 1e-7


def test_line_through_vector_scale_and_idempotence():
    f = constant_field()
    v = np.array([0.3, -1.2, 0.5, 0.8])
    p = line_through_vector(f, v)
    assert p.allclose(line_through_vector(f, 7 * v), atol=1e-9)
    a, b = spheres_to_plane(p)
    assert line_through_vector(f, a + 0.3 * b).allclose(p, atol=1e-7)


def test_line_through_vector_rejects():
    ys = fibonacci_sphere(50)
    with pytest.raises(NotContracting):
        line_through_vector(ContractingField(ys, ys), E[0])
    with pytest.raises(ValidationError):
        line_through_vector(constant_field(), np.zeros(4))


def test_field_file_roundtrip(tmp_path):
    f = encode_pencil(parse_chart(CLASSICAL_COMPLEX_CHART), ORIGIN, 20)
    g = parse_field(format_field(f))
    assert np.array_equal(g.yminus, f.yminus) and np.array_equal(g.xplus, f.xplus)
    with pytest.raises(ValidationError):
        parse_field("1 0 0 1 0\n")
    with pytest.raises(ValidationError):
        parse_field("2 0 0 1 0 0\n")
    with pytest.raises(ValidationError):
        parse_field("1 0 0 1 0 0\n1 0 0 0 1 0\n")
