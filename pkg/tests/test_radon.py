import numpy as np
import pytest
from scipy.integrate import quad

from projplane.errors import DegenerateSurface, QuadratureDiverged, ValidationError
from projplane.radon import (
    AlgebraicConic, AlgebraicLine, LineDensity, TriangulatedPatch, closedness_check,
    crofton_additivity, crofton_mc, disk_patch_fs_area, evaluate_on_plane, format_patch,
    fubini_study, hermitian_to_real, line_disk_patch, line_tangent_plane, parse_patch,
    patch_radon_integral, pointwise_radon, sample_fs_lines, volume_ratio,
)

FS = LineDensity.fubini_study()
OMEGA0 = np.zeros((4, 4))
OMEGA0[0, 1], OMEGA0[2, 3] = 1, 1
OMEGA0 = OMEGA0 - OMEGA0.T


def test_fs_mass_and_sampling():
    # radial oracle: mass of FS over C^2 is 2 pi^2 int r^3 f(r) dr
    mass, _ = quad(lambda r: 2 * np.pi ** 2 * r ** 3 * fubini_study(r, 0.0), 0, np.inf)
    assert mass == pytest.approx(1, abs=1e-10)
    a, b, rej = sample_fs_lines(np.random.default_rng(0), 200_000)
    assert rej == 0
    # FS mass of the unit ball |a|^2 + |b|^2 < 1 is 1/4
    frac = np.mean(np.abs(a) ** 2 + np.abs(b) ** 2 < 1)
    assert frac == pytest.approx(0.25, abs=4 * np.sqrt(0.25 * 0.75 / 200_000))


def test_radon_at_origin_matches_radial_oracle():
    # on the pencil b = 0: m0 = int f dA and m2 = int |a|^2 f dA, both 1/pi
    m0, _ = quad(lambda r: 2 * np.pi * r * fubini_study(r, 0.0), 0, np.inf)
    m2, _ = quad(lambda r: 2 * np.pi * r ** 3 * fubini_study(r, 0.0), 0, np.inf)
    assert m0 == pytest.approx(m2)
    M = pointwise_radon(FS, np.zeros(4))
    assert np.allclose(M, m0 * OMEGA0, atol=1e-7)
    assert np.allclose(M, -M.T)


def test_hermitian_to_real_identity():
    assert np.allclose(hermitian_to_real(np.eye(2)), OMEGA0)
    assert np.allclose(hermitian_to_real(np.eye(2)[None])[0], OMEGA0)


def test_positivity_and_volume():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (100, 4))
    Ms = pointwise_radon(FS, pts)
    assert np.all(volume_ratio(Ms) > 0)
    a, b, _ = sample_fs_lines(rng, 100)
    for ai, bi in zip(a, b):
        x = complex(*rng.uniform(-1, 1, 2))
        y = ai * x + bi
        M = pointwise_radon(FS, np.array([x.real, x.imag, y.real, y.imag]))
        assert evaluate_on_plane(M, *line_tangent_plane(ai)) > 0


def test_closedness_symmetry_and_linearity():
    g = np.linspace(-0.5, 0.5, 3)
    pts = np.array(np.meshgrid(g, g, g, g, indexing="ij")).reshape(4, -1).T
    r = closedness_check(FS, pts)
    assert r["residual"] < 1e-3
    p = np.array([[0.3, -0.2, 0.4, 0.1]])
    rp = closedness_check(FS, p)["residual"]
    rm = closedness_check(FS, -p)["residual"]
    assert rp == pytest.approx(rm, rel=0.1, abs=1e-9)
    two = FS.scaled(2.0)
    assert np.allclose(pointwise_radon(two, p[0]), 2 * pointwise_radon(FS, p[0]))
    assert closedness_check(two, p)["residual"] == pytest.approx(rp, rel=1e-6, abs=1e-12)


def test_weighted_density_closed_and_linear():
    eta = LineDensity(((1.0, "1 / (1 + x1*x1 + y2*y2)"),))
    p = np.array([0.2, 0.1, -0.3, 0.2])
    assert closedness_check(eta, p[None])["residual"] < 1e-3
    mix = FS.scaled(0.5) + eta
    assert np.allclose(pointwise_radon(mix, p), 0.5 * pointwise_radon(FS, p) + pointwise_radon(eta, p), atol=1e-8)


def test_density_validation():
    with pytest.raises(ValidationError):
        LineDensity(((1.0, "x1"),))
    with pytest.raises(ValidationError):
        LineDensity(((float("nan"), None),))
    with pytest.raises(QuadratureDiverged):
        LineDensity(((1.0, "x1*x1 + x2*x2"),)).mass()
    assert LineDensity(((1.0, "x1*x1 + x2*x2"),)).is_fubini_study is False
    assert LineDensity(((1.0, "1/(1 + x1*x1 + x2*x2)"),)).mass() < 1


def test_crofton_line_and_conic():
    line = AlgebraicLine(np.array([0.3, -1, 0.2]))
    r = crofton_mc(FS, line, 10_000, seed=1)
    assert r["estimate"] == pytest.approx(1) and r["stderr"] < 0.01
    conic = AlgebraicConic(np.diag([1.0, 1.0, -1.0]))
    assert crofton_mc(FS, conic, 10_000, seed=1)["estimate"] == pytest.approx(2)
    with pytest.raises(DegenerateSurface):
        AlgebraicConic(np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(ValidationError):
        crofton_mc(FS, line, 100, seed=1)


def test_crofton_patch_matches_area_oracle():
    patch = line_disk_patch(0.0, 0.0, 1.0, segments=48)
    r = crofton_mc(FS, patch, 50_000, seed=2)
    target = disk_patch_fs_area(1.0)
    assert abs(r["estimate"] - target) < 3 * r["stderr"] + 0.005
    assert patch_radon_integral(FS, patch) == pytest.approx(target, rel=5e-3)


def test_patch_integral_radial_oracle():
    # disk of radius rho on y = 0: int_0^rho 2 pi r m(r) dr with m(r) the radial density
    for rho in (0.5, 2.0):
        want = rho ** 2 / (1 + rho ** 2)
        got = patch_radon_integral(FS, line_disk_patch(0.0, 0.0, rho, segments=96))
        assert got == pytest.approx(want, rel=2e-3)


def test_additivity():
    whole = line_disk_patch(0.5, 0.2, 1.0, segments=32)
    top = line_disk_patch(0.5, 0.2, 1.0, segments=16, theta=(0, np.pi))
    bottom = line_disk_patch(0.5, 0.2, 1.0, segments=16, theta=(np.pi, 2 * np.pi))
    r = crofton_additivity(FS, whole, top, bottom, 20_000, seed=3)
    assert r["additive"]
    empty = TriangulatedPatch(np.zeros((0, 3, 4)))
    r2 = crofton_additivity(FS, whole, whole, empty, 5_000, seed=4)
    assert r2["difference"] == 0 and r2["part2"]["estimate"] == 0
    other = line_disk_patch(-1.0, 2.0, 0.5, segments=16)
    both = whole + other
    r3 = crofton_additivity(FS, both, whole, other, 5_000, seed=4)
    assert r3["difference"] == pytest.approx(0, abs=1e-12)


def test_crofton_linearity_common_random_numbers():
    patch = line_disk_patch(0.0, 0.0, 1.0, segments=24)
    eta = LineDensity(((1.0, "1 / (1 + x1*x1)"),))
    e1 = crofton_mc(eta, patch, 5_000, seed=7)["estimate"]
    e2 = crofton_mc(FS, patch, 5_000, seed=7)["estimate"]
    mix = crofton_mc(eta.scaled(2.0) + FS, patch, 5_000, seed=7)["estimate"]
    assert mix == pytest.approx(2 * e1 + e2, rel=1e-12)


def test_crofton_determinism():
    patch = line_disk_patch(0.0, 0.0, 1.0, segments=16)
    assert crofton_mc(FS, patch, 12_345, seed=9) == crofton_mc(FS, patch, 12_345, seed=9)


def test_patch_validation_and_roundtrip():
    with pytest.raises(DegenerateSurface):
        TriangulatedPatch(np.zeros((1, 3, 4)))
    patch = line_disk_patch(0.3 + 0.1j, -0.2, 0.8, segments=8)
    back = parse_patch(format_patch(patch))
    assert np.array_equal(back.triangles, patch.triangles)
    with pytest.raises(ValidationError):
        parse_patch("triangle 1 2 3\n")
    with pytest.raises(ValidationError):
        parse_patch("square " + " ".join(["0"] * 12) + "\n")


def test_chunked_batches_agree(monkeypatch):
    import projplane.radon as radon_mod
    pts = np.random.default_rng(5).uniform(-1, 1, (7, 4))
    whole = pointwise_radon(FS, pts, quad=(32, 32))
    monkeypatch.setattr(radon_mod, "BATCH_NODES", 3 * 32 * 32)
    assert np.array_equal(pointwise_radon(FS, pts, quad=(32, 32)), whole)
