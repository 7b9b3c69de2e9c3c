"""Oriented 2-planes in R^4 as pairs of points on two 2-spheres.

A unit decomposable 2-form splits into self-dual and anti-self-dual halves
of length ``1/sqrt(2)`` each; rescaled, an oriented plane becomes a point of
``S^2 x S^2``.  Planes in a regular pencil form the graph of a contracting
map from the anti-self-dual sphere to the self-dual one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (DependentVectors, NoConvergence, NotContracting, TooFewSamples,
                     ValidationError)

SQRT2 = np.sqrt(2.0)
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))  # e12 e13 e14 e23 e24 e34

# rows: sigma^1, sigma^2, sigma^3 in the e12..e34 basis
SIGMA_PLUS = np.array([[1, 0, 0, 0, 0, 1],
                       [0, 1, 0, 0, -1, 0],
                       [0, 0, 1, 1, 0, 0]]) / SQRT2
SIGMA_MINUS = np.array([[1, 0, 0, 0, 0, -1],
                        [0, 1, 0, 0, 1, 0],
                        [0, 0, 1, -1, 0, 0]]) / SQRT2

UNIT_TOL = 1e-9
GRAPH_TOL = 1e-9
LIPSCHITZ_SKIP = 1e-6
PAIRING_DEADBAND = 1e-12


@dataclass(frozen=True)
class TwoForm4:
    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float).reshape(-1)
        if c.shape != (6,) or not np.all(np.isfinite(c)):
            raise ValidationError("a 2-form on R^4 needs six finite components")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @classmethod
    def wedge(cls, a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return cls([a[i] * b[j] - a[j] * b[i] for i, j in PAIRS])

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, float)
        return cls([m[i, j] for i, j in PAIRS])

    def matrix(self):
        m = np.zeros((4, 4))
        for (i, j), c in zip(PAIRS, self.components):
            m[i, j], m[j, i] = c, -c
        return m

    def interior(self, v):
        """``iota_v omega`` as a 1-form."""
        return -self.matrix() @ np.asarray(v, float)

    def __add__(self, other):
        return TwoForm4(self.components + other.components)

    def __mul__(self, s):
        return TwoForm4(self.components * float(s))

    __rmul__ = __mul__


def wedge_pairing(w1, w2):
    """``(w1 ^ w2) / dV``."""
    a, b = w1.components, w2.components
    return float(a[0] * b[5] + a[5] * b[0] - a[1] * b[4] - a[4] * b[1] + a[2] * b[3] + a[3] * b[2])


def split_sd(w):
    """Coordinates ``(X, Y)`` with ``w = X . sigma_plus + Y . sigma_minus``."""
    c = w.components
    return SIGMA_PLUS @ c, SIGMA_MINUS @ c


def join_sd(X, Y):
    return TwoForm4(np.asarray(X, float) @ SIGMA_PLUS + np.asarray(Y, float) @ SIGMA_MINUS)


@dataclass(frozen=True)
class SpherePair:
    xplus: np.ndarray
    yminus: np.ndarray

    def __post_init__(self):
        for name in ("xplus", "yminus"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
                raise ValidationError(f"{name} must be a unit 3-vector")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def two_form(self):
        """The unit decomposable form (annihilator wedge) of the plane."""
        return join_sd(self.xplus / SQRT2, self.yminus / SQRT2)

    def allclose(self, other, atol=1e-9):
        return bool(np.allclose(self.xplus, other.xplus, atol=atol, rtol=0)
                    and np.allclose(self.yminus, other.yminus, atol=atol, rtol=0))


def _annihilator(a, b):
    """Orthonormal xi, eta vanishing on span(a, b) with det[a, b, xi, eta] > 0."""
    A = np.array([a, b], dtype=float)
    if A.shape != (2, 4):
        raise ValidationError("a plane needs two 4-vectors")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0 or s[1] < 1e-12 * s[0]:
        raise DependentVectors("basis vectors are linearly dependent")
    _, _, vt = np.linalg.svd(A)
    xi, eta = vt[2], vt[3]
    if np.linalg.det(np.array([a, b, xi, eta])) < 0:
        eta = -eta
    return xi, eta


def plane_to_spheres(a, b):
    xi, eta = _annihilator(a, b)
    X, Y = split_sd(TwoForm4.wedge(xi, eta))
    return SpherePair(X * SQRT2, Y * SQRT2)


def spheres_to_plane(pair):
    """Oriented orthonormal basis of the plane encoded by ``pair``."""
    m = pair.two_form().matrix()
    _, _, vt = np.linalg.svd(m)
    a, b = vt[2], vt[3]
    if not plane_to_spheres(a, b).allclose(pair, atol=1e-6):
        b = -b
    return a, b


def pairing_sign(p1, p2):
    """Intersection sign of two oriented planes (given as SpherePairs or bases)."""
    p1 = p1 if isinstance(p1, SpherePair) else plane_to_spheres(*p1)
    p2 = p2 if isinstance(p2, SpherePair) else plane_to_spheres(*p2)
    value = float(p1.xplus @ p2.xplus - p1.yminus @ p2.yminus)
    sign = 0 if abs(value) < PAIRING_DEADBAND else (1 if value > 0 else -1)
    return {"sign": sign, "value": value}


def standard_complex_structure():
    """``J e1 = e2, J e3 = e4`` on R^4 = C^2 with coordinates (x1, x2, y1, y2)."""
    return np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)


# ---------------------------------------------------------------------------
# sampled fields S^- -> S^+

def sphere_distance(a, b):
    """Great-circle distance between unit vectors, stable for small angles."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


def _pair_distances(P):
    return sphere_distance(P[:, None, :], P[None, :, :])


@dataclass(frozen=True, eq=False)
class ContractingField:
    yminus: np.ndarray   # (N, 3)
    xplus: np.ndarray    # (N, 3)
    provenance: str = "synthetic"
    graph_violations: int = field(init=False, default=0)

    def __post_init__(self):
        ys = np.array(self.yminus, dtype=float).reshape(-1, 3)
        xs = np.array(self.xplus, dtype=float).reshape(-1, 3)
        if ys.shape != xs.shape:
            raise ValidationError("yminus and xplus sample counts differ")
        for name, arr in (("yminus", ys), ("xplus", xs)):
            if arr.size and np.max(np.abs(np.linalg.norm(arr, axis=1) - 1.0)) > UNIT_TOL:
                raise ValidationError(f"{name} samples must be unit vectors")
            arr.setflags(write=False)
        object.__setattr__(self, "yminus", ys)
        object.__setattr__(self, "xplus", xs)
        bad = 0
        if len(ys) >= 2:
            dy, dx = _pair_distances(ys), _pair_distances(xs)
            iu = np.triu_indices(len(ys), 1)
            bad = int(np.sum((dy[iu] < GRAPH_TOL) & (dx[iu] > GRAPH_TOL)))
        object.__setattr__(self, "graph_violations", bad)

    def __len__(self):
        return len(self.yminus)

    @property
    def is_graph(self):
        return self.graph_violations == 0

    def pairs(self):
        return [SpherePair(x, y) for x, y in zip(self.xplus, self.yminus)]

    def interpolate(self, y, k=4):
        """Inverse-distance weighted value at ``y`` from the k nearest samples."""
        y = np.asarray(y, float)
        d = sphere_distance(self.yminus, y)
        k = min(k, len(d))
        idx = np.argsort(d, kind="stable")[:k]
        if d[idx[0]] < 1e-14:
            return self.xplus[idx[0]].copy()
        w = 1.0 / d[idx] ** 2
        v = w @ self.xplus[idx]
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            raise NoConvergence("interpolated value vanished", best=None, residual=float("nan"))
        return v / nv


def lipschitz_estimate(f, skip=LIPSCHITZ_SKIP):
    if len(f) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(f)}")
    dy, dx = _pair_distances(f.yminus), _pair_distances(f.xplus)
    iu = np.triu_indices(len(f), 1)
    dyu, dxu = dy[iu], dx[iu]
    ok = dyu >= skip
    if not np.any(ok):
        raise TooFewSamples("all sample pairs are closer than the skip distance")
    ratio = np.where(ok, dxu / np.where(ok, dyu, 1.0), -np.inf)
    k = int(np.argmax(ratio))
    return {"L": float(ratio[k]), "worst_pair": (int(iu[0][k]), int(iu[1][k])),
            "pairs_used": int(np.sum(ok)), "skip_distance": skip}


def fibonacci_sphere(count):
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def tangent_plane_basis(slope):
    """Basis of ``{(xdot, slope @ xdot)}`` in coordinates (x1, x2, y1, y2)."""
    s = np.asarray(slope, float)
    return np.concatenate([[1.0, 0.0], s[:, 0]]), np.concatenate([[0.0, 1.0], s[:, 1]])


def encode_pencil(c, flag, samples, radius=1.0):
    """Field of tangent planes of lines through the point of ``flag``.

    Line slopes are ``X0 + radius * stereo(s)`` for Fibonacci points ``s`` on
    the unit sphere, so the whole pencil minus one line is sampled.
    """
    from .chart.dsl import parse_chart
    from .chart.lab import _cols, _implicit_slopes

    c = parse_chart(c) if isinstance(c, str) else c
    if c.n != 2:
        raise ValidationError("pencil encoding needs a chart of dimension 2")
    samples = int(samples)
    if samples < 1:
        raise TooFewSamples("need at least one sample direction")
    x0, y0, X0 = (_cols(v, 2)[:, 0] for v in flag)
    s = fibonacci_sphere(samples)
    X = X0[:, None] + radius * (s[:, :2] / (1.0 - s[:, 2:3])).T
    B = X.shape[1]
    slopes = _implicit_slopes(c, np.repeat(x0[:, None], B, 1), np.repeat(y0[:, None], B, 1), X)[0]
    pairs = [plane_to_spheres(*tangent_plane_basis(sl)) for sl in slopes]
    return ContractingField(np.array([p.yminus for p in pairs]), np.array([p.xplus for p in pairs]),
                            provenance="chart")


def pencil_pairing_signs(f):
    """All pairwise pairing signs of the planes in a field."""
    pairs = f.pairs()
    return [pairing_sign(p, q)["sign"] for p, q in itertools.combinations(pairs, 2)]


# ---------------------------------------------------------------------------
# the line through a tangent vector

LINE_TOL = 1e-8
LINE_MAXIT = 200


def _tangent_frame(y):
    a = np.array([1.0, 0.0, 0.0]) if abs(y[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = a - (a @ y) * y
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(y, t1)


def _defect(f, y, v):
    x = f.interpolate(y)
    return join_sd(x / SQRT2, y / SQRT2).interior(v)


def line_through_vector(f, v, tol=LINE_TOL, maxit=LINE_MAXIT, return_info=False):
    """Sphere pair of the plane in the field that contains the vector ``v``.

    Gauss-Newton on ``y`` in S^2 for the defect ``iota_v omega`` (whose norm is
    the sine of the angle between ``v`` and the plane), with backtracking.
    """
    v = np.asarray(v, float)
    nv = np.linalg.norm(v)
    if v.shape != (4,) or nv == 0:
        raise ValidationError("v must be a nonzero 4-vector")
    v = v / nv
    L = lipschitz_estimate(f)["L"] if len(f) >= 2 else 0.0
    if L >= 1.0:
        raise NotContracting(f"field Lipschitz estimate {L:.6g} >= 1", L=L)
    starts = f.yminus if len(f) <= 64 else f.yminus[np.linspace(0, len(f) - 1, 64).astype(int)]
    res0 = [np.linalg.norm(_defect(f, y, v)) for y in starts]
    y = starts[int(np.argmin(res0))].copy()
    r = _defect(f, y, v)
    best = float(np.linalg.norm(r))
    it = 0
    h = 1e-7
    # polish below tol while progress continues; fail only if tol is missed
    while best >= 1e-3 * tol and it < maxit:
        it += 1
        t1, t2 = _tangent_frame(y)
        J = np.empty((4, 2))
        for k, t in enumerate((t1, t2)):
            yp = y + h * t
            J[:, k] = (_defect(f, yp / np.linalg.norm(yp), v) - r) / h
        step = -np.linalg.lstsq(J, r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            yn = y + lam * (step[0] * t1 + step[1] * t2)
            yn /= np.linalg.norm(yn)
            rn = _defect(f, yn, v)
            if np.linalg.norm(rn) < best:
                break
            lam *= 0.5
        else:
            break
        y, r, best = yn, rn, float(np.linalg.norm(rn))
    if best >= tol:
        raise NoConvergence(f"line search stalled at residual {best:.3g}", best=y, residual=best)
    pair = SpherePair(f.interpolate(y), y)
    if return_info:
        return pair, {"residual": best, "iterations": it, "lipschitz": L}
    return pair


# ---------------------------------------------------------------------------
# file format: lines "y1 y2 y3 x1 x2 x3"

def format_field(f):
    rows = [" ".join(f"{c:.17g}" for c in np.concatenate([y, x])) for y, x in zip(f.yminus, f.xplus)]
    return "\n".join(rows) + "\n"


def parse_field(text, provenance="file"):
    rows = []
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValidationError(f"line {k}: expected 6 numbers, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValidationError(f"line {k}: non-numeric entry") from None
    arr = np.array(rows, dtype=float).reshape(-1, 6)
    f = ContractingField(arr[:, :3], arr[:, 3:], provenance=provenance)
    if not f.is_graph:
        raise ValidationError(f"samples are not a graph ({f.graph_violations} conflicting pairs)")
    return f
