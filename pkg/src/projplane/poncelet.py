"""Conics and Poncelet dynamics in the classical projective plane.

States are flags ``(p, lam)`` with ``p`` on the vertex conic ``Q_V`` and
``lam`` tangent to the edge conic ``Q_E``.  The two involutions swap ``p``
for the other intersection of ``lam`` with ``Q_V`` and ``lam`` for the other
tangent to ``Q_E`` through ``p``; their composite is the Poncelet map.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (ColinearTriple, DegenerateConic, DriftExceeded, IdenticalConics,
                     InsideConic, InvalidState, NotNested, NotOnConic, RankDeficient,
                     TangentPair, ValidationError)
from .projective import HomLine, HomPoint, _format_number, _parse_number, unit

log = logging.getLogger(__name__)

SMOOTH_TOL = 1e-10
INCIDENCE_TOL = 1e-10
STATE_TOL = 1e-9
COLINEAR_BOUND = 1e-8
DOUBLE_ROOT = 1e-9
DRIFT_LIMIT = 1e-6
CLUSTER_TOL = 1e-7


def _adj(M):
    """Adjugate of a 3x3 matrix via cofactors (valid for singular matrices too)."""
    M = np.asarray(M)
    c = np.empty_like(M)
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(M, i, 0), j, 1)
            c[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return c.T


def _scale_unit(M):
    """Scale so the largest-magnitude entry is exactly 1."""
    flat = M.ravel()
    k = int(np.argmax(np.abs(flat)))
    return M / flat[k]


class Conic:
    """Symmetric 3x3 matrix up to scale, with its adjugate (the dual conic)."""

    __slots__ = ("Q", "adj")

    def __init__(self, Q):
        Q = np.array(Q)
        if Q.shape != (3, 3) or not np.all(np.isfinite(Q)):
            raise ValidationError("a conic needs a finite 3x3 matrix")
        if np.max(np.abs(Q)) == 0:
            raise ValidationError("conic matrix vanishes")
        if not np.iscomplexobj(Q):
            Q = Q.astype(float)
        elif np.all(Q.imag == 0):
            Q = Q.real.copy()
        Q = _scale_unit(0.5 * (Q + Q.T))
        Q.setflags(write=False)
        A = _scale_unit(_adj(Q))
        A.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "adj", A)

    def __setattr__(self, name, value):
        raise AttributeError("conics are immutable")

    @classmethod
    def from_coefficients(cls, a, b, c, d, e, f):
        return cls(np.array([[a, b / 2, d / 2], [b / 2, c, e / 2], [d / 2, e / 2, f]]))

    @classmethod
    def circle(cls, cx, cy, r):
        return cls.from_coefficients(1, 0, 1, -2 * cx, -2 * cy, cx * cx + cy * cy - r * r)

    @classmethod
    def ellipse(cls, a, b):
        return cls.from_coefficients(1 / a ** 2, 0, 1 / b ** 2, 0, 0, -1)

    def coefficients(self):
        Q = self.Q
        return np.array([Q[0, 0], 2 * Q[0, 1], Q[1, 1], 2 * Q[0, 2], 2 * Q[1, 2], Q[2, 2]])

    @property
    def is_real(self):
        return not np.iscomplexobj(self.Q)

    @property
    def det(self):
        return complex(np.linalg.det(self.Q)) if not self.is_real else float(np.linalg.det(self.Q))

    @property
    def smooth(self):
        return abs(self.det) > SMOOTH_TOL

    def dual(self):
        return Conic(self.adj)

    def value(self, p):
        v = unit(np.asarray(getattr(p, "coords", p)))
        return complex(v @ self.Q @ v)

    def contains(self, p, tol=INCIDENCE_TOL):
        return abs(self.value(p)) < tol

    def same(self, other, tol=1e-9):
        return bool(np.max(np.abs(self.Q - other.Q)) < tol)

    def __repr__(self):
        return f"Conic({format_conic(self).strip()})"


def _coords(x):
    return np.asarray(getattr(x, "coords", x))


def _is_real(*xs):
    return all(not np.iscomplexobj(_coords(x)) and not np.iscomplexobj(getattr(x, "Q", 0)) for x in xs)


# ---------------------------------------------------------------------------
# constructions

def conic_through_5(points):
    pts = [p if isinstance(p, HomPoint) else HomPoint(p) for p in points]
    if len(pts) != 5:
        raise ValidationError("need exactly five points")
    for p, q in itertools.combinations(pts, 2):
        if np.max(np.abs(np.cross(unit(p.coords), unit(q.coords)))) < 1e-12:
            raise RankDeficient("two of the points coincide")
    for a, b, c in itertools.combinations(pts, 3):
        if abs(np.linalg.det(np.array([a.coords, b.coords, c.coords]))) <= COLINEAR_BOUND:
            raise ColinearTriple("three of the points are colinear")
    V = np.array([[x * x, x * y, y * y, x * z, y * z, z * z]
                  for x, y, z in (unit(p.coords) for p in pts)])
    _, s, vh = np.linalg.svd(V)
    if s[-1] < 1e-12 * s[0]:
        raise RankDeficient("the five points do not determine a unique conic")
    coef = vh[-1].conj()
    conic = Conic.from_coefficients(*coef)
    if not conic.smooth:
        raise DegenerateConic("conic through the points is a line pair", lines=split_degenerate(conic.Q))
    return conic


def conic_residual(conic, points):
    return max(abs(conic.value(p)) for p in points)


def split_degenerate(A):
    """Lines ``g, h`` with ``A`` proportional to ``g h^T + h g^T``."""
    A = np.asarray(A, complex)
    B = _adj(A)
    i = int(np.argmax(np.abs(np.diag(B))))
    if abs(B[i, i]) < 1e-14 * max(1.0, np.max(np.abs(A))) ** 2:
        # double line: A = g g^T
        j = int(np.argmax(np.abs(np.diag(A))))
        g = A[:, j] / np.sqrt(A[j, j])
        return HomLine(g), HomLine(g)
    beta = np.sqrt(-B[i, i])
    p = B[:, i] / beta
    P = np.array([[0, p[2], -p[1]], [-p[2], 0, p[0]], [p[1], -p[0], 0]])
    C = A + P
    r, c = np.unravel_index(int(np.argmax(np.abs(C))), C.shape)
    return HomLine(C[r, :]), HomLine(C[:, c])


def tangent_line(conic, p):
    if not conic.contains(p, 1e-9):
        raise NotOnConic(f"point is not on the conic (residual {abs(conic.value(p)):.3g})")
    return HomLine(conic.Q @ _coords(p))


def _pencil(p):
    """Two vectors spanning the (bilinear) orthogonal complement of ``p``."""
    _, _, vh = np.linalg.svd(np.asarray(p)[None, :])
    return vh[1].conj(), vh[2].conj()


def _binary_roots(A, B, C):
    """Roots ``[s : t]`` of ``A s^2 + 2 B s t + C t^2``, ordered deterministically."""
    disc = B * B - A * C
    sq = np.sqrt(complex(disc))
    if A == 0 and C == 0:
        return [(1.0, 0.0), (0.0, 1.0)], disc
    # q is the larger-magnitude numerator; the second root comes from the product
    q = -B - sq if abs(-B - sq) >= abs(-B + sq) else -B + sq
    if q == 0:  # double root at zero of the dominant variable
        return ([(0.0, 1.0)] * 2 if abs(A) >= abs(C) else [(1.0, 0.0)] * 2), disc
    if abs(A) >= abs(C):
        return [(q / A, 1.0), (C / q, 1.0)], disc
    return [(1.0, q / C), (1.0, A / q)], disc


def tangents_from(conic, p, field=None):
    """The two tangents to ``conic`` through ``p`` (a double line if ``p`` is on it)."""
    coords = _coords(p)
    field = field or ("R" if _is_real(conic, coords) else "C")
    D = conic.adj
    l1, l2 = _pencil(coords)
    A, B, C = l1 @ D @ l1, l1 @ D @ l2, l2 @ D @ l2
    roots, disc = _binary_roots(A, B, C)
    scale = max(abs(A), abs(B), abs(C)) ** 2
    if field == "R":
        if np.iscomplexobj(disc) and abs(np.imag(disc)) > 1e-12 * scale:
            raise InsideConic("complex data requested over R")
        if np.real(disc) < -DOUBLE_ROOT * scale:
            raise InsideConic("point lies inside the conic: no real tangents")
        if abs(disc) <= DOUBLE_ROOT * scale:
            roots = [roots[0], roots[0]]
        lines = [np.real(s * l1 + t * l2) for s, t in roots]
    else:
        if abs(disc) <= DOUBLE_ROOT * scale:
            roots = [roots[0], roots[0]]
        lines = [s * l1 + t * l2 for s, t in roots]
    return [HomLine(l) for l in lines]


def common_tangents(Q1, Q2):
    """The four common tangents over C with multiplicities and a reality flag."""
    if Q1.same(Q2):
        raise IdenticalConics("conics coincide")
    D1, D2 = Q1.adj, Q2.adj
    ts = scipy.linalg.eigvals(D1, -D2)
    ts = ts[np.isfinite(ts)]
    best, best_score = None, -1.0
    for t in ts:
        s = np.linalg.svd(D1 + t * D2, compute_uv=False)
        score = s[1] / s[0]
        if score > best_score:
            best, best_score = t, score
    if best is None:
        raise IdenticalConics("dual pencil has no degenerate member")
    m1, m2 = split_degenerate(D1 + best * D2)
    lines = []
    for m in (m1, m2):
        lines += tangents_from(Q1, m, field="C")
    unit_lines = [_phase_unit(l.coords) for l in lines]
    mult = [sum(_line_dist(u, v) < CLUSTER_TOL for v in unit_lines) for u in unit_lines]
    out = []
    for l, u, k in zip(lines, unit_lines, mult):
        real = bool(np.max(np.abs(np.imag(u))) < 1e-7)
        coords = np.real(u) if real else u
        out.append({"line": HomLine(coords), "multiplicity": int(k), "real": real})
    return out


def _phase_unit(v):
    v = unit(np.asarray(v, complex))
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def _line_dist(u, v):
    """Sine of the angle between unit vectors up to phase (no cancellation near 0)."""
    return float(np.linalg.norm(u - v * np.vdot(v, u)))


def nowhere_tangent(QE, QV):
    """True unless the pair shares a point of tangency.

    Over R only real common tangents are inspected: concentric circles, for
    instance, touch at the two circular points at infinity, which is not seen
    by real dynamics.
    """
    if QE.same(QV):
        return False
    real = QE.is_real and QV.is_real
    for ct in common_tangents(QE, QV):
        if ct["multiplicity"] >= 2 and (ct["real"] or not real):
            return False
    return True


# ---------------------------------------------------------------------------
# states and involutions

@dataclass(frozen=True)
class PonceletState:
    p: HomPoint
    lam: HomLine
    theta: float | None = None

    @property
    def is_real(self):
        return self.p.is_real and self.lam.is_real


def state_residuals(QE, QV, s):
    p, l = unit(s.p.coords), unit(s.lam.coords)
    return (abs(p @ QV.Q @ p), abs(l @ QE.adj @ l), abs(l @ p))


def validate_state(QE, QV, s, tol=STATE_TOL):
    r = state_residuals(QE, QV, s)
    if max(r) > tol:
        raise InvalidState(f"state incidence residuals {r} exceed {tol:g}")


def _other_root(base, direction, M):
    """The second zero of ``(base + s direction)^T M (...)`` given ``base`` is a zero."""
    b, d = unit(base), unit(direction)
    bd = b @ M @ d
    if abs(bd) < DOUBLE_ROOT:
        return base
    return (d @ M @ d) * b - 2 * bd * d


def _iota_P_raw(QV, p, lam):
    r = np.cross(lam, np.conj(p))
    return _other_root(p, r, QV.Q)


def _iota_L_raw(QE, p, lam):
    mu = np.cross(p, np.conj(lam))
    return _other_root(lam, mu, QE.adj)


def _mk(p, lam, QV):
    return PonceletState(HomPoint(p), HomLine(lam), circle_angle(QV, p) if _is_real(p) and QV.is_real else None)


def iota_P(QV, s, QE=None):
    if QE is not None:
        validate_state(QE, QV, s)
    else:
        p, l = unit(s.p.coords), unit(s.lam.coords)
        if max(abs(p @ QV.Q @ p), abs(l @ p)) > STATE_TOL:
            raise InvalidState("state is not incident to the vertex conic")
    return _mk(_iota_P_raw(QV, s.p.coords, s.lam.coords), s.lam.coords, QV)


def iota_L(QE, s, QV=None):
    if QV is not None:
        validate_state(QE, QV, s)
    else:
        p, l = unit(s.p.coords), unit(s.lam.coords)
        if max(abs(l @ QE.adj @ l), abs(l @ p)) > STATE_TOL:
            raise InvalidState("state line is not tangent to the edge conic")
    return PonceletState(s.p, HomLine(_iota_L_raw(QE, s.p.coords, s.lam.coords)), s.theta)


def state_distance(s, t):
    def d(a, b):
        return _line_dist(unit(np.asarray(a, complex)), unit(np.asarray(b, complex)))
    return max(d(s.p.coords, t.p.coords), d(s.lam.coords, t.lam.coords))


def _renormalize(QE, QV, p, lam):
    """One Newton projection of ``p`` to Q_V then ``lam`` to the dual of Q_E through ``p``."""
    p = unit(p)
    g = QV.Q @ p
    dp = -(p @ g) * np.conj(g) / (2 * np.vdot(g, g).real)
    p = p + dp
    lam = unit(lam)
    J = np.array([p, 2 * (QE.adj @ lam)])
    res = np.array([lam @ p, lam @ QE.adj @ lam])
    dl = -np.conj(J).T @ np.linalg.solve(J @ np.conj(J).T, res)
    corr = max(float(np.linalg.norm(dp)), float(np.linalg.norm(dl)))
    if corr > DRIFT_LIMIT:
        raise DriftExceeded(f"renormalization correction {corr:.3g} exceeds {DRIFT_LIMIT:g}")
    log.debug("renormalization correction %.3g", corr)
    return p, lam + dl, corr


def check_pair(QE, QV):
    if not (QE.smooth and QV.smooth):
        raise TangentPair("conics must be smooth")
    if not nowhere_tangent(QE, QV):
        raise TangentPair("conics share a point of tangency")


def _step(QE, QV, p, lam):
    p2 = _iota_P_raw(QV, p, lam)
    lam2 = _iota_L_raw(QE, unit(p2), unit(lam))
    return _renormalize(QE, QV, p2, lam2)


def poncelet_step(QE, QV, s, checked=False):
    if not checked:
        check_pair(QE, QV)
    validate_state(QE, QV, s)
    p, lam, _ = _step(QE, QV, s.p.coords, s.lam.coords)
    return _mk(p, lam, QV)


def orbit(QE, QV, s0, N):
    check_pair(QE, QV)
    validate_state(QE, QV, s0)
    states = [s0]
    p, lam = unit(s0.p.coords), unit(s0.lam.coords)
    worst = 0.0
    for _ in range(int(N)):
        p, lam, corr = _step(QE, QV, p, lam)
        worst = max(worst, corr)
        states.append(_mk(p, lam, QV))
    log.info("orbit of %d steps, max renormalization %.3g", N, worst)
    return states


def closure_detect(QE, QV, s0, N, tol=1e-8):
    """Least ``n <= N`` with the n-th iterate back at the start, else None."""
    states = orbit(QE, QV, s0, N)
    for n, s in enumerate(states[1:], 1):
        if state_distance(s, s0) < tol:
            return n
    return None


# ---------------------------------------------------------------------------
# real parameterization and rotation numbers

def circle_congruence(Q):
    """``M`` with ``p^T Q p`` proportional to ``(Mp)^T diag(1, 1, -1) (Mp)``."""
    if not Q.is_real:
        raise NotNested("rotation numbers need real conics")
    w, V = np.linalg.eigh(Q.Q)
    if np.sum(w > 0) == 1:
        w = -w
    if np.sum(w > 0) != 2 or np.sum(w < 0) != 1:
        raise NotNested("conic has no real points")
    order = np.argsort(-w)   # two positive first, then the negative one
    w, V = w[order], V[:, order]
    return np.diag(np.sqrt(np.abs(w))) @ V.T


def circle_angle(QV, p):
    M = circle_congruence(QV)
    q = M @ np.real(np.asarray(p))
    sgn = 1.0 if q[2] >= 0 else -1.0
    return float(np.arctan2(sgn * q[1], sgn * q[0]) % (2 * np.pi))


def point_at_angle(QV, theta):
    M = circle_congruence(QV)
    return HomPoint(np.linalg.solve(M, np.array([np.cos(theta), np.sin(theta), 1.0])))


def _signature_form(Q):
    """Q scaled so that ``p^T Q p < 0`` exactly on the interior disk."""
    w = np.linalg.eigvalsh(Q.Q)
    return Q.Q if np.sum(w > 0) == 2 else -Q.Q


def check_nested(QE, QV, samples=360):
    """Q_E strictly inside Q_V; raises NotNested otherwise."""
    if not (QE.is_real and QV.is_real):
        raise NotNested("nesting is a real notion")
    SE, SV = _signature_form(QE), _signature_form(QV)
    circle_congruence(QE)
    circle_congruence(QV)
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    for S_other, Q in ((SE, QV), (SV, QE)):
        M = circle_congruence(Q)
        pts = np.linalg.solve(M, np.stack([np.cos(th), np.sin(th), np.ones_like(th)]))
        pts = pts / np.linalg.norm(pts, axis=0)
        vals = np.einsum("in,ij,jn->n", pts, S_other, pts)
        if Q is QV and np.any(vals <= 0):
            raise NotNested("some vertex-conic point is not outside the edge conic")
        if Q is QE and np.any(vals >= 0):
            raise NotNested("edge conic is not inside the vertex conic")


def real_state(QE, QV, theta=0.0, branch=0):
    p = point_at_angle(QV, theta)
    lam = tangents_from(QE, p, field="R")[branch]
    return PonceletState(p, lam, circle_angle(QV, p.coords))


def _point_on_conic(Q, rng):
    """Random complex point of the conic by intersecting with a random line."""
    while True:
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        b = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        A, B, C = a @ Q @ a, a @ Q @ b, b @ Q @ b
        roots, _ = _binary_roots(A, B, C)
        s, t = roots[int(rng.integers(2))]
        v = s * a + t * b
        if np.linalg.norm(v) > 1e-6:
            return HomPoint(v)


def random_state(QE, QV, rng, field="C"):
    if field == "R":
        th = float(rng.uniform(0, 2 * np.pi))
        return real_state(QE, QV, th, int(rng.integers(2)))
    p = _point_on_conic(QV.Q, rng)
    lam = tangents_from(QE, p, field="C")[int(rng.integers(2))]
    return PonceletState(p, lam)


def rotation_number(QE, QV, s0, N):
    """Average lifted angle increment per step, in turns."""
    check_nested(QE, QV)
    states = orbit(QE, QV, s0, N)
    th = np.array([circle_angle(QV, s.p.coords) for s in states])
    raw = np.diff(th)
    first = (raw[0] + np.pi) % (2 * np.pi) - np.pi
    direction = 1.0 if first >= 0 else -1.0
    inc = (direction * raw) % (2 * np.pi)
    return float(np.sum(inc) / (2 * np.pi * N))


# ---------------------------------------------------------------------------
# conic text format: "a b c d e f" for a x^2 + b xy + c y^2 + d xz + e yz + f z^2

def format_conic(conic):
    return " ".join(_format_number(c) for c in conic.coefficients()) + "\n"


def parse_conic(text):
    toks = [t for line in text.splitlines() for t in line.split("#", 1)[0].split()]
    if len(toks) != 6:
        raise ValidationError(f"expected 6 conic coefficients, got {len(toks)}")
    vals = [_parse_number(t) for t in toks]
    if all(v.imag == 0 for v in vals):
        vals = [v.real for v in vals]
    return Conic.from_coefficients(*vals)
