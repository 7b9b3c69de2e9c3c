"""The classical projective plane over R or C in homogeneous coordinates."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .errors import EqualArguments, OnAxisAtInfinity, ValidationError

INCIDENCE_TOL = 1e-12
# smallest/largest singular value below this marks a draw as degenerate
DEGENERACY_RATIO = 1e-8
GENERAL_POSITION_BOUND = 1e-6

FIELDS = ("R", "C")


def normalize(v):
    """Scale so the largest-magnitude coordinate equals exactly 1."""
    v = np.asarray(v)
    if not np.iscomplexobj(v):
        v = v.astype(float)
    mag = np.abs(v)
    # first coordinate within 1e-9 of the maximum, so near-ties pick a stable pivot
    k = int(np.argmax(mag >= mag.max() * (1 - 1e-9)))
    if v[k] == 0:
        raise ValidationError("homogeneous coordinates cannot all vanish")
    out = v / v[k]
    out[k] = 1.0
    return out


def unit(v):
    """Unit-norm representative (used where a scale-balanced vector is needed)."""
    v = np.asarray(v)
    return v / np.linalg.norm(v)


class _Hom:
    __slots__ = ("coords",)

    def __init__(self, coords):
        c = np.asarray(coords)
        if c.shape != (3,):
            raise ValidationError(f"homogeneous coordinates need 3 components, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("homogeneous coordinates must be finite")
        c = normalize(c)
        if np.iscomplexobj(c) and np.all(np.abs(c.imag) == 0):
            c = c.real.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __setattr__(self, name, value):
        raise AttributeError("homogeneous points and lines are immutable")

    @property
    def is_real(self):
        return not np.iscomplexobj(self.coords)

    def same(self, other, tol=INCIDENCE_TOL):
        return type(self) is type(other) and bool(np.all(np.abs(self.coords - other.coords) < tol))

    def __eq__(self, other):
        if not isinstance(other, _Hom):
            return NotImplemented
        return self.same(other)

    def __hash__(self):
        return hash((type(self).__name__, tuple(np.round(self.coords, 10))))

    def __repr__(self):
        return f"{type(self).__name__}{format_hom(self)}"


class HomPoint(_Hom):
    __slots__ = ()


class HomLine(_Hom):
    __slots__ = ()


def incidence(p, line, tol=INCIDENCE_TOL):
    return bool(abs(np.dot(line.coords, p.coords)) < tol)


def _cross(a, b, kind):
    c = np.cross(a.coords, b.coords)
    if np.max(np.abs(c)) < INCIDENCE_TOL:
        raise EqualArguments(f"arguments coincide up to scale: {a!r}, {b!r}")
    return kind(c)


def join(p, q):
    """Line through two distinct points."""
    return _cross(p, q, HomLine)


def meet(l, m):
    """Common point of two distinct lines."""
    return _cross(l, m, HomPoint)


# ---------------------------------------------------------------------------
# affine charts

@dataclass(frozen=True)
class AffineFrame:
    O: HomPoint
    X: HomPoint
    Y: HomPoint

    def __post_init__(self):
        m = np.array([self.O.coords, self.X.coords, self.Y.coords])
        s = np.linalg.svd(m, compute_uv=False)
        if s[-1] < DEGENERACY_RATIO * s[0]:
            raise ValidationError("affine frame points must be distinct and not colinear")

    @property
    def x_axis(self):
        return join(self.O, self.X)

    @property
    def y_axis(self):
        return join(self.O, self.Y)

    @property
    def line_at_infinity(self):
        return join(self.X, self.Y)


def standard_frame():
    return AffineFrame(HomPoint([0, 0, 1]), HomPoint([1, 0, 0]), HomPoint([0, 1, 0]))


def affine_chart(frame, p):
    """``p -> (pX, pY)`` with ``pX = (pY)(OX)`` and ``pY = (pX)(OY)``."""
    if incidence(p, frame.line_at_infinity, tol=1e-10):
        raise OnAxisAtInfinity(f"{p!r} lies on the line XY")
    pX = meet(join(p, frame.Y), frame.x_axis)
    pY = meet(join(p, frame.X), frame.y_axis)
    return pX, pY


def inverse_chart(frame, pX, pY):
    return meet(join(pX, frame.Y), join(pY, frame.X))


def dual_chart(frame, line):
    """``line -> (line . OX, line . OY)``; undefined on lines through O."""
    if incidence(frame.O, line, tol=1e-10):
        raise EqualArguments(f"{line!r} passes through the origin of the frame")
    return meet(line, frame.x_axis), meet(line, frame.y_axis)


def inverse_dual_chart(frame, lX, lY):
    return join(lX, lY)


# ---------------------------------------------------------------------------
# random configurations

def random_coords(rng, field, size=None):
    shape = (3,) if size is None else (size, 3)
    if field == "R":
        return rng.standard_normal(shape)
    if field == "C":
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    raise ValidationError(f"field must be one of {FIELDS}, got {field!r}")


def conditioning(*vectors):
    """Ratio of smallest to largest singular value of the unit-normalized rows."""
    m = np.array([unit(np.asarray(v)) for v in vectors])
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[-1] / s[0])


def check_join(p, q, ratio=DEGENERACY_RATIO):
    """'ok', 'degenerate' (nearly equal points) or 'violation'."""
    if conditioning(p.coords, q.coords) < ratio:
        return "degenerate"
    try:
        line = join(p, q)
    except EqualArguments:
        return "violation"
    ok = incidence(unit_point(p), unit_line(line), 1e-10) and incidence(unit_point(q), unit_line(line), 1e-10)
    return "ok" if ok else "violation"


def check_meet(l, m, ratio=DEGENERACY_RATIO):
    if conditioning(l.coords, m.coords) < ratio:
        return "degenerate"
    try:
        p = meet(l, m)
    except EqualArguments:
        return "violation"
    ok = incidence(unit_point(p), unit_line(l), 1e-10) and incidence(unit_point(p), unit_line(m), 1e-10)
    return "ok" if ok else "violation"


def check_triple(p, q, r, ratio=DEGENERACY_RATIO):
    """Classify three points: 'general', 'colinear-degenerate' or 'violation'.

    Nearly colinear triples (relative conditioning below ``ratio``) are
    reported as degenerate rather than tested.  Otherwise the third point
    must not lie on the join of the first two.
    """
    if conditioning(p.coords, q.coords, r.coords) < ratio:
        return "degenerate"
    line = join(p, q)
    return "violation" if incidence(unit_point(r), unit_line(line), 1e-10) else "general"


class _Unit:
    __slots__ = ("coords",)

    def __init__(self, coords):
        self.coords = coords


def unit_point(p):
    return _Unit(unit(p.coords))


def unit_line(line):
    return _Unit(unit(line.coords))


def axiom_spotcheck(field, trials, seed):
    """Seeded check of the three projective plane axioms."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    counts = {"join": {"ok": 0, "violation": 0, "degenerate": 0},
              "meet": {"ok": 0, "violation": 0, "degenerate": 0},
              "four_points": {"ok": 0, "violation": 0, "degenerate": 0}}
    for _ in range(trials):
        c = random_coords(rng, field, 8)
        p, q = HomPoint(c[0]), HomPoint(c[1])
        counts["join"][check_join(p, q)] += 1
        l, m = HomLine(c[2]), HomLine(c[3])
        counts["meet"][check_meet(l, m)] += 1
        quad = [HomPoint(v) for v in c[4:8]]
        verdicts = [check_triple(*tr) for tr in itertools.combinations(quad, 3)]
        if "violation" in verdicts:
            counts["four_points"]["violation"] += 1
        elif "degenerate" in verdicts:
            counts["four_points"]["degenerate"] += 1
        else:
            counts["four_points"]["ok"] += 1
    violations = sum(v["violation"] for v in counts.values())
    skipped = sum(v["degenerate"] for v in counts.values())
    return {"field": field, "trials": trials, "seed": seed, "counts": counts,
            "violations": violations, "skipped_degenerate": skipped,
            "degeneracy_ratio": DEGENERACY_RATIO, "incidence_tol": INCIDENCE_TOL}


def in_general_position(points, bound=GENERAL_POSITION_BOUND):
    """No three of the points (normalized) have ``|det| <= bound``."""
    for a, b, c in itertools.combinations(points, 3):
        if abs(np.linalg.det(np.array([a.coords, b.coords, c.coords]))) <= bound:
            return False
    return True


def general_position_5(field, seed, bound=GENERAL_POSITION_BOUND):
    rng = np.random.default_rng(seed)
    while True:
        pts = [HomPoint(v) for v in random_coords(rng, field, 5)]
        if in_general_position(pts, bound):
            return pts


# ---------------------------------------------------------------------------
# text format "(a : b : c)"

def _format_number(z):
    z = complex(z) + 0.0   # drop negative zeros
    if z.imag == 0:
        return f"{z.real:.17g}"
    return f"{z.real:.17g}{z.imag:+.17g}i"


def format_hom(h):
    return "(" + " : ".join(_format_number(c) for c in h.coords) + ")"


_HOM_RE = re.compile(r"^\s*\(\s*([^:()]+?)\s*:\s*([^:()]+?)\s*:\s*([^:()]+?)\s*\)\s*$")


def _parse_number(tok):
    tok = tok.replace(" ", "")
    if tok.endswith("i"):
        tok = tok[:-1] + "j"
        if tok in ("j", "+j", "-j"):
            tok = tok.replace("j", "1j")
    try:
        z = complex(tok)
    except ValueError:
        raise ValidationError(f"bad coordinate {tok!r}") from None
    return z


def parse_hom(text, kind=HomPoint):
    m = _HOM_RE.match(text)
    if not m:
        raise ValidationError(f"expected '(a : b : c)', got {text!r}")
    vals = [_parse_number(g) for g in m.groups()]
    if all(v.imag == 0 for v in vals):
        return kind(np.array([v.real for v in vals]))
    return kind(np.array(vals, dtype=complex))
