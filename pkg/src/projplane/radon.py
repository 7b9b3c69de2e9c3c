"""Radon transform of line densities on the affine complex plane.

Lines are ``y = a x + b`` with ``(a, b)`` in C^2.  A line density ``f(a, b)``
pushed through the incidence correspondence gives the 2-form

    R = (i/2) sum H_jk dz_j ^ dz_k-bar,   z = (x, y),
    H = [[m2, -m1], [-conj(m1), m0]],

where ``m0, m1, m2`` are the integrals of ``f, f a, f |a|^2`` over the pencil
through the point (``b = y - a x``).  Real matrices use the coordinates
``(x1, x2, y1, y2) = (Re x, Im x, Re y, Im y)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .chart.dsl import evaluate, parse_expr
from .errors import (DegenerateSurface, NonTransverseExcess, QuadratureDiverged,
                     ValidationError)

log = logging.getLogger(__name__)

FS_CONSTANT = 2.0 / np.pi ** 2   # total mass one on the chart
QUAD_RTOL = 1e-5
QUAD_START = 16
QUAD_MAX = 1024
# complex basis vectors for (x1, x2, y1, y2)
_E = np.array([[1, 0], [1j, 0], [0, 1], [0, 1j]])


def fubini_study(a, b):
    return FS_CONSTANT / (1.0 + np.abs(a) ** 2 + np.abs(b) ** 2) ** 3


@dataclass(frozen=True)
class LineDensity:
    """``f = FS * sum_k coef_k * g_k`` with ``g_k`` a DSL expression or 1.

    Expressions use ``x1, x2`` for ``Re a, Im a`` and ``y1, y2`` for
    ``Re b, Im b``.
    """

    terms: tuple = ((1.0, None),)
    _nodes: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        nodes = []
        for coef, expr in self.terms:
            if not np.isfinite(coef):
                raise ValidationError("density coefficients must be finite")
            nodes.append(None if expr is None else parse_expr(expr, n=2))
        object.__setattr__(self, "_nodes", tuple(nodes))
        self._check_nonnegative()

    @classmethod
    def fubini_study(cls):
        return cls(((1.0, None),))

    @property
    def is_fubini_study(self):
        return all(e is None for _, e in self.terms)

    def scaled(self, s):
        return LineDensity(tuple((c * s, e) for c, e in self.terms))

    def __add__(self, other):
        return LineDensity(self.terms + other.terms)

    def weight(self, a, b):
        """Relative density ``f / FS``."""
        a, b = np.asarray(a, complex), np.asarray(b, complex)
        env = {"x1": a.real, "x2": a.imag, "y1": b.real, "y2": b.imag}
        total = np.zeros(np.broadcast(a, b).shape)
        for (coef, _), node in zip(self.terms, self._nodes):
            total = total + coef * (1.0 if node is None else evaluate(node, env))
        return total

    def __call__(self, a, b):
        return fubini_study(a, b) * self.weight(a, b)

    def _check_nonnegative(self):
        a, b, _ = sample_fs_lines(np.random.default_rng(0), 10_000)
        if np.any(self.weight(a, b) < 0):
            raise ValidationError("line density takes negative values")

    def mass(self, rtol=QUAD_RTOL):
        """Total mass by a product rule on C^2 in Hopf-polar coordinates."""
        if self.is_fubini_study:
            return float(sum(c for c, _ in self.terms))
        prev = None
        n = 12
        while n <= 64:
            phi, wphi = _gauss_legendre(n, 0.0, np.pi / 2)      # r = tan(phi)
            eta, weta = _gauss_legendre(n, 0.0, np.pi / 2)
            xi = np.arange(2 * n) * (np.pi / n)
            wxi = np.full(2 * n, np.pi / n)
            P, E, X1, X2 = np.meshgrid(phi, eta, xi, xi, indexing="ij")
            W = (wphi[:, None, None, None] * weta[None, :, None, None]
                 * wxi[None, None, :, None] * wxi[None, None, None, :])
            r = np.tan(P)
            a = r * np.cos(E) * np.exp(1j * X1)
            b = r * np.sin(E) * np.exp(1j * X2)
            # FS r^3 dr = sin^3 cos dphi; sphere measure sin(eta) cos(eta)
            jac = FS_CONSTANT * np.sin(P) ** 3 * np.cos(P) * np.sin(E) * np.cos(E)
            val = float(np.sum(W * jac * self.weight(a, b)))
            if prev is not None and abs(val - prev) <= rtol * abs(val):
                return val
            prev = val
            n *= 2
        raise QuadratureDiverged("line-density mass did not converge")


def _gauss_legendre(n, lo, hi):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _as_points(p):
    """Real (B, 4) or (4,) chart coordinates to complex (B, 2)."""
    p = np.asarray(p)
    if np.iscomplexobj(p):
        z = np.atleast_2d(p)
        if z.shape[-1] != 2:
            raise ValidationError("complex chart points need 2 coordinates")
        return z
    r = np.atleast_2d(np.asarray(p, float))
    if r.shape[-1] != 4:
        raise ValidationError("real chart points need 4 coordinates")
    return np.stack([r[:, 0] + 1j * r[:, 1], r[:, 2] + 1j * r[:, 3]], axis=1)


def _moments(eta, z, grid):
    """(m0, m1, m2) on the pencils through the points ``z`` (B, 2)."""
    nphi, ntheta = grid
    x, y = z[:, 0:1], z[:, 1:2]
    nx = 1.0 + np.abs(x) ** 2
    center = np.conj(x) * y / nx
    c0 = 1.0 + np.abs(y) ** 2 / nx
    sigma = np.sqrt(c0 / nx)
    phi, wphi = _gauss_legendre(nphi, 0.0, np.pi / 2)
    theta = np.arange(ntheta) * (2 * np.pi / ntheta)
    rho = np.tan(phi)
    w = (rho[:, None] * np.exp(1j * theta)[None, :]).reshape(1, -1)
    # centered at the density peak the FS integrand is C c0^-3 (1 + rho^2)^-3 sigma^2,
    # and rho = tan(phi) turns (1 + rho^2)^-3 rho drho into sin(phi) cos(phi)^3 dphi
    weight = (wphi[:, None] * (2 * np.pi / ntheta) * np.sin(phi)[:, None] * np.cos(phi)[:, None] ** 3
              * np.ones(ntheta)[None, :]).reshape(1, -1)
    a = center + sigma * w
    b = y - a * x
    dens = FS_CONSTANT * c0 ** -3 * sigma ** 2 * weight
    if eta.is_fubini_study:
        dens = dens * sum(c for c, _ in eta.terms)
    else:
        dens = dens * eta.weight(a, b)
    m0 = dens.sum(axis=1)
    m1 = (dens * a).sum(axis=1)
    m2 = (dens * np.abs(a) ** 2).sum(axis=1)
    return m0, m1, m2


def _hermitian(m0, m1, m2):
    H = np.empty(m0.shape + (2, 2), dtype=complex)
    H[:, 0, 0] = m2
    H[:, 0, 1] = -m1
    H[:, 1, 0] = -np.conj(m1)
    H[:, 1, 1] = m0
    return H


def hermitian_to_real(H):
    """Real antisymmetric matrices ``M[a, b] = R(E_a, E_b)``."""
    return -np.imag(np.einsum("aj,...jk,ck->...ac", _E, H, np.conj(_E)))


BATCH_NODES = 2 ** 21   # points x quadrature nodes evaluated at once


def _radon_batch(eta, z, grid):
    step = max(1, BATCH_NODES // (grid[0] * grid[1]))
    parts = [hermitian_to_real(_hermitian(*_moments(eta, z[k:k + step], grid)))
             for k in range(0, len(z), step)]
    return np.concatenate(parts) if parts else np.zeros((0, 4, 4))


def adaptive_grid(eta, z, rtol=QUAD_RTOL):
    """Smallest doubled (n_phi, n_theta) grid meeting ``rtol`` at all points ``z``."""
    z = _as_points(z)
    n = QUAD_START
    prev = _radon_batch(eta, z, (n, n))
    while n < QUAD_MAX:
        n *= 2
        cur = _radon_batch(eta, z, (n, n))
        scale = np.max(np.abs(cur), axis=(1, 2))
        if np.all(np.max(np.abs(cur - prev), axis=(1, 2)) <= rtol * scale):
            return (n, n)
        prev = cur
    raise QuadratureDiverged(f"pencil quadrature did not reach rtol {rtol:g} with {QUAD_MAX} nodes")


def pointwise_radon(eta, p, quad=None, rtol=QUAD_RTOL):
    """The 4x4 real matrix of ``R(eta)`` at ``p`` (or a stack for several points)."""
    z = _as_points(p)
    grid = adaptive_grid(eta, z, rtol) if quad is None else tuple(quad)
    M = _radon_batch(eta, z, grid)
    return M[0] if np.ndim(p) == 1 else M


def pfaffian(M):
    M = np.asarray(M)
    return M[..., 0, 1] * M[..., 2, 3] - M[..., 0, 2] * M[..., 1, 3] + M[..., 0, 3] * M[..., 1, 2]


def volume_ratio(M):
    """``(R ^ R) / dV``."""
    return 2.0 * pfaffian(M)


def evaluate_on_plane(M, u, v):
    return float(np.asarray(u, float) @ M @ np.asarray(v, float))


def line_tangent_plane(a):
    """Complex-oriented real basis of the direction of lines with slope ``a``."""
    a = complex(a)
    return np.array([1.0, 0.0, a.real, a.imag]), np.array([0.0, 1.0, -a.imag, a.real])


_TRIPLES = tuple(itertools.combinations(range(4), 3))


def closedness_check(eta, points, h=1e-3, rtol=QUAD_RTOL):
    """Max relative residual of the central-difference exterior derivative."""
    pts = np.atleast_2d(np.asarray(points, float))
    grid = adaptive_grid(eta, pts, rtol)
    grid = (2 * grid[0], 2 * grid[1])
    stencil = []
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        stencil += [pts + e, pts - e]
    M = _radon_batch(eta, _as_points(np.concatenate(stencil)), grid).reshape(8, len(pts), 4, 4)
    D = np.stack([(M[2 * k] - M[2 * k + 1]) / (2 * h) for k in range(4)])  # D[k] = d/dp_k
    center = _radon_batch(eta, _as_points(pts), grid)
    scale = np.max(np.abs(center), axis=(1, 2))
    per_point = np.zeros(len(pts))
    for a, b, c in _TRIPLES:
        r = np.abs(D[a][:, b, c] + D[b][:, c, a] + D[c][:, a, b])
        per_point = np.maximum(per_point, r / scale)
    return {"residual": float(np.max(per_point)), "per_point": per_point.tolist(),
            "h": h, "grid": list(grid), "rtol": rtol, "points": len(pts)}


# ---------------------------------------------------------------------------
# test surfaces

@dataclass(frozen=True)
class AlgebraicLine:
    coords: np.ndarray   # homogeneous line [l0 : l1 : l2] in [x : y : 1]

    def __post_init__(self):
        c = np.asarray(getattr(self.coords, "coords", self.coords), complex)
        if c.shape != (3,) or np.max(np.abs(c)) == 0:
            raise DegenerateSurface("a line needs three coordinates, not all zero")
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True)
class AlgebraicConic:
    matrix: np.ndarray

    def __post_init__(self):
        Q = np.asarray(getattr(self.matrix, "matrix", self.matrix), complex)
        if Q.shape != (3, 3):
            raise DegenerateSurface("a conic needs a 3x3 matrix")
        Q = 0.5 * (Q + Q.T)
        if abs(np.linalg.det(Q)) < 1e-12 * np.max(np.abs(Q)) ** 3:
            raise DegenerateSurface("conic is singular")
        object.__setattr__(self, "matrix", Q)


@dataclass(frozen=True)
class TriangulatedPatch:
    triangles: np.ndarray   # (T, 3, 4)

    def __post_init__(self):
        t = np.array(self.triangles, dtype=float).reshape(-1, 3, 4)
        if t.size:
            e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
            gram = (np.sum(e1 * e1, 1) * np.sum(e2 * e2, 1) - np.sum(e1 * e2, 1) ** 2)
            area = 0.5 * np.sqrt(np.maximum(gram, 0.0))
            if np.any(area <= 1e-12):
                raise DegenerateSurface(f"triangle {int(np.argmin(area))} has area <= 1e-12")
        t.setflags(write=False)
        object.__setattr__(self, "triangles", t)

    def __add__(self, other):
        return TriangulatedPatch(np.concatenate([self.triangles, other.triangles]))


def line_disk_patch(slope, intercept, radius, segments=64, theta=(0.0, 2 * np.pi), center=0.0):
    """Fan triangulation of ``{(x, slope x + intercept): |x - center| <= radius}``."""
    a, b, c = complex(slope), complex(intercept), complex(center)
    ang = np.linspace(theta[0], theta[1], segments + 1)
    xs = c + radius * np.exp(1j * ang)

    def vert(x):
        y = a * x + b
        return [x.real, x.imag, y.real, y.imag]

    tris = [[vert(c), vert(xs[k]), vert(xs[k + 1])] for k in range(segments)]
    return TriangulatedPatch(np.array(tris))


def disk_patch_fs_area(radius):
    """Exact FS measure of lines meeting a disk of radius r on a line through the origin."""
    return radius ** 2 / (1.0 + radius ** 2)


def patch_radon_integral(eta, patch, order=8, rtol=QUAD_RTOL):
    """``int_patch R(eta)`` by a collapsed Gauss rule on each triangle."""
    g, w = _gauss_legendre(order, 0.0, 1.0)
    U, V = np.meshgrid(g, g, indexing="ij")
    W = np.outer(w, w)
    # Duffy square -> triangle: t = u (1 - v), s = u v, jacobian u
    t, s = (U * (1 - V)).ravel(), (U * V).ravel()
    jw = (W * U).ravel()
    tri = patch.triangles
    e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    pts = tri[:, 0][:, None, :] + t[None, :, None] * e1[:, None, :] + s[None, :, None] * e2[:, None, :]
    flat = pts.reshape(-1, 4)
    grid = adaptive_grid(eta, flat[:: max(1, len(flat) // 64)], rtol)
    M = _radon_batch(eta, _as_points(flat), grid).reshape(len(tri), len(t), 4, 4)
    vals = np.einsum("ta,tqab,tb->tq", e1, M, e2)
    return float(math.fsum((vals * jw[None, :]).ravel()))


# ---------------------------------------------------------------------------
# Crofton Monte Carlo

SHARD = 10_000
VERTICAL_REJECT = 1e-8
DEADBAND = 1e-10
DEADBAND_LIMIT = 0.01


def sample_fs_lines(rng, n):
    """FS-distributed lines as ``(a, b)`` plus the count of rejected near-vertical draws."""
    v = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    A, B, C = v[:, 0], v[:, 1], v[:, 2]
    ok = np.abs(B) >= VERTICAL_REJECT
    return -A[ok] / B[ok], -C[ok] / B[ok], int(np.sum(~ok))


def _counts_line(surface, a, b):
    # sampled line: a x - y + b = 0, i.e. [a : -1 : b]
    lam = np.stack([a, -np.ones_like(a), b], axis=1)
    cross = np.cross(lam, surface.coords[None, :])
    same = np.max(np.abs(cross), axis=1) < DEADBAND * np.linalg.norm(lam, axis=1)
    return np.where(same, 0.0, 1.0), same


def _counts_conic(surface, a, b):
    Q = surface.matrix
    # points of the sampled line: p(s, t) = s (0, b, 1) + t (1, a, 0)
    p = np.stack([np.zeros_like(a), b, np.ones_like(a)], axis=1)
    q = np.stack([np.ones_like(a), a, np.zeros_like(a)], axis=1)
    A = np.einsum("ni,ij,nj->n", p, Q, p)
    Bc = np.einsum("ni,ij,nj->n", p, Q, q)
    C = np.einsum("ni,ij,nj->n", q, Q, q)
    disc = Bc * Bc - A * C
    scale = np.maximum.reduce([np.abs(A), np.abs(Bc), np.abs(C)]) ** 2
    tangent = np.abs(disc) < DEADBAND * np.maximum(scale, 1e-300)
    # over C a non-tangent line meets a smooth conic twice
    return np.where(tangent, 1.0, 2.0), tangent


def _counts_patch(surface, a, b):
    tri = surface.triangles
    zx = tri[:, :, 0] + 1j * tri[:, :, 1]     # (T, 3)
    zy = tri[:, :, 2] + 1j * tri[:, :, 3]
    ex = zx[:, 1:] - zx[:, :1]
    ey = zy[:, 1:] - zy[:, :1]
    a_ = a[:, None]
    c1 = ey[None, :, 0] - a_ * ex[None, :, 0]
    c2 = ey[None, :, 1] - a_ * ex[None, :, 1]
    r = a_ * zx[None, :, 0] + b[:, None] - zy[None, :, 0]
    den = np.imag(np.conj(c1) * c2)
    nonsing = np.abs(den) >= DEADBAND * np.abs(c1) * np.abs(c2)
    safe = np.where(nonsing, den, 1.0)
    t = -np.imag(np.conj(c2) * r) / safe
    s = np.imag(np.conj(c1) * r) / safe
    inside = (t >= 0) & (s >= 0) & (t + s <= 1) & nonsing
    edge = nonsing & (np.minimum.reduce([np.abs(t), np.abs(s), np.abs(1 - t - s)]) < DEADBAND)
    sign = np.sign(den)
    counts = np.sum(np.where(inside, sign, 0.0), axis=1)
    dead = np.any(~nonsing, axis=1) | np.any(edge & inside, axis=1)
    return counts, dead


def _count(surface, a, b):
    if isinstance(surface, AlgebraicLine):
        return _counts_line(surface, a, b)
    if isinstance(surface, AlgebraicConic):
        return _counts_conic(surface, a, b)
    if isinstance(surface, TriangulatedPatch):
        if len(surface.triangles) == 0:
            return np.zeros_like(a.real), np.zeros(a.shape, bool)
        return _counts_patch(surface, a, b)
    raise DegenerateSurface(f"unsupported surface type {type(surface).__name__}")


def _shards(n, seed):
    sizes = [SHARD] * (n // SHARD) + ([n % SHARD] if n % SHARD else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(sizes, seqs))


def _summary(values, rejected, dead, n):
    m = len(values)
    mean = math.fsum(values) / m
    var = math.fsum((values - mean) ** 2) / (m - 1)
    return {"estimate": mean, "stderr": math.sqrt(var / m), "samples": n, "accepted": m,
            "rejected_vertical": rejected, "deadband": dead}


def _weighted_counts(eta, surfaces, n, seed):
    if n < 1000:
        raise ValidationError("crofton_mc needs at least 1000 samples")
    per = [[] for _ in surfaces]
    dead = [0 for _ in surfaces]
    rejected = 0
    for size, ss in _shards(n, seed):
        a, b, rej = sample_fs_lines(np.random.default_rng(ss), size)
        rejected += rej
        w = None if eta.terms == ((1.0, None),) else eta.weight(a, b)
        for k, surf in enumerate(surfaces):
            c, d = _count(surf, a, b)
            dead[k] += int(np.sum(d))
            per[k].append(c if w is None else c * w)
    if rejected:
        log.info("rejected %d near-vertical line samples", rejected)
    out = []
    for k in range(len(surfaces)):
        if dead[k] > DEADBAND_LIMIT * n:
            raise NonTransverseExcess(f"{dead[k]} of {n} samples met the tolerance dead-band")
        out.append(np.concatenate(per[k]))
    return out, rejected, dead


def crofton_mc(eta, surface, n, seed):
    """Monte-Carlo mean of signed intersection counts with lines drawn from ``eta``."""
    (vals,), rej, (dead,) = _weighted_counts(eta, [surface], n, seed)
    res = _summary(vals, rej, dead, n)
    res.update({"seed": seed, "deadband_tol": DEADBAND, "vertical_reject": VERTICAL_REJECT})
    return res


def crofton_additivity(eta, whole, part1, part2, n, seed, nsigma=3.0):
    """Compare the estimate on ``whole`` with the sum over two parts (common random numbers)."""
    vals, rej, dead = _weighted_counts(eta, [whole, part1, part2], n, seed)
    s = [_summary(v, rej, d, n) for v, d in zip(vals, dead)]
    diff = s[0]["estimate"] - s[1]["estimate"] - s[2]["estimate"]
    combined = math.sqrt(sum(x["stderr"] ** 2 for x in s))
    return {"whole": s[0], "part1": s[1], "part2": s[2], "difference": diff,
            "combined_stderr": combined, "nsigma": nsigma,
            "additive": bool(abs(diff) <= nsigma * combined + 1e-12), "seed": seed}


# ---------------------------------------------------------------------------
# patch file: "triangle" followed by 12 reals (x1 x2 y1 y2 per vertex)

def format_patch(patch):
    rows = ["triangle " + " ".join(f"{v:.17g}" for v in tri.ravel()) for tri in patch.triangles]
    return "\n".join(rows) + "\n"


def parse_patch(text):
    tris = []
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "triangle" or len(parts) != 13:
            raise ValidationError(f"line {k}: expected 'triangle' and 12 numbers")
        try:
            tris.append([float(p) for p in parts[1:]])
        except ValueError:
            raise ValidationError(f"line {k}: non-numeric entry") from None
    return TriangulatedPatch(np.array(tris).reshape(-1, 3, 4))
