"""Tableaux, trialities and the algebras they determine.

A tableau is a real bilinear map ``t: U x V -> W`` stored as a 3-index array
``entries[mu, nu, sigma]`` with ``t(u, v)^mu = entries[mu, nu, sigma] u^nu v^sigma``.
It is a triality when the dimensions agree and every contraction
``t_u = t(u, .)`` is invertible for ``u != 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import BadDimension, Degenerate, NotSquare, SingularMatrix, ValidationError

TRIALITY_DIMS = (1, 2, 4, 8)
_COND_LIMIT = 1e12

# sphere search for n in {4, 8}
SEARCH_POINTS_LOG2 = 13
SEARCH_STARTS = 16
SEARCH_STEPS = 20


@dataclass(frozen=True, eq=False)
class Tableau3:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 3 or 0 in arr.shape:
            raise ValidationError(f"tableau needs a nonempty 3-index array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("tableau entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dims(self):
        """``(nU, nV, nW)``."""
        nw, nu, nv = self.entries.shape
        return nu, nv, nw

    @property
    def square(self):
        return len(set(self.entries.shape)) == 1

    @property
    def n(self):
        if not self.square:
            raise NotSquare(f"tableau dims {self.dims} are not all equal")
        return self.entries.shape[0]

    def contract_u(self, u):
        """Matrix of ``t_u: V -> W``."""
        return np.einsum("mns,n->ms", self.entries, np.asarray(u, dtype=float))

    def contract_v(self, v):
        """Matrix of ``u -> t(u, v)``."""
        return np.einsum("mns,s->mn", self.entries, np.asarray(v, dtype=float))

    def __call__(self, u, v):
        return np.einsum("mns,n,s->m", self.entries, np.asarray(u, float), np.asarray(v, float))

    def allclose(self, other, atol=1e-12):
        return (self.entries.shape == other.entries.shape
                and np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))

    def __eq__(self, other):
        if not isinstance(other, Tableau3):
            return NotImplemented
        return self.entries.shape == other.entries.shape and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))


# ---------------------------------------------------------------------------
# classical algebras

def cayley_dickson_product(a, b):
    """Product in the 2^k-dimensional Cayley-Dickson algebra.

    Uses ``(p, q)(r, s) = (pr - s* q, s p + q r*)`` so that doubling the
    reals gives C, C gives H with basis (1, i, j, k) and ``ij = k``, and H
    gives the octonions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    if n == 1:
        return a * b
    h = n // 2
    p, q = a[:h], a[h:]
    r, s = b[:h], b[h:]
    return np.concatenate([
        cayley_dickson_product(p, r) - cayley_dickson_product(_conj(s), q),
        cayley_dickson_product(s, p) + cayley_dickson_product(q, _conj(r)),
    ])


def _conj(a):
    out = -np.asarray(a, dtype=float)
    out[0] = -out[0]
    return out


_KIND_DIMS = {"R": 1, "C": 2, "H": 4, "O": 8}


def multiplication_table(kind):
    """``table[mu, a, b]`` = mu-th coordinate of ``e_a e_b``."""
    try:
        n = _KIND_DIMS[kind]
    except KeyError:
        raise ValidationError(f"unknown algebra kind {kind!r}; expected one of R, C, H, O") from None
    eye = np.eye(n)
    table = np.empty((n, n, n))
    for a in range(n):
        for b in range(n):
            table[:, a, b] = cayley_dickson_product(eye[a], eye[b])
    return table


def classical_tableau(kind):
    """Right multiplication ``t_u(v) = v u`` of R, C, H or O."""
    table = multiplication_table(kind)
    # t[mu, nu, sigma] = (e_sigma e_nu)^mu
    return Tableau3(np.transpose(table, (0, 2, 1)))


def componentwise_tableau(n=2):
    """``t(u, v) = (u_0 v_0, ..., u_{n-1} v_{n-1})``; full of zero divisors."""
    e = np.zeros((n, n, n))
    for i in range(n):
        e[i, i, i] = 1.0
    return Tableau3(e)


# ---------------------------------------------------------------------------
# triality test

@dataclass(frozen=True)
class TrialityResult:
    verdict: bool
    margin: float
    witness: np.ndarray | None
    method: str


def _check_triality_dims(t):
    if not t.square:
        raise NotSquare(f"tableau dims {t.dims} are not all equal")
    n = t.n
    if n not in TRIALITY_DIMS:
        raise BadDimension(f"dimension {n} not in {TRIALITY_DIMS}")
    return n


def _margin_2d(t):
    # det t_u = A u0^2 + B u0 u1 + C u1^2
    T0, T1 = t.entries[:, 0, :], t.entries[:, 1, :]
    A = np.linalg.det(T0)
    C = np.linalg.det(T1)
    B = np.linalg.det(T0 + T1) - A - C
    S = np.array([[A, B / 2], [B / 2, C]])
    lam, vec = np.linalg.eigh(S)
    if lam[0] * lam[1] > 0:
        k = int(np.argmin(np.abs(lam)))
        return float(np.sqrt(abs(lam[k]))), vec[:, k]
    scale = max(abs(A), abs(B), abs(C), 1e-300)
    if abs(A) <= 1e-14 * scale:
        return 0.0, np.array([1.0, 0.0])
    if abs(C) <= 1e-14 * scale:
        return 0.0, np.array([0.0, 1.0])
    span = lam[1] - lam[0]
    u = np.sqrt(lam[1] / span) * vec[:, 0] + np.sqrt(-lam[0] / span) * vec[:, 1]
    return 0.0, u / np.linalg.norm(u)


def sphere_points(n, log2=SEARCH_POINTS_LOG2):
    """Deterministic low-discrepancy points on the unit sphere in R^n."""
    sob = qmc.Sobol(d=n, scramble=False).random_base2(m=log2)
    sob = (sob + 0.5 / 2 ** log2) % 1.0
    g = ndtri(np.clip(sob, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _logdet(t, u):
    sign, logabs = np.linalg.slogdet(np.einsum("mns,...n->...ms", t.entries, u))
    return np.where(sign == 0, -np.inf, logabs)


def _descend(t, u, steps=SEARCH_STEPS):
    """Projected gradient descent of log|det t_u| on the sphere."""
    n = u.shape[0]
    f = _logdet(t, u)
    step = 0.1
    for _ in range(steps):
        if not np.isfinite(f):
            break
        tu = t.contract_u(u)
        inv = np.linalg.inv(tu)
        g = np.einsum("sm,mns->n", inv, t.entries)
        g -= (g @ u) * u
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            break
        while step > 1e-12:
            cand = u - step * g / gn
            cand /= np.linalg.norm(cand)
            fc = _logdet(t, cand)
            if fc < f - 1e-4 * step * gn:
                u, f = cand, fc
                step *= 2.0
                break
            step *= 0.5
        else:
            break
    assert u.shape[0] == n
    return u, f


def _sign_change_root(t, pts, signs, logs):
    """Bisect along a great-circle arc between points of opposite det sign."""
    pos = np.flatnonzero(signs > 0)
    neg = np.flatnonzero(signs < 0)
    a = pts[pos[np.argmin(logs[pos])]]
    dots = pts[neg] @ a
    b = pts[neg[np.argmax(dots)]]
    if dots.max() < -1 + 1e-9:
        raise Degenerate("sign change only between antipodal samples")
    sa = 1.0
    for _ in range(200):
        m = a + b
        nm = np.linalg.norm(m)
        if nm < 1e-300:
            break
        m /= nm
        sm = np.sign(np.linalg.det(t.contract_u(m)))
        if sm == 0:
            return m
        if sm == sa:
            a = m
        else:
            b = m
        if np.linalg.norm(a - b) < 1e-15:
            break
    return a


def is_triality(t, tol=1e-9):
    """Decide whether every ``t_u`` with ``u != 0`` is invertible.

    The margin is ``min |det t_u|^(1/n)`` over unit ``u``.  It is exact for
    ``n <= 2``; for ``n`` in {4, 8} it comes from a Sobol sphere grid refined by
    projected gradient descent, and the returned witness attains it.
    """
    n = _check_triality_dims(t)
    if n == 1:
        margin = abs(float(t.entries[0, 0, 0]))
        return TrialityResult(margin > tol, margin, np.array([1.0]), "exact")
    if n == 2:
        margin, witness = _margin_2d(t)
        return TrialityResult(margin > tol, margin, witness, "exact")

    pts = sphere_points(n)
    signs, logs = np.linalg.slogdet(np.einsum("mns,bn->bms", t.entries, pts))
    logs = np.where(signs == 0, -np.inf, logs)
    if np.any(signs > 0) and np.any(signs < 0):
        # det changes sign on the connected sphere, so it vanishes somewhere
        return TrialityResult(False, 0.0, _sign_change_root(t, pts, signs, logs), "sign-change")
    order = np.argsort(logs)[:SEARCH_STARTS]
    best_u, best_f = pts[order[0]], logs[order[0]]
    if np.isfinite(best_f):
        for idx in order:
            u, f = _descend(t, pts[idx].copy())
            if f < best_f:
                best_u, best_f = u, f
    margin = float(np.exp(best_f / n)) if np.isfinite(best_f) else 0.0
    return TrialityResult(margin > tol, margin, best_u, "sphere-search")


# ---------------------------------------------------------------------------
# tableau transformations

def dual_tableau(t):
    """``t*(v, u) = t(u, v)``."""
    return Tableau3(np.transpose(t.entries, (0, 2, 1)))


def _checked_inverse(g, name):
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError(f"{name} must be a square matrix")
    if not np.all(np.isfinite(g)) or np.linalg.cond(g) > _COND_LIMIT:
        raise SingularMatrix(f"{name} is not invertible")
    return np.linalg.inv(g)


def isotopy_transform(t, gU, gV, gW):
    """``(g t)(u, v) = gW t(gU^-1 u, gV^-1 v)``."""
    nu, nv, nw = t.dims
    gUi = _checked_inverse(gU, "gU")
    gVi = _checked_inverse(gV, "gV")
    gW = np.asarray(gW, dtype=float)
    _checked_inverse(gW, "gW")
    if gUi.shape[0] != nu or gVi.shape[0] != nv or gW.shape[0] != nw:
        raise ValidationError("isotopy matrix sizes do not match tableau dims")
    return Tableau3(np.einsum("ma,abc,bn,cs->mns", gW, t.entries, gUi, gVi))


# ---------------------------------------------------------------------------
# triality algebras

@dataclass(frozen=True, eq=False)
class TriAlgebra:
    """Unital algebra on V built from a triality and base vectors.

    ``epsV`` is ``v -> t(eU, v)`` and ``epsU`` is ``u -> epsV^-1 t(u, eV)``,
    both viewed as maps into V, so the product
    ``v0 v1 = epsV^-1 t(epsU^-1 v0, v1)`` has identity ``epsU(eU) = eV``.
    """

    tableau: Tableau3
    eU: np.ndarray
    eV: np.ndarray
    epsU: np.ndarray
    epsV: np.ndarray
    identity: np.ndarray
    _epsU_inv: np.ndarray = field(repr=False)
    _epsV_inv: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.tableau.n

    def product(self, v0, v1):
        u = self._epsU_inv @ np.asarray(v0, dtype=float)
        return self._epsV_inv @ self.tableau(u, v1)

    def left_mult(self, v):
        """Matrix of ``L_v: w -> v w``."""
        u = self._epsU_inv @ np.asarray(v, dtype=float)
        return self._epsV_inv @ self.tableau.contract_u(u)

    def real_functional(self):
        """Row vector ``c`` with ``real_part(v) = c . v``."""
        # tr(t_u) is linear in u: tr(t_u) = sum_nu u^nu tr(T_nu)
        traces = np.einsum("mnm->n", self.tableau.entries)
        return traces @ self._epsU_inv / self.n


def triality_algebra(t, eU, eV, check_tol=1e-9):
    n = t.n
    eU = np.asarray(eU, dtype=float).reshape(n)
    eV = np.asarray(eV, dtype=float).reshape(n)
    if not np.any(eU) or not np.any(eV):
        raise ValidationError("base vectors must be nonzero")
    epsV = t.contract_u(eU)
    epsV_inv = _checked_inverse(epsV, "epsV")
    epsU = epsV_inv @ t.contract_v(eV)
    epsU_inv = _checked_inverse(epsU, "epsU")
    identity = epsU @ eU
    alg = TriAlgebra(t, eU, eV, epsU, epsV, identity, epsU_inv, epsV_inv)
    scale = max(1.0, float(np.abs(t.entries).max()))
    for v in np.eye(n):
        if not (np.allclose(alg.product(identity, v), v, atol=check_tol * scale)
                and np.allclose(alg.product(v, identity), v, atol=check_tol * scale)):
            raise AssertionError("identity law failed for the constructed triality algebra")
    return alg


def real_part(a, v):
    """``tr(t_u) / n`` where ``epsU(u) = v``."""
    return float(a.real_functional() @ np.asarray(v, dtype=float))


def imaginary_part(a, v):
    v = np.asarray(v, dtype=float)
    return v - real_part(a, v) * a.identity


def imaginary_basis(a):
    """Orthonormal basis of the kernel of the real part."""
    c = a.real_functional()
    if np.linalg.norm(c) == 0:
        return np.eye(a.n)
    _, _, vt = np.linalg.svd(c.reshape(1, -1))
    return vt[1:]


def _scalar_residual(m):
    n = m.shape[0]
    c = np.trace(m) / n
    return float(np.linalg.norm(m - c * np.eye(n)))


def classical_residuals(a):
    """Relative off-scalar residuals of ``L_x^2`` and of polarized pairs."""
    basis = imaginary_basis(a)
    L = [a.left_mult(x) for x in basis]
    out = []
    for i, Li in enumerate(L):
        out.append(_scalar_residual(Li @ Li) / max(np.linalg.norm(Li) ** 2, 1e-300))
        for Lj in L[i + 1:]:
            scale = max(np.linalg.norm(Li) * np.linalg.norm(Lj), 1e-300)
            out.append(_scalar_residual(Li @ Lj + Lj @ Li) / scale)
    return out


def is_classical(a, tol=1e-8):
    return all(r < tol for r in classical_residuals(a))


# ---------------------------------------------------------------------------
# integral elements

@dataclass(frozen=True)
class IntegralElementSpace:
    dimension: int
    basis: list
    residual: float


def integral_operator(t):
    """Matrix of ``p -> t^mu_{nu s} p^s_tau - t^mu_{tau s} p^s_nu``.

    Columns are indexed by ``p.ravel()`` (row ``s``, column ``tau``); rows by
    ``(mu, nu, tau)``.
    """
    n = t.n
    e = t.entries
    eye = np.eye(n)
    # d/dp[a,b] of sum_s e[m,nu,s] p[s,tau] = e[m,nu,a] delta[b,tau]
    first = np.einsum("mna,bt->mntab", e, eye)
    second = np.einsum("mta,bn->mntab", e, eye)
    return (first - second).reshape(n ** 3, n * n)


def integral_elements(t, rel_threshold=1e-10):
    n = t.n
    op = integral_operator(t)
    _, s, vt = np.linalg.svd(op)
    smax = s[0] if s.size else 0.0
    if smax == 0:
        null = vt
    else:
        rank = int(np.sum(s > rel_threshold * smax))
        null = vt[rank:]
    basis = [row.reshape(n, n) for row in null]
    residual = max((float(np.abs(op @ p.ravel()).max()) for p in basis), default=0.0)
    return IntegralElementSpace(len(basis), basis, residual)


# ---------------------------------------------------------------------------
# two-dimensional normal form

@dataclass(frozen=True)
class NormalForm2D:
    a: np.ndarray
    gU: np.ndarray
    gV: np.ndarray
    gW: np.ndarray
    tableau: Tableau3


def normal_form_2d(t):
    """Isotopy taking a 2-dimensional triality to ``t(u, e0) = u, t(u, e1) = a u``.

    The remaining freedom in the second slot is used to normalize ``a`` to
    trace 0 and determinant 1, so ``a^2 = -Id``.
    """
    if t.n != 2:
        raise BadDimension("normal_form_2d needs a 2-dimensional tableau")
    T = [t.contract_v(e) for e in np.eye(2)]
    conds = [np.linalg.cond(m) for m in T]
    k = int(np.argmin(conds))
    if conds[k] > _COND_LIMIT:
        raise Degenerate("t(., e) is singular for every basis vector e")
    w0 = np.eye(2)[k]
    other = np.eye(2)[1 - k]
    T0inv = np.linalg.inv(T[k])
    a0 = T0inv @ T[1 - k]
    lam = np.linalg.eigvals(a0)
    p = float(lam[0].real)
    q = float(abs(lam[0].imag))
    if q < 1e-12 * max(1.0, np.abs(lam).max()):
        raise Degenerate("not a triality: t(., v) is singular for some v != 0")
    w1 = (other - p * w0) / q
    gV = np.linalg.inv(np.column_stack([w0, w1]))
    gW = T0inv
    gU = np.eye(2)
    nf = isotopy_transform(t, gU, gV, gW)
    a = nf.contract_v([0.0, 1.0])
    return NormalForm2D(a, gU, gV, gW, nf)


def normal_form_relations(a, p):
    """Residuals of the two linear relations on an integral element ``p``.

    ``p01 = a01 p10 - a00 p11`` and ``p00 = a10 p11 - a11 p10``.
    """
    r1 = p[0, 1] - (a[0, 1] * p[1, 0] - a[0, 0] * p[1, 1])
    r2 = p[0, 0] - (a[1, 0] * p[1, 1] - a[1, 1] * p[1, 0])
    return float(r1), float(r2)


# ---------------------------------------------------------------------------
# text format

def format_tableau(t):
    nu, nv, nw = t.dims
    lines = [f"dims {nw} {nu} {nv}"]
    for (mu, nu_, s), val in np.ndenumerate(t.entries):
        if val != 0:
            lines.append(f"{mu} {nu_} {s} {float(val)!r}")
    return "\n".join(lines) + "\n"


def parse_tableau(text):
    rows = [ln.split("#")[0].strip() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows or rows[0].split()[0] != "dims":
        raise ValidationError("tableau file must start with 'dims nW nU nV'")
    head = rows[0].split()
    if len(head) != 4:
        raise ValidationError("malformed dims line")
    try:
        nw, nu, nv = (int(x) for x in head[1:])
    except ValueError:
        raise ValidationError("malformed dims line") from None
    if min(nw, nu, nv) <= 0:
        raise ValidationError("dims must be positive")
    entries = np.zeros((nw, nu, nv))
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split()
        if len(parts) != 4:
            raise ValidationError(f"line {lineno}: expected 'mu nu sigma value'")
        try:
            idx = tuple(int(x) for x in parts[:3])
            val = float(parts[3])
        except ValueError:
            raise ValidationError(f"line {lineno}: bad number") from None
        if idx in seen:
            raise ValidationError(f"line {lineno}: duplicate entry {idx}")
        if not (0 <= idx[0] < nw and 0 <= idx[1] < nu and 0 <= idx[2] < nv):
            raise ValidationError(f"line {lineno}: index {idx} out of range")
        seen.add(idx)
        entries[idx] = val
    return Tableau3(entries)
