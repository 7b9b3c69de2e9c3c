"""Implicit solves, tableaux and regularity margins for charts.

A chart gives the line coordinate ``Y`` as a function of a point ``(x, y)``
and a line slope ``X``.  Solving for ``y`` yields the incidence map
``y(x, X, Y)``; its mixed second derivatives give the tableau

    t^i_jk = d2y^i/dx^j dX^k - (d2y^i/dx^j dY^l) h^l_m dy^m/dX^k

with ``h`` the inverse of ``dy/dY``.  Everything is batched over flags: the
arrays below carry a trailing (or leading, for matrices) batch axis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import NoConvergence, SingularJacobian, ValidationError
from ..triality import Tableau3
from .dsl import ChartExpr, parse_chart

CLASSICAL_COMPLEX_CHART = "dim 2\nY1 = y1 - (X1*x1 - X2*x2)\nY2 = y2 - (X1*x2 + X2*x1)\n"
COMPONENTWISE_CHART = "dim 2\nY1 = y1 - X1*x1\nY2 = y2 - X2*x2\n"


def blended_chart_text(eps):
    """Classical complex chart plus a Gaussian bump times ``X1 x1`` in ``Y1``."""
    return ("dim 2\n"
            f"Y1 = y1 - (X1*x1 - X2*x2) + {float(eps)!r}*X1*x1*exp(0 - x1*x1 - x2*x2)\n"
            "Y2 = y2 - (X1*x2 + X2*x1)\n")


NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
COND_LIMIT = 1e12
FD_STEP = 1e-4
DUAL_TOL = 1e-4
THETA_GRID = 360
GOLDEN_ITERS = 60


def _as_chart(c):
    return parse_chart(c) if isinstance(c, str) else c


def _cols(a, n):
    """Coerce an n-vector or (n, B) array to (n, B)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != n:
        raise ValidationError(f"expected {n} coordinates, got {a.shape[0]}")
    return a


# ---------------------------------------------------------------------------
# derivatives of Y

@dataclass(frozen=True)
class Derivatives:
    value: np.ndarray          # (n,)
    dY_dx: np.ndarray          # (n, n)
    dY_dy: np.ndarray
    dY_dX: np.ndarray
    hessian: np.ndarray | None  # (n, 3n, 3n), variables ordered x, y, X
    names: tuple

    def second(self, i, a, b):
        """``d2 Y_i / da db`` for 1-based ``i`` and names like ``"x1"``."""
        if self.hessian is None:
            raise ValidationError("second derivatives were not requested")
        return float(self.hessian[i - 1, self.names.index(a), self.names.index(b)])

    @property
    def gradient(self):
        return np.concatenate([self.dY_dx, self.dY_dy, self.dY_dX], axis=1)


def eval_with_derivatives(c, x, y, X, order=2):
    c = _as_chart(c)
    if order not in (1, 2):
        raise ValidationError("order must be 1 or 2")
    n = c.n
    val, grad, hess = c.jets(_cols(x, n), _cols(y, n), _cols(X, n), order)
    g = grad[..., 0]
    return Derivatives(val[:, 0], g[:, :n], g[:, n:2 * n], g[:, 2 * n:],
                       None if hess is None else hess[..., 0], tuple(c.var_names()))


def central_differences(c, x, y, X, h=1e-5):
    """Richardson-extrapolated central differences of Y: gradient and Hessian."""
    c = _as_chart(c)
    n = c.n
    m = 3 * n
    base = np.concatenate([np.asarray(v, float) for v in (x, y, X)])

    def f(z):
        return c.values(z[:n], z[n:2 * n], z[2 * n:])

    def d1(step):
        out = np.empty((n, m))
        for a in range(m):
            e = np.zeros(m)
            e[a] = step
            out[:, a] = (f(base + e) - f(base - e)) / (2 * step)
        return out

    def d2(step):
        out = np.empty((n, m, m))
        for a in range(m):
            for b in range(m):
                ea = np.zeros(m)
                eb = np.zeros(m)
                ea[a] = step
                eb[b] = step
                out[:, a, b] = (f(base + ea + eb) - f(base + ea - eb)
                                - f(base - ea + eb) + f(base - ea - eb)) / (4 * step * step)
        return out

    grad = (4 * d1(h / 2) - d1(h)) / 3
    # second differences lose more digits; use a larger base step
    h2 = max(h, 1e-3)
    hess = (4 * d2(h2 / 2) - d2(h2)) / 3
    return grad, hess


# ---------------------------------------------------------------------------
# implicit solve

def _first_order(c, x, y, X):
    """``(value, Fx, Fy, FX)`` with matrices shaped (B, n, n)."""
    n = c.n
    val, grad, _ = c.jets(x, y, X, order=1)
    g = np.moveaxis(grad, -1, 0)
    return val, g[:, :, :n], g[:, :, n:2 * n], g[:, :, 2 * n:]


def _check_jacobian(Fy, mask=None):
    cond = np.linalg.cond(Fy)
    bad = ~(cond < COND_LIMIT)
    if mask is not None:
        bad &= mask
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise SingularJacobian(f"dY/dy is singular (condition number {cond[k]:.3g})")


def _solve_batch(c, x, X, Y, guess, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    y = np.array(guess, dtype=float, copy=True)
    scale = np.maximum(1.0, np.max(np.abs(Y), axis=0))
    best = np.full(y.shape[1], np.inf)
    for _ in range(maxit + 1):
        val, _, Fy, _ = _first_order(c, x, y, X)
        G = val - Y
        res = np.max(np.abs(G), axis=0) / scale
        best = np.minimum(best, res)
        _check_jacobian(Fy)
        if np.all(res < tol):
            return y
        step = np.linalg.solve(Fy, G.T[..., None])[..., 0]
        y = y - step.T
    worst = int(np.argmax(best))
    raise NoConvergence(f"Newton did not reach residual {tol:g} in {maxit} iterations",
                        best=y[:, worst].copy(), residual=float(best[worst]))


def solve_y(c, x, X, Y, guess=None):
    """Solve ``Y(x, y, X) = Y`` for ``y`` by Newton's method."""
    c = _as_chart(c)
    n = c.n
    x, X, Y = _cols(x, n), _cols(X, n), _cols(Y, n)
    g = Y.copy() if guess is None else _cols(guess, n)
    out = _solve_batch(c, x, X, Y, g)
    return out[:, 0] if np.ndim(x) == 2 and out.shape[1] == 1 else out


# ---------------------------------------------------------------------------
# tableau

@dataclass(frozen=True)
class ChartJet:
    x: np.ndarray
    y: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    dY_dx: np.ndarray
    dY_dy: np.ndarray
    dY_dX: np.ndarray
    dy_dY: np.ndarray
    h: np.ndarray
    dy_dx: np.ndarray
    dy_dX: np.ndarray
    d2y_dxdX: np.ndarray
    d2y_dxdY: np.ndarray
    tableau: Tableau3


def _implicit_slopes(c, x, y, X):
    _, Fx, Fy, FX = _first_order(c, x, y, X)
    _check_jacobian(Fy)
    Fy_inv = np.linalg.inv(Fy)
    return -Fy_inv @ Fx, -Fy_inv @ FX, Fy_inv, (Fx, Fy, FX)


def _tableau_batch(c, x, y, X, step=FD_STEP):
    """Tableaux (B, n, n, n) and the pieces used to build them."""
    n = c.n
    Y = c.values(x, y, X)
    y_x, y_X, y_Y, (Fx, Fy, FX) = _implicit_slopes(c, x, y, X)

    def slope_x(Xp, Yp):
        yp = _solve_batch(c, x, Xp, Yp, y)
        return _implicit_slopes(c, x, yp, Xp)[0]

    def derivative(which, k):
        def d(hh):
            e = np.zeros((n, 1))
            e[k] = hh
            if which == "X":
                return (slope_x(X + e, Y) - slope_x(X - e, Y)) / (2 * hh)
            return (slope_x(X, Y + e) - slope_x(X, Y - e)) / (2 * hh)
        return (4 * d(step / 2) - d(step)) / 3

    # [B, i, j, k]: derivative of y_x[i, j] along X_k or Y_k
    d_xX = np.stack([derivative("X", k) for k in range(n)], axis=-1)
    d_xY = np.stack([derivative("Y", k) for k in range(n)], axis=-1)
    h = Fy
    t = d_xX - np.einsum("bijl,blm,bmk->bijk", d_xY, h, y_X)
    return t, dict(Y=Y, y_x=y_x, y_X=y_X, y_Y=y_Y, Fx=Fx, Fy=Fy, FX=FX, d_xX=d_xX, d_xY=d_xY)


def tableau_at(c, flag):
    """Chart jet with tableau at the flag ``(x, y, X)``."""
    c = _as_chart(c)
    n = c.n
    x, y, X = (_cols(v, n) for v in flag)
    t, p = _tableau_batch(c, x, y, X)
    return ChartJet(
        x=x[:, 0], y=y[:, 0], X=X[:, 0], Y=p["Y"][:, 0],
        dY_dx=p["Fx"][0], dY_dy=p["Fy"][0], dY_dX=p["FX"][0],
        dy_dY=p["y_Y"][0], h=p["Fy"][0], dy_dx=p["y_x"][0], dy_dX=p["y_X"][0],
        d2y_dxdX=p["d_xX"][0], d2y_dxdY=p["d_xY"][0], tableau=Tableau3(t[0]))


def _dual_tableau_batch(c, x, y, X):
    """Tableau of the dual chart, indexed [B, i, X-slot, x-slot].

    With roles swapped the solved map is ``Y(X; x, y)``, so the tableau is
    ``F_Xx - F_Xy Fy^-1 F_x`` and needs only second derivatives of the chart.
    """
    n = c.n
    _, grad, hess = c.jets(x, y, X, order=2)
    g = np.moveaxis(grad, -1, 0)
    H = np.moveaxis(hess, -1, 0)
    Fx, Fy = g[:, :, :n], g[:, :, n:2 * n]
    F_Xx = H[:, :, 2 * n:, :n]
    F_Xy = H[:, :, 2 * n:, n:2 * n]
    _check_jacobian(Fy)
    Fy_inv = np.linalg.inv(Fy)
    return F_Xx - np.einsum("bijl,blm,bmk->bijk", F_Xy, Fy_inv, Fx), Fy_inv


def dual_chart_tableau(c, flag):
    c = _as_chart(c)
    n = c.n
    x, y, X = (_cols(v, n) for v in flag)
    return Tableau3(_dual_tableau_batch(c, x, y, X)[0][0])


def _duality_deviation(t, tstar, Fy_inv):
    """Max deviation of ``t(u, v) = -Fy^-1 t*(v, u)`` per flag."""
    pred = -np.einsum("bil,blkj->bijk", Fy_inv, tstar)
    return np.max(np.abs(t - pred), axis=(1, 2, 3))


# ---------------------------------------------------------------------------
# margins

def _sv_2x2(M):
    """(sigma_min, sigma_max) of stacked 2x2 matrices."""
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    smax = 0.5 * (np.hypot(a + d, c - b) + np.hypot(a - d, b + c))
    det = np.abs(a * d - b * c)
    smin = np.where(smax > 0, det / np.where(smax > 0, smax, 1.0), 0.0)
    return smin, smax


def _contract(t, theta, slot):
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    if slot == "u":
        return np.einsum("bijk,b...j->b...ik", t, u)
    return np.einsum("bijk,b...k->b...ij", t, u)


def _optimize_circle(t, slot, which):
    """Extremize a singular value of the contraction over unit vectors in R^2.

    Returns (value, theta) per flag: a grid pass then golden-section refinement
    inside the best cell.  The grid value is kept when it is at least as good.
    """
    B = t.shape[0]
    grid = np.linspace(0.0, np.pi, THETA_GRID, endpoint=False)
    sign = 1.0 if which == "min" else -1.0
    idx = 0 if which == "min" else 1

    def f(theta):
        return sign * _sv_2x2(_contract(t, theta, slot))[idx]

    vals = f(np.broadcast_to(grid, (B, THETA_GRID)))
    k = np.argmin(vals, axis=1)
    th0 = grid[k]
    best = vals[np.arange(B), k]
    d = np.pi / THETA_GRID
    a, b = th0 - d, th0 + d
    gr = (np.sqrt(5) - 1) / 2
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1 = f(c1[:, None])[:, 0]
    f2 = f(c2[:, None])[:, 0]
    for _ in range(GOLDEN_ITERS):
        left = f1 < f2
        b = np.where(left, c2, b)
        a = np.where(left, a, c1)
        c1n = np.where(left, b - gr * (b - a), c2)
        c2n = np.where(left, c1, a + gr * (b - a))
        fnew = f(np.where(left, c1n, c2n)[:, None])[:, 0]
        f1, f2 = np.where(left, fnew, f2), np.where(left, f1, fnew)
        c1, c2 = c1n, c2n
    th_ref = 0.5 * (a + b)
    ref = f(th_ref[:, None])[:, 0]
    use = ref < best
    theta = np.where(use, th_ref, th0)
    return sign * np.where(use, ref, best), theta


def _margins(t):
    """Regularity margin, witnesses (u, v) and embedded-Gauss margin per flag."""
    B, n = t.shape[0], t.shape[1]
    if n == 1:
        m = np.abs(t[:, 0, 0, 0])
        ones = np.ones((B, 1))
        return m, ones, ones, m
    margin, theta = _optimize_circle(t, "u", "min")
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    _, _, vh = np.linalg.svd(np.einsum("bijk,bj->bik", t, u))
    v = vh[:, -1, :]
    # canonical sign: first nonzero component positive
    for w in (u, v):
        flip = np.where(np.abs(w[:, 0]) > 1e-12, w[:, 0] < 0, w[:, 1] < 0)
        w[flip] *= -1
    gauss, _ = _optimize_circle(t, "v", "max")
    return np.maximum(margin, 0.0), u, v, gauss


def regularity_margin(c, flag, return_witness=False):
    """``min |t(u, v)|`` over unit ``u, v`` at the flag."""
    c = _as_chart(c)
    t = tableau_at(c, flag).tableau.entries[None]
    m, u, v, _ = _margins(t)
    if return_witness:
        return float(m[0]), u[0], v[0]
    return float(m[0])


def embedded_gauss_margin(c, flag):
    """``max`` over unit ``Xdot`` of the operator norm of ``Xdot^k t_.k``."""
    c = _as_chart(c)
    t = tableau_at(c, flag).tableau.entries[None]
    return float(_margins(t)[3][0])


# ---------------------------------------------------------------------------
# scans

DEFAULT_BOX = (-0.5, 0.5)
SCAN_CHUNK = 4096


def _axes(n, box, grid):
    names = [f"{k}{i + 1}" for k in ("x", "y", "X") for i in range(n)]
    if box is None:
        box = {}
    if isinstance(box, (tuple, list)):
        box = {k: tuple(box) for k in ("x", "y", "X")}
    counts = [grid] * (3 * n) if np.isscalar(grid) else list(grid)
    if len(counts) != 3 * n:
        raise ValidationError(f"grid needs {3 * n} counts, got {len(counts)}")
    axes = []
    for name, cnt in zip(names, counts):
        cnt = int(cnt)
        if cnt < 2:
            raise ValidationError("grid counts must be >= 2")
        lo, hi = box.get(name, box.get(name[0], DEFAULT_BOX))
        if not lo < hi:
            raise ValidationError(f"empty range for {name}: {lo}, {hi}")
        axes.append(np.linspace(lo, hi, cnt))
    return names, axes, counts


def regularity_scan(c, box=None, grid=5, tol=1e-6, keep_margins=False):
    """Evaluate margins on a grid of flags plus the dual-tableau consistency check.

    ``box`` maps ``"x"``, ``"y"``, ``"X"`` (or individual names like ``"x1"``)
    to ``(lo, hi)``; a single pair applies to every coordinate.
    """
    c = _as_chart(c)
    n = c.n
    names, axes, counts = _axes(n, box, grid)
    pts = np.array(list(itertools.product(*axes))).T  # (3n, N)
    N = pts.shape[1]
    margins = np.empty(N)
    gauss = np.empty(N)
    dual_dev = np.empty(N)
    U = np.empty((N, n))
    V = np.empty((N, n))
    for s in range(0, N, SCAN_CHUNK):
        sl = slice(s, min(N, s + SCAN_CHUNK))
        x, y, X = pts[:n, sl], pts[n:2 * n, sl], pts[2 * n:, sl]
        t, _ = _tableau_batch(c, x, y, X)
        m, u, v, g = _margins(t)
        margins[sl], U[sl], V[sl], gauss[sl] = m, u, v, g
        tstar, Fy_inv = _dual_tableau_batch(c, x, y, X)
        dual_dev[sl] = _duality_deviation(t, tstar, Fy_inv)

    def flag_of(k):
        return {"x": pts[:n, k].tolist(), "y": pts[n:2 * n, k].tolist(), "X": pts[2 * n:, k].tolist()}

    k = int(np.argmin(margins))
    flagged = [{"flag": flag_of(i), "margin": float(margins[i]),
                "witness": {"u": U[i].tolist(), "v": V[i].tolist()}}
               for i in np.flatnonzero(margins <= tol)]
    out = {
        "n": n,
        "variables": names,
        "grid": counts,
        "box": {nm: [float(a[0]), float(a[-1])] for nm, a in zip(names, axes)},
        "tol": tol,
        "flags": N,
        "min_margin": float(margins[k]),
        "max_margin": float(np.max(margins)),
        "argmin": {"flag": flag_of(k), "margin": float(margins[k]),
                   "witness": {"u": U[k].tolist(), "v": V[k].tolist()}},
        "flagged_count": len(flagged),
        "flagged": flagged,
        "embedded_gauss_min": float(np.min(gauss)),
        "dual_max_deviation": float(np.max(dual_dev)),
        "dual_tol": DUAL_TOL,
        "dual_consistent": bool(np.max(dual_dev) < DUAL_TOL),
        "fd_step": FD_STEP,
        "newton_tol": NEWTON_TOL,
    }
    if keep_margins:
        out["margins"] = margins
    return out
