"""SVG figures for Poncelet orbits, regularity scans and plane fields."""

from __future__ import annotations

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from .errors import UnplottableResult

STYLE = {
    "svg.hashsalt": "projplane",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
}
VERTEX_COLOR = "#1f4e79"
EDGE_COLOR = "#b5651d"
POLY_COLOR = "#2e7d32"
MAX_SCATTER = 4000


def _save(fig, path):
    with rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})


def _conic_curve(conic, samples=400):
    from .poncelet import circle_congruence

    M = circle_congruence(conic)
    th = np.linspace(0, 2 * np.pi, samples)
    pts = np.linalg.solve(M, np.stack([np.cos(th), np.sin(th), np.ones_like(th)]))
    if np.any(np.abs(pts[2]) < 1e-9 * np.max(np.abs(pts))):
        raise UnplottableResult("conic meets the line at infinity")
    return pts[0] / pts[2], pts[1] / pts[2]


def plot_poncelet(QE, QV, states, path, title=None):
    """Conics plus the Poncelet polygon through the orbit's vertices."""
    if not states:
        raise UnplottableResult("empty orbit")
    if not (QE.is_real and QV.is_real and all(s.is_real for s in states)):
        raise UnplottableResult("only real orbits can be drawn")
    P = np.array([s.p.coords for s in states], dtype=float)
    if np.any(np.abs(P[:, 2]) < 1e-9):
        raise UnplottableResult("orbit vertex at infinity")
    xy = P[:, :2] / P[:, 2:3]
    residual = 0.0
    for s in states:
        lam = np.asarray(s.lam.coords, float)
        lam = lam / np.linalg.norm(lam)
        residual = max(residual, abs(lam @ QE.adj @ lam))
    with rc_context(STYLE):
        fig = Figure(figsize=(4.5, 4.5))
        ax = fig.add_subplot()
        ax.plot(*_conic_curve(QV), color=VERTEX_COLOR, label="vertex conic")
        ax.plot(*_conic_curve(QE), color=EDGE_COLOR, linestyle="--", label="edge conic")
        if len(xy) > 1:
            ax.plot(xy[:, 0], xy[:, 1], color=POLY_COLOR, linewidth=0.8, marker="o",
                    markersize=2.5, label=f"polygon ({len(xy) - 1} edges)")
        else:
            ax.plot(xy[:, 0], xy[:, 1], "o", color=POLY_COLOR)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_title(title or "Poncelet orbit")
        ax.text(0.02, 0.02, f"max tangency residual {residual:.2e}", transform=ax.transAxes, fontsize=7)
        ax.legend(loc="upper right", fontsize=7, frameon=False)
        _save(fig, path)
    return {"path": str(path), "edges": len(xy) - 1, "tangency_residual": residual}


def plot_margin_slice(scan, margins, path):
    """Heatmap of margins over the first two variables; other variables at mid-grid."""
    counts = scan["grid"]
    if len(counts) < 2:
        raise UnplottableResult("need at least two scan axes")
    M = np.asarray(margins).reshape(counts)
    index = tuple([slice(None), slice(None)] + [c // 2 for c in counts[2:]])
    sl = M[index]
    names = scan["variables"]
    box = scan["box"]
    with rc_context(STYLE):
        fig = Figure(figsize=(4.5, 3.8))
        ax = fig.add_subplot()
        ext = [box[names[1]][0], box[names[1]][1], box[names[0]][0], box[names[0]][1]]
        im = ax.imshow(sl, origin="lower", extent=ext, aspect="auto", cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax, label="regularity margin")
        ax.set_xlabel(names[1])
        ax.set_ylabel(names[0])
        ax.set_title("margin slice")
        _save(fig, path)
    return {"path": str(path), "slice_shape": list(sl.shape)}


def plot_lipschitz(field, path):
    """Scatter of pairwise sphere distances, source against image."""
    from .gw import _pair_distances

    if len(field) < 2:
        raise UnplottableResult("need at least two samples")
    iu = np.triu_indices(len(field), 1)
    if len(iu[0]) > MAX_SCATTER:
        keep = np.linspace(0, len(iu[0]) - 1, MAX_SCATTER).astype(int)
        iu = (iu[0][keep], iu[1][keep])
    dy = _pair_distances(field.yminus)[iu]
    dx = _pair_distances(field.xplus)[iu]
    with rc_context(STYLE):
        fig = Figure(figsize=(4.2, 3.8))
        ax = fig.add_subplot()
        ax.plot(dy, dx, ".", markersize=1.5, color=VERTEX_COLOR)
        ax.plot([0, np.pi], [0, np.pi], color="0.6", linewidth=0.6, label="L = 1")
        ax.set_xlabel("distance on the anti-self-dual sphere")
        ax.set_ylabel("distance on the self-dual sphere")
        ax.legend(fontsize=7, frameon=False)
        _save(fig, path)
    return {"path": str(path), "pairs": int(len(dy))}
