"""Command line front end: ``projplane <command> <operation> [options]``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import gw, poncelet, radon, triality
from .chart import lab
from .chart.dsl import parse_chart
from .errors import NoConvergence, NotContracting, NumericalError, ValidationError
from .projective import format_hom, parse_hom, HomLine, HomPoint
from .report import emit_report

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _vec(text, n=None):
    try:
        v = np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise ValidationError(f"bad vector {text!r}") from None
    if n is not None and v.shape != (n,):
        raise ValidationError(f"expected {n} components in {text!r}")
    return v


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# triality

def _tableau_from(args):
    if args.file:
        t = triality.parse_tableau(_read(args.file))
        source = args.file
    elif args.kind == "componentwise":
        t, source = triality.componentwise_tableau(2), "componentwise"
    else:
        t, source = triality.classical_tableau(args.kind), args.kind
    if args.perturb:
        parts = args.perturb.replace(",", " ").split()
        if len(parts) != 4:
            raise ValidationError("--perturb needs 'w u v delta'")
        e = np.array(t.entries)
        e[int(parts[0]), int(parts[1]), int(parts[2])] += float(parts[3])
        t = triality.Tableau3(e)
        source += f" perturbed {args.perturb}"
    return t, source


def _base_vectors(args, n):
    eU = _vec(args.eu, n) if args.eu else np.eye(n)[0]
    eV = _vec(args.ev, n) if args.ev else np.eye(n)[0]
    return eU, eV


def cmd_triality(args):
    t, source = _tableau_from(args)
    out = {"source": source, "dims": list(t.dims)}
    if args.op == "check":
        tol = args.tol or 1e-9
        r = triality.is_triality(t, tol)
        out.update(verdict="triality" if r.verdict else "not a triality", margin=r.margin,
                   witness=r.witness, method=r.method, tol=tol)
        return out
    if args.op == "integral-elements":
        tol = args.tol or 1e-10
        sp = triality.integral_elements(t, tol)
        out.update(dimension=sp.dimension, residual=sp.residual, basis=[b for b in sp.basis],
                   rel_threshold=tol)
        return out
    n = t.n
    eU, eV = _base_vectors(args, n)
    a = triality.triality_algebra(t, eU, eV)
    if args.op == "algebra":
        out.update(eU=eU, eV=eV, identity=a.identity, epsU=a.epsU, epsV=a.epsV,
                   real_functional=a.real_functional(), imaginary_basis=triality.imaginary_basis(a))
        return out
    tol = args.tol or 1e-8
    res = triality.classical_residuals(a)
    out.update(eU=eU, eV=eV, classical=triality.is_classical(a, tol), tol=tol,
               max_residual=max(res, default=0.0), residuals=res)
    tr = triality.is_triality(t) if n in triality.TRIALITY_DIMS else None
    if tr is not None:
        out.update(triality_margin=tr.margin)
    if n == 2:
        nf = triality.normal_form_2d(t)
        out.update(normal_form_a=nf.a)
    return out


# ---------------------------------------------------------------------------
# chart

def _chart_from(args):
    if args.file:
        return parse_chart(_read(args.file)), args.file
    texts = {"classical": lab.CLASSICAL_COMPLEX_CHART, "componentwise": lab.COMPONENTWISE_CHART,
             "blended": lab.blended_chart_text(args.eps)}
    return parse_chart(texts[args.builtin]), args.builtin if args.builtin != "blended" else f"blended eps={args.eps!r}"


def _flag(args, n):
    return tuple(_vec(v, n) if v else np.zeros(n) for v in (args.x, args.y, args.X))


def cmd_chart(args):
    c, source = _chart_from(args)
    out = {"source": source, "n": c.n, "chart": c.to_text()}
    if args.op == "scan":
        tol = args.tol if args.tol is not None else 1e-6
        box = tuple(_vec(args.box, 2)) if args.box else None
        scan = lab.regularity_scan(c, box=box, grid=args.grid, tol=tol, keep_margins=bool(args.svg))
        margins = scan.pop("margins", None)
        flagged = scan.pop("flagged")
        scan["flagged_shown"] = flagged[: args.max_list]
        out.update(scan)
        if args.svg:
            from .plotting import plot_margin_slice
            out["svg"] = plot_margin_slice(scan, margins, args.svg)
        return out
    flag = _flag(args, c.n)
    out["flag"] = {"x": flag[0], "y": flag[1], "X": flag[2]}
    jet = lab.tableau_at(c, flag)
    if args.op == "tableau":
        out.update(tableau=jet.tableau.entries, dY_dy=jet.dY_dy, dy_dx=jet.dy_dx, dy_dX=jet.dy_dX,
                   Y=jet.Y, fd_step=lab.FD_STEP, newton_tol=lab.NEWTON_TOL,
                   dual_tableau=lab.dual_chart_tableau(c, flag).entries)
        return out
    tol = args.tol if args.tol is not None else 1e-6
    m, u, v = lab.regularity_margin(c, flag, return_witness=True)
    out.update(margin=m, witness={"u": u, "v": v}, regular=m > tol, tol=tol,
               embedded_gauss_margin=lab.embedded_gauss_margin(c, flag))
    return out


# ---------------------------------------------------------------------------
# gw

def _constant_field(samples):
    ys = gw.fibonacci_sphere(samples)
    return gw.ContractingField(ys, np.tile([1.0, 0.0, 0.0], (samples, 1)), provenance="constant")


def cmd_gw(args):
    if args.op == "encode":
        c, source = _chart_from(args)
        f = gw.encode_pencil(c, _flag(args, c.n), args.samples)
        out = {"source": source, "samples": len(f), "graph": f.is_graph,
               "graph_violations": f.graph_violations}
        out["lipschitz"] = gw.lipschitz_estimate(f)
        signs = gw.pencil_pairing_signs(f)
        out["pairing_signs"] = {str(s): signs.count(s) for s in (-1, 0, 1)}
        out["regular"] = bool(out["lipschitz"]["L"] < 1 and f.is_graph and signs.count(1) == len(signs))
        if args.field_out:
            with open(args.field_out, "w", encoding="utf-8") as fh:
                fh.write(gw.format_field(f))
            out["field_file"] = args.field_out
    else:
        if args.field:
            f = gw.parse_field(_read(args.field))
            source = args.field
        else:
            f = _constant_field(args.samples)
            source = "constant"
        out = {"source": source, "samples": len(f)}
        if args.op == "lipschitz":
            out["lipschitz"] = gw.lipschitz_estimate(f)
        else:
            v = _vec(args.v, 4)
            tol = args.tol or gw.LINE_TOL
            pair, info = gw.line_through_vector(f, v, tol=tol, return_info=True)
            a, b = gw.spheres_to_plane(pair)
            out.update(v=v, xplus=pair.xplus, yminus=pair.yminus, plane_basis=[a, b], tol=tol, **info)
    if args.svg:
        from .plotting import plot_lipschitz
        out["svg"] = plot_lipschitz(f, args.svg)
    return out


# ---------------------------------------------------------------------------
# radon

def _density(args):
    if args.density:
        return radon.LineDensity(((1.0, args.density),))
    return radon.LineDensity.fubini_study()


def _surface(args):
    if args.surface == "line":
        return radon.AlgebraicLine(parse_hom(args.line, HomLine).coords), f"line {args.line}"
    if args.surface == "conic":
        con = poncelet.parse_conic(_read(args.conic)) if args.conic else poncelet.Conic.circle(0, 0, 1)
        return radon.AlgebraicConic(con.Q), f"conic {poncelet.format_conic(con).strip()}"
    if args.patch:
        return radon.parse_patch(_read(args.patch)), args.patch
    return radon.line_disk_patch(0, 0, args.radius, args.segments), f"disk patch radius={args.radius!r}"


def cmd_radon(args):
    eta = _density(args)
    out = {"density": "fubini-study" if args.density is None else f"fubini-study * ({args.density})"}
    if args.op == "pointwise":
        p = _vec(args.p, 4) if args.p else np.zeros(4)
        grid = radon.adaptive_grid(eta, p, args.tol or radon.QUAD_RTOL)
        M = radon.pointwise_radon(eta, p, quad=grid)
        out.update(point=p, matrix=M, volume_ratio=float(radon.volume_ratio(M)), grid=list(grid),
                   rtol=args.tol or radon.QUAD_RTOL)
    elif args.op == "closedness":
        vals = np.linspace(-0.5, 0.5, args.grid)
        pts = np.array(np.meshgrid(*[vals] * 4, indexing="ij")).reshape(4, -1).T
        r = radon.closedness_check(eta, pts, h=args.h, rtol=args.tol or radon.QUAD_RTOL)
        r.pop("per_point")
        out.update(r)
        out["threshold"] = 1e-3
        out["closed"] = r["residual"] < 1e-3
    else:
        surf, label = _surface(args)
        r = radon.crofton_mc(eta, surf, args.n, args.seed)
        out.update(surface=label, **r)
        if isinstance(surf, radon.TriangulatedPatch):
            out["patch_radon_integral"] = radon.patch_radon_integral(eta, surf)
    if args.svg:
        from .errors import UnplottableResult
        raise UnplottableResult("radon results have no 2-D figure")
    return out


# ---------------------------------------------------------------------------
# poncelet

def _conic_arg(path, inline, default):
    if path:
        return poncelet.parse_conic(_read(path))
    if inline:
        return poncelet.parse_conic(inline)
    return default


def _write_orbit_csv(path, states):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "theta", "px", "py", "lam0", "lam1", "lam2"])
    for k, s in enumerate(states):
        p = s.p.coords
        w.writerow([k, repr(s.theta) if s.theta is not None else "",
                    repr(float(p[0] / p[2])) if p[2] != 0 else "inf",
                    repr(float(p[1] / p[2])) if p[2] != 0 else "inf",
                    *[repr(float(np.real(c))) for c in s.lam.coords]])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def cmd_poncelet(args):
    if args.op == "conic5":
        lines = [ln for ln in _read(args.points).splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        pts = [parse_hom(ln, HomPoint) for ln in lines]
        con = poncelet.conic_through_5(pts)
        return {"points": [format_hom(p) for p in pts], "coefficients": con.coefficients(),
                "residual": poncelet.conic_residual(con, pts), "smooth": con.smooth}
    QV = _conic_arg(args.qv, args.qv_coefs, poncelet.Conic.circle(0, 0, 1))
    QE = _conic_arg(args.qe, args.qe_coefs, poncelet.Conic.circle(0, 0, 0.5))
    out = {"qv": QV.coefficients(), "qe": QE.coefficients()}
    if args.op == "tangents":
        ct = poncelet.common_tangents(QE, QV)
        distinct = []
        for c in ct:
            text = format_hom(c["line"])
            if all(d["line"] != text for d in distinct):
                distinct.append({"line": text, "multiplicity": c["multiplicity"], "real": c["real"]})
        out.update(tangents=distinct, real_count=sum(c["real"] for c in ct), total_multiplicity=len(ct),
                   nowhere_tangent=poncelet.nowhere_tangent(QE, QV), cluster_tol=poncelet.CLUSTER_TOL)
        return out
    s0 = poncelet.real_state(QE, QV, args.theta)
    out.update(theta0=args.theta, drift_limit=poncelet.DRIFT_LIMIT)
    if args.op == "rotation":
        out.update(rotation_number=poncelet.rotation_number(QE, QV, s0, args.n), steps=args.n)
        states = poncelet.orbit(QE, QV, s0, min(args.n, 50)) if args.svg else None
    else:
        states = poncelet.orbit(QE, QV, s0, args.n)
        out["steps"] = args.n
        out["max_incidence_residual"] = max(max(poncelet.state_residuals(QE, QV, s)) for s in states)
        if args.op == "closure":
            tol = args.tol or 1e-8
            period = next((k for k, s in enumerate(states[1:], 1)
                           if poncelet.state_distance(s, s0) < tol), None)
            out.update(period=period, closed=period is not None, tol=tol)
            if period is not None:
                states = states[: period + 1]
        else:
            out["final"] = {"p": format_hom(states[-1].p), "lam": format_hom(states[-1].lam),
                            "theta": states[-1].theta}
        if args.csv:
            _write_orbit_csv(args.csv, states)
            out["csv"] = args.csv
    if args.svg:
        from .plotting import plot_poncelet
        out["svg"] = plot_poncelet(QE, QV, states, args.svg)
    return out


# ---------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="projplane", description="Smooth projective plane toolkit.")
    cmds = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--svg", help="write a figure to this SVG file")

    def chart_source(sp):
        sp.add_argument("--file", help="chart DSL file")
        sp.add_argument("--builtin", choices=["classical", "componentwise", "blended"], default="classical")
        sp.add_argument("--eps", type=float, default=1.0, help="bump weight of the blended chart")

    def flag_opts(sp):
        for name in ("x", "y", "X"):
            sp.add_argument(f"--{name}", help=f"comma-separated {name} coordinates (default 0)")

    t = cmds.add_parser("triality", help="tableau algebra")
    t.add_argument("op", choices=["check", "classify", "integral-elements", "algebra"])
    t.add_argument("--kind", choices=["R", "C", "H", "O", "componentwise"], default="C")
    t.add_argument("--file", help="tableau file")
    t.add_argument("--perturb", help="'w u v delta': add delta to entries[w, u, v]")
    t.add_argument("--eu")
    t.add_argument("--ev")
    common(t)

    c = cmds.add_parser("chart", help="chart tableaux and regularity")
    c.add_argument("op", choices=["tableau", "margin", "scan"])
    chart_source(c)
    flag_opts(c)
    c.add_argument("--grid", type=int, default=5)
    c.add_argument("--box", help="'lo,hi' range for every coordinate")
    c.add_argument("--max-list", type=int, default=20, help="flagged flags to list")
    common(c)

    g = cmds.add_parser("gw", help="sphere-pair coordinates of plane fields")
    g.add_argument("op", choices=["encode", "lipschitz", "solve-line"])
    chart_source(g)
    flag_opts(g)
    g.add_argument("--samples", type=int, default=200)
    g.add_argument("--field", help="contracting field file")
    g.add_argument("--field-out", help="write the encoded field here")
    g.add_argument("--v", default="1,0,0,0")
    common(g)

    r = cmds.add_parser("radon", help="Radon transform and Crofton counts")
    r.add_argument("op", choices=["pointwise", "crofton", "closedness"])
    r.add_argument("--density", help="relative density expression in x1, x2 (Re, Im a) and y1, y2 (Re, Im b)")
    r.add_argument("--p", help="chart point 'x1,x2,y1,y2'")
    r.add_argument("--surface", choices=["line", "conic", "patch"], default="line")
    r.add_argument("--line", default="(0 : 1 : 0)")
    r.add_argument("--conic")
    r.add_argument("--patch")
    r.add_argument("--radius", type=float, default=1.0)
    r.add_argument("--segments", type=int, default=64)
    r.add_argument("--n", type=int, default=100_000)
    r.add_argument("--grid", type=int, default=3)
    r.add_argument("--h", type=float, default=1e-3)
    common(r)

    q = cmds.add_parser("poncelet", help="conics and Poncelet dynamics")
    q.add_argument("op", choices=["orbit", "closure", "rotation", "tangents", "conic5"])
    q.add_argument("--qe", help="edge conic file")
    q.add_argument("--qv", help="vertex conic file")
    q.add_argument("--qe-coefs", help="inline 'a b c d e f'")
    q.add_argument("--qv-coefs", help="inline 'a b c d e f'")
    q.add_argument("--points", help="file with five '(a : b : c)' lines")
    q.add_argument("--theta", type=float, default=0.0)
    q.add_argument("--n", type=int, default=100)
    q.add_argument("--csv")
    common(q)
    return p


HANDLERS = {"triality": cmd_triality, "chart": cmd_chart, "gw": cmd_gw,
            "radon": cmd_radon, "poncelet": cmd_poncelet}
_IGNORED = {"command", "op", "out", "seed"}


def _options(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _IGNORED}


def _write(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_help())
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        return EXIT_USAGE
    command = f"{args.command} {args.op}"
    try:
        result = HANDLERS[args.command](args)
        code = EXIT_OK
    except ValidationError as exc:
        result, code = _failure(exc), EXIT_VALIDATION
    except NumericalError as exc:
        result, code = _failure(exc), EXIT_NUMERICAL
    text = emit_report(result, command, seed=args.seed, options=_options(args))
    _write(text, args.out)
    if code:
        sys.stderr.write(f"projplane: {result['error']}: {result['message']}\n")
    return code


def _failure(exc):
    out = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NoConvergence):
        out["best"] = exc.best
        out["residual"] = exc.residual
    if isinstance(exc, NotContracting):
        out["L"] = exc.L
    return out


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
