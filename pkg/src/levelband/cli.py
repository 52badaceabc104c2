"""Command-line entry point: ``levelband {verify,contour,curvature,critical-points}``.

Field specs passed to ``--field``:

* a catalog name, optionally with parameters: ``paraboloid``, ``two_bump(2)``
* ``grid:PATH`` for a grid text file
* anything else is parsed as an expression in x and y, e.g. ``"x^2+y^2"``

Exit status: 0 on success, 1 on usage errors, 2 on computational errors.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import diffgeo
from .band import Band, VerifyOptions, find_critical_points, verify_band
from .contour import extract_level_set, write_contours_csv, write_contours_svg
from .errors import ExprSyntaxError, LevelBandError, NonCompactLevel
from .exprlang import field_from_text
from .field import CATALOG, Window, builtin_field, grid_field, read_grid

EXPR_WINDOW = "-3,3,-3,3"
DEFAULTS = {
    "res": 256,
    "levels": 16,
    "depth": 4,
    "grad_tol": diffgeo.GRAD_TOL,
    "critical_tol": 1e-8,
    "level_tol": 1e-9,
    "format": "json",
}

# flags whose value may start with '-' (e.g. --window -3,3,-3,3)
_VALUE_FLAGS = {"--field", "--a", "--b", "--window", "--at", "--level", "--res",
                "--levels", "--depth", "--grad-tol", "--critical-tol", "--level-tol"}

_BUILTIN_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_window(text: str) -> Window:
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"--window: expected x0,x1,y0,y1, got {text!r}") from None
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"--window: expected four finite numbers x0,x1,y0,y1, got {text!r}")
    try:
        return Window(*vals)
    except ValueError as exc:
        raise UsageError(f"--window: {exc}") from None


def parse_point(text: str, flag: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{flag}: expected x,y, got {text!r}") from None
    return x, y


def build_field(spec: str, window_text: str | None):
    """Turn a ``--field`` spec (plus optional ``--window``) into a field."""
    window = parse_window(window_text) if window_text else None
    try:
        if spec.startswith("grid:"):
            data = read_grid(spec[5:])
            f = grid_field(data, description=spec)
            if window is not None:
                g = data.window
                if (window.xmin < g.xmin or window.xmax > g.xmax
                        or window.ymin < g.ymin or window.ymax > g.ymax):
                    raise UsageError("--window: must lie inside the grid's window")
                f.window = window
            return f
        m = _BUILTIN_RE.match(spec)
        if m and m.group(1) in CATALOG:
            raw = m.group(2)
            params = [float(p) for p in raw.split(",")] if raw and raw.strip() else []
            return builtin_field(m.group(1), params, window)
        return field_from_text(spec, window or parse_window(EXPR_WINDOW))
    except UsageError:
        raise
    except (ExprSyntaxError, LevelBandError, ValueError, OSError) as exc:
        raise UsageError(f"--field: {exc}") from None


def _common(p, *, window=True, res=True):
    p.add_argument("--config", metavar="FILE",
                   help="TOML file of key = value settings; flags override it")
    p.add_argument("--field", help="builtin name[(params)], grid:PATH, or expression")
    if window:
        p.add_argument("--window", metavar="X0,X1,Y0,Y1",
                       help="evaluation window (default: the field's own; "
                            f"{EXPR_WINDOW} for expressions)")
    if res:
        p.add_argument("--res", type=int, metavar="N",
                       help=f"cells per side of the sampling grid (default: {DEFAULTS['res']})")


def make_parser() -> argparse.ArgumentParser:
    def fmt(prog):
        return argparse.HelpFormatter(prog, width=88, max_help_position=32)

    parser = _Parser(prog="levelband", formatter_class=fmt,
                     description="Check the band integral of the tangential second "
                                 "derivative against 2*pi*sigma*(b - a).")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("verify", help="integrate over a band and compare", formatter_class=fmt)
    _common(p)
    p.add_argument("--a", type=float, help="lower band value (required)")
    p.add_argument("--b", type=float, help="upper band value (required)")
    p.add_argument("--levels", type=int, metavar="K",
                   help=f"Gauss-Legendre levels for the coarea integral "
                        f"(default: {DEFAULTS['levels']})")
    p.add_argument("--depth", type=int, metavar="D",
                   help=f"quadrisection depth at band boundaries (default: {DEFAULTS['depth']})")
    p.add_argument("--grad-tol", type=float, metavar="TOL",
                   help=f"|grad f| below which the frame is undefined "
                        f"(default: {DEFAULTS['grad_tol']:g})")
    p.add_argument("--critical-tol", type=float, metavar="TOL",
                   help=f"Newton tolerance for critical points "
                        f"(default: {DEFAULTS['critical_tol']:g})")
    p.add_argument("--level-tol", type=float, metavar="TOL",
                   help=f"relative level tolerance for contours "
                        f"(default: {DEFAULTS['level_tol']:g})")
    p.add_argument("--out", metavar="PATH", help="write the report here (default: stdout)")
    p.add_argument("--format", choices=("json", "text"),
                   help=f"report format (default: {DEFAULTS['format']})")
    p.add_argument("--allow-partial", action="store_true", default=None,
                   help="exit 0 even when a level leaves the window")

    p = sub.add_parser("contour", help="extract and dump level curves", formatter_class=fmt)
    _common(p)
    p.add_argument("--level", type=float, help="level value t (required)")
    p.add_argument("--csv", metavar="PATH", help="CSV output, columns level,component,vertex_index,x,y (required)")
    p.add_argument("--svg", metavar="PATH", help="optional SVG output")

    p = sub.add_parser("curvature", help="frame and curvature at a point", formatter_class=fmt)
    _common(p, res=False)
    p.add_argument("--at", metavar="X,Y", help="evaluation point (required)")
    p.add_argument("--grad-tol", type=float, metavar="TOL",
                   help=f"|grad f| below which the frame is undefined "
                        f"(default: {DEFAULTS['grad_tol']:g})")

    p = sub.add_parser("critical-points", help="list critical points", formatter_class=fmt)
    _common(p)
    p.add_argument("--critical-tol", type=float, metavar="TOL",
                   help=f"Newton tolerance (default: {DEFAULTS['critical_tol']:g})")
    return parser


def _preprocess(argv):
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a in _VALUE_FLAGS and k + 1 < len(argv):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
        else:
            out.append(a)
            k += 1
    return out


def _settings(args) -> dict:
    """Merge defaults < config file < flags."""
    merged = dict(DEFAULTS)
    if args.config:
        try:
            conf = tomllib.loads(Path(args.config).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"--config: {exc}") from None
        for key, val in conf.items():
            key = key.replace("-", "_")
            if key not in vars(args) or key in ("command", "config"):
                raise UsageError(f"--config: unknown key {key!r}")
            merged[key] = val
    for key, val in vars(args).items():
        if val is not None:
            merged[key] = val
    return merged


def _need(s, key):
    if s.get(key) is None:
        raise UsageError(f"--{key.replace('_', '-')}: required")
    return s[key]


def _num(s, key, kind):
    try:
        return kind(s[key])
    except (TypeError, ValueError):
        raise UsageError(f"--{key.replace('_', '-')}: expected a number, got {s[key]!r}") from None


def _g(x):
    return f"{x + 0.0:.12g}"


def _verify(f, s, out, err) -> int:
    a = _num({"a": _need(s, "a")}, "a", float)
    b = _num({"b": _need(s, "b")}, "b", float)
    if not a < b:
        raise UsageError(f"--b: must exceed --a ({a:g} >= {b:g})")
    res = _num(s, "res", int)
    if res < 32:
        raise UsageError(f"--res: must be at least 32, got {res}")
    opts = VerifyOptions(res=res, n_levels=_num(s, "levels", int),
                         subdiv_depth=_num(s, "depth", int),
                         grad_tol=_num(s, "grad_tol", float),
                         critical_tol=_num(s, "critical_tol", float),
                         level_tol=_num(s, "level_tol", float))
    if opts.n_levels < 8:
        raise UsageError(f"--levels: must be at least 8, got {opts.n_levels}")
    if opts.subdiv_depth < 0:
        raise UsageError(f"--depth: must be non-negative, got {opts.subdiv_depth}")
    report = verify_band(f, Band(a, b), f.window, opts)
    text = report.to_json() if s["format"] == "json" else report.to_text()
    if s.get("out"):
        Path(s["out"]).write_text(text)
    else:
        out.write(text)
    if report.non_compact and not s.get("allow_partial"):
        err.write(f"NonCompactLevel: a level curve leaves the window "
                  f"(case {report.case}); pass --allow-partial to accept\n")
        return 2
    return 0


def cmd_contour(f, s, out, err) -> int:
    t = _num({"level": _need(s, "level")}, "level", float)
    csv_path = _need(s, "csv")
    res = _num(s, "res", int)
    if res < 16:
        raise UsageError(f"--res: must be at least 16, got {res}")
    contours = extract_level_set(f, t, f.window, res, level_tol=float(s["level_tol"]))
    write_contours_csv(csv_path, contours)
    if s.get("svg"):
        write_contours_svg(s["svg"], contours, f.window)
    for k, c in enumerate(contours):
        out.write(f"contour {k}: closed={c.closed} vertices={len(c.vertices)} "
                  f"arc_length={_g(c.arc_length)} signed_area={_g(c.signed_area)}\n")
    if not contours:
        out.write(f"no contours at level {_g(t)}\n")
    return 0


def cmd_curvature(f, s, out, err) -> int:
    x, y = parse_point(_need(s, "at"), "--at")
    if not bool(f.window.contains(x, y)):
        raise UsageError(f"--at: ({x:g}, {y:g}) is outside the window")
    jet = f.jet((x, y))
    tol = float(s["grad_tol"])
    frame = diffgeo.level_frame(jet, tol)
    d2 = diffgeo.second_directional(jet, frame.T)
    out.write(f"kappa = {_g(diffgeo.level_curvature(jet, tol))}\n"
              f"T = ({_g(frame.T[0])}, {_g(frame.T[1])})\n"
              f"N = ({_g(frame.N[0])}, {_g(frame.N[1])})\n"
              f"D2_T f = {_g(d2)}\n"
              f"|grad f| = {_g(frame.grad_norm)}\n")
    return 0


def cmd_critical(f, s, out, err) -> int:
    res = _num(s, "res", int)
    if res < 16:
        raise UsageError(f"--res: must be at least 16, got {res}")
    pts = find_critical_points(f, f.window, res, float(s["critical_tol"]))
    out.write("x y value kind\n")
    for cp in pts:
        out.write(f"{_g(cp.location.x)} {_g(cp.location.y)} {_g(cp.value)} {cp.kind.value}\n")
    return 0


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    try:
        args = parser.parse_args(_preprocess(argv))
        if args.command is None:
            raise UsageError("a command is required (verify, contour, curvature, critical-points)")
        s = _settings(args)
        f = build_field(str(_need(s, "field")), s.get("window"))
        handler = {"verify": _verify, "contour": cmd_contour,
                   "curvature": cmd_curvature, "critical-points": cmd_critical}[args.command]
        return handler(f, s, out, err)
    except UsageError as exc:
        err.write(f"levelband: error: {exc}\n")
        return 1
    except NonCompactLevel as exc:
        err.write(f"NonCompactLevel: {exc}\n")
        return 2
    except LevelBandError as exc:
        err.write(f"{type(exc).__name__}: {exc}\n")
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
