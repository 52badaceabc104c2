"""Integrating the tangential second derivative over a band ``a <= f <= b``.

The left-hand side is computed twice, by methods that share nothing but the
field:

* :func:`integrate_direct` does tensor Gauss-Legendre quadrature of
  ``D_T^2 f`` over grid cells, quadrisecting cells cut by the band boundary;
* :func:`integrate_coarea` slices the band into level curves at
  Gauss-Legendre levels and integrates ``D_T^2 f / |grad f|`` along each.

Both are compared with ``2*pi*(b - a) * sum(sigma_i)`` over the connected
components of the band. :func:`verify_band` wires everything together,
including the critical-value and non-compact variants.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from . import diffgeo
from .contour import LEVEL_TOL, Contour, Integrand, contour_integral, contour_sigma, \
    extract_level_set
from .errors import (
    BandEmpty,
    InconsistentSigma,
    NearCriticalPoint,
    NonCompactLevel,
    SigmaUnknown,
)
from .field import Point2, ScalarField, Window

log = logging.getLogger(__name__)

CRITICAL_TOL = 1e-8
DEFAULT_EPS_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
SIGMA_CHECK_FRACTIONS = (0.2, 0.4, 0.8)

_GL3_NODES, _GL3_WEIGHTS = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class Band:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"band needs a < b, got [{self.a}, {self.b}]")

    @property
    def width(self) -> float:
        return self.b - self.a


class CriticalKind(str, enum.Enum):
    MIN = "min"
    MAX = "max"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    location: Point2
    value: float
    grad_norm: float
    kind: CriticalKind


@dataclass
class BandComponent:
    """One 4-connected cluster of grid cells meeting the band."""

    id: int
    mask: np.ndarray  # (res, res) bool over the cell grid, row = y index
    window: Window
    sigma: int | None
    touches_boundary: bool
    warnings: list[str] = dc_field(default_factory=list)

    @property
    def res(self) -> int:
        return self.mask.shape[0]

    @property
    def cells(self) -> np.ndarray:
        """Flat (row-major) indices of the component's cells."""
        return np.flatnonzero(self.mask)

    def cell_of(self, x, y):
        w, r = self.window, self.res
        i = np.clip(((x - w.xmin) / (w.xmax - w.xmin) * r).astype(int), 0, r - 1)
        j = np.clip(((y - w.ymin) / (w.ymax - w.ymin) * r).astype(int), 0, r - 1)
        return j, i

    def owns(self, contour: Contour) -> bool:
        px, py = contour.probe_point()
        j, i = self.cell_of(np.array(px), np.array(py))
        return bool(self.mask[j, i])


# ---------------------------------------------------------------------------
# critical points

def _node_grid(window: Window, res: int):
    xs = np.linspace(window.xmin, window.xmax, res + 1)
    ys = np.linspace(window.ymin, window.ymax, res + 1)
    return np.meshgrid(xs, ys)


def _seeds(G):
    """Interior nodes where the sampled |grad f| is a non-flat local minimum."""
    core = G[1:-1, 1:-1]
    is_min = np.ones(core.shape, dtype=bool)
    biggest = np.full(core.shape, -np.inf)
    n, m = G.shape
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if dj == 0 and di == 0:
                continue
            nb = G[1 + dj:n - 1 + dj, 1 + di:m - 1 + di]
            is_min &= core <= nb
            biggest = np.maximum(biggest, nb)
    is_min &= core < biggest
    j, i = np.nonzero(is_min)
    return j + 1, i + 1


def _newton(field: ScalarField, window: Window, px, py, critical_tol,
            max_iter=60, max_halvings=40):
    """Damped Newton on grad f = 0, all seeds at once.

    Returns (x, y, converged) arrays; seeds that stall, hit a singular
    Hessian or would leave the window are marked unconverged.
    """
    px, py = px.astype(float), py.astype(float)
    alive = np.ones(px.shape, dtype=bool)
    done = np.zeros(px.shape, dtype=bool)
    for _ in range(max_iter):
        act = np.flatnonzero(alive & ~done)
        if act.size == 0:
            break
        J = field.jets(px[act], py[act])
        gn = np.hypot(J.gx, J.gy)
        conv = gn <= critical_tol
        done[act[conv]] = True
        keep = ~conv
        act, gn = act[keep], gn[keep]
        J = J.take(keep)
        if act.size == 0:
            break
        det = J.hxx * J.hyy - J.hxy * J.hxy
        scale = 1.0 + np.abs(J.hxx) + np.abs(J.hyy) + np.abs(J.hxy)
        singular = np.abs(det) <= 1e-300 + 1e-14 * scale * scale
        alive[act[singular]] = False
        ok = ~singular
        act, gn, det = act[ok], gn[ok], det[ok]
        J = J.take(ok)
        sx = (J.hyy * J.gx - J.hxy * J.gy) / det
        sy = (J.hxx * J.gy - J.hxy * J.gx) / det
        lam = np.ones(act.size)
        pending = np.ones(act.size, dtype=bool)
        for _h in range(max_halvings):
            k = np.flatnonzero(pending)
            if k.size == 0:
                break
            tx, ty = px[act[k]] - lam[k] * sx[k], py[act[k]] - lam[k] * sy[k]
            inside = window.contains(tx, ty)
            better = np.zeros(k.size, dtype=bool)
            if np.any(inside):
                Jt = field.jets(tx[inside], ty[inside])
                better[inside] = np.hypot(Jt.gx, Jt.gy) < gn[k[inside]]
            acc = k[better]
            px[act[acc]] = tx[better]
            py[act[acc]] = ty[better]
            pending[acc] = False
            lam[k[~better]] *= 0.5
        alive[act[pending]] = False
    return px, py, done & alive


def _classify(jet, tol_rel=1e-8) -> CriticalKind:
    H = jet.hess
    lam = np.linalg.eigvalsh(H)
    if np.any(np.abs(lam) < tol_rel * (1.0 + np.linalg.norm(H))):
        return CriticalKind.DEGENERATE
    if np.all(lam > 0):
        return CriticalKind.MIN
    if np.all(lam < 0):
        return CriticalKind.MAX
    return CriticalKind.SADDLE


def _critical_search(field, window, res, critical_tol):
    X, Y = _node_grid(window, res)
    J = field.jets(X, Y)
    sj, si = _seeds(np.hypot(J.gx, J.gy))
    if sj.size == 0:
        return [], 0
    px, py, conv = _newton(field, window, X[sj, si], Y[sj, si], critical_tol)
    n_dropped = int(np.sum(~conv))
    pts = sorted(zip(px[conv].tolist(), py[conv].tolist()))
    radius = 1e-6 * window.diagonal
    unique: list[tuple[float, float]] = []
    for p in pts:
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > radius for q in unique):
            unique.append(p)
    found = []
    for x, y in unique:
        jet = field.jet((x, y))
        found.append(CriticalPoint(Point2(x, y), jet.value,
                                   float(math.hypot(jet.gx, jet.gy)), _classify(jet)))
    return found, n_dropped


def find_critical_points(field: ScalarField, window: Window | None = None,
                         res: int = 256,
                         critical_tol: float = CRITICAL_TOL) -> list[CriticalPoint]:
    """Locate zeros of grad f in the window.

    Seeds are the interior grid nodes where sampled |grad f| has a local
    minimum; each is polished by damped Newton. Seeds that fail to converge
    are dropped (and logged).
    """
    if res < 16:
        raise ValueError(f"res must be at least 16, got {res}")
    found, dropped = _critical_search(field, window or field.window, res, critical_tol)
    if dropped:
        log.warning("%d critical-point seed(s) did not converge", dropped)
    return found


# ---------------------------------------------------------------------------
# band decomposition

def _owned(comp: BandComponent, contours):
    return [c for c in contours if comp.owns(c)]


def _sigma_at(field, comp, t, res, grad_tol, level_tol):
    """(sigma or None, note) from the component's contours at level t."""
    mine = _owned(comp, extract_level_set(field, t, comp.window, res, level_tol=level_tol))
    if len(mine) != 1:
        return None, f"{len(mine)} contours at level {t:.6g}"
    if not mine[0].closed:
        return None, f"open contour at level {t:.6g}"
    try:
        return contour_sigma(field, mine[0], grad_tol), ""
    except (InconsistentSigma, NearCriticalPoint) as exc:
        return None, f"{type(exc).__name__} at level {t:.6g}: {exc}"


def decompose_band(field: ScalarField, band: Band, window: Window | None = None,
                   res: int = 256, *, grad_tol: float = diffgeo.GRAD_TOL,
                   level_tol: float = LEVEL_TOL) -> list[BandComponent]:
    """Split ``{a <= f <= b}`` into connected components with their sigma."""
    if res < 32:
        raise ValueError(f"res must be at least 32, got {res}")
    window = window or field.window
    X, Y = _node_grid(window, res)
    F = field.values(X, Y)
    corners = np.stack([F[:-1, :-1], F[:-1, 1:], F[1:, :-1], F[1:, 1:]])
    cmin, cmax = corners.min(axis=0), corners.max(axis=0)
    marked = (cmin <= band.b) & (cmax >= band.a)
    if not np.any(marked):
        raise BandEmpty(
            f"[{band.a:.6g}, {band.b:.6g}] misses f's range "
            f"[{F.min():.6g}, {F.max():.6g}] on the window")
    labels, count = ndimage.label(marked)
    comps = []
    for k in range(1, count + 1):
        mask = labels == k
        touches = bool(mask[0].any() or mask[-1].any() or mask[:, 0].any()
                       or mask[:, -1].any())
        comp = BandComponent(k - 1, mask, window, None, touches)
        lo = max(band.a, float(cmin[mask].min()))
        hi = min(band.b, float(cmax[mask].max()))
        t_mid = min(max(0.5 * (band.a + band.b), lo), hi)
        sigma, note = _sigma_at(field, comp, t_mid, res, grad_tol, level_tol)
        if sigma is None:
            comp.warnings.append(f"component {comp.id}: sigma unknown ({note})")
        else:
            for frac in SIGMA_CHECK_FRACTIONS:
                t = lo + frac * (hi - lo)
                s, note = _sigma_at(field, comp, t, res, grad_tol, level_tol)
                if s is None:
                    comp.warnings.append(
                        f"component {comp.id}: sigma check skipped ({note})")
                elif s != sigma:
                    comp.warnings.append(
                        f"component {comp.id}: sigma changes between levels "
                        f"{t_mid:.6g} and {t:.6g}")
                    sigma = None
                    break
        comp.sigma = sigma
        if touches:
            comp.warnings.append(
                f"component {comp.id}: window-truncated (touches the window boundary)")
        comps.append(comp)
    return comps


# ---------------------------------------------------------------------------
# the two integrators

def _gl_cells(field, band, x0, y0, wx, wy, indicator, grad_tol):
    ox = x0[:, None, None] + 0.5 * (_GL3_NODES[None, :, None] + 1.0) * wx
    oy = y0[:, None, None] + 0.5 * (_GL3_NODES[None, None, :] + 1.0) * wy
    ox, oy = np.broadcast_arrays(ox, oy)
    jets = field.jets(ox, oy)
    d2, ok = diffgeo.masked_tangential_d2(jets, grad_tol)
    weights = _GL3_WEIGHTS[:, None] * _GL3_WEIGHTS[None, :]
    take = np.ones(ok.shape, dtype=bool)
    if indicator:
        take = (jets.value >= band.a) & (jets.value <= band.b)
    excluded = int(np.sum(take & ~ok))
    contrib = 0.25 * wx * wy * np.sum(weights * d2 * take, axis=(1, 2))
    return contrib, excluded


def _direct(field, comp: BandComponent, band: Band, subdiv_depth, grad_tol):
    w, r = comp.window, comp.res
    wx, wy = (w.xmax - w.xmin) / r, (w.ymax - w.ymin) / r
    j, i = np.nonzero(comp.mask)
    x0, y0 = w.xmin + i * wx, w.ymin + j * wy
    pieces, excluded = [], 0
    for depth in range(subdiv_depth + 1):
        if x0.size == 0:
            break
        cx = np.stack([x0, x0 + wx, x0, x0 + wx, x0 + 0.5 * wx])
        cy = np.stack([y0, y0, y0 + wy, y0 + wy, y0 + 0.5 * wy])
        v = field.values(cx, cy)
        inside = np.all((v > band.a) & (v < band.b), axis=0)
        outside = np.all(v < band.a, axis=0) | np.all(v > band.b, axis=0)
        straddle = ~inside & ~outside
        c, e = _gl_cells(field, band, x0[inside], y0[inside], wx, wy, False, grad_tol)
        pieces.append(c)
        excluded += e
        x0, y0 = x0[straddle], y0[straddle]
        if depth == subdiv_depth:
            c, e = _gl_cells(field, band, x0, y0, wx, wy, True, grad_tol)
            pieces.append(c)
            excluded += e
            break
        wx, wy = 0.5 * wx, 0.5 * wy
        x0 = np.concatenate([x0, x0 + wx, x0, x0 + wx])
        y0 = np.concatenate([y0, y0, y0 + wy, y0 + wy])
    total = math.fsum(np.concatenate(pieces).tolist()) if pieces else 0.0
    return total, excluded


def integrate_direct(field: ScalarField, comp: BandComponent, band: Band,
                     subdiv_depth: int = 4, *,
                     grad_tol: float = diffgeo.GRAD_TOL) -> float:
    """Area integral of D_T^2 f over the component's part of the band.

    Cells wholly inside the band get 3x3 Gauss-Legendre quadrature; cells
    cut by the band boundary are quadrisected ``subdiv_depth`` times and
    the leaves are integrated with an indicator on ``a <= f <= b``. Nodes
    too close to a critical point are left out.
    """
    total, excluded = _direct(field, comp, band, subdiv_depth, grad_tol)
    if excluded:
        log.warning("%d near-critical quadrature node(s) excluded", excluded)
    return total


def integrate_coarea(field: ScalarField, comp: BandComponent, band: Band,
                     n_levels: int = 16, res: int | None = None, *,
                     grad_tol: float = diffgeo.GRAD_TOL,
                     level_tol: float = LEVEL_TOL) -> float:
    """Level-by-level integral: Gauss-Legendre in t of the level-curve integrals.

    Raises :class:`NonCompactLevel` if any level curve of the component is
    cut by the window.
    """
    if n_levels < 8:
        raise ValueError(f"n_levels must be at least 8, got {n_levels}")
    res = res or comp.res
    xi, wts = np.polynomial.legendre.leggauss(n_levels)
    half = 0.5 * band.width
    terms = []
    for node, wt in zip(xi, wts):
        t = 0.5 * (band.a + band.b) + half * node
        curves = _owned(comp, extract_level_set(field, t, comp.window, res,
                                                level_tol=level_tol))
        if any(not c.closed for c in curves):
            raise NonCompactLevel(
                f"level {t:.6g} of component {comp.id} leaves the window")
        inner = math.fsum(contour_integral(field, c, Integrand.COAREA_WEIGHTED,
                                           grad_tol=grad_tol) for c in curves)
        terms.append(half * wt * inner)
    return math.fsum(terms)


def rhs_prediction(components, band: Band) -> float:
    """Predicted band integral: 2*pi*(b - a) times the sum of sigmas."""
    unknown = [c.id for c in components if c.sigma is None]
    if unknown:
        raise SigmaUnknown(f"sigma unknown for component(s) {unknown}")
    return 2.0 * math.pi * band.width * sum(c.sigma for c in components)


# ---------------------------------------------------------------------------
# verification pipeline

@dataclass
class VerifyOptions:
    res: int = 256
    n_levels: int = 16
    subdiv_depth: int = 4
    grad_tol: float = diffgeo.GRAD_TOL
    critical_tol: float = CRITICAL_TOL
    level_tol: float = LEVEL_TOL
    # relative to the band width
    eps_schedule: tuple[float, ...] = DEFAULT_EPS_SCHEDULE


@dataclass
class ComponentResult:
    component: BandComponent
    band: Band
    lhs_direct: float
    lhs_coarea: float | None


@dataclass
class BandRun:
    """Both integrators over every component of one compact-style band."""

    band: Band
    results: list[ComponentResult]
    non_compact: bool
    warnings: list[str]

    @property
    def components(self):
        return [r.component for r in self.results]

    @property
    def lhs_direct(self) -> float:
        return math.fsum(r.lhs_direct for r in self.results)

    @property
    def lhs_coarea(self) -> float | None:
        if self.non_compact:
            return None
        return math.fsum(r.lhs_coarea for r in self.results)


def run_band(field: ScalarField, band: Band, window: Window | None = None,
             options: VerifyOptions | None = None) -> BandRun:
    """Decompose the band and run both integrators on each component."""
    opts = options or VerifyOptions()
    window = window or field.window
    comps = decompose_band(field, band, window, opts.res, grad_tol=opts.grad_tol,
                           level_tol=opts.level_tol)
    warnings = [w for c in comps for w in c.warnings]
    results, non_compact = [], False
    for comp in comps:
        direct, excluded = _direct(field, comp, band, opts.subdiv_depth, opts.grad_tol)
        if excluded:
            warnings.append(
                f"component {comp.id}: {excluded} near-critical quadrature node(s) excluded")
        try:
            coarea = integrate_coarea(field, comp, band, opts.n_levels, opts.res,
                                      grad_tol=opts.grad_tol, level_tol=opts.level_tol)
        except NonCompactLevel as exc:
            coarea = None
            non_compact = True
            warnings.append(f"NonCompactLevel: {exc}")
        results.append(ComponentResult(comp, band, direct, coarea))
    return BandRun(band, results, non_compact, warnings)


class CriticalEnd(str, enum.Enum):
    AT_A = "a"
    AT_B = "b"
    BOTH = "both"


@dataclass
class LimitEstimate:
    band: Band
    end: CriticalEnd
    eps: list[float]
    values_direct: list[float]
    values_coarea: list[float | None]
    limit_direct: float
    limit_coarea: float | None
    converged: bool
    last_run: BandRun = dc_field(repr=False)


def _extrapolate(eps, values):
    """Intercept of a least-squares line through the last three (eps, value)."""
    e, v = np.asarray(eps[-3:]), np.asarray(values[-3:])
    slope, intercept = np.polyfit(e, v, 1)
    return float(intercept)


def _shrinks(values) -> bool:
    diffs = np.abs(np.diff(values))
    return bool(np.all(np.diff(diffs) < 0)) if diffs.size > 1 else True


def eps_limit(field: ScalarField, band: Band, critical_end: CriticalEnd,
              schedule=DEFAULT_EPS_SCHEDULE, window: Window | None = None,
              options: VerifyOptions | None = None) -> LimitEstimate:
    """Integrate over bands pulled back from a critical endpoint, then extrapolate.

    ``schedule`` holds absolute offsets, strictly decreasing. The limit is
    extrapolated from the last three runs assuming the error is linear in
    eps; ``converged`` means successive differences shrink monotonically.
    """
    critical_end = CriticalEnd(critical_end)
    schedule = [float(e) for e in schedule]
    if len(schedule) < 3:
        raise ValueError("eps schedule needs at least three entries")
    if any(e <= 0 for e in schedule) or any(
            later >= earlier for earlier, later in zip(schedule, schedule[1:])):
        raise ValueError("eps schedule must be positive and strictly decreasing")
    span = 2 * schedule[0] if critical_end is CriticalEnd.BOTH else schedule[0]
    if span >= band.width:
        raise ValueError(f"eps={schedule[0]:g} does not fit inside the band")
    vd, vc, run = [], [], None
    for e in schedule:
        a = band.a + e if critical_end in (CriticalEnd.AT_A, CriticalEnd.BOTH) else band.a
        b = band.b - e if critical_end in (CriticalEnd.AT_B, CriticalEnd.BOTH) else band.b
        run = run_band(field, Band(a, b), window, options)
        vd.append(run.lhs_direct)
        vc.append(run.lhs_coarea)
    lim_c = None if any(v is None for v in vc) else _extrapolate(schedule, vc)
    return LimitEstimate(band, critical_end, schedule, vd, vc,
                         _extrapolate(schedule, vd), lim_c, _shrinks(vd), run)


def _fmt(x):
    """Round to 12 significant digits for stable serialisation."""
    if x is None:
        return None
    return float(f"{x:.12g}")


@dataclass
class BandReport:
    field: str
    band: Band
    window: Window
    components: list[ComponentResult]
    lhs_direct: float
    lhs_coarea: float | None
    rhs: float | None
    critical_points: list[CriticalPoint]
    warnings: list[str]
    case: str
    non_compact: bool = False
    limits: list[LimitEstimate] = dc_field(default_factory=list)

    def _err(self, lhs):
        if lhs is None or self.rhs is None:
            return None, None
        err = abs(lhs - self.rhs)
        return err, (err / abs(self.rhs) if self.rhs != 0 else None)

    @property
    def abs_error_direct(self):
        return self._err(self.lhs_direct)[0]

    @property
    def rel_error_direct(self):
        return self._err(self.lhs_direct)[1]

    @property
    def abs_error_coarea(self):
        return self._err(self.lhs_coarea)[0]

    @property
    def rel_error_coarea(self):
        return self._err(self.lhs_coarea)[1]

    def to_dict(self) -> dict:
        w = self.window
        out = {
            "field": self.field,
            "band": {"a": _fmt(self.band.a), "b": _fmt(self.band.b)},
            "window": {"xmin": _fmt(w.xmin), "xmax": _fmt(w.xmax),
                       "ymin": _fmt(w.ymin), "ymax": _fmt(w.ymax)},
            "components": [
                {"id": k, "sigma": r.component.sigma,
                 "lhs_direct": _fmt(r.lhs_direct), "lhs_coarea": _fmt(r.lhs_coarea),
                 "touches_boundary": r.component.touches_boundary}
                for k, r in enumerate(self.components)],
            "lhs_direct": _fmt(self.lhs_direct),
            "lhs_coarea": _fmt(self.lhs_coarea),
            "rhs": _fmt(self.rhs),
            "abs_error_direct": _fmt(self.abs_error_direct),
            "rel_error_direct": _fmt(self.rel_error_direct),
            "abs_error_coarea": _fmt(self.abs_error_coarea),
            "rel_error_coarea": _fmt(self.rel_error_coarea),
            "critical_points": [
                {"x": _fmt(cp.location.x), "y": _fmt(cp.location.y),
                 "value": _fmt(cp.value), "kind": cp.kind.value}
                for cp in self.critical_points],
            "warnings": list(self.warnings),
            "case": self.case,
            "non_compact": self.non_compact,
        }
        if self.limits:
            out["eps_limits"] = [
                {"band": {"a": _fmt(lim.band.a), "b": _fmt(lim.band.b)},
                 "critical_end": lim.end.value,
                 "eps": [_fmt(e) for e in lim.eps],
                 "values_direct": [_fmt(v) for v in lim.values_direct],
                 "values_coarea": [_fmt(v) for v in lim.values_coarea],
                 "limit_direct": _fmt(lim.limit_direct),
                 "limit_coarea": _fmt(lim.limit_coarea),
                 "converged": lim.converged}
                for lim in self.limits]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        def g(x):
            return "n/a" if x is None else f"{x:.12g}"

        lines = [f"field {self.field}  band [{g(self.band.a)}, {g(self.band.b)}]  "
                 f"case {self.case}"]
        for k, r in enumerate(self.components):
            s = "?" if r.component.sigma is None else f"{r.component.sigma:+d}"
            lines.append(f"component {k}: sigma={s} direct={g(r.lhs_direct)} "
                         f"coarea={g(r.lhs_coarea)}"
                         + (" (touches boundary)" if r.component.touches_boundary else ""))
        for cp in self.critical_points:
            lines.append(f"critical {cp.kind.value} at ({g(cp.location.x)}, "
                         f"{g(cp.location.y)}) value {g(cp.value)}")
        for lim in self.limits:
            lines.append(f"eps-limit [{g(lim.band.a)}, {g(lim.band.b)}] end={lim.end.value}: "
                         + " ".join(g(v) for v in lim.values_direct)
                         + f" -> {g(lim.limit_direct)}"
                         + ("" if lim.converged else " (not monotone)"))
        for w in self.warnings:
            lines.append(f"warning: {w}")
        lines.append(f"LHS={g(self.lhs_direct)} (coarea {g(self.lhs_coarea)}) "
                     f"RHS={g(self.rhs)} rel.err={g(self.rel_error_direct)}"
                     f" (coarea {g(self.rel_error_coarea)})")
        return "\n".join(lines) + "\n"


def _critical_values(points, tol):
    vals = []
    for v in sorted(cp.value for cp in points):
        if not vals or abs(v - vals[-1]) > tol * (1 + abs(v)):
            vals.append(v)
    return vals


def verify_band(field: ScalarField, band: Band, window: Window | None = None,
                options: VerifyOptions | None = None) -> BandReport:
    """Run the whole check: critical values, components, both integrals, RHS."""
    opts = options or VerifyOptions()
    window = window or field.window
    found, dropped = _critical_search(field, window, opts.res, opts.critical_tol)
    warnings = []
    if dropped:
        warnings.append(f"{dropped} critical-point seed(s) did not converge")
    tol = opts.critical_tol

    def near(v, c):
        return abs(v - c) <= tol * (1 + abs(c))

    in_band = [cp for cp in found
               if band.a <= cp.value <= band.b or near(cp.value, band.a)
               or near(cp.value, band.b)]
    crit = _critical_values(in_band, tol)
    crit_a = any(near(v, band.a) for v in crit)
    crit_b = any(near(v, band.b) for v in crit)
    interior = [v for v in crit if not near(v, band.a) and not near(v, band.b)]

    limits = []
    if not crit:
        runs = [run_band(field, band, window, opts)]
        rhs_bands = [band]
    else:
        cuts = [band.a] + interior + [band.b]
        runs, rhs_bands = [], []
        for k, (lo, hi) in enumerate(zip(cuts, cuts[1:])):
            sub = Band(lo, hi)
            lo_crit = k > 0 or crit_a
            hi_crit = k < len(cuts) - 2 or crit_b
            end = (CriticalEnd.BOTH if lo_crit and hi_crit
                   else CriticalEnd.AT_A if lo_crit else CriticalEnd.AT_B)
            sched = [e * sub.width for e in opts.eps_schedule]
            lim = eps_limit(field, sub, end, sched, window, opts)
            if not lim.converged:
                warnings.append(
                    f"eps-limit on [{lo:.6g}, {hi:.6g}]: differences do not shrink monotonically")
            limits.append(lim)
            runs.append(lim.last_run)
            rhs_bands.append(sub)

    components = [r for run in runs for r in run.results]
    for run in runs:
        warnings.extend(run.warnings)
    non_compact = any(run.non_compact for run in runs)
    truncated = any(r.component.touches_boundary for r in components)
    if non_compact or truncated:
        warnings.append("band is not compact inside the window: lhs_direct covers "
                        "the window-clipped band only, integrability beyond it is "
                        "not checked")

    if limits:
        lhs_direct = math.fsum(lim.limit_direct for lim in limits)
        lhs_coarea = (None if any(lim.limit_coarea is None for lim in limits)
                      else math.fsum(lim.limit_coarea for lim in limits))
    else:
        lhs_direct, lhs_coarea = runs[0].lhs_direct, runs[0].lhs_coarea

    try:
        rhs = math.fsum(rhs_prediction(run.components, sub)
                        for run, sub in zip(runs, rhs_bands))
    except SigmaUnknown as exc:
        rhs = None
        warnings.append(f"SigmaUnknown: {exc}")

    if non_compact or truncated:
        case = "case3"
    elif crit:
        case = "case2"
    elif len(components) > 1:
        case = "case1"
    else:
        case = "main"
    return BandReport(field.description, band, window, components, lhs_direct,
                      lhs_coarea, rhs, in_band, warnings, case, non_compact, limits)
