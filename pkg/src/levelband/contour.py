"""Level-set extraction by marching squares, orientation and line integrals.

Edge crossings are located by bisection on the field itself (not by linear
interpolation of corner samples), so contour vertices sit on the level set
to near machine precision. Saddle cells are split using the field value at
the cell centre.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diffgeo
from .errors import AmbiguousSaddleCell, InconsistentSigma, OpenContour
from .field import ScalarField, Window

LEVEL_TOL = 1e-9
BISECTION_ITERS = 40


class Integrand(enum.Enum):
    CURVATURE = "curvature"
    COAREA_WEIGHTED = "coarea_weighted"


@dataclass
class Contour:
    """One polyline approximating a component of ``f = level``.

    Closed contours do not repeat their first vertex and are oriented
    counterclockwise.
    """

    vertices: np.ndarray  # (n, 2)
    closed: bool
    level: float

    def segments(self):
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]

    @property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * math.fsum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    @property
    def arc_length(self) -> float:
        p, q = self.segments()
        return math.fsum(np.hypot(*(q - p).T))

    def probe_point(self) -> np.ndarray:
        """A point strictly on the polyline: midpoint of its first segment."""
        return 0.5 * (self.vertices[0] + self.vertices[1])

    def level_residual(self, field: ScalarField) -> float:
        f = field.values(self.vertices[:, 0], self.vertices[:, 1])
        return float(np.max(np.abs(f - self.level)))

    def is_simple(self) -> bool:
        """True if no two non-adjacent segments intersect."""
        p, q = self.segments()
        n = len(p)
        if n < 4:
            return True
        i, j = np.triu_indices(n, k=2)
        keep = ~(self.closed & (i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]
        for lo in range(0, len(i), 1 << 20):
            a, b = p[i[lo:lo + (1 << 20)]], q[i[lo:lo + (1 << 20)]]
            c, d = p[j[lo:lo + (1 << 20)]], q[j[lo:lo + (1 << 20)]]
            if np.any(_segments_cross(a, b, c, d)):
                return False
        return True


def _orient(a, b, c):
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _segments_cross(a, b, c, d):
    d1, d2 = _orient(c, d, a), _orient(c, d, b)
    d3, d4 = _orient(a, b, c), _orient(a, b, d)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


# local edges: 0 bottom (bl-br), 1 right (br-tr), 2 top (tl-tr), 3 left (bl-tl)
# corner bits: bl=1, br=2, tr=4, tl=8
_EDGE_CORNERS = ((1, 2), (2, 4), (8, 4), (1, 8))


def _build_table():
    table = {}
    for code in range(16):
        crossing = [e for e, (c0, c1) in enumerate(_EDGE_CORNERS)
                    if bool(code & c0) != bool(code & c1)]
        if len(crossing) == 2:
            table[code] = tuple(crossing)
    return table


_PAIR_TABLE = _build_table()
# saddle splits: (code, centre_above) -> two edge pairs, each cutting off one
# corner whose state differs from the centre
_SADDLE_TABLE = {
    (5, True): ((0, 1), (2, 3)),
    (5, False): ((0, 3), (1, 2)),
    (10, True): ((0, 3), (1, 2)),
    (10, False): ((0, 1), (2, 3)),
}


class _Grid:
    """Node lattice of a res x res cell grid over a window."""

    def __init__(self, window: Window, res: int):
        self.window = window
        self.res = res
        self.xs = np.linspace(window.xmin, window.xmax, res + 1)
        self.ys = np.linspace(window.ymin, window.ymax, res + 1)
        self.n_horizontal = (res + 1) * res

    def node_values(self, field: ScalarField) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return field.values(X, Y)

    def edge_ids(self, j, i, local):
        r = self.res
        h_bottom = j * r + i
        h_top = (j + 1) * r + i
        v_left = self.n_horizontal + j * (r + 1) + i
        v_right = v_left + 1
        return np.choose(local, [h_bottom, v_right, h_top, v_left])

    def edge_endpoints(self, eid):
        r = self.res
        horiz = eid < self.n_horizontal
        k = np.where(horiz, eid, eid - self.n_horizontal)
        j = np.where(horiz, k // r, k // (r + 1))
        i = np.where(horiz, k % r, k % (r + 1))
        j1 = np.where(horiz, j, j + 1)
        i1 = np.where(horiz, i + 1, i)
        return (self.xs[i], self.ys[j]), (self.xs[i1], self.ys[j1]), (j, i), (j1, i1)


def _refine_crossings(field, grid: _Grid, D, eids, t):
    (x0, y0), (x1, y1), n0, n1 = grid.edge_endpoints(eids)
    d0 = D[n0]
    # parametrise so that s_lo is the below-level end
    lo_is_start = d0 < 0
    s_lo = np.where(lo_is_start, 0.0, 1.0)
    s_hi = 1.0 - s_lo
    for _ in range(BISECTION_ITERS):
        s = 0.5 * (s_lo + s_hi)
        above = field.values(x0 + s * (x1 - x0), y0 + s * (y1 - y0)) - t >= 0
        s_hi = np.where(above, s, s_hi)
        s_lo = np.where(above, s_lo, s)
    s = 0.5 * (s_lo + s_hi)
    return np.column_stack([x0 + s * (x1 - x0), y0 + s * (y1 - y0)])


def _cell_segments(field, grid: _Grid, D, t, level_tol):
    above = D >= 0
    bl, br = above[:-1, :-1], above[:-1, 1:]
    tr, tl = above[1:, 1:], above[1:, :-1]
    code = bl * 1 + br * 2 + tr * 4 + tl * 8
    seg_a, seg_b = [], []
    for c, (e0, e1) in _PAIR_TABLE.items():
        j, i = np.nonzero(code == c)
        if j.size:
            seg_a.append(grid.edge_ids(j, i, np.full(j.shape, e0)))
            seg_b.append(grid.edge_ids(j, i, np.full(j.shape, e1)))
    j, i = np.nonzero((code == 5) | (code == 10))
    if j.size:
        cx = 0.5 * (grid.xs[i] + grid.xs[i + 1])
        cy = 0.5 * (grid.ys[j] + grid.ys[j + 1])
        centre = field.values(cx, cy) - t
        tol = level_tol * (1 + abs(t))
        if np.any(np.abs(centre) <= tol):
            k = int(np.flatnonzero(np.abs(centre) <= tol)[0])
            raise AmbiguousSaddleCell(
                f"saddle cell centred at ({cx[k]:.6g}, {cy[k]:.6g}) is within "
                f"{tol:.3g} of level {t:.12g}")
        codes = code[j, i]
        c_above = centre >= 0
        for (c, ca), pairs in _SADDLE_TABLE.items():
            m = (codes == c) & (c_above == ca)
            if not np.any(m):
                continue
            for e0, e1 in pairs:
                seg_a.append(grid.edge_ids(j[m], i[m], np.full(m.sum(), e0)))
                seg_b.append(grid.edge_ids(j[m], i[m], np.full(m.sum(), e1)))
    if not seg_a:
        return np.empty(0, int), np.empty(0, int)
    return np.concatenate(seg_a), np.concatenate(seg_b)


def _chain(seg_a, seg_b):
    """Chain undirected edge-to-edge segments into polylines of edge ids."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for k, (a, b) in enumerate(zip(seg_a.tolist(), seg_b.tolist())):
        adj.setdefault(a, []).append((k, b))
        adj.setdefault(b, []).append((k, a))
    used = [False] * len(seg_a)
    chains = []

    def walk(start):
        path = [start]
        cur = start
        while True:
            nxt = None
            for k, other in adj[cur]:
                if not used[k]:
                    used[k] = True
                    nxt = other
                    break
            if nxt is None:
                return path, False
            if nxt == start:
                return path, True
            path.append(nxt)
            cur = nxt

    for e in sorted(e for e, nb in adj.items() if len(nb) == 1):
        if not used[adj[e][0][0]]:
            chains.append(walk(e))
    for e in sorted(adj):
        if any(not used[k] for k, _ in adj[e]):
            chains.append(walk(e))
    return chains


def _dedupe(pts, closed, eps):
    keep = [0]
    for k in range(1, len(pts)):
        if np.hypot(*(pts[k] - pts[keep[-1]])) > eps:
            keep.append(k)
    if closed and len(keep) > 1 and np.hypot(*(pts[keep[-1]] - pts[keep[0]])) <= eps:
        keep.pop()
    return pts[keep]


def _canonical(pts, closed):
    if closed:
        x, y = pts[:, 0], pts[:, 1]
        if 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
            pts = pts[::-1]
        k = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
        return np.roll(pts, -k, axis=0)
    if (pts[-1, 0], pts[-1, 1]) < (pts[0, 0], pts[0, 1]):
        pts = pts[::-1]
    return pts


def extract_level_set(field: ScalarField, t: float, window: Window | None = None,
                      res: int = 256, *, level_tol: float = LEVEL_TOL,
                      rng: np.random.Generator | None = None) -> list[Contour]:
    """All components of ``f = t`` inside the window, as polylines.

    Contours that reach the window boundary come back with ``closed=False``.
    ``rng`` shuffles the cell visit order (the result must not depend on it).
    """
    if res < 16:
        raise ValueError(f"res must be at least 16, got {res}")
    if not math.isfinite(t):
        raise ValueError(f"level must be finite, got {t}")
    window = window or field.window
    grid = _Grid(window, res)
    D = grid.node_values(field) - t
    seg_a, seg_b = _cell_segments(field, grid, D, t, level_tol)
    if seg_a.size == 0:
        return []
    if rng is not None:
        perm = rng.permutation(seg_a.size)
        flip = rng.random(seg_a.size) < 0.5
        seg_a, seg_b = seg_a[perm], seg_b[perm]
        seg_a, seg_b = np.where(flip, seg_b, seg_a), np.where(flip, seg_a, seg_b)
    eids = np.unique(np.concatenate([seg_a, seg_b]))
    points = _refine_crossings(field, grid, D, eids, t)
    index = {e: k for k, e in enumerate(eids.tolist())}
    eps = 1e-12 * window.diagonal
    contours = []
    for path, closed in _chain(seg_a, seg_b):
        pts = _dedupe(points[[index[e] for e in path]], closed, eps)
        if len(pts) < 2 or (closed and len(pts) < 3):
            continue
        contours.append(Contour(_canonical(pts, closed), closed, float(t)))
    contours.sort(key=lambda c: (not c.closed, c.vertices[0, 0], c.vertices[0, 1]))
    return contours


def _inward_normals(c: Contour, idx):
    v = c.vertices
    tang = np.roll(v, -1, axis=0)[idx] - np.roll(v, 1, axis=0)[idx]
    tang /= np.hypot(*tang.T)[:, None]
    if c.signed_area > 0:
        return np.column_stack([-tang[:, 1], tang[:, 0]])
    return np.column_stack([tang[:, 1], -tang[:, 0]])


def contour_sigma(field: ScalarField, c: Contour,
                  grad_tol: float = diffgeo.GRAD_TOL) -> int:
    """Orientation indicator: +1 if N = -grad f/|grad f| points into the curve."""
    if not c.closed:
        raise OpenContour("sigma is only defined for closed contours")
    v = c.vertices
    jets = field.jets(v[:, 0], v[:, 1])
    k_max = int(np.argmax(jets.grad_norm))
    n_samples = min(16, len(v))
    idx = np.unique(np.concatenate(
        [[k_max], np.linspace(0, len(v), n_samples, endpoint=False).astype(int)]))
    frame = diffgeo.level_frame(jets.take(idx), grad_tol)
    n_in = _inward_normals(c, idx)
    dots = n_in[:, 0] * frame.N[0] + n_in[:, 1] * frame.N[1]
    ref = np.sign(dots[np.flatnonzero(idx == k_max)[0]])
    if ref == 0 or np.any(np.sign(dots) != ref):
        raise InconsistentSigma(
            f"n.N changes sign along the contour at level {c.level:.12g}")
    return int(ref)


def contour_integral(field: ScalarField, c: Contour,
                     kind: Integrand = Integrand.CURVATURE, g=None,
                     grad_tol: float = diffgeo.GRAD_TOL) -> float:
    """Composite midpoint rule along the polyline.

    Midpoints are pulled back onto the level set by one Newton step along the
    gradient before the integrand is evaluated. For ``COAREA_WEIGHTED`` the
    integrand is ``g / |grad f|`` where ``g`` maps a jet to values; the
    default ``g`` is the tangential second derivative.
    """
    if kind is Integrand.CURVATURE and not c.closed:
        raise OpenContour("total curvature needs a closed contour")
    p, q = c.segments()
    lengths = np.hypot(*(q - p).T)
    mx, my = field.window.clip(*(0.5 * (p + q)).T)
    j0 = field.jets(mx, my)
    g2 = j0.gx * j0.gx + j0.gy * j0.gy
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(g2 > 0, (j0.value - c.level) / g2, 0.0)
    mx, my = field.window.clip(mx - step * j0.gx, my - step * j0.gy)
    jets = field.jets(mx, my)
    if kind is Integrand.CURVATURE:
        vals = diffgeo.level_curvature(jets, grad_tol)
    else:
        gfun = g or (lambda jet: diffgeo.tangential_second_derivative(jet, grad_tol))
        gn = np.hypot(jets.gx, jets.gy)
        diffgeo.level_frame(jets, grad_tol)
        vals = gfun(jets) / gn
    return math.fsum(np.asarray(vals * lengths, dtype=float).tolist())


# ---------------------------------------------------------------------------
# dumps

def write_contours_csv(path, contours) -> None:
    lines = ["level,component,vertex_index,x,y"]
    for comp, c in enumerate(contours):
        for k, (x, y) in enumerate(c.vertices):
            lines.append(f"{c.level:.12g},{comp},{k},{x:.12g},{y:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_contours_svg(path, contours, window: Window, size: int = 1024) -> None:
    """One ``<path>`` per contour; the window is scaled into a size x size box."""
    w, h = window.xmax - window.xmin, window.ymax - window.ymin
    scale = size / max(w, h)
    width, height = w * scale, h * scale

    def px(x, y):
        return (x - window.xmin) * scale, (window.ymax - y) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
           f'height="{height:.0f}" viewBox="0 0 {width:.3f} {height:.3f}">']
    for c in contours:
        pts = [px(x, y) for x, y in c.vertices]
        d = "M " + " L ".join(f"{a:.3f} {b:.3f}" for a, b in pts)
        if c.closed:
            d += " Z"
        out.append(f'  <path d="{d}" fill="none" stroke="black" stroke-width="1" '
                   f'data-level="{c.level:.12g}"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
