"""Scalar fields: analytic built-ins and grid-backed fields.

A field hands out second-order jets (value, gradient, Hessian). All
evaluation goes through :meth:`ScalarField.jets`, which accepts numpy arrays
of coordinates so the integrators can work in bulk; :meth:`ScalarField.jet`
is the single-point convenience wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadParamArity,
    GridTooSmall,
    NonFiniteSample,
    OutsideWindow,
    UnknownField,
)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and (symmetric) Hessian of f at one or many points.

    Components are floats for a single point, or equally shaped arrays when
    produced by a bulk evaluation. Only one mixed partial is stored, so the
    Hessian is symmetric by construction.
    """

    value: float | np.ndarray
    gx: float | np.ndarray
    gy: float | np.ndarray
    hxx: float | np.ndarray
    hxy: float | np.ndarray
    hyy: float | np.ndarray

    @property
    def grad(self) -> np.ndarray:
        return np.array([self.gx, self.gy])

    @property
    def hess(self) -> np.ndarray:
        return np.array([[self.hxx, self.hxy], [self.hxy, self.hyy]])

    @property
    def grad_norm(self):
        return np.hypot(self.gx, self.gy)

    def at(self, index) -> Jet2:
        """Extract the jet at one position of a bulk evaluation."""
        return Jet2(*(float(np.asarray(c)[index]) for c in self._parts()))

    def take(self, index) -> Jet2:
        """Bulk jet restricted to ``index`` (fancy index or mask)."""
        return Jet2(*(np.asarray(c)[index] for c in self._parts()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(c)) for c in self._parts())

    def _parts(self):
        return (self.value, self.gx, self.gy, self.hxx, self.hxy, self.hyy)


@dataclass(frozen=True)
class Window:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate window {self.as_tuple()}")

    @classmethod
    def square(cls, half_width: float) -> Window:
        return cls(-half_width, half_width, -half_width, half_width)

    def as_tuple(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)

    def contains(self, x, y, slack: float = 0.0):
        sx = slack * (self.xmax - self.xmin)
        sy = slack * (self.ymax - self.ymin)
        return ((x >= self.xmin - sx) & (x <= self.xmax + sx)
                & (y >= self.ymin - sy) & (y <= self.ymax + sy))

    def clip(self, x, y):
        return np.clip(x, self.xmin, self.xmax), np.clip(y, self.ymin, self.ymax)


class ScalarField:
    """Base class: subclasses implement :meth:`jets` and set ``window``."""

    window: Window
    description: str = "field"

    def jets(self, x, y) -> Jet2:
        raise NotImplementedError

    def values(self, x, y):
        return self.jets(x, y).value

    def jet(self, p) -> Jet2:
        px, py = (float(c) for c in p)
        if not (math.isfinite(px) and math.isfinite(py)):
            raise ValueError(f"non-finite point ({px}, {py})")
        return self.jets(np.array([px]), np.array([py])).at(0)

    def __repr__(self):
        return f"<{type(self).__name__} {self.description}>"


# ---------------------------------------------------------------------------
# analytic catalog

def _gauss_jet(x, y, cx=0.0):
    u = x - cx
    e = np.exp(-(u * u) - y * y)
    return (e, -2 * u * e, -2 * y * e, (4 * u * u - 2) * e, 4 * u * y * e,
            (4 * y * y - 2) * e)


def _paraboloid(x, y, _):
    one = np.ones_like(x)
    return (x * x + y * y, 2 * x, 2 * y, 2 * one, 0 * one, 2 * one)


def _gaussian(x, y, _):
    return _gauss_jet(x, y)


def _two_bump(x, y, params):
    c = params[0]
    left = _gauss_jet(x, y, -c)
    right = _gauss_jet(x, y, c)
    return tuple(r + l for r, l in zip(right, left))


def _linear(x, y, _):
    zero = np.zeros_like(x)
    return (x.copy(), zero + 1, zero, zero, zero, zero)


def _ellipse_quadratic(x, y, params):
    ax, ay = (1.0 / (p * p) for p in params)
    one = np.ones_like(x)
    return (ax * x * x + ay * y * y, 2 * ax * x, 2 * ay * y, 2 * ax * one,
            0 * one, 2 * ay * one)


# name -> (jet function, parameter arity, default window builder)
CATALOG = {
    "paraboloid": (_paraboloid, 0, lambda p: Window.square(3.0)),
    "gaussian": (_gaussian, 0, lambda p: Window.square(3.0)),
    "two_bump": (_two_bump, 1, lambda p: Window.square(abs(p[0]) + 3.0)),
    "linear": (_linear, 0, lambda p: Window.square(3.0)),
    "ellipse_quadratic": (
        _ellipse_quadratic, 2, lambda p: Window.square(1.5 * max(abs(p[0]), abs(p[1])))),
}


class BuiltinField(ScalarField):
    def __init__(self, name: str, params=(), window: Window | None = None):
        if name not in CATALOG:
            raise UnknownField(name)
        fn, arity, default_window = CATALOG[name]
        params = tuple(float(p) for p in params)
        if len(params) != arity:
            raise BadParamArity(f"{name} takes {arity} parameter(s), got {len(params)}")
        if name == "ellipse_quadratic" and 0.0 in params:
            raise ValueError("ellipse_quadratic semi-axes must be nonzero")
        self.name = name
        self.params = params
        self._fn = fn
        self.window = window if window is not None else default_window(params)
        args = ",".join(f"{p:g}" for p in params)
        self.description = f"{name}({args})" if params else name

    def jets(self, x, y) -> Jet2:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return Jet2(*self._fn(x, y, self.params))


def builtin_field(name: str, params=(), window: Window | None = None) -> BuiltinField:
    """Look up an analytic field from the catalog.

    Known names: paraboloid, gaussian, two_bump (param: bump offset c),
    linear, ellipse_quadratic (params: semi-axes).
    """
    return BuiltinField(name, params, window)


# ---------------------------------------------------------------------------
# grid-backed fields

@dataclass
class GridData:
    nx: int
    ny: int
    window: Window
    samples: np.ndarray  # row-major, row 0 is the ymin row

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if self.nx < 4 or self.ny < 4:
            raise GridTooSmall(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if self.samples.size != self.nx * self.ny:
            raise ValueError(
                f"expected {self.nx * self.ny} samples, got {self.samples.size}")
        if not np.all(np.isfinite(self.samples)):
            bad = int(np.flatnonzero(~np.isfinite(self.samples))[0])
            raise NonFiniteSample(f"sample {bad} (row {bad // self.nx}) is not finite")

    @property
    def array(self) -> np.ndarray:
        return self.samples.reshape(self.ny, self.nx)

    @classmethod
    def from_field(cls, field: ScalarField, nx: int, ny: int,
                   window: Window | None = None) -> GridData:
        w = window or field.window
        xs = np.linspace(w.xmin, w.xmax, nx)
        ys = np.linspace(w.ymin, w.ymax, ny)
        X, Y = np.meshgrid(xs, ys)
        return cls(nx, ny, w, field.values(X, Y).reshape(-1))


def _d1(f, h, axis):
    return np.gradient(f, h, axis=axis, edge_order=2)


def _d2(f, h, axis):
    """Second derivative: 3-point central stencil, 4-point one-sided at edges."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / (h * h)
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / (h * h)
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


class GridField(ScalarField):
    """Field backed by sampled data, with finite-difference derivative grids.

    Each derivative grid is bilinearly interpolated at query points; queries
    outside the window raise :class:`OutsideWindow`.
    """

    def __init__(self, data: GridData, description: str = "grid"):
        self.data = data
        self.window = data.window
        self.description = description
        w = data.window
        self.hx = (w.xmax - w.xmin) / (data.nx - 1)
        self.hy = (w.ymax - w.ymin) / (data.ny - 1)
        f = data.array
        fx = _d1(f, self.hx, 1)
        fy = _d1(f, self.hy, 0)
        fxy = 0.5 * (_d1(fx, self.hy, 0) + _d1(fy, self.hx, 1))
        self._grids = np.stack([f, fx, fy, _d2(f, self.hx, 1), fxy, _d2(f, self.hy, 0)])

    def _weights(self, x, y):
        w = self.window
        inside = w.contains(x, y, slack=1e-12)
        if not np.all(inside):
            i = int(np.flatnonzero(~np.ravel(inside))[0])
            raise OutsideWindow(
                f"({np.ravel(x)[i]:.6g}, {np.ravel(y)[i]:.6g}) is outside {w.as_tuple()}")
        u = np.clip((x - w.xmin) / self.hx, 0.0, self.data.nx - 1)
        v = np.clip((y - w.ymin) / self.hy, 0.0, self.data.ny - 1)
        i = np.minimum(u.astype(int), self.data.nx - 2)
        j = np.minimum(v.astype(int), self.data.ny - 2)
        return i, j, u - i, v - j

    def _interp(self, grids, i, j, s, t):
        g00 = grids[..., j, i]
        g10 = grids[..., j, i + 1]
        g01 = grids[..., j + 1, i]
        g11 = grids[..., j + 1, i + 1]
        return (g00 * (1 - s) * (1 - t) + g10 * s * (1 - t)
                + g01 * (1 - s) * t + g11 * s * t)

    def jets(self, x, y) -> Jet2:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        parts = self._interp(self._grids, *self._weights(x, y))
        return Jet2(*parts)

    def values(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._interp(self._grids[0], *self._weights(x, y))


def grid_field(data: GridData, description: str = "grid") -> GridField:
    return GridField(data, description)


def read_grid(path) -> GridData:
    """Read the plain-text grid format.

    Line 1: ``nx ny``; line 2: ``xmin xmax ymin ymax``; then ``ny`` rows of
    ``nx`` values, the first row at ``ymin``.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: missing header lines")
    try:
        nx, ny = (int(tok) for tok in lines[0].split())
        xmin, xmax, ymin, ymax = (float(tok) for tok in lines[1].split())
    except ValueError as exc:
        raise ValueError(f"{path}: bad header: {exc}") from None
    rows = lines[2:]
    if len(rows) != ny:
        raise ValueError(f"{path}: expected {ny} data rows, found {len(rows)}")
    samples = []
    for k, row in enumerate(rows):
        vals = [float(tok) for tok in row.split()]
        if len(vals) != nx:
            raise ValueError(f"{path}: row {k} has {len(vals)} values, expected {nx}")
        samples.extend(vals)
    return GridData(nx, ny, Window(xmin, xmax, ymin, ymax), np.array(samples))


def write_grid(path, data: GridData) -> None:
    w = data.window
    out = [f"{data.nx} {data.ny}", f"{w.xmin!r} {w.xmax!r} {w.ymin!r} {w.ymax!r}"]
    out.extend(" ".join(repr(float(v)) for v in row) for row in data.array)
    Path(path).write_text("\n".join(out) + "\n")
