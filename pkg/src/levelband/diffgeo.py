"""Pointwise geometry of level curves.

Conventions are fixed: the unit normal is ``N = -grad f / |grad f|`` and
the tangent ``T = (-f_y, f_x) / |grad f|``, so ``(T, N)`` is positively
oriented. The signed curvature of the level curve through ``p`` is then
``D_T^2 f(p) / |grad f(p)|``.

The functions accept jets holding scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearCriticalPoint, NonUnitDirection
from .field import Jet2

GRAD_TOL = 1e-8


@dataclass(frozen=True)
class Frame:
    T: np.ndarray
    N: np.ndarray
    grad_norm: float | np.ndarray


def _frame_parts(jet: Jet2):
    g = np.hypot(jet.gx, jet.gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        nx, ny = -jet.gx / g, -jet.gy / g
    # T is N rotated by -90 degrees: (-f_y, f_x) / |grad f|
    return ny, -nx, nx, ny, g


def _raise_if_critical(jet: Jet2, g, grad_tol):
    bad = ~(g >= grad_tol)
    if np.any(bad):
        i = int(np.flatnonzero(np.ravel(bad))[0])
        raise NearCriticalPoint(float(np.ravel(g)[i]))


def level_frame(jet: Jet2, grad_tol: float = GRAD_TOL) -> Frame:
    """The (T, N) frame of the level curve through the jet's point."""
    tx, ty, nx, ny, g = _frame_parts(jet)
    _raise_if_critical(jet, g, grad_tol)
    return Frame(np.array([tx, ty]), np.array([nx, ny]), g)


def quadratic_form(jet: Jet2, vx, vy):
    """``v . (H v)`` without any unit-length check."""
    return jet.hxx * vx * vx + 2.0 * jet.hxy * vx * vy + jet.hyy * vy * vy


def second_directional(jet: Jet2, v) -> float:
    """Second-order directional derivative of f along the unit vector ``v``."""
    vx, vy = v
    norm = np.hypot(vx, vy)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise NonUnitDirection(f"|v| = {np.ravel(norm)[0]!r}, expected 1")
    return quadratic_form(jet, vx, vy)


def tangential_second_derivative(jet: Jet2, grad_tol: float = GRAD_TOL):
    """D_T^2 f with T the level-curve tangent."""
    tx, ty, _, _, g = _frame_parts(jet)
    _raise_if_critical(jet, g, grad_tol)
    return quadratic_form(jet, tx, ty)


def level_curvature(jet: Jet2, grad_tol: float = GRAD_TOL):
    """Signed curvature of the level curve, sign fixed by N = -grad f/|grad f|."""
    fr = level_frame(jet, grad_tol)
    return second_directional(jet, fr.T) / fr.grad_norm


def masked_tangential_d2(jet: Jet2, grad_tol: float = GRAD_TOL):
    """Bulk D_T^2 f with near-critical points zeroed; returns (values, ok-mask).

    Uses the closed form ``(f_xx f_y^2 - 2 f_xy f_x f_y + f_yy f_x^2) / |grad f|^2``
    so no frame has to be formed.
    """
    g2 = jet.gx * jet.gx + jet.gy * jet.gy
    ok = g2 >= grad_tol * grad_tol
    safe = np.where(ok, g2, 1.0)
    num = (jet.hxx * jet.gy * jet.gy - 2.0 * jet.hxy * jet.gx * jet.gy
           + jet.hyy * jet.gx * jet.gx)
    return np.where(ok, num / safe, 0.0), ok
