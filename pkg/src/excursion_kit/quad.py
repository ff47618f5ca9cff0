"""Deterministic quadrature: tensor Gauss-Legendre with dyadic refinement.

Three entry points share one adaptive core:

* :func:`integrate_face` integrates over the free coordinates of an open
  rectangle face.
* :func:`integrate_tail` integrates over a half-line [u, inf) through the
  rational map x = u + s/(1-s).
* :func:`integrate_cone` integrates over [u, inf) x (orthant cone), each
  semi-infinite axis mapped back to (0, 1) the same way.

Integrands are vectorised: they receive an (m, d) array of points and must
return m values.  Convergence of a box is judged by comparing the tensor
rule with the sum over its 2^d dyadic children; boxes are split until the
difference passes ``rel_tol`` (with an ``abs_tol`` floor for integrals that
are numerically zero) or ``max_subdivisions`` levels are exhausted, in
which case the result carries ``converged=False`` and a QuadratureWarning.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import CapabilityError, QuadratureError, QuadratureWarning
from .geometry import Face, OutwardCone

__all__ = [
    "QuadSpec",
    "QuadResult",
    "TailMap",
    "integrate_face",
    "integrate_box",
    "integrate_tail",
    "integrate_cone",
]


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature controls.

    order_per_axis: Gauss-Legendre nodes per axis of each box.
    adaptive: refine dyadically until tolerances hold.
    rel_tol: relative acceptance threshold per box.
    abs_tol: absolute scale under which refinement stops (zero integrals).
    max_subdivisions: dyadic depth cap.
    cone_dim_cap: dimension cap for integrate_cone.
    max_boxes: safety cap on the number of evaluated boxes.
    """

    order_per_axis: int = 24
    adaptive: bool = True
    rel_tol: float = 1e-6
    abs_tol: float = 1e-14
    max_subdivisions: int = 12
    cone_dim_cap: int = 4
    max_boxes: int = 200_000

    def __post_init__(self):
        if self.order_per_axis < 2:
            raise ValueError("order_per_axis must be at least 2")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 0:
            raise ValueError("max_subdivisions must be nonnegative")


class QuadResult(NamedTuple):
    value: float
    err_est: float
    converged: bool = True


@dataclass(frozen=True)
class TailMap:
    """Rational map of [origin, inf) onto s in [0, 1): x = origin + s/(1-s).

    ``sign=-1`` maps onto (-inf, origin] instead.  ``weight`` is the
    Jacobian dx/ds = (1-s)^{-2}.
    """

    origin: float = 0.0
    sign: int = 1

    def map(self, s):
        s = np.asarray(s, dtype=float)
        return self.origin + self.sign * s / (1.0 - s)

    def weight(self, s):
        s = np.asarray(s, dtype=float)
        return (1.0 - s) ** -2.0


@functools.lru_cache(maxsize=None)
def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@functools.lru_cache(maxsize=None)
def _tensor_nodes(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-cube [0,1]^dim tensor nodes (m, dim) and weights (m,)."""
    x, w = _gl_nodes(order)
    x01 = 0.5 * (x + 1.0)
    w01 = 0.5 * w
    grids = np.meshgrid(*([x01] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wt = functools.reduce(np.multiply.outer, [w01] * dim).ravel()
    return pts, wt


def _eval_box(f, lo, hi, order):
    """Tensor Gauss-Legendre estimate of f over the box [lo, hi]."""
    dim = lo.shape[0]
    pts01, wts = _tensor_nodes(order, dim)
    widths = hi - lo
    pts = lo + pts01 * widths
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != (pts.shape[0],):
        raise QuadratureError(
            f"integrand returned shape {vals.shape}, expected ({pts.shape[0]},)"
        )
    bad = ~np.isfinite(vals)
    if bad.any():
        t_bad = pts[int(np.argmax(bad))]
        raise QuadratureError(f"integrand non-finite at t = {t_bad.tolist()}")
    vol = float(np.prod(widths))
    return float(vals @ wts) * vol


def _split(lo, hi):
    """2^d dyadic children of a box."""
    dim = lo.shape[0]
    mid = 0.5 * (lo + hi)
    children = []
    for bits in range(1 << dim):
        clo = lo.copy()
        chi = hi.copy()
        for ax in range(dim):
            if bits >> ax & 1:
                clo[ax] = mid[ax]
            else:
                chi[ax] = mid[ax]
        children.append((clo, chi))
    return children


def integrate_box(f, lower, upper, spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Adaptive tensor integration of f over a rectangle [lower, upper]."""
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("lower/upper must be matching vectors")
    if np.any(hi <= lo):
        raise ValueError("need lower < upper on every axis")
    order = spec.order_per_axis
    coarse = _eval_box(f, lo, hi, order)
    if not spec.adaptive:
        # single pass: no refinement, hence no error estimate
        return QuadResult(coarse, math.nan, True)

    total = 0.0
    err = 0.0
    converged = True
    boxes_used = 1
    # stack holds (lo, hi, coarse value, depth)
    stack = [(lo, hi, coarse, 0)]
    while stack:
        blo, bhi, bval, depth = stack.pop()
        children = _split(blo, bhi)
        boxes_used += len(children)
        cvals = [_eval_box(f, clo, chi, order) for clo, chi in children]
        refined = math.fsum(cvals)
        diff = abs(refined - bval)
        ok = diff <= spec.rel_tol * abs(refined) or diff <= spec.abs_tol
        if ok or depth >= spec.max_subdivisions or boxes_used > spec.max_boxes:
            total += refined
            err += diff
            if not ok:
                converged = False
        else:
            for (clo, chi), cval in zip(children, cvals):
                stack.append((clo, chi, cval, depth + 1))
    if not converged:
        warnings.warn(
            f"adaptive quadrature stopped at depth {spec.max_subdivisions} "
            f"with estimates {total:.17g} (refined) and err ~ {err:.3g}",
            QuadratureWarning,
            stacklevel=2,
        )
    return QuadResult(total, err, converged)


def integrate_face(face: Face, f, spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Integrate f over the free coordinates of an open face (k >= 1).

    f receives an (m, k) array of free-coordinate points.
    """
    if face.k < 1:
        raise ValueError("face must have at least one free axis")
    lo, hi = face.free_bounds()
    return integrate_box(f, lo, hi, spec)


def integrate_tail(u: float, g, spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Integrate g over [u, inf) via the rational tail map."""
    tm = TailMap(origin=float(u))

    def mapped(s):
        s1 = s[:, 0]
        return np.asarray(g(tm.map(s1)), dtype=float) * tm.weight(s1)

    return integrate_box(mapped, [0.0], [1.0], spec)


def integrate_cone(
    cone: OutwardCone, u: float | None, h, spec: QuadSpec = QuadSpec()
) -> QuadResult:
    """Integrate h over [u, inf) x E for the orthant cone E.

    The integrand sees points (x, y_1, ..., y_c) with the cone coordinates
    in the cone's listed axis order; pass ``u=None`` to drop the x part.
    Dimension (x included) is capped at ``spec.cone_dim_cap``.
    """
    cdim = cone.dim
    dims = cdim + (0 if u is None else 1)
    if dims == 0:
        raise ValueError("nothing to integrate: empty cone and no x part")
    if dims > spec.cone_dim_cap:
        raise CapabilityError(
            f"cone integral dimension {dims} exceeds cap {spec.cone_dim_cap}; "
            "use the Monte Carlo fallback"
        )
    signs = cone.signs()
    has_x = u is not None
    x_map = TailMap(origin=float(u)) if has_x else None

    def mapped(s):
        m = s.shape[0]
        pts = np.empty((m, dims))
        jac = np.ones(m)
        col = 0
        if has_x:
            sx = s[:, 0]
            pts[:, 0] = x_map.map(sx)
            jac *= x_map.weight(sx)
            col = 1
        for i in range(cdim):
            si = s[:, col + i]
            pts[:, col + i] = signs[i] * si / (1.0 - si)
            jac *= (1.0 - si) ** -2.0
        return np.asarray(h(pts), dtype=float) * jac

    return integrate_box(mapped, np.zeros(dims), np.ones(dims), spec)
