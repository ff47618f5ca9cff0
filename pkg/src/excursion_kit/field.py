"""Gaussian field models with stationary increments.

A model is specified by a variogram g (the variance of an increment,
nu(t) = E(X(t+h) - X(h))^2 evaluated at lag t) plus an independent additive
offset variance sigma0^2.  All second-order structure follows:

    nu(t)     = sigma0^2 + g(t)            (variance of X(t), X(0) pinned)
    C(t, s)   = sigma0^2 + (g(t) + g(s) - g(t - s)) / 2
    Lambda    = (1/2) Hess g(0)            (gradient covariance, constant)
    Lambda(t) = (1/2) Hess g(t)
    c(t)      = (1/2) grad nu(t)           (Cov(X(t), grad X(t)))

Model methods are vectorised over leading axes: points have shape
(..., N).  The concrete models are finite spectral sums (exactly
simulable) and a Gaussian-bump variogram family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import (
    ConfigError,
    DegenerateModelError,
    ModelInconsistencyError,
)
from .geometry import (
    Face,
    RectDomain,
    embed_point,
    embed_points,
    enumerate_faces,
    face_of_point,
)

__all__ = [
    "FieldModel",
    "SpectralSumField",
    "CosineField",
    "GaussianIncrementField",
    "CovarianceAtPoint",
    "covariance_at",
    "H2Report",
    "check_h2",
    "MaxVarianceResult",
    "max_variance",
    "DerivativeReport",
    "derivative_consistency",
    "field_from_dict",
    "field_to_dict",
]

# condition-number ceiling for gradient-covariance blocks
COND_CAP = 1e12
# negative-variance tolerance: below -NEG_TOL is an inconsistency,
# within [-NEG_TOL, 0) is clamped to zero
NEG_TOL = 1e-10
# variance below which conditional quantities are treated as degenerate
DEGENERATE_VAR = 1e-14


class FieldModel:
    """Base class: derives all second-order quantities from the variogram.

    Subclasses implement _g, _g_grad, _g_hess (vectorised over (..., N))
    and may implement _g_third for analytic third derivatives.
    """

    dim: int
    offset_var: float

    # -- subclass hooks ----------------------------------------------------
    def _g(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _g_grad(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _g_hess(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _g_third(self, h: np.ndarray):
        return None

    # -- derived structure -------------------------------------------------
    def variance(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.offset_var + self._g(t)

    def covariance(self, t, s) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.offset_var + 0.5 * (self._g(t) + self._g(s) - self._g(t - s))

    def grad_variance(self, t) -> np.ndarray:
        return self._g_grad(np.asarray(t, dtype=float))

    def hess_variance(self, t) -> np.ndarray:
        return self._g_hess(np.asarray(t, dtype=float))

    def third_variance(self, t):
        """Third derivative tensor of nu, or None when not available."""
        return self._g_third(np.asarray(t, dtype=float))

    @property
    def lambda_mat(self) -> np.ndarray:
        """Gradient covariance Lambda = (1/2) Hess g(0)."""
        return 0.5 * self._g_hess(np.zeros(self.dim))

    def lambda_at(self, t) -> np.ndarray:
        """Lambda(t) = (1/2) Hess g(t) = Cov(grad X(t+s), grad X(s))."""
        return 0.5 * self._g_hess(np.asarray(t, dtype=float))

    def cvec_at(self, t) -> np.ndarray:
        """c(t) = Cov(X(t), grad X(t)) = (1/2) grad nu(t)."""
        return 0.5 * self._g_grad(np.asarray(t, dtype=float))

    @property
    def is_spectral(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class SpectralSumField(FieldModel):
    """Finite spectral sum: g(h) = 2 sum_m w_m (1 - cos<h, freq_m>).

    freqs has shape (M, N), weights shape (M,) with positive entries.
    Realizations are exact finite combinations of cosines and sines, so
    the model supports exact simulation.
    """

    freqs: np.ndarray
    weights: np.ndarray
    offset_var: float = 1.0

    def __post_init__(self):
        fr = np.atleast_2d(np.asarray(self.freqs, dtype=float))
        wt = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if fr.ndim != 2 or fr.shape[0] != wt.shape[0] or fr.shape[0] == 0:
            raise ConfigError(
                f"need matching atoms: freqs {fr.shape}, weights {wt.shape}"
            )
        if not np.all(np.isfinite(fr)) or not np.all(np.isfinite(wt)):
            raise ConfigError("frequencies and weights must be finite")
        if np.any(wt <= 0):
            raise ConfigError("atom weights must be positive")
        if not (np.isfinite(self.offset_var) and self.offset_var >= 0):
            raise ConfigError("offset variance must be a nonnegative real")
        object.__setattr__(self, "freqs", fr)
        object.__setattr__(self, "weights", wt)
        object.__setattr__(self, "offset_var", float(self.offset_var))

    @property
    def dim(self) -> int:
        return self.freqs.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.freqs.shape[0]

    def _phases(self, h: np.ndarray) -> np.ndarray:
        return h @ self.freqs.T  # (..., M)

    def _g(self, h):
        ph = self._phases(h)
        return 2.0 * ((1.0 - np.cos(ph)) @ self.weights)

    def _g_grad(self, h):
        ph = self._phases(h)
        return 2.0 * ((self.weights * np.sin(ph)) @ self.freqs)

    def _g_hess(self, h):
        ph = self._phases(h)
        wc = self.weights * np.cos(ph)
        return 2.0 * np.einsum("...m,mi,mj->...ij", wc, self.freqs, self.freqs)

    def _g_third(self, h):
        ph = self._phases(h)
        ws = self.weights * np.sin(ph)
        return -2.0 * np.einsum(
            "...m,mi,mj,ml->...ijl", ws, self.freqs, self.freqs, self.freqs
        )

    @property
    def lambda_spectral(self) -> np.ndarray:
        """Second spectral moment sum_m w_m freq_m freq_m^T."""
        return np.einsum("m,mi,mj->ij", self.weights, self.freqs, self.freqs)

    @property
    def is_spectral(self) -> bool:
        return True


class CosineField(SpectralSumField):
    """Fixed two-atom cosine field on R^2.

    Atoms e_1 and e_2 with weight 1/2 each and unit offset variance:
    nu(t) = 3 - cos t_1 - cos t_2, Lambda = I/2.
    """

    def __init__(self):
        super().__init__(
            freqs=np.eye(2), weights=np.array([0.5, 0.5]), offset_var=1.0
        )


@dataclass(frozen=True)
class GaussianIncrementField(FieldModel):
    """Gaussian-bump variogram g(h) = 2 (1 - exp(-||h/scale||^2))."""

    dim: int
    scale: float = 1.0
    offset_var: float = 0.0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ConfigError("dimension must be a positive integer")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ConfigError("scale must be a positive real")
        if not (np.isfinite(self.offset_var) and self.offset_var >= 0):
            raise ConfigError("offset variance must be a nonnegative real")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "offset_var", float(self.offset_var))

    def _r2(self, h):
        return np.sum((h / self.scale) ** 2, axis=-1)

    def _g(self, h):
        return 2.0 * (1.0 - np.exp(-self._r2(h)))

    def _g_grad(self, h):
        e = np.exp(-self._r2(h))
        return (4.0 / self.scale**2) * e[..., None] * h

    def _g_hess(self, h):
        l2 = self.scale**2
        e = np.exp(-self._r2(h))
        eye = np.eye(self.dim)
        outer = np.einsum("...i,...j->...ij", h, h)
        return (4.0 / l2) * e[..., None, None] * (eye - 2.0 * outer / l2)

    def _g_third(self, h):
        l2 = self.scale**2
        e = np.exp(-self._r2(h))
        eye = np.eye(self.dim)
        sym = (
            np.einsum("...l,ij->...ijl", h, eye)
            + np.einsum("...i,jl->...ijl", h, eye)
            + np.einsum("...j,il->...ijl", h, eye)
        )
        triple = np.einsum("...i,...j,...l->...ijl", h, h, h)
        return (-8.0 / l2**2) * e[..., None, None, None] * (sym - 2.0 * triple / l2)


@dataclass(frozen=True, eq=False)
class FaultInjectedField(FieldModel):
    """Wrapper that deliberately mis-scales the Hessian supplier.

    Exists so the derivative-consistency validator can be shown to catch a
    bad analytic derivative; never use it for actual computations.
    """

    base: FieldModel
    hessian_scale: float = 1.25

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.base.dim

    @property
    def offset_var(self) -> float:  # type: ignore[override]
        return self.base.offset_var

    def _g(self, h):
        return self.base._g(h)

    def _g_grad(self, h):
        return self.base._g_grad(h)

    def _g_hess(self, h):
        return self.hessian_scale * self.base._g_hess(h)

    def _g_third(self, h):
        return self.base._g_third(h)


# ---------------------------------------------------------------------------
# Pointwise covariance bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceAtPoint:
    """Second-order quantities of (X, grad X) at one point of a face.

    theta_sq is the conditional variance of X given the free-gradient
    block; gamma_sq conditions on the full gradient.  cvec holds
    C_j(t) = [Cov(X, grad X)^{-1}]_{1, j+1}, zero when degenerate.
    """

    t: np.ndarray
    face: Face
    nu: float
    c: np.ndarray
    lam: np.ndarray
    lam_t: np.ndarray
    lam_J: np.ndarray
    lam_J_t: np.ndarray
    theta_sq: float
    gamma_sq: float
    cvec: np.ndarray


def _check_cond(mat: np.ndarray, what: str) -> None:
    if mat.size == 0:
        return
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_CAP:
        raise DegenerateModelError(
            f"{what} has condition number {cond:.3e} beyond {COND_CAP:.0e}"
        )


def _clamp_var(v: float, what: str) -> float:
    if v < -NEG_TOL:
        raise ModelInconsistencyError(f"{what} = {v:.3e} is negative beyond tolerance")
    return max(v, 0.0)


def covariance_at(model: FieldModel, face: Face, t_free) -> CovarianceAtPoint:
    """Bundle nu, c, Lambda blocks and conditional variances at a face point."""
    t = embed_point(face, np.asarray(t_free, dtype=float))
    nu = float(model.variance(t))
    c = model.cvec_at(t)
    lam = model.lambda_mat
    lam_t = model.lambda_at(t)
    sig = list(face.sigma)
    lam_J = lam[np.ix_(sig, sig)]
    lam_J_t = lam_t[np.ix_(sig, sig)]

    _check_cond(lam, "gradient covariance")
    _check_cond(lam_J, "free-block gradient covariance")

    if sig:
        sol_J = np.linalg.solve(lam_J, c[sig])
        theta_sq = _clamp_var(nu - float(c[sig] @ sol_J), "theta^2")
    else:
        theta_sq = nu
    sol = np.linalg.solve(lam, c)
    gamma_sq = _clamp_var(nu - float(c @ sol), "gamma^2")

    if gamma_sq < DEGENERATE_VAR:
        cvec = np.zeros(model.dim)
    else:
        cvec = -sol / gamma_sq
    return CovarianceAtPoint(
        t=t,
        face=face,
        nu=nu,
        c=c,
        lam=lam,
        lam_t=lam_t,
        lam_J=lam_J,
        lam_J_t=lam_J_t,
        theta_sq=theta_sq,
        gamma_sq=gamma_sq,
        cvec=cvec,
    )


# ---------------------------------------------------------------------------
# H2 scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class H2Report:
    flagged: bool
    min_eig: float
    argmin: np.ndarray
    tol: float


def _interior_grid(domain: RectDomain, per_axis: int) -> np.ndarray:
    """Uniform interior grid, capped so the total point count stays sane."""
    n = domain.dim
    per_axis = max(2, min(per_axis, int(round(2e5 ** (1.0 / n)))))
    axes = [
        domain.lower[i]
        + (domain.upper[i] - domain.lower[i])
        * (np.arange(1, per_axis + 1) / (per_axis + 1))
        for i in range(n)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def check_h2(
    model: FieldModel, domain: RectDomain, grid_per_axis: int = 33, tol: float = 1e-10
) -> H2Report:
    """Scan min eig(Lambda - Lambda(t)) over a uniform interior grid.

    Report-only: flags when the scanned minimum drops below tol.  Note the
    check is as fine as its grid; singular crossings between grid points
    need a grid that straddles them closely.
    """
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    pts = _interior_grid(domain, grid_per_axis)
    lam = model.lambda_mat
    diff = lam - model.lambda_at(pts)
    eigs = np.linalg.eigvalsh(diff)[..., 0]
    i0 = int(np.argmin(eigs))
    best_t, best_e = pts[i0], float(eigs[i0])
    return H2Report(flagged=best_e < tol, min_eig=best_e, argmin=best_t, tol=tol)


# ---------------------------------------------------------------------------
# Variance maximisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxVarianceResult:
    """Global maximum of nu over the closed rectangle.

    candidates lists the distinct near-optimal points (within tie_tol of
    the max); more than one entry means the maximizer is ambiguous.
    """

    sigma_sq: float
    point: np.ndarray
    face: Face
    candidates: tuple[tuple[float, tuple[float, ...]], ...]
    tie_tol: float

    @property
    def tied(self) -> bool:
        return len(self.candidates) > 1


GRAD_TOL = 1e-10
TIE_TOL = 1e-8


def _refine_on_face(model: FieldModel, face: Face, x0: np.ndarray) -> np.ndarray:
    """Projected ascent of nu on the closed face from free coordinates x0."""
    lo, hi = face.free_bounds()
    sig = list(face.sigma)
    x = np.clip(x0, lo, hi)
    if not sig:
        return x
    fixed_vals = face.fixed_values()

    def full(xf):
        t = np.empty(face.domain.dim)
        t[sig] = xf
        for (j, _), v in zip(face.epsilon, fixed_vals):
            t[j] = v
        return t

    fval = float(model.variance(full(x)))
    for _ in range(200):
        t = full(x)
        g = model.grad_variance(t)[sig]
        h = model.hess_variance(t)[np.ix_(sig, sig)]
        # projected gradient: zero out components pushing into an active bound
        pg = g.copy()
        pg[(x <= lo) & (g < 0)] = 0.0
        pg[(x >= hi) & (g > 0)] = 0.0
        if np.linalg.norm(pg, ord=np.inf) < GRAD_TOL:
            break
        step = None
        try:
            evals = np.linalg.eigvalsh(h)
            if evals[-1] < -1e-12:  # negative definite: Newton ascent
                step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = None
        if step is None:
            step = pg / max(np.linalg.norm(pg), 1.0)
        alpha = 1.0
        moved = False
        for _ in range(40):
            xn = np.clip(x + alpha * step, lo, hi)
            fn = float(model.variance(full(xn)))
            if fn > fval + 1e-18:
                x, fval, moved = xn, fn, True
                break
            alpha *= 0.5
        if not moved:
            break
    return x


def max_variance(
    model: FieldModel,
    domain: RectDomain,
    grid_per_axis: int = 64,
    tie_tol: float = TIE_TOL,
) -> MaxVarianceResult:
    """Maximise nu over the closed rectangle: face-wise scan plus polish.

    Every face is scanned on a uniform grid of its free coordinates and the
    best grid point is refined by projected Newton/gradient ascent.  Distinct
    refined candidates within tie_tol of the best value are all reported.
    """
    n = domain.dim
    cands: list[tuple[float, np.ndarray]] = []
    for fc in enumerate_faces(domain):
        if fc.k == 0:
            t = np.array(
                [
                    domain.upper[j] if e else domain.lower[j]
                    for j, e in fc.epsilon
                ]
            )
            cands.append((float(model.variance(t)), t))
            continue
        lo, hi = fc.free_bounds()
        per_axis = max(2, min(grid_per_axis, int(round(4e6 ** (1.0 / fc.k)))))
        axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(fc.k)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts_free = np.stack([m.ravel() for m in mesh], axis=-1)
        pts = embed_points(fc, pts_free)
        vals = model.variance(pts)
        order = np.argsort(vals)[::-1]
        # polish the few best grid points; distinct starts may find
        # distinct maximizers on the same face
        for idx in order[: min(3, len(order))]:
            xf = _refine_on_face(model, fc, pts_free[idx])
            t = embed_points(fc, xf[None, :])[0]
            cands.append((float(model.variance(t)), t))

    best_val = max(v for v, _ in cands)
    scale = max(1.0, float(np.max(np.abs(domain.lower_arr))), float(np.max(np.abs(domain.upper_arr))))
    distinct: list[tuple[float, np.ndarray]] = []
    for v, t in sorted(cands, key=lambda p: -p[0]):
        if v < best_val - tie_tol:
            break
        if all(np.linalg.norm(t - t2) > 1e-6 * scale for _, t2 in distinct):
            distinct.append((v, t))
    best_val, best_t = distinct[0]
    host = face_of_point(domain, best_t, tol=1e-7)
    return MaxVarianceResult(
        sigma_sq=best_val,
        point=best_t,
        face=host,
        candidates=tuple((v, tuple(t)) for v, t in distinct),
        tie_tol=tie_tol,
    )


# ---------------------------------------------------------------------------
# Derivative consistency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeReport:
    max_grad_err: float
    max_hess_err: float
    rtol: float

    @property
    def passed(self) -> bool:
        return self.max_grad_err <= self.rtol and self.max_hess_err <= self.rtol


def derivative_consistency(
    model: FieldModel,
    domain: RectDomain,
    n_points: int = 100,
    seed: int = 0,
    step_scale: float = 1e-5,
    rtol: float = 1e-5,
) -> DerivativeReport:
    """Central finite differences of nu versus grad_variance / hess_variance.

    Errors are relative to a curvature scale so the check is meaningful for
    flat and strongly varying models alike.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.lower_arr, domain.upper_arr
    span = hi - lo
    pts = lo + (0.05 + 0.9 * rng.random((n_points, domain.dim))) * span
    h = step_scale * span
    n = domain.dim
    lam_scale = max(np.max(np.abs(model.lambda_mat)), 1e-12)

    max_g, max_h = 0.0, 0.0
    for t in pts:
        g = model.grad_variance(t)
        hess = model.hess_variance(t)
        scale_g = max(np.max(np.abs(g)), math.sqrt(lam_scale))
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h[i]
            fd = (model.variance(t + ei) - model.variance(t - ei)) / (2 * h[i])
            max_g = max(max_g, abs(fd - g[i]) / scale_g)
            # second derivatives from gradient differences keeps the error O(h^2)
            gp = model.grad_variance(t + ei)
            gm = model.grad_variance(t - ei)
            fd_row = (gp - gm) / (2 * h[i])
            max_h = max(max_h, float(np.max(np.abs(fd_row - hess[i]))) / lam_scale)
    return DerivativeReport(max_grad_err=max_g, max_hess_err=max_h, rtol=rtol)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def field_from_dict(d: dict[str, Any]) -> FieldModel:
    """Build a model from its JSON dict form (see field_to_dict)."""
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError("field spec must be an object with a 'type' key")
    kind = d["type"]
    if kind == "cosine":
        extra = set(d) - {"type"}
        if extra:
            raise ConfigError(f"unexpected keys for cosine field: {sorted(extra)}")
        return CosineField()
    if kind == "spectral_sum":
        extra = set(d) - {"type", "atoms", "offset_var"}
        if extra:
            raise ConfigError(f"unexpected keys for spectral_sum: {sorted(extra)}")
        atoms = d.get("atoms")
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError("spectral_sum needs a nonempty 'atoms' list")
        freqs, weights = [], []
        for a in atoms:
            if not isinstance(a, dict) or "freq" not in a or "weight" not in a:
                raise ConfigError("each atom needs 'freq' and 'weight'")
            freqs.append(a["freq"])
            weights.append(a["weight"])
        try:
            return SpectralSumField(
                freqs=np.asarray(freqs, dtype=float),
                weights=np.asarray(weights, dtype=float),
                offset_var=float(d.get("offset_var", 1.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad spectral_sum field: {exc}") from exc
    if kind == "gaussian_increment":
        extra = set(d) - {"type", "dim", "scale", "offset_var"}
        if extra:
            raise ConfigError(f"unexpected keys for gaussian_increment: {sorted(extra)}")
        try:
            return GaussianIncrementField(
                dim=int(d.get("dim", 1)),
                scale=float(d.get("scale", 1.0)),
                offset_var=float(d.get("offset_var", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad gaussian_increment field: {exc}") from exc
    if kind == "fault_injection":
        extra = set(d) - {"type", "base", "hessian_scale"}
        if extra:
            raise ConfigError(f"unexpected keys for fault_injection: {sorted(extra)}")
        if "base" not in d:
            raise ConfigError("fault_injection needs a 'base' field spec")
        return FaultInjectedField(
            base=field_from_dict(d["base"]),
            hessian_scale=float(d.get("hessian_scale", 1.25)),
        )
    raise ConfigError(f"unknown field type {kind!r}")


def field_to_dict(model: FieldModel) -> dict[str, Any]:
    if isinstance(model, FaultInjectedField):
        return {
            "type": "fault_injection",
            "base": field_to_dict(model.base),
            "hessian_scale": model.hessian_scale,
        }
    if isinstance(model, CosineField):
        return {"type": "cosine"}
    if isinstance(model, SpectralSumField):
        return {
            "type": "spectral_sum",
            "atoms": [
                {"freq": list(map(float, f)), "weight": float(w)}
                for f, w in zip(model.freqs, model.weights)
            ],
            "offset_var": model.offset_var,
        }
    if isinstance(model, GaussianIncrementField):
        return {
            "type": "gaussian_increment",
            "dim": model.dim,
            "scale": model.scale,
            "offset_var": model.offset_var,
        }
    raise ConfigError(f"cannot serialise model of type {type(model).__name__}")
