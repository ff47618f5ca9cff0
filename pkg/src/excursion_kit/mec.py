"""Kac-Rice face terms, mean Euler characteristic, and Laplace closed forms.

The three user-facing quantities are

* ``excursion_prob_mu``: vertex tails plus per-face integrals of
  He_{k-1}(u/theta_t) exp(-u^2 / (2 theta_t^2)) -- the leading-order
  excursion-probability approximation built from one-sided maxima counts;
* ``mean_euler_characteristic``: the exact mean Euler characteristic of the
  excursion set, combining vertex orthant probabilities with face integrals
  that carry an extra conditional Gaussian layer over the outward cone;
* ``laplace_closed_form``: the closed-form asymptotic equivalent obtained
  by Laplace-expanding the face integrals around the variance maximizer.

Face contributions are reported as positive magnitudes; alternating signs
never reach user-facing totals.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    AmbiguousMaximizerError,
    CapabilityError,
    ClassificationError,
    DegeneracyError,
    DegenerateModelError,
    ModelInconsistencyError,
    NumericError,
)
from .field import (
    DEGENERATE_VAR,
    NEG_TOL,
    FieldModel,
    _refine_on_face,
    covariance_at,
    max_variance,
)
from .gauss import MvnProblem, MvnResult, gauss_tail, hermite, mvn_prob
from .geometry import (
    Face,
    RectDomain,
    embed_points,
    enumerate_faces,
    face_label,
    outward_cone,
)
from .quad import QuadResult, QuadSpec, integrate_cone, integrate_face

__all__ = [
    "MecResult",
    "LaplaceInputs",
    "face_term_mu",
    "vertex_term",
    "face_term_mean_ec",
    "mean_euler_characteristic",
    "excursion_prob_mu",
    "ConditionReport",
    "condition_check",
    "prepare_laplace_inputs",
    "laplace_closed_form",
    "laplace_mec_result",
    "tau_hessian",
    "tau_hessian_analytic",
]

MEAN_EC_DIM_CAP = 3
MU_DIM_CAP = 6

CLASS_CORNER = "corner-regular"
CLASS_FACE = "face-critical"
CLASS_INTERIOR = "interior-critical"

# fixed-direction derivative threshold separating the regular and
# zero-gradient boundary regimes
GRAD_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class MecResult:
    """Per-face ledger and total for one level."""

    u: float
    method: str
    per_face: tuple[tuple[Face, float], ...]
    total: float
    err_est: float = 0.0

    def by_label(self) -> dict[str, float]:
        return {face_label(f): v for f, v in self.per_face}


# ---------------------------------------------------------------------------
# Per-face precomputation
# ---------------------------------------------------------------------------


class _FaceData(NamedTuple):
    theta_sq: np.ndarray
    gamma_sq: np.ndarray
    det_diff: np.ndarray
    cvec_fixed: np.ndarray
    b: np.ndarray


class FaceContext:
    """Constant blocks and vectorised point evaluation for one face."""

    def __init__(self, model: FieldModel, face: Face):
        self.model = model
        self.face = face
        self.k = face.k
        self.n = model.dim
        self.sig = list(face.sigma)
        self.fixed = list(face.fixed)
        lam = model.lambda_mat
        self.lam = lam
        self.lam_J = lam[np.ix_(self.sig, self.sig)]
        cond = np.linalg.cond(self.lam_J) if self.sig else 1.0
        if not np.isfinite(cond) or cond > 1e12:
            raise DegenerateModelError(
                f"free gradient block on face {face_label(face)} has "
                f"condition number {cond:.3e}"
            )
        self.lam_inv = np.linalg.inv(lam)
        self.lam_J_inv = (
            np.linalg.inv(self.lam_J) if self.sig else np.zeros((0, 0))
        )
        self.det_lam_J = float(np.linalg.det(self.lam_J)) if self.sig else 1.0
        self.lam_fJ = lam[np.ix_(self.fixed, self.sig)]
        lam_ff = lam[np.ix_(self.fixed, self.fixed)]
        # Cov(grad_fixed | grad_free = 0), constant over the face
        self.schur_ff = lam_ff - self.lam_fJ @ self.lam_J_inv @ self.lam_fJ.T
        self.pref_mu = (2.0 * math.pi) ** (-(self.k + 1) / 2.0) * self.det_lam_J ** -0.5
        self.pref_mec = (2.0 * math.pi) ** (-self.k / 2.0) * self.det_lam_J ** -0.5

    def arrays(self, pts: np.ndarray) -> _FaceData:
        """Evaluate theta^2, gamma^2, |Lambda_J - Lambda_J(t)|, C_j, and the
        cross-covariance of (X, fixed gradients) at a block of face points."""
        face = self.face
        t = embed_points(face, pts)
        nu = np.atleast_1d(self.model.variance(t))
        c = 0.5 * np.atleast_2d(self.model.grad_variance(t))
        lam_t = self.model.lambda_at(t)
        if lam_t.ndim == 2:
            lam_t = lam_t[None, :, :]
        lam_J_t = lam_t[:, self.sig, :][:, :, self.sig]
        if self.sig:
            det_diff = np.linalg.det(self.lam_J[None, :, :] - lam_J_t)
            c_J = c[:, self.sig]
            sol_J = c_J @ self.lam_J_inv
            theta_sq = nu - np.einsum("mk,mk->m", c_J, sol_J)
        else:
            det_diff = np.ones(len(nu))
            sol_J = np.zeros((len(nu), 0))
            theta_sq = nu.copy()
        sol = c @ self.lam_inv
        gamma_sq = nu - np.einsum("mk,mk->m", c, sol)
        for name, arr in (("theta^2", theta_sq), ("gamma^2", gamma_sq)):
            if np.any(arr < -NEG_TOL):
                raise ModelInconsistencyError(
                    f"{name} negative beyond tolerance on face {face_label(face)}"
                )
        np.clip(theta_sq, 0.0, None, out=theta_sq)
        np.clip(gamma_sq, 0.0, None, out=gamma_sq)
        ok = gamma_sq >= DEGENERATE_VAR
        cvec = np.zeros_like(c)
        cvec[ok] = -sol[ok] / gamma_sq[ok, None]
        b = c[:, self.fixed] - sol_J @ self.lam_fJ.T
        return _FaceData(theta_sq, gamma_sq, det_diff, cvec[:, self.fixed], b)


# ---------------------------------------------------------------------------
# Face terms
# ---------------------------------------------------------------------------


def _face_term_mu_result(
    model: FieldModel, face: Face, u: float, spec: QuadSpec
) -> QuadResult:
    ctx = FaceContext(model, face)
    k = face.k

    def integrand(pts):
        d = ctx.arrays(pts)
        out = np.zeros(pts.shape[0])
        mask = d.theta_sq >= DEGENERATE_VAR
        if mask.any():
            th = np.sqrt(d.theta_sq[mask])
            z = u / th
            out[mask] = (
                d.det_diff[mask]
                * th ** (-k)
                * hermite(k - 1, z)
                * np.exp(-0.5 * z * z)
            )
        return out

    res = integrate_face(face, integrand, spec)
    return QuadResult(
        ctx.pref_mu * res.value, ctx.pref_mu * res.err_est, res.converged
    )


def face_term_mu(
    model: FieldModel, face: Face, u: float, spec: QuadSpec = QuadSpec()
) -> float:
    """Leading Kac-Rice term of a k >= 1 face for the mu approximation."""
    if face.k < 1:
        raise ValueError("face_term_mu needs a face with k >= 1")
    return _face_term_mu_result(model, face, float(u), spec).value


def _vertex_term_result(
    model: FieldModel, vertex: Face, u: float, seed: int, accuracy: float = 1e-6
) -> MvnResult:
    cap = covariance_at(model, vertex, np.zeros(0))
    n = model.dim
    cov = np.empty((n + 1, n + 1))
    cov[0, 0] = cap.nu
    cov[0, 1:] = cap.c
    cov[1:, 0] = cap.c
    cov[1:, 1:] = cap.lam
    cone = outward_cone(vertex)
    lo = np.empty(n + 1)
    hi = np.empty(n + 1)
    lo[0], hi[0] = u, np.inf
    clo, chi = cone.bounds()
    lo[1:], hi[1:] = clo, chi
    return mvn_prob(MvnProblem(cov, lo, hi), accuracy=accuracy, seed=seed)


def vertex_term(model: FieldModel, vertex: Face, u: float, seed: int = 0) -> float:
    """P(X(t) >= u, grad X(t) in outward cone) at a vertex."""
    if vertex.k != 0:
        raise ValueError("vertex_term needs a face with k = 0")
    return _vertex_term_result(model, vertex, float(u), seed).p


def _face_term_mean_ec_result(
    model: FieldModel, face: Face, u: float, spec: QuadSpec
) -> QuadResult:
    ctx = FaceContext(model, face)
    k = face.k
    q = model.dim - k
    cone = outward_cone(face)
    log_norm = -0.5 * (1 + q) * math.log(2.0 * math.pi)

    def inner_value(theta_sq_i, gamma_i, b_i, cf_i):
        # conditional covariance of (X, fixed gradients) given free grads = 0
        sigma_c = np.empty((1 + q, 1 + q))
        sigma_c[0, 0] = theta_sq_i
        sigma_c[0, 1:] = b_i
        sigma_c[1:, 0] = b_i
        sigma_c[1:, 1:] = ctx.schur_ff
        try:
            L = np.linalg.cholesky(sigma_c)
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError(
                f"conditional covariance singular on face {face_label(face)}"
            ) from exc
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        coef = gamma_i * cf_i

        def h(z):
            x = z[:, 0]
            y = z[:, 1:]
            arg = x / gamma_i + y @ coef
            w = np.linalg.solve(L, z.T)
            q2 = np.sum(w * w, axis=0)
            pdf = np.exp(log_norm - 0.5 * logdet - 0.5 * q2)
            return hermite(k, arg) * pdf

        return integrate_cone(cone, u, h, spec).value

    def outer(pts):
        d = ctx.arrays(pts)
        out = np.zeros(pts.shape[0])
        for i in range(pts.shape[0]):
            if d.gamma_sq[i] < DEGENERATE_VAR or d.theta_sq[i] < DEGENERATE_VAR:
                continue
            gam = math.sqrt(d.gamma_sq[i])
            val = inner_value(
                d.theta_sq[i], gam, d.b[i], d.cvec_fixed[i]
            )
            out[i] = d.det_diff[i] * gam ** (-k) * val
        return out

    res = integrate_face(face, outer, spec)
    return QuadResult(
        ctx.pref_mec * res.value, ctx.pref_mec * res.err_est, res.converged
    )


def face_term_mean_ec(
    model: FieldModel,
    face: Face,
    u: float,
    spec: QuadSpec = QuadSpec(),
    seed: int = 0,
) -> float:
    """Mean count of extended outward maxima above u on a k >= 1 face.

    Integrates He_k(x/gamma_t + gamma_t sum_j C_j(t) y_j) against the
    conditional density of (X, boundary gradients) given the free gradient
    vanishing, over [u, inf) x outward cone.  For k = N the cone is empty
    and the integral collapses to the mu face term.  The quadrature path is
    deterministic; ``seed`` is accepted for interface uniformity.
    """
    if face.k < 1:
        raise ValueError("face_term_mean_ec needs a face with k >= 1")
    return _face_term_mean_ec_result(model, face, float(u), spec).value


# ---------------------------------------------------------------------------
# Assemblies
# ---------------------------------------------------------------------------


def _face_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence((int(seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _assemble(
    faces: list[Face],
    worker: Callable[[int, Face], tuple[float, float]],
    threads: int,
) -> tuple[list[float], list[float]]:
    values = [0.0] * len(faces)
    errs = [0.0] * len(faces)
    if threads <= 1:
        results = [worker(i, f) for i, f in enumerate(faces)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, range(len(faces)), faces))
    for i, (v, e) in enumerate(results):
        values[i] = v
        errs[i] = e
    return values, errs


def mean_euler_characteristic(
    model: FieldModel,
    domain: RectDomain,
    u: float,
    spec: QuadSpec = QuadSpec(),
    seed: int = 0,
    *,
    threads: int = 1,
    max_dim: int = MEAN_EC_DIM_CAP,
) -> MecResult:
    """Mean Euler characteristic of the excursion set above u.

    Vertices contribute joint orthant probabilities; every k >= 1 face
    contributes its extended-outward-maxima mean.  The ledger keeps one
    entry per face in enumeration order and the total is their ordered sum,
    so results are bit-stable for a fixed seed regardless of thread count.
    """
    if domain.dim > max_dim:
        raise CapabilityError(
            f"mean Euler characteristic capped at N={max_dim} (got N={domain.dim})"
        )
    u = float(u)
    faces = enumerate_faces(domain)

    def worker(i: int, fc: Face) -> tuple[float, float]:
        if fc.k == 0:
            r = _vertex_term_result(model, fc, u, _face_seed(seed, i))
            return r.p, r.err_est
        r = _face_term_mean_ec_result(model, fc, u, spec)
        return r.value, r.err_est

    values, errs = _assemble(faces, worker, threads)
    return MecResult(
        u=u,
        method="mean_ec",
        per_face=tuple(zip(faces, values)),
        total=math.fsum(values),
        err_est=math.fsum(errs),
    )


def excursion_prob_mu(
    model: FieldModel,
    domain: RectDomain,
    u: float,
    spec: QuadSpec = QuadSpec(),
    *,
    threads: int = 1,
    max_dim: int = MU_DIM_CAP,
) -> MecResult:
    """Leading-order excursion probability: vertex tails + mu face terms."""
    if domain.dim > max_dim:
        raise CapabilityError(
            f"mu approximation capped at N={max_dim} (got N={domain.dim})"
        )
    u = float(u)
    faces = enumerate_faces(domain)

    def worker(i: int, fc: Face) -> tuple[float, float]:
        if fc.k == 0:
            cap = covariance_at(model, fc, np.zeros(0))
            if cap.nu < DEGENERATE_VAR:
                return 0.0, 0.0
            return float(gauss_tail(u / math.sqrt(cap.nu))), 0.0
        r = _face_term_mu_result(model, fc, u, spec)
        return r.value, r.err_est

    values, errs = _assemble(faces, worker, threads)
    return MecResult(
        u=u,
        method="mu_approx",
        per_face=tuple(zip(faces, values)),
        total=math.fsum(values),
        err_est=math.fsum(errs),
    )


# ---------------------------------------------------------------------------
# Boundary-max condition check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    """Scan for near-maximal variance points with flat fixed directions."""

    satisfied: bool
    sigma_sq: float
    violations: tuple[tuple[Face, tuple[float, ...], tuple[float, ...]], ...]
    var_tol: float
    grad_tol: float


def condition_check(
    model: FieldModel,
    domain: RectDomain,
    var_tol: float = 1e-6,
    grad_tol: float = GRAD_ZERO_TOL,
) -> ConditionReport:
    """Check the boundary-maximum regularity condition face by face.

    For every face J, hunts points of the open face where nu comes within
    var_tol of the global maximum; at each, the condition fails when some
    pinned-direction derivative nu_j vanishes (|nu_j| < grad_tol).  Interior
    faces have no pinned directions and are vacuously fine.
    """
    mv = max_variance(model, domain)
    sigma_sq = mv.sigma_sq
    scale = max(
        1.0,
        float(np.max(np.abs(domain.lower_arr))),
        float(np.max(np.abs(domain.upper_arr))),
    )
    violations = []
    for fc in enumerate_faces(domain):
        if not fc.fixed:
            continue  # nothing to check on the interior face
        # candidate near-max points on the closed face
        cands: list[np.ndarray] = []
        if fc.k == 0:
            cands.append(fc.fixed_values())
        else:
            lo, hi = fc.free_bounds()
            axes = [np.linspace(lo[i], hi[i], 33) for i in range(fc.k)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts_free = np.stack([m.ravel() for m in mesh], axis=-1)
            vals = model.variance(embed_points(fc, pts_free))
            order = np.argsort(vals)[::-1][:10]
            for idx in order:
                if vals[idx] < sigma_sq - 10 * var_tol:
                    break
                xf = _refine_on_face(model, fc, pts_free[idx])
                cands.append(embed_points(fc, xf[None, :])[0])
        seen: list[np.ndarray] = []
        for t in cands:
            if any(np.linalg.norm(t - s) < 1e-6 * scale for s in seen):
                continue
            seen.append(t)
            if float(model.variance(t)) < sigma_sq - var_tol:
                continue
            # the point must lie in the open face: free coords strictly inside
            on_open = all(
                domain.lower[j] + 1e-7 * scale < t[j] < domain.upper[j] - 1e-7 * scale
                for j in fc.sigma
            )
            if not on_open:
                continue
            grad = model.grad_variance(t)
            gf = np.array([grad[j] for j in fc.fixed])
            if np.any(np.abs(gf) < grad_tol):
                violations.append((fc, tuple(map(float, t)), tuple(map(float, gf))))
    return ConditionReport(
        satisfied=not violations,
        sigma_sq=sigma_sq,
        violations=tuple(violations),
        var_tol=var_tol,
        grad_tol=grad_tol,
    )


# ---------------------------------------------------------------------------
# Laplace closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaplaceInputs:
    """Everything the closed-form dispatcher needs at the maximizer."""

    t0: np.ndarray
    face: Face
    sigma_sq: float
    theta_hess: np.ndarray
    classification: str
    grad_nu: np.ndarray


def _theta_sq_on_face(model: FieldModel, face: Face, x_free: np.ndarray) -> float:
    """theta_{J,t}^2 as a function of the face's free coordinates.

    Evaluates through the closed-face embedding (no open-face check) so
    finite-difference stencils may touch the boundary.
    """
    ctx = FaceContext(model, face)
    d = ctx.arrays(np.atleast_1d(x_free)[None, :])
    return float(d.theta_sq[0])


def tau_hessian(
    model: FieldModel, face: Face, t0, step: float | None = None
) -> np.ndarray:
    """Hessian of tau(t) = theta_t^2 in the face's free coordinates.

    Symmetrized central differences with per-axis step 1e-4 (b_j - a_j) by
    default.  Centers within one step of the face boundary are nudged
    inside, giving one-sided accuracy there.
    """
    if face.k < 1:
        raise ValueError("tau_hessian needs a face with k >= 1")
    t0 = np.asarray(t0, dtype=float)
    if t0.shape != (face.domain.dim,):
        raise ValueError(
            f"t0 must be a full {face.domain.dim}-dimensional point"
        )
    lo, hi = face.free_bounds()
    x0 = t0[list(face.sigma)]
    if np.any(x0 < lo - 1e-12) or np.any(x0 > hi + 1e-12):
        raise ValueError("t0 lies outside the face closure")
    k = face.k
    widths = hi - lo
    if step is None:
        h = 1e-4 * widths
    else:
        h = np.full(k, float(step))
    if np.any(h <= 0) or np.any(h < 1e-13 * np.maximum(np.abs(lo), np.abs(hi))):
        raise NumericError(f"finite-difference step underflow: {h}")
    x0 = np.clip(x0, lo + h, hi - h)

    ctx = FaceContext(model, face)

    def tau(x):
        return float(ctx.arrays(x[None, :]).theta_sq[0])

    out = np.empty((k, k))
    f0 = tau(x0)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        out[i, i] = (tau(x0 + ei) - 2.0 * f0 + tau(x0 - ei)) / h[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            out[i, j] = out[j, i] = (
                tau(x0 + ei + ej)
                - tau(x0 + ei - ej)
                - tau(x0 - ei + ej)
                + tau(x0 - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return 0.5 * (out + out.T)


def tau_hessian_analytic(model: FieldModel, face: Face, t0) -> np.ndarray | None:
    """Analytic Hessian of theta_t^2 via third derivatives of nu.

    tau_ij = nu_ij - (1/2) sum_{m,n in sigma} nu_mij A_mn nu_n
                   - (1/2) sum_{m,n in sigma} nu_mi  A_mn nu_nj,
    with A the inverse free-block gradient covariance.  Returns None when
    the model lacks third derivatives.
    """
    t0 = np.asarray(t0, dtype=float)
    third = model.third_variance(t0)
    if third is None:
        return None
    sig = list(face.sigma)
    grad = model.grad_variance(t0)
    hess = model.hess_variance(t0)
    lam_J = model.lambda_mat[np.ix_(sig, sig)]
    A = np.linalg.inv(lam_J)
    h_s = hess[np.ix_(sig, sig)]
    g_s = grad[sig]
    # restrict the mixed tensors to free coordinates
    t3 = third[np.ix_(sig, sig, sig)]  # indices (m, i, j) order-symmetric
    term1 = 0.5 * np.einsum("mij,mn,n->ij", t3, A, g_s)
    term2 = 0.5 * np.einsum("mi,mn,nj->ij", h_s, A, h_s)
    tau = h_s - term1 - term2
    return 0.5 * (tau + tau.T)


def _face_tau_hess(model: FieldModel, face: Face, t0) -> np.ndarray:
    hess = tau_hessian_analytic(model, face, t0)
    if hess is None:
        hess = tau_hessian(model, face, t0)
    return hess


def _check_neg_def(mat: np.ndarray, what: str) -> None:
    if mat.size == 0:
        return
    top = float(np.max(np.linalg.eigvalsh(mat)))
    if top >= 0.0:
        raise NumericError(f"{what} is not negative definite (max eig {top:.3e})")


def prepare_laplace_inputs(
    model: FieldModel,
    domain: RectDomain,
    grad_tol: float = GRAD_ZERO_TOL,
) -> LaplaceInputs:
    """Locate the unique variance maximizer and classify it."""
    mv = max_variance(model, domain)
    if mv.tied:
        cands = ", ".join(
            f"nu={v:.12g} at {tuple(round(x, 9) for x in t)}"
            for v, t in mv.candidates
        )
        raise AmbiguousMaximizerError(
            f"variance maximizer is ambiguous; candidates: {cands}"
        )
    t0 = mv.point
    host = mv.face
    k = host.k
    grad = model.grad_variance(t0)
    fg = np.abs(np.array([grad[j] for j in host.fixed]))
    if k == domain.dim:
        classification = CLASS_INTERIOR
    elif fg.size and np.all(fg > grad_tol):
        classification = CLASS_CORNER if k == 0 else CLASS_FACE
    elif np.all(fg <= grad_tol):
        classification = CLASS_FACE
    else:
        raise ClassificationError(
            "mixed zero/nonzero pinned-direction derivatives at the maximizer: "
            f"|nu_j| = {fg.tolist()} on face {face_label(host)}"
        )
    theta_hess = (
        _face_tau_hess(model, host, t0) if k >= 1 else np.zeros((0, 0))
    )
    if k >= 1:
        _check_neg_def(theta_hess, "Theta at the maximizer")
    return LaplaceInputs(
        t0=t0,
        face=host,
        sigma_sq=mv.sigma_sq,
        theta_hess=theta_hess,
        classification=classification,
        grad_nu=grad,
    )


def _laplace_face_factor(
    model: FieldModel, face: Face, t0: np.ndarray, theta_hess: np.ndarray
) -> float:
    """2^{k/2} |Lambda_J - Lambda_J(t0)| / (|Lambda_J|^{1/2} |-Theta|^{1/2})."""
    k = face.k
    if k == 0:
        return 1.0
    sig = list(face.sigma)
    lam_J = model.lambda_mat[np.ix_(sig, sig)]
    lam_J_t = model.lambda_at(t0)[np.ix_(sig, sig)]
    _check_neg_def(theta_hess, f"Theta on face {face_label(face)}")
    det_diff = float(np.linalg.det(lam_J - lam_J_t))
    det_lam = float(np.linalg.det(lam_J))
    det_neg_hess = float(np.linalg.det(-theta_hess))
    return 2.0 ** (k / 2.0) * det_diff / math.sqrt(det_lam * det_neg_hess)


def _orthant_given_free(
    model: FieldModel, face: Face, seed: int
) -> MvnResult:
    """P(pinned-direction gradients in the outward cone | free grads = 0)."""
    if not face.fixed:
        return MvnResult(1.0, 0.0, False)
    ctx = FaceContext(model, face)
    cone = outward_cone(face)
    lo, hi = cone.bounds()
    return mvn_prob(MvnProblem(ctx.schur_ff, lo, hi), seed=seed)


def _adjacent_higher_faces(domain: RectDomain, host: Face) -> list[Face]:
    """Faces J' of higher dimension whose closure contains the host face."""
    out = []
    eps = host.eps_map
    for fc in enumerate_faces(domain):
        if fc.k <= host.k:
            continue
        if not set(fc.sigma) >= set(host.sigma):
            continue
        if all(eps[j] == e for j, e in fc.epsilon):
            out.append(fc)
    return out


def _laplace_terms(
    model: FieldModel,
    domain: RectDomain,
    u: float,
    inputs: LaplaceInputs,
    seed: int,
) -> list[tuple[Face, float]]:
    t0 = inputs.t0
    host = inputs.face
    psi = float(gauss_tail(u / math.sqrt(inputs.sigma_sq)))
    contrib: dict[tuple, float] = {}

    def key(f: Face):
        return (f.sigma, f.epsilon)

    if inputs.classification == CLASS_CORNER:
        contrib[key(host)] = psi
    elif inputs.classification == CLASS_INTERIOR:
        contrib[key(host)] = (
            _laplace_face_factor(model, host, t0, inputs.theta_hess) * psi
        )
    else:  # face-critical
        fg = np.abs(np.array([inputs.grad_nu[j] for j in host.fixed]))
        if fg.size and np.all(fg > GRAD_ZERO_TOL):
            # regular boundary maximum on a k >= 1 face: host term only
            contrib[key(host)] = (
                _laplace_face_factor(model, host, t0, inputs.theta_hess) * psi
            )
        else:
            # fully flat maximizer: host term with its orthant factor plus
            # every higher face whose closure contains t0
            host_f = _laplace_face_factor(model, host, t0, inputs.theta_hess)
            orth = _orthant_given_free(model, host, _face_seed(seed, 0))
            contrib[key(host)] = host_f * psi * orth.p
            for idx, fc in enumerate(_adjacent_higher_faces(domain, host), start=1):
                hess = _face_tau_hess(model, fc, t0)
                f_fact = _laplace_face_factor(model, fc, t0, hess)
                extra = [j for j in fc.sigma if j not in host.sigma]
                pos = [fc.sigma.index(j) for j in extra]
                cov_z = -hess[np.ix_(pos, pos)]
                pz = mvn_prob(
                    MvnProblem(
                        cov_z, np.full(len(pos), -np.inf), np.zeros(len(pos))
                    ),
                    seed=_face_seed(seed, 2 * idx),
                )
                orth2 = _orthant_given_free(model, fc, _face_seed(seed, 2 * idx + 1))
                contrib[key(fc)] = f_fact * psi * pz.p * orth2.p

    faces = enumerate_faces(domain)
    return [(fc, contrib.get(key(fc), 0.0)) for fc in faces]


def laplace_closed_form(
    model: FieldModel,
    domain: RectDomain,
    u: float,
    inputs: LaplaceInputs | None = None,
    seed: int = 0,
) -> float:
    """Closed-form asymptotic equivalent of the excursion quantities.

    Dispatches on the maximizer classification: a regular corner gives the
    plain tail Psi(u/sigma_T); a regular face maximizer adds the curvature
    factor; a flat maximizer assembles the host face and all adjacent
    higher faces with conditional orthant and ordering factors.
    """
    if inputs is None:
        inputs = prepare_laplace_inputs(model, domain)
    terms = _laplace_terms(model, domain, float(u), inputs, seed)
    return math.fsum(v for _, v in terms)


def laplace_mec_result(
    model: FieldModel,
    domain: RectDomain,
    u: float,
    inputs: LaplaceInputs | None = None,
    seed: int = 0,
) -> MecResult:
    """Ledger-shaped variant of laplace_closed_form for reporting."""
    if inputs is None:
        inputs = prepare_laplace_inputs(model, domain)
    terms = _laplace_terms(model, domain, float(u), inputs, seed)
    return MecResult(
        u=float(u),
        method="laplace",
        per_face=tuple(terms),
        total=math.fsum(v for _, v in terms),
        err_est=0.0,
    )
