"""Gaussian utilities: Hermite polynomials, tails, conditioning, MVN boxes.

Conventions used throughout the package:

* ``hermite`` evaluates the probabilists' Hermite polynomial He_k
  (monic, orthogonal w.r.t. exp(-x^2/2)).
* ``gauss_tail`` is Psi(u) = P(Z >= u) for a standard normal Z.
* ``mvn_prob`` computes P(a <= Z <= b) for a centred Gaussian vector with
  the given covariance, via separation of variables on a reordered
  Cholesky factor integrated with randomized quasi-Monte Carlo points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import erfc, ndtri
from scipy.stats import qmc

from .errors import CapabilityError, DegeneracyError

__all__ = [
    "DegeneracyError",
    "MvnProblem",
    "MvnResult",
    "CondGaussian",
    "hermite",
    "gauss_tail",
    "std_normal_pdf",
    "std_normal_cdf",
    "hermite_tail_identity_check",
    "condition",
    "condition_block",
    "mvn_prob",
]

MAX_HERMITE_DEGREE = 30
MAX_MVN_DIM = 12

# Randomized QMC configuration for mvn_prob: points per randomization and
# number of independent randomizations used for the error estimate.
MVN_QMC_POINTS = 2 ** 13
MVN_QMC_RANDOMIZATIONS = 12


def hermite(k: int, x):
    """Probabilists' Hermite polynomial He_k(x) by three-term recurrence.

    Vectorised over x; k is capped at MAX_HERMITE_DEGREE to keep the
    recurrence in a well-conditioned regime.
    """
    k = int(k)
    if k < 0:
        raise ValueError(f"degree must be nonnegative, got {k}")
    if k > MAX_HERMITE_DEGREE:
        raise CapabilityError(f"degree {k} exceeds cap {MAX_HERMITE_DEGREE}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.shape else float(prev)
    cur = x.copy()
    for n in range(1, k):
        prev, cur = cur, x * cur - n * prev
    return cur if cur.shape else float(cur)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return out if out.shape else float(out)


def std_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(-x / math.sqrt(2.0))
    return out if out.shape else float(out)


def gauss_tail(u):
    """Upper tail Psi(u) = P(Z >= u) of the standard normal, via erfc."""
    u = np.asarray(u, dtype=float)
    out = 0.5 * erfc(u / math.sqrt(2.0))
    return out if out.shape else float(out)


def hermite_tail_identity_check(k: int, u: float) -> float:
    """Residual of int_u^inf He_k(x) e^{-x^2/2} dx = He_{k-1}(u) e^{-u^2/2}.

    The left side is integrated numerically with the package's own
    tail-mapped quadrature; returns |numeric - closed form|.
    """
    if k < 1:
        raise ValueError("identity requires k >= 1")
    from . import quad  # local import; quad has no dependency on this module

    def g(x):
        return hermite(k, x) * np.exp(-0.5 * np.asarray(x, dtype=float) ** 2)

    res = quad.integrate_tail(float(u), g, quad.QuadSpec())
    rhs = hermite(k - 1, u) * math.exp(-0.5 * u * u)
    return abs(res.value - rhs)


# ---------------------------------------------------------------------------
# Conditioning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CondGaussian:
    """Conditional law of one coordinate given a block of others.

    mean_coef maps observed conditioner values to the conditional mean;
    cond_var is the (scalar) conditional variance.
    """

    target: int
    conditioners: tuple[int, ...]
    mean_coef: np.ndarray
    cond_var: float


def _solve_spd(mat: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    """Solve with a symmetric block, raising DegeneracyError when singular."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    try:
        c, low = _cho_factor(mat)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError(f"{what} block is singular or indefinite") from exc
    return _cho_solve((c, low), rhs)


def _cho_factor(mat):
    # thin wrapper so scipy stays an implementation detail here
    from scipy.linalg import cho_factor

    return cho_factor(mat, lower=True)


def _cho_solve(fac, rhs):
    from scipy.linalg import cho_solve

    return cho_solve(fac, rhs)


def condition(joint_cov: np.ndarray, target: int, conditioners: Sequence[int]) -> CondGaussian:
    """Condition coordinate ``target`` of a centred Gaussian on a block.

    Standard Schur complement: mean coefficients Sigma_tc Sigma_cc^{-1} and
    variance Sigma_tt - Sigma_tc Sigma_cc^{-1} Sigma_ct.
    """
    cov = np.asarray(joint_cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    d = cov.shape[0]
    conditioners = tuple(int(i) for i in conditioners)
    if not conditioners:
        raise ValueError("need at least one conditioner index")
    if target in conditioners:
        raise ValueError(f"target {target} cannot also be a conditioner")
    idx = (target,) + conditioners
    if any(i < 0 or i >= d for i in idx):
        raise ValueError(f"index out of range for dimension {d}")
    cc = cov[np.ix_(conditioners, conditioners)]
    tc = cov[target, list(conditioners)]
    coef = _solve_spd(cc, tc, "conditioner")
    var = float(cov[target, target] - tc @ coef)
    return CondGaussian(target, conditioners, np.asarray(coef, dtype=float), var)


def condition_block(
    joint_cov: np.ndarray, targets: Sequence[int], conditioners: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional covariance and mean-coefficient matrix for a target block.

    Returns (cond_cov, coef) with cond_cov = S_tt - S_tc S_cc^{-1} S_ct and
    coef = S_tc S_cc^{-1} (rows follow ``targets``).
    """
    cov = np.asarray(joint_cov, dtype=float)
    targets = list(targets)
    conditioners = list(conditioners)
    if not conditioners:
        return cov[np.ix_(targets, targets)].copy(), np.zeros((len(targets), 0))
    cc = cov[np.ix_(conditioners, conditioners)]
    tc = cov[np.ix_(targets, conditioners)]
    coef = _solve_spd(cc, tc.T, "conditioner").T
    cond_cov = cov[np.ix_(targets, targets)] - coef @ tc.T
    # enforce symmetry against roundoff
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    return cond_cov, coef


# ---------------------------------------------------------------------------
# MVN rectangle probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MvnProblem:
    """Centred Gaussian rectangle problem P(lower <= Z <= upper).

    cov must be symmetric positive semidefinite with dimension <= 12;
    bounds may be +-inf.  An optional mean shifts the rectangle.
    """

    cov: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        d = cov.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"covariance must be square, got {cov.shape}")
        if d > MAX_MVN_DIM:
            raise CapabilityError(f"dimension {d} exceeds cap {MAX_MVN_DIM}")
        if lo.shape != (d,) or hi.shape != (d,):
            raise ValueError("bounds must match the covariance dimension")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=1e-9):
            raise ValueError("covariance must be symmetric")
        if np.any(lo > hi):
            raise ValueError("need lower <= upper in every coordinate")
        mean = self.mean
        if mean is not None:
            mean = np.atleast_1d(np.asarray(mean, dtype=float))
            if mean.shape != (d,):
                raise ValueError("mean must match the covariance dimension")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


class MvnResult(NamedTuple):
    p: float
    err_est: float
    warning: bool = False


_TINY = 1e-300
_CDF_CLIP = 1e-15


def _ordered_cholesky(cov, a, b):
    """Genz-style variable reordering with pivoted Cholesky.

    At each step picks the remaining variable with the smallest expected
    conditional probability mass, which stabilises the subsequent QMC
    integration.  Zero pivots (PSD-singular directions) produce zero
    columns that the integrator treats as point masses.
    """
    d = cov.shape[0]
    c = cov.copy()
    a = a.copy()
    b = b.copy()
    L = np.zeros((d, d))
    order = np.arange(d)
    y = np.zeros(d)
    scale = max(np.max(np.abs(np.diag(c))), 1.0)

    for i in range(d):
        best_j, best_mass = -1, np.inf
        best_lo, best_hi = 0.0, 0.0
        for j in range(i, d):
            var = c[j, j] - L[j, :i] @ L[j, :i]
            if var < -1e-8 * scale:
                raise DegeneracyError("covariance is not positive semidefinite")
            sd = math.sqrt(max(var, 0.0))
            mu = L[j, :i] @ y[:i]
            if sd > 0:
                lo = (a[j] - mu) / sd
                hi = (b[j] - mu) / sd
            else:
                lo = -np.inf if a[j] - mu <= 0 else np.inf
                hi = np.inf if b[j] - mu >= 0 else -np.inf
            mass = std_normal_cdf(hi) - std_normal_cdf(lo)
            if mass < best_mass:
                best_j, best_mass = j, mass
                best_lo, best_hi = lo, hi
        j = best_j
        if j != i:
            for arr in (a, b, y):
                arr[[i, j]] = arr[[j, i]]
            c[[i, j], :] = c[[j, i], :]
            c[:, [i, j]] = c[:, [j, i]]
            L[[i, j], :i] = L[[j, i], :i]
            order[[i, j]] = order[[j, i]]
        var = c[i, i] - L[i, :i] @ L[i, :i]
        L[i, i] = math.sqrt(max(var, 0.0))
        if L[i, i] > 0:
            for j2 in range(i + 1, d):
                L[j2, i] = (c[j2, i] - L[j2, :i] @ L[i, :i]) / L[i, i]
        # expected value of the standard normal truncated to [lo, hi]
        lo, hi = best_lo, best_hi
        mass = std_normal_cdf(hi) - std_normal_cdf(lo)
        if mass > _TINY and np.isfinite(lo) | np.isfinite(hi):
            y[i] = (std_normal_pdf(lo) - std_normal_pdf(hi)) / mass
        else:
            y[i] = 0.0
    return L, a, b


def _sov_integrate(L, a, b, w):
    """Separation-of-variables integrand on a block of QMC points.

    w has shape (n, d-1); returns length-n probabilities.
    """
    d = L.shape[0]
    n = w.shape[0] if d > 1 else 1
    if L[0, 0] > 0:
        d1 = std_normal_cdf(a[0] / L[0, 0])
        e1 = std_normal_cdf(b[0] / L[0, 0])
    else:
        d1 = 0.0 if a[0] <= 0 else 1.0
        e1 = 1.0 if b[0] >= 0 else 0.0
    dvec = np.full(n, d1)
    evec = np.full(n, e1)
    prob = evec - dvec
    ys = np.zeros((n, d))
    for i in range(1, d):
        z = dvec + w[:, i - 1] * (evec - dvec)
        z = np.clip(z, _CDF_CLIP, 1.0 - _CDF_CLIP)
        ys[:, i - 1] = ndtri(z)
        mu = ys[:, :i] @ L[i, :i]
        if L[i, i] > 0:
            dvec = std_normal_cdf((a[i] - mu) / L[i, i])
            evec = std_normal_cdf((b[i] - mu) / L[i, i])
        else:
            dvec = np.where(a[i] - mu <= 0, 0.0, 1.0)
            evec = np.where(b[i] - mu >= 0, 1.0, 0.0)
        prob = prob * np.maximum(evec - dvec, 0.0)
    return prob


def mvn_prob(problem: MvnProblem, accuracy: float = 1e-6, seed: int = 0) -> MvnResult:
    """P(lower <= Z <= upper) for Z ~ N(mean, cov) by randomized QMC.

    Separation of variables on the reordered Cholesky factor; the outer
    average runs MVN_QMC_RANDOMIZATIONS independently scrambled Sobol
    streams of MVN_QMC_POINTS points each.  err_est is three standard
    errors of the randomization mean; the warning flag is set when it
    exceeds the requested accuracy.  Deterministic for a fixed seed.
    """
    a = problem.lower.copy()
    b = problem.upper.copy()
    if problem.mean is not None:
        a = a - problem.mean
        b = b - problem.mean
    if np.any(a >= b):
        return MvnResult(0.0, 0.0, False)
    d = problem.dim
    L, a, b = _ordered_cholesky(problem.cov, a, b)

    if d == 1:
        if L[0, 0] > 0:
            p = float(std_normal_cdf(b[0] / L[0, 0]) - std_normal_cdf(a[0] / L[0, 0]))
        else:
            p = float(a[0] <= 0.0 <= b[0])
        return MvnResult(max(p, 0.0), 0.0, False)

    ss = np.random.SeedSequence(int(seed))
    children = ss.spawn(MVN_QMC_RANDOMIZATIONS)
    estimates = np.empty(MVN_QMC_RANDOMIZATIONS)
    for r, child in enumerate(children):
        sob = qmc.Sobol(d=d - 1, scramble=True, seed=np.random.default_rng(child))
        w = sob.random(MVN_QMC_POINTS)
        estimates[r] = float(np.mean(_sov_integrate(L, a, b, w)))
    p = float(np.mean(estimates))
    stderr = float(np.std(estimates, ddof=1) / math.sqrt(MVN_QMC_RANDOMIZATIONS))
    err = 3.0 * stderr
    return MvnResult(min(max(p, 0.0), 1.0), err, err > accuracy)
