"""Minimax lower-bound expressions and the strong-convexity verifier.

The Bayesian Cramer-Rao (van Trees) machinery bounds the worst-case squared
l2 risk of any estimator built from n independent k-bit messages by

    d^2 / ( n Tr(I_M) + d pi^2 / B^2 ),

where B is the half-width of the parameter box and the prior term vanishes
as B -> infinity.  Substituting the three budget bounds on Tr(I_M) gives the
three scaling laws (constant-free here: the absolute constants in the
statements are reported as 1 and all downstream comparisons are ratio or
slope based):

    max{ d/(n s2),  d^2/(k n s2) }          sub-gaussian features
    max{ d/(n se^2), d^2/(k^2 n se^2) }     sub-exponential features
    max{ d/(n s2),  d^2/(2^k n I0) }        finite second moment

The excess-risk transfer multiplies the first law by the smallest eigenvalue
of E[X X^T] and requires n k >= d^4 sigma^4 log(d sigma).  The verifier at
the bottom of the module certifies numerically that the population logistic
risk is strongly convex near the origin: it compares the exact Hessian
spectrum against the analytic lower value

    (1 - eps)/4 * lambda_min(E[X X^T]) - d eps s2 - d alpha s2 log(2/alpha)

and checks the perturbation row-sum inequality behind it by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import DistributionSpec, sigmoid

__all__ = [
    "EigenSolverError",
    "BoundReport",
    "ConvexityReport",
    "TheoremScalings",
    "van_trees_bound",
    "theorem_scalings",
    "corollary_bound",
    "make_bound_report",
    "population_hessian",
    "jacobi_eigh",
    "jacobi_eigenvalues",
    "min_eigenvalue",
    "default_convexity_params",
    "strong_convexity_check",
]

_SYM_TOL = 1e-8
_JACOBI_TOL = 1e-10
_MAX_SWEEPS = 100


class EigenSolverError(RuntimeError):
    """Raised when the Jacobi iteration fails to reach tolerance."""


# ---------------------------------------------------------------------------
# Bound expressions.
# ---------------------------------------------------------------------------


def van_trees_bound(n: int, d: int, B: float, trace_msg_sup: float) -> float:
    """d^2 / (n * trace + d pi^2 / B^2); B = inf drops the prior term."""
    if n <= 0 or d <= 0:
        raise ValueError("n and d must be positive")
    if trace_msg_sup < 0:
        raise ValueError("trace bound must be nonnegative")
    if B is None or math.isinf(B):
        prior = 0.0
    elif B <= 0:
        raise ValueError("box half-width B must be positive")
    else:
        prior = d * math.pi**2 / B**2
    denom = n * trace_msg_sup + prior
    return math.inf if denom == 0 else d * d / denom


class TheoremScalings(NamedTuple):
    thm1: float
    thm2: float
    thm3: float


def theorem_scalings(n: int, k: int, d: int, sigma2: float, sigma_e: float,
                     i0: float) -> TheoremScalings:
    """Constant-free values of the three lower-bound scaling laws."""
    if min(n, k, d) <= 0:
        raise ValueError("n, k, d must be positive")
    if min(sigma2, sigma_e, i0) <= 0:
        raise ValueError("tail parameters must be positive")
    thm1 = max(d / (n * sigma2), d * d / (k * n * sigma2))
    thm2 = max(d / (n * sigma_e**2), d * d / (k * k * n * sigma_e**2))
    thm3 = max(d / (n * sigma2), d * d / (2.0**k * n * i0))
    return TheoremScalings(thm1, thm2, thm3)


def corollary_bound(n: int, k: int, d: int, sigma2: float,
                    delta: float) -> tuple[float, bool | None]:
    """Excess logistic risk lower-bound value and its sample-size flag.

    The value is delta * max{d/(n s2), d^2/(k n s2)}.  The flag reports
    whether n k >= d^4 sigma^4 log(d sigma); it is None (indeterminate) when
    d * sigma <= 1, where the log is not meaningful.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    value = delta * theorem_scalings(n, k, d, sigma2, math.sqrt(sigma2), 1.0).thm1
    sigma = math.sqrt(sigma2)
    if d * sigma <= 1.0:
        return value, None
    return value, bool(n * k >= d**4 * sigma**4 * math.log(d * sigma))


@dataclass(frozen=True)
class BoundReport:
    """All bound values for one (n, k, d, parameters) cell."""

    n: int
    k: int
    d: int
    sigma2: float
    sigma_e: float
    i0: float
    delta: float
    B: float
    trace_msg_sup: float
    van_trees: float
    thm1: float
    thm2: float
    thm3: float
    cor1: float
    cor1_precondition: bool | None

    def __post_init__(self):
        for name in ("van_trees", "thm1", "thm2", "thm3", "cor1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_dict(self) -> dict:
        out = {
            "n": self.n, "k": self.k, "d": self.d,
            "sigma2": self.sigma2, "sigma_e": self.sigma_e, "i0": self.i0,
            "delta": self.delta,
            "B": None if math.isinf(self.B) else self.B,
            "trace_msg_sup": self.trace_msg_sup,
            "van_trees": self.van_trees,
            "thm1": self.thm1, "thm2": self.thm2, "thm3": self.thm3,
            "cor1": self.cor1, "cor1_precondition": self.cor1_precondition,
            "note": "scaling values, constant-free",
        }
        return out


def make_bound_report(n: int, k: int, d: int, sigma2: float, delta: float,
                      i0: float, B: float = math.inf,
                      sigma_e: float | None = None,
                      trace_msg_sup: float | None = None) -> BoundReport:
    """Evaluate every bound for one cell.

    ``sigma_e`` defaults to sqrt(sigma2); ``trace_msg_sup`` defaults to the
    sub-gaussian budget bound 4 sigma2 k.
    """
    sigma_e = math.sqrt(sigma2) if sigma_e is None else sigma_e
    trace = 4.0 * sigma2 * k if trace_msg_sup is None else trace_msg_sup
    thm = theorem_scalings(n, k, d, sigma2, sigma_e, i0)
    cor_value, cor_flag = corollary_bound(n, k, d, sigma2, delta)
    return BoundReport(
        n=n, k=k, d=d, sigma2=sigma2, sigma_e=sigma_e, i0=i0, delta=delta,
        B=B, trace_msg_sup=trace,
        van_trees=van_trees_bound(n, d, B, trace),
        thm1=thm.thm1, thm2=thm.thm2, thm3=thm.thm3,
        cor1=cor_value, cor1_precondition=cor_flag,
    )


# ---------------------------------------------------------------------------
# Population Hessian.
# ---------------------------------------------------------------------------


def population_hessian(theta_hat, dist: DistributionSpec) -> np.ndarray:
    """Hessian of the population logistic risk at theta_hat, exactly.

    The integrand p(1-p) x x^T depends on the label only through
    p_theta_hat(y|x)(1 - p_theta_hat(y|x)) = sigmoid(u) sigmoid(-u) with
    u = <theta_hat, x>, so the expectation is over x alone and no true
    parameter enters.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    points, probs = dist.support()
    if theta_hat.size != points.shape[1]:
        raise ValueError(
            f"dimension mismatch: theta_hat has d={theta_hat.size}, "
            f"distribution has d={points.shape[1]}"
        )
    u = points @ theta_hat
    weights = probs * sigmoid(u) * sigmoid(-u)
    return (points * weights[:, None]).T @ points


# ---------------------------------------------------------------------------
# Cyclic Jacobi eigensolver for small dense symmetric matrices.
# ---------------------------------------------------------------------------


def _check_symmetric(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    if float(np.max(np.abs(mat - mat.T), initial=0.0)) > _SYM_TOL:
        raise ValueError(f"matrix is not symmetric within {_SYM_TOL}")
    return 0.5 * (mat + mat.T)


def jacobi_eigh(mat, tol: float = _JACOBI_TOL,
                max_sweeps: int = _MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns in the same
    order).  Iterates full cyclic sweeps until the off-diagonal Frobenius
    norm drops below ``tol``; raises EigenSolverError if ``max_sweeps`` full
    sweeps do not reach it.
    """
    a = _check_symmetric(mat)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v

    def offdiag_norm(m: np.ndarray) -> float:
        off = m - np.diag(np.diag(m))
        return float(np.sqrt(np.sum(off * off)))

    for _ in range(max_sweeps):
        if offdiag_norm(a) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Rotation angle zeroing a[p, q]; the stable half-angle form.
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    else:
        raise EigenSolverError(
            f"Jacobi iteration did not reach off-diagonal norm {tol} in "
            f"{max_sweeps} sweeps"
        )
    evals = np.diag(a).copy()
    order = np.argsort(evals)
    return evals[order], v[:, order]


def jacobi_eigenvalues(mat) -> np.ndarray:
    """Eigenvalues in ascending order."""
    return jacobi_eigh(mat)[0]


def min_eigenvalue(mat) -> float:
    """Smallest eigenvalue of a symmetric matrix via cyclic Jacobi."""
    return float(jacobi_eigenvalues(mat)[0])


# ---------------------------------------------------------------------------
# Strong convexity verifier.
# ---------------------------------------------------------------------------


def default_convexity_params(sigma2: float, d: int) -> tuple[float, float, float]:
    """Default (epsilon, alpha, r) for the convexity certificate.

    eps = 1/(sigma^2 d), alpha = 1/(sigma^3 d^{3/2}) and
    r = 1/(d sigma^3 sqrt(log(d sigma))), with the log floored at 1 and the
    fractions capped at 0.9 so every downstream log argument stays sane.
    """
    if sigma2 <= 0 or d < 1:
        raise ValueError("sigma2 must be positive and d >= 1")
    sigma = math.sqrt(sigma2)
    eps = min(1.0 / (sigma2 * d), 0.9)
    alpha = min(1.0 / (sigma**3 * d**1.5), 0.9)
    log_ds = max(math.log(d * sigma), 1.0)
    r = 1.0 / (d * sigma**3 * math.sqrt(log_ds))
    return eps, alpha, r


@dataclass(frozen=True)
class ConvexityReport:
    """Exact strong-convexity diagnostics at one theta_hat.

    ``analytic_lower`` is the closed-form lower value for the Hessian's
    smallest eigenvalue; ``row_sums[i]`` is sum_j |A_ij| for the perturbation
    matrix A = E[(p(1-p) - (1-eps)/4) x x^T], which the certificate requires
    to stay below ``row_sum_rhs``.  ``t_conc`` is the concentration radius
    sqrt(2 r^2 sigma^2 log(2/alpha)) for |<theta_hat, X>|.
    """

    hessian: np.ndarray
    lambda_min: float
    lambda_min_xx: float
    analytic_lower: float
    row_sums: np.ndarray
    row_sum_rhs: float
    row_sum_ok: bool
    t_conc: float
    epsilon: float
    alpha: float
    r: float
    sigma2: float
    delta: float
    delta_ok: bool

    def __post_init__(self):
        h = self.hessian
        if float(np.max(np.abs(h - h.T), initial=0.0)) > 1e-10:
            raise ValueError("Hessian must be symmetric within 1e-10")
        if self.lambda_min < -1e-10:
            raise ValueError("population risk Hessian must be PSD")

    def to_dict(self) -> dict:
        return {
            "lambda_min": self.lambda_min,
            "lambda_min_xx": self.lambda_min_xx,
            "analytic_lower": self.analytic_lower,
            "row_sums": [float(v) for v in self.row_sums],
            "row_sum_rhs": self.row_sum_rhs,
            "row_sum_ok": self.row_sum_ok,
            "t_conc": self.t_conc,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "r": self.r,
            "sigma2": self.sigma2,
            "delta": self.delta,
            "delta_ok": self.delta_ok,
        }


def strong_convexity_check(theta_hat, dist: DistributionSpec, epsilon: float,
                           alpha: float, r: float, sigma2: float,
                           delta: float) -> ConvexityReport:
    """Certify a strong-convexity modulus for the risk at theta_hat.

    Everything is evaluated by exact enumeration: the Hessian and its
    spectrum, the analytic lower value, and both sides of the row-sum
    inequality for the perturbation matrix A.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    if not (0 < epsilon < 1) or not (0 < alpha < 2):
        raise ValueError("need 0 < epsilon < 1 and 0 < alpha < 2")
    if r <= 0 or sigma2 <= 0 or delta <= 0:
        raise ValueError("r, sigma2, delta must be positive")
    norm = float(np.linalg.norm(theta_hat))
    if norm > r:
        raise ValueError(f"||theta_hat|| = {norm} exceeds the radius r = {r}")

    hessian = population_hessian(theta_hat, dist)
    lam_min = min_eigenvalue(hessian)

    points, probs = dist.support()
    xx = (points * probs[:, None]).T @ points
    lam_min_xx = min_eigenvalue(xx)

    d = dist.d
    slack = d * epsilon * sigma2 + d * alpha * sigma2 * math.log(2.0 / alpha)
    analytic_lower = (1.0 - epsilon) / 4.0 * lam_min_xx - slack

    u = points @ theta_hat
    dev = probs * (sigmoid(u) * sigmoid(-u) - (1.0 - epsilon) / 4.0)
    a_mat = (points * dev[:, None]).T @ points
    row_sums = np.sum(np.abs(a_mat), axis=1)
    row_sum_ok = bool(np.all(row_sums <= slack + 1e-12))

    t_conc = math.sqrt(2.0 * r * r * sigma2 * math.log(2.0 / alpha))

    return ConvexityReport(
        hessian=hessian, lambda_min=lam_min, lambda_min_xx=lam_min_xx,
        analytic_lower=analytic_lower, row_sums=row_sums, row_sum_rhs=slack,
        row_sum_ok=row_sum_ok, t_conc=t_conc, epsilon=epsilon, alpha=alpha,
        r=r, sigma2=sigma2, delta=delta,
        delta_ok=bool(lam_min_xx >= delta - 1e-12),
    )
