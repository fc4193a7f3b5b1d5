"""Fisher information of raw samples and of quantized messages.

For an enumerable feature distribution everything here is exact.  The trace
of the single-sample Fisher information is

    Tr(I_{X,Y}) = E[ ||S_theta(X, Y)||^2 ]
                = E_x[ ||x||^2 sigmoid(u) sigmoid(-u) ],   u = <theta, x>,

and for a (possibly stochastic) channel q_m(x, y) the message trace reduces
to a mixture-geometry identity over messages:

    Tr(I_M) = sum_m p(m) || E[S | M = m] ||^2,

which never exceeds the raw trace (data processing).  Budget bounds on the
message trace come in three flavors depending on the score's tail class:
4 sigma^2 k (sub-gaussian), 4 sigma_e^2 k^2 (sub-exponential) and 2^k I0
(second moment).  Tail parameters use the super-exponential convention
E[exp(Z^2 / sigma^2)] <= 2 (respectively E[exp(|Z| / sigma)] <= 2), and are
estimated by bisection along sampled directions, so the returned value is a
certified lower estimate of the direction supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import DistributionSpec, RiskEstimate, joint_weights, sigmoid
from .quantize import Quantizer, TableQuantizer

__all__ = [
    "LemmaBounds",
    "FisherReport",
    "lemma_bounds",
    "trace_fisher_raw",
    "trace_fisher_raw_mc",
    "message_distribution",
    "trace_fisher_message",
    "score_distribution",
    "estimate_subgaussian_param",
    "estimate_subexponential_param",
    "second_moment_matrix",
    "second_moment_bound",
]

# Message masses below this are treated as exactly zero to avoid 0/0 in the
# conditional score mean.
MASS_FLOOR = 1e-300

_DEFAULT_DIRECTIONS = 64


class LemmaBounds(NamedTuple):
    """Budget bounds on Tr(I_M): (4 s2 k, 4 se^2 k^2, 2^k I0)."""

    lemma1: float
    lemma2: float
    lemma3: float


def lemma_bounds(k: int, sigma2: float, sigma_e: float, i0: float) -> LemmaBounds:
    """Evaluate the three k-dependent bounds on the message Fisher trace."""
    if k < 1:
        raise ValueError("k must be >= 1")
    for name, value in (("sigma2", sigma2), ("sigma_e", sigma_e), ("i0", i0)):
        if not value >= 0:
            raise ValueError(f"{name} must be nonnegative")
    return LemmaBounds(4.0 * sigma2 * k, 4.0 * sigma_e**2 * k**2, (2.0**k) * i0)


@dataclass(frozen=True)
class FisherReport:
    """Exact Fisher traces for one (theta, distribution, quantizer) triple.

    ``conditional_means[m]`` is E[S | M=m] and ``masses[m]`` is p(m); the
    lemma bounds are evaluated with tail parameters of the *score* vector at
    this theta (which are dominated by those of the features themselves).
    """

    k: int
    trace_raw: float
    trace_msg: float
    masses: np.ndarray
    conditional_means: np.ndarray
    sigma2: float
    sigma_e: float
    i0: float
    bounds: LemmaBounds = field(init=False)

    def __post_init__(self):
        if self.trace_msg < 0:
            raise ValueError("message trace must be nonnegative")
        if self.trace_msg > self.trace_raw + 1e-9:
            raise ValueError(
                f"data processing violated: Tr(I_M)={self.trace_msg} exceeds "
                f"Tr(I_XY)={self.trace_raw}"
            )
        total = float(self.masses.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"message masses sum to {total!r}, expected 1")
        object.__setattr__(self, "bounds",
                           lemma_bounds(self.k, self.sigma2, self.sigma_e, self.i0))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "trace_raw": self.trace_raw,
            "trace_msg": self.trace_msg,
            "masses": [float(p) for p in self.masses],
            "conditional_means": [list(map(float, row))
                                  for row in self.conditional_means],
            "sigma2": self.sigma2,
            "sigma_e": self.sigma_e,
            "i0": self.i0,
            "bounds": {"lemma1": self.bounds.lemma1,
                       "lemma2": self.bounds.lemma2,
                       "lemma3": self.bounds.lemma3},
        }


# ---------------------------------------------------------------------------
# Raw-sample trace.
# ---------------------------------------------------------------------------


def trace_fisher_raw(theta, dist: DistributionSpec) -> float:
    """Exact Tr(I_{X,Y}) = E_x[ ||x||^2 sigmoid(u) sigmoid(-u) ]."""
    theta = np.asarray(theta, dtype=float)
    if not dist.is_enumerable:
        raise ValueError(
            "exact raw trace needs a finite support; use trace_fisher_raw_mc"
        )
    points, probs = dist.support()
    u = points @ theta
    return float(probs @ (np.sum(points**2, axis=1) * sigmoid(u) * sigmoid(-u)))


def trace_fisher_raw_mc(theta, dist: DistributionSpec, n_samples: int,
                        rng: np.random.Generator) -> RiskEstimate:
    """Monte Carlo estimate of the raw trace, with standard error."""
    if n_samples < 2:
        raise ValueError("need at least 2 Monte Carlo samples")
    theta = np.asarray(theta, dtype=float)
    x = dist.sample(rng, n_samples)
    u = x @ theta
    vals = np.sum(x**2, axis=1) * sigmoid(u) * sigmoid(-u)
    return RiskEstimate(float(vals.mean()),
                        float(vals.std(ddof=1) / math.sqrt(n_samples)))


# ---------------------------------------------------------------------------
# Message trace.
# ---------------------------------------------------------------------------


def _channel_tensor(dist: DistributionSpec, quantizer: Quantizer) -> np.ndarray:
    """Q[i, j, m] = P(M=m | x_i, y_j) with y ordered (-1, +1)."""
    points, _ = dist.support()
    if isinstance(quantizer, TableQuantizer):
        return np.stack([
            np.stack([quantizer.channel_row(x, -1) for x in points]),
            np.stack([quantizer.channel_row(x, 1) for x in points]),
        ], axis=1)
    n_msg = quantizer.n_messages
    q = np.zeros((points.shape[0], 2, n_msg))
    for i, x in enumerate(points):
        q[i, 0] = quantizer.channel_row(x, -1)
        q[i, 1] = quantizer.channel_row(x, 1)
    return q


def _score_tensor(theta: np.ndarray, points: np.ndarray) -> np.ndarray:
    """S[i, j, :] = score at (x_i, y_j) with y ordered (-1, +1)."""
    u = points @ theta
    s_neg = -points * sigmoid(u)[:, None]
    s_pos = points * sigmoid(-u)[:, None]
    return np.stack([s_neg, s_pos], axis=1)


def message_distribution(theta, dist: DistributionSpec,
                         quantizer: Quantizer) -> np.ndarray:
    """p_theta(m) = sum_{x,y} f(x) p_theta(y|x) q_m(x, y), for every m."""
    theta = np.asarray(theta, dtype=float)
    _, w = joint_weights(theta, dist)
    q = _channel_tensor(dist, quantizer)
    return np.einsum("ij,ijm->m", w, q)


def trace_fisher_message(theta, dist: DistributionSpec, quantizer: Quantizer,
                         tail_params: tuple[float, float, float] | None = None,
                         n_directions: int = _DEFAULT_DIRECTIONS,
                         rng: np.random.Generator | None = None) -> FisherReport:
    """Exact message Fisher trace via the mixture identity, as a full report.

    ``tail_params`` may supply (sigma2, sigma_e, i0) directly; otherwise they
    are estimated from the exact score distribution at this theta.
    """
    if quantizer.k > 20:
        raise ValueError("message enumeration is capped at 2^20 messages")
    theta = np.asarray(theta, dtype=float)
    points, w = joint_weights(theta, dist)
    q = _channel_tensor(dist, quantizer)
    s = _score_tensor(theta, points)

    masses = np.einsum("ij,ijm->m", w, q)
    numer = np.einsum("ij,ijm,ijd->md", w, q, s)
    live = masses > MASS_FLOOR
    means = np.zeros_like(numer)
    means[live] = numer[live] / masses[live, None]
    trace_msg = float(masses[live] @ np.sum(means[live] ** 2, axis=1))
    trace_raw = trace_fisher_raw(theta, dist)

    if tail_params is None:
        sdist = score_distribution(theta, dist)
        sigma2 = estimate_subgaussian_param(sdist, n_directions=n_directions, rng=rng)
        sigma_e = estimate_subexponential_param(sdist, n_directions=n_directions,
                                                rng=rng)
        i0 = second_moment_bound(sdist)
    else:
        sigma2, sigma_e, i0 = tail_params

    return FisherReport(k=quantizer.k, trace_raw=trace_raw, trace_msg=trace_msg,
                        masses=masses, conditional_means=means,
                        sigma2=sigma2, sigma_e=sigma_e, i0=i0)


def score_distribution(theta, dist: DistributionSpec) -> DistributionSpec:
    """Exact distribution of the score vector S_theta(X, Y) on a finite support."""
    theta = np.asarray(theta, dtype=float)
    points, w = joint_weights(theta, dist)
    s = _score_tensor(theta, points)
    atoms = np.concatenate([s[:, 0, :], s[:, 1, :]], axis=0)
    probs = np.concatenate([w[:, 0], w[:, 1]])
    probs = probs / probs.sum()
    return DistributionSpec.finite_support(atoms, probs)


# ---------------------------------------------------------------------------
# Tail parameter estimation (super-exponential convention).
# ---------------------------------------------------------------------------


def _directions(d: int, n_directions: int, rng: np.random.Generator) -> np.ndarray:
    """Coordinate axes plus random unit directions (rows)."""
    dirs = [np.eye(d)]
    if n_directions > 0 and d > 1:
        g = rng.standard_normal((n_directions, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        dirs.append(g)
    return np.concatenate(dirs, axis=0)


def _smallest_scale(g: np.ndarray, probs: np.ndarray, cap: float) -> float:
    """Smallest s with sum_i p_i exp(g_i / s) <= 2, for g >= 0, by bisection."""
    gmax = float(g.max(initial=0.0))
    if gmax <= 0.0:
        return 0.0
    hi = gmax / math.log(2.0)
    if hi > cap:
        raise ValueError(
            f"tail scale exceeds the cap {cap}: the distribution is not "
            "within this tail class at any tested parameter"
        )
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(probs @ np.exp(g / mid)) <= 2.0:
            hi = mid
        else:
            lo = mid
    return hi


def _projection_samples(dist: DistributionSpec, mc_samples: int,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if dist.is_enumerable:
        return dist.support()
    x = dist.sample(rng, mc_samples)
    return x, np.full(mc_samples, 1.0 / mc_samples)


def estimate_subgaussian_param(dist: DistributionSpec,
                               n_directions: int = _DEFAULT_DIRECTIONS,
                               rng: np.random.Generator | None = None,
                               mc_samples: int = 100_000,
                               cap: float = 1e15) -> float:
    """Smallest sigma^2 with E[exp(<u,X>^2 / sigma^2)] <= 2, maximized over u.

    Directions are the d coordinate axes plus ``n_directions`` random unit
    vectors; expectations are exact on finite supports and Monte Carlo
    otherwise, so the result is a certified lower estimate of the supremum
    over all directions.
    """
    if dist.tail_class != "sub-gaussian":
        raise ValueError(
            f"distribution is tagged {dist.tail_class!r}; the sub-gaussian "
            "parameter is only defined for sub-gaussian tails"
        )
    rng = rng if rng is not None else np.random.default_rng(0)
    points, probs = _projection_samples(dist, mc_samples, rng)
    dirs = _directions(dist.d, n_directions, rng)
    z = points @ dirs.T
    return max(_smallest_scale(z[:, j] ** 2, probs, cap) for j in range(dirs.shape[0]))


def estimate_subexponential_param(dist: DistributionSpec,
                                  n_directions: int = _DEFAULT_DIRECTIONS,
                                  rng: np.random.Generator | None = None,
                                  mc_samples: int = 100_000,
                                  cap: float = 1e15) -> float:
    """Smallest sigma with E[exp(|<u,X>| / sigma)] <= 2, maximized over u."""
    if dist.tail_class == "second-moment":
        raise ValueError(
            "distribution is tagged 'second-moment'; the sub-exponential "
            "parameter needs at least sub-exponential tails"
        )
    rng = rng if rng is not None else np.random.default_rng(0)
    points, probs = _projection_samples(dist, mc_samples, rng)
    dirs = _directions(dist.d, n_directions, rng)
    z = points @ dirs.T
    return max(_smallest_scale(np.abs(z[:, j]), probs, cap)
               for j in range(dirs.shape[0]))


# ---------------------------------------------------------------------------
# Second moment.
# ---------------------------------------------------------------------------


def second_moment_matrix(dist: DistributionSpec) -> np.ndarray:
    """E[X X^T] by exact enumeration."""
    points, probs = dist.support()
    return (points * probs[:, None]).T @ points


def second_moment_bound(dist: DistributionSpec) -> float:
    """I0 = sup over unit u of E[<u,X>^2] = largest eigenvalue of E[X X^T]."""
    from .bounds import jacobi_eigenvalues

    return float(jacobi_eigenvalues(second_moment_matrix(dist))[-1])
