"""Logistic data model: parameter, samples, label law, score, population risks.

The model for a labeled pair (x, y) with y in {-1, +1} is

    p_theta(y | x) = 1 / (1 + exp(-y <theta, x>)) = sigmoid(y <theta, x>)

with x drawn from a configurable feature distribution.  The score (gradient
of the log likelihood in theta) is

    S_theta(x, y) = y * x * sigmoid(-y <theta, x>)

whose projection on any unit vector is dominated pointwise by the projection
of x itself, because the scalar prefactor has magnitude at most one.

Population risks use the logistic loss log(1 + exp(-y <theta_hat, x>)) and
are evaluated exactly, by enumeration, whenever the feature distribution has
finite support (the {-1,+1}^d hypercube is enumerable up to d = 20); a Monte
Carlo variant covers continuous distributions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ENUMERATION_CAP",
    "Parameter",
    "LabeledSample",
    "DistributionSpec",
    "RiskEstimate",
    "sigmoid",
    "log_sigmoid",
    "logistic_loss",
    "logistic_prob",
    "score",
    "batch_score",
    "sample_x",
    "sample_label",
    "joint_weights",
    "population_logistic_risk",
    "population_logistic_risk_mc",
    "excess_logistic_risk",
]

# Largest hypercube dimension expanded into an explicit support (2^21 terms
# once the two labels are counted).
ENUMERATION_CAP = 20

_TAIL_CLASSES = ("sub-gaussian", "sub-exponential", "second-moment")


# ---------------------------------------------------------------------------
# Stable sigmoid family.
#
# Branch rule: with z = exp(-|t|) (never overflows),
#     t >= 0:  sigmoid(t) = 1 / (1 + z)
#     t <  0:  sigmoid(t) = z / (1 + z)
# and in log space  log sigmoid(t) = min(t, 0) - log1p(z), which stays finite
# and accurate for |t| up to ~700.
# ---------------------------------------------------------------------------


def sigmoid(t):
    """Numerically stable logistic function, elementwise."""
    t = np.asarray(t, dtype=float)
    z = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return out if out.ndim else float(out)


def log_sigmoid(t):
    """log(sigmoid(t)) without overflow for large |t|."""
    t = np.asarray(t, dtype=float)
    out = np.minimum(t, 0.0) - np.log1p(np.exp(-np.abs(t)))
    return out if out.ndim else float(out)


def logistic_loss(margin):
    """log(1 + exp(-margin)), the logistic loss at margin y*<theta, x>."""
    m = np.asarray(margin, dtype=float)
    out = np.maximum(-m, 0.0) + np.log1p(np.exp(-np.abs(m)))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Domain types.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Parameter:
    """Model coefficient vector, optionally tagged with a box radius.

    ``box_radius`` records the half-width B of a parameter box [-B, B]^d when
    the parameter is known to be constrained; it is metadata only.
    """

    theta: np.ndarray
    box_radius: float | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size < 1:
            raise ValueError("theta must be a 1-D vector of length >= 1")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta entries must be finite")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if self.box_radius is not None and not self.box_radius > 0:
            raise ValueError("box_radius must be positive when given")

    @property
    def d(self) -> int:
        return self.theta.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.theta, dtype=dtype)


@dataclass(frozen=True)
class LabeledSample:
    """A feature vector with its {-1,+1} label."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError("x must be a 1-D vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("x entries must be finite")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y!r}")
        object.__setattr__(self, "y", int(self.y))


class RiskEstimate(NamedTuple):
    """Monte Carlo risk value with its standard error."""

    value: float
    stderr: float


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """Feature distribution over R^d.

    Kinds:
      * ``uniform-hypercube``   uniform on {-1,+1}^d
      * ``spherical-gaussian``  N(0, sigma^2 I_d)
      * ``product-laplace``     iid Laplace(scale=sigma) coordinates
      * ``finite-support``      explicit atoms with exact probabilities

    ``tail_class`` tags the strongest tail guarantee the distribution is
    asserted to satisfy (sub-gaussian > sub-exponential > second-moment);
    ``tail_param`` optionally records the declared parameter (sigma^2,
    sigma, or I0 respectively).
    """

    kind: str
    d: int
    sigma: float | None = None
    points: np.ndarray | None = None
    probs: np.ndarray | None = None
    tail_class: str = "sub-gaussian"
    tail_param: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.tail_class not in _TAIL_CLASSES:
            raise ValueError(f"unknown tail class {self.tail_class!r}")
        if self.tail_param is not None and not self.tail_param > 0:
            raise ValueError("tail parameter must be positive when given")
        if self.kind in ("spherical-gaussian", "product-laplace"):
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"{self.kind} requires sigma > 0")
        elif self.kind == "finite-support":
            points = np.atleast_2d(np.asarray(self.points, dtype=float))
            probs = np.asarray(self.probs, dtype=float)
            if points.shape != (probs.size, self.d):
                raise ValueError(
                    f"support shape {points.shape} does not match "
                    f"{probs.size} probabilities in dimension {self.d}"
                )
            if np.any(probs < 0):
                raise ValueError("probabilities must be nonnegative")
            if abs(float(probs.sum()) - 1.0) > 1e-12:
                raise ValueError(
                    f"probabilities sum to {probs.sum()!r}, expected 1 within 1e-12"
                )
            points = points.copy()
            probs = probs.copy()
            points.setflags(write=False)
            probs.setflags(write=False)
            object.__setattr__(self, "points", points)
            object.__setattr__(self, "probs", probs)
        elif self.kind != "uniform-hypercube":
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def uniform_hypercube(cls, d: int) -> "DistributionSpec":
        return cls(kind="uniform-hypercube", d=d, tail_class="sub-gaussian")

    @classmethod
    def spherical_gaussian(cls, d: int, sigma: float) -> "DistributionSpec":
        return cls(kind="spherical-gaussian", d=d, sigma=float(sigma),
                   tail_class="sub-gaussian")

    @classmethod
    def product_laplace(cls, d: int, sigma: float) -> "DistributionSpec":
        return cls(kind="product-laplace", d=d, sigma=float(sigma),
                   tail_class="sub-exponential")

    @classmethod
    def finite_support(cls, points, probs, tail_class="sub-gaussian",
                       tail_param=None) -> "DistributionSpec":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(kind="finite-support", d=points.shape[1], points=points,
                   probs=np.asarray(probs, dtype=float),
                   tail_class=tail_class, tail_param=tail_param)

    @classmethod
    def single_atom(cls, x) -> "DistributionSpec":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls.finite_support(x[None, :], np.array([1.0]))

    # -- support enumeration ------------------------------------------------

    @property
    def is_enumerable(self) -> bool:
        return self.kind == "finite-support" or (
            self.kind == "uniform-hypercube" and self.d <= ENUMERATION_CAP
        )

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Explicit (points, probabilities) for enumerable distributions.

        Hypercube points are listed in binary-counter order with coordinate 0
        as the least significant bit (bit 0 -> -1, bit 1 -> +1).
        """
        if self.kind == "finite-support":
            return self.points, self.probs
        if self.kind == "uniform-hypercube":
            if self.d > ENUMERATION_CAP:
                raise ValueError(
                    f"hypercube support for d={self.d} exceeds the d<={ENUMERATION_CAP} "
                    "enumeration cap; use the Monte Carlo variants"
                )
            n = 1 << self.d
            bits = (np.arange(n)[:, None] >> np.arange(self.d)[None, :]) & 1
            points = bits.astype(float) * 2.0 - 1.0
            probs = np.full(n, 1.0 / n)
            return points, probs
        raise ValueError(
            f"{self.kind} has no finite support; use the Monte Carlo variants"
        )

    # -- sampling ------------------------------------------------------------

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Draw one vector (n=None) or an (n, d) matrix of iid draws."""
        size = 1 if n is None else int(n)
        if self.kind == "uniform-hypercube":
            out = rng.integers(0, 2, size=(size, self.d)).astype(float) * 2.0 - 1.0
        elif self.kind == "spherical-gaussian":
            out = self.sigma * rng.standard_normal((size, self.d))
        elif self.kind == "product-laplace":
            out = rng.laplace(scale=self.sigma, size=(size, self.d))
        else:
            idx = rng.choice(self.probs.size, size=size, p=self.probs)
            out = self.points[idx]
        return out[0] if n is None else out

    def scaled(self, c: float) -> "DistributionSpec":
        """The distribution of c*X."""
        c = float(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        if self.kind == "finite-support":
            return DistributionSpec.finite_support(
                self.points * c, self.probs,
                tail_class=self.tail_class,
                tail_param=None,
            )
        if self.kind == "uniform-hypercube":
            points, probs = self.support()
            return DistributionSpec.finite_support(points * c, probs)
        return DistributionSpec(kind=self.kind, d=self.d, sigma=self.sigma * c,
                                tail_class=self.tail_class)

    # -- config (de)serialization -------------------------------------------

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "d": self.d}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.kind == "finite-support":
            out["points"] = [list(map(float, p)) for p in self.points]
            out["probs"] = [float(p) for p in self.probs]
        out["tail_class"] = self.tail_class
        if self.tail_param is not None:
            out["tail_param"] = self.tail_param
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        data = dict(data)
        kind = str(data.pop("kind")).replace("_", "-")
        d = int(data.pop("d"))
        tail_class = str(data.pop("tail_class", "")).replace("_", "-") or None
        tail_param = data.pop("tail_param", None)
        if kind == "uniform-hypercube":
            spec = cls.uniform_hypercube(d)
        elif kind == "spherical-gaussian":
            spec = cls.spherical_gaussian(d, float(data.pop("sigma")))
        elif kind == "product-laplace":
            spec = cls.product_laplace(d, float(data.pop("sigma")))
        elif kind == "finite-support":
            spec = cls.finite_support(data.pop("points"), data.pop("probs"))
        else:
            raise ValueError(f"unknown distribution kind {kind!r}")
        if tail_class or tail_param is not None:
            spec = cls(kind=spec.kind, d=spec.d, sigma=spec.sigma,
                       points=spec.points, probs=spec.probs,
                       tail_class=tail_class or spec.tail_class,
                       tail_param=tail_param)
        return spec


# ---------------------------------------------------------------------------
# Model operations.
# ---------------------------------------------------------------------------


def _theta_vec(theta) -> np.ndarray:
    return np.asarray(theta, dtype=float)


def _check_dim(theta: np.ndarray, x: np.ndarray) -> None:
    if theta.shape[-1] != x.shape[-1]:
        raise ValueError(
            f"dimension mismatch: theta has d={theta.shape[-1]}, x has d={x.shape[-1]}"
        )


def _unpack_sample(sample) -> tuple[np.ndarray, int]:
    if isinstance(sample, LabeledSample):
        return sample.x, sample.y
    x, y = sample
    return np.asarray(x, dtype=float), int(y)


def logistic_prob(theta, x, y: int) -> float:
    """p_theta(y | x) = sigmoid(y * <theta, x>).

    Branch rule: with t = y <theta, x> and z = exp(-|t|), the unlikely-label
    probability is q = z / (1 + z); the likely label gets 1 - q.  Computing
    the pair through the one shared division keeps q positive down to
    t = -700 and makes the two label probabilities sum to exactly 1.
    """
    theta = _theta_vec(theta)
    x = np.asarray(x, dtype=float)
    _check_dim(theta, x)
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y!r}")
    t = y * float(x @ theta)
    z = np.exp(-abs(t))
    q = z / (1.0 + z)
    return q if t < 0 else 1.0 - q


def score(theta, sample) -> np.ndarray:
    """Gradient of log p_theta(x, y) in theta: y * x * sigmoid(-y <theta, x>)."""
    theta = _theta_vec(theta)
    x, y = _unpack_sample(sample)
    _check_dim(theta, x)
    return y * x * sigmoid(-y * float(x @ theta))


def batch_score(theta, samples: Iterable) -> np.ndarray:
    """Sum of per-sample scores; scores of independent samples add."""
    total = None
    for sample in samples:
        s = score(theta, sample)
        total = s if total is None else total + s
    if total is None:
        raise ValueError("batch_score requires a nonempty batch")
    return total


def sample_x(dist: DistributionSpec, rng: np.random.Generator,
             n: int | None = None) -> np.ndarray:
    """Draw features from the distribution; deterministic given the stream."""
    return dist.sample(rng, n)


def sample_label(theta, x, rng: np.random.Generator):
    """Draw y in {-1,+1} with P(y=+1|x) = sigmoid(<theta, x>).

    Accepts a single vector (returns an int) or an (n, d) matrix (returns an
    (n,) int array).
    """
    theta = _theta_vec(theta)
    x = np.asarray(x, dtype=float)
    _check_dim(theta, x)
    p_pos = sigmoid(x @ theta)
    if x.ndim == 1:
        return 1 if rng.random() < p_pos else -1
    return np.where(rng.random(x.shape[0]) < p_pos, 1, -1)


def joint_weights(theta, dist: DistributionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Enumerate the joint law of (x, y) under the model at ``theta``.

    Returns (points, W) where W[:, 0] = f(x) p_theta(-1|x) and
    W[:, 1] = f(x) p_theta(+1|x).  Requires an enumerable distribution.
    """
    theta = _theta_vec(theta)
    points, probs = dist.support()
    _check_dim(theta, points)
    u = points @ theta
    p_pos = sigmoid(u)
    return points, np.column_stack([probs * (1.0 - p_pos), probs * p_pos])


def population_logistic_risk(theta_true, theta_hat, dist: DistributionSpec) -> float:
    """Exact population logistic risk E[log(1 + exp(-Y <theta_hat, X>))].

    The expectation is an exact sum over support x {-1,+1} and therefore
    requires an enumerable distribution (finite support, or the hypercube
    with d <= 20).  Use :func:`population_logistic_risk_mc` otherwise.
    """
    theta_hat = _theta_vec(theta_hat)
    if not dist.is_enumerable:
        raise ValueError(
            "exact risk needs a finite support (hypercube d <= "
            f"{ENUMERATION_CAP} or finite-support); use "
            "population_logistic_risk_mc for this distribution"
        )
    points, w = joint_weights(theta_true, dist)
    _check_dim(theta_hat, points)
    u_hat = points @ theta_hat
    # loss at y=-1 is logistic_loss(-u), at y=+1 logistic_loss(+u)
    return float(w[:, 0] @ logistic_loss(-u_hat) + w[:, 1] @ logistic_loss(u_hat))


def population_logistic_risk_mc(theta_true, theta_hat, dist: DistributionSpec,
                                n_samples: int, rng: np.random.Generator) -> RiskEstimate:
    """Monte Carlo population risk with its standard error."""
    if n_samples < 2:
        raise ValueError("need at least 2 Monte Carlo samples")
    theta_true = _theta_vec(theta_true)
    theta_hat = _theta_vec(theta_hat)
    x = dist.sample(rng, n_samples)
    _check_dim(theta_hat, x)
    y = sample_label(theta_true, x, rng)
    losses = logistic_loss(y * (x @ theta_hat))
    value = float(np.mean(losses))
    stderr = float(np.std(losses, ddof=1) / np.sqrt(n_samples))
    return RiskEstimate(value, stderr)


def excess_logistic_risk(theta_true, theta_hat, dist: DistributionSpec) -> float:
    """Risk of theta_hat minus the minimum risk, attained at theta_true.

    Nonnegative up to enumeration round-off (~1e-12); the gradient of the
    population risk vanishes at the true parameter, and the risk is convex.
    """
    return population_logistic_risk(theta_true, theta_hat, dist) - \
        population_logistic_risk(theta_true, theta_true, dist)
