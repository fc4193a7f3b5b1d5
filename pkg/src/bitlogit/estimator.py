"""Central estimator: decode per group, solve small logistic regressions.

Each machine's message carries one group's coordinates plus the label, and
the receiver solves one projected averaged-SGD logistic regression per group
before scattering the group solutions back into the full parameter vector.

The hypercube experiments generate data from the class-conditional
construction: Y is a fair {-1,+1} coin and, given Y = y, the coordinates are
independent with

    P(X_j = v | y) = exp(y theta_j v / 2) / (exp(theta_j/2) + exp(-theta_j/2)),

equivalently P(X_j = y | y) = sigmoid(theta_j).  Bayes inversion gives back
exactly the logistic label law sigmoid(y <theta, x>), and dropping to any
coordinate block keeps the product form, so a block's (x_block, y) pairs are
themselves a logistic model with the block of theta as its parameter.  That
marginalization step is what makes the per-group regressions well specified,
and :func:`verify_class_conditional_construction` checks it by enumeration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import DistributionSpec, LabeledSample, log_sigmoid, sigmoid
from .quantize import GroupAssignment, Message, decode_group

__all__ = [
    "SGDConfig",
    "GroupEstimate",
    "ZeroSampleGroupWarning",
    "ConstructionCheck",
    "sgd_logistic",
    "solve_groups",
    "distributed_estimate",
    "sample_class_conditional",
    "class_conditional_x_marginal",
    "verify_class_conditional_construction",
]


class ZeroSampleGroupWarning(UserWarning):
    """A group received no samples; its coordinates stay at zero."""


@dataclass(frozen=True)
class SGDConfig:
    """Projected averaged SGD settings.

    Steps follow eta_t = step_scale / sqrt(t) with a global 1-based counter;
    iterates are projected onto the ball of radius ``projection_radius``
    (default 2 sqrt(dim) of the problem being solved); the returned estimate
    averages the iterates after ``averaging_start`` (default: the second half
    of all steps).
    """

    step_scale: float = 1.0
    projection_radius: float | None = None
    epochs: int = 1
    averaging_start: int | None = None

    def __post_init__(self):
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.projection_radius is not None and self.projection_radius <= 0:
            raise ValueError("projection_radius must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.averaging_start is not None and self.averaging_start < 0:
            raise ValueError("averaging_start must be nonnegative")


@dataclass(frozen=True)
class GroupEstimate:
    """One group's local solution."""

    group_id: int
    theta_local: np.ndarray
    n_samples: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta_local)):
            raise ValueError("group estimate must be finite")


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for sample in samples:
        if isinstance(sample, LabeledSample):
            xs.append(sample.x)
            ys.append(sample.y)
        else:
            x, y = sample
            xs.append(np.asarray(x, dtype=float))
            ys.append(int(y))
    if not xs:
        raise ValueError("sgd_logistic requires at least one sample")
    x_mat = np.stack(xs)
    return x_mat, np.asarray(ys, dtype=float)


def sgd_logistic(samples, config: SGDConfig, rng: np.random.Generator,
                 iterate_hook: Callable[[int, np.ndarray], None] | None = None,
                 ) -> np.ndarray:
    """Projected averaged SGD on the logistic loss, starting from zero.

    One pass per epoch in a freshly shuffled order; the per-step gradient is
    the negated score -y x sigmoid(-y <theta, x>).  Returns the average of
    the post-projection iterates after the averaging start.
    """
    x_mat, ys = _as_arrays(samples)
    n, dim = x_mat.shape
    total = n * config.epochs
    rho = config.projection_radius if config.projection_radius is not None \
        else 2.0 * np.sqrt(dim)
    avg_start = total // 2 if config.averaging_start is None else config.averaging_start
    if avg_start >= total:
        raise ValueError(
            f"averaging_start={avg_start} must be below the total step count {total}"
        )

    theta = np.zeros(dim)
    acc = np.zeros(dim)
    t = 0
    for _ in range(config.epochs):
        for idx in rng.permutation(n):
            t += 1
            x = x_mat[idx]
            y = ys[idx]
            margin = y * float(x @ theta)
            theta = theta + (config.step_scale / np.sqrt(t)) * y * sigmoid(-margin) * x
            norm = float(np.linalg.norm(theta))
            if norm > rho:
                theta = theta * (rho / norm)
            if iterate_hook is not None:
                iterate_hook(t, theta)
            if t > avg_start:
                acc += theta
    return acc / (total - avg_start)


# ---------------------------------------------------------------------------
# Distributed assembly.
# ---------------------------------------------------------------------------


def solve_groups(messages: Sequence[Message], assignment: GroupAssignment,
                 config: SGDConfig, rng: np.random.Generator) -> list[GroupEstimate]:
    """Decode messages, route them to their groups, solve each group.

    Message i must come from sample i (round-robin routing).  Within a group
    the decoded samples are sorted by message value before the seeded
    shuffle, so any permutation of a group's messages leaves the result
    unchanged.  Each group consumes its own child stream spawned from ``rng``
    in group order, making results independent of scheduling.
    """
    m = assignment.n_groups
    if len(messages) != assignment.n_samples:
        raise ValueError(
            f"got {len(messages)} messages for an assignment routing "
            f"{assignment.n_samples} samples"
        )
    per_group: list[list[int]] = [[] for _ in range(m)]
    for i, msg in enumerate(messages):
        if msg.k != assignment.k:
            raise ValueError(
                f"message {i} carries k={msg.k}, assignment has k={assignment.k}"
            )
        per_group[assignment.group_of_sample(i)].append(msg.m)

    streams = rng.spawn(m)
    estimates = []
    for gid in range(m):
        values = sorted(per_group[gid])
        gsize = len(assignment.groups[gid])
        if not values:
            warnings.warn(f"group {gid} received no samples; coordinates left at 0",
                          ZeroSampleGroupWarning, stacklevel=2)
            estimates.append(GroupEstimate(gid, np.zeros(gsize), 0))
            continue
        samples = [decode_group(Message(v, assignment.k), assignment, gid)
                   for v in values]
        theta_local = sgd_logistic(samples, config, streams[gid])
        estimates.append(GroupEstimate(gid, theta_local, len(values)))
    return estimates


def distributed_estimate(messages: Sequence[Message], assignment: GroupAssignment,
                         config: SGDConfig, rng: np.random.Generator) -> np.ndarray:
    """Full d-dimensional estimate assembled from per-group solutions."""
    theta_hat = np.zeros(assignment.d)
    for est in solve_groups(messages, assignment, config, rng):
        for local_idx, j in enumerate(assignment.groups[est.group_id]):
            theta_hat[j] = est.theta_local[local_idx]
    return theta_hat


# ---------------------------------------------------------------------------
# Class-conditional hypercube data.
# ---------------------------------------------------------------------------


def sample_class_conditional(theta, n: int, rng: np.random.Generator,
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Draw n pairs (x, y): fair labels, then X_j = y with prob sigmoid(theta_j).

    The draw order is fixed (labels first, then the coordinate agreement
    matrix) so streams replay identically.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    agree = rng.random((n, theta.size)) < sigmoid(theta)[None, :]
    x = y[:, None] * np.where(agree, 1.0, -1.0)
    return x, y


def class_conditional_x_marginal(theta) -> DistributionSpec:
    """Exact feature marginal of the class-conditional joint, as atoms.

    p(x) = cosh(<theta, x>/2) / prod_j (2 cosh(theta_j / 2)); combined with
    the logistic label law this reproduces the generating joint exactly, so
    risks computed against this spec are risks under the true data law.
    """
    theta = np.asarray(theta, dtype=float)
    points, _ = DistributionSpec.uniform_hypercube(theta.size).support()
    u = points @ theta
    log_w = np.logaddexp(u / 2.0, -u / 2.0)
    log_w -= np.sum(np.logaddexp(theta / 2.0, -theta / 2.0)) + np.log(2.0)
    probs = np.exp(log_w)
    probs /= probs.sum()
    return DistributionSpec.finite_support(points, probs)


def _coordinate_conditionals(theta: np.ndarray) -> np.ndarray:
    """table[j, (y index), (x index)] = P(X_j = x | y) for x, y in (-1, +1)."""
    agree = sigmoid(theta)
    table = np.empty((theta.size, 2, 2))
    # y = -1: X_j agrees with y (i.e. equals -1) with prob sigmoid(theta_j)
    table[:, 0, 0] = agree
    table[:, 0, 1] = 1.0 - agree
    # y = +1
    table[:, 1, 1] = agree
    table[:, 1, 0] = 1.0 - agree
    return table


@dataclass(frozen=True)
class ConstructionCheck:
    """Result of the class-conditional consistency check."""

    posterior_max_err: float
    block_product_max_err: float
    block_posterior_max_err: float
    ok: bool


def verify_class_conditional_construction(theta, blocks=None,
                                          tol: float = 1e-10) -> ConstructionCheck:
    """Confirm the construction induces the logistic model, by enumeration.

    Checks, over the full 2^d x {-1,+1} support (d <= 6):

    * Bayes inversion of the class conditionals equals sigmoid(y <theta, x>);
    * for each coordinate block, the conditional law of the block given y is
      the product of its coordinate conditionals (marginalization keeps the
      product form), and its implied posterior is logistic in the block of
      theta.

    ``blocks`` defaults to all singletons plus the first half of the
    coordinates.
    """
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    if d > 6:
        raise ValueError("construction check enumerates 2^d points; needs d <= 6")
    points, _ = DistributionSpec.uniform_hypercube(d).support()
    table = _coordinate_conditionals(theta)

    x_idx = ((points + 1.0) / 2.0).astype(int)
    cond = np.empty((points.shape[0], 2))
    for yi in range(2):
        cond[:, yi] = np.prod(table[np.arange(d)[None, :], yi, x_idx], axis=1)
    joint = 0.5 * cond

    posterior_pos = joint[:, 1] / joint.sum(axis=1)
    u = points @ theta
    posterior_err = float(np.max(np.abs(posterior_pos - sigmoid(u))))

    if blocks is None:
        blocks = [(j,) for j in range(d)]
        if d > 1:
            blocks.append(tuple(range(d // 2 or 1)))

    block_prod_err = 0.0
    block_post_err = 0.0
    for block in blocks:
        block = tuple(block)
        rest = tuple(j for j in range(d) if j not in block)
        sub_points, _ = DistributionSpec.uniform_hypercube(len(block)).support()
        sub_idx = ((sub_points + 1.0) / 2.0).astype(int)
        for yi in range(2):
            # marginal of the block given y, by summing the full conditional
            marg = np.zeros(sub_points.shape[0])
            for row, point in enumerate(points):
                key = int(np.sum([(1 << b) for b, j in enumerate(block)
                                  if point[j] == 1.0])) if block else 0
                marg[key] += cond[row, yi]
            prod_form = np.prod(
                table[np.asarray(block)[None, :], yi, sub_idx], axis=1)
            block_prod_err = max(block_prod_err,
                                 float(np.max(np.abs(marg - prod_form))))
        # implied posterior on the block
        sub_joint = np.stack([
            0.5 * np.prod(table[np.asarray(block)[None, :], 0, sub_idx], axis=1),
            0.5 * np.prod(table[np.asarray(block)[None, :], 1, sub_idx], axis=1),
        ], axis=1)
        sub_posterior = sub_joint[:, 1] / sub_joint.sum(axis=1)
        sub_u = sub_points @ theta[list(block)]
        block_post_err = max(block_post_err,
                             float(np.max(np.abs(sub_posterior - sigmoid(sub_u)))))

    ok = max(posterior_err, block_prod_err, block_post_err) <= tol
    return ConstructionCheck(posterior_err, block_prod_err, block_post_err, ok)
