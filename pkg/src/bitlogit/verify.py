"""Independent numerical oracles and the cross-module invariant suite.

The oracles here recompute quantities from their definitions (finite
differences of log probabilities, explicit enumeration) rather than through
the closed forms used by the production code, so agreement between the two
routes is evidence, not tautology.  ``run_verify`` executes every invariant
the package promises, at a quick (small-dimension) or full level, and
reports one named pass/fail line per invariant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DistributionSpec, sigmoid
from .fisher import message_distribution
from .quantize import Quantizer

__all__ = [
    "fd_gradient",
    "fd_hessian",
    "fd_message_fisher_trace",
    "CheckResult",
    "VerifyReport",
    "run_verify",
]


# ---------------------------------------------------------------------------
# Finite-difference oracles.
# ---------------------------------------------------------------------------


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        out[i] = (f(xp) - f(xm)) / (2.0 * step)
    return out


def fd_hessian(f: Callable[[np.ndarray], float], x: np.ndarray,
               step: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    d = x.size
    out = np.empty((d, d))
    f0 = f(x)
    for i in range(d):
        for j in range(i, d):
            xpp, xpm, xmp, xmm = (x.copy() for _ in range(4))
            xpp[i] += step
            xpp[j] += step
            xpm[i] += step
            xpm[j] -= step
            xmp[i] -= step
            xmp[j] += step
            xmm[i] -= step
            xmm[j] -= step
            if i == j:
                out[i, i] = (f(xpp) - 2.0 * f0 + f(xmm)) / (4.0 * step * step)
            else:
                val = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * step * step)
                out[i, j] = out[j, i] = val
    return out


def fd_message_fisher_trace(theta, dist: DistributionSpec, quantizer: Quantizer,
                            step: float = 1e-5) -> float:
    """Message Fisher trace straight from its definition.

    Tr(I_M) = sum_i E[ (d/d theta_i log p_theta(M))^2 ], with the log
    derivative taken by central differences of the exact message
    distribution.  Messages with vanishing mass contribute zero.
    """
    theta = np.asarray(theta, dtype=float)
    p0 = message_distribution(theta, dist, quantizer)
    live = p0 > 1e-300
    total = 0.0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        pp = message_distribution(tp, dist, quantizer)
        pm = message_distribution(tm, dist, quantizer)
        dlog = np.zeros_like(p0)
        dlog[live] = (np.log(pp[live]) - np.log(pm[live])) / (2.0 * step)
        total += float(p0[live] @ dlog[live] ** 2)
    return total


# ---------------------------------------------------------------------------
# Invariant suite.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}" + (
            f"  ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class VerifyReport:
    level: str
    results: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def lines(self) -> list[str]:
        out = [r.line() for r in self.results]
        n_fail = sum(not r.ok for r in self.results)
        out.append(f"{len(self.results) - n_fail}/{len(self.results)} invariants hold"
                   + (f"; {n_fail} FAILED" if n_fail else ""))
        return out


def _sweep_quantizers(d: int, seed: int):
    from .quantize import (
        group_encoder_quantizer,
        label_only_quantizer,
        make_group_partition,
        stochastic_quantizer_from_table,
    )
    from .rng import derive_rng

    dist = DistributionSpec.uniform_hypercube(d)
    points, _ = dist.support()
    k = min(3, d + 1) if d > 1 else 2
    assignment = make_group_partition(d=d, k=k, n=2 * len(points))
    rng = derive_rng(seed, "verify-table", d)
    raw = rng.random((points.shape[0], 2, 1 << k)) + 0.05
    table = raw / raw.sum(axis=2, keepdims=True)
    return dist, [
        label_only_quantizer(),
        group_encoder_quantizer(assignment, 0),
        stochastic_quantizer_from_table(points, table, k),
    ]


def run_verify(level: str = "quick", master_seed: int = 20260809) -> VerifyReport:
    """Execute the package's invariants; 'full' widens dimensions and adds
    the slow estimator-consistency and parallel-equivalence checks."""
    if level not in ("quick", "full"):
        raise ValueError(f"level must be 'quick' or 'full', got {level!r}")
    full = level == "full"
    d_cap = 6 if full else 4

    from . import bounds as bounds_mod
    from . import estimator as est_mod
    from . import fisher as fisher_mod
    from . import harness as harness_mod
    from . import model as model_mod
    from . import quantize as quant_mod
    from .rng import derive_rng

    results: list[CheckResult] = []

    def check(name: str, fn: Callable[[], str | None]) -> None:
        try:
            detail = fn()
            results.append(CheckResult(name, True, detail or ""))
        except AssertionError as exc:
            results.append(CheckResult(name, False, str(exc)))
        except Exception as exc:  # a crash is a failure, with its cause named
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    # ----- core model ------------------------------------------------------

    def score_domination():
        rng = derive_rng(master_seed, "dom")
        trials = 10_000 if full else 2_000
        for _ in range(trials):
            d = int(rng.integers(1, 8))
            theta = rng.normal(size=d) * 3
            x = rng.normal(size=d) * 3
            y = int(rng.choice([-1, 1]))
            u = rng.normal(size=d)
            u /= np.linalg.norm(u)
            s = model_mod.score(theta, (x, y))
            assert abs(u @ s) <= abs(u @ x) + 1e-12, "score projection exceeded |<u,x>|"
        return f"{trials} random draws"

    check("score pointwise domination", score_domination)

    def score_zero_mean():
        rng = derive_rng(master_seed, "zm")
        worst = 0.0
        for d in range(1, d_cap + 1):
            dist = DistributionSpec.uniform_hypercube(d)
            theta = rng.normal(size=d)
            points, w = model_mod.joint_weights(theta, dist)
            mean = np.zeros(d)
            for i, x in enumerate(points):
                mean += w[i, 0] * model_mod.score(theta, (x, -1))
                mean += w[i, 1] * model_mod.score(theta, (x, 1))
            worst = max(worst, float(np.max(np.abs(mean))))
        assert worst <= 1e-10, f"score mean reached {worst}"
        return f"max |E S| = {worst:.2e}"

    check("score zero mean under the model", score_zero_mean)

    def score_square_identity():
        rng = derive_rng(master_seed, "ss")
        for d in range(1, d_cap + 1):
            dist = DistributionSpec.uniform_hypercube(d)
            theta = rng.normal(size=d)
            closed = fisher_mod.trace_fisher_raw(theta, dist)
            points, w = model_mod.joint_weights(theta, dist)
            brute = 0.0
            for i, x in enumerate(points):
                for j, y in enumerate((-1, 1)):
                    s = model_mod.score(theta, (x, y))
                    brute += w[i, j] * float(s @ s)
            assert abs(closed - brute) <= 1e-10, f"d={d}: {closed} vs {brute}"
        return None

    check("E||S||^2 closed form equals enumeration", score_square_identity)

    def risk_convexity():
        rng = derive_rng(master_seed, "cvx")
        dist = DistributionSpec.uniform_hypercube(3)
        tt = rng.normal(size=3)
        for _ in range(40):
            a, b = rng.normal(size=3) * 2, rng.normal(size=3) * 2
            t = rng.uniform(0.05, 0.95)
            lhs = model_mod.population_logistic_risk(tt, t * a + (1 - t) * b, dist)
            rhs = (t * model_mod.population_logistic_risk(tt, a, dist)
                   + (1 - t) * model_mod.population_logistic_risk(tt, b, dist))
            assert lhs <= rhs + 1e-12, "risk convexity violated"
        return None

    check("population risk convex in the estimate", risk_convexity)

    def stream_determinism():
        dist = DistributionSpec.uniform_hypercube(4)
        a = model_mod.sample_x(dist, derive_rng(master_seed, "det"), 64)
        b = model_mod.sample_x(dist, derive_rng(master_seed, "det"), 64)
        assert np.array_equal(a, b), "derived streams diverged"
        return None

    check("derived streams replay identically", stream_determinism)

    # ----- quantize --------------------------------------------------------

    def channel_rows():
        for d in (1, 2, 3):
            dist, quantizers = _sweep_quantizers(d, master_seed)
            points, _ = dist.support()
            for q in quantizers:
                for x in points:
                    for y in (-1, 1):
                        row = q.channel_row(x, y)
                        assert np.all(row >= 0), "negative channel probability"
                        assert abs(row.sum() - 1.0) <= 1e-12, "channel row not normalized"
        return None

    check("channel rows are probability vectors", channel_rows)

    def encode_roundtrip():
        for d in range(1, d_cap + 1):
            points, _ = DistributionSpec.uniform_hypercube(d).support()
            for k in range(2, d + 2):
                assignment = quant_mod.make_group_partition(d=d, k=k, n=8)
                for gid in range(assignment.n_groups):
                    group = assignment.groups[gid]
                    for x in points:
                        for y in (-1, 1):
                            msg = quant_mod.encode_group(
                                (x, y), assignment, gid)
                            assert msg.m < (1 << k), "message overflows k bits"
                            vals, label = quant_mod.decode_group(msg, assignment, gid)
                            assert label == y and np.array_equal(vals, x[list(group)]), \
                                "round trip mismatch"
        return f"d <= {d_cap}, all k"

    check("group encode/decode exhaustive round trip", encode_roundtrip)

    def partition_cover():
        for d in range(1, 65):
            for k in range(2, min(d + 2, 66)):
                a = quant_mod.make_group_partition(d=d, k=k, n=d)
                covered = sorted(j for g in a.groups for j in g)
                assert covered == list(range(d)), f"cover broken at d={d}, k={k}"
        return "d <= 64"

    check("group partition covers coordinates exactly once", partition_cover)

    # ----- fisher ----------------------------------------------------------

    def data_processing_and_lemmas():
        rng = derive_rng(master_seed, "dp")
        cases = 0
        for d in range(2, d_cap + 1):
            dist, quantizers = _sweep_quantizers(d, master_seed)
            i0_x = fisher_mod.second_moment_bound(dist)
            s2_x = fisher_mod.estimate_subgaussian_param(
                dist, n_directions=16, rng=derive_rng(master_seed, "dirs", d))
            for q in quantizers:
                for _ in range(3 if full else 2):
                    theta = rng.normal(size=d)
                    theta *= min(1.0, 2.0 / np.linalg.norm(theta))
                    rep = fisher_mod.trace_fisher_message(
                        theta, dist, q, n_directions=16,
                        rng=derive_rng(master_seed, "tails", d))
                    assert rep.trace_msg <= rep.trace_raw + 1e-9, "data processing"
                    assert rep.trace_msg <= rep.bounds.lemma1 + 1e-9, "lemma-1 budget"
                    assert rep.trace_msg <= rep.bounds.lemma3 + 1e-9, "lemma-3 budget"
                    assert rep.sigma2 <= s2_x + 1e-12, "score tail above feature tail"
                    assert rep.trace_msg <= 4.0 * s2_x * q.k + 1e-9
                    assert rep.trace_msg <= 2.0**q.k * i0_x + 1e-9
                    cases += 1
        return f"{cases} (theta, quantizer) pairs"

    check("data processing + budget bounds", data_processing_and_lemmas)

    def fisher_fd_oracle():
        rng = derive_rng(master_seed, "fdo")
        for d in (2, 3):
            dist, quantizers = _sweep_quantizers(d, master_seed)
            for q in quantizers:
                theta = rng.normal(size=d)
                rep = fisher_mod.trace_fisher_message(theta, dist, q,
                                                      tail_params=(1.0, 1.0, 1.0))
                oracle = fd_message_fisher_trace(theta, dist, q)
                if oracle > 1e-12:
                    rel = abs(rep.trace_msg - oracle) / oracle
                    assert rel <= 1e-5, f"trace identity off by {rel:.2e}"
                else:
                    assert rep.trace_msg <= 1e-10
        return None

    check("message trace equals finite-difference definition", fisher_fd_oracle)

    def relabel_invariance():
        rng = derive_rng(master_seed, "perm")
        dist = DistributionSpec.uniform_hypercube(2)
        points, _ = dist.support()
        raw = rng.random((4, 2, 4)) + 0.05
        table = raw / raw.sum(axis=2, keepdims=True)
        theta = rng.normal(size=2)
        base = fisher_mod.trace_fisher_message(
            theta, dist, quant_mod.stochastic_quantizer_from_table(points, table, 2),
            tail_params=(1.0, 1.0, 1.0)).trace_msg
        perm = rng.permutation(4)
        after = fisher_mod.trace_fisher_message(
            theta, dist,
            quant_mod.stochastic_quantizer_from_table(points, table[:, :, perm], 2),
            tail_params=(1.0, 1.0, 1.0)).trace_msg
        assert abs(base - after) <= 1e-12 * max(1.0, base), "relabeling changed the trace"
        return None

    check("message relabeling invariance", relabel_invariance)

    def refinement_monotone():
        rng = derive_rng(master_seed, "refine")
        dist = DistributionSpec.uniform_hypercube(2)
        points, _ = dist.support()
        for _ in range(5):
            raw = rng.random((4, 2, 2)) + 0.05
            table = raw / raw.sum(axis=2, keepdims=True)
            w = rng.random((4, 2, 2))
            fine = np.empty((4, 2, 4))
            fine[:, :, 0::2] = table * w
            fine[:, :, 1::2] = table * (1.0 - w)
            theta = rng.normal(size=2)
            coarse_t = fisher_mod.trace_fisher_message(
                theta, dist, quant_mod.stochastic_quantizer_from_table(points, table, 1),
                tail_params=(1.0, 1.0, 1.0)).trace_msg
            fine_t = fisher_mod.trace_fisher_message(
                theta, dist, quant_mod.stochastic_quantizer_from_table(points, fine, 2),
                tail_params=(1.0, 1.0, 1.0)).trace_msg
            assert fine_t >= coarse_t - 1e-12, "refinement lost information"
        return None

    check("message refinement never decreases the trace", refinement_monotone)

    # ----- bounds ----------------------------------------------------------

    def hessian_psd():
        rng = derive_rng(master_seed, "psd")
        for d in range(2, d_cap + 1):
            dist = DistributionSpec.uniform_hypercube(d)
            for _ in range(4):
                h = bounds_mod.population_hessian(rng.normal(size=d), dist)
                assert bounds_mod.min_eigenvalue(h) >= -1e-10, "Hessian not PSD"
        return None

    check("population Hessian PSD", hessian_psd)

    def quadratic_lower_bound():
        rng = derive_rng(master_seed, "quad")
        dist = DistributionSpec.uniform_hypercube(3)
        for _ in range(10):
            theta = rng.normal(size=3) * 0.3
            delta = rng.normal(size=3) * 0.3
            lam = min(bounds_mod.min_eigenvalue(
                bounds_mod.population_hessian(theta + t * delta, dist))
                for t in np.linspace(0.0, 1.0, 21))
            excess = model_mod.excess_logistic_risk(theta, theta + delta, dist)
            assert excess >= 0.5 * lam * float(delta @ delta) - 1e-9, \
                "quadratic risk lower bound violated"
        return None

    check("excess risk dominates its quadratic bound", quadratic_lower_bound)

    def van_trees_consistency():
        for n in (10, 100, 1000):
            for k in (1, 3, 7):
                for d in (1, 4, 9):
                    s2 = 1.3
                    vt = bounds_mod.van_trees_bound(n, d, math.inf, 4.0 * s2 * k)
                    ref = 0.25 * d * d / (k * n * s2)
                    assert abs(vt - ref) <= 1e-12 * ref, "van Trees ratio drifted"
        return "27-cell grid"

    check("van Trees matches the k-branch scaling up to 1/4", van_trees_consistency)

    def van_trees_monotone_in_B():
        prev = 0.0
        for B in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
            v = bounds_mod.van_trees_bound(50, 3, B, 0.7)
            assert v > prev, "van Trees not increasing in B"
            prev = v
        return None

    check("van Trees increasing in the box width", van_trees_monotone_in_B)

    def strong_convexity():
        for d in range(2, d_cap + 1):
            dist = DistributionSpec.uniform_hypercube(d)
            s2 = fisher_mod.estimate_subgaussian_param(
                dist, n_directions=16, rng=derive_rng(master_seed, "sc", d))
            eps, alpha, r = bounds_mod.default_convexity_params(s2, d)
            rng = derive_rng(master_seed, "sc-grid", d)
            for _ in range(4):
                th = rng.normal(size=d)
                th *= r * rng.random() / max(np.linalg.norm(th), 1e-12)
                rep = bounds_mod.strong_convexity_check(th, dist, eps, alpha,
                                                        r, s2, delta=1.0)
                assert rep.lambda_min >= 0.15, f"lambda_min {rep.lambda_min} below 0.15"
                assert rep.lambda_min >= rep.analytic_lower, "analytic bound exceeded"
                assert rep.row_sum_ok, "row-sum inequality failed"
        return None

    check("strong convexity certificate", strong_convexity)

    # ----- estimator -------------------------------------------------------

    def scatter_and_ball():
        rng = derive_rng(master_seed, "scatter")
        theta = rng.normal(size=5) * 0.5
        assignment = quant_mod.make_group_partition(d=5, k=3, n=90)
        x, y = est_mod.sample_class_conditional(theta, 90,
                                                derive_rng(master_seed, "sc-data"))
        messages = [quant_mod.encode_group((x[i], int(y[i])), assignment, i)
                    for i in range(90)]
        seen = []
        config = est_mod.SGDConfig(projection_radius=1.5)
        ests = est_mod.solve_groups(messages, assignment, config,
                                    derive_rng(master_seed, "sc-sgd"))
        covered = sorted(j for e in ests for j in assignment.groups[e.group_id])
        assert covered == list(range(5)), "scatter does not cover coordinates once"
        for e in ests:
            assert float(np.linalg.norm(e.theta_local)) <= 1.5 + 1e-12, \
                "estimate escaped the projection ball"
        # zero-sample corner: a single sample leaves later groups empty
        tiny = quant_mod.make_group_partition(d=4, k=3, n=1)
        msgs = [quant_mod.encode_group((np.ones(4), 1), tiny, 0)]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = est_mod.distributed_estimate(msgs, tiny, config,
                                               derive_rng(master_seed, "tiny"))
        assert any(issubclass(w.category, est_mod.ZeroSampleGroupWarning)
                   for w in caught), "empty group not flagged"
        assert np.all(est[2:] == 0.0), "untouched coordinates must stay zero"
        return None

    check("scatter correctness and projection ball", scatter_and_ball)

    def construction_check():
        rng = derive_rng(master_seed, "cc")
        for d in range(1, d_cap + 1):
            res = est_mod.verify_class_conditional_construction(rng.normal(size=d))
            assert res.ok, f"construction check failed at d={d}: {res}"
        return f"d <= {d_cap}"

    check("class-conditional construction induces the logistic model",
          construction_check)

    # ----- harness ---------------------------------------------------------

    def sweep_determinism():
        import tempfile

        config = harness_mod.ExperimentConfig(
            n_grid=(60,), k_grid=(3,), d_grid=(4,), trials=2,
            seed=master_seed,
            theta=harness_mod.ThetaSource(kind="random-ball", radius=1.0),
        )
        out = []
        for _ in range(2):
            result = harness_mod.run_sweep(config)
            with tempfile.NamedTemporaryFile(mode="r", suffix=".csv") as fh:
                harness_mod.write_results(result.records, fh.name,
                                          result.summaries, config.seed)
                out.append(open(fh.name, "rb").read())
        assert out[0] == out[1], "sweep CSV not byte-identical across reruns"
        return None

    check("sweep output is a pure function of its config", sweep_determinism)

    def records_nonnegative():
        config = harness_mod.ExperimentConfig(
            n_grid=(40, 80), k_grid=(2,), d_grid=(3,), trials=2,
            seed=master_seed,
            theta=harness_mod.ThetaSource(kind="random-ball", radius=1.0),
        )
        result = harness_mod.run_sweep(config)
        for r in result.records:
            assert r.l2_error >= 0 and r.excess_risk >= -1e-12, "negative error"
        assert len(result.summaries) == 2, "one summary per cell expected"
        return None

    check("sweep records nonnegative and summarized per cell", records_nonnegative)

    if full:
        def parallel_equivalence():
            kwargs = dict(
                n_grid=(50,), k_grid=(2, 3), d_grid=(4,), trials=2,
                seed=master_seed,
                theta=harness_mod.ThetaSource(kind="random-ball", radius=1.0),
            )
            serial = harness_mod.run_sweep(
                harness_mod.ExperimentConfig(workers=1, **kwargs))
            parallel = harness_mod.run_sweep(
                harness_mod.ExperimentConfig(workers=2, **kwargs))
            assert serial.records == parallel.records, \
                "parallel and serial sweeps disagree"
            return None

        check("parallel/serial trial equivalence", parallel_equivalence)

        def excess_consistency():
            theta = np.array([0.8, -0.8, 0.4, -0.4])
            config = est_mod.SGDConfig()
            dist = est_mod.class_conditional_x_marginal(theta)
            means, errs = {}, {}
            for n in (1000, 2000):
                vals = []
                for trial in range(20):
                    assignment = quant_mod.make_group_partition(d=4, k=3, n=n)
                    x, y = est_mod.sample_class_conditional(
                        theta, n, derive_rng(master_seed, "consis", n, trial))
                    msgs = [quant_mod.encode_group((x[i], int(y[i])), assignment, i)
                            for i in range(n)]
                    est = est_mod.distributed_estimate(
                        msgs, assignment, config,
                        derive_rng(master_seed, "consis-sgd", n, trial))
                    vals.append(model_mod.excess_logistic_risk(theta, est, dist))
                means[n] = float(np.mean(vals))
                errs[n] = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
            pooled = math.hypot(errs[1000], errs[2000])
            assert means[2000] <= means[1000] + pooled, \
                "excess risk grew when n doubled"
            return f"{means[1000]:.2e} -> {means[2000]:.2e}"

        check("excess risk consistent as n doubles", excess_consistency)

    return VerifyReport(level=level, results=results)
