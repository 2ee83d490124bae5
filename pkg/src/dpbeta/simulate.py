"""Monte-Carlo harness: replicate the sample -> release -> fit -> infer
pipeline over a parameter grid and tabulate coverage, interval length, bias
and the frequency of non-existence.

The reference design places the node effects on a linear grid
``beta*_i = (i-1) c log(n)/(n-1)``, draws two dichotomous node attributes
(+1 with probability 0.4 and 0.5 respectively), forms pair covariates as
attribute products, sets gamma* = (0.5, -0.5), and privatizes with k = 1 and
epsilon = log(n)/n^(1/6) or log(n)/n^(1/4).

Replications are independent work items seeded by a splittable scheme
(child ``SeedSequence`` per replication), so results are identical for any
worker count and execution order.  All reported statistics are conditional
on the estimate existing; non-existence is tallied, never raised.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional, Tuple

import numpy as np

from .estimator import fit
from .inference import (
    _z_value,
    beta_contrast_se,
    bias_correct,
    gamma_se,
    normal_quantile,
)
from .model import ModelParams, pair_indices, sample_network, sufficient_stats
from .release import PrivacyBudget, release

__all__ = [
    "SimDesign",
    "SimTable",
    "make_beta_star",
    "make_sim_covariates",
    "epsilon_of",
    "default_pairs",
    "run_design",
]

EPSILON_RULES = ("logn_n16", "logn_n14", "custom")


def make_beta_star(n: int, c: float) -> np.ndarray:
    """Linear grid of node effects: beta*_i = (i-1) c log(n) / (n-1), 1-based i."""
    if n < 2:
        raise ValueError("need n >= 2")
    if c < 0:
        raise ValueError("slope c must be >= 0")
    return np.arange(n) * (c * np.log(n) / (n - 1))


def make_sim_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Pair covariates z_ij = (x_i1 x_j1, x_i2 x_j2) from node attributes in
    {1, -1}, with P(x_1 = 1) = 0.4 and P(x_2 = 1) = 0.5.  z* = 1."""
    x1 = np.where(rng.random(n) < 0.4, 1.0, -1.0)
    x2 = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    i, j = pair_indices(n)
    return np.column_stack([x1[i] * x1[j], x2[i] * x2[j]])


def epsilon_of(rule: str, n: int, custom: Optional[float] = None) -> float:
    """Evaluate a privacy-budget rule at network size n."""
    if rule == "logn_n16":
        return float(np.log(n) / n ** (1.0 / 6.0))
    if rule == "logn_n14":
        return float(np.log(n) / n ** (1.0 / 4.0))
    if rule == "custom":
        if custom is None or custom <= 0:
            raise ValueError("custom epsilon rule needs a positive value")
        return float(custom)
    raise ValueError(f"unknown epsilon rule {rule!r}; expected one of {EPSILON_RULES}")


def default_pairs(n: int) -> Tuple[Tuple[int, int], ...]:
    """The five reported contrasts (0-based): (1,2), (n/2, n/2+1), (n-1, n),
    (1, n/2), (1, n) in 1-based labels."""
    half = n // 2
    return ((0, 1), (half - 1, half), (n - 2, n - 1), (0, half - 1), (0, n - 1))


@dataclass(frozen=True)
class SimDesign:
    """One cell of the simulation grid.

    ``pairs`` holds 0-based node pairs for the beta-contrast reports; when
    empty, the five standard pairs are used.  ``redraw_covariates`` controls
    whether node attributes are drawn fresh each replication (default) or
    held fixed across the whole cell.
    """

    n: int
    c: float
    epsilon_rule: str = "logn_n16"
    epsilon_custom: Optional[float] = None
    k: int = 1
    gamma_star: Tuple[float, ...] = (0.5, -0.5)
    replications: int = 500
    seed: int = 0
    pairs: Tuple[Tuple[int, int], ...] = ()
    level: float = 0.95
    redraw_covariates: bool = True

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if self.epsilon_rule not in EPSILON_RULES:
            raise ValueError(f"unknown epsilon rule {self.epsilon_rule!r}")
        pairs = tuple(tuple(int(x) for x in pr) for pr in self.pairs)
        if not pairs:
            pairs = default_pairs(self.n)
        for i, j in pairs:
            if not (0 <= i < self.n and 0 <= j < self.n) or i == j:
                raise ValueError(f"invalid node pair ({i}, {j}) for n={self.n}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "gamma_star", tuple(float(g) for g in self.gamma_star))

    @property
    def epsilon(self) -> float:
        return epsilon_of(self.epsilon_rule, self.n, self.epsilon_custom)

    @property
    def p(self) -> int:
        return len(self.gamma_star)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "c": self.c,
            "epsilon_rule": self.epsilon_rule,
            "epsilon_custom": self.epsilon_custom,
            "epsilon": self.epsilon,
            "k": self.k,
            "gamma_star": list(self.gamma_star),
            "replications": self.replications,
            "seed": self.seed,
            "pairs": [list(pr) for pr in self.pairs],
            "level": self.level,
            "redraw_covariates": self.redraw_covariates,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimDesign":
        known = {
            "n",
            "c",
            "epsilon_rule",
            "epsilon_custom",
            "k",
            "gamma_star",
            "replications",
            "seed",
            "pairs",
            "level",
            "redraw_covariates",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown design fields: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if k in known}
        if "gamma_star" in kwargs:
            kwargs["gamma_star"] = tuple(kwargs["gamma_star"])
        if "pairs" in kwargs:
            kwargs["pairs"] = tuple(tuple(pr) for pr in kwargs["pairs"])
        return cls(**kwargs)


def _fixed_covariates(design: SimDesign) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(design.seed, spawn_key=(0,)))
    return make_sim_covariates(design.n, rng)


def _replicate(design: SimDesign, covariates: Optional[np.ndarray], rep: int) -> dict:
    """Run one replication; returns plain-Python record for merging."""
    rng = np.random.default_rng(np.random.SeedSequence(design.seed, spawn_key=(1, rep)))
    z = make_sim_covariates(design.n, rng) if covariates is None else covariates
    beta_star = make_beta_star(design.n, design.c)
    gamma_star = np.asarray(design.gamma_star)
    truth = ModelParams(beta=beta_star, gamma=gamma_star)
    net = sample_network(truth, z, rng)
    stats = sufficient_stats(net)
    budget = PrivacyBudget(epsilon=design.epsilon, k=design.k)
    released = release(stats, budget, z_star=net.z_star, rng=rng)
    result = fit(released, z)
    if not result.exists:
        return {"exists": False, "reason": result.reason}
    zq = _z_value(design.level)
    record = {"exists": True, "pairs": [], "gamma": None}
    for i, j in design.pairs:
        se = beta_contrast_se(result, i, j)
        est = float(result.beta_hat[i] - result.beta_hat[j])
        true_contrast = float(beta_star[i] - beta_star[j])
        xi = (est - true_contrast) / se
        record["pairs"].append(
            {"covered": bool(abs(xi) <= zq), "length": 2.0 * zq * se, "xi": xi}
        )
    if design.p:
        se_g = gamma_se(result)
        gamma_bc = bias_correct(result, z)
        err = result.gamma_hat - gamma_star
        err_bc = gamma_bc - gamma_star
        record["gamma"] = {
            "err": err.tolist(),
            "err_bc": err_bc.tolist(),
            "covered": (np.abs(err) <= zq * se_g).tolist(),
            "covered_bc": (np.abs(err_bc) <= zq * se_g).tolist(),
            "length": (2.0 * zq * se_g).tolist(),
        }
    return record


@dataclass
class SimTable:
    """Aggregated results for one design cell.

    ``pair_stats`` rows: pair, coverage_pct, mean_length, xi quantiles.
    ``gamma_stats`` rows: component, corrected/uncorrected coverage_pct,
    mean/median bias before and after correction, mean_length.  Percentages
    are conditional on existence.
    """

    design: SimDesign
    replications: int
    exist_count: int
    nonexistence_pct: float
    nonexistence_reasons: dict
    pair_stats: list
    gamma_stats: list

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and np.isnan(x)) else x

        return {
            "design": self.design.to_dict(),
            "replications": self.replications,
            "exist_count": self.exist_count,
            "nonexistence_pct": self.nonexistence_pct,
            "nonexistence_reasons": self.nonexistence_reasons,
            "pair_stats": [
                {k: clean(v) for k, v in row.items()} for row in self.pair_stats
            ],
            "gamma_stats": [
                {k: clean(v) for k, v in row.items()} for row in self.gamma_stats
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """Flat table: one row per reported pair and per gamma component."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "kind",
                "target",
                "n",
                "c",
                "epsilon",
                "k",
                "coverage_pct",
                "coverage_bc_pct",
                "mean_length",
                "mean_bias",
                "mean_bias_bc",
                "nonexistence_pct",
            ]
        )
        base = [self.design.n, self.design.c, repr(self.design.epsilon), self.design.k]
        for row in self.pair_stats:
            writer.writerow(
                [
                    "beta_contrast",
                    "{}-{}".format(*[x + 1 for x in row["pair"]]),
                    *base,
                    _fmt(row["coverage_pct"]),
                    "",
                    _fmt(row["mean_length"]),
                    "",
                    "",
                    _fmt(self.nonexistence_pct),
                ]
            )
        for row in self.gamma_stats:
            writer.writerow(
                [
                    "gamma",
                    row["component"] + 1,
                    *base,
                    _fmt(row["coverage_pct"]),
                    _fmt(row["coverage_bc_pct"]),
                    _fmt(row["mean_length"]),
                    _fmt(row["mean_bias"]),
                    _fmt(row["mean_bias_bc"]),
                    _fmt(self.nonexistence_pct),
                ]
            )
        return buf.getvalue()

    def qq_csv(self) -> str:
        """Quantiles of the standardized contrast pivot against normal quantiles."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pair", "prob", "empirical_quantile", "normal_quantile"])
        for row in self.pair_stats:
            pair = "{}-{}".format(*[x + 1 for x in row["pair"]])
            for prob, emp, theo in zip(
                row["xi_probs"], row["xi_quantiles"], row["normal_quantiles"]
            ):
                writer.writerow([pair, repr(prob), _fmt(emp), repr(theo)])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


def _aggregate(design: SimDesign, records: list) -> SimTable:
    total = len(records)
    existing = [r for r in records if r["exists"]]
    n_exist = len(existing)
    reasons = {}
    for r in records:
        if not r["exists"]:
            reasons[r["reason"]] = reasons.get(r["reason"], 0) + 1
    probs = [i / 100.0 for i in range(1, 100)]
    pair_stats = []
    for idx, pr in enumerate(design.pairs):
        covered = [r["pairs"][idx]["covered"] for r in existing]
        lengths = [r["pairs"][idx]["length"] for r in existing]
        xis = np.array([r["pairs"][idx]["xi"] for r in existing])
        if n_exist:
            quantiles = np.quantile(xis, probs).tolist()
        else:
            quantiles = [float("nan")] * len(probs)
        pair_stats.append(
            {
                "pair": list(pr),
                "coverage_pct": 100.0 * np.mean(covered) if n_exist else float("nan"),
                "mean_length": float(np.mean(lengths)) if n_exist else float("nan"),
                "xi_probs": probs,
                "xi_quantiles": quantiles,
                "normal_quantiles": [normal_quantile(q) for q in probs],
            }
        )
    gamma_stats = []
    for t in range(design.p):
        err = np.array([r["gamma"]["err"][t] for r in existing])
        err_bc = np.array([r["gamma"]["err_bc"][t] for r in existing])
        covered = [r["gamma"]["covered"][t] for r in existing]
        covered_bc = [r["gamma"]["covered_bc"][t] for r in existing]
        lengths = [r["gamma"]["length"][t] for r in existing]
        def m(fn, arr):
            return float(fn(arr)) if n_exist else float("nan")
        gamma_stats.append(
            {
                "component": t,
                "coverage_pct": 100.0 * np.mean(covered) if n_exist else float("nan"),
                "coverage_bc_pct": 100.0 * np.mean(covered_bc) if n_exist else float("nan"),
                "mean_bias": m(np.mean, err),
                "median_bias": m(np.median, err),
                "mean_bias_bc": m(np.mean, err_bc),
                "median_bias_bc": m(np.median, err_bc),
                "mean_length": m(np.mean, np.asarray(lengths)),
            }
        )
    return SimTable(
        design=design,
        replications=total,
        exist_count=n_exist,
        nonexistence_pct=100.0 * (total - n_exist) / total,
        nonexistence_reasons=reasons,
        pair_stats=pair_stats,
        gamma_stats=gamma_stats,
    )


def run_design(design: SimDesign, threads: int = 1) -> SimTable:
    """Execute all replications of a design and aggregate.

    ``threads`` sets the worker-process count and has no effect on the
    result; per-replication seeds are derived from the design seed alone and
    records are merged in replication order.
    """
    covariates = None if design.redraw_covariates else _fixed_covariates(design)
    work = partial(_replicate, design, covariates)
    reps = range(design.replications)
    if threads and threads > 1:
        chunk = max(1, design.replications // (8 * threads))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, reps, chunksize=chunk))
    else:
        records = [work(rep) for rep in reps]
    return _aggregate(design, records)
