"""Noisy release of network sufficient statistics under (k, epsilon)-edge
differential privacy.

Two independent channels, each run at half the total budget: the degree
sequence gets integer discrete-Laplace noise with weight
``lambda1 = exp(-epsilon / (4k))`` (global sensitivity 2k for degrees), and
the covariate total gets continuous Laplace noise with scale
``lambda2 = 2 p k z* / epsilon`` (sensitivity p k z*).  Released degrees are
deliberately left as-is: no clipping, rounding or denoising, because the
downstream moment equations rely on the noise having mean zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import SufficientStats

__all__ = [
    "PrivacyBudget",
    "ReleasedStats",
    "sensitivity_degree",
    "sensitivity_covariate",
    "sample_discrete_laplace",
    "sample_laplace",
    "release",
]


@dataclass(frozen=True)
class PrivacyBudget:
    """Total privacy parameter ``epsilon`` and edge-neighborhood size ``k``."""

    epsilon: float
    k: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be finite and positive")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "k", int(self.k))

    def lambda1(self) -> float:
        """Discrete-Laplace weight for the degree channel, in (0, 1)."""
        return float(np.exp(-self.epsilon / (4.0 * self.k)))

    def lambda2(self, p: int, z_star: float) -> float:
        """Continuous Laplace scale for the covariate channel (0 when p = 0)."""
        return 2.0 * p * self.k * z_star / self.epsilon


def sensitivity_degree(budget: PrivacyBudget) -> int:
    """Worst-case L1 change of the degree sequence over k-edge neighbors: 2k."""
    return 2 * budget.k


def sensitivity_covariate(budget: PrivacyBudget, p: int, z_star: float) -> float:
    """Worst-case L1 change of the covariate total: p * k * z*."""
    if p < 0:
        raise ValueError("p must be >= 0")
    if z_star < 0:
        raise ValueError("z_star must be >= 0")
    return p * budget.k * z_star


def sample_discrete_laplace(lam: float, rng: np.random.Generator, size=None):
    """Integer noise with pmf P(X = x) = (1-lam)/(1+lam) * lam^|x|.

    Sampled as the difference of two iid geometric counts with success
    probability 1 - lam, which has exactly this two-sided distribution.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("discrete Laplace weight must lie in (0, 1)")
    g1 = rng.geometric(1.0 - lam, size=size)
    g2 = rng.geometric(1.0 - lam, size=size)
    out = g1 - g2
    return out if size is not None else int(out)


def sample_laplace(scale: float, rng: np.random.Generator, size=None):
    """Continuous Laplace(0, scale) noise with density e^{-|z|/scale}/(2 scale)."""
    if not scale > 0:
        raise ValueError("Laplace scale must be positive")
    out = rng.laplace(0.0, scale, size=size)
    return out if size is not None else float(out)


@dataclass(frozen=True)
class ReleasedStats:
    """Noisy sufficient statistics plus the mechanism parameters that made them."""

    d_tilde: np.ndarray
    y_tilde: np.ndarray
    budget: PrivacyBudget
    lambda1: float
    lambda2: float
    seed: Optional[int] = None

    def __post_init__(self):
        d_tilde = np.asarray(self.d_tilde, dtype=np.int64)
        y_tilde = np.atleast_1d(np.asarray(self.y_tilde, dtype=float))
        if not 0.0 < self.lambda1 < 1.0:
            raise ValueError("lambda1 must lie in (0, 1)")
        if y_tilde.size and self.lambda2 <= 0:
            raise ValueError("lambda2 must be positive when covariates are released")
        object.__setattr__(self, "d_tilde", d_tilde)
        object.__setattr__(self, "y_tilde", y_tilde)

    @property
    def n(self) -> int:
        return self.d_tilde.shape[0]

    @property
    def p(self) -> int:
        return self.y_tilde.shape[0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "d_tilde": self.d_tilde.tolist(),
            "y_tilde": self.y_tilde.tolist(),
            "epsilon": self.budget.epsilon,
            "k": self.budget.k,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ReleasedStats":
        return cls(
            d_tilde=np.asarray(data["d_tilde"], dtype=np.int64),
            y_tilde=np.asarray(data["y_tilde"], dtype=float),
            budget=PrivacyBudget(epsilon=data["epsilon"], k=data["k"]),
            lambda1=data["lambda1"],
            lambda2=data["lambda2"],
            seed=data.get("seed"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ReleasedStats":
        return cls.from_dict(json.loads(text))


def release(
    stats: SufficientStats,
    budget: PrivacyBudget,
    z_star: float,
    p: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    seed: Optional[int] = None,
) -> ReleasedStats:
    """Release (d + xi, y + eta) under the joint Laplace mechanism.

    ``rng`` drives the noise; passing ``seed`` instead (or as well) records it
    as provenance and, when no rng is given, seeds a fresh generator so the
    release is reproducible.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    if p is None:
        p = stats.p
    if p != stats.p:
        raise ValueError(f"stats carry p={stats.p} covariates, requested p={p}")
    lam1 = budget.lambda1()
    d_tilde = stats.d + sample_discrete_laplace(lam1, rng, size=stats.n)
    if p > 0:
        lam2 = budget.lambda2(p, z_star)
        y_tilde = stats.y + sample_laplace(lam2, rng, size=p)
    else:
        lam2 = 0.0
        y_tilde = np.zeros(0)
    return ReleasedStats(
        d_tilde=d_tilde,
        y_tilde=y_tilde,
        budget=budget,
        lambda1=lam1,
        lambda2=lam2,
        seed=seed,
    )
