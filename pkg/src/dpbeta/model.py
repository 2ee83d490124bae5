"""Covariate-adjusted beta-model: edge probabilities, sufficient statistics,
log-likelihood and graph sampling.

A graph on n nodes is stored in condensed form: every unordered pair
{i, j}, i < j, maps to one slot of a length N = n(n-1)/2 vector, ordered
as numpy's ``triu_indices(n, 1)``.  Each pair also carries a fixed-length
real covariate vector, so covariates live in an (N, p) array.  Edge (i, j)
is present independently with probability ``mu(beta_i + beta_j + z_ij @ gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Network",
    "ModelParams",
    "SufficientStats",
    "num_pairs",
    "pair_indices",
    "pairs_to_square",
    "mu",
    "mu_derivs",
    "pi",
    "pi_square",
    "sufficient_stats",
    "log_likelihood",
    "sample_network",
]


def num_pairs(n: int) -> int:
    """Number of unordered node pairs."""
    return n * (n - 1) // 2


def pair_indices(n: int):
    """Row/column node indices (i_k, j_k), i_k < j_k, for every condensed slot."""
    return np.triu_indices(n, 1)


def pairs_to_square(n: int, values: np.ndarray) -> np.ndarray:
    """Expand a condensed pair vector to a symmetric n x n matrix (zero diagonal)."""
    values = np.asarray(values)
    out = np.zeros((n, n), dtype=values.dtype)
    i, j = pair_indices(n)
    out[i, j] = values
    out[j, i] = values
    return out


@dataclass(frozen=True)
class Network:
    """Undirected simple graph plus per-pair covariates.

    adjacency : bool array of length n(n-1)/2, condensed pair order
    covariates : float array of shape (n(n-1)/2, p); p may be 0
    """

    n: int
    adjacency: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 nodes")
        adjacency = np.asarray(self.adjacency, dtype=bool)
        if adjacency.shape != (num_pairs(self.n),):
            raise ValueError(
                f"adjacency must have length {num_pairs(self.n)}, got {adjacency.shape}"
            )
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim != 2 or covariates.shape[0] != num_pairs(self.n):
            raise ValueError(
                f"covariates must be ({num_pairs(self.n)}, p), got {covariates.shape}"
            )
        if covariates.size and not np.all(np.isfinite(covariates)):
            raise ValueError("covariates must be finite")
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "covariates", covariates)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def z_star(self) -> float:
        """Largest absolute covariate entry (0 when p = 0); cached."""
        cached = self.__dict__.get("_z_star")
        if cached is None:
            cached = float(np.abs(self.covariates).max()) if self.covariates.size else 0.0
            object.__setattr__(self, "_z_star", cached)
        return cached

    def adjacency_square(self) -> np.ndarray:
        return pairs_to_square(self.n, self.adjacency)

    def edge_count(self) -> int:
        return int(self.adjacency.sum())


@dataclass(frozen=True)
class ModelParams:
    """Node effects ``beta`` (length n) and homophily coefficients ``gamma`` (length p)."""

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    @property
    def p(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class SufficientStats:
    """Degree sequence ``d`` and covariate-weighted edge total ``y``."""

    d: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.int64)
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if d.min(initial=0) < 0 or (d.size and d.max() > d.size - 1):
            raise ValueError("degrees must lie in [0, n-1]")
        if int(d.sum()) % 2 != 0:
            raise ValueError("degree sum must be even")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[0]


def mu(x):
    """Logistic function e^x / (1 + e^x), overflow-safe for any finite x."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def mu_derivs(x):
    """First three derivatives of ``mu``.

    Evaluated via m = mu(x):  mu' = m(1-m),  mu'' = mu'(1-2m),
    mu''' = mu'(1-6mu').  All three are bounded by 1/4 in absolute value.
    """
    m = np.asarray(mu(x))
    d1 = m * (1.0 - m)
    d2 = d1 * (1.0 - 2.0 * m)
    d3 = d1 * (1.0 - 6.0 * d1)
    if d1.ndim:
        return d1, d2, d3
    return float(d1), float(d2), float(d3)


def _check_pair(n: int, i: int, j: int):
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node index out of range for n={n}: ({i}, {j})")
    if i == j:
        raise IndexError("pair must consist of two distinct nodes")


def pi(params: ModelParams, net: Network, i: int, j: int) -> float:
    """Linear predictor beta_i + beta_j + z_ij @ gamma for one pair."""
    _check_pair(params.n, i, j)
    a, b = (i, j) if i < j else (j, i)
    n = params.n
    slot = n * a - a * (a + 1) // 2 + (b - a - 1)
    zg = float(net.covariates[slot] @ params.gamma) if params.p else 0.0
    return float(params.beta[i] + params.beta[j] + zg)


def pi_square(params: ModelParams, covariates: np.ndarray, n: int) -> np.ndarray:
    """All linear predictors as a symmetric n x n matrix (diagonal meaningless)."""
    beta = params.beta
    gz = covariates @ params.gamma if params.p else np.zeros(num_pairs(n))
    return beta[:, None] + beta[None, :] + pairs_to_square(n, gz)


def sufficient_stats(net: Network) -> SufficientStats:
    """Degrees d_i = sum_j a_ij and covariate total y = sum_{i<j} a_ij z_ij."""
    i, j = pair_indices(net.n)
    on = net.adjacency
    d = np.bincount(i[on], minlength=net.n) + np.bincount(j[on], minlength=net.n)
    y = net.covariates[on].sum(axis=0) if net.p else np.zeros(0)
    return SufficientStats(d=d, y=y)


def log_likelihood(params: ModelParams, net: Network) -> float:
    """Log-likelihood sum_i beta_i d_i + gamma @ y - sum_{i<j} log(1 + e^pi_ij)."""
    if params.n != net.n or params.p != net.p:
        raise ValueError("parameter dimensions do not match network")
    stats = sufficient_stats(net)
    i, j = pair_indices(net.n)
    pi_pairs = params.beta[i] + params.beta[j]
    if params.p:
        pi_pairs = pi_pairs + net.covariates @ params.gamma
    penalty = np.logaddexp(0.0, pi_pairs).sum()
    linear = float(params.beta @ stats.d)
    if params.p:
        linear += float(params.gamma @ stats.y)
    return linear - float(penalty)


def sample_network(
    params: ModelParams, covariates: np.ndarray, rng: np.random.Generator
) -> Network:
    """Draw a graph with independent edges, P(a_ij = 1) = mu(pi_ij)."""
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim != 2:
        raise ValueError("covariates must be a 2-d (num pairs, p) array")
    n = params.n
    if covariates.shape[0] != num_pairs(n):
        raise ValueError("covariate rows must match the number of pairs")
    i, j = pair_indices(n)
    pi_pairs = params.beta[i] + params.beta[j]
    if params.p:
        pi_pairs = pi_pairs + covariates @ params.gamma
    edges = rng.random(num_pairs(n)) < mu(pi_pairs)
    return Network(n=n, adjacency=edges, covariates=covariates)
