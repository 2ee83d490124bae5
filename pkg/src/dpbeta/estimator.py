"""Moment-equation estimation of the covariate-adjusted beta-model from
(possibly noisy) sufficient statistics.

The estimating equations replace the exact statistics in the maximum
likelihood equations with their released values:

    F_i(beta, gamma) = sum_{j != i} mu(pi_ij) - d_tilde_i        (n equations)
    Q_t(beta, gamma) = sum_{i < j} z_ijt mu(pi_ij) - y_tilde_t   (p equations)

They are solved by alternating an inner fixed-point sweep for beta at fixed
gamma (the classic log-ratio update for degree models) with an outer Newton
step on gamma using the profiled Jacobian

    H = dQ/dgamma - (dQ/dbeta) V^{-1} (dF/dgamma),

where V = dF/dbeta is the Fisher-type matrix of the degree block.  A solution
can legitimately fail to exist (e.g. a noisy degree at or beyond 0 or n-1);
that outcome is reported on the result, never raised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .model import (
    ModelParams,
    SufficientStats,
    mu,
    num_pairs,
    pair_indices,
    pairs_to_square,
)
from .release import ReleasedStats

__all__ = [
    "FitConfig",
    "FitResult",
    "f_residual",
    "q_residual",
    "solve_beta_given_gamma",
    "fisher_v",
    "s_approx_inverse",
    "h_matrix",
    "fit",
]


@dataclass(frozen=True)
class FitConfig:
    """Stopping rules and safeguards for the two-stage solver.

    Tolerances apply to sup-norm parameter increments.  ``beta_divergence_bound``
    declares non-existence when any |beta_i| exceeds it, and ``use_s_approx``
    switches the V-solve inside H to the diagonal 1/v_ii shortcut.
    """

    beta_tol: float = 1e-8
    gamma_tol: float = 1e-8
    max_inner_iters: int = 5000
    max_outer_iters: int = 100
    beta_divergence_bound: float = 30.0
    use_s_approx: bool = False
    # Post-hoc residual validation: converged fits must satisfy
    # ||F||_inf <= residual_slack * beta_tol * n (and the analogue for Q).
    residual_slack: float = 1e3

    def __post_init__(self):
        if self.beta_tol <= 0 or self.gamma_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class FitResult:
    """Outcome of one fit: estimates, curvature matrices and diagnostics.

    ``exists`` is False when the moment equations have no (found) solution;
    ``reason`` then says why.  V is n x n with V_ij = mu'(pi_ij) off the
    diagonal and row sums on it; H is the p x p profiled Jacobian.
    """

    beta_hat: Optional[np.ndarray]
    gamma_hat: Optional[np.ndarray]
    exists: bool
    reason: Optional[str]
    inner_iters: int
    outer_iters: int
    v_matrix: Optional[np.ndarray]
    h_matrix: Optional[np.ndarray]
    residual_f: float
    residual_q: float

    @property
    def params(self) -> ModelParams:
        if not self.exists:
            raise ValueError("estimate does not exist")
        return ModelParams(beta=self.beta_hat, gamma=self.gamma_hat)

    @property
    def v_diag(self) -> np.ndarray:
        if self.v_matrix is None:
            raise ValueError("estimate does not exist")
        return np.diag(self.v_matrix)

    def to_dict(self, include_matrices: bool = False) -> dict:
        out = {
            "beta_hat": None if self.beta_hat is None else self.beta_hat.tolist(),
            "gamma_hat": None if self.gamma_hat is None else self.gamma_hat.tolist(),
            "exists": self.exists,
            "reason": self.reason,
            "inner_iters": self.inner_iters,
            "outer_iters": self.outer_iters,
            "residual_f": self.residual_f,
            "residual_q": self.residual_q,
        }
        if include_matrices:
            out["v_matrix"] = None if self.v_matrix is None else self.v_matrix.tolist()
            out["h_matrix"] = None if self.h_matrix is None else self.h_matrix.tolist()
        return out

    def to_json(self, include_matrices: bool = False) -> str:
        return json.dumps(self.to_dict(include_matrices), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        def arr(x):
            return None if x is None else np.asarray(x, dtype=float)

        return cls(
            beta_hat=arr(data["beta_hat"]),
            gamma_hat=arr(data["gamma_hat"]),
            exists=data["exists"],
            reason=data.get("reason"),
            inner_iters=data["inner_iters"],
            outer_iters=data["outer_iters"],
            v_matrix=arr(data.get("v_matrix")),
            h_matrix=arr(data.get("h_matrix")),
            residual_f=data["residual_f"],
            residual_q=data["residual_q"],
        )

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        return cls.from_dict(json.loads(text))


def _targets(released: Union[ReleasedStats, SufficientStats]):
    """Extract (d_target, y_target) from released or exact statistics."""
    if isinstance(released, ReleasedStats):
        return released.d_tilde.astype(float), released.y_tilde.astype(float)
    if isinstance(released, SufficientStats):
        return released.d.astype(float), released.y.astype(float)
    raise TypeError(f"expected ReleasedStats or SufficientStats, got {type(released)!r}")


def _mu_square(beta: np.ndarray, gz_square: np.ndarray) -> np.ndarray:
    """mu(pi_ij) as a symmetric matrix with zeroed diagonal."""
    m = mu(beta[:, None] + beta[None, :] + gz_square)
    np.fill_diagonal(m, 0.0)
    return m


def _gz_square(covariates: np.ndarray, gamma: np.ndarray, n: int) -> np.ndarray:
    if gamma.size:
        return pairs_to_square(n, covariates @ gamma)
    return np.zeros((n, n))


def f_residual(
    params: ModelParams,
    covariates: np.ndarray,
    released: Union[ReleasedStats, SufficientStats],
) -> np.ndarray:
    """F_i = sum_{j != i} mu(pi_ij) - d_tilde_i."""
    d_t, _ = _targets(released)
    n = params.n
    if d_t.shape[0] != n:
        raise ValueError("degree target length does not match parameters")
    if covariates.shape[0] != num_pairs(n):
        raise ValueError("covariate rows do not match the number of pairs")
    m = _mu_square(params.beta, _gz_square(covariates, params.gamma, n))
    return m.sum(axis=1) - d_t


def q_residual(
    params: ModelParams,
    covariates: np.ndarray,
    released: Union[ReleasedStats, SufficientStats],
) -> np.ndarray:
    """Q_t = sum_{i<j} z_ijt mu(pi_ij) - y_tilde_t (empty when p = 0)."""
    _, y_t = _targets(released)
    if params.p == 0:
        return np.zeros(0)
    if y_t.shape[0] != params.p:
        raise ValueError("covariate target length does not match parameters")
    i, j = pair_indices(params.n)
    pi_pairs = params.beta[i] + params.beta[j] + covariates @ params.gamma
    return covariates.T @ mu(pi_pairs) - y_t


class _NonExistence(Exception):
    def __init__(self, reason: str, iters: int = 0):
        super().__init__(reason)
        self.reason = reason
        self.iters = iters


def _beta_fixed_point(gamma, covariates, d_target, config, warm_start, n):
    """Inner solver; raises _NonExistence instead of returning a flag."""
    d = np.asarray(d_target, dtype=float)
    if np.any(d <= 0) or np.any(d >= n - 1):
        raise _NonExistence("degree target outside (0, n-1)")
    gz = _gz_square(covariates, np.atleast_1d(np.asarray(gamma, float)), n)
    beta = np.zeros(n) if warm_start is None else np.array(warm_start, dtype=float)
    log_d = np.log(d)
    for it in range(1, config.max_inner_iters + 1):
        m = _mu_square(beta, gz)
        beta_new = beta + log_d - np.log(m.sum(axis=1))
        step = np.abs(beta_new - beta).max()
        beta = beta_new
        if not np.all(np.isfinite(beta)) or np.abs(beta).max() > config.beta_divergence_bound:
            raise _NonExistence("beta iterates diverged", it)
        if step < config.beta_tol:
            return beta, it
    raise _NonExistence("inner iteration limit reached", config.max_inner_iters)


def solve_beta_given_gamma(
    gamma,
    covariates: np.ndarray,
    d_target,
    config: FitConfig = FitConfig(),
    warm_start: Optional[np.ndarray] = None,
):
    """Solve the degree block F(beta, gamma) = 0 at fixed gamma.

    Returns (beta, iterations); raises ValueError when no solution exists
    (nonpositive target degree, divergence, or iteration cap).  Callers that
    must not raise should go through :func:`fit`.
    """
    n = np.asarray(d_target).shape[0]
    try:
        return _beta_fixed_point(gamma, covariates, d_target, config, warm_start, n)
    except _NonExistence as exc:
        raise ValueError(f"beta estimate does not exist: {exc.reason}") from None


def fisher_v(params: ModelParams, covariates: np.ndarray) -> np.ndarray:
    """dF/dbeta: off-diagonal mu'(pi_ij), diagonal row sums (diagonally balanced)."""
    n = params.n
    m = _mu_square(params.beta, _gz_square(covariates, params.gamma, n))
    v = m * (1.0 - m)
    np.fill_diagonal(v, 0.0)
    np.fill_diagonal(v, v.sum(axis=1))
    return v


def s_approx_inverse(v: np.ndarray) -> np.ndarray:
    """Diagonal surrogate diag(1/v_11, ..., 1/v_nn) for V^{-1}."""
    diag = np.diag(v)
    if np.any(diag <= 0):
        raise ValueError("V diagonal must be positive")
    return np.diag(1.0 / diag)


def _dq_dbeta(params: ModelParams, covariates: np.ndarray) -> np.ndarray:
    """(p, n) block with column k = sum_{j != k} z_kj mu'(pi_kj).

    Equals dF/dgamma transposed; both come from the same pair sums.
    """
    n, p = params.n, params.p
    i, j = pair_indices(n)
    pi_pairs = params.beta[i] + params.beta[j] + covariates @ params.gamma
    m = mu(pi_pairs)
    w = m * (1.0 - m)
    out = np.empty((p, n))
    for t in range(p):
        wz = w * covariates[:, t]
        out[t] = np.bincount(i, weights=wz, minlength=n) + np.bincount(
            j, weights=wz, minlength=n
        )
    return out


def h_matrix(
    params: ModelParams,
    covariates: np.ndarray,
    use_s_approx: bool = False,
    v: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Profiled Jacobian H = dQ/dgamma - (dQ/dbeta) V^{-1} (dF/dgamma).

    The V-solve uses a dense Cholesky factorization by default, or the
    diagonal approximation when ``use_s_approx`` is set.  Returns a (0, 0)
    matrix when p = 0.
    """
    n, p = params.n, params.p
    if p == 0:
        return np.zeros((0, 0))
    i, j = pair_indices(n)
    pi_pairs = params.beta[i] + params.beta[j] + covariates @ params.gamma
    m = mu(pi_pairs)
    w = m * (1.0 - m)
    dq_dgamma = (covariates * w[:, None]).T @ covariates
    dq_dbeta = _dq_dbeta(params, covariates)
    if v is None:
        v = fisher_v(params, covariates)
    if use_s_approx:
        x = dq_dbeta.T / np.diag(v)[:, None]
    else:
        try:
            factor = scipy.linalg.cho_factor(v)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"V is singular: {exc}") from None
        x = scipy.linalg.cho_solve(factor, dq_dbeta.T)
    return dq_dgamma - dq_dbeta @ x


def _nonexistent(reason: str, inner: int, outer: int) -> FitResult:
    return FitResult(
        beta_hat=None,
        gamma_hat=None,
        exists=False,
        reason=reason,
        inner_iters=inner,
        outer_iters=outer,
        v_matrix=None,
        h_matrix=None,
        residual_f=float("nan"),
        residual_q=float("nan"),
    )


def fit(
    released: Union[ReleasedStats, SufficientStats],
    covariates: np.ndarray,
    config: FitConfig = FitConfig(),
) -> FitResult:
    """Solve the moment equations by the alternating two-stage scheme.

    Inner: fixed-point sweeps for beta at the current gamma (warm-started).
    Outer: Newton on gamma, gamma <- gamma - H^{-1} Q.  Non-existence is
    recorded on the result, not raised.
    """
    d_t, y_t = _targets(released)
    n = d_t.shape[0]
    if n < 3:
        raise ValueError("estimation requires n >= 3 nodes")
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim != 2 or covariates.shape[0] != num_pairs(n):
        raise ValueError(f"covariates must be ({num_pairs(n)}, p)")
    p = covariates.shape[1]
    if y_t.shape[0] != p:
        raise ValueError("covariate target length does not match covariate dimension")

    gamma = np.zeros(p)
    beta = None
    total_inner = 0
    outer = 0
    try:
        beta, it = _beta_fixed_point(gamma, covariates, d_t, config, beta, n)
        total_inner += it
        if p:
            for outer in range(1, config.max_outer_iters + 1):
                params = ModelParams(beta=beta, gamma=gamma)
                q = q_residual(params, covariates, released)
                h = h_matrix(params, covariates, use_s_approx=config.use_s_approx)
                try:
                    step = np.linalg.solve(h, q)
                except np.linalg.LinAlgError:
                    return _nonexistent("singular profiled Jacobian", total_inner, outer)
                gamma = gamma - step
                if not np.all(np.isfinite(gamma)):
                    return _nonexistent("gamma iterates diverged", total_inner, outer)
                beta, it = _beta_fixed_point(gamma, covariates, d_t, config, beta, n)
                total_inner += it
                if np.abs(step).max() < config.gamma_tol:
                    break
            else:
                return _nonexistent(
                    "outer iteration limit reached", total_inner, config.max_outer_iters
                )
    except _NonExistence as exc:
        return _nonexistent(exc.reason, total_inner + exc.iters, outer)

    params = ModelParams(beta=beta, gamma=gamma)
    res_f = float(np.abs(f_residual(params, covariates, released)).max())
    res_q = float(np.abs(q_residual(params, covariates, released)).max()) if p else 0.0
    if res_f > config.residual_slack * config.beta_tol * n or (
        p and res_q > config.residual_slack * config.gamma_tol * num_pairs(n)
    ):
        return _nonexistent("residuals failed validation", total_inner, outer)
    v = fisher_v(params, covariates)
    h = h_matrix(params, covariates, use_s_approx=config.use_s_approx, v=v)
    return FitResult(
        beta_hat=beta,
        gamma_hat=gamma,
        exists=True,
        reason=None,
        inner_iters=total_inner,
        outer_iters=outer,
        v_matrix=v,
        h_matrix=h,
        residual_f=res_f,
        residual_q=res_q,
    )
