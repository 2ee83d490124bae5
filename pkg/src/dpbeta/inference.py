"""Asymptotic inference for fitted models: per-node variances, confidence
intervals for degree-parameter contrasts and homophily coefficients, and the
analytic incidental-parameter bias correction for gamma.

Variance conventions
--------------------
* beta contrasts: Var(beta_i - beta_j) is estimated by 1/v_ii + 1/v_jj with
  v_ii the diagonal of the degree-block Fisher matrix at the fit.
* gamma: the default covariance is the inverse profiled information H^-1
  (``variance="profile"``).  The alternative ``variance="plugin_h"`` uses
  H / N^2, the literal normal-limit variance read off the un-inverted
  per-pair matrix; it is exposed for comparison only and is far too narrow
  in practice.

Bias correction
---------------
gamma_hat carries an incidental-parameter bias estimated by
``-(1/(2 sqrt(N))) Hbar^{-1} B_hat`` with Hbar = H/N, so the correction adds
``(sqrt(N)/2) H^{-1} B_hat``.  The per-node aggregate B_hat is
:func:`bias_b` evaluated at the fitted parameters.  The half factor comes
from the quadratic term of the estimator expansion and was validated by
simulation: the measured bias at the reference designs matches
``-(1/(2 sqrt(N))) Hbar^{-1} B`` closely, and correcting by it restores
near-nominal coverage, while a double-size correction merely flips the
bias sign.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .estimator import FitResult
from .model import ModelParams, mu_derivs, num_pairs, pair_indices

__all__ = [
    "InferenceReport",
    "normal_quantile",
    "beta_contrast_se",
    "xi_statistic",
    "beta_contrast_ci",
    "gamma_cov",
    "gamma_se",
    "gamma_ci",
    "bias_b",
    "bias_correct",
    "build_report",
]


def normal_quantile(q: float) -> float:
    """Standard normal quantile (inverse cdf)."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    return float(ndtri(q))


def _z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    return normal_quantile(0.5 * (1.0 + level))


def _require_exists(fit: FitResult):
    if not fit.exists:
        raise ValueError("inference requires an existing fit")


def beta_contrast_se(fit: FitResult, i: int, j: int) -> float:
    """Standard error (1/v_ii + 1/v_jj)^{1/2} of beta_i - beta_j."""
    _require_exists(fit)
    if i == j:
        raise ValueError("contrast needs two distinct nodes")
    v = fit.v_diag
    if not (0 <= i < v.size and 0 <= j < v.size):
        raise IndexError("node index out of range")
    return float(np.sqrt(1.0 / v[i] + 1.0 / v[j]))


def xi_statistic(fit: FitResult, i: int, j: int, true_contrast: float) -> float:
    """Standardized pivot for beta_i - beta_j; approximately standard normal."""
    est = float(fit.beta_hat[i] - fit.beta_hat[j])
    return (est - true_contrast) / beta_contrast_se(fit, i, j)


def beta_contrast_ci(fit: FitResult, i: int, j: int, level: float = 0.95):
    """Two-sided confidence interval for beta_i - beta_j."""
    se = beta_contrast_se(fit, i, j)
    z = _z_value(level)
    est = float(fit.beta_hat[i] - fit.beta_hat[j])
    return est - z * se, est + z * se


def gamma_cov(fit: FitResult, variance: str = "profile") -> np.ndarray:
    """Estimated covariance of gamma_hat (p x p)."""
    _require_exists(fit)
    h = fit.h_matrix
    p = h.shape[0]
    if p == 0:
        return np.zeros((0, 0))
    if variance == "profile":
        return np.linalg.inv(h)
    if variance == "plugin_h":
        n = fit.beta_hat.shape[0]
        return h / float(num_pairs(n)) ** 2
    raise ValueError(f"unknown variance convention {variance!r}")


def gamma_se(fit: FitResult, variance: str = "profile") -> np.ndarray:
    return np.sqrt(np.diag(gamma_cov(fit, variance)))


def gamma_ci(
    fit: FitResult,
    level: float = 0.95,
    bias_correct_flag: bool = False,
    covariates: Optional[np.ndarray] = None,
    variance: str = "profile",
) -> np.ndarray:
    """Per-component intervals for gamma, shape (p, 2).

    With ``bias_correct_flag`` the intervals are centered at the
    bias-corrected estimate, which needs the pair covariates.
    """
    _require_exists(fit)
    p = fit.gamma_hat.shape[0]
    if p == 0:
        return np.zeros((0, 2))
    center = bias_correct(fit, covariates) if bias_correct_flag else fit.gamma_hat
    se = gamma_se(fit, variance)
    z = _z_value(level)
    return np.column_stack([center - z * se, center + z * se])


def bias_b(params: ModelParams, covariates: np.ndarray) -> np.ndarray:
    """Per-node bias aggregate.

    B_t = N^{-1/2} sum_k [sum_{j != k} z_kjt mu''(pi_kj)] / [sum_{j != k} mu'(pi_kj)]
    with N = n(n-1)/2.
    """
    n, p = params.n, params.p
    if p == 0:
        return np.zeros(0)
    covariates = np.asarray(covariates, dtype=float)
    i, j = pair_indices(n)
    pi_pairs = params.beta[i] + params.beta[j] + covariates @ params.gamma
    d1, d2, _ = mu_derivs(pi_pairs)
    den = np.bincount(i, weights=d1, minlength=n) + np.bincount(j, weights=d1, minlength=n)
    out = np.empty(p)
    for t in range(p):
        wz = d2 * covariates[:, t]
        num = np.bincount(i, weights=wz, minlength=n) + np.bincount(
            j, weights=wz, minlength=n
        )
        out[t] = float((num / den).sum())
    return out / np.sqrt(num_pairs(n))


def bias_correct(fit: FitResult, covariates: np.ndarray) -> np.ndarray:
    """Bias-corrected gamma estimate.

    Adds (sqrt(N)/2) H^{-1} B_hat, i.e. subtracts the estimated bias
    -(1/(2 sqrt(N))) (H/N)^{-1} B_hat of gamma_hat, with B_hat evaluated at
    the fitted parameters.
    """
    _require_exists(fit)
    p = fit.gamma_hat.shape[0]
    if p == 0:
        return fit.gamma_hat.copy()
    b_hat = bias_b(fit.params, covariates)
    n = fit.beta_hat.shape[0]
    return fit.gamma_hat + 0.5 * np.sqrt(num_pairs(n)) * np.linalg.solve(
        fit.h_matrix, b_hat
    )


@dataclass
class InferenceReport:
    """Flat inference summary for one fit.

    ``intervals`` rows are dicts with keys kind ("gamma" or "beta_contrast"),
    target (component index or [i, j] pair), estimate, se, lower, upper,
    level, bias_corrected.
    """

    v_diag: np.ndarray
    gamma_cov: np.ndarray
    b_hat: np.ndarray
    gamma_bc: np.ndarray
    intervals: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "v_diag": self.v_diag.tolist(),
            "gamma_cov": self.gamma_cov.tolist(),
            "b_hat": self.b_hat.tolist(),
            "gamma_bc": self.gamma_bc.tolist(),
            "intervals": self.intervals,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "InferenceReport":
        return cls(
            v_diag=np.asarray(data["v_diag"], dtype=float),
            gamma_cov=np.asarray(data["gamma_cov"], dtype=float),
            b_hat=np.asarray(data["b_hat"], dtype=float),
            gamma_bc=np.asarray(data["gamma_bc"], dtype=float),
            intervals=list(data["intervals"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "InferenceReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["kind", "target", "estimate", "se", "lower", "upper", "level", "bias_corrected"]
        )
        for row in self.intervals:
            target = row["target"]
            if isinstance(target, (list, tuple)):
                target = "-".join(str(t) for t in target)
            writer.writerow(
                [
                    row["kind"],
                    target,
                    repr(row["estimate"]),
                    repr(row["se"]),
                    repr(row["lower"]),
                    repr(row["upper"]),
                    repr(row["level"]),
                    row["bias_corrected"],
                ]
            )
        return buf.getvalue()


def build_report(
    fit: FitResult,
    covariates: np.ndarray,
    level: float = 0.95,
    pairs: Sequence = (),
    bias_correct_flag: bool = True,
    variance: str = "profile",
) -> InferenceReport:
    """Assemble intervals for all gamma components and requested beta contrasts."""
    _require_exists(fit)
    covariates = np.asarray(covariates, dtype=float)
    p = fit.gamma_hat.shape[0]
    cov = gamma_cov(fit, variance)
    b_hat = bias_b(fit.params, covariates) if p else np.zeros(0)
    gamma_bc = bias_correct(fit, covariates) if p else np.zeros(0)
    z = _z_value(level)
    intervals = []
    se = np.sqrt(np.diag(cov)) if p else np.zeros(0)
    centers = gamma_bc if bias_correct_flag else fit.gamma_hat
    for t in range(p):
        intervals.append(
            {
                "kind": "gamma",
                "target": t,
                "estimate": float(centers[t]),
                "se": float(se[t]),
                "lower": float(centers[t] - z * se[t]),
                "upper": float(centers[t] + z * se[t]),
                "level": level,
                "bias_corrected": bool(bias_correct_flag),
            }
        )
    for i, j in pairs:
        est = float(fit.beta_hat[i] - fit.beta_hat[j])
        se_ij = beta_contrast_se(fit, i, j)
        intervals.append(
            {
                "kind": "beta_contrast",
                "target": [int(i), int(j)],
                "estimate": est,
                "se": se_ij,
                "lower": est - z * se_ij,
                "upper": est + z * se_ij,
                "level": level,
                "bias_corrected": False,
            }
        )
    return InferenceReport(
        v_diag=fit.v_diag.copy(),
        gamma_cov=cov,
        b_hat=b_hat,
        gamma_bc=gamma_bc,
        intervals=intervals,
    )
