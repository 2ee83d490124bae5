"""Independent reference implementations used only by the tests.

These deliberately avoid the library's code paths: the likelihood maximizer
runs joint Newton on the raw log-likelihood, derivatives are checked by
finite differences, and distribution moments come from direct series
summation over the pmf.
"""

import numpy as np


def logistic(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def full_newton_mle(d, y, Z, n, iters=200, tol=1e-12):
    """Maximize the joint log-likelihood directly: Newton on (beta, gamma).

    Works on raw arrays (degrees, covariate totals, condensed pair
    covariates); independent of the two-stage solver.
    """
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    p = Z.shape[1]
    i, j = np.triu_indices(n, 1)
    beta = np.zeros(n)
    gamma = np.zeros(p)
    for _ in range(iters):
        m = logistic(beta[i] + beta[j] + (Z @ gamma if p else 0.0))
        w = m * (1.0 - m)
        grad_b = d - (
            np.bincount(i, weights=m, minlength=n)
            + np.bincount(j, weights=m, minlength=n)
        )
        V = np.zeros((n, n))
        V[i, j] = w
        V += V.T
        np.fill_diagonal(V, V.sum(axis=1))
        if p:
            grad_g = y - Z.T @ m
            C = np.zeros((n, p))
            for t in range(p):
                wz = w * Z[:, t]
                C[:, t] = np.bincount(i, weights=wz, minlength=n) + np.bincount(
                    j, weights=wz, minlength=n
                )
            D = (Z * w[:, None]).T @ Z
            info = np.block([[V, C], [C.T, D]])
            grad = np.concatenate([grad_b, grad_g])
        else:
            info = V
            grad = grad_b
        step = np.linalg.solve(info, grad)
        beta = beta + step[:n]
        if p:
            gamma = gamma + step[n:]
        if np.abs(step).max() < tol:
            break
    return beta, gamma


def central_difference(f, x, h=1e-6):
    """Dense central-difference Jacobian of f: R^k -> R^m at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fp = np.atleast_1d(np.asarray(f(x + e), dtype=float))
        fm = np.atleast_1d(np.asarray(f(x - e), dtype=float))
        jac[:, k] = (fp - fm) / (2.0 * h)
    return jac


def discrete_laplace_pmf(x, lam):
    x = np.asarray(x)
    return (1.0 - lam) / (1.0 + lam) * lam ** np.abs(x)


def discrete_laplace_var_by_series(lam, tail=1e-16):
    """Variance from direct pmf summation, truncated when terms vanish."""
    total = 0.0
    x = 1
    while True:
        term = 2.0 * discrete_laplace_pmf(x, lam) * x * x
        total += term
        if term < tail and x > 10:
            break
        x += 1
    return total


def laplace_var_by_quadrature(scale):
    """Variance of the continuous Laplace by numerical integration."""
    from scipy.integrate import quad

    density = lambda z: np.exp(-abs(z) / scale) / (2.0 * scale)
    val, _ = quad(lambda z: z * z * density(z), -50 * scale, 50 * scale, limit=200)
    return val


def bias_sum_by_double_loop(beta, gamma, Z, n):
    """Plug-in bias aggregate via explicit per-node loops (no vectorization)."""
    import math

    p = len(gamma)
    pair_of = {}
    idx = 0
    for a in range(n):
        for b in range(a + 1, n):
            pair_of[(a, b)] = idx
            idx += 1

    def mu(x):
        return math.exp(x) / (1.0 + math.exp(x))

    out = [0.0] * p
    for k in range(n):
        num = [0.0] * p
        den = 0.0
        for j in range(n):
            if j == k:
                continue
            a, b = min(k, j), max(k, j)
            z = Z[pair_of[(a, b)]]
            x = beta[k] + beta[j] + sum(z[t] * gamma[t] for t in range(p))
            m = mu(x)
            d1 = m * (1 - m)
            d2 = d1 * (1 - 2 * m)
            den += d1
            for t in range(p):
                num[t] += z[t] * d2
        for t in range(p):
            out[t] += num[t] / den
    N = n * (n - 1) / 2
    return np.array(out) / math.sqrt(N)
