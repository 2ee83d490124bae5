import numpy as np
import pytest

from dpbeta.model import ModelParams, num_pairs, pair_indices, sample_network, sufficient_stats


def random_instance(rng, n, p=2, beta_scale=0.3, gamma=None):
    """A random solvable instance: network, covariates, and true parameters.

    Resamples until every degree is strictly inside (0, n-1) so the noiseless
    estimate exists.
    """
    gamma = np.array([0.5, -0.5])[:p] if gamma is None else np.asarray(gamma, float)
    i, j = pair_indices(n)
    while True:
        beta = rng.normal(0.0, beta_scale, n)
        cols = [np.where(rng.random(n) < 0.5, 1.0, -1.0) for _ in range(p)]
        Z = (
            np.column_stack([c[i] * c[j] for c in cols])
            if p
            else np.zeros((num_pairs(n), 0))
        )
        params = ModelParams(beta=beta, gamma=gamma)
        net = sample_network(params, Z, rng)
        d = sufficient_stats(net).d
        if d.min() >= 1 and d.max() <= n - 2:
            return net, params


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
