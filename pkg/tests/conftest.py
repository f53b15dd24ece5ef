import numpy as np
import pytest


def wishart(rng, n, m=None):
    """Random PSD matrix with a generic (distinct) spectrum."""
    m = m or n + 5
    G = rng.standard_normal((n, m))
    return G @ G.T / m


def orthonormal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def psd_with_spectrum(rng, lam):
    Q = orthonormal(rng, len(lam))
    C = (Q * np.asarray(lam, float)) @ Q.T
    return 0.5 * (C + C.T), Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
