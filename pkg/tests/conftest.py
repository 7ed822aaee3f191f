import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel_kraus(rng, dout, din, n=2):
    """Kraus operators of a random CPTP map from a random isometry."""
    v = random_unitary(rng, dout * n)[:, :din] if dout * n >= din else None
    assert v is not None
    return [v[k * dout:(k + 1) * dout, :] for k in range(n)]
