import numpy as np


def random_density(rng, n_sz):
    a = rng.normal(size=(n_sz, n_sz)) + 1j * rng.normal(size=(n_sz, n_sz))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
