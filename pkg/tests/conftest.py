import numpy as np
import pytest


def lowrank(rng, m, n, r):
    """Random ``m x n`` matrix of rank ``r`` (``r = 0`` gives zeros)."""
    if r == 0:
        return np.zeros((m, n))
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, n))


def consistent(rng, a):
    return a @ rng.standard_normal(a.shape[1])


def rel(x, y):
    return np.linalg.norm(x - y) / max(np.linalg.norm(y), 1e-300)


EPS = np.finfo(float).eps


def draw_nonnull(space, g, f, x):
    """Next row whose residual exceeds the solver's null threshold (resampling contract)."""
    tol = EPS * (1 + np.linalg.norm(f.b_ir) + np.linalg.norm(f.a_ir) * np.linalg.norm(x))
    while True:
        i = space.draw(g).indices[0]
        if abs(f.a_ir[i] @ x - f.b_ir[i]) > tol:
            return i


class Recorder:
    """Collects iterates and step records through the ``run`` callback."""

    def __init__(self, f):
        self.xs = [f.x0.copy()]
        self.infos = []
        self.windows = []

    def __call__(self, state, info):
        self.xs.append(state.x.copy())
        self.infos.append(info)
        if state.window is not None:
            self.windows.append(list(state.window))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
