import numpy as np
import pytest

from coevo.game import GameParams, SystemState
from coevo.netgraph import LayerMatrix, TwoLayerNetwork, metropolis_weights, random_connected_adjacency

ACCEPTANCE_LINES = []


def record_acceptance(name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def pair_net():
    """Two agents, every weight 1/2 on both layers."""
    return TwoLayerNetwork.coincident(LayerMatrix(np.full((2, 2), 0.5)))


@pytest.fixture
def pair_params():
    return GameParams.uniform(2, lam=0.5, beta=0.5, gamma=0.2)


@pytest.fixture
def pair_state():
    return SystemState([1, 1], [0.5, 0.5])


def random_row_stochastic(rng, n, density=0.5):
    w = rng.random((n, n)) * (rng.random((n, n)) < density)
    empty = w.sum(axis=1) == 0
    w[empty, rng.integers(0, n, size=empty.sum())] = 1.0
    return w / w.sum(axis=1, keepdims=True)


def random_general_instance(rng, n=None, n_max=20):
    """Directed layers with arbitrary per-agent parameters."""
    n = n or int(rng.integers(2, n_max + 1))
    net = TwoLayerNetwork(LayerMatrix(random_row_stochastic(rng, n)), LayerMatrix(random_row_stochastic(rng, n)))
    params = GameParams(
        lam=rng.random(n),
        beta=rng.random(n),
        gamma=rng.random(n),
        prejudice=rng.uniform(-1, 1, n),
        alpha=float(rng.uniform(0, 2)),
    )
    state = SystemState(rng.choice([-1, 1], n), rng.uniform(-1, 1, n))
    return net, params, state


def random_symmetric_instance(rng, n=None, n_max=15, lam_range=(0.05, 0.95), gamma_range=(0.0, 0.95)):
    """Metropolis layers and homogeneous parameters satisfying the potential-game assumptions."""
    n = n or int(rng.integers(2, n_max + 1))
    A = metropolis_weights(random_connected_adjacency(n, float(rng.uniform(0.1, 0.7)), rng))
    W = metropolis_weights(random_connected_adjacency(n, float(rng.uniform(0.1, 0.7)), rng))
    params = GameParams.uniform(
        n,
        lam=float(rng.uniform(*lam_range)),
        beta=float(rng.uniform(0.05, 0.95)),
        gamma=float(rng.uniform(*gamma_range)),
        alpha=float(rng.uniform(0, 1.5)),
        prejudice=rng.uniform(-1, 1, n),
    )
    state = SystemState(rng.choice([-1, 1], n), rng.uniform(-1, 1, n))
    return TwoLayerNetwork(A, W), params, state


def two_community_metropolis(rng, m1, m2, cross, inner_p=0.5):
    """Symmetric layer: two connected blocks joined by ``cross`` undirected edges."""
    n = m1 + m2
    adj = np.zeros((n, n), dtype=int)
    adj[:m1, :m1] = random_connected_adjacency(m1, inner_p, rng)
    adj[m1:, m1:] = random_connected_adjacency(m2, inner_p, rng)
    picks = rng.choice(m1 * m2, size=min(cross, m1 * m2), replace=False)
    for k in picks:
        i, j = divmod(int(k), m2)
        adj[i, m1 + j] = adj[m1 + j, i] = 1
    return metropolis_weights(adj)
