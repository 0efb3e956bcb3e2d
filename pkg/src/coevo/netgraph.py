"""Two-layer network construction, validation and random generation.

Node indices are 0-based throughout the Python API. The CSV layer formats in
:mod:`coevo.layerio` use 1-based labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    DisconnectedGraph,
    EmptyPartitionSide,
    InvalidProbability,
    TooManyInterLinks,
)

STOCHASTIC_TOL = 1e-9
SYMMETRY_TOL = 1e-12


def _as_square(weights) -> np.ndarray:
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
        raise DimensionMismatch(f"layer must be a non-empty square matrix, got shape {w.shape}")
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class LayerMatrix:
    """Dense nonnegative weight matrix of one network layer.

    The array is copied and frozen on construction. Flags are derived from the
    weights with the package tolerances (row sums 1e-9, symmetry 1e-12).
    """

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_square(self.weights))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def row_residuals(self) -> np.ndarray:
        return np.abs(self.weights.sum(axis=1) - 1.0)

    @cached_property
    def stochastic(self) -> bool:
        return bool(np.all(self.weights >= 0) and np.all(self.row_residuals <= STOCHASTIC_TOL))

    @cached_property
    def symmetric(self) -> bool:
        return bool(np.all(np.abs(self.weights - self.weights.T) <= SYMMETRY_TOL))

    @cached_property
    def self_loops(self) -> bool:
        return bool(np.all(np.diag(self.weights) > 0))

    @cached_property
    def strongly_connected(self) -> bool:
        return is_strongly_connected(self)

    def __eq__(self, other):
        if not isinstance(other, LayerMatrix):
            return NotImplemented
        return self.weights.shape == other.weights.shape and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True)
class TwoLayerNetwork:
    """Influence layer ``A`` (actions) and communication layer ``W`` (opinions)."""

    influence: LayerMatrix
    communication: LayerMatrix

    def __post_init__(self):
        if not isinstance(self.influence, LayerMatrix):
            object.__setattr__(self, "influence", LayerMatrix(self.influence))
        if not isinstance(self.communication, LayerMatrix):
            object.__setattr__(self, "communication", LayerMatrix(self.communication))
        if self.influence.n != self.communication.n:
            raise DimensionMismatch(
                f"layers disagree on node count: {self.influence.n} vs {self.communication.n}"
            )
        if self.influence.n < 2:
            raise DimensionMismatch("a two-layer network needs at least 2 nodes")

    @classmethod
    def coincident(cls, layer) -> "TwoLayerNetwork":
        """Network whose influence and communication layers coincide (A = W)."""
        layer = layer if isinstance(layer, LayerMatrix) else LayerMatrix(layer)
        return cls(layer, layer)

    @property
    def n(self) -> int:
        return self.influence.n

    @property
    def A(self) -> np.ndarray:
        return self.influence.weights

    @property
    def W(self) -> np.ndarray:
        return self.communication.weights

    @property
    def connected(self) -> bool:
        return self.influence.strongly_connected and self.communication.strongly_connected

    @property
    def assumption1_compliant(self) -> bool:
        """Network part of the potential-game assumption: symmetric layers, a_ii > 0."""
        return self.influence.symmetric and self.communication.symmetric and self.influence.self_loops


@dataclass(frozen=True)
class Partition:
    """Disjoint split of the nodes into a positive side and a negative side."""

    pos: frozenset
    neg: frozenset

    def __post_init__(self):
        object.__setattr__(self, "pos", frozenset(int(i) for i in self.pos))
        object.__setattr__(self, "neg", frozenset(int(i) for i in self.neg))
        if not self.pos or not self.neg:
            raise EmptyPartitionSide("both sides of a partition must be nonempty")
        if self.pos & self.neg:
            raise ValueError(f"partition sides overlap on {sorted(self.pos & self.neg)}")

    @classmethod
    def from_signs(cls, signs) -> "Partition":
        signs = np.asarray(signs)
        return cls(np.flatnonzero(signs > 0), np.flatnonzero(signs <= 0))

    @classmethod
    def blocks(cls, n_pos: int, n_neg: int) -> "Partition":
        """First ``n_pos`` nodes positive, next ``n_neg`` negative."""
        return cls(range(n_pos), range(n_pos, n_pos + n_neg))

    @property
    def n(self) -> int:
        return len(self.pos) + len(self.neg)

    def check_covers(self, n: int) -> None:
        if self.pos | self.neg != frozenset(range(n)):
            raise ValueError(f"partition does not cover nodes 0..{n - 1}")

    def pos_mask(self, n: int) -> np.ndarray:
        self.check_covers(n)
        mask = np.zeros(n, dtype=bool)
        mask[list(self.pos)] = True
        return mask

    def signs(self, n: int) -> np.ndarray:
        """+1 on the positive side, -1 on the negative side."""
        return np.where(self.pos_mask(n), 1, -1)


@dataclass(frozen=True)
class PartitionDegreeBounds:
    d_p_min: float
    d_p_max: float
    d_n_min: float
    d_n_max: float

    def as_dict(self) -> dict:
        return {
            "d_p_min": self.d_p_min,
            "d_p_max": self.d_p_max,
            "d_n_min": self.d_n_min,
            "d_n_max": self.d_n_max,
        }


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    required: bool = True
    offending: tuple = ()
    max_residual: float = 0.0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "required": self.required,
            "offending": [list(o) if isinstance(o, tuple) else o for o in self.offending],
            "max_residual": self.max_residual,
        }


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of every layer check.

    Checks that were not requested are still evaluated and reported with
    ``required=False``; they never make :attr:`ok` false.
    """

    n: int
    checks: tuple = field(default_factory=tuple)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    @property
    def violations(self) -> list:
        return [c.name for c in self.checks if c.required and not c.passed]

    @property
    def warnings(self) -> list:
        return [c.name for c in self.checks if not c.required and not c.passed]

    def as_dict(self, one_based: bool = True) -> dict:
        off = 1 if one_based else 0
        out = []
        for c in self.checks:
            d = c.as_dict()
            d["offending"] = [
                [k + off for k in o] if isinstance(o, list) else o + off for o in d["offending"]
            ]
            out.append(d)
        return {"n": self.n, "ok": self.ok, "violations": self.violations, "checks": out}


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        k = stack.pop()
        for j in np.flatnonzero(adj[k] & ~seen):
            seen[j] = True
            stack.append(j)
    return seen


def is_strongly_connected(m) -> bool:
    """True iff every node reaches every other node along positive weights."""
    w = m.weights if isinstance(m, LayerMatrix) else np.asarray(m, dtype=float)
    if w.shape[0] == 1:
        return True
    n_comp, _ = connected_components(w > 0, directed=True, connection="strong")
    return n_comp == 1


def validate_layer(
    m: LayerMatrix,
    require_symmetric: bool = False,
    require_self_loops: bool = False,
    require_strongly_connected: bool = False,
) -> ValidationReport:
    w = m.weights
    n = m.n
    checks = []

    neg = np.argwhere(w < 0)
    checks.append(
        CheckResult(
            "nonnegative",
            passed=len(neg) == 0,
            offending=tuple(tuple(int(v) for v in p) for p in neg),
            max_residual=float(max(0.0, -w.min())),
        )
    )

    res = m.row_residuals
    bad_rows = np.flatnonzero(res > STOCHASTIC_TOL)
    checks.append(
        CheckResult(
            "row_stochastic",
            passed=len(bad_rows) == 0,
            offending=tuple(int(i) for i in bad_rows),
            max_residual=float(res.max()),
        )
    )

    asym = np.abs(w - w.T)
    pairs = [(int(i), int(j)) for i, j in np.argwhere(asym > SYMMETRY_TOL) if i < j]
    checks.append(
        CheckResult(
            "symmetric",
            passed=not pairs,
            required=require_symmetric,
            offending=tuple(pairs),
            max_residual=float(asym.max()),
        )
    )

    diag = np.diag(w)
    no_loop = np.flatnonzero(diag <= 0)
    checks.append(
        CheckResult(
            "self_loops",
            passed=len(no_loop) == 0,
            required=require_self_loops,
            offending=tuple(int(i) for i in no_loop),
        )
    )

    sc = is_strongly_connected(m)
    unreached: tuple = ()
    if not sc:
        unreached = tuple(int(i) for i in np.flatnonzero(~_reachable(w > 0, 0)))
    checks.append(
        CheckResult(
            "strongly_connected",
            passed=sc,
            required=require_strongly_connected,
            offending=unreached,
        )
    )
    return ValidationReport(n=n, checks=tuple(checks))


def metropolis_weights(adjacency) -> LayerMatrix:
    """Symmetric row-stochastic weights with positive self-loops.

    Off-diagonal ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on edges; the diagonal
    takes the remaining mass of each row.
    """
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise DimensionMismatch(f"adjacency must be square, got {adj.shape}")
    adj = adj != 0
    if not np.array_equal(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    if adj.diagonal().any():
        raise ValueError("adjacency must have a zero diagonal")
    n = adj.shape[0]
    if n > 1 and connected_components(adj, directed=False)[0] != 1:
        raise DisconnectedGraph("Metropolis weights need a connected graph")
    deg = adj.sum(axis=1)
    w = np.where(adj, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return LayerMatrix(w)


def _check_probability(p: float) -> None:
    if not (0.0 < p <= 1.0):
        raise InvalidProbability(f"edge probability must lie in (0, 1], got {p}")


def _weights_from_mask(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # uniform on (0, 1]
    w = np.where(mask, 1.0 - rng.random(mask.shape), 0.0)
    empty = np.flatnonzero(w.sum(axis=1) == 0)
    w[empty, empty] = 1.0
    return w / w.sum(axis=1, keepdims=True)


def _er_mask(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    return mask


def gen_erdos_renyi_row_stochastic(n: int, p: float, rng_seed: int) -> LayerMatrix:
    """Directed ER graph without self-loops, uniform weights, rows rescaled.

    Rows that end up with no out-edge get a unit self-loop.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    _check_probability(p)
    rng = np.random.default_rng(rng_seed)
    return LayerMatrix(_weights_from_mask(_er_mask(n, p, rng), rng))


def gen_two_community(sizes, p: float, inter_links: int, rng_seed: int) -> LayerMatrix:
    """Two directed ER blocks joined by ``inter_links`` single-direction edges.

    Nodes ``0..n_p-1`` form the first block. Cross-block node pairs are drawn
    uniformly without replacement and each gets one edge in a random
    direction.
    """
    n_p, n_n = (int(s) for s in sizes)
    if n_p < 1 or n_n < 1:
        raise ValueError(f"both community sizes must be >= 1, got {(n_p, n_n)}")
    _check_probability(p)
    if inter_links < 1:
        raise ValueError("inter_links must be >= 1")
    if inter_links > n_p * n_n:
        raise TooManyInterLinks(f"{inter_links} inter-links requested but only {n_p * n_n} pairs exist")
    rng = np.random.default_rng(rng_seed)
    n = n_p + n_n
    mask = np.zeros((n, n), dtype=bool)
    mask[:n_p, :n_p] = _er_mask(n_p, p, rng)
    mask[n_p:, n_p:] = _er_mask(n_n, p, rng)
    picks = rng.choice(n_p * n_n, size=inter_links, replace=False)
    directions = rng.integers(0, 2, size=inter_links)
    for pick, forward in zip(picks, directions):
        i, j = divmod(int(pick), n_n)
        j += n_p
        if forward:
            mask[i, j] = True
        else:
            mask[j, i] = True
    return LayerMatrix(_weights_from_mask(mask, rng))


def within_group_sums(w, part: Partition) -> np.ndarray:
    """Per-node weight placed on the node's own side of the partition."""
    w = w.weights if isinstance(w, LayerMatrix) else np.asarray(w, dtype=float)
    pos = part.pos_mask(w.shape[0])
    # shares of a stochastic row; clip summation rounding
    return np.clip(np.where(pos, w[:, pos].sum(axis=1), w[:, ~pos].sum(axis=1)), 0.0, 1.0)


def partition_degree_bounds(w, part: Partition) -> PartitionDegreeBounds:
    w = w.weights if isinstance(w, LayerMatrix) else np.asarray(w, dtype=float)
    if not part.pos or not part.neg:
        raise EmptyPartitionSide("both sides of a partition must be nonempty")
    own = within_group_sums(w, part)
    pos = part.pos_mask(w.shape[0])
    dp, dn = own[pos], own[~pos]
    return PartitionDegreeBounds(
        d_p_min=float(dp.min()),
        d_p_max=float(dp.max()),
        d_n_min=float(dn.min()),
        d_n_max=float(dn.max()),
    )


def random_connected_adjacency(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 adjacency of a connected graph: a random spanning tree plus G(n, p) edges."""
    adj = np.triu(rng.random((n, n)) < p, 1)
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(0, k)]
        adj[min(a, b), max(a, b)] = True
    adj = adj | adj.T
    return adj.astype(int)


def uniform_degree_layer(
    sizes, d: float, rng: Optional[np.random.Generator] = None, inner_p: float = 0.5
) -> LayerMatrix:
    """Symmetric layer where every node puts exactly ``d`` on its own side.

    Both sides must have equal size ``m``. Within each side the weights are
    ``d`` times Metropolis weights of a random connected graph; across sides
    every pair gets ``(1 - d) / m``.
    """
    m1, m2 = (int(s) for s in sizes)
    if m1 != m2:
        raise ValueError("uniform-degree construction needs equal side sizes for symmetry")
    if not 0 < d <= 1:
        raise ValueError(f"d must lie in (0, 1], got {d}")
    m = m1
    rng = rng or np.random.default_rng(0)
    w = np.zeros((2 * m, 2 * m))
    for lo in (0, m):
        if m == 1:
            block = np.ones((1, 1))
        else:
            block = metropolis_weights(random_connected_adjacency(m, inner_p, rng)).weights
        w[lo:lo + m, lo:lo + m] = d * block
    w[:m, m:] = (1.0 - d) / m
    w[m:, :m] = (1.0 - d) / m
    return LayerMatrix(w)

