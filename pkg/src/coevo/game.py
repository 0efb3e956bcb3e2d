"""Payoff, decision quantity, best responses and the single-agent update."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange
from .netgraph import TwoLayerNetwork


def _per_agent(name: str, value, n: int, lo: float, hi: float) -> np.ndarray:
    arr = np.array(np.broadcast_to(np.asarray(value, dtype=float), (n,)), dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo) or np.any(arr > hi):
        bad = int(np.flatnonzero(~((arr >= lo) & (arr <= hi)))[0])
        raise ValueError(f"{name}[{bad}] = {arr[bad]} outside [{lo}, {hi}]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameParams:
    """Per-agent weights and the global advantage.

    ``lam``, ``beta``, ``gamma`` lie in [0, 1], ``prejudice`` in [-1, 1] and
    ``alpha >= 0``. Scalars are broadcast to ``n`` agents.
    """

    lam: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    prejudice: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        n = max(np.size(self.lam), np.size(self.beta), np.size(self.gamma), np.size(self.prejudice))
        for name in ("lam", "beta", "gamma"):
            object.__setattr__(self, name, _per_agent(name, getattr(self, name), n, 0.0, 1.0))
        object.__setattr__(self, "prejudice", _per_agent("prejudice", self.prejudice, n, -1.0, 1.0))
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def uniform(cls, n: int, lam, beta, gamma=0.0, alpha=0.0, prejudice=0.0) -> "GameParams":
        return cls(
            lam=np.full(n, lam, dtype=float),
            beta=np.full(n, beta, dtype=float),
            gamma=np.full(n, gamma, dtype=float),
            prejudice=np.broadcast_to(np.asarray(prejudice, dtype=float), (n,)),
            alpha=alpha,
        )

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def homogeneous(self) -> bool:
        return all(np.all(v == v[0]) for v in (self.lam, self.beta, self.gamma))

    def replace(self, **changes) -> "GameParams":
        fields = dict(lam=self.lam, beta=self.beta, gamma=self.gamma, prejudice=self.prejudice, alpha=self.alpha)
        fields.update(changes)
        return GameParams(**fields)


@dataclass(frozen=True, eq=False)
class SystemState:
    """Actions in {-1, +1} and opinions in [-1, 1], one entry per agent."""

    actions: np.ndarray
    opinions: np.ndarray

    def __post_init__(self):
        x = np.array(self.actions, dtype=np.int64).reshape(-1)
        y = np.array(self.opinions, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise DimensionMismatch(f"{x.size} actions but {y.size} opinions")
        if np.any((x != 1) & (x != -1)):
            raise ValueError("actions must be -1 or +1")
        if np.any(~np.isfinite(y)) or np.any(np.abs(y) > 1):
            raise ValueError("opinions must lie in [-1, 1]")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "actions", x)
        object.__setattr__(self, "opinions", y)

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.actions

    @property
    def y(self) -> np.ndarray:
        return self.opinions

    def with_agent(self, i: int, action: int, opinion: float) -> "SystemState":
        x = self.actions.copy()
        y = self.opinions.copy()
        x[i] = action
        y[i] = opinion
        return SystemState(x, y)

    def __eq__(self, other):
        if not isinstance(other, SystemState):
            return NotImplemented
        return np.array_equal(self.actions, other.actions) and np.array_equal(self.opinions, other.opinions)


@dataclass(frozen=True)
class Strategy:
    action: int
    opinion: float


@dataclass(frozen=True)
class BestResponseSet:
    """Best responses of one agent.

    ``kind`` is ``"unique"``, ``"tie"`` (both actions, each with its own
    opinion) or ``"action_only"`` (opinion does not enter the payoff; an
    ``action`` of ``None`` means every strategy is a best response).
    """

    kind: str
    delta: float
    strategies: tuple = ()
    action: Optional[int] = None

    def contains(self, action: int, opinion: float, opinion_tol: float = 1e-9) -> bool:
        if self.kind == "action_only":
            return self.action is None or action == self.action
        return any(s.action == action and abs(s.opinion - opinion) <= opinion_tol for s in self.strategies)


_add = np.add.reduce


def _check_index(i, n: int) -> int:
    if not isinstance(i, (int, np.integer)) or not 0 <= i < n:
        raise IndexOutOfRange(f"agent index {i} outside 0..{n - 1}")
    return int(i)


def _check_sizes(state: SystemState, net: TwoLayerNetwork, params: GameParams) -> None:
    if not (state.n == net.n == params.n):
        raise DimensionMismatch(f"state n={state.n}, network n={net.n}, params n={params.n}")


def opinion_anchor(i: int, y: np.ndarray, W: np.ndarray, params: GameParams) -> float:
    """``(1 - lam_i) * [(1 - gamma_i) * sum_j w_ij y_j + gamma_i u_i]``."""
    lam, g = params.lam[i], params.gamma[i]
    return (1.0 - lam) * ((1.0 - g) * (W[i] @ y) + g * params.prejudice[i])


def _delta(i: int, x, y, A, W, params: GameParams) -> float:
    lam, beta, g = params.lam[i], params.beta[i], params.gamma[i]
    social = (1.0 - g) * (W[i] @ y) + g * params.prejudice[i]
    a = A[i]
    # sum_j a_ij [2 x_j + alpha (1 + x_j)] without temporaries
    coord = (2.0 + params.alpha) * (a @ x) + params.alpha * _add(a)
    return 2.0 * lam * beta * (1.0 - lam) * social + 0.5 * (1.0 - beta) * lam * coord


def delta(i: int, state: SystemState, net: TwoLayerNetwork, params: GameParams) -> float:
    """Payoff gap between the best strategy with action +1 and the best with -1."""
    _check_sizes(state, net, params)
    i = _check_index(i, state.n)
    return float(_delta(i, state.x, state.y, net.A, net.W, params))


def delta_all(state: SystemState, net: TwoLayerNetwork, params: GameParams) -> np.ndarray:
    _check_sizes(state, net, params)
    lam, beta, g = params.lam, params.beta, params.gamma
    x, y = state.x, state.y
    social = (1.0 - g) * (net.W @ y) + g * params.prejudice
    coord = net.A @ (2.0 * x + params.alpha * (1.0 + x))
    return 2.0 * lam * beta * (1.0 - lam) * social + 0.5 * (1.0 - beta) * lam * coord


def payoff(i: int, s, state: SystemState, net: TwoLayerNetwork, params: GameParams):
    """Four-term payoff of agent ``i`` for strategy ``s``.

    ``s`` is a :class:`Strategy` or an ``(action, opinion)`` pair; the opinion
    may be an array, in which case an array of payoffs is returned.
    """
    _check_sizes(state, net, params)
    i = _check_index(i, state.n)
    za, zo = (s.action, s.opinion) if isinstance(s, Strategy) else s
    scalar = np.ndim(zo) == 0
    zo = float(zo) if scalar else np.asarray(zo, dtype=float)
    lam, beta, g, u = float(params.lam[i]), float(params.beta[i]), float(params.gamma[i]), float(params.prejudice[i])
    x, y = state.x, state.y
    a, w = net.A[i], net.W[i]

    sa, ax = float(_add(a)), float(a @ x)
    coordination = 0.25 * lam * (1.0 - beta) * ((1 - za) * (sa - ax) + (1 + params.alpha) * (1 + za) * (sa + ax))
    # sum_j w_ij (z - y_j)^2 expanded so that z may be a grid of values
    sw, wy, wyy = float(_add(w)), float(w @ y), float(w @ (y * y))
    mismatch = -0.5 * beta * (1.0 - lam) * (1.0 - g) * (zo * zo * sw - 2.0 * zo * wy + wyy)
    prejudice = -0.5 * beta * (1.0 - lam) * g * (zo - u) ** 2
    consistency = -0.5 * lam * beta * (za - zo) ** 2
    return coordination + mismatch + prejudice + consistency


def _sgn(v: float) -> int:
    return 1 if v > 0 else (-1 if v < 0 else 0)


def best_response(i: int, state: SystemState, net: TwoLayerNetwork, params: GameParams) -> BestResponseSet:
    d = delta(i, state, net, params)
    i = int(i)
    if params.beta[i] == 0:
        return BestResponseSet("action_only", d, action=_sgn(d) or None)
    lam = params.lam[i]
    h = opinion_anchor(i, state.y, net.W, params)
    if d != 0:
        a = _sgn(d)
        return BestResponseSet("unique", d, (Strategy(a, _clip(h + lam * a)),))
    return BestResponseSet("tie", d, (Strategy(1, _clip(h + lam)), Strategy(-1, _clip(h - lam))))


def _clip(v: float) -> float:
    # convex combination of values in [-1, 1]; guards only against rounding
    return float(min(1.0, max(-1.0, v)))


def update_agent(i: int, x: np.ndarray, y: np.ndarray, A: np.ndarray, W: np.ndarray, params: GameParams):
    """New ``(x_i, y_i, delta_i)`` for active agent ``i``; no validation.

    Ties (delta exactly 0) keep the current action. Agents with beta_i = 0
    keep their opinion.
    """
    d = _delta(i, x, y, A, W, params)
    s = 1 if d > 0 else (-1 if d < 0 else int(x[i]))
    if params.beta[i] > 0:
        y_new = _clip(opinion_anchor(i, y, W, params) + params.lam[i] * s)
    else:
        y_new = float(y[i])
    return s, y_new, float(d)


def apply_update(i: int, state: SystemState, net: TwoLayerNetwork, params: GameParams) -> SystemState:
    _check_sizes(state, net, params)
    i = _check_index(i, state.n)
    s, y_new, _ = update_agent(i, state.x, state.y, net.A, net.W, params)
    return state.with_agent(i, s, y_new)
