"""Opinion equilibria, Nash verification and polarization conditions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyPartitionSide, InvalidUniformDegree, SingularSystem
from .game import GameParams, SystemState, delta_all
from .netgraph import LayerMatrix, Partition, TwoLayerNetwork, partition_degree_bounds, within_group_sums

NASH_OPINION_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EquilibriumSolveResult:
    y_star: np.ndarray
    residual: float
    solver_note: dict = field(default_factory=dict)


def opinion_update_map(y, x, W, params: GameParams, frozen: Optional[np.ndarray] = None) -> np.ndarray:
    """One synchronous opinion update with actions held at ``x``.

    Agents with beta_i = 0 keep ``frozen`` (defaults to ``y``).
    """
    lam, g = params.lam, params.gamma
    y_new = (1.0 - lam) * ((1.0 - g) * (W @ y) + g * params.prejudice) + lam * x
    keep = params.beta == 0
    if keep.any():
        y_new = np.where(keep, y if frozen is None else frozen, y_new)
    return y_new


def _unreachable_sinks(W: np.ndarray, leaky: np.ndarray) -> np.ndarray:
    # nodes with no W-path to a leaky row make I - DW singular
    reach = leaky.copy()
    frontier = list(np.flatnonzero(leaky))
    into = W.T > 0
    while frontier:
        k = frontier.pop()
        for j in np.flatnonzero(into[k] & ~reach):
            reach[j] = True
            frontier.append(j)
    return np.flatnonzero(~reach)


def opinion_equilibrium(x_star, net: TwoLayerNetwork, params: GameParams, y_frozen=None) -> EquilibriumSolveResult:
    """Unique opinion fixed point for a frozen action vector.

    Solves ``y_i = (1-lam_i)[(1-gamma_i)(W y)_i + gamma_i u_i] + lam_i x_i`` for
    agents with beta_i > 0; agents with beta_i = 0 are pinned to ``y_frozen``.
    """
    x = np.asarray(x_star, dtype=float).reshape(-1)
    W = net.W
    n = net.n
    if x.size != n or params.n != n:
        raise DimensionMismatch(f"x has {x.size} entries, network n={n}, params n={params.n}")
    pinned = params.beta == 0
    if pinned.any():
        if y_frozen is None:
            raise ValueError("y_frozen is required when some agent has beta = 0")
        y_frozen = np.asarray(y_frozen, dtype=float).reshape(-1)
        if y_frozen.size != n:
            raise DimensionMismatch("y_frozen must have one entry per agent")
    else:
        y_frozen = np.zeros(n)

    scale = (1.0 - params.lam) * (1.0 - params.gamma)
    scale = np.where(pinned, 0.0, scale)
    stuck = _unreachable_sinks(W, scale < 1.0)
    if stuck.size:
        raise SingularSystem(
            f"agents {sorted(int(k) + 1 for k in stuck)} have lam = gamma = 0 and no path to an "
            "anchored agent; the opinion equilibrium is not unique"
        )

    M = np.eye(n) - scale[:, None] * W
    b = np.where(pinned, y_frozen, (1.0 - params.lam) * params.gamma * params.prejudice + params.lam * x)
    try:
        y = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    # one step of iterative refinement
    y = y + np.linalg.solve(M, b - M @ y)
    y = np.clip(y, -1.0, 1.0)
    residual = float(np.max(np.abs(opinion_update_map(y, x, W, params, y_frozen) - y)))
    note = {
        "method": "dense LU solve with one refinement step",
        "heterogeneous": not params.homogeneous,
        "strongly_connected": net.communication.strongly_connected,
        "pinned_agents": int(pinned.sum()),
    }
    if not params.homogeneous:
        note["scope"] = "heterogeneous extension; uniqueness shown only for homogeneous parameters"
    y.setflags(write=False)
    return EquilibriumSolveResult(y, residual, note)


@dataclass(frozen=True)
class NashViolation:
    agent: int
    reason: str


def nash_violations(
    state: SystemState,
    net: TwoLayerNetwork,
    params: GameParams,
    opinion_tol: float = NASH_OPINION_TOL,
    tie_tol: float = TIE_TOL,
) -> list:
    """Agents whose current strategy is not a best response.

    |delta| <= ``tie_tol`` counts as a tie so that opinions coming out of a
    linear solve are not rejected over last-bit rounding.
    """
    d = delta_all(state, net, params)
    lam, g = params.lam, params.gamma
    h = (1.0 - lam) * ((1.0 - g) * (net.W @ state.y) + g * params.prejudice)
    out = []
    for i in range(state.n):
        xi, yi, di = int(state.x[i]), float(state.y[i]), float(d[i])
        tie = abs(di) <= tie_tol
        if not tie and xi != (1 if di > 0 else -1):
            out.append(NashViolation(i, f"action {xi:+d} but delta = {di:.6g}"))
            continue
        if params.beta[i] == 0:
            continue
        target = h[i] + lam[i] * xi
        if abs(yi - target) > opinion_tol:
            out.append(NashViolation(i, f"opinion {yi:.12g} but best response is {target:.12g}"))
    return out


def is_nash(state: SystemState, net: TwoLayerNetwork, params: GameParams, opinion_tol: float = NASH_OPINION_TOL) -> bool:
    return not nash_violations(state, net, params, opinion_tol)


@dataclass(frozen=True)
class PolarizationResult:
    partition: Optional[Partition]
    action_polarized: bool
    opinion_polarized: bool
    state_polarized: bool

    def as_dict(self) -> dict:
        part = None
        if self.partition is not None:
            part = {"pos": sorted(k + 1 for k in self.partition.pos), "neg": sorted(k + 1 for k in self.partition.neg)}
        return {
            "partition": part,
            "action_polarized": self.action_polarized,
            "opinion_polarized": self.opinion_polarized,
            "state_polarized": self.state_polarized,
        }


def polarization_partition(state: SystemState) -> PolarizationResult:
    """Classify a state against the partition induced by its action signs.

    Zero opinions are never opinion-polarized.
    """
    pos = state.x == 1
    if pos.all() or not pos.any():
        return PolarizationResult(None, False, False, False)
    part = Partition(np.flatnonzero(pos), np.flatnonzero(~pos))
    y = state.y
    opinions = bool(np.all(y[pos] > 0) and np.all(y[~pos] < 0))
    return PolarizationResult(part, True, opinions, opinions)


def is_polarized_wrt(state: SystemState, part: Partition) -> bool:
    """State-polarized with respect to a given partition."""
    s = part.signs(state.n)
    return bool(np.all(state.x == s) and np.all(np.sign(state.y) == s))


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs > self.rhs)

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied}


@dataclass(frozen=True)
class TheoremCheckResult:
    theorem: str
    conditions: tuple
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    @property
    def violated(self) -> list:
        return [c.name for c in self.conditions if not c.satisfied]

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "holds": self.holds,
            "conditions": [c.as_dict() for c in self.conditions],
            **self.extra,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def _ratio(t: float) -> float:
    # t / (1 + t) for t in [-1, 1]; tends to -inf as t -> -1, where the bound is vacuous
    return t / (1.0 + t) if 1.0 + t > 0 else -math.inf


def _check_open_unit(name: str, v: float) -> float:
    v = float(v)
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")
    return v


def check_theorem2(w, part: Partition, lam: float, beta: float) -> TheoremCheckResult:
    """Existence conditions for a polarized equilibrium (A = W, alpha = gamma = 0)."""
    lam = _check_open_unit("lambda", lam)
    beta = _check_open_unit("beta", beta)
    b = partition_degree_bounds(w, part)
    dp, Dp, dn, Dn = b.d_p_min, b.d_p_max, b.d_n_min, b.d_n_max

    lam_bound = max(_ratio(Dp - dn), _ratio(Dn - dp))

    def side(lo_own, hi_other):
        s = lo_own + hi_other - 1.0
        return (lam * s + lo_own - hi_other) / (1.0 - (1.0 - lam) * s) + (1.0 - beta) * (2.0 * lo_own - 1.0) / (
            2.0 * beta * (1.0 - lam)
        )

    conds = (
        Condition("lambda_lower_bound", lam, lam_bound),
        Condition("positive_side_action", side(dp, Dn), 0.0),
        Condition("negative_side_action", side(dn, Dp), 0.0),
    )
    return TheoremCheckResult("existence", conds, {"bounds": b.as_dict(), "lambda": lam, "beta": beta})


def theorem3_threshold(lam: float, beta: float) -> float:
    return max((1.0 - 2.0 * lam) / (1.0 - lam), 0.5 * (1.0 + beta * (1.0 - lam) / (1.0 - beta * lam)))


def check_theorem3(w, part: Partition, lam: float, beta: float) -> TheoremCheckResult:
    """Per-node invariance condition: own-side weight above a common threshold."""
    lam = _check_open_unit("lambda", lam)
    beta = _check_open_unit("beta", beta)
    if not part.pos or not part.neg:
        raise EmptyPartitionSide("both sides of a partition must be nonempty")
    thr = theorem3_threshold(lam, beta)
    own = within_group_sums(w, part)
    conds = tuple(Condition(f"node_{k + 1}_own_side_weight", float(own[k]), thr) for k in range(own.size))
    margins = own - thr
    worst = int(np.argmin(margins))
    extra = {
        "threshold": thr,
        "threshold_opinion_branch": (1.0 - 2.0 * lam) / (1.0 - lam),
        "threshold_action_branch": 0.5 * (1.0 + beta * (1.0 - lam) / (1.0 - beta * lam)),
        "min_margin": float(margins[worst]),
        "worst_node": worst + 1,
        "lambda": lam,
        "beta": beta,
    }
    return TheoremCheckResult("invariance", conds, extra)


def bipartite_consensus_opinions(lam: float, d: float) -> tuple:
    """``(y_plus, y_minus)`` of the bipartite-consensus equilibrium for own-side weight ``d``."""
    if not d > 0.5 or d > 1:
        raise InvalidUniformDegree(f"uniform own-side weight must lie in (1/2, 1], got {d}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    y_plus = lam / (1.0 - (1.0 - lam) * (2.0 * d - 1.0))
    return y_plus, -y_plus


def polarized_equilibrium_candidate(w, part: Partition, lam: float, beta: float):
    """Polarized actions for ``part`` with their solved opinions, under A = W, alpha = gamma = 0."""
    layer = w if isinstance(w, LayerMatrix) else LayerMatrix(w)
    n = layer.n
    net = TwoLayerNetwork.coincident(layer)
    params = GameParams.uniform(n, lam, beta)
    x = part.signs(n)
    sol = opinion_equilibrium(x, net, params)
    return SystemState(x, sol.y_star), net, params
