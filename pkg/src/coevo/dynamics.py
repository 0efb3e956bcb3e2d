"""Asynchronous best-response simulation and the potential function."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .analysis import opinion_equilibrium
from .errors import AssumptionViolated, NonPositiveSelfLoop, SchedulerExhausted, SingularSystem
from .game import GameParams, SystemState, _check_index, _check_sizes, update_agent
from .netgraph import TwoLayerNetwork

SCHEDULER_KINDS = ("round_robin", "shuffled_blocks", "uniform_random", "explicit")
_CHUNK = 4096


@lru_cache(maxsize=64)
def _uniform_chunk(seed: int, n: int, idx: int) -> np.ndarray:
    return np.random.default_rng([seed, idx]).integers(0, n, size=_CHUNK)


@lru_cache(maxsize=256)
def _shuffled_block(seed: int, n: int, idx: int) -> np.ndarray:
    return np.random.default_rng([seed, idx]).permutation(n)


def window_compliant(sequence, n: int, T: int) -> bool:
    """Every length-``T`` window of ``sequence`` contains every agent."""
    seq = np.asarray(sequence)
    L = seq.size
    if L < T:
        return False
    for i in range(n):
        hits = np.flatnonzero(seq == i)
        if hits.size == 0:
            return False
        gaps = np.diff(np.concatenate(([-1], hits, [L])))
        if gaps.max() > T:
            return False
    return True


@dataclass(frozen=True)
class Scheduler:
    """Activation sequence with random access by step index.

    ``window`` is the length T such that every agent should activate in every
    window of T steps. Round robin certifies T = n and shuffled blocks certify
    T = 2n - 1; the other kinds are checked on the emitted sequence.
    """

    kind: str
    n: int
    seed: int = 0
    window: Optional[int] = None
    sequence: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise ValueError(f"unknown scheduler kind {self.kind!r}; expected one of {SCHEDULER_KINDS}")
        if self.n < 1:
            raise ValueError("scheduler needs n >= 1")
        if self.kind == "explicit":
            if self.sequence is None:
                raise ValueError("explicit scheduler needs a sequence")
            seq = tuple(int(k) for k in self.sequence)
            if any(not 0 <= k < self.n for k in seq):
                raise ValueError("explicit sequence holds agent indices outside 0..n-1")
            object.__setattr__(self, "sequence", seq)
        default = {"round_robin": self.n, "shuffled_blocks": 2 * self.n - 1, "uniform_random": 4 * self.n, "explicit": self.n}
        certified = {"round_robin": self.n, "shuffled_blocks": 2 * self.n - 1}
        if self.window is None:
            object.__setattr__(self, "window", default[self.kind])
        elif self.kind in certified and self.window < certified[self.kind]:
            raise ValueError(f"{self.kind} only certifies T >= {certified[self.kind]}")
        if self.window < self.n:
            raise ValueError(f"window T = {self.window} is shorter than n = {self.n}")

    @classmethod
    def round_robin(cls, n: int) -> "Scheduler":
        return cls("round_robin", n)

    @classmethod
    def shuffled_blocks(cls, n: int, seed: int) -> "Scheduler":
        return cls("shuffled_blocks", n, seed)

    @classmethod
    def uniform_random(cls, n: int, seed: int, window: Optional[int] = None) -> "Scheduler":
        return cls("uniform_random", n, seed, window)

    @classmethod
    def explicit(cls, n: int, sequence, window: Optional[int] = None) -> "Scheduler":
        return cls("explicit", n, window=window, sequence=tuple(sequence))

    @property
    def T(self) -> int:
        return self.window

    @property
    def certified(self) -> bool:
        return self.kind in ("round_robin", "shuffled_blocks")

    def agent_at(self, t: int) -> int:
        if t < 0:
            raise ValueError("step index must be >= 0")
        if self.kind == "round_robin":
            return t % self.n
        if self.kind == "shuffled_blocks":
            return int(_shuffled_block(self.seed, self.n, t // self.n)[t % self.n])
        if self.kind == "uniform_random":
            return int(_uniform_chunk(self.seed, self.n, t // _CHUNK)[t % _CHUNK])
        if t >= len(self.sequence):
            raise SchedulerExhausted(f"explicit sequence has {len(self.sequence)} entries, step {t} requested")
        return self.sequence[t]

    def emit(self, length: int) -> np.ndarray:
        return np.array([self.agent_at(t) for t in range(length)], dtype=np.int64)

    def compliant(self, length: int) -> bool:
        """Window condition on the first ``length`` emitted steps."""
        if self.certified:
            return True
        return window_compliant(self.emit(length), self.n, self.T)


def check_potential_assumptions(net: TwoLayerNetwork, params: GameParams) -> None:
    """Raise :class:`AssumptionViolated` naming the first failed clause.

    gamma = 0 is accepted: the potential and its flip bound stay well defined.
    """
    if not params.homogeneous:
        raise AssumptionViolated("lambda, beta and gamma must be homogeneous across agents")
    lam, beta, g = params.lam[0], params.beta[0], params.gamma[0]
    if not 0 < lam < 1:
        raise AssumptionViolated(f"lambda must lie in (0, 1), got {lam}")
    if not 0 < beta < 1:
        raise AssumptionViolated(f"beta must lie in (0, 1), got {beta}")
    if not 0 <= g < 1:
        raise AssumptionViolated(f"gamma must lie in [0, 1), got {g}")
    if not net.influence.symmetric:
        raise AssumptionViolated("influence layer A must be symmetric")
    if not net.communication.symmetric:
        raise AssumptionViolated("communication layer W must be symmetric")
    if not net.influence.self_loops:
        bad = [int(k) + 1 for k in np.flatnonzero(np.diag(net.A) <= 0)]
        raise NonPositiveSelfLoop(f"influence layer needs a_ii > 0; agents {bad} have none")


def potential_trackable(net: TwoLayerNetwork, params: GameParams) -> bool:
    try:
        check_potential_assumptions(net, params)
    except AssumptionViolated:
        return False
    return True


def _eta(lam, beta, g):
    return lam * (1 - beta) / (4 * beta * (1 - lam) * (1 - g))


def _potential_sum(x, y, A, W, params: GameParams) -> float:
    lam, beta, g = params.lam[0], params.beta[0], params.gamma[0]
    u, alpha = params.prejudice, params.alpha
    eta = _eta(lam, beta, g)
    pair = (1 + alpha) * np.outer(1 + x, 1 + x) + np.outer(1 - x, 1 - x)
    np.fill_diagonal(pair, 0.0)
    coordination = eta * 0.5 * np.sum(A * pair)
    disagreement = -0.5 * np.sum(0.5 * W * (y[:, None] - y[None, :]) ** 2)
    prejudice = -0.5 * np.sum(g / (1 - g) * (y - u) ** 2)
    consistency = -0.5 * np.sum(lam / ((1 - lam) * (1 - g)) * (y - x) ** 2)
    return float(coordination + disagreement + prejudice + consistency)


def potential(state: SystemState, net: TwoLayerNetwork, params: GameParams) -> float:
    """Potential evaluated term by term (coordination, disagreement, prejudice, consistency)."""
    _check_sizes(state, net, params)
    check_potential_assumptions(net, params)
    return _potential_sum(state.x.astype(float), state.y, net.A, net.W, params)


def potential_quadratic(state: SystemState, net: TwoLayerNetwork, params: GameParams) -> float:
    """Potential written as a quadratic form in the opinions plus an action-only part."""
    _check_sizes(state, net, params)
    check_potential_assumptions(net, params)
    n = state.n
    lam, beta, g = params.lam[0], params.beta[0], params.gamma[0]
    x = state.x.astype(float)
    y, u = state.y, params.prejudice
    I = np.eye(n)
    L = lam / ((1 - lam) * (1 - g)) * I
    G = g / (1 - g) * I
    Q = I - net.W + L + G
    quad = y @ Q @ y - 2 * y @ G @ u - 2 * y @ L @ x + x @ L @ x + u @ G @ u
    A_off = net.A - np.diag(np.diag(net.A))
    F = _eta(lam, beta, g) * 0.5 * ((1 + params.alpha) * (1 + x) @ A_off @ (1 + x) + (1 - x) @ A_off @ (1 - x))
    return float(-0.5 * quad + F)


def min_flip_gain(net: TwoLayerNetwork, params: GameParams) -> float:
    """Lower bound on the potential increase caused by any action flip."""
    check_potential_assumptions(net, params)
    lam, beta, g = params.lam[0], params.beta[0], params.gamma[0]
    xi = 1.0 / (beta * (1 - lam) * (1 - g))
    return float(xi * lam * (1 - beta) * np.min(np.diag(net.A)))


@dataclass
class StepRecord:
    t: int
    active: int
    action_flipped: bool
    potential_after: Optional[float] = None
    state_after: Optional[SystemState] = None
    delta: float = 0.0


@dataclass
class ConvergenceReport:
    converged: bool
    tau_action: int
    opinion_residual: float
    flips_total: int
    potential_range: Optional[tuple]
    steps: int
    scheduler_compliant: bool = True
    all_activated: bool = True
    near_ties: int = 0

    def as_dict(self) -> dict:
        pmin, pmax = self.potential_range if self.potential_range else (None, None)
        return {
            "converged": self.converged,
            "tau_action": self.tau_action,
            "flips_total": self.flips_total,
            "opinion_residual": self.opinion_residual,
            "potential_min": pmin,
            "potential_max": pmax,
            "steps": self.steps,
            "scheduler_compliant": self.scheduler_compliant,
            "all_activated": self.all_activated,
            "near_ties": self.near_ties,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=False)
            f.write("\n")


@dataclass
class Trajectory:
    initial: SystemState
    records: list = field(default_factory=list)
    final: Optional[SystemState] = None
    initial_potential: Optional[float] = None

    @property
    def n(self) -> int:
        return self.initial.n

    def __len__(self) -> int:
        return len(self.records)

    def potentials(self) -> list:
        """Initial potential followed by the potential after each step."""
        return [self.initial_potential] + [r.potential_after for r in self.records]

    def to_csv(self, path) -> None:
        """Columns ``t,active,flipped,phi,x_1..x_n,y_1..y_n``; 1-based agent labels."""
        n = self.n
        header = ["t", "active", "flipped", "phi"] + [f"x_{k}" for k in range(1, n + 1)] + [f"y_{k}" for k in range(1, n + 1)]
        with open(path, "w", newline="") as f:
            out = csv.writer(f, lineterminator="\n")
            out.writerow(header)
            for r in self.records:
                phi = "" if r.potential_after is None else format(r.potential_after, ".17g")
                if r.state_after is None:
                    cols = [""] * (2 * n)
                else:
                    cols = [str(int(v)) for v in r.state_after.x] + [format(v, ".17g") for v in r.state_after.y]
                out.writerow([r.t, r.active + 1, int(r.action_flipped), phi] + cols)


def step(state: SystemState, scheduler: Scheduler, t: int, net: TwoLayerNetwork, params: GameParams, track_potential: Optional[bool] = None):
    """Activate the agent scheduled at step ``t``."""
    _check_sizes(state, net, params)
    i = _check_index(scheduler.agent_at(t), state.n)
    s, y_new, d = update_agent(i, state.x, state.y, net.A, net.W, params)
    new = state.with_agent(i, s, y_new)
    if track_potential is None:
        track_potential = potential_trackable(net, params)
    phi = _potential_sum(new.x.astype(float), new.y, net.A, net.W, params) if track_potential else None
    return new, StepRecord(t, i, bool(s != state.x[i]), phi, new, d)


def run(
    state0: SystemState,
    scheduler: Scheduler,
    net: TwoLayerNetwork,
    params: GameParams,
    max_steps: int = 100_000,
    opinion_tol: float = 1e-9,
    thin: int = 1,
    track_potential: Optional[bool] = None,
    record: bool = True,
):
    """Iterate best-response updates until convergence or ``max_steps``.

    Convergence is declared after step t when no action flipped during the
    last T steps, every agent activated during those steps, no agent would
    switch action at the current state, and the opinions are within
    ``opinion_tol`` (sup norm) of the equilibrium for the current actions.

    Returns ``(Trajectory, ConvergenceReport)``.
    """
    _check_sizes(state0, net, params)
    T = scheduler.T
    if max_steps < T:
        raise ValueError(f"max_steps = {max_steps} is shorter than the window T = {T}")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    if track_potential is None:
        track_potential = potential_trackable(net, params)

    A, W = net.A, net.W
    n = state0.n
    x = state0.x.copy()
    xf = x.astype(float)
    y = state0.y.astype(float).copy()
    y_pinned = state0.y.copy()
    lam, g, u = params.lam, params.gamma, params.prejudice

    phi0 = _potential_sum(xf, y, A, W, params) if track_potential else None
    traj = Trajectory(initial=state0, initial_potential=phi0)
    pmin = pmax = phi0

    last_active = np.full(n, -1, dtype=np.int64)
    last_flip = -1
    flips = 0
    near_ties = 0
    y_star = None
    residual = float("nan")
    converged = False
    emitted = [] if not scheduler.certified else None

    t = -1
    for t in range(max_steps):
        i = scheduler.agent_at(t)
        if emitted is not None:
            emitted.append(i)
        s, y_new, d = update_agent(i, xf, y, A, W, params)
        if d != 0 and abs(d) < 1e-12:
            near_ties += 1
        flipped = s != x[i]
        x[i] = s
        xf[i] = s
        y[i] = y_new
        last_active[i] = t
        if flipped:
            flips += 1
            last_flip = t
            y_star = None

        phi = None
        if track_potential:
            phi = _potential_sum(xf, y, A, W, params)
            pmin, pmax = min(pmin, phi), max(pmax, phi)
        if record:
            snap = SystemState(x, y) if t % thin == 0 else None
            traj.records.append(StepRecord(t, int(i), bool(flipped), phi, snap, d))

        steps_done = t + 1
        if steps_done - (last_flip + 1) >= T and last_active.min() >= steps_done - T:
            if y_star is None:
                try:
                    y_star = opinion_equilibrium(x, net, params, y_pinned).y_star
                except SingularSystem:
                    y_star = np.full(n, np.nan)
            residual = float(np.max(np.abs(y - y_star)))
            if residual < opinion_tol:
                social = (1.0 - g) * (W @ y) + g * u
                dall = 2.0 * lam * params.beta * (1.0 - lam) * social + 0.5 * (1.0 - params.beta) * lam * (
                    A @ (2.0 * xf + params.alpha * (1.0 + xf))
                )
                if np.all((dall == 0) | (np.sign(dall) == x)):
                    converged = True
                    break

    steps = t + 1
    final = SystemState(x, y)
    traj.final = final
    if record and traj.records and traj.records[-1].state_after is None:
        traj.records[-1].state_after = final
    if not np.isfinite(residual) or not converged:
        try:
            residual = float(np.max(np.abs(y - opinion_equilibrium(x, net, params, y_pinned).y_star)))
        except SingularSystem:
            residual = float("inf")

    # random activation satisfies the window only in probability, so it is never marked compliant
    if emitted is None:
        compliant = True
    elif scheduler.kind == "uniform_random":
        compliant = False
    else:
        compliant = window_compliant(emitted, n, T)
    report = ConvergenceReport(
        converged=converged,
        tau_action=last_flip + 1,
        opinion_residual=residual,
        flips_total=flips,
        potential_range=(pmin, pmax) if track_potential else None,
        steps=steps,
        scheduler_compliant=compliant,
        all_activated=bool(last_active.min() >= 0),
        near_ties=near_ties,
    )
    return traj, report
