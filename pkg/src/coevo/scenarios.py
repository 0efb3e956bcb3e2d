"""Built-in scenarios: two-community polarization and pluralistic ignorance.

Each scenario is an ordinary experiment config (see :mod:`coevo.config`) plus
a summary that tracks per-group means.
"""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import check_theorem3, is_polarized_wrt, polarization_partition
from .config import Experiment, build_experiment
from .dynamics import ConvergenceReport, run
from .errors import UnknownScenario

# network seed of the shipped polarization scenario; see the notes on how it was chosen
POLARIZATION_NETWORK_SEED = 12
POLARIZATION_SEED = 1
PLURALISTIC_SEED = 1


def polarization_config() -> dict:
    return {
        "seed": POLARIZATION_SEED,
        "network": {
            "influence": {
                "generator": "two_community",
                "sizes": [10, 10],
                "p": 0.2,
                "inter_links": 2,
                "seed": POLARIZATION_NETWORK_SEED,
            },
            "communication": "same",
        },
        "params": {"lambda": 0.6, "beta": 0.5, "gamma": 0.0, "alpha": 0.0, "u": 0.0},
        "scheduler": {"kind": "uniform_random"},
        "init": {"y0": {"group_signed": {"low": 0.0, "high": 1.0}}, "x0": {"sign_of_y0": {"flip_fraction": 0.1}}},
        "stop": {"max_steps": 20_000, "opinion_tol": 1e-9},
        "output": {"dir": "out/polarization", "thin": 1},
    }


def pluralistic_config(control: bool = False) -> dict:
    """25 female agents (labels 1..25) then 25 male agents (26..50).

    Opinions start near -0.4 (private discomfort), actions mostly +1 (the
    observed norm). ``control`` gives both groups the same parameters.
    """
    n_f = n_m = 25
    if control:
        lam = [0.4] * (n_f + n_m)
        gamma = [0.55] * (n_f + n_m)
    else:
        lam = [0.2] * n_f + [0.6] * n_m
        gamma = [0.8] * n_f + [0.3] * n_m
    return {
        "seed": PLURALISTIC_SEED,
        "network": {
            "influence": {"generator": "erdos_renyi", "n": n_f + n_m, "p": 0.1},
            "communication": {"generator": "erdos_renyi", "n": n_f + n_m, "p": 0.04},
        },
        "params": {"lambda": lam, "beta": 0.4, "gamma": gamma, "u": "y0", "alpha": 0.0},
        "scheduler": {"kind": "uniform_random"},
        "init": {"y0": {"normal": {"mean": -0.4, "std": 0.2}}, "x0": {"bernoulli": {"p_plus": 0.8}}},
        "stop": {"max_steps": 20_000, "opinion_tol": 1e-9},
        "output": {"dir": "out/pluralistic-ignorance", "thin": 1},
        "groups": {"female": list(range(1, n_f + 1)), "male": list(range(n_f + 1, n_f + n_m + 1))},
    }


SCENARIOS = {
    "polarization": polarization_config,
    "pluralistic-ignorance": pluralistic_config,
    "pluralistic-ignorance-control": lambda: pluralistic_config(control=True),
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def scenario_config(name: str, overrides: Optional[dict] = None) -> dict:
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    cfg = SCENARIOS[name]()
    cfg["scenario"] = name
    return _merge(cfg, overrides or {})


@dataclass
class GroupMeans:
    """Mean action and opinion per group at selected steps (``t`` counts completed steps)."""

    names: tuple
    t: list = field(default_factory=list)
    xbar: list = field(default_factory=list)
    x: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)

    def add(self, t: int, x: np.ndarray, y: np.ndarray, groups: dict) -> None:
        self.t.append(t)
        self.xbar.append(float(x.mean()))
        for g in self.names:
            idx = groups[g]
            self.x.setdefault(g, []).append(float(x[idx].mean()))
            self.y.setdefault(g, []).append(float(y[idx].mean()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            out = csv.writer(f, lineterminator="\n")
            out.writerow(["t", "xbar"] + [f"x_{g}" for g in self.names] + [f"y_{g}" for g in self.names])
            for k, t in enumerate(self.t):
                row = [t, format(self.xbar[k], ".17g")]
                row += [format(self.x[g][k], ".17g") for g in self.names]
                row += [format(self.y[g][k], ".17g") for g in self.names]
                out.writerow(row)


def group_means(traj, groups: dict, thin: int = 1) -> GroupMeans:
    gm = GroupMeans(tuple(groups))
    gm.add(0, traj.initial.x, traj.initial.y, groups)
    for r in traj.records:
        if r.state_after is not None and ((r.t + 1) % thin == 0 or r is traj.records[-1]):
            gm.add(r.t + 1, r.state_after.x, r.state_after.y, groups)
    return gm


@dataclass
class ScenarioSummary:
    scenario: str
    seed: Optional[int]
    report: ConvergenceReport
    polarization: dict
    groups: dict
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "report": self.report.as_dict(),
            "polarization": self.polarization,
            "groups": self.groups,
            **self.extra,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.as_dict(), f, indent=2)
            f.write("\n")


def displacement_toward(start: float, end: float, target: float) -> float:
    """Signed movement from ``start`` to ``end``, positive when it heads to ``target``."""
    direction = np.sign(target - start)
    return float((end - start) * direction)


def summarize(exp: Experiment, traj, report: ConvergenceReport, name: str) -> ScenarioSummary:
    x0, y0 = traj.initial.x, traj.initial.y
    x1, y1 = traj.final.x, traj.final.y
    norm_end = float(x1.mean())
    groups = {}
    for g, idx in exp.groups.items():
        ys, ye = float(y0[idx].mean()), float(y1[idx].mean())
        groups[g] = {
            "size": len(idx),
            "mean_x_start": float(x0[idx].mean()),
            "mean_x_end": float(x1[idx].mean()),
            "mean_y_start": ys,
            "mean_y_end": ye,
            "opinion_displacement": abs(ye - ys),
            "opinion_displacement_toward_norm": displacement_toward(ys, ye, norm_end),
        }
    extra = {"norm_start": float(x0.mean()), "norm_end": norm_end}
    if exp.partition is not None:
        extra["polarized_wrt_partition"] = is_polarized_wrt(traj.final, exp.partition)
        extra["initially_polarized_wrt_partition"] = is_polarized_wrt(traj.initial, exp.partition)
        if exp.net.A is exp.net.W or np.array_equal(exp.net.A, exp.net.W):
            lam, beta = float(exp.params.lam[0]), float(exp.params.beta[0])
            if exp.params.homogeneous and 0 < lam < 1 and 0 < beta < 1:
                extra["invariance_condition_holds"] = check_theorem3(exp.net.communication, exp.partition, lam, beta).holds
    return ScenarioSummary(name, exp.seed, report, polarization_partition(traj.final).as_dict(), groups, extra)


def run_experiment(exp: Experiment, record: bool = True):
    return run(exp.state0, exp.scheduler, exp.net, exp.params, exp.max_steps, exp.opinion_tol, thin=exp.thin, record=record)


def run_scenario(name: str, seed: Optional[int] = None, overrides: Optional[dict] = None):
    """Build and run a scenario; returns ``(experiment, trajectory, summary, group_means)``."""
    cfg = scenario_config(name, overrides)
    exp = build_experiment(cfg, seed=seed)
    traj, report = run_experiment(exp)
    summary = summarize(exp, traj, report, name)
    return exp, traj, summary, group_means(traj, exp.groups, exp.thin)
