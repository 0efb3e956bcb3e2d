"""JSON experiment configuration.

Schema (all keys except ``network`` and ``params`` are optional)::

    {
      "seed": 7,
      "network": {
        "influence":     LAYER,
        "communication": LAYER | "same"            (default "same")
      },
      "partition": {"pos": [1, ...], "neg": [...]}  (1-based labels)
      "params": {"lambda": v, "beta": v, "gamma": v, "u": v | "y0", "alpha": a},
      "scheduler": {"kind": "round_robin" | "shuffled_blocks" | "uniform_random"
                    | "explicit", "seed": s, "T": t, "sequence": [1-based labels]},
      "init": {"y0": Y0, "x0": X0},
      "stop": {"max_steps": 100000, "opinion_tol": 1e-9},
      "output": {"dir": "out", "thin": 1},
      "groups": {"name": [1-based labels], ...}
    }

``v`` is a number or one number per agent.

LAYER is one of::

    {"file": "A.csv"}                      dense or edge-list CSV
    {"matrix": [[...], ...]}
    {"generator": "two_community", "sizes": [10, 10], "p": 0.2, "inter_links": 2}
    {"generator": "erdos_renyi", "n": 50, "p": 0.1}
    {"generator": "metropolis", "n": 12, "p": 0.3}
    {"generator": "uniform_degree", "sizes": [6, 6], "d": 0.8}

Y0 is a vector, ``{"normal": {"mean": m, "std": s}}`` (clipped to [-1, 1]),
``{"uniform": {"low": a, "high": b}}`` or ``{"group_signed": {"low": a,
"high": b}}`` (magnitude uniform on [a, b], sign from the partition).

X0 is a vector, ``{"sign_of_y0": {"flip_fraction": q}}`` (x0 = sgn(y0), then
the actions of round(q n) random agents are flipped), ``{"bernoulli":
{"p_plus": p}}`` or ``"partition"``.

Every stochastic element may carry its own integer ``"seed"``. Without one
its seed is derived from the top-level ``seed``, which the ``COEVO_SEED``
environment variable overrides. A stochastic element with neither is an
error.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import Scheduler
from .errors import ConfigError
from .game import GameParams, SystemState
from .layerio import read_layer
from .netgraph import (
    LayerMatrix,
    Partition,
    TwoLayerNetwork,
    gen_erdos_renyi_row_stochastic,
    gen_two_community,
    metropolis_weights,
    random_connected_adjacency,
    uniform_degree_layer,
)

SEED_ENV = "COEVO_SEED"
TOP_KEYS = {"seed", "network", "partition", "params", "scheduler", "init", "stop", "output", "groups", "scenario"}


def derive_seed(master: int, tag: str) -> int:
    """Independent 63-bit seed for one stochastic element."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode())])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class Experiment:
    """A fully built, validated experiment."""

    net: TwoLayerNetwork
    params: GameParams
    state0: SystemState
    scheduler: Scheduler
    partition: Optional[Partition] = None
    groups: dict = field(default_factory=dict)
    max_steps: int = 100_000
    opinion_tol: float = 1e-9
    out_dir: Path = Path("out")
    thin: int = 1
    seed: Optional[int] = None
    raw: dict = field(default_factory=dict)


def _err(path: str, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def _get(d: dict, key: str, path: str, kind=None, default=...):
    if key not in d:
        if default is ...:
            raise _err(f"{path}.{key}", "required field is missing")
        return default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise _err(f"{path}.{key}", f"expected {_kind_name(kind)}, got {type(v).__name__}")
    return v


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _number(v, path: str, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(path, f"expected a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        raise _err(path, "must be finite")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise _err(path, f"{v} below {'exclusive ' if lo_open else ''}bound {lo}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise _err(path, f"{v} above {'exclusive ' if hi_open else ''}bound {hi}")
    return v


def _integer(v, path: str, lo=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise _err(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise _err(path, f"{v} below bound {lo}")
    return v


def _vector(v, n: int, path: str, lo: float, hi: float) -> np.ndarray:
    if isinstance(v, list):
        if len(v) != n:
            raise _err(path, f"expected {n} entries, got {len(v)}")
        return np.array([_number(e, f"{path}[{k + 1}]", lo, hi) for k, e in enumerate(v)])
    return np.full(n, _number(v, path, lo, hi))


class _Seeds:
    def __init__(self, master: Optional[int]):
        self.master = master

    def get(self, spec: dict, tag: str, path: str) -> int:
        if "seed" in spec:
            return _integer(spec["seed"], f"{path}.seed", lo=0)
        if self.master is None:
            raise _err(path, "stochastic element needs a seed (set it here or at top level)")
        return derive_seed(self.master, tag)


def _labels(v, n: int, path: str) -> list:
    if not isinstance(v, list):
        raise _err(path, "expected a list of 1-based agent labels")
    out = []
    for k, e in enumerate(v):
        e = _integer(e, f"{path}[{k + 1}]", lo=1)
        if e > n:
            raise _err(f"{path}[{k + 1}]", f"label {e} above bound n = {n}")
        out.append(e - 1)
    return out


def _build_layer(spec, path: str, seeds: _Seeds, base: Path) -> tuple:
    """Returns ``(layer, natural_partition_or_None)``."""
    if not isinstance(spec, dict):
        raise _err(path, "expected an object")
    if "file" in spec:
        f = Path(_get(spec, "file", path, str))
        if not f.is_absolute():
            f = base / f
        return read_layer(f, spec.get("n")), None
    if "matrix" in spec:
        try:
            return LayerMatrix(np.array(spec["matrix"], dtype=float)), None
        except (ValueError, TypeError) as exc:
            raise _err(f"{path}.matrix", str(exc)) from None
    gen = _get(spec, "generator", path, str)
    gpath = f"{path}({gen})"
    if gen == "two_community":
        sizes = _get(spec, "sizes", gpath, list)
        if len(sizes) != 2:
            raise _err(f"{gpath}.sizes", "expected two community sizes")
        n_p, n_n = (_integer(s, f"{gpath}.sizes[{k + 1}]", lo=1) for k, s in enumerate(sizes))
        p = _number(_get(spec, "p", gpath), f"{gpath}.p", 0.0, 1.0, lo_open=True)
        links = _integer(_get(spec, "inter_links", gpath), f"{gpath}.inter_links", lo=1)
        layer = gen_two_community((n_p, n_n), p, links, seeds.get(spec, path + ".generator", gpath))
        return layer, Partition.blocks(n_p, n_n)
    if gen == "erdos_renyi":
        n = _integer(_get(spec, "n", gpath), f"{gpath}.n", lo=2)
        p = _number(_get(spec, "p", gpath), f"{gpath}.p", 0.0, 1.0, lo_open=True)
        return gen_erdos_renyi_row_stochastic(n, p, seeds.get(spec, path + ".generator", gpath)), None
    if gen == "metropolis":
        n = _integer(_get(spec, "n", gpath), f"{gpath}.n", lo=2)
        p = _number(_get(spec, "p", gpath), f"{gpath}.p", 0.0, 1.0, lo_open=True)
        rng = np.random.default_rng(seeds.get(spec, path + ".generator", gpath))
        return metropolis_weights(random_connected_adjacency(n, p, rng)), None
    if gen == "uniform_degree":
        sizes = _get(spec, "sizes", gpath, list)
        if len(sizes) != 2 or sizes[0] != sizes[1]:
            raise _err(f"{gpath}.sizes", "expected two equal side sizes")
        m = _integer(sizes[0], f"{gpath}.sizes[1]", lo=1)
        d = _number(_get(spec, "d", gpath), f"{gpath}.d", 0.0, 1.0, lo_open=True)
        rng = np.random.default_rng(seeds.get(spec, path + ".generator", gpath))
        inner_p = _number(spec.get("inner_p", 0.5), f"{gpath}.inner_p", 0.0, 1.0)
        return uniform_degree_layer((m, m), d, rng, inner_p), Partition.blocks(m, m)
    raise _err(f"{path}.generator", f"unknown generator {gen!r}")


def _build_y0(spec, n: int, part: Optional[Partition], seeds: _Seeds) -> np.ndarray:
    path = "init.y0"
    if isinstance(spec, list):
        return _vector(spec, n, path, -1.0, 1.0)
    if not isinstance(spec, dict):
        raise _err(path, "expected a vector or a distribution object")
    rng = lambda: np.random.default_rng(seeds.get(spec, path, path))  # noqa: E731
    if "normal" in spec:
        d = _get(spec, "normal", path, dict)
        mean = _number(_get(d, "mean", f"{path}.normal"), f"{path}.normal.mean")
        std = _number(_get(d, "std", f"{path}.normal"), f"{path}.normal.std", 0.0)
        return np.clip(rng().normal(mean, std, n), -1.0, 1.0)
    if "uniform" in spec:
        d = _get(spec, "uniform", path, dict)
        lo = _number(_get(d, "low", f"{path}.uniform"), f"{path}.uniform.low", -1.0, 1.0)
        hi = _number(_get(d, "high", f"{path}.uniform"), f"{path}.uniform.high", lo, 1.0)
        return rng().uniform(lo, hi, n)
    if "group_signed" in spec:
        if part is None:
            raise _err(path, "group_signed needs a partition (explicit or from a two-group generator)")
        d = _get(spec, "group_signed", path, dict)
        lo = _number(d.get("low", 0.0), f"{path}.group_signed.low", 0.0, 1.0)
        hi = _number(d.get("high", 1.0), f"{path}.group_signed.high", lo, 1.0)
        mag = rng().uniform(lo, hi, n)
        # a zero draw would leave the agent unsigned
        mag = np.where(mag == 0.0, hi, mag)
        return part.signs(n) * mag
    raise _err(path, "unknown distribution; use normal, uniform or group_signed")


def _build_x0(spec, n: int, y0: np.ndarray, part: Optional[Partition], seeds: _Seeds) -> np.ndarray:
    path = "init.x0"
    if isinstance(spec, list):
        x = np.array([_integer(e, f"{path}[{k + 1}]") for k, e in enumerate(spec)])
        if x.size != n:
            raise _err(path, f"expected {n} entries, got {x.size}")
        if np.any(np.abs(x) != 1):
            raise _err(path, "actions must be -1 or +1")
        return x
    if spec == "partition":
        if part is None:
            raise _err(path, "no partition available")
        return part.signs(n)
    if not isinstance(spec, dict):
        raise _err(path, "expected a vector, 'partition' or a rule object")
    if "sign_of_y0" in spec:
        d = _get(spec, "sign_of_y0", path, dict)
        q = _number(d.get("flip_fraction", 0.0), f"{path}.sign_of_y0.flip_fraction", 0.0, 1.0)
        x = np.where(y0 >= 0, 1, -1)
        k = int(round(q * n))
        if k:
            flip = np.random.default_rng(seeds.get(spec, path, path)).choice(n, size=k, replace=False)
            x[flip] *= -1
        return x
    if "bernoulli" in spec:
        d = _get(spec, "bernoulli", path, dict)
        p = _number(_get(d, "p_plus", f"{path}.bernoulli"), f"{path}.bernoulli.p_plus", 0.0, 1.0)
        rng = np.random.default_rng(seeds.get(spec, path, path))
        return np.where(rng.random(n) < p, 1, -1)
    raise _err(path, "unknown rule; use sign_of_y0, bernoulli or 'partition'")


def _build_params(spec, n: int, y0: np.ndarray) -> GameParams:
    path = "params"
    if not isinstance(spec, dict):
        raise _err(path, "expected an object")
    unknown = set(spec) - {"lambda", "beta", "gamma", "u", "alpha"}
    if unknown:
        raise _err(path, f"unknown fields {sorted(unknown)}")
    lam = _vector(_get(spec, "lambda", path), n, f"{path}.lambda", 0.0, 1.0)
    beta = _vector(_get(spec, "beta", path), n, f"{path}.beta", 0.0, 1.0)
    gamma = _vector(spec.get("gamma", 0.0), n, f"{path}.gamma", 0.0, 1.0)
    u = spec.get("u", 0.0)
    u = y0.copy() if u == "y0" else _vector(u, n, f"{path}.u", -1.0, 1.0)
    alpha = _number(spec.get("alpha", 0.0), f"{path}.alpha", 0.0)
    return GameParams(lam, beta, gamma, u, alpha)


def _build_scheduler(spec, n: int, seeds: _Seeds) -> Scheduler:
    path = "scheduler"
    if not isinstance(spec, dict):
        raise _err(path, "expected an object")
    kind = spec.get("kind", "round_robin")
    window = spec.get("T")
    if window is not None:
        window = _integer(window, f"{path}.T", lo=n)
    if kind == "round_robin":
        return Scheduler("round_robin", n, window=window)
    if kind in ("shuffled_blocks", "uniform_random"):
        return Scheduler(kind, n, seeds.get(spec, path, path), window)
    if kind == "explicit":
        seq = _labels(_get(spec, "sequence", path, list), n, f"{path}.sequence")
        return Scheduler.explicit(n, seq, window)
    raise _err(f"{path}.kind", f"unknown scheduler {kind!r}")


def resolve_seed(cfg: dict, override: Optional[int] = None) -> Optional[int]:
    """``override`` beats ``COEVO_SEED``, which beats the config value."""
    if override is not None:
        return int(override)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    seed = cfg.get("seed")
    return None if seed is None else _integer(seed, "seed", lo=0)


def build_experiment(cfg: dict, base_dir=".", seed: Optional[int] = None) -> Experiment:
    """Validate ``cfg`` and build every object it describes."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level fields {sorted(unknown)}")
    base = Path(base_dir)
    master = resolve_seed(cfg, seed)
    seeds = _Seeds(master)

    netspec = _get(cfg, "network", "config", dict)
    A, part = _build_layer(_get(netspec, "influence", "network"), "network.influence", seeds, base)
    comm = netspec.get("communication", "same")
    if comm == "same":
        W = A
    else:
        W, part_w = _build_layer(comm, "network.communication", seeds, base)
        part = part or part_w
    if A.n != W.n:
        raise _err("network", f"layers have different sizes {A.n} and {W.n}")
    net = TwoLayerNetwork(A, W)
    n = net.n

    if "partition" in cfg:
        pspec = _get(cfg, "partition", "config", dict)
        pos = _labels(_get(pspec, "pos", "partition"), n, "partition.pos")
        neg = _labels(pspec["neg"], n, "partition.neg") if "neg" in pspec else sorted(set(range(n)) - set(pos))
        part = Partition(pos, neg)
        try:
            part.check_covers(n)
        except Exception as exc:
            raise _err("partition", str(exc)) from None

    init = cfg.get("init", {})
    if not isinstance(init, dict):
        raise _err("init", "expected an object")
    y0 = _build_y0(init.get("y0", [0.0] * n), n, part, seeds)
    x0 = _build_x0(init.get("x0", {"sign_of_y0": {}}), n, y0, part, seeds)
    params = _build_params(_get(cfg, "params", "config", dict), n, y0)
    state0 = SystemState(x0, y0)
    scheduler = _build_scheduler(cfg.get("scheduler", {}), n, seeds)

    stop = cfg.get("stop", {})
    max_steps = _integer(stop.get("max_steps", 100_000), "stop.max_steps", lo=scheduler.T)
    tol = _number(stop.get("opinion_tol", 1e-9), "stop.opinion_tol", 0.0, lo_open=True)
    output = cfg.get("output", {})
    out_dir = Path(output.get("dir", "out"))
    thin = _integer(output.get("thin", 1), "output.thin", lo=1)

    groups = {}
    for name, labels in (cfg.get("groups") or {}).items():
        groups[str(name)] = _labels(labels, n, f"groups.{name}")
    if not groups and part is not None:
        groups = {"pos": sorted(part.pos), "neg": sorted(part.neg)}

    return Experiment(net, params, state0, scheduler, part, groups, max_steps, tol, out_dir, thin, master, cfg)


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def load_experiment(path, seed: Optional[int] = None) -> Experiment:
    path = Path(path)
    return build_experiment(load_config(path), path.parent, seed)
