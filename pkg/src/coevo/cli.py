"""Command-line entry point: ``coevo validate|simulate|scenario|analyze``.

Exit codes: 0 success (and convergence, for runs), 1 error, 2 a run hit
``max_steps`` without converging.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (
    check_theorem2,
    check_theorem3,
    is_polarized_wrt,
    nash_violations,
    opinion_equilibrium,
    polarization_partition,
)
from .config import Experiment, build_experiment, load_config, resolve_seed
from .dynamics import potential_trackable
from .errors import CoevoError, ConfigError
from .game import SystemState
from .netgraph import Partition, validate_layer
from .oracle import enumerate_equilibria
from .scenarios import SCENARIOS, group_means, run_experiment, scenario_config, summarize

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _dump(obj, path: Optional[Path] = None) -> str:
    text = json.dumps(obj, indent=2) + "\n"
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def _state_dict(state: SystemState) -> dict:
    return {"x": [int(v) for v in state.x], "y": [float(v) for v in state.y]}


def _read_state(path) -> SystemState:
    try:
        with open(path) as f:
            d = json.load(f)
        return SystemState(d["x"], d["y"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"{path}: cannot read state ({exc})") from None


def _read_partition(path, n: int) -> Partition:
    try:
        with open(path) as f:
            d = json.load(f)
        pos = [int(k) - 1 for k in d["pos"]]
        neg = [int(k) - 1 for k in d["neg"]] if "neg" in d else sorted(set(range(n)) - set(pos))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot read partition ({exc})") from None
    part = Partition(pos, neg)
    part.check_covers(n)
    return part


# --- validate ---------------------------------------------------------------


def validation_report(exp: Experiment) -> dict:
    net, params = exp.net, exp.params
    a_rep = validate_layer(net.influence)
    w_rep = validate_layer(net.communication)
    details = {
        "influence_symmetric": a_rep["symmetric"].passed,
        "communication_symmetric": w_rep["symmetric"].passed,
        "influence_self_loops": a_rep["self_loops"].passed,
        "missing_self_loops": [k + 1 for k in a_rep["self_loops"].offending],
    }
    return {
        "n": net.n,
        "ok": a_rep.ok and w_rep.ok,
        "influence": a_rep.as_dict(),
        "communication": w_rep.as_dict(),
        "single_layer": bool(np.array_equal(net.A, net.W)),
        "assumption1_compliant": bool(net.assumption1_compliant),
        "assumption1_details": details,
        "params_homogeneous": bool(params.homogeneous),
        "potential_trackable": bool(potential_trackable(net, params)),
    }


def cmd_validate(exp: Experiment, out: Optional[Path]) -> int:
    rep = validation_report(exp)
    sys.stdout.write(_dump(rep, out / "validation.json" if out else None))
    return EXIT_OK if rep["ok"] else EXIT_ERROR


# --- simulate / scenario ----------------------------------------------------


def _require_valid(exp: Experiment) -> None:
    for name, layer in (("influence", exp.net.influence), ("communication", exp.net.communication)):
        rep = validate_layer(layer)
        if not rep.ok:
            raise ConfigError(f"{name} layer fails validation: {', '.join(rep.violations)}")


def _run_and_write(exp: Experiment, out: Path, scenario: Optional[str]) -> dict:
    _require_valid(exp)
    traj, report = run_experiment(exp)
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv")
    violations = nash_violations(traj.final, exp.net, exp.params)
    result = report.as_dict()
    result["seed"] = exp.seed
    result["polarization"] = polarization_partition(traj.final).as_dict()
    if exp.partition is not None:
        result["polarized_wrt_partition"] = is_polarized_wrt(traj.final, exp.partition)
    result["is_nash"] = not violations
    result["final_state"] = _state_dict(traj.final)
    _dump(result, out / "report.json")
    if scenario is not None:
        summary = summarize(exp, traj, report, scenario)
        summary.to_json(out / "summary.json")
        group_means(traj, exp.groups, exp.thin).to_csv(out / "group_means.csv")
        return summary.as_dict()
    return result


def _replicate_job(args) -> dict:
    cfg, base_dir, seed, out, scenario = args
    exp = build_experiment(cfg, base_dir, seed)
    return _run_and_write(exp, Path(out), scenario)


def _converged(d: dict) -> bool:
    return bool(d["report"]["converged"] if "report" in d else d["converged"])


def run_command(cfg: dict, base_dir: Path, out: Path, seed: Optional[int], replicates: int, scenario: Optional[str]) -> int:
    if replicates < 1:
        raise ConfigError("--replicates must be >= 1")
    if replicates == 1:
        exp = build_experiment(cfg, base_dir, seed)
        result = _run_and_write(exp, out, scenario)
        sys.stdout.write(_dump(result if scenario else {k: v for k, v in result.items() if k != "final_state"}))
        return EXIT_OK if _converged(result) else EXIT_NOT_CONVERGED

    base = resolve_seed(cfg, seed)
    if base is None:
        raise ConfigError("--replicates needs a seed (config, COEVO_SEED or --seed)")
    # validate once up front so errors surface before any worker starts
    build_experiment(cfg, base_dir, base)
    jobs = [(cfg, str(base_dir), base + k, str(out / f"rep_{k:03d}"), scenario) for k in range(replicates)]
    with ProcessPoolExecutor() as pool:
        results = list(pool.map(_replicate_job, jobs))
    summary = {
        "replicates": replicates,
        "seeds": [base + k for k in range(replicates)],
        "converged": sum(_converged(r) for r in results),
        "runs": results,
    }
    if scenario is None:
        summary["polarized"] = sum(bool(r["polarization"]["state_polarized"]) for r in results)
    _dump(summary, out / "replicates.json")
    sys.stdout.write(_dump({k: v for k, v in summary.items() if k != "runs"}))
    return EXIT_OK if summary["converged"] == replicates else EXIT_NOT_CONVERGED


# --- analyze ----------------------------------------------------------------


def _single_layer_params(exp: Experiment) -> tuple:
    p = exp.params
    if not p.homogeneous:
        raise ConfigError("polarization conditions need homogeneous lambda and beta")
    return float(p.lam[0]), float(p.beta[0])


def analyze(what: str, exp: Experiment, state_path, partition_path) -> dict:
    if what == "equilibrium":
        x = _read_state(state_path).x if state_path else exp.state0.x
        res = opinion_equilibrium(x, exp.net, exp.params, exp.state0.y)
        return {"x": [int(v) for v in x], "y_star": [float(v) for v in res.y_star], "residual": res.residual, "solver_note": res.solver_note}
    if what == "nash":
        state = _read_state(state_path) if state_path else exp.state0
        v = nash_violations(state, exp.net, exp.params)
        return {"is_nash": not v, "violations": [{"agent": e.agent + 1, "reason": e.reason} for e in v]}
    if what == "polarization-check":
        part = _read_partition(partition_path, exp.net.n) if partition_path else exp.partition
        if part is None:
            raise ConfigError("no partition: pass --partition or use a two-group generator")
        lam, beta = _single_layer_params(exp)
        scope = {
            "single_layer": bool(np.array_equal(exp.net.A, exp.net.W)),
            "alpha_zero": exp.params.alpha == 0,
            "gamma_zero": bool(np.all(exp.params.gamma == 0)),
        }
        w = exp.net.communication
        return {
            "partition": {"pos": sorted(k + 1 for k in part.pos), "neg": sorted(k + 1 for k in part.neg)},
            "scope": scope,
            "existence": check_theorem2(w, part, lam, beta).as_dict(),
            "invariance": check_theorem3(w, part, lam, beta).as_dict(),
        }
    if what == "enumerate":
        eqs = enumerate_equilibria(exp.net, exp.params, exp.state0.y)
        return {
            "count": len(eqs),
            "equilibria": [{"x": [int(v) for v in x], "y": [float(v) for v in y], "strict": s} for x, y, s in eqs],
        }
    raise ConfigError(f"unknown analysis {what!r}")


# --- parser -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; exit code 2 is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="coevo", description="Coevolutionary action-opinion dynamics on two-layer networks.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides COEVO_SEED and the config)")

    p = sub.add_parser("validate", help="check both layers and report assumption compliance")
    common(p)
    p = sub.add_parser("simulate", help="run best-response dynamics from a config")
    common(p)
    p.add_argument("--replicates", type=int, default=1, help="independent seeded runs, executed concurrently")
    p = sub.add_parser("scenario", help="run a built-in scenario")
    p.add_argument("name", help=f"one of {', '.join(sorted(SCENARIOS))}")
    common(p, config_required=False)
    p.add_argument("--replicates", type=int, default=1)
    p = sub.add_parser("analyze", help="equilibrium, Nash and polarization analyses")
    p.add_argument("what", choices=["equilibrium", "nash", "polarization-check", "enumerate"])
    common(p)
    p.add_argument("--state", help="state JSON {x: [...], y: [...]}; defaults to the config's initial state")
    p.add_argument("--partition", help="partition JSON {pos: [...], neg: [...]} with 1-based labels")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = Path(args.out) if args.out else None
        if args.command == "scenario":
            overrides = load_config(args.config) if args.config else None
            cfg = scenario_config(args.name, overrides)
            base = Path(args.config).parent if args.config else Path(".")
            out = out or Path(cfg["output"]["dir"])
            return run_command(cfg, base, out, args.seed, args.replicates, args.name)
        cfg = load_config(args.config)
        base = Path(args.config).parent
        if args.command == "simulate":
            out = out or Path(cfg.get("output", {}).get("dir", "out"))
            return run_command(cfg, base, out, args.seed, args.replicates, None)
        exp = build_experiment(cfg, base, args.seed)
        if args.command == "validate":
            return cmd_validate(exp, out)
        result = analyze(args.what, exp, args.state, args.partition)
        sys.stdout.write(_dump(result, out / f"{args.what}.json" if out else None))
        return EXIT_OK
    except (CoevoError, ValueError, OSError) as exc:
        print(f"coevo: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
