"""Acceptance criteria; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

from coevo.analysis import (
    bipartite_consensus_opinions,
    check_theorem3,
    is_nash,
    is_polarized_wrt,
    opinion_equilibrium,
    polarization_partition,
)
from coevo.dynamics import Scheduler, min_flip_gain, potential, potential_quadratic, run
from coevo.game import GameParams, SystemState, best_response, delta, opinion_anchor, payoff
from coevo.netgraph import Partition, TwoLayerNetwork, gen_two_community, uniform_degree_layer
from coevo.oracle import brute_force_best_response, enumerate_equilibria, find_equilibrium, fixed_point_opinions
from coevo.scenarios import run_scenario

from conftest import random_general_instance, random_symmetric_instance, record_acceptance, two_community_metropolis

# pinned tolerances and budgets
PROP1_PAYOFF_TOL = 1e-6
PROP1_DELTA_MARGIN = 1e-2
GRID_STEP = 1e-3
IDENTITY_TOL = 1e-12
POTENTIAL_TOL = 1e-9
MONOTONE_TOL = 1e-9
RESIDUAL_TOL = 1e-8
SOLVER_TOL = 1e-8
FIXTURE_TOL = 1e-12
CLOSED_FORM_TOL = 1e-8
MATCH_TOL = 1e-8

pytestmark = pytest.mark.slow


def _with_endpoints(rng, params: GameParams) -> GameParams:
    """Pin a few per-agent weights to 0 or 1 so the boundary cases are exercised."""
    n = params.n
    changes = {}
    for name in ("lam", "beta", "gamma"):
        v = np.array(getattr(params, name))
        mask = rng.random(n) < 0.15
        v[mask] = rng.choice([0.0, 1.0], mask.sum())
        changes[name] = v
    return params.replace(**changes)


def _closed_form_strategy(i, state, net, params):
    br = best_response(i, state, net, params)
    if br.kind == "action_only":
        return (br.action or int(state.x[i]), float(state.y[i]))
    s = br.strategies[0]
    return (s.action, s.opinion)


def test_best_response_matches_grid_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_gap, action_mismatch, checked = -np.inf, 0, 0
    for k in range(1000):
        net, params, state = random_general_instance(rng, n_max=20)
        if k % 2:
            params = _with_endpoints(rng, params)
        i = int(rng.integers(state.n))
        cf = _closed_form_strategy(i, state, net, params)
        grid = brute_force_best_response(i, state, net, params, grid_step=GRID_STEP)
        gap = payoff(i, (grid.action, grid.opinion), state, net, params) - payoff(i, cf, state, net, params)
        worst_gap = max(worst_gap, gap)
        d = delta(i, state, net, params)
        if abs(d) > PROP1_DELTA_MARGIN:
            checked += 1
            action_mismatch += int(np.sign(d) != grid.action)
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= PROP1_PAYOFF_TOL and action_mismatch == 0 and elapsed < 30
    record_acceptance(
        "best-response oracle equivalence",
        ok,
        f"max grid-over-closed-form gain {worst_gap:.2e} (tol {PROP1_PAYOFF_TOL}), "
        f"action mismatches {action_mismatch}/{checked}, {elapsed:.1f}s (<30s)",
    )
    assert ok


def test_delta_is_payoff_gap_of_opinion_best_responses():
    rng = np.random.default_rng(202)
    cases = []
    for _ in range(1000):
        net, params, state = random_general_instance(rng, n_max=20)
        n = state.n
        states = [SystemState(rng.choice([-1, 1], n), rng.uniform(-1, 1, n)) for _ in range(10)]
        cases.append((net, params, states, rng.integers(0, n, size=(10, 10))))
    # the clock covers the evaluations only
    t0 = time.perf_counter()
    worst, evals = 0.0, 0
    for net, params, states, agents in cases:
        for state, row in zip(states, agents):
            for i in row:
                i = int(i)
                h = opinion_anchor(i, state.y, net.W, params)
                lam = params.lam[i]
                gap = payoff(i, (1, h + lam), state, net, params) - payoff(i, (-1, h - lam), state, net, params)
                worst = max(worst, abs(gap - delta(i, state, net, params)))
                evals += 1
    elapsed = time.perf_counter() - t0
    ok = evals == 100_000 and worst <= IDENTITY_TOL and elapsed < 10
    record_acceptance("delta payoff-gap identity", ok, f"{evals} evals, max err {worst:.2e} (tol {IDENTITY_TOL}), {elapsed:.1f}s (<10s)")
    assert ok


def test_potential_forms_agree():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        net, params, state = random_symmetric_instance(rng)
        a, b = potential(state, net, params), potential_quadratic(state, net, params)
        worst = max(worst, abs(a - b))
    elapsed = time.perf_counter() - t0
    ok = worst <= POTENTIAL_TOL and elapsed < 30
    record_acceptance("potential cross-form", ok, f"10000 instances, max diff {worst:.2e} (tol {POTENTIAL_TOL}), {elapsed:.1f}s (<30s)")
    assert ok


@pytest.fixture(scope="module")
def potential_runs():
    rng = np.random.default_rng(404)
    out = []
    t0 = time.perf_counter()
    for _ in range(200):
        net, params, state = random_symmetric_instance(rng, n_max=15)
        traj, rep = run(state, Scheduler.round_robin(state.n), net, params, max_steps=200_000, opinion_tol=1e-10)
        out.append((net, params, traj, rep))
    return out, time.perf_counter() - t0


def test_potential_monotone_and_flip_budget(potential_runs):
    runs, elapsed = potential_runs
    worst_drop, worst_flip_slack, budget_violations = 0.0, np.inf, 0
    for net, params, traj, rep in runs:
        phi = np.array(traj.potentials())
        steps = np.diff(phi)
        worst_drop = min(worst_drop, steps.min(initial=0.0))
        c = min_flip_gain(net, params)
        flips = np.array([r.action_flipped for r in traj.records])
        if flips.any():
            worst_flip_slack = min(worst_flip_slack, float((steps[flips] - c).min()))
        if c > 0 and rep.flips_total > (phi.max() - phi.min()) / c + 1e-9:
            budget_violations += 1
    ok = worst_drop >= -MONOTONE_TOL and worst_flip_slack > -MONOTONE_TOL and budget_violations == 0 and elapsed < 120
    record_acceptance(
        "potential monotonicity and flip gain",
        ok,
        f"200 runs, worst step {worst_drop:.2e}, min(flip gain - c) {worst_flip_slack:.2e}, "
        f"budget violations {budget_violations}, {elapsed:.1f}s (<120s)",
    )
    assert ok


def test_potential_game_runs_converge_to_nash(potential_runs):
    runs, _ = potential_runs
    converged = nash = 0
    worst = 0.0
    for net, params, traj, rep in runs:
        converged += rep.converged
        y_star = opinion_equilibrium(traj.final.x, net, params).y_star
        worst = max(worst, float(np.max(np.abs(traj.final.y - y_star))))
        nash += is_nash(traj.final, net, params)
    ok = converged == 200 and nash == 200 and worst < RESIDUAL_TOL
    record_acceptance(
        "convergence to Nash equilibrium",
        ok,
        f"converged {converged}/200, Nash {nash}/200, max residual {worst:.2e} (tol {RESIDUAL_TOL})",
    )
    assert ok


def test_opinion_solver_agreement(pair_net, pair_params):
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1000):
        if k % 2:
            net, params, state = random_symmetric_instance(rng)
        else:
            net, params, state = random_general_instance(rng, n_max=20)
            params = params.replace(lam=np.maximum(params.lam, 0.05), beta=np.maximum(params.beta, 0.05))
        direct = opinion_equilibrium(state.x, net, params).y_star
        it = fixed_point_opinions(state.x, state.y, net, params, tol=1e-13)
        worst = max(worst, float(np.max(np.abs(direct - it))))
    fixture = opinion_equilibrium([1, 1], pair_net, pair_params).y_star
    fixture_err = float(np.max(np.abs(fixture - 5 / 6)))
    elapsed = time.perf_counter() - t0
    ok = worst <= SOLVER_TOL and fixture_err <= FIXTURE_TOL and elapsed < 20
    record_acceptance(
        "opinion equilibrium solver agreement",
        ok,
        f"1000 instances, max diff {worst:.2e} (tol {SOLVER_TOL}), fixture err {fixture_err:.1e}, {elapsed:.1f}s (<20s)",
    )
    assert ok


def test_uniform_degree_closed_form():
    t0 = time.perf_counter()
    worst, polarized, total = 0.0, 0, 0
    for d in (0.6, 0.7, 0.8, 0.9):
        for lam in (0.3, 0.6, 0.9):
            total += 1
            lay = uniform_degree_layer((6, 6), d, np.random.default_rng(int(100 * d + 10 * lam)))
            part = Partition.blocks(6, 6)
            signs = part.signs(12)
            net = TwoLayerNetwork.coincident(lay)
            params = GameParams.uniform(12, lam, 0.05)
            traj, rep = run(SystemState(signs, 0.5 * signs), Scheduler.round_robin(12), net, params, opinion_tol=1e-12)
            if rep.converged and is_polarized_wrt(traj.final, part):
                polarized += 1
                yp, ym = bipartite_consensus_opinions(lam, d)
                target = np.where(signs > 0, yp, ym)
                worst = max(worst, float(np.max(np.abs(traj.final.y - target))))
    elapsed = time.perf_counter() - t0
    ok = polarized == total and worst <= CLOSED_FORM_TOL and elapsed < 60
    record_acceptance(
        "uniform-degree polarized opinions",
        ok,
        f"{polarized}/{total} polarized, max err {worst:.2e} (tol {CLOSED_FORM_TOL}), {elapsed:.1f}s (<60s)",
    )
    assert ok


def _invariance_instance(rng):
    while True:
        m1, m2 = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        if rng.random() < 0.5:
            lay = two_community_metropolis(rng, m1, m2, int(rng.integers(1, 3)), inner_p=0.7)
        else:
            lay = gen_two_community((m1, m2), float(rng.uniform(0.4, 1.0)), int(rng.integers(1, 3)), int(rng.integers(2**31)))
        part = Partition.blocks(m1, m2)
        lam, beta = float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95))
        if check_theorem3(lay, part, lam, beta).holds:
            return lay, part, lam, beta


def test_polarization_invariance():
    rng = np.random.default_rng(606)
    t0 = time.perf_counter()
    stayed = ended = 0
    for k in range(100):
        lay, part, lam, beta = _invariance_instance(rng)
        n = part.n
        signs = part.signs(n)
        state = SystemState(signs, signs * rng.uniform(1e-3, 1.0, n))
        net = TwoLayerNetwork.coincident(lay)
        params = GameParams.uniform(n, lam, beta)
        seed = int(rng.integers(2**31))
        sched = (Scheduler.round_robin(n), Scheduler.shuffled_blocks(n, seed), Scheduler.uniform_random(n, seed))[k % 3]
        traj, rep = run(state, sched, net, params, max_steps=200_000, opinion_tol=1e-10)
        stayed += all(is_polarized_wrt(r.state_after, part) for r in traj.records)
        ended += rep.converged and polarization_partition(traj.final).state_polarized and is_nash(traj.final, net, params)
    elapsed = time.perf_counter() - t0
    ok = stayed == 100 and ended == 100 and elapsed < 120
    record_acceptance(
        "polarization invariance",
        ok,
        f"stayed polarized {stayed}/100, polarized Nash endpoint {ended}/100, {elapsed:.1f}s (<120s)",
    )
    assert ok


def test_two_community_example_shipped_seed():
    exp, traj, summary, _ = run_scenario("polarization")
    rep = summary.report
    part = exp.partition
    at_150 = traj.records[149].state_after if len(traj.records) >= 150 else traj.final
    ok = (
        not is_polarized_wrt(traj.initial, part)
        and rep.converged
        and rep.tau_action <= 150
        and is_polarized_wrt(traj.final, part)
        and is_polarized_wrt(at_150, part)
        and is_nash(traj.final, exp.net, exp.params)
    )
    record_acceptance(
        "two-community example, shipped seed",
        ok,
        f"seed {exp.seed}, converged {rep.converged}, tau {rep.tau_action} (<=150), polarized {is_polarized_wrt(traj.final, part)}",
    )
    assert ok


def test_two_community_example_seed_sweep():
    t0 = time.perf_counter()
    hits = 0
    for seed in range(20):
        exp, traj, summary, _ = run_scenario("polarization", seed=seed)
        rep = summary.report
        hits += rep.converged and rep.tau_action <= 500 and is_polarized_wrt(traj.final, exp.partition)
    elapsed = time.perf_counter() - t0
    ok = hits >= 16
    record_acceptance("two-community example, 20-seed sweep", ok, f"{hits}/20 polarized within 500 steps (>=16), {elapsed:.1f}s")
    assert ok


def _male_dominates(name, seed):
    _, _, summary, _ = run_scenario(name, seed=seed)
    g = summary.groups
    return summary.report.converged and g["male"]["opinion_displacement_toward_norm"] > g["female"]["opinion_displacement_toward_norm"]


def test_pluralistic_ignorance_ordering():
    t0 = time.perf_counter()
    main = sum(_male_dominates("pluralistic-ignorance", s) for s in range(20))
    control = sum(_male_dominates("pluralistic-ignorance-control", s) for s in range(20))
    elapsed = time.perf_counter() - t0
    ok = main >= 18 and control <= 13 and elapsed < 120
    record_acceptance(
        "pluralistic-ignorance ordering",
        ok,
        f"male > female toward norm in {main}/20 (>=18), control {control}/20 (<=13), {elapsed:.1f}s (<120s)",
    )
    assert ok


def test_enumeration_contains_simulation_endpoints():
    rng = np.random.default_rng(707)
    t0 = time.perf_counter()
    found = endpoints = 0
    for k in range(50):
        if k % 5 == 4:
            net, params, state = random_general_instance(rng, n_max=10)
            params = params.replace(lam=np.maximum(params.lam, 0.05), beta=np.maximum(params.beta, 0.05))
        else:
            net, params, state = random_symmetric_instance(rng, n_max=10)
        traj, rep = run(state, Scheduler.round_robin(state.n), net, params, max_steps=50_000, opinion_tol=1e-11)
        if not rep.converged:
            continue
        endpoints += 1
        found += find_equilibrium(enumerate_equilibria(net, params), traj.final, tol=MATCH_TOL) is not None
    elapsed = time.perf_counter() - t0
    ok = endpoints >= 40 and found == endpoints and elapsed < 180
    record_acceptance(
        "enumeration soundness",
        ok,
        f"{found}/{endpoints} converged endpoints enumerated (of 50 runs), {elapsed:.1f}s (<180s)",
    )
    assert ok
