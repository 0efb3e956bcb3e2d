"""Brute-force validators for the closed forms.

Nothing here uses the closed-form best response or the linear solve, except
:func:`enumerate_equilibria`, which pairs the solve with the Nash test for
each of the 2^n action vectors.
"""

from __future__ import annotations

import itertools
import json
import math

import numpy as np

from .analysis import TIE_TOL, is_nash, opinion_equilibrium
from .errors import InvalidGridStep, MaxIterExceeded, TooLarge
from .game import GameParams, Strategy, SystemState, delta_all, payoff
from .netgraph import TwoLayerNetwork

MAX_ENUMERATION_N = 16


def opinion_grid(grid_step: float) -> np.ndarray:
    if not 0 < grid_step <= 0.1:
        raise InvalidGridStep(f"grid_step must lie in (0, 0.1], got {grid_step}")
    k = int(math.floor(2.0 / grid_step + 1e-9))
    grid = -1.0 + grid_step * np.arange(k + 1)
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    return np.clip(grid, -1.0, 1.0)


def brute_force_best_response(i: int, state: SystemState, net: TwoLayerNetwork, params: GameParams, grid_step: float = 1e-3) -> Strategy:
    """Maximise the payoff over {-1, +1} x grid.

    Ties go to action +1, then to the smaller opinion.
    """
    grid = opinion_grid(grid_step)
    best = None
    for a in (1, -1):
        vals = payoff(i, (a, grid), state, net, params)
        k = int(np.argmax(vals))
        if best is None or vals[k] > best[0]:
            best = (vals[k], a, grid[k])
    return Strategy(best[1], float(best[2]))


def fixed_point_opinions(x_star, y0, net: TwoLayerNetwork, params: GameParams, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Synchronous opinion iteration with frozen actions.

    Stops when the sup-norm change drops below ``tol``. Agents with
    beta_i = 0 keep their ``y0`` entry.
    """
    x = np.asarray(x_star, dtype=float)
    y = np.array(y0, dtype=float)
    y_keep = y.copy()
    keep = params.beta == 0
    lam, g, u = params.lam, params.gamma, params.prejudice
    W = net.W
    for _ in range(max_iter):
        y_new = (1.0 - lam) * ((1.0 - g) * (W @ y) + g * u) + lam * x
        y_new[keep] = y_keep[keep]
        change = np.max(np.abs(y_new - y))
        y = y_new
        if change < tol:
            return y
    raise MaxIterExceeded(f"no convergence within {max_iter} iterations (last change {change:.3g})")


def contraction_iteration_bound(tol: float, rho: float, initial_error: float) -> int:
    """Iterations after which a modulus-``rho`` contraction has moved less than ``tol``."""
    if initial_error <= 0:
        return 1
    return max(1, math.ceil(math.log(tol * (1 - rho) / initial_error) / math.log(rho)) + 1)


def enumerate_equilibria(net: TwoLayerNetwork, params: GameParams, y0_for_frozen=None) -> list:
    """All Nash equilibria, one candidate per action vector.

    Returns a list of ``(x, y, strict)``; ``strict`` is false when some agent
    sits on a delta = 0 tie.
    """
    n = net.n
    if n > MAX_ENUMERATION_N:
        raise TooLarge(f"enumeration is capped at n = {MAX_ENUMERATION_N}, got {n}")
    out = []
    for bits in itertools.product((1, -1), repeat=n):
        x = np.array(bits, dtype=np.int64)
        y = opinion_equilibrium(x, net, params, y0_for_frozen).y_star
        state = SystemState(x, y)
        if is_nash(state, net, params):
            strict = bool(np.all(np.abs(delta_all(state, net, params)) > TIE_TOL))
            out.append((x, np.array(y), strict))
    return out


def equilibria_to_json(eqs) -> str:
    return json.dumps([{"x": [int(v) for v in x], "y": [float(v) for v in y], "strict": strict} for x, y, strict in eqs])


def find_equilibrium(eqs, state: SystemState, tol: float = 1e-8):
    """Index of the enumerated equilibrium matching ``state``, or None."""
    for k, (x, y, _) in enumerate(eqs):
        if np.array_equal(x, state.x) and np.max(np.abs(y - state.y)) <= tol:
            return k
    return None
