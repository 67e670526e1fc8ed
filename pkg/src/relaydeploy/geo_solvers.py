"""Solvers for deployment along a line of geometric length, no backtracking.

State is the distance r walked past the previous node plus the shadowing
just measured there. Instead of iterating over the full (r, w) state space
we iterate the reduced quantities the Bellman equation actually couples:
the per-offset expected values V(r) for r in A+1..A+B and the fresh-node
value V(0), which is a deterministic geometric-tail functional of V(A+1).

Sum objective: each relay pays its own transmit power. Max objective: the
network pays only the maximum power used, so the state carries the largest
power committed so far and a placement only pays the increase, which we
account for lazily through the line-end scores (costs.LinkCostTables.lh)
and the V(0; gamma_max) table.
"""

from dataclasses import dataclass

import numpy as np

from .channel import outage_probability, min_power_cost
from .costs import link_cost_tables, end_weights


@dataclass(frozen=True, eq=False)
class GeoSumPolicy:
    v_r: np.ndarray    # (B,) V(r) for r = A+1..A+B
    v_zero: float      # V(0), the total expected cost from a fresh node
    c_th: np.ndarray   # (B-1,) placement thresholds for r = A+1..A+B-1
    iterations: int
    residual: float
    converged: bool
    tol: float
    channel: object
    pmf: object
    dep: object

    @property
    def variant(self):
        return "geo-sum"


@dataclass(frozen=True, eq=False)
class GeoMaxPolicy:
    v_r_g: np.ndarray     # (B, M+1) V(r, gamma_max) with level 0 = none yet
    v_zero_g: np.ndarray  # (M+1,) V(0; gamma_max)
    c_th_g: np.ndarray    # (B-1, M+1) thresholds
    iterations: int
    residual: float
    converged: bool
    tol: float
    channel: object
    pmf: object
    dep: object

    @property
    def variant(self):
        return "geo-max"


@dataclass(frozen=True)
class PlacementDecision:
    place: bool
    gamma: float = None  # mW, present iff place


def _check_geo_dep(dep):
    if not (0 < dep.theta < 1):
        raise ValueError("geometric-line solvers need 0 < theta < 1")


def solve_geo_sum(channel, pmf, dep, tol=1e-10, max_iter=10000):
    """Value iteration on (V(A+1..A+B), V(0)) from zero for the sum-power
    objective. Iterates are nondecreasing (stage costs are nonnegative),
    so sup-norm change below tol is a clean stopping rule. tol=0 disables
    the stopping rule and runs exactly max_iter sweeps."""
    _check_geo_dep(dep)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    t = link_cost_tables(channel, pmf, dep)
    A, B, AB, th = dep.A, dep.B, dep.window_end, dep.theta
    head = end_weights(th, A + 1)      # line ends k steps from a fresh node
    tail = (1.0 - th) ** (A + 1)
    probs = pmf.probs

    v = np.zeros(B)
    v0 = 0.0
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v_new = np.empty(B)
        v_new[-1] = t.eq[AB - 1] + dep.xi_r + v0
        if B > 1:
            place = t.q[A:AB - 1, :] + dep.xi_r + v0
            cont = th * t.eq[A + 1:AB] + (1.0 - th) * v[1:]
            v_new[:-1] = np.minimum(place, cont[:, None]) @ probs
        v0_new = head @ t.eq[:A + 1] + tail * v_new[0]
        residual = max(np.max(np.abs(v_new - v)), abs(v0_new - v0))
        v, v0 = v_new, v0_new
        if residual < tol:
            break
    converged = bool(residual < tol)

    # threshold for r < A+B: place iff q(r, w) <= continuation - place overhead
    c_th = th * t.eq[A + 1:AB] + (1.0 - th) * v[1:] - (dep.xi_r + v0)
    return GeoSumPolicy(v_r=v, v_zero=float(v0), c_th=c_th,
                        iterations=iterations, residual=float(residual),
                        converged=converged, tol=tol,
                        channel=channel, pmf=pmf, dep=dep)


def solve_geo_max(channel, pmf, dep, tol=1e-10, max_iter=10000):
    """Same reduced iteration, max-power objective: tables indexed by the
    committed power level m (0 = none). A placement with power level j
    moves the committed level to max(j, m); the relay's own power is paid
    at the end of the line through the lh scores. tol=0 disables the
    stopping rule and runs exactly max_iter sweeps."""
    _check_geo_dep(dep)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    t = link_cost_tables(channel, pmf, dep)
    A, B, AB, th = dep.A, dep.B, dep.window_end, dep.theta
    M = len(dep.powers)
    head = end_weights(th, A + 1)
    tail = (1.0 - th) ** (A + 1)
    probs = pmf.probs
    lvl = np.arange(1, M + 1)

    v = np.zeros((B, M + 1))
    v0 = np.zeros(M + 1)
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v_new = np.empty_like(v)
        v0_new = np.empty_like(v0)
        for m in range(M + 1):
            v0_eff = v0[np.maximum(lvl, m)]                     # (M,)
            place = np.min(dep.xi_o * t.pout[A:AB] + dep.xi_r + v0_eff,
                           axis=2)                               # (B, |W|)
            v_new[-1, m] = place[-1] @ probs
            if B > 1:
                cont = th * t.lh[A + 1:AB, m] + (1.0 - th) * v[1:, m]
                v_new[:-1, m] = np.minimum(place[:-1], cont[:, None]) @ probs
        v0_new = head @ t.lh[:A + 1, :] + tail * v_new[0, :]
        residual = max(np.max(np.abs(v_new - v)), np.max(np.abs(v0_new - v0)))
        v, v0 = v_new, v0_new
        if residual < tol:
            break
    converged = bool(residual < tol)

    c_th_g = (th * t.lh[A + 1:AB, :] + (1.0 - th) * v[1:, :]) - dep.xi_r
    return GeoMaxPolicy(v_r_g=v, v_zero_g=v0, c_th_g=c_th_g,
                        iterations=iterations, residual=float(residual),
                        converged=converged, tol=tol,
                        channel=channel, pmf=pmf, dep=dep)


def _power_level(dep, gamma_max):
    """Map a committed power in mW (0 = none) to its level index."""
    if gamma_max in (None, 0, 0.0):
        return 0
    powers = np.asarray(dep.powers)
    j = int(np.searchsorted(powers, gamma_max))
    if j >= len(powers) or powers[j] != gamma_max:
        raise ValueError("gamma_max %r is not in the power set" % (gamma_max,))
    return j + 1


def decide_geo(policy, r, w, gamma_max=None):
    """Placement decision at offset r from the previous node, having just
    measured shadowing w there. w may fall off the quantization grid (field
    measurements are continuous); scores are recomputed from the channel
    model, only the thresholds come from the solved tables."""
    dep = policy.dep
    if not (dep.A + 1 <= r <= dep.window_end):
        raise ValueError("r=%d outside the decision window" % r)
    powers = np.asarray(dep.powers)

    if isinstance(policy, GeoSumPolicy):
        gamma, score = min_power_cost(policy.channel, r, dep.delta_m, w,
                                      powers, dep.xi_o)
        if r == dep.window_end or score <= policy.c_th[r - dep.A - 1]:
            return PlacementDecision(True, gamma)
        return PlacementDecision(False)

    if isinstance(policy, GeoMaxPolicy):
        m = _power_level(dep, gamma_max)
        pout = outage_probability(policy.channel, r, dep.delta_m, powers, w)
        lvl = np.maximum(np.arange(1, len(powers) + 1), m)
        scores = dep.xi_o * pout + policy.v_zero_g[lvl]
        j = int(np.argmin(scores))
        if r == dep.window_end or scores[j] <= policy.c_th_g[r - dep.A - 1, m]:
            return PlacementDecision(True, float(powers[j]))
        return PlacementDecision(False)

    raise TypeError("decide_geo needs a GeoSumPolicy or GeoMaxPolicy")


def last_hop_power(policy_or_dep, channel, r, w, gamma_max=None):
    """Power for the final link to the source. Sum objectives just minimize
    gamma + xi_o * P_out; max objectives minimize the committed-power
    increase max(gamma, gamma_max) + xi_o * P_out."""
    dep = policy_or_dep if hasattr(policy_or_dep, "powers") else policy_or_dep.dep
    powers = np.asarray(dep.powers)
    pout = outage_probability(channel, r, dep.delta_m, powers, w)
    if gamma_max is None:
        cost = powers + dep.xi_o * pout
    else:
        cost = np.maximum(powers, gamma_max) + dep.xi_o * pout
    j = int(np.argmin(cost))
    return float(powers[j]), float(pout[j])
