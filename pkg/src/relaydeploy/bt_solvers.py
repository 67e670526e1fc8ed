"""Solvers for the geometric-length line with backtracking: measure all B
candidate offsets, walk back to the best one, place, continue.

The decision state is the whole measured window, |W|^B vectors, but the
chosen-offset scores are independent across offsets, so the expectation of
their minimum is computed exactly from per-offset marginals (survival
function products over the merged support). That keeps one iteration at
O(B * |W| log) instead of |W|^B.

State bookkeeping after placing at offset u: the walk already covered
A+B - u steps past the new node, written z, and no measurements are
pending; J(z; 0) is a geometric-tail functional of the window value, so
only one scalar per committed-power level gets iterated.
"""

from dataclasses import dataclass

import numpy as np

from .channel import outage_probability
from .costs import link_cost_tables, end_weights


def expected_min_independent(dists):
    """Exact E[min_i X_i] for independent discrete X_i.

    dists is a list of (values, probs) pairs. Merges supports, multiplies
    per-distribution survival functions P(X_i >= v), and sums the implied
    pmf of the minimum.
    """
    if len(dists) == 0:
        raise ValueError("need at least one distribution")
    cleaned = []
    for values, probs in dists:
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.shape != probs.shape or values.ndim != 1:
            raise ValueError("each distribution needs matching 1-d arrays")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("distribution mass must be 1")
        cleaned.append((values, probs))

    merged = np.unique(np.concatenate([v for v, _ in cleaned]))
    survival = np.ones_like(merged)
    for values, probs in cleaned:
        order = np.argsort(values, kind="stable")
        sv = values[order]
        # tail[k] = P(X >= sv[k]); append 0 for queries past the end
        tail = np.concatenate([np.cumsum(probs[order][::-1])[::-1], [0.0]])
        survival *= tail[np.searchsorted(sv, merged, side="left")]
    pmf_min = survival - np.append(survival[1:], 0.0)
    return float(merged @ pmf_min)


@dataclass(frozen=True, eq=False)
class BtSumPolicy:
    j_z: np.ndarray   # (B,) J(z; 0) for z = 0..B-1 steps already covered
    v_bar: float      # expected window value E J(w-vector)
    iterations: int
    residual: float
    converged: bool
    tol: float
    channel: object
    pmf: object
    dep: object

    @property
    def variant(self):
        return "bt-sum"


@dataclass(frozen=True, eq=False)
class BtMaxPolicy:
    j_z_g: np.ndarray   # (B, M+1) J(z; 0; gamma_max)
    v_bar_g: np.ndarray  # (M+1,) E J(w-vector; gamma_max)
    iterations: int
    residual: float
    converged: bool
    tol: float
    channel: object
    pmf: object
    dep: object

    @property
    def variant(self):
        return "bt-max"


@dataclass(frozen=True)
class BtDecision:
    u: int        # chosen offset, A+1..A+B
    gamma: float  # mW


def _geom_tail_weights(dep):
    """For each z = 0..B-1: the within-tail end weights G (line ends during
    the remaining A+B-z steps) as a matrix row, and the survival factor
    (1-theta)^(A+B-z)."""
    A, B, AB, th = dep.A, dep.B, dep.window_end, dep.theta
    G = np.zeros((B, AB))  # G[z, k-1] weights eq[z+k] for k = 1..AB-z
    for z in range(B):
        n = AB - z
        G[z, :n] = end_weights(th, n)
    surv = (1.0 - th) ** (AB - np.arange(B))
    return G, surv


def solve_bt_sum(channel, pmf, dep, tol=1e-10, max_iter=10000):
    """Iterate the expected window value v_bar from zero; J(z;0) follows
    from v_bar in closed form each round."""
    if not (0 < dep.theta < 1):
        raise ValueError("backtracking solvers need 0 < theta < 1")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    t = link_cost_tables(channel, pmf, dep)
    A, B, AB = dep.A, dep.B, dep.window_end
    G, surv = _geom_tail_weights(dep)
    g_const = np.array([G[z, :AB - z] @ t.eq[z:AB] for z in range(B)])

    v_bar = 0.0
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        j_z = g_const + surv * v_bar
        dists = [(dep.xi_r + t.q[u - 1, :] + j_z[AB - u], pmf.probs)
                 for u in range(A + 1, AB + 1)]
        v_new = expected_min_independent(dists)
        residual = abs(v_new - v_bar)
        v_bar = v_new
        if residual < tol:
            break
    converged = bool(residual < tol)
    j_z = g_const + surv * v_bar
    return BtSumPolicy(j_z=j_z, v_bar=float(v_bar), iterations=iterations,
                       residual=float(residual), converged=converged, tol=tol,
                       channel=channel, pmf=pmf, dep=dep)


def solve_bt_max(channel, pmf, dep, tol=1e-10, max_iter=10000):
    """Max-power version: one expected window value per committed power
    level; a placement at power level j sends the continuation to level
    max(j, m), so the slices couple through the previous iterate."""
    if not (0 < dep.theta < 1):
        raise ValueError("backtracking solvers need 0 < theta < 1")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    t = link_cost_tables(channel, pmf, dep)
    A, B, AB = dep.A, dep.B, dep.window_end
    M = len(dep.powers)
    G, surv = _geom_tail_weights(dep)
    g_const = np.zeros((B, M + 1))
    for m in range(M + 1):
        g_const[:, m] = [G[z, :AB - z] @ t.lh[z:AB, m] for z in range(B)]
    lvl = np.arange(1, M + 1)

    v_bar = np.zeros(M + 1)
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        j_z = g_const + surv[:, None] * v_bar[None, :]
        v_new = np.empty(M + 1)
        for m in range(M + 1):
            dists = []
            for u in range(A + 1, AB + 1):
                cont = j_z[AB - u, np.maximum(lvl, m)]          # (M,)
                scores = np.min(dep.xi_o * t.pout[u - 1] + dep.xi_r + cont,
                                axis=1)                          # (|W|,)
                dists.append((scores, pmf.probs))
            v_new[m] = expected_min_independent(dists)
        residual = np.max(np.abs(v_new - v_bar))
        v_bar = v_new
        if residual < tol:
            break
    converged = bool(residual < tol)
    j_z = g_const + surv[:, None] * v_bar[None, :]
    return BtMaxPolicy(j_z_g=j_z, v_bar_g=v_bar, iterations=iterations,
                       residual=float(residual), converged=converged, tol=tol,
                       channel=channel, pmf=pmf, dep=dep)


def placement_scores(policy, u, w, gamma_max=None):
    """Objective value for placing at offset u with each power, having
    measured shadowing w there. The decision rule minimizes these over the
    whole window; exposed separately so inspection tools show exactly what
    the decider compares."""
    dep = policy.dep
    AB = dep.window_end
    powers = np.asarray(dep.powers)
    pout = outage_probability(policy.channel, u, dep.delta_m, powers, w)
    if isinstance(policy, BtSumPolicy):
        return dep.xi_r + powers + dep.xi_o * pout + policy.j_z[AB - u]
    if isinstance(policy, BtMaxPolicy):
        from .geo_solvers import _power_level
        m = _power_level(dep, gamma_max)
        lvl = np.maximum(np.arange(1, len(powers) + 1), m)
        return dep.xi_o * pout + dep.xi_r + policy.j_z_g[AB - u, lvl]
    raise TypeError("placement_scores needs a BtSumPolicy or BtMaxPolicy")


def decide_bt(policy, w_vec, gamma_max=None):
    """Choose (offset, power) for a fully measured window. w_vec holds the
    B shadowing values at offsets A+1..A+B; entries may be off-grid.
    Lexicographic tie-break: smallest u, then smallest gamma."""
    dep = policy.dep
    w_vec = np.asarray(w_vec, dtype=float)
    if w_vec.shape != (dep.B,):
        raise ValueError("w_vec must hold exactly B=%d values" % dep.B)
    powers = np.asarray(dep.powers)
    best = None
    for i, u in enumerate(range(dep.A + 1, dep.window_end + 1)):
        obj = placement_scores(policy, u, float(w_vec[i]), gamma_max)
        j = int(np.argmin(obj))
        if best is None or obj[j] < best[0]:
            best = (obj[j], u, float(powers[j]))
    return BtDecision(u=best[1], gamma=best[2])
