"""Average cost per step on the infinite line.

With backtracking every placement is a renewal, so a stationary policy is
scored by expected cycle cost over expected cycle length and the optimal
rule is: minimize gamma + xi_o * P_out(u, gamma, w_u) + xi_r - lambda* u
over window candidates. Policy iteration alternates renewal-reward
evaluation with that improvement step; the scalar lambda alone determines
the next policy, so no per-state table is ever stored.

The evaluation never enumerates |W|^B states either: since per-offset
scores are independent, the joint probability that offset u with shadowing
w wins the argmin factors into survival products over the other offsets
(strict inequality for earlier offsets, non-strict for later ones, which
is exactly the smallest-u tie-break).
"""

from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .channel import outage_probability
from .costs import link_cost_tables


@dataclass(frozen=True, eq=False)
class AvgPolicy:
    lambda_star: float
    iteration_history: tuple   # lambda_k sequence, first entry included
    iterations: int
    converged: bool
    channel: object
    pmf: object
    dep: object

    @property
    def variant(self):
        return "average-cost"


@dataclass(frozen=True, eq=False)
class ScoreRule:
    """A stationary window rule in factored form: per (offset, shadowing
    atom) a selection score (smallest wins, earlier offset breaks ties),
    the incurred link cost gamma + xi_o * P_out, and the power chosen."""
    score: np.ndarray   # (B, |W|)
    cost: np.ndarray    # (B, |W|)
    gamma: np.ndarray   # (B, |W|) chosen power in mW


@dataclass(frozen=True, eq=False)
class LambdaPrime:
    """theta -> 0 limit of theta * (geometric-line optimal cost)."""
    lambda_prime: float
    thetas: tuple
    values: tuple       # raw theta * v_zero sequence


def selection_weights(score, probs):
    """Joint probabilities b[u, w] that offset u wins the argmin while its
    shadowing atom is w, under independent per-offset scores.

    Earlier offsets must be strictly worse, later ones at least as bad;
    that realizes the smallest-offset tie-break. Rows of b sum to the
    per-offset win probabilities and the whole matrix sums to 1.
    """
    B, W = score.shape
    b = np.empty_like(score)
    sorted_scores = np.sort(score, axis=1)
    sorted_cum = np.empty_like(score)
    for r in range(B):
        order = np.argsort(score[r], kind="stable")
        sorted_cum[r] = np.cumsum(probs[order])
    for u in range(B):
        x = score[u]
        win = probs.copy()
        for r in range(B):
            if r == u:
                continue
            side = "right" if r < u else "left"
            # P(score_r <= x) (strict loser check) vs P(score_r < x)
            idx = np.searchsorted(sorted_scores[r], x, side=side)
            cdf = np.where(idx > 0, sorted_cum[r, np.maximum(idx - 1, 0)], 0.0)
            win = win * (1.0 - cdf)
        b[u] = win
    return b


def lambda_rule(lam, channel, pmf, dep, tables=None):
    """The backtracking average-cost rule for a given lambda, in factored
    form over the shadowing grid."""
    t = tables if tables is not None else link_cost_tables(channel, pmf, dep)
    A, AB = dep.A, dep.window_end
    u_vals = np.arange(A + 1, AB + 1, dtype=float)
    powers = np.asarray(dep.powers)
    cost = t.q[A:AB, :]
    gamma = powers[t.q_gamma[A:AB, :]]
    score = cost - lam * u_vals[:, None]
    return ScoreRule(score=score, cost=cost, gamma=gamma)


def heuristic_rule(channel, pmf, dep, tables=None):
    """Model-light rule: minimize (gamma + xi_o P_out + xi_r) / u over the
    window; needs only the current measurements, no solved tables."""
    t = tables if tables is not None else link_cost_tables(channel, pmf, dep)
    A, AB = dep.A, dep.window_end
    u_vals = np.arange(A + 1, AB + 1, dtype=float)
    powers = np.asarray(dep.powers)
    cost = t.q[A:AB, :]
    gamma = powers[t.q_gamma[A:AB, :]]
    score = (cost + dep.xi_r) / u_vals[:, None]
    return ScoreRule(score=score, cost=cost, gamma=gamma)


def evaluate_stationary_avg(decision_rule, channel, pmf, dep):
    """Average cost per step of a stationary window rule.

    Accepts either a ScoreRule (evaluated exactly via the factored
    selection weights) or a callable w_vec -> (u, gamma), which is
    evaluated by enumerating the window state space; the latter is only
    for tiny instances and refuses |W|^B above 10^6.
    """
    A, B, AB = dep.A, dep.B, dep.window_end
    if isinstance(decision_rule, ScoreRule):
        b = selection_weights(decision_rule.score, pmf.probs)
        u_vals = np.arange(A + 1, AB + 1, dtype=float)
        num = dep.xi_r + float((b * decision_rule.cost).sum())
        den = float(b.sum(axis=1) @ u_vals)
        return num / den

    if len(pmf) ** B > 10 ** 6:
        raise ValueError("window state space too large to enumerate")
    num = dep.xi_r
    den = 0.0
    for idx in product(range(len(pmf)), repeat=B):
        w_vec = pmf.support[list(idx)]
        g = float(np.prod(pmf.probs[list(idx)]))
        u, gamma = decision_rule(w_vec)
        pout = outage_probability(channel, u, dep.delta_m, gamma,
                                  w_vec[u - A - 1])
        num += g * (gamma + dep.xi_o * pout)
        den += g * u
    return num / den


def policy_iteration_avg(channel, pmf, dep, max_iter=100):
    """Policy iteration for the optimal average cost per step.

    Starts from "always place at the window end with the per-shadowing
    best power", which has a finite cost, and stops on exact lambda
    equality; finite state and action spaces make that happen after a
    handful of rounds.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    t = link_cost_tables(channel, pmf, dep)
    A, AB = dep.A, dep.window_end

    lam = (dep.xi_r + t.eq[AB - 1]) / AB
    history = [float(lam)]
    converged = False
    for _ in range(max_iter):
        rule = lambda_rule(lam, channel, pmf, dep, tables=t)
        lam_new = evaluate_stationary_avg(rule, channel, pmf, dep)
        history.append(float(lam_new))
        if lam_new == lam:
            converged = True
            break
        lam = lam_new
    return AvgPolicy(lambda_star=float(lam), iteration_history=tuple(history),
                     iterations=len(history) - 1, converged=converged,
                     channel=channel, pmf=pmf, dep=dep)


def placement_scores(policy, u, w):
    """Per-power objective the lambda* rule minimizes at offset u."""
    dep = policy.dep
    powers = np.asarray(dep.powers)
    pout = outage_probability(policy.channel, u, dep.delta_m, powers, w)
    return powers + dep.xi_o * pout + dep.xi_r - policy.lambda_star * u


def decide_avg(policy, w_vec):
    """Window decision under the lambda* rule; w entries may be off-grid."""
    return _scan_window(policy.channel, policy.dep, w_vec,
                        lambda u, obj: obj - policy.lambda_star * u)


def heuristic_decide(w_vec, channel, dep):
    """Window decision under the ratio heuristic."""
    return _scan_window(channel, dep, w_vec, lambda u, obj: obj / u)


def _scan_window(channel, dep, w_vec, shape_fn):
    w_vec = np.asarray(w_vec, dtype=float)
    if w_vec.shape != (dep.B,):
        raise ValueError("w_vec must hold exactly B=%d values" % dep.B)
    A, AB = dep.A, dep.window_end
    powers = np.asarray(dep.powers)
    best = None
    for i, u in enumerate(range(A + 1, AB + 1)):
        pout = outage_probability(channel, u, dep.delta_m, powers, w_vec[i])
        obj = shape_fn(u, powers + dep.xi_o * pout + dep.xi_r)
        j = int(np.argmin(obj))
        if best is None or obj[j] < best[0]:
            best = (obj[j], u, float(powers[j]))
    return best[1], best[2]


def average_cost_no_backtracking(channel, pmf, dep,
                                 theta_sequence=(0.01, 0.005, 0.002, 0.001)):
    """Average cost per step when the agent cannot walk back: the limit of
    theta * (optimal geometric-line cost) as theta -> 0, estimated by
    solving the geometric problem along theta_sequence and Richardson-
    extrapolating the last two points."""
    from .geo_solvers import solve_geo_sum
    thetas = tuple(float(x) for x in theta_sequence)
    if len(thetas) < 2:
        raise ValueError("need at least two theta values")
    if any(b >= a for a, b in zip(thetas, thetas[1:])) or thetas[-1] <= 0:
        raise ValueError("theta_sequence must be strictly decreasing and positive")
    values = []
    for th in thetas:
        pol = solve_geo_sum(channel, pmf, replace(dep, theta=th))
        values.append(th * pol.v_zero)
    ta, tb = thetas[-2], thetas[-1]
    ya, yb = values[-2], values[-1]
    lam = (ta * yb - tb * ya) / (ta - tb)
    return LambdaPrime(lambda_prime=float(lam), thetas=thetas,
                       values=tuple(values))
