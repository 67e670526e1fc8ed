"""Per-link cost tables on the shadowing grid.

Every solver needs the same handful of arrays: outage probabilities for
each (link length, shadowing, power) triple, the power-minimized link
score q(r, w) = min_gamma(gamma + xi_o * P_out), its expectation over W,
and the line-end scores for the max-power objective where a power already
committed caps what the last hop can save. Building them once up front
keeps the solver loops free of channel math.

Index conventions used throughout: row index ri = r - 1 for link length r
in steps (so tables cover r = 1 .. A+B), and power-level index m in
0..M where m = 0 means "no power committed yet" and m = j means powers[j-1].
"""

from dataclasses import dataclass

import numpy as np

from .channel import outage_probability


@dataclass(frozen=True, eq=False)
class LinkCostTables:
    pout: np.ndarray     # (A+B, |W|, M) outage probability per (r, w, power)
    q: np.ndarray        # (A+B, |W|) min over powers of gamma + xi_o * pout
    q_gamma: np.ndarray  # (A+B, |W|) argmin power index for q
    eq: np.ndarray       # (A+B,) expectation of q over W
    lh: np.ndarray       # (A+B, M+1) line-end score E min_j (max(P_j, P_m) + xi_o * pout)
    powers0: np.ndarray  # (M+1,) 0 followed by the power set


def link_cost_tables(channel, pmf, dep):
    AB = dep.A + dep.B
    powers = np.asarray(dep.powers)
    M = len(powers)
    W = len(pmf)

    pout = np.empty((AB, W, M))
    for r in range(1, AB + 1):
        # broadcast (|W|, 1) shadowing against (M,) powers
        pout[r - 1] = outage_probability(channel, r, dep.delta_m,
                                         powers[None, :], pmf.support[:, None])

    scores = powers[None, None, :] + dep.xi_o * pout
    q_gamma = np.argmin(scores, axis=2)
    q = np.take_along_axis(scores, q_gamma[..., None], axis=2)[..., 0]
    eq = q @ pmf.probs

    powers0 = np.concatenate([[0.0], powers])
    # committed-power line-end score: the last hop pays max(P_j, committed)
    # instead of P_j, so high committed power makes low powers free there
    lh = np.empty((AB, M + 1))
    for m in range(M + 1):
        eff = np.maximum(powers, powers0[m])
        lh[:, m] = np.min(eff[None, None, :] + dep.xi_o * pout, axis=2) @ pmf.probs

    return LinkCostTables(pout=pout, q=q, q_gamma=q_gamma, eq=eq,
                          lh=lh, powers0=powers0)


def end_weights(theta, n):
    """Probabilities (1-theta)^(k-1) * theta for k = 1..n: the line ends
    exactly k steps past the current point."""
    k = np.arange(n)
    return (1.0 - theta) ** k * theta
