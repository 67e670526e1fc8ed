"""Monte-Carlo deployment along sampled lines.

The channel draw for a link is keyed by (seed, run, transmitter position,
receiver position) through a counter-based hash, not by draw order. Two
consequences we rely on: a walk that revisits a link (backtracking, or the
line ending on an already measured spot) sees the same shadowing, and two
different policies simulated with the same seed face identical channels
link for link, which makes paired comparisons sharp.

Costs follow the network objectives: every link's transmit power (sum
objective) or only the largest (max objective), plus the outage
probabilities of all links and the relay count. Outage enters as its
probability, not as sampled packet losses; the objectives are expectations
over fading already.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geo_solvers import (GeoSumPolicy, GeoMaxPolicy, decide_geo,
                          last_hop_power, _power_level)
from .bt_solvers import BtSumPolicy, BtMaxPolicy, decide_bt
from .avg_solver import AvgPolicy, decide_avg
from .channel import outage_probability


@dataclass(frozen=True)
class LineModel:
    kind: str                  # geometric | fixed | infinite
    theta: float = None        # geometric
    length_steps: int = None   # fixed
    horizon_steps: int = None  # infinite

    @staticmethod
    def geometric(theta):
        if not (0 < theta < 1):
            raise ValueError("theta must lie in (0, 1)")
        return LineModel(kind="geometric", theta=theta)

    @staticmethod
    def fixed(length_steps):
        if length_steps < 1:
            raise ValueError("length must be at least 1 step")
        return LineModel(kind="fixed", length_steps=int(length_steps))

    @staticmethod
    def infinite(horizon_steps):
        if horizon_steps < 1:
            raise ValueError("horizon must be positive")
        return LineModel(kind="infinite", horizon_steps=int(horizon_steps))


@dataclass
class DeploymentTrace:
    placements: list            # [(position steps, gamma mW, outage prob)]
    source_position: int        # None for infinite-horizon runs
    source_gamma: float
    source_outage: float
    sum_power: float
    max_power: float
    sum_outage: float
    relay_count: int
    steps_covered: int          # denominator for per-step costs

    def links(self):
        """All links including the source hop, as (length, gamma, outage)."""
        out = []
        prev = 0
        for pos, gamma, outage in self.placements:
            out.append((pos - prev, gamma, outage))
            prev = pos
        if self.source_position is not None:
            out.append((self.source_position - prev, self.source_gamma,
                        self.source_outage))
        return out

    def cost_sum(self, dep):
        return (self.sum_power + dep.xi_o * self.sum_outage
                + dep.xi_r * self.relay_count)

    def cost_max(self, dep):
        return (self.max_power + dep.xi_o * self.sum_outage
                + dep.xi_r * self.relay_count)


@dataclass(frozen=True)
class DeploymentStats:
    n_runs: int
    per_step: bool
    mean_cost_sum: float
    half_width_sum: float
    mean_cost_max: float        # None for per-step stats
    half_width_max: float
    mean_power_per_hop: float
    mean_hop_length: float
    mean_outage_per_link: float


def _link_w(pmf_cum, pmf_support, seed, run, prev, pos):
    """Deterministic shadowing draw for the link (prev, pos)."""
    state = np.random.SeedSequence([seed, run, prev, pos]).generate_state(1, np.uint64)
    u = (int(state[0]) >> 11) * 2.0 ** -53
    return float(pmf_support[np.searchsorted(pmf_cum, u, side="right")])


def _finalize(placements, dep, source_pos, source_gamma, source_outage,
              steps_covered):
    gammas = [g for _, g, _ in placements]
    outs = [o for _, _, o in placements]
    if source_pos is not None:
        gammas.append(source_gamma)
        outs.append(source_outage)
    return DeploymentTrace(
        placements=placements, source_position=source_pos,
        source_gamma=source_gamma, source_outage=source_outage,
        sum_power=float(sum(gammas)), max_power=float(max(gammas)) if gammas else 0.0,
        sum_outage=float(sum(outs)), relay_count=len(placements),
        steps_covered=steps_covered)


# stream tag for line-length draws, far above any real step position so it
# cannot collide with a (prev, pos) link key
_LENGTH_STREAM = 2 ** 40 + 7


def _sample_length(line, seed, run):
    if line.kind == "fixed":
        return line.length_steps
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence([seed, run, _LENGTH_STREAM, 0])))
    return int(rng.geometric(line.theta))


def _walk_no_backtracking(policy, channel, dep, pm, seed, run, L, horizon):
    """Step-by-step walk: measure each offset past A, place when the
    threshold rule says so, stop at the line end (source there)."""
    A, AB = dep.A, dep.window_end
    pmf_cum, support = pm
    is_max = isinstance(policy, GeoMaxPolicy)
    gm_level = 0
    powers = np.asarray(dep.powers)
    prev = 0
    placements = []
    while True:
        placed = False
        for r in range(A + 1, AB + 1):
            pos = prev + r
            if L is not None and pos >= L:
                break
            if horizon is not None and pos > horizon:
                # infinite-line run out of budget: drop the partial leg
                return _finalize(placements, dep, None, None, None, prev)
            w = _link_w(pmf_cum, support, seed, run, prev, pos)
            gm = powers[gm_level - 1] if (is_max and gm_level) else None
            d = decide_geo(policy, r, w, gamma_max=gm if is_max else None)
            if d.place:
                out = outage_probability(channel, r, dep.delta_m, d.gamma, w)
                placements.append((pos, d.gamma, out))
                if is_max:
                    gm_level = max(gm_level, _power_level(dep, d.gamma))
                prev = pos
                placed = True
                break
        if placed:
            continue
        # line ended at L before any placement this leg
        r_src = L - prev
        w = _link_w(pmf_cum, support, seed, run, prev, L)
        gm = powers[gm_level - 1] if (is_max and gm_level) else None
        gamma, out = last_hop_power(dep, channel, r_src, w, gamma_max=gm)
        return _finalize(placements, dep, L, gamma, out, L)


def _walk_backtracking(decide, channel, dep, pm, seed, run, L, horizon):
    """Window walk: measure all B offsets, walk back, place, repeat. The
    line-end check covers only steps past the already-walked frontier."""
    A, B, AB = dep.A, dep.B, dep.window_end
    pmf_cum, support = pm
    prev = 0
    placements = []
    while True:
        if L is not None and L <= prev + AB:
            r_src = L - prev
            w = _link_w(pmf_cum, support, seed, run, prev, L)
            gamma, out = decide.last_hop(r_src, w)
            return _finalize(placements, dep, L, gamma, out, L)
        if horizon is not None and prev + AB > horizon:
            return _finalize(placements, dep, None, None, None, prev)
        w_vec = np.array([_link_w(pmf_cum, support, seed, run, prev, prev + A + j)
                          for j in range(1, B + 1)])
        u, gamma = decide.window(w_vec)
        pos = prev + u
        out = outage_probability(channel, u, dep.delta_m, gamma,
                                 float(w_vec[u - A - 1]))
        placements.append((pos, gamma, out))
        decide.placed(gamma)
        prev = pos


class _BtAdapter:
    """Uniform window/last-hop interface over the backtracking-style
    policies, tracking committed power for the max objective."""

    def __init__(self, policy, channel, dep):
        self.policy = policy
        self.channel = channel
        self.dep = dep
        self.gm = None  # committed power in mW, None = nothing yet

    def window(self, w_vec):
        p = self.policy
        if isinstance(p, BtSumPolicy):
            d = decide_bt(p, w_vec)
        elif isinstance(p, BtMaxPolicy):
            d = decide_bt(p, w_vec, gamma_max=self.gm)
        elif isinstance(p, AvgPolicy):
            return decide_avg(p, w_vec)
        else:
            d = p.decide_window(w_vec)
            return d
        return d.u, d.gamma

    def placed(self, gamma):
        if isinstance(self.policy, BtMaxPolicy):
            self.gm = gamma if self.gm is None else max(self.gm, gamma)

    def last_hop(self, r, w):
        return last_hop_power(self.dep, self.channel, r, w, gamma_max=self.gm)


def run_deployments(policy, line, channel, pmf, seed, n_runs):
    """Simulate n_runs independent deployments; returns the traces."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if isinstance(policy, AvgPolicy) and line.kind != "infinite":
        raise ValueError("average-cost policies need an infinite line")
    if line.kind == "infinite" and line.horizon_steps < policy.dep.window_end:
        raise ValueError("horizon shorter than one decision window")
    dep = policy.dep
    pm = (np.cumsum(pmf.probs), pmf.support)
    nbt = isinstance(policy, (GeoSumPolicy, GeoMaxPolicy))

    traces = []
    for run in range(n_runs):
        if line.kind == "infinite":
            L, horizon = None, line.horizon_steps
        else:
            L, horizon = _sample_length(line, seed, run), None
        if nbt:
            tr = _walk_no_backtracking(policy, channel, dep, pm, seed, run,
                                       L, horizon)
        else:
            adapter = _BtAdapter(policy, channel, dep)
            tr = _walk_backtracking(adapter, channel, dep, pm, seed, run,
                                    L, horizon)
        traces.append(tr)
    return traces


def _mean_half(x):
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()), math.inf
    se = x.std(ddof=1) / math.sqrt(len(x))
    return float(x.mean()), float(1.96 * se)


def simulate(policy, line, channel, pmf, seed, n_runs):
    """Run deployments and summarize them.

    Finite lines: mean total cost per objective with a 95% half-width.
    Infinite horizon: cost per step (sum objective) via the renewal ratio;
    the half-width comes from across-run spread, or the within-run delta
    method for a single run.
    """
    traces = run_deployments(policy, line, channel, pmf, seed, n_runs)
    dep = policy.dep
    per_link = cost_breakdown(traces)
    if line.kind != "infinite":
        mean_s, half_s = _mean_half([t.cost_sum(dep) for t in traces])
        mean_m, half_m = _mean_half([t.cost_max(dep) for t in traces])
        return DeploymentStats(
            n_runs=n_runs, per_step=False,
            mean_cost_sum=mean_s, half_width_sum=half_s,
            mean_cost_max=mean_m, half_width_max=half_m,
            mean_power_per_hop=per_link.mean_power_per_hop,
            mean_hop_length=per_link.mean_hop_length,
            mean_outage_per_link=per_link.mean_outage_per_link)

    rates = [t.cost_sum(dep) / t.steps_covered for t in traces]
    if n_runs > 1:
        mean, half = _mean_half(rates)
    else:
        # single long run: ratio estimator over renewal cycles, delta-method
        # variance (each placement starts a fresh cycle)
        t = traces[0]
        cyc_cost = np.array([dep.xi_r + g + dep.xi_o * o
                             for _, g, o in t.placements])
        lens = np.diff([0] + [p for p, _, _ in t.placements]).astype(float)
        lam = cyc_cost.sum() / lens.sum()
        n = len(lens)
        if n > 1:
            resid = cyc_cost - lam * lens
            var = resid.var(ddof=1) / n / lens.mean() ** 2
        else:
            var = math.inf
        mean, half = float(lam), float(1.96 * math.sqrt(var))
    return DeploymentStats(
        n_runs=n_runs, per_step=True,
        mean_cost_sum=mean, half_width_sum=half,
        mean_cost_max=None, half_width_max=None,
        mean_power_per_hop=per_link.mean_power_per_hop,
        mean_hop_length=per_link.mean_hop_length,
        mean_outage_per_link=per_link.mean_outage_per_link)


def cost_breakdown(traces):
    """Per-link averages over every link in every trace (source hop
    included where present)."""
    if not traces:
        raise ValueError("need at least one trace")
    lengths, gammas, outs = [], [], []
    for t in traces:
        for length, gamma, out in t.links():
            lengths.append(length)
            gammas.append(gamma)
            outs.append(out)
    return DeploymentStats(
        n_runs=len(traces), per_step=False,
        mean_cost_sum=None, half_width_sum=None,
        mean_cost_max=None, half_width_max=None,
        mean_power_per_hop=float(np.mean(gammas)),
        mean_hop_length=float(np.mean(lengths)),
        mean_outage_per_link=float(np.mean(outs)))


def write_traces_csv(traces, path):
    """One row per link: run, link index, endpoints, power, outage."""
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["run", "link", "from_step", "to_step", "gamma_mw",
                     "outage", "is_source_hop"])
        for i, t in enumerate(traces):
            prev = 0
            rows = list(t.placements)
            if t.source_position is not None:
                rows.append((t.source_position, t.source_gamma, t.source_outage))
            for k, (pos, gamma, out) in enumerate(rows):
                is_src = (t.source_position is not None and k == len(rows) - 1)
                wr.writerow([i, k, prev, pos, repr(gamma), repr(out),
                             int(is_src)])
                prev = pos


def write_stats_json(stats, path):
    doc = {k: getattr(stats, k) for k in (
        "n_runs", "per_step", "mean_cost_sum", "half_width_sum",
        "mean_cost_max", "half_width_max", "mean_power_per_hop",
        "mean_hop_length", "mean_outage_per_link")}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
