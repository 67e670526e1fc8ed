import math

import numpy as np
import pytest

from conftest import spec_tiny
from relaydeploy.avg_solver import policy_iteration_avg
from relaydeploy.bt_solvers import solve_bt_max, solve_bt_sum
from relaydeploy.config import mw_to_dbm
from relaydeploy.geo_solvers import solve_geo_max, solve_geo_sum
from relaydeploy.session import (BACKTRACKING, NO_BACKTRACKING,
                                 BadReportError, CompletedSessionError,
                                 ModeMismatchError, OrderingError,
                                 SessionStore, UnknownPolicyError,
                                 UnknownSessionError, policy_mode, recover_w)
from relaydeploy.simulator import LineModel, _link_w, run_deployments


def _store(**extra):
    channel, pmf, dep = spec_tiny()
    policies = {
        "geo-sum": solve_geo_sum(channel, pmf, dep),
        "geo-max": solve_geo_max(channel, pmf, dep),
        "bt-sum": solve_bt_sum(channel, pmf, dep),
        "bt-max": solve_bt_max(channel, pmf, dep),
        "avg": policy_iteration_avg(channel, pmf, dep),
    }
    return SessionStore(policies, **extra), channel, pmf, dep


# --- lifecycle -------------------------------------------------------------

def test_create_yields_empty_trace():
    store, _, _, _ = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    d = store.get_dict(sess.id)
    assert d["status"] == "active"
    assert d["placements"] == []
    assert d["source"] is None
    assert d["seq"] == 0
    assert d["next_measurement_offset"] == sess.dep.A + 1
    assert d["totals"]["relay_count"] == 0


def test_create_ids_are_distinct():
    store, _, _, _ = _store()
    a = store.create("geo-sum", NO_BACKTRACKING)
    b = store.create("geo-sum", NO_BACKTRACKING)
    assert a.id != b.id


def test_mode_must_match_policy_kind():
    store, _, _, _ = _store()
    with pytest.raises(ModeMismatchError):
        store.create("geo-sum", BACKTRACKING)
    with pytest.raises(ModeMismatchError):
        store.create("bt-sum", NO_BACKTRACKING)
    with pytest.raises(UnknownPolicyError):
        store.create("nope", NO_BACKTRACKING)
    with pytest.raises(BadReportError):
        store.create("geo-sum", "sideways")
    assert policy_mode(store.policies["avg"]) == BACKTRACKING


def test_unknown_session():
    store, _, _, _ = _store()
    with pytest.raises(UnknownSessionError):
        store.get_dict("missing")


# --- measurement reports ---------------------------------------------------

def test_recover_w_direct_and_rssi():
    _, channel, _, dep = _store()
    assert recover_w(channel, dep, 2, {"w": 0.37}) == 0.37
    # synthesize the RSSI a probe at p_tx would see for a known w
    w, r, p_tx_dbm = 0.8, 2, 10.0
    d = r * dep.delta_m
    p_rcv = (10.0 ** (p_tx_dbm / 10.0)) * channel.c * w \
        * (d / channel.r0) ** -channel.eta
    rep = {"rssi_dbm": mw_to_dbm(p_rcv), "probe_power_dbm": p_tx_dbm}
    assert recover_w(channel, dep, r, rep) == pytest.approx(w, rel=1e-12)
    for bad in ({}, {"rssi_dbm": -50.0}, {"w": 0.0}, {"w": -2.0},
                {"w": float("nan")}, "w=3"):
        with pytest.raises(BadReportError):
            recover_w(channel, dep, r, bad)


def test_forced_place_at_window_end():
    store, _, pmf, dep = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    # tiny w everywhere: never worth placing early
    ins = None
    for _ in range(dep.A + 1, dep.window_end + 1):
        ins = store.report(sess.id, {"w": 1e-6})
    assert ins["action"] == "place"
    assert ins["offset"] == dep.window_end
    assert ins["position"] == dep.window_end
    assert ins["next_measurement_offset"] == dep.A + 1
    d = store.get_dict(sess.id)
    assert d["prev_node"] == dep.window_end
    assert len(d["placements"]) == 1


def test_backtracking_buffers_until_window_full():
    store, _, _, dep = _store()
    sess = store.create("bt-sum", BACKTRACKING)
    for k in range(dep.B - 1):
        ins = store.report(sess.id, {"w": 1.0})
        assert ins["action"] == "advance"
        assert ins["next_measurement_offset"] == dep.A + 2 + k
    ins = store.report(sess.id, {"w": 1.0})
    assert ins["action"] == "backtrack_place"
    assert dep.A + 1 <= ins["offset"] <= dep.window_end
    assert ins["steps_back"] == dep.window_end - ins["offset"]
    d = store.get_dict(sess.id)
    assert d["window"] == []
    assert len(d["placements"]) == 1


def test_expected_seq_guard():
    store, _, _, _ = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    store.report(sess.id, {"w": 1.0}, expected_seq=0)
    with pytest.raises(OrderingError):
        store.report(sess.id, {"w": 1.0}, expected_seq=0)
    store.report(sess.id, {"w": 1.0}, expected_seq=1)


def test_completed_session_rejects_input():
    store, _, _, _ = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    store.end_line(sess.id, final_offset=1, report={"w": 0.5})
    assert store.get_dict(sess.id)["status"] == "completed"
    with pytest.raises(CompletedSessionError):
        store.report(sess.id, {"w": 1.0})
    with pytest.raises(CompletedSessionError):
        store.end_line(sess.id, final_offset=1, report={"w": 0.5})


# --- ending the line -------------------------------------------------------

def test_end_before_any_walk_is_single_link():
    store, channel, _, dep = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    trace = store.end_line(sess.id, report={"w": 0.9})
    assert trace["placements"] == []
    assert trace["source"]["position"] == 1
    assert trace["totals"]["relay_count"] == 0
    assert trace["totals"]["sum_power_mw"] == trace["source"]["gamma_mw"]


def test_end_reuses_buffered_measurement():
    store, channel, pmf, dep = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    store.report(sess.id, {"w": 1e-6})  # declined at A+1
    # line ends exactly where we just measured: no report needed
    trace = store.end_line(sess.id)
    assert trace["source"]["position"] == dep.A + 1


def test_end_needs_measurement_for_unseen_link():
    store, _, _, dep = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    store.report(sess.id, {"w": 1e-6})
    with pytest.raises(BadReportError):
        store.end_line(sess.id, final_offset=dep.A + 1 + 1)
    with pytest.raises(BadReportError):
        store.end_line(sess.id, final_offset=dep.window_end + 1,
                       report={"w": 1.0})


def test_end_mid_window_backtracking():
    store, _, _, dep = _store()
    sess = store.create("bt-sum", BACKTRACKING)
    store.report(sess.id, {"w": 0.7})  # buffered at A+1
    trace = store.end_line(sess.id, final_offset=dep.A + 1)
    assert trace["placements"] == []
    assert trace["source"]["position"] == dep.A + 1
    tot = trace["totals"]
    assert tot["cost_sum"] == pytest.approx(
        tot["sum_power_mw"] + dep.xi_o * tot["sum_outage"])


def test_totals_match_recomputation():
    store, _, _, dep = _store()
    sess = store.create("bt-sum", BACKTRACKING)
    rng = np.random.default_rng(8)
    for _ in range(3 * dep.B):
        store.report(sess.id, {"w": float(10.0 ** rng.uniform(-1, 1))})
    trace = store.end_line(sess.id, final_offset=1, report={"w": 0.4})
    gammas = [p["gamma_mw"] for p in trace["placements"]]
    outs = [p["outage"] for p in trace["placements"]]
    gammas.append(trace["source"]["gamma_mw"])
    outs.append(trace["source"]["outage"])
    tot = trace["totals"]
    assert tot["sum_power_mw"] == pytest.approx(sum(gammas), rel=1e-12)
    assert tot["max_power_mw"] == pytest.approx(max(gammas), rel=1e-12)
    assert tot["sum_outage"] == pytest.approx(sum(outs), rel=1e-12)
    assert tot["relay_count"] == len(trace["placements"])
    assert tot["cost_sum"] == pytest.approx(
        sum(gammas) + dep.xi_o * sum(outs) + dep.xi_r * len(trace["placements"]))


# --- what-if scores --------------------------------------------------------

def test_scores_no_backtracking_shape():
    store, _, _, dep = _store()
    sess = store.create("geo-sum", NO_BACKTRACKING)
    sc = store.scores(sess.id)
    assert sc["kind"] == NO_BACKTRACKING
    assert len(sc["thresholds"]) == dep.B - 1
    assert sc["current"] is None
    store.report(sess.id, {"w": 1e-6})
    sc = store.scores(sess.id)
    cur = sc["current"]
    assert cur["offset"] == dep.A + 1
    assert cur["would_place"] == (cur["score"] <= cur["threshold"])


def test_scores_backtracking_pending_and_decided():
    store, _, _, dep = _store()
    sess = store.create("bt-sum", BACKTRACKING)
    store.report(sess.id, {"w": 0.9})
    sc = store.scores(sess.id)
    assert sc["kind"] == BACKTRACKING
    assert len(sc["pending"]) == len(dep.powers)
    assert sc["decided"] is None
    for _ in range(dep.B - 1):
        store.report(sess.id, {"w": 0.9})
    sc = store.scores(sess.id)
    assert sc["pending"] == []
    dec = sc["decided"]
    assert len(dec["scores"]) == dep.B * len(dep.powers)
    chosen = dec["chosen"]
    best = min(dec["scores"], key=lambda row: (row["score"], row["u"],
                                               row["gamma_mw"]))
    assert (chosen["u"], chosen["gamma_mw"]) == (best["u"], best["gamma_mw"])


# --- event log replay ------------------------------------------------------

def test_event_log_replay_is_bit_identical(tmp_path):
    store, channel, pmf, dep = _store(store_dir=str(tmp_path))
    rng = np.random.default_rng(21)
    ids = []
    for pid, mode, end_kw in (
            ("geo-sum", NO_BACKTRACKING, dict(report={"w": 0.5})),
            ("geo-max", NO_BACKTRACKING, dict(report={"w": 0.5})),
            ("bt-max", BACKTRACKING, dict(final_offset=1, report={"w": 0.5})),
            ("avg", BACKTRACKING, dict(final_offset=1, report={"w": 0.5}))):
        sess = store.create(pid, mode)
        for _ in range(7):
            store.report(sess.id, {"w": float(10.0 ** rng.uniform(-1, 1))})
        store.end_line(sess.id, **end_kw)
        ids.append(sess.id)
    # an active session must replay too
    sess = store.create("bt-sum", BACKTRACKING)
    store.report(sess.id, {"w": 1.3})
    ids.append(sess.id)

    fresh = SessionStore(store.policies, store_dir=str(tmp_path))
    for sid in ids:
        assert fresh.get_dict(sid) == store.get_dict(sid)
        assert fresh.events(sid) == store.events(sid)
    # replayed sessions keep working
    ins = fresh.report(ids[-1], {"w": 1.1})
    assert ins["action"] in ("advance", "backtrack_place")


# --- simulator as oracle ---------------------------------------------------

def _replay_finite(store, pid, mode, channel, pmf, dep, seed, run, L):
    """Drive a session with the exact per-link draws the simulator uses."""
    pm = (np.cumsum(pmf.probs), pmf.support)
    sess = store.create(pid, mode)
    while True:
        d = store.get_dict(sess.id)
        prev = d["prev_node"]
        r = d["next_measurement_offset"]
        if mode == BACKTRACKING and L <= prev + dep.window_end:
            w = _link_w(pm[0], pm[1], seed, run, prev, L)
            return store.end_line(sess.id, final_offset=L - prev,
                                  report={"w": w})
        pos = prev + r
        if mode == NO_BACKTRACKING and pos >= L:
            w = _link_w(pm[0], pm[1], seed, run, prev, L)
            return store.end_line(sess.id, final_offset=L - prev,
                                  report={"w": w})
        w = _link_w(pm[0], pm[1], seed, run, prev, pos)
        store.report(sess.id, {"w": w})


@pytest.mark.parametrize("pid,mode", [
    ("geo-sum", NO_BACKTRACKING),
    ("geo-max", NO_BACKTRACKING),
    ("bt-sum", BACKTRACKING),
    ("bt-max", BACKTRACKING),
])
def test_session_reproduces_simulator_traces(pid, mode):
    store, channel, pmf, dep = _store()
    pol = store.policies[pid]
    line = LineModel.geometric(dep.theta)
    seed = 31
    traces = run_deployments(pol, line, channel, pmf, seed=seed, n_runs=25)
    for run, tr in enumerate(traces):
        L = tr.source_position
        got = _replay_finite(store, pid, mode, channel, pmf, dep,
                             seed, run, L)
        want_placements = [{"position": p, "gamma_mw": g, "outage": float(o)}
                           for p, g, o in tr.placements]
        assert got["placements"] == want_placements
        assert got["source"]["position"] == tr.source_position
        assert got["source"]["gamma_mw"] == tr.source_gamma
        assert got["source"]["outage"] == float(tr.source_outage)
        assert got["totals"]["cost_sum"] == pytest.approx(
            tr.cost_sum(dep), rel=1e-15)
        assert got["totals"]["cost_max"] == pytest.approx(
            tr.cost_max(dep), rel=1e-15)


def test_session_reproduces_simulator_infinite_avg():
    store, channel, pmf, dep = _store()
    pol = store.policies["avg"]
    pm = (np.cumsum(pmf.probs), pmf.support)
    seed, horizon = 37, 400
    tr = run_deployments(pol, LineModel.infinite(horizon), channel, pmf,
                         seed=seed, n_runs=1)[0]
    sess = store.create("avg", BACKTRACKING)
    while True:
        d = store.get_dict(sess.id)
        prev = d["prev_node"]
        if prev + dep.window_end > horizon:
            break
        pos = prev + d["next_measurement_offset"]
        w = _link_w(pm[0], pm[1], seed, 0, prev, pos)
        store.report(sess.id, {"w": w})
    d = store.get_dict(sess.id)
    got = [(p["position"], p["gamma_mw"], p["outage"])
           for p in d["placements"]]
    want = [(p, g, float(o)) for p, g, o in tr.placements]
    assert got == want
