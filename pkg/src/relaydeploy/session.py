"""Stateful deployment sessions: a person walks a real line, reports link
measurements, and gets told where to put relays.

Sessions are event-sourced. Every accepted input (creation, measurement,
line end) is appended to a JSON-lines log; reloading a session replays the
log through the same transition functions, so a resumed session is in the
exact state the interrupted one was, decisions included. Decisions are
deterministic given the policy, which is why replay needs no stored
outcomes.

The operative never has to say where they are: measurement offsets are
implied by the protocol (first measurement of a window lands at offset
A+1 from the last node, subsequent ones one step further), which removes
a whole class of off-by-one reports.
"""

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .channel import outage_probability, min_power_cost
from .geo_solvers import (GeoSumPolicy, GeoMaxPolicy, decide_geo,
                          last_hop_power, _power_level)
from .bt_solvers import BtSumPolicy, BtMaxPolicy, decide_bt
from .bt_solvers import placement_scores as bt_scores
from .avg_solver import AvgPolicy, decide_avg
from .avg_solver import placement_scores as avg_scores

PROTOCOL_VERSION = 1

NO_BACKTRACKING = "no_backtracking"
BACKTRACKING = "backtracking"


class SessionError(Exception):
    """Base for protocol-level failures; http_status picks the response."""
    http_status = 400


class UnknownSessionError(SessionError):
    http_status = 404


class UnknownPolicyError(SessionError):
    http_status = 404


class ModeMismatchError(SessionError):
    http_status = 409


class CompletedSessionError(SessionError):
    http_status = 409


class OrderingError(SessionError):
    http_status = 409


class BadReportError(SessionError):
    http_status = 422


def policy_mode(policy):
    if isinstance(policy, (GeoSumPolicy, GeoMaxPolicy)):
        return NO_BACKTRACKING
    if isinstance(policy, (BtSumPolicy, BtMaxPolicy, AvgPolicy)):
        return BACKTRACKING
    raise TypeError("unknown policy type %r" % (type(policy),))


def recover_w(channel, dep, r, report):
    """Extract the linear shadowing gain from a measurement report.

    Either {"w": x} directly, or {"rssi_dbm": v, "probe_power_dbm": p}:
    the fading-averaged received power is gamma * c * w * (d/r0)^-eta, so
    w falls out once the link distance (r steps) is known.
    """
    if not isinstance(report, dict):
        raise BadReportError("report must be an object")
    if "w" in report:
        w = float(report["w"])
    elif "rssi_dbm" in report and "probe_power_dbm" in report:
        p_rcv = 10.0 ** (float(report["rssi_dbm"]) / 10.0)
        p_tx = 10.0 ** (float(report["probe_power_dbm"]) / 10.0)
        d = r * dep.delta_m
        w = p_rcv * (d / channel.r0) ** channel.eta / (p_tx * channel.c)
    else:
        raise BadReportError("report needs w or rssi_dbm + probe_power_dbm")
    if not (w > 0) or not np.isfinite(w):
        raise BadReportError("recovered shadowing gain must be positive")
    return w


@dataclass
class Session:
    id: str
    policy_id: str
    policy: object
    mode: str
    seq: int = 0                    # count of accepted events
    cursor: int = 0                 # steps walked past the latest node
    window: list = field(default_factory=list)   # [(offset, w)] this window
    last_meas: tuple = None         # most recent (offset, w), any mode
    last_window: dict = None        # snapshot of the last decided window
    gamma_max_mw: float = None      # largest committed power (max variants)
    prev_node: int = 0              # absolute position of the latest node
    placements: list = field(default_factory=list)  # [(pos, gamma, outage)]
    source: tuple = None            # (pos, gamma, outage) once ended
    status: str = "active"

    @property
    def dep(self):
        return self.policy.dep

    @property
    def channel(self):
        return self.policy.channel

    def expected_offset(self):
        """Offset from the latest node of the next expected measurement."""
        dep = self.dep
        if self.mode == BACKTRACKING:
            return dep.A + 1 + len(self.window)
        return dep.A + 1 if self.cursor < dep.A + 1 else self.cursor + 1

    def totals(self):
        dep = self.dep
        gammas = [g for _, g, _ in self.placements]
        outs = [o for _, _, o in self.placements]
        if self.source is not None:
            gammas.append(self.source[1])
            outs.append(self.source[2])
        sum_p = float(sum(gammas))
        max_p = float(max(gammas)) if gammas else 0.0
        sum_o = float(sum(outs))
        n = len(self.placements)
        return {
            "sum_power_mw": sum_p, "max_power_mw": max_p,
            "sum_outage": sum_o, "relay_count": n,
            "cost_sum": sum_p + dep.xi_o * sum_o + dep.xi_r * n,
            "cost_max": max_p + dep.xi_o * sum_o + dep.xi_r * n,
        }

    def to_dict(self):
        return {
            "id": self.id, "policy_id": self.policy_id, "mode": self.mode,
            "status": self.status, "seq": self.seq, "cursor": self.cursor,
            "prev_node": self.prev_node,
            "next_measurement_offset": (self.expected_offset()
                                        if self.status == "active" else None),
            "window": [{"offset": r, "w": w} for r, w in self.window],
            "gamma_max_mw": self.gamma_max_mw,
            "placements": [{"position": p, "gamma_mw": g, "outage": o}
                           for p, g, o in self.placements],
            "source": (None if self.source is None else
                       {"position": self.source[0], "gamma_mw": self.source[1],
                        "outage": self.source[2]}),
            "totals": self.totals(),
        }

    def trace_dict(self):
        return {
            "placements": [{"position": p, "gamma_mw": g, "outage": o}
                           for p, g, o in self.placements],
            "source": (None if self.source is None else
                       {"position": self.source[0], "gamma_mw": self.source[1],
                        "outage": self.source[2]}),
            "totals": self.totals(),
        }


def _require_active(sess):
    if sess.status != "active":
        raise CompletedSessionError("session %s is completed" % sess.id)


def _is_max_variant(policy):
    return isinstance(policy, (GeoMaxPolicy, BtMaxPolicy))


def apply_measurement(sess, w):
    """Advance the session by one measurement; returns the instruction."""
    _require_active(sess)
    dep = sess.dep
    r = sess.expected_offset()
    if r > dep.window_end:
        raise OrderingError("no measurement expected past offset %d"
                            % dep.window_end)
    sess.last_meas = (r, w)

    if sess.mode == NO_BACKTRACKING:
        gm = sess.gamma_max_mw if _is_max_variant(sess.policy) else None
        d = decide_geo(sess.policy, r, w, gamma_max=gm)
        if d.place:
            pos = sess.prev_node + r
            out = float(outage_probability(sess.channel, r, dep.delta_m,
                                           d.gamma, w))
            sess.placements.append((pos, d.gamma, out))
            if _is_max_variant(sess.policy):
                sess.gamma_max_mw = (d.gamma if sess.gamma_max_mw is None
                                     else max(sess.gamma_max_mw, d.gamma))
            sess.prev_node = pos
            sess.cursor = 0
            sess.last_meas = None
            sess.seq += 1
            return {"action": "place", "offset": r, "position": pos,
                    "gamma_mw": d.gamma, "outage": out,
                    "next_measurement_offset": sess.expected_offset()}
        sess.cursor = r
        sess.seq += 1
        return {"action": "advance", "steps": 1,
                "next_measurement_offset": sess.expected_offset()}

    # backtracking: buffer until the window is full
    sess.window.append((r, w))
    sess.cursor = max(sess.cursor, r)
    if len(sess.window) < dep.B:
        sess.seq += 1
        return {"action": "advance", "steps": 1,
                "next_measurement_offset": sess.expected_offset()}

    w_vec = np.array([wv for _, wv in sess.window])
    gm = sess.gamma_max_mw if _is_max_variant(sess.policy) else None
    if isinstance(sess.policy, AvgPolicy):
        u, gamma = decide_avg(sess.policy, w_vec)
    else:
        d = decide_bt(sess.policy, w_vec, gamma_max=gm) \
            if _is_max_variant(sess.policy) else decide_bt(sess.policy, w_vec)
        u, gamma = d.u, d.gamma
    pos = sess.prev_node + u
    out = float(outage_probability(sess.channel, u, dep.delta_m, gamma,
                                   float(w_vec[u - dep.A - 1])))
    sess.last_window = {
        "window": [{"offset": r_i, "w": w_i} for r_i, w_i in sess.window],
        "gamma_max_mw": gm,
        "chosen": {"u": u, "gamma_mw": gamma},
        "scores": _window_scores(sess.policy, sess.window, gm),
    }
    sess.placements.append((pos, gamma, out))
    if _is_max_variant(sess.policy):
        sess.gamma_max_mw = (gamma if sess.gamma_max_mw is None
                             else max(sess.gamma_max_mw, gamma))
    steps_back = dep.window_end - u
    sess.prev_node = pos
    sess.cursor = steps_back
    sess.window = []
    sess.last_meas = None
    sess.seq += 1
    return {"action": "backtrack_place", "offset": u, "position": pos,
            "steps_back": steps_back, "gamma_mw": gamma, "outage": out,
            "next_measurement_offset": sess.expected_offset()}


def apply_end(sess, final_offset=None, w=None):
    """Finish the line: place the source and close the trace.

    The source sits final_offset steps past the latest node (defaults to
    the current cursor, or 1 step for a walk that never left the node). A
    buffered measurement at that offset is reused; otherwise the caller
    must have supplied one (w)."""
    _require_active(sess)
    dep = sess.dep
    end_r = final_offset if final_offset is not None else max(sess.cursor, 1)
    if not (1 <= end_r <= dep.window_end):
        raise BadReportError("final offset must lie in 1..%d" % dep.window_end)

    buffered = None
    if sess.mode == BACKTRACKING:
        for r_i, w_i in sess.window:
            if r_i == end_r:
                buffered = w_i
    if buffered is None and sess.last_meas is not None \
            and sess.last_meas[0] == end_r:
        buffered = sess.last_meas[1]
    if w is None:
        w = buffered
    if w is None:
        raise BadReportError("no buffered measurement at offset %d; "
                             "report one for the final link" % end_r)

    gm = sess.gamma_max_mw if _is_max_variant(sess.policy) else None
    gamma, out = last_hop_power(dep, sess.channel, end_r, w, gamma_max=gm)
    sess.source = (sess.prev_node + end_r, gamma, float(out))
    sess.status = "completed"
    sess.seq += 1
    return sess.trace_dict()


def _window_scores(policy, window, gamma_max):
    """Score every (filled offset, power) pair exactly as the decider
    would; used for the what-if inspection."""
    dep = policy.dep
    rows = []
    for r, w in window:
        if isinstance(policy, AvgPolicy):
            obj = avg_scores(policy, r, w)
        else:
            obj = bt_scores(policy, r, w, gamma_max)
        for gamma, score in zip(dep.powers, obj):
            rows.append({"u": r, "gamma_mw": gamma, "score": float(score)})
    return rows


def session_scores(sess):
    """What-if view of the pending (and last decided) decision."""
    dep = sess.dep
    policy = sess.policy
    if sess.mode == NO_BACKTRACKING:
        if isinstance(policy, GeoSumPolicy):
            thresholds = [{"offset": dep.A + 1 + i, "threshold": float(c)}
                          for i, c in enumerate(policy.c_th)]
        else:
            m = _power_level(dep, sess.gamma_max_mw)
            thresholds = [{"offset": dep.A + 1 + i,
                           "threshold": float(policy.c_th_g[i, m])}
                          for i in range(policy.c_th_g.shape[0])]
        current = None
        if sess.last_meas is not None:
            r, w = sess.last_meas
            if isinstance(policy, GeoSumPolicy):
                gamma, score = min_power_cost(sess.channel, r, dep.delta_m, w,
                                              dep.powers, dep.xi_o)
            else:
                m = _power_level(dep, sess.gamma_max_mw)
                powers = np.asarray(dep.powers)
                pout = outage_probability(sess.channel, r, dep.delta_m,
                                          powers, w)
                lvl = np.maximum(np.arange(1, len(powers) + 1), m)
                obj = dep.xi_o * pout + policy.v_zero_g[lvl]
                j = int(np.argmin(obj))
                gamma, score = float(powers[j]), float(obj[j])
            th = None
            if r < dep.window_end:
                idx = r - dep.A - 1
                th = (float(policy.c_th[idx]) if isinstance(policy, GeoSumPolicy)
                      else float(policy.c_th_g[idx, _power_level(dep, sess.gamma_max_mw)]))
            current = {"offset": r, "score": float(score), "gamma_mw": gamma,
                       "threshold": th,
                       "would_place": bool(r == dep.window_end or score <= th)}
        return {"kind": NO_BACKTRACKING, "thresholds": thresholds,
                "current": current}

    gm = sess.gamma_max_mw if _is_max_variant(policy) else None
    return {"kind": BACKTRACKING,
            "pending": _window_scores(policy, sess.window, gm),
            "decided": sess.last_window}


class SessionStore:
    """Holds live sessions, their locks, and the append-only event logs.

    policies: dict policy_id -> policy object. store_dir: directory for
    event logs, or None to keep everything in memory.
    """

    def __init__(self, policies, store_dir=None):
        self.policies = dict(policies)
        self.store_dir = store_dir
        if store_dir is not None:
            os.makedirs(store_dir, exist_ok=True)
        self._sessions = {}
        self._locks = {}
        self._events = {}
        self._global = threading.Lock()

    # -- event plumbing ----------------------------------------------------

    def _log_path(self, session_id):
        return os.path.join(self.store_dir, "%s.jsonl" % session_id)

    def _append_event(self, session_id, event):
        self._events.setdefault(session_id, []).append(event)
        if self.store_dir is not None:
            with open(self._log_path(session_id), "a") as f:
                f.write(json.dumps(event, sort_keys=True) + "\n")

    def events(self, session_id):
        self._get(session_id)
        return list(self._events.get(session_id, []))

    # -- session access ----------------------------------------------------

    def _get(self, session_id):
        with self._global:
            sess = self._sessions.get(session_id)
        if sess is None and self.store_dir is not None \
                and os.path.exists(self._log_path(session_id)):
            sess = self._load_from_log(session_id)
        if sess is None:
            raise UnknownSessionError("unknown session %r" % session_id)
        return sess

    def get_dict(self, session_id):
        return self._get(session_id).to_dict()

    def list_policies(self):
        out = []
        for pid in sorted(self.policies):
            p = self.policies[pid]
            out.append({"policy_id": pid, "variant": p.variant,
                        "mode": policy_mode(p),
                        "A": p.dep.A, "B": p.dep.B,
                        "xi_r": p.dep.xi_r, "xi_o": p.dep.xi_o,
                        "theta": p.dep.theta})
        return out

    # -- operations --------------------------------------------------------

    def create(self, policy_id, mode):
        policy = self.policies.get(policy_id)
        if policy is None:
            raise UnknownPolicyError("unknown policy %r" % policy_id)
        if mode not in (NO_BACKTRACKING, BACKTRACKING):
            raise BadReportError("mode must be %r or %r"
                                 % (NO_BACKTRACKING, BACKTRACKING))
        if policy_mode(policy) != mode:
            raise ModeMismatchError("policy %r is a %s policy"
                                    % (policy_id, policy_mode(policy)))
        sid = uuid.uuid4().hex
        sess = Session(id=sid, policy_id=policy_id, policy=policy, mode=mode)
        with self._global:
            self._sessions[sid] = sess
            self._locks[sid] = threading.Lock()
        self._append_event(sid, {"seq": 0, "type": "created",
                                 "data": {"policy_id": policy_id, "mode": mode}})
        return sess

    def _lock_for(self, session_id):
        with self._global:
            return self._locks.setdefault(session_id, threading.Lock())

    def report(self, session_id, report, expected_seq=None):
        sess = self._get(session_id)
        with self._lock_for(session_id):
            if expected_seq is not None and expected_seq != sess.seq:
                raise OrderingError("expected_seq %d does not match session "
                                    "seq %d" % (expected_seq, sess.seq))
            _require_active(sess)
            r = sess.expected_offset()
            w = recover_w(sess.channel, sess.dep, r, report)
            instruction = apply_measurement(sess, w)
            self._append_event(session_id, {
                "seq": sess.seq, "type": "measurement",
                "data": {"w": w, "report": report}})
            return instruction

    def end_line(self, session_id, final_offset=None, report=None,
                 expected_seq=None):
        sess = self._get(session_id)
        with self._lock_for(session_id):
            if expected_seq is not None and expected_seq != sess.seq:
                raise OrderingError("expected_seq %d does not match session "
                                    "seq %d" % (expected_seq, sess.seq))
            _require_active(sess)
            w = None
            if report is not None:
                end_r = (final_offset if final_offset is not None
                         else max(sess.cursor, 1))
                w = recover_w(sess.channel, sess.dep, end_r, report)
            trace = apply_end(sess, final_offset=final_offset, w=w)
            self._append_event(session_id, {
                "seq": sess.seq, "type": "end",
                "data": {"final_offset": final_offset, "w": w,
                         "report": report}})
            return trace

    def scores(self, session_id):
        return session_scores(self._get(session_id))

    def trace(self, session_id):
        return self._get(session_id).trace_dict()

    # -- replay ------------------------------------------------------------

    def _load_from_log(self, session_id):
        with open(self._log_path(session_id)) as f:
            events = [json.loads(line) for line in f if line.strip()]
        sess = self.replay(session_id, events)
        with self._global:
            self._sessions[session_id] = sess
            self._locks.setdefault(session_id, threading.Lock())
            self._events[session_id] = events
        return sess

    def replay(self, session_id, events):
        """Rebuild a session by running its events through the normal
        transition functions."""
        if not events or events[0]["type"] != "created":
            raise SessionError("event log must start with a created event")
        data = events[0]["data"]
        policy = self.policies.get(data["policy_id"])
        if policy is None:
            raise UnknownPolicyError("policy %r referenced by session log "
                                     "is not loaded" % data["policy_id"])
        sess = Session(id=session_id, policy_id=data["policy_id"],
                       policy=policy, mode=data["mode"])
        for ev in events[1:]:
            if ev["type"] == "measurement":
                apply_measurement(sess, ev["data"]["w"])
            elif ev["type"] == "end":
                apply_end(sess, final_offset=ev["data"].get("final_offset"),
                          w=ev["data"].get("w"))
            else:
                raise SessionError("unknown event type %r" % ev["type"])
        return sess
