"""Command-line entry point.

Subcommands: solve (write a policy file), tables (reproduce the summary
tables as CSV), simulate (Monte-Carlo a policy file), score (what-if dump
for a measured window), serve (run the session service).

Exit codes: 0 success, 2 bad configuration, 3 solver did not converge,
4 service failure.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .avg_solver import (average_cost_no_backtracking, heuristic_rule,
                         evaluate_stationary_avg, policy_iteration_avg,
                         lambda_rule, selection_weights, decide_avg)
from .avg_solver import placement_scores as avg_scores
from .bt_solvers import solve_bt_sum, solve_bt_max, decide_bt
from .bt_solvers import placement_scores as bt_scores
from .channel import min_power_cost, quantize_shadowing
from .config import load_params
from .costs import link_cost_tables
from .geo_solvers import solve_geo_sum, solve_geo_max
from .policy_io import save_policy, load_policy
from .simulator import (LineModel, simulate, run_deployments,
                        write_traces_csv, write_stats_json)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_SERVICE = 4

FINE_STEP_DB = 0.02
COARSE_STEP_DB = 0.1


def fmt(x):
    """6 significant digits, plenty for 4-decimal reference tables."""
    return "%.6g" % x


def _build_inputs(args):
    channel, dep = load_params(getattr(args, "params", None))
    for name in ("xi_r", "xi_o", "theta"):
        val = getattr(args, name, None)
        if val is not None:
            dep = replace(dep, **{name: val})
    step = args.grid_step_db
    if step is None:
        step = FINE_STEP_DB if getattr(args, "fine", False) else COARSE_STEP_DB
    pmf = quantize_shadowing(channel.sigma_db, step)
    return channel, pmf, dep, step


SOLVERS = {
    "geo-sum": solve_geo_sum,
    "geo-max": solve_geo_max,
    "bt-sum": solve_bt_sum,
    "bt-max": solve_bt_max,
}


def cmd_solve(args):
    channel, pmf, dep, step = _build_inputs(args)
    if args.variant == "average-cost":
        policy = policy_iteration_avg(channel, pmf, dep,
                                      max_iter=args.max_iter)
        print("variant: average-cost")
        print("lambda_star: %s" % fmt(policy.lambda_star))
        print("iterations: %d" % policy.iterations)
    else:
        solver = SOLVERS[args.variant]
        policy = solver(channel, pmf, dep, tol=args.tol,
                        max_iter=args.max_iter)
        print("variant: %s" % args.variant)
        if args.variant == "geo-sum":
            print("v_zero: %s" % fmt(policy.v_zero))
            for i, c in enumerate(policy.c_th):
                print("c_th[r=%d]: %s" % (dep.A + 1 + i, fmt(c)))
        elif args.variant == "geo-max":
            print("v_zero: %s" % fmt(policy.v_zero_g[0]))
            for i in range(policy.c_th_g.shape[0]):
                row = " ".join(fmt(c) for c in policy.c_th_g[i])
                print("c_th[r=%d]: %s" % (dep.A + 1 + i, row))
        elif args.variant == "bt-sum":
            print("j_zero: %s" % fmt(policy.j_z[0]))
            for z in range(len(policy.j_z)):
                print("j_z[z=%d]: %s" % (z, fmt(policy.j_z[z])))
        else:
            print("j_zero: %s" % fmt(policy.j_z_g[0, 0]))
        print("iterations: %d" % policy.iterations)
        print("residual: %s" % fmt(policy.residual))
    print("grid_step_db: %s" % fmt(step))
    if args.out:
        save_policy(policy, args.out)
        print("written: %s" % args.out)
    if not policy.converged:
        print("warning: solver did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


TABLE_GRID_SMALL = [(0.001, 0.1), (0.001, 1.0), (0.001, 10.0),
                    (0.01, 0.1), (0.01, 1.0), (0.01, 10.0)]
TABLE_GRID_FULL = TABLE_GRID_SMALL + [(0.1, 0.01), (0.1, 0.1),
                                      (0.1, 1.0), (0.1, 10.0)]


def _avg_breakdown(channel, pmf, dep):
    """Per-link statistics of the optimal average-cost policy, computed
    from the selection weights rather than simulation."""
    policy = policy_iteration_avg(channel, pmf, dep)
    t = link_cost_tables(channel, pmf, dep)
    rule = lambda_rule(policy.lambda_star, channel, pmf, dep, tables=t)
    b = selection_weights(rule.score, pmf.probs)
    A, AB = dep.A, dep.window_end
    u_vals = np.arange(A + 1, AB + 1, dtype=float)
    pout_star = np.take_along_axis(t.pout[A:AB], t.q_gamma[A:AB][..., None],
                                   axis=2)[..., 0]
    mean_power = float((b * rule.gamma).sum())
    mean_hop = float(b.sum(axis=1) @ u_vals)
    mean_out = float((b * pout_star).sum())
    return policy, mean_power, mean_hop, mean_out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        wr.writerows(rows)
    print("written: %s" % path)


def cmd_tables(args):
    channel, pmf, dep, step = _build_inputs(args)
    os.makedirs(args.out, exist_ok=True)
    which = set(args.which.split(",")) if args.which != "all" \
        else {"I", "II", "III", "IV"}

    if "I" in which:
        rows = []
        for xi_r, xi_o in TABLE_GRID_SMALL:
            d = replace(dep, xi_r=xi_r, xi_o=xi_o)
            vs = solve_geo_sum(channel, pmf, d).v_zero
            vm = solve_geo_max(channel, pmf, d).v_zero_g[0]
            rows.append([xi_r, xi_o, fmt(vs), fmt(vm), step])
        _write_csv(os.path.join(args.out, "table_I.csv"),
                   ["xi_r", "xi_o", "sum_power_cost", "max_power_cost",
                    "grid_step_db"], rows)

    if "II" in which:
        rows = []
        for xi_r, xi_o in TABLE_GRID_SMALL:
            d = replace(dep, xi_r=xi_r, xi_o=xi_o)
            nbt = solve_geo_sum(channel, pmf, d).v_zero
            bt = solve_bt_sum(channel, pmf, d).j_z[0]
            rows.append([xi_r, xi_o, fmt(nbt), fmt(bt), step])
        _write_csv(os.path.join(args.out, "table_II.csv"),
                   ["xi_r", "xi_o", "no_backtracking", "backtracking",
                    "grid_step_db"], rows)

    if "III" in which:
        rows = []
        for xi_r, xi_o in TABLE_GRID_FULL:
            d = replace(dep, xi_r=xi_r, xi_o=xi_o)
            _, mp, mh, mo = _avg_breakdown(channel, pmf, d)
            rows.append([xi_r, xi_o, fmt(mp), fmt(mh), fmt(mo), step])
        _write_csv(os.path.join(args.out, "table_III.csv"),
                   ["xi_r", "xi_o", "mean_power_mw", "mean_hop_steps",
                    "mean_outage", "grid_step_db"], rows)

    if "IV" in which:
        rows = []
        for xi_r, xi_o in TABLE_GRID_FULL:
            d = replace(dep, xi_r=xi_r, xi_o=xi_o)
            lam = policy_iteration_avg(channel, pmf, d).lambda_star
            lamp = average_cost_no_backtracking(channel, pmf, d).lambda_prime
            lamh = evaluate_stationary_avg(heuristic_rule(channel, pmf, d),
                                           channel, pmf, d)
            rows.append([xi_r, xi_o, fmt(lam), fmt(lamp), fmt(lamh), step])
        _write_csv(os.path.join(args.out, "table_IV.csv"),
                   ["xi_r", "xi_o", "lambda_star", "lambda_prime",
                    "lambda_heuristic", "grid_step_db"], rows)
    return EXIT_OK


def _parse_line(spec, theta):
    if spec == "geometric":
        return LineModel.geometric(theta)
    if spec.startswith("fixed:"):
        return LineModel.fixed(int(spec.split(":", 1)[1]))
    if spec.startswith("infinite:"):
        return LineModel.infinite(int(spec.split(":", 1)[1]))
    raise ValueError("line must be geometric, fixed:STEPS, or infinite:STEPS")


def cmd_simulate(args):
    policy = load_policy(args.policy)
    line = _parse_line(args.line, policy.dep.theta)
    traces = run_deployments(policy, line, policy.channel, policy.pmf,
                             args.seed, args.runs)
    stats = simulate(policy, line, policy.channel, policy.pmf,
                     args.seed, args.runs)
    os.makedirs(args.out, exist_ok=True)
    write_stats_json(stats, os.path.join(args.out, "stats.json"))
    write_traces_csv(traces, os.path.join(args.out, "traces.csv"))
    print("written: %s" % os.path.join(args.out, "stats.json"))
    print("written: %s" % os.path.join(args.out, "traces.csv"))
    if stats.per_step:
        print("cost_per_step: %s +/- %s"
              % (fmt(stats.mean_cost_sum), fmt(stats.half_width_sum)))
    else:
        print("mean_cost_sum: %s +/- %s"
              % (fmt(stats.mean_cost_sum), fmt(stats.half_width_sum)))
        print("mean_cost_max: %s +/- %s"
              % (fmt(stats.mean_cost_max), fmt(stats.half_width_max)))
    return EXIT_OK


def cmd_score(args):
    """Print the decision scores a policy assigns to a measured window (or
    a single measurement for no-backtracking policies)."""
    policy = load_policy(args.policy)
    dep = policy.dep
    w_vals = [float(x) for x in args.w.split(",")]
    variant = policy.variant
    gm = args.gamma_max

    if variant in ("geo-sum", "geo-max"):
        if args.r is None:
            raise ValueError("--r is required for no-backtracking policies")
        r = args.r
        if variant == "geo-sum":
            gamma, score = min_power_cost(policy.channel, r, dep.delta_m,
                                          w_vals[0], dep.powers, dep.xi_o)
            th = (policy.c_th[r - dep.A - 1] if r < dep.window_end else None)
        else:
            from .geo_solvers import _power_level
            from .channel import outage_probability
            m = _power_level(dep, gm)
            powers = np.asarray(dep.powers)
            pout = outage_probability(policy.channel, r, dep.delta_m, powers,
                                      w_vals[0])
            lvl = np.maximum(np.arange(1, len(powers) + 1), m)
            obj = dep.xi_o * pout + policy.v_zero_g[lvl]
            j = int(np.argmin(obj))
            gamma, score = float(powers[j]), float(obj[j])
            th = (policy.c_th_g[r - dep.A - 1, m] if r < dep.window_end
                  else None)
        place = bool(r == dep.window_end or score <= th)
        print("r=%d gamma=%s score=%s threshold=%s place=%s"
              % (r, fmt(gamma), fmt(score),
                 "-" if th is None else fmt(th), place))
        return EXIT_OK

    if len(w_vals) != dep.B:
        raise ValueError("window needs exactly B=%d values" % dep.B)
    rows = []
    for i, u in enumerate(range(dep.A + 1, dep.window_end + 1)):
        if variant == "average-cost":
            obj = avg_scores(policy, u, w_vals[i])
        else:
            obj = bt_scores(policy, u, w_vals[i], gm)
        for gamma, s in zip(dep.powers, obj):
            rows.append((u, gamma, float(s)))
    if variant == "average-cost":
        u_star, g_star = decide_avg(policy, np.array(w_vals))
    else:
        d = decide_bt(policy, np.array(w_vals), gamma_max=gm) \
            if variant == "bt-max" else decide_bt(policy, np.array(w_vals))
        u_star, g_star = d.u, d.gamma
    for u, gamma, s in rows:
        star = " *" if (u == u_star and gamma == g_star) else ""
        print("u=%d gamma=%s score=%s%s" % (u, fmt(gamma), fmt(s), star))
    if args.json_out:
        doc = {"variant": variant, "w": w_vals, "gamma_max_mw": gm,
               "chosen": {"u": u_star, "gamma_mw": g_star},
               "scores": [{"u": u, "gamma_mw": g, "score": s}
                          for u, g, s in rows]}
        with open(args.json_out, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        print("written: %s" % args.json_out)
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    from .service import build_app
    from .session import SessionStore

    policies = {}
    if not os.path.isdir(args.policies):
        print("policy directory %r not found" % args.policies, file=sys.stderr)
        return EXIT_SERVICE
    for name in sorted(os.listdir(args.policies)):
        if name.endswith(".json"):
            pid = name[:-5]
            policies[pid] = load_policy(os.path.join(args.policies, name))
    if not policies:
        print("no policy files in %r" % args.policies, file=sys.stderr)
        return EXIT_SERVICE
    host, _, port = args.addr.partition(":")
    store = SessionStore(policies, store_dir=args.store)
    app = build_app(store)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000),
                    log_level="warning")
    except (OSError, ValueError) as e:
        print("service failed: %s" % e, file=sys.stderr)
        return EXIT_SERVICE
    return EXIT_OK


def _add_common(p):
    p.add_argument("--params", default=None,
                   help="JSON parameter file (default: $RELAYDEPLOY_PARAMS "
                        "or built-in reference values)")
    p.add_argument("--xi-r", dest="xi_r", type=float, default=None)
    p.add_argument("--xi-o", dest="xi_o", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--grid-step-db", dest="grid_step_db", type=float,
                   default=None, help="shadowing grid step in dB")
    p.add_argument("--fine", action="store_true",
                   help="use the 0.02 dB grid instead of 0.1 dB")


def build_parser():
    ap = argparse.ArgumentParser(prog="relaydeploy")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="solve a policy and write it to JSON")
    _add_common(p)
    p.add_argument("--variant", required=True,
                   choices=["geo-sum", "geo-max", "bt-sum", "bt-max",
                            "average-cost"])
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=10000)
    p.add_argument("--out", default=None, help="policy file to write")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("tables", help="reproduce the summary tables as CSV")
    _add_common(p)
    p.add_argument("--which", default="all",
                   help="comma list out of I,II,III,IV (default all)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_tables)

    p = sub.add_parser("simulate", help="Monte-Carlo a policy file")
    p.add_argument("--policy", required=True)
    p.add_argument("--line", default="geometric",
                   help="geometric | fixed:STEPS | infinite:STEPS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("score", help="dump decision scores for a window")
    p.add_argument("--policy", required=True)
    p.add_argument("--w", required=True,
                   help="comma list of shadowing gains (B values for "
                        "window policies, one for --r)")
    p.add_argument("--r", type=int, default=None,
                   help="offset for no-backtracking policies")
    p.add_argument("--gamma-max", dest="gamma_max", type=float, default=None)
    p.add_argument("--json-out", dest="json_out", default=None)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--policies", required=True,
                   help="directory of policy JSON files")
    p.add_argument("--store", default=None,
                   help="directory for session event logs")
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
