"""Versioned JSON serialization for solved policies.

One document family covers all five variants. Parameters are echoed in
full so a policy file is self-contained; the shadowing grid is stored as
its recipe when it came from quantize_shadowing (three numbers instead of
thousands) and as explicit arrays otherwise. Arrays round-trip through
repr-exact float lists, so save/load is bit-identical.
"""

import json

import numpy as np

from .channel import ChannelParams, DeploymentParams, ShadowingPmf, quantize_shadowing
from .geo_solvers import GeoSumPolicy, GeoMaxPolicy
from .bt_solvers import BtSumPolicy, BtMaxPolicy
from .avg_solver import AvgPolicy

FORMAT = "relay-policy"
VERSION = 1


def _params_doc(channel, pmf, dep):
    doc = {
        "channel": {
            "eta": channel.eta, "c": channel.c, "r0": channel.r0,
            "p_rcv_min": channel.p_rcv_min, "sigma_db": channel.sigma_db,
            "fading": channel.fading,
        },
        "deployment": {
            "delta_m": dep.delta_m, "A": dep.A, "B": dep.B,
            "powers": list(dep.powers), "theta": dep.theta,
            "xi_r": dep.xi_r, "xi_o": dep.xi_o,
        },
    }
    if pmf.grid is not None:
        sigma_db, step_db, range_mult = pmf.grid
        doc["shadowing"] = {"kind": "lognormal-db-grid", "sigma_db": sigma_db,
                            "step_db": step_db, "range_mult": range_mult}
    else:
        doc["shadowing"] = {"kind": "explicit",
                            "support": pmf.support.tolist(),
                            "probs": pmf.probs.tolist()}
    return doc


def _params_from_doc(doc):
    ch = doc["channel"]
    channel = ChannelParams(eta=ch["eta"], c=ch["c"], r0=ch["r0"],
                            p_rcv_min=ch["p_rcv_min"], sigma_db=ch["sigma_db"],
                            fading=ch.get("fading", "exponential"))
    dp = doc["deployment"]
    dep = DeploymentParams(delta_m=dp["delta_m"], A=dp["A"], B=dp["B"],
                           powers=tuple(dp["powers"]), theta=dp["theta"],
                           xi_r=dp["xi_r"], xi_o=dp["xi_o"])
    sh = doc["shadowing"]
    if sh["kind"] == "lognormal-db-grid":
        pmf = quantize_shadowing(sh["sigma_db"], sh["step_db"], sh["range_mult"])
    elif sh["kind"] == "explicit":
        pmf = ShadowingPmf(np.array(sh["support"]), np.array(sh["probs"]))
    else:
        raise ValueError("unknown shadowing kind %r" % (sh["kind"],))
    return channel, pmf, dep


def _solver_doc(policy):
    return {"iterations": policy.iterations, "residual": policy.residual,
            "converged": policy.converged,
            "tol": getattr(policy, "tol", None)}


def policy_to_dict(policy):
    doc = {"format": FORMAT, "version": VERSION, "variant": policy.variant,
           "params": _params_doc(policy.channel, policy.pmf, policy.dep)}
    if isinstance(policy, GeoSumPolicy):
        doc["tables"] = {"v_r": policy.v_r.tolist(), "v_zero": policy.v_zero,
                         "c_th": policy.c_th.tolist()}
        doc["solver"] = _solver_doc(policy)
    elif isinstance(policy, GeoMaxPolicy):
        doc["tables"] = {"v_r_g": policy.v_r_g.tolist(),
                         "v_zero_g": policy.v_zero_g.tolist(),
                         "c_th_g": policy.c_th_g.tolist()}
        doc["solver"] = _solver_doc(policy)
    elif isinstance(policy, BtSumPolicy):
        doc["tables"] = {"j_z": policy.j_z.tolist(), "v_bar": policy.v_bar}
        doc["solver"] = _solver_doc(policy)
    elif isinstance(policy, BtMaxPolicy):
        doc["tables"] = {"j_z_g": policy.j_z_g.tolist(),
                         "v_bar_g": policy.v_bar_g.tolist()}
        doc["solver"] = _solver_doc(policy)
    elif isinstance(policy, AvgPolicy):
        doc["tables"] = {"lambda_star": policy.lambda_star,
                         "iteration_history": list(policy.iteration_history)}
        doc["solver"] = {"iterations": policy.iterations,
                         "residual": 0.0 if policy.converged else None,
                         "converged": policy.converged, "tol": None}
    else:
        raise TypeError("unknown policy type %r" % (type(policy),))
    return doc


def policy_from_dict(doc):
    if doc.get("format") != FORMAT:
        raise ValueError("not a policy document")
    if doc.get("version") != VERSION:
        raise ValueError("unsupported policy version %r" % (doc.get("version"),))
    channel, pmf, dep = _params_from_doc(doc["params"])
    t = doc["tables"]
    s = doc.get("solver", {})
    common = dict(iterations=s.get("iterations", 0),
                  residual=s.get("residual", 0.0) or 0.0,
                  converged=s.get("converged", True),
                  tol=s.get("tol") or 0.0,
                  channel=channel, pmf=pmf, dep=dep)
    variant = doc["variant"]
    if variant == "geo-sum":
        return GeoSumPolicy(v_r=np.array(t["v_r"]), v_zero=t["v_zero"],
                            c_th=np.array(t["c_th"]), **common)
    if variant == "geo-max":
        return GeoMaxPolicy(v_r_g=np.array(t["v_r_g"]),
                            v_zero_g=np.array(t["v_zero_g"]),
                            c_th_g=np.array(t["c_th_g"]), **common)
    if variant == "bt-sum":
        return BtSumPolicy(j_z=np.array(t["j_z"]), v_bar=t["v_bar"], **common)
    if variant == "bt-max":
        return BtMaxPolicy(j_z_g=np.array(t["j_z_g"]),
                           v_bar_g=np.array(t["v_bar_g"]), **common)
    if variant == "average-cost":
        return AvgPolicy(lambda_star=t["lambda_star"],
                         iteration_history=tuple(t["iteration_history"]),
                         iterations=s.get("iterations", 0),
                         converged=s.get("converged", True),
                         channel=channel, pmf=pmf, dep=dep)
    raise ValueError("unknown policy variant %r" % (variant,))


def save_policy(policy, path):
    with open(path, "w") as f:
        json.dump(policy_to_dict(policy), f, indent=2, sort_keys=True)
        f.write("\n")


def load_policy(path):
    with open(path) as f:
        return policy_from_dict(json.load(f))
