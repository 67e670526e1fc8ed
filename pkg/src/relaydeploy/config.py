"""Parameter loading.

Channel and deployment parameters come either from built-in defaults (the
measured forest-environment fit we calibrated against) or from a JSON file.
In files, powers and the receiver threshold are written in dBm because
that is how people quote them; internally everything is mW.
"""

import json
import os

from .channel import ChannelParams, DeploymentParams

ENV_PARAMS = "RELAYDEPLOY_PARAMS"


def dbm_to_mw(x):
    return 10.0 ** (x / 10.0)


def mw_to_dbm(x):
    import math
    return 10.0 * math.log10(x)


def default_channel():
    """Reference channel fit: eta=3.8, c=10^0.00054, sigma=7 dB,
    outage threshold -88 dBm, r0 = 1 m."""
    return ChannelParams(eta=3.8, c=10.0 ** 0.00054, r0=1.0,
                         p_rcv_min=10.0 ** -8.8, sigma_db=7.0)


def default_deployment(xi_r=0.001, xi_o=1.0, theta=0.04):
    """Reference decision problem: 6 m steps, A=5, B=5, powers
    {-25,-15,-10,-5,0} dBm."""
    powers = tuple(dbm_to_mw(x) for x in (-25.0, -15.0, -10.0, -5.0, 0.0))
    return DeploymentParams(delta_m=6.0, A=5, B=5, powers=powers,
                            theta=theta, xi_r=xi_r, xi_o=xi_o)


def _channel_from_dict(d):
    if "p_rcv_min_dbm" in d:
        p_rcv_min = dbm_to_mw(d["p_rcv_min_dbm"])
    elif "p_rcv_min_mw" in d:
        p_rcv_min = d["p_rcv_min_mw"]
    else:
        raise KeyError("channel config needs p_rcv_min_dbm or p_rcv_min_mw")
    return ChannelParams(eta=d["eta"], c=d["c"], r0=d.get("r0_m", 1.0),
                         p_rcv_min=p_rcv_min, sigma_db=d["sigma_db"],
                         fading=d.get("fading", "exponential"))


def _deployment_from_dict(d):
    if "powers_dbm" in d:
        powers = tuple(dbm_to_mw(x) for x in d["powers_dbm"])
    elif "powers_mw" in d:
        powers = tuple(d["powers_mw"])
    else:
        raise KeyError("deployment config needs powers_dbm or powers_mw")
    return DeploymentParams(delta_m=d["delta_m"], A=d["A"], B=d["B"],
                            powers=powers, theta=d["theta"],
                            xi_r=d["xi_r"], xi_o=d["xi_o"])


def load_params(path=None):
    """Load (ChannelParams, DeploymentParams) from a JSON file.

    With path=None, falls back to $RELAYDEPLOY_PARAMS, then to the built-in
    defaults. The file holds two objects, "channel" and "deployment";
    either may be omitted to use the default for that half.
    """
    if path is None:
        path = os.environ.get(ENV_PARAMS)
    if path is None:
        return default_channel(), default_deployment()
    with open(path) as f:
        doc = json.load(f)
    channel = (_channel_from_dict(doc["channel"]) if "channel" in doc
               else default_channel())
    dep = (_deployment_from_dict(doc["deployment"]) if "deployment" in doc
           else default_deployment())
    return channel, dep
