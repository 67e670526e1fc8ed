"""Relay deployment toolkit: solvers, simulator, and session service for
placing wireless relays along a line as you walk it."""

__version__ = "0.1.0"

from .channel import (ChannelParams, DeploymentParams, ShadowingPmf,
                      quantize_shadowing, outage_probability, min_power_cost)
from .config import default_channel, default_deployment, load_params
from .geo_solvers import (GeoSumPolicy, GeoMaxPolicy, PlacementDecision,
                          solve_geo_sum, solve_geo_max, decide_geo)
from .bt_solvers import (BtSumPolicy, BtMaxPolicy, BtDecision,
                         solve_bt_sum, solve_bt_max, decide_bt,
                         expected_min_independent)
from .avg_solver import (AvgPolicy, ScoreRule, LambdaPrime,
                         policy_iteration_avg, evaluate_stationary_avg,
                         heuristic_decide, decide_avg,
                         average_cost_no_backtracking, lambda_rule,
                         heuristic_rule)
from .simulator import (LineModel, DeploymentTrace, DeploymentStats,
                        simulate, run_deployments, cost_breakdown,
                        write_traces_csv, write_stats_json)
from .policy_io import save_policy, load_policy, policy_to_dict, policy_from_dict
from .session import SessionStore, PROTOCOL_VERSION
