"""Physical layer model: lognormal shadowing grid and the outage probability
of a single link.

Everything downstream (solvers, simulator, session service) consumes the
channel only through the three functions here, so units are fixed once:
powers in mW, distances in meters, shadowing as a linear (dimensionless)
multiplicative gain.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """Propagation model parameters.

    eta        : path-loss exponent
    c          : reference path-loss gain, linear scale
    r0         : reference distance in meters
    p_rcv_min  : received-power outage threshold in mW
    sigma_db   : shadowing standard deviation in dB
    fading     : fading law tag; only unit-mean 'exponential' is supported
                 (Rayleigh amplitude, so the power gain is Exp(1))
    """

    eta: float
    c: float
    r0: float
    p_rcv_min: float
    sigma_db: float
    fading: str = "exponential"

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")
        if self.p_rcv_min <= 0:
            raise ValueError("p_rcv_min must be positive")
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be nonnegative")
        if self.fading != "exponential":
            raise ValueError("unsupported fading law: %r" % (self.fading,))


@dataclass(frozen=True)
class DeploymentParams:
    """Shape of the decision problem.

    delta_m : step length in meters
    A       : steps skipped after each placed node before measuring
    B       : measured window size; placement happens between A+1 and A+B
    powers  : ascending tuple of allowed transmit powers, mW
    theta   : probability the line ends at the next step; 0 encodes the
              infinite line used by the average-cost formulation
    xi_r    : cost of placing one relay
    xi_o    : cost weight per unit outage probability
    """

    delta_m: float
    A: int
    B: int
    powers: tuple
    theta: float
    xi_r: float
    xi_o: float

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        if self.delta_m <= 0:
            raise ValueError("delta_m must be positive")
        if self.A < 0:
            raise ValueError("A must be nonnegative")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if len(self.powers) == 0:
            raise ValueError("powers must be non-empty")
        if any(p <= 0 for p in self.powers):
            raise ValueError("powers must be positive")
        if any(b <= a for a, b in zip(self.powers, self.powers[1:])):
            raise ValueError("powers must be strictly ascending")
        if not (0 <= self.theta < 1):
            raise ValueError("theta must lie in [0, 1)")
        if self.xi_r < 0 or self.xi_o < 0:
            raise ValueError("cost weights must be nonnegative")

    @property
    def window_end(self):
        """Largest candidate offset A+B, in steps."""
        return self.A + self.B


@dataclass(frozen=True, eq=False)
class ShadowingPmf:
    """Discretized lognormal shadowing distribution.

    support : strictly increasing linear shadowing gains w
    probs   : matching probabilities, summing to 1
    grid    : (sigma_db, step_db, range_mult) when built by
              quantize_shadowing, else None; kept so a policy file can
              record how to rebuild the grid instead of storing 2801 floats
    """

    support: np.ndarray
    probs: np.ndarray
    grid: tuple = field(default=None)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        if support.ndim != 1 or support.shape != probs.shape:
            raise ValueError("support and probs must be 1-d and equally long")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(probs < 0):
            raise ValueError("probs must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must sum to 1")

    def __len__(self):
        return len(self.support)

    @property
    def support_db(self):
        return 10.0 * np.log10(self.support)

    def mean(self):
        return float(self.probs @ self.support)


def quantize_shadowing(sigma_db, step_db, range_mult=4.0):
    """Build a ShadowingPmf on a uniform dB grid over [-range_mult*sigma,
    +range_mult*sigma].

    Probabilities are proportional to the Gaussian density at the grid
    points and renormalized to sum to exactly 1 (the discarded tail is
    tiny for range_mult=4; renormalizing keeps pmf invariants exact).
    """
    if step_db <= 0:
        raise ValueError("step_db must be positive")
    if range_mult <= 0:
        raise ValueError("range_mult must be positive")
    if sigma_db < 0:
        raise ValueError("sigma_db must be nonnegative")
    if sigma_db == 0:
        return ShadowingPmf(np.array([1.0]), np.array([1.0]),
                            grid=(0.0, float(step_db), float(range_mult)))
    half = int(round(range_mult * sigma_db / step_db))
    y = np.arange(-half, half + 1) * step_db
    dens = np.exp(-0.5 * (y / sigma_db) ** 2)
    probs = dens / dens.sum()
    support = 10.0 ** (y / 10.0)
    return ShadowingPmf(support, probs,
                        grid=(float(sigma_db), float(step_db), float(range_mult)))


def outage_probability(params, r_steps, delta_m, gamma, w):
    """Probability that a packet over a link of r_steps steps is received
    below p_rcv_min, given transmit power gamma (mW) and shadowing gain w.

    With unit-mean exponential fading H the received power is
    gamma * c * w * H * (d/r0)^-eta, so the outage event H < threshold has
    probability 1 - exp(-p_rcv_min * (d/r0)^eta / (gamma c w)).

    gamma and w may be arrays (broadcast together).
    """
    gamma = np.asarray(gamma, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    if np.any(w <= 0):
        raise ValueError("w must be positive")
    if np.any(np.asarray(r_steps) < 1):
        raise ValueError("r_steps must be at least 1")
    d = r_steps * delta_m
    expo = params.p_rcv_min * (d / params.r0) ** params.eta / (params.c * gamma * w)
    out = -np.expm1(-expo)
    if out.ndim == 0:
        return float(out)
    return out


def min_power_cost(params, r_steps, delta_m, w, powers, xi_o):
    """Best power for one link: minimize gamma + xi_o * P_out over the
    discrete power set.

    Returns (gamma_star, cost). Ties break toward the smallest power
    (powers are ascending and argmin takes the first minimum).
    """
    powers = np.asarray(powers, dtype=float)
    if powers.size == 0:
        raise ValueError("powers must be non-empty")
    cost = powers + xi_o * outage_probability(params, r_steps, delta_m, powers, w)
    j = int(np.argmin(cost))
    return float(powers[j]), float(cost[j])
