import numpy as np
import pytest

from relaydeploy.channel import ChannelParams, DeploymentParams, ShadowingPmf
from relaydeploy.config import default_channel, default_deployment
from relaydeploy.channel import quantize_shadowing


@pytest.fixture(scope="session")
def ref_channel():
    return default_channel()


@pytest.fixture(scope="session")
def ref_dep():
    return default_deployment()


@pytest.fixture(scope="session")
def coarse_pmf(ref_channel):
    return quantize_shadowing(ref_channel.sigma_db, 0.1)


def spec_tiny():
    """The small instance used throughout: 3 shadowing atoms, A=1, B=2,
    two powers, theta=0.3."""
    channel = ChannelParams(eta=3.0, c=1.0, r0=1.0, p_rcv_min=1e-9,
                            sigma_db=7.0)
    pmf = ShadowingPmf(np.array([0.3, 1.0, 3.0]),
                       np.array([0.25, 0.5, 0.25]))
    dep = DeploymentParams(delta_m=6.0, A=1, B=2, powers=(0.01, 0.1),
                           theta=0.3, xi_r=0.02, xi_o=2.0)
    return channel, pmf, dep
