import numpy as np
import pytest

from ris_ee.model import ChannelRealization, SystemConfig


def rand_channel(rng, k, n, m):
    cn = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2)
    return ChannelRealization(cn(n, m), cn(k, n))


def unit_config(n, m=None, p_max=1.0, sigma2=1e-2, **kw):
    return SystemConfig(M=m or 2 * n, N=n, K=kw.pop("K", n), P_max=p_max, sigma2=sigma2,
                        pathloss_ref=1.0, pathloss_exp=0.0, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
