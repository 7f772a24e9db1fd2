import numpy as np
import pytest

from skewspin import constructors, dwp


@pytest.fixture(scope="session")
def s2_cand():
    return constructors.build_s2_skew_killing()


@pytest.fixture(scope="session")
def s2xr2_cand():
    return constructors.build_s2xr2()


@pytest.fixture(scope="session")
def s2xr2_zero():
    return constructors.build_s2xr2(combo="aeta_zero")


@pytest.fixture(scope="session")
def product3d_cand(s2_cand):
    return constructors.build_product_3d(constructors.extend_to_3d(s2_cand))


@pytest.fixture(scope="session")
def dwp_bundle():
    flow = dwp.berger_flow(1.0, 1.0)
    profile = dwp.integrate_dwp(4.0, 1.0, 0.3, 1.0, (0.0, 0.5), 1e-3)
    cand = dwp.build_dwp_candidate(profile, flow)
    return flow, profile, cand


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
