import numpy as np
import pytest

from hazardssm import DgpSpec, GibbsConfig, PriorSpec, run_gibbs, simulate_dgp
from hazardssm.ssm import ModelParams


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger jit compilation once so timed tests measure steady-state cost."""
    sim = simulate_dgp(DgpSpec(seed=0, T=12))
    run_gibbs(sim.y, sim.design().values, PriorSpec(),
              GibbsConfig(n_iter=4, burn_in=1, seed=0))
    return True


def fit_init(p: int, alpha0) -> ModelParams:
    return ModelParams(beta=np.zeros(p), sigma_y2=1.0, sigma_mu2=1.0,
                       sigma_nu2=1.0, alpha0=alpha0)
