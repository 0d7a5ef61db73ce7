import math

import pytest

from drivenjj import params, workflows


@pytest.fixture(scope="session")
def two_one_point():
    """Floquet-Markov result at the documented (2:1) working point.

    beta = 0.5, lambda = 0.6, xi_d = 3.3, nu_d = 1.96: four dominant
    cat modes, pairwise degenerate, plus a weakly occupied displaced
    vacuum. Shared across markov / quantum / workflow tests.
    """
    model = params.NormalizedModel(
        beta=0.5, lambda_=0.6, nu_d=1.96, xi_d=3.3, q_tilde=math.inf
    )
    settings = workflows.QuantumSettings(
        dim=200, steps_per_period=256, n_t=64, n_keep=60, m_max=5,
        auto_converge=False,
    )
    return workflows.floquet_markov_point(model, settings)
