import numpy as np
import pytest
from hypothesis import settings

# derandomised so that repeated runs of the suite see the same examples
settings.register_profile("repo", deadline=None, derandomize=True, max_examples=25)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def cgl():
    from truncdefect import models, wave_trains

    system = models.default_defect_model()
    wt = wave_trains.find_wave_train(system, wave_trains.circle_guess(), 16)
    disp = wave_trains.dispersion(system, wt)
    return system, wt, wave_trains.reduced_coefficients(disp)


@pytest.fixture(scope="session")
def short_defect(cgl):
    """Defect on ``[-20, 20]`` from the blend guess, with the default grid."""
    from truncdefect import defect_bvp
    from truncdefect.harness import initial_frequency

    system, wt, rc = cgl
    grid = defect_bvp.SpaceTimeGrid(20.0, 512, 16, 0.078)
    U0 = defect_bvp.build_initial_guess(wt, grid, width=2.0, profile="blend")
    om0 = initial_frequency(wt.omega_d, rc, 20.0, 6.0)
    return defect_bvp.newton_solve(system, grid, U0, om0, tol=1e-10, omega_d=wt.omega_d,
                                   orientation=rc.orientation)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
