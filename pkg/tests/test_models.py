"""Model systems: Jacobians, gauge symmetry and parameter validation."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from truncdefect import models


@given(w0=st.floats(-2.0, 2.0), gamma=st.floats(-2.0, 2.0))
def test_lambda_omega_jacobian(w0, gamma):
    system = models.lambda_omega(models.LambdaOmegaParams(w0, gamma))
    assert system.jacobian_error() < 1e-7
    assert models.gauge_defect(system) < 1e-12


@given(re=st.floats(-1.0, 1.0), im=st.floats(-4.0, 4.0), q=st.floats(-1.0, -0.1))
def test_cgl_jacobian(re, im, q):
    system = models.cgl_quintic(models.CGLQuinticParams(cubic=(re, im), quintic=(q, 1.0)))
    assert system.jacobian_error() < 1e-6
    assert models.gauge_defect(system) < 1e-12


def test_default_model_reference_values():
    system = models.default_defect_model()
    assert system.homogeneous_amplitude_squared() == pytest.approx(1.0)
    assert system.reference_omega_d() == pytest.approx(1.0)
    assert system.reference_omega_nl_pp0() == pytest.approx(-1.2)


def test_rotation_is_orthogonal():
    R = models.rotation(0.7)
    assert np.allclose(R @ R.T, np.eye(2))


def test_invalid_parameters():
    with pytest.raises(ValueError):
        models.LambdaOmegaParams(D=(1.0, 0.0))
    with pytest.raises(ValueError):
        models.CGLQuinticParams(quintic=(0.5, 1.0))
    with pytest.raises(ValueError):
        models.ReactionDiffusionSystem(1, [1.0], None, None)
