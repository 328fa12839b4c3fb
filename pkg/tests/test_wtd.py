import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from qcstats.core import ModelError, SingularSystemError
from qcstats.currents import dynamical_activity
from qcstats.lindblad import basis_projector
from qcstats.models import ExampleAParams, ExampleBParams, ExampleDParams, QPCParams, build
from qcstats.wtd import (
    jump_map_spectrum,
    jump_steady_state,
    log_time_grid,
    no_jump_generator,
    renewal_check,
    survival,
    transition_matrix,
    wtd_between,
    wtd_first,
    wtd_moments,
)

GROUND = basis_projector(2, 0)
EXCITED = basis_projector(2, 1)


def _driven_qubit():
    return build(ExampleAParams(gamma=1.0, Omega=1.0, nbar=0.5))


def test_survival_of_decaying_qubit():
    model = build(ExampleAParams(gamma=1.0, Omega=0.0, nbar=0.0))
    t = np.linspace(0.0, 5.0, 11)
    result = survival(model, None, EXCITED, t)
    assert result.values[0] == pytest.approx(1.0)
    np.testing.assert_allclose(result.values, np.exp(-t), atol=1e-10)
    assert result.dark_mass == pytest.approx(0.0, abs=1e-10)


def test_survival_of_empty_cavity_is_dark():
    model = build(ExampleDParams(G=0.0, fock_cutoff=4))
    result = survival(model, None, basis_projector(4, 0), [0.0, 1.0, 10.0])
    np.testing.assert_allclose(result.values, 1.0, atol=1e-12)
    assert result.dark_mass == pytest.approx(1.0)
    with pytest.raises(SingularSystemError):
        wtd_moments(model, rho0=basis_projector(4, 0))


def test_first_jump_distribution_of_decaying_qubit():
    model = build(ExampleAParams(gamma=2.0, Omega=0.0, nbar=0.0))
    t = np.linspace(0.0, 3.0, 7)
    w = wtd_first(model, None, EXCITED, t)
    assert w.shape == (7, 2)
    np.testing.assert_allclose(w[:, 0], 2.0 * np.exp(-2.0 * t), atol=1e-10)
    np.testing.assert_allclose(w[:, 1], 0.0, atol=1e-14)


def test_first_jump_distribution_integrates_to_one():
    model = _driven_qubit()
    t = np.linspace(0.0, 40.0, 8001)
    w = wtd_first(model, None, GROUND, t)
    assert trapezoid(w.sum(axis=1), t) == pytest.approx(1.0, abs=1e-4)


def test_mean_waiting_time_is_inverse_activity():
    model = _driven_qubit()
    moments = wtd_moments(model)
    steady = jump_steady_state(model)
    assert moments.mean == pytest.approx(1.0 / steady.activity, rel=1e-10)
    assert steady.activity == pytest.approx(dynamical_activity(model), rel=1e-10)


def test_channel_resolved_moments_are_consistent():
    moments = wtd_moments(_driven_qubit(), n=3)
    assert moments.moments.shape == (3,)
    assert sum(moments.probabilities.values()) == pytest.approx(1.0, abs=1e-10)
    assert moments.total_average_residual() <= 1e-10
    assert moments.total_variance_residual() <= 1e-10
    assert moments.variance > 0


def test_moment_order_must_be_positive():
    with pytest.raises(ModelError):
        wtd_moments(_driven_qubit(), n=0)


def test_jump_steady_state_is_a_fixed_point():
    model = _driven_qubit()
    steady = jump_steady_state(model)
    assert steady.fixed_point_residual <= 1e-10
    assert sum(steady.probabilities.values()) == pytest.approx(1.0)
    assert np.trace(steady.state).real == pytest.approx(1.0)


def test_jump_map_has_unit_eigenvalue():
    spectrum = jump_map_spectrum(_driven_qubit())
    assert abs(spectrum[0]) == pytest.approx(1.0, abs=1e-10)
    assert np.min(np.abs(spectrum - 1.0)) <= 1e-10


def test_transition_matrix_is_stochastic():
    matrix = transition_matrix(_driven_qubit())
    assert matrix.shape == (2, 2)
    assert np.all(matrix >= -1e-12)
    np.testing.assert_allclose(matrix.sum(axis=0), 1.0, atol=1e-10)


def test_wait_after_emission_starts_from_ground():
    model = build(ExampleAParams(gamma=1.0, Omega=0.7, nbar=0.0))
    t = np.linspace(0.0, 10.0, 21)
    after = wtd_between(model, None, "emit", t)
    np.testing.assert_allclose(after, wtd_first(model, None, GROUND, t), atol=1e-12)
    with pytest.raises(ModelError):
        wtd_between(model, None, "absorb", t)


def test_renewal_identity_for_single_emission_channel():
    model = build(ExampleAParams(gamma=1.0, Omega=0.8, nbar=0.0))
    report = renewal_check(model, ["emit"])
    assert report.is_renewal == {"emit": True}
    assert report.noise_residual <= 1e-8


@pytest.mark.parametrize(
    "params",
    [ExampleBParams.symmetric_large_bias(gamma=1.0), ExampleBParams(gamma_l=1.0, gamma_r=0.5, f_left=0.2, f_right=0.7)],
    ids=["large-bias", "biased"],
)
def test_renewal_identity_for_dot_out_channel(params):
    report = renewal_check(build(params), ["L_out"])
    assert report.is_renewal["L_out"]
    assert report.noise_residual <= 1e-8


def test_cavity_loss_is_not_renewal():
    report = renewal_check(build(ExampleDParams(G=0.3j, fock_cutoff=10)))
    assert report.is_renewal == {"loss": False}
    assert report.noise_residual is None


def test_unmonitored_channels_are_rejected():
    model = build(QPCParams())
    with pytest.raises(ModelError):
        no_jump_generator(model, ["L_out"])
    assert no_jump_generator(model).labels == ["qpc"]


def test_log_time_grid():
    model = _driven_qubit()
    grid = log_time_grid(model, n=50)
    assert grid.size == 50
    assert np.all(np.diff(grid) > 0)
    assert grid[0] == pytest.approx(1e-3 / jump_steady_state(model).activity)
    assert math.isfinite(grid[-1])
