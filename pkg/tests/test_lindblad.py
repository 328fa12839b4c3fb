import math

import numpy as np
import pytest

from qcstats.core import DegenerateSteadyStateError, ModelError
from qcstats.lindblad import (
    JumpChannel,
    LindbladModel,
    VectorizedLiouvillian,
    adjoint,
    basis_projector,
    coherent_state,
    destroy,
    drazin,
    drazin_apply,
    expectation,
    fock_leakage,
    heisenberg,
    propagate,
    sigma_minus,
    sigma_plus,
    sigma_x,
    sigma_z,
    spost,
    spre,
    sprepost,
    steady_state,
    steady_vector,
    unvec,
    validate_density_matrix,
    vec,
    vectorize,
)
from qcstats.models import ExampleAParams, ExampleDParams, build


def _rho(d, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ a.conj().T
    return r / np.trace(r)


def test_vec_unvec_and_superoperator_builders():
    a, b, r = _rho(3, 1), _rho(3, 2), _rho(3, 3)
    assert np.allclose(unvec(vec(r)), r)
    assert np.allclose(unvec(spre(a) @ vec(r)), a @ r)
    assert np.allclose(unvec(spost(b) @ vec(r)), r @ b)
    assert np.allclose(unvec(sprepost(a, b) @ vec(r)), a @ r @ b)


def test_model_validation():
    with pytest.raises(ModelError):
        LindbladModel(hamiltonian=[[0, 1], [0, 0]])
    with pytest.raises(ModelError):
        LindbladModel(hamiltonian=np.eye(2), channels=(JumpChannel("a", np.eye(3)),))
    with pytest.raises(ModelError):
        LindbladModel(
            hamiltonian=np.eye(2),
            channels=(JumpChannel("a", sigma_minus()), JumpChannel("a", sigma_plus())),
        )
    with pytest.raises(ModelError):
        JumpChannel("a", sigma_minus(), efficiency=1.5)


def test_vectorized_liouvillian_is_trace_preserving():
    liou = vectorize(build(ExampleAParams(gamma=1.0, Omega=0.7, Delta=0.3, nbar=0.4)))
    assert liou.trace_residual() < 1e-12
    assert liou.zero_mode_count() == 1


def test_steady_state_of_thermal_qubit():
    p = ExampleAParams(gamma=1.0, Omega=0.0, nbar=0.3)
    rho = steady_state(vectorize(build(p)))
    sz = expectation(rho, sigma_z()).real
    assert sz == pytest.approx(-1.0 / (2 * p.nbar + 1), abs=1e-12)
    validate_density_matrix(rho)


def test_degenerate_steady_state_detected():
    model = LindbladModel(hamiltonian=np.zeros((2, 2)))
    with pytest.raises(DegenerateSteadyStateError):
        steady_vector(vectorize(model))


def test_drazin_properties():
    liou = vectorize(build(ExampleAParams(gamma=1.0, Omega=1.3, Delta=0.2, nbar=0.1)))
    lp = drazin(liou)
    m = liou.matrix
    rho = steady_vector(liou)
    assert np.allclose(m @ lp @ m, m, atol=1e-10)
    assert np.allclose(lp @ m @ lp, lp, atol=1e-10)
    assert np.allclose(lp @ m, m @ lp, atol=1e-10)
    assert np.allclose(liou.trace_row @ lp, 0, atol=1e-10)
    assert np.allclose(lp @ rho, 0, atol=1e-10)
    v = np.arange(4.0) + 1j
    assert np.allclose(drazin_apply(liou, v), lp @ v, atol=1e-10)


def test_drazin_matches_closed_form():
    from qcstats.models import oracle

    p = ExampleAParams(gamma=1.0, Omega=1.0)
    assert np.max(np.abs(drazin(vectorize(build(p))) - oracle(p, "drazin"))) < 1e-10


def test_propagate_reaches_steady_state_and_preserves_trace():
    liou = vectorize(build(ExampleAParams(gamma=1.0, Omega=1.0, nbar=0.2)))
    rho0 = basis_projector(2, 0)
    rho_t = propagate(liou, rho0, 0.8)
    assert np.trace(rho_t) == pytest.approx(1.0)
    assert np.allclose(propagate(liou, rho0, 60.0), steady_state(liou), atol=1e-10)
    assert np.allclose(propagate(liou, rho0, math.inf), steady_state(liou))


def test_heisenberg_is_dual_to_propagate():
    liou = vectorize(build(ExampleAParams(gamma=0.7, Omega=1.1, Delta=0.4, nbar=0.1)))
    rho0 = _rho(2, 5)
    t = 1.7
    lhs = expectation(propagate(liou, rho0, t), sigma_x())
    rhs = expectation(rho0, heisenberg(liou, sigma_x(), t))
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert adjoint(liou).trace_row is liou.trace_row


def test_efficiency_splits_channel_without_changing_dynamics():
    a = sigma_minus()
    full = LindbladModel(hamiltonian=sigma_x(), channels=(JumpChannel("emit", a),))
    split = LindbladModel(hamiltonian=sigma_x(), channels=(JumpChannel("emit", a, efficiency=0.4),))
    assert split.effective_sources() == (0, 0)
    assert [ch.label for ch in split.effective_channels()] == ["emit", "emit:lost"]
    assert np.allclose(vectorize(full).matrix, vectorize(split).matrix)


def test_classical_generator():
    rates = np.array([[0.0, 2.0], [1.0, 0.0]])
    liou = VectorizedLiouvillian.classical(rates)
    p = steady_vector(liou).real
    assert p == pytest.approx([2.0 / 3.0, 1.0 / 3.0])
    with pytest.raises(ModelError):
        steady_state(liou)


def test_fock_helpers_and_leakage_warning(caplog):
    a = destroy(4)
    assert np.allclose(a.conj().T @ a, np.diag([0, 1, 2, 3]))
    rho = coherent_state(12, 1.0)
    assert np.trace(rho) == pytest.approx(1.0)
    assert expectation(rho, destroy(12)) == pytest.approx(1.0, abs=1e-4)
    assert fock_leakage(np.diag([0.5, 0.3, 0.2])) == pytest.approx(0.5)

    model = build(ExampleDParams(G=0.45j, fock_cutoff=6))
    steady_state(vectorize(model))
    assert any(getattr(r, "event", None) == "fock_leakage" for r in caplog.records)


def test_validate_density_matrix():
    with pytest.raises(ModelError):
        validate_density_matrix(np.diag([0.6, 0.6]))
    with pytest.raises(ModelError):
        validate_density_matrix(np.diag([1.2, -0.2]))
