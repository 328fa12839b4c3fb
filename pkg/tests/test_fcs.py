import math

import numpy as np
import pytest
from scipy.signal import find_peaks

from qcstats.core import ModelError, NonCommensurateError
from qcstats.currents import CurrentSpec, noise
from qcstats.fcs import (
    MIN_LATTICE_POINTS,
    NEGATIVE_TOL,
    charge_distribution,
    cumulants_recursive,
    diffusive_decomposition,
    fluctuation_theorem_check,
    saddle_point,
    scgf,
    scgf_at,
    tilted_classical,
    tilted_diffusive,
    tilted_jump,
)
from qcstats.lindblad import basis_projector, coherent_state, vectorize
from qcstats.models import (
    ClassicalPauliParams,
    ExampleBParams,
    ExampleCParams,
    ExampleDParams,
    build,
    cavity_photocount_limit,
    oracle,
)

BIASED = ExampleBParams(gamma_l=1.0, gamma_r=0.5, f_left=0.2, f_right=0.7)


def _jump_tilt(params):
    model = build(params)
    return tilted_jump(model, CurrentSpec.from_model(model))


def _closed_form_cumulants(params, order, radius=0.3, points=64):
    # Cauchy integral of s -> C(-i s) on a circle around the origin
    theta = 2 * math.pi * np.arange(points) / points
    s = radius * np.exp(1j * theta)
    values = oracle(params, "scgf", -1j * s)
    return np.array(
        [
            math.factorial(n) * np.real(np.mean(values * np.exp(-1j * n * theta))) / radius**n
            for n in range(1, order + 1)
        ]
    )


def test_scgf_matches_closed_form():
    chis = np.linspace(-math.pi, math.pi, 257)
    values = scgf(_jump_tilt(BIASED), chis)
    assert np.max(np.abs(values - oracle(BIASED, "scgf", chis))) <= 1e-9


def test_scgf_vanishes_at_zero_and_complex_continuation():
    tilted = _jump_tilt(BIASED)
    assert abs(scgf_at(tilted, 0.0)) < 1e-12
    chi = complex(0.7, -0.4)
    assert scgf_at(tilted, chi) == pytest.approx(complex(oracle(BIASED, "scgf", chi)), abs=1e-9)


def test_recursive_cumulants():
    tilted = _jump_tilt(BIASED)
    cumulants = cumulants_recursive(tilted, 4)
    assert cumulants.shape == (4,)
    assert cumulants[0] == pytest.approx(oracle(BIASED, "J"), rel=1e-10)
    assert cumulants[1] == pytest.approx(oracle(BIASED, "D"), rel=1e-10)
    expected = _closed_form_cumulants(BIASED, 4)
    np.testing.assert_allclose(cumulants, expected, rtol=1e-6)


def test_recursive_cumulants_agree_with_noise():
    model = build(BIASED)
    result = noise(model)
    j, d = cumulants_recursive(_jump_tilt(BIASED), 2)
    assert j == pytest.approx(result.J, rel=1e-10)
    assert d == pytest.approx(result.D, rel=1e-10)


def test_cumulant_order_bounds():
    tilted = _jump_tilt(BIASED)
    with pytest.raises(ModelError):
        cumulants_recursive(tilted, 0)
    with pytest.raises(ModelError):
        cumulants_recursive(tilted, 99)


def test_distribution_at_zero_time_is_a_delta():
    dist = charge_distribution(_jump_tilt(BIASED), t=0.0)
    assert dist.at(0)[()] == 1.0
    assert dist.total() == 1.0
    with pytest.raises(ModelError):
        charge_distribution(_jump_tilt(BIASED), t=-1.0)


def test_distribution_is_normalized_with_matching_moments():
    tilted = _jump_tilt(BIASED)
    t = 20.0
    dist = charge_distribution(tilted, t=t)
    assert dist.support == "lattice"
    assert dist.charges.size >= MIN_LATTICE_POINTS
    assert dist.total() == pytest.approx(1.0, abs=1e-10)
    assert dist.mean() == pytest.approx(oracle(BIASED, "J") * t, rel=1e-8)
    assert dist.negative_excursion > -1e-10


def test_symmetric_large_bias_exact_law():
    params = ExampleBParams.symmetric_large_bias(gamma=1.0)
    dist = charge_distribution(_jump_tilt(params), t=10.0)
    n = np.arange(-2, 25)
    np.testing.assert_allclose(dist.at(n), oracle(params, "symmetric_exact", n, 10.0), atol=1e-8)


def test_slow_lead_poisson_law():
    params = ExampleBParams(gamma_l=1.0, gamma_r=1e-3, f_left=0.0, f_right=1.0)
    t = 5000.0
    dist = charge_distribution(_jump_tilt(params), t=t)
    n = np.arange(-10, 21)
    assert np.max(np.abs(dist.at(n) - oracle(params, "poisson", n, t))) <= 5e-3


def test_slow_lead_bidirectional_poisson_law():
    params = ExampleBParams(gamma_l=1.0, gamma_r=1e-3, f_left=1e-3, f_right=0.6)
    t = 5000.0
    dist = charge_distribution(_jump_tilt(params), t=t)
    n = np.arange(-10, 21)
    expected = oracle(params, "bipoisson", n, t)
    assert np.max(np.abs(dist.at(n) - expected)) <= 5e-3
    assert dist.at(-1)[()] > 0


def test_saddle_point_against_closed_form_and_fft():
    params = ExampleBParams.symmetric_large_bias(gamma=1.0)
    tilted = _jump_tilt(params)
    t = 10.0
    n = np.array([1.0, 2.0, 6.0])
    estimate = saddle_point(tilted, n, t)
    np.testing.assert_allclose(estimate, oracle(params, "saddle", n, t), rtol=0.05)

    dist = charge_distribution(tilted, t=t)
    for k in (2, 6):
        exact = dist.at(k)[()]
        assert abs(saddle_point(tilted, float(k), t) - exact) <= 0.1 * exact


def test_saddle_point_accepts_a_callable():
    params = ExampleBParams.symmetric_large_bias(gamma=1.0)
    estimate = saddle_point(lambda chi: complex(oracle(params, "scgf", chi)), 6.0, 10.0)
    assert estimate == pytest.approx(float(oracle(params, "saddle", 6.0, 10.0)), rel=1e-4)


def test_saddle_point_peak_is_gaussian_apex():
    tilted = _jump_tilt(BIASED)
    t = 200.0
    j, d = oracle(BIASED, "J"), oracle(BIASED, "D")
    apex = saddle_point(tilted, j * t, t)
    assert apex == pytest.approx(1.0 / math.sqrt(2 * math.pi * d * t), rel=1e-4)


def test_saddle_point_renormalize():
    params = ExampleBParams.symmetric_large_bias(gamma=1.0)
    values = saddle_point(_jump_tilt(params), np.arange(1, 30), 10.0, renormalize=True)
    assert values.sum() == pytest.approx(1.0)


def test_fluctuation_theorem_symmetry():
    params = ExampleBParams(energy=21.0, temp_l=2.0, temp_r=1.0, mu_l=10.0, mu_r=20.0)
    assert params.affinity == pytest.approx(4.5)
    assert fluctuation_theorem_check(_jump_tilt(params), params.affinity) <= 1e-8


def test_fluctuation_theorem_detects_wrong_affinity():
    params = ExampleBParams(energy=21.0, temp_l=2.0, temp_r=1.0, mu_l=10.0, mu_r=20.0)
    assert fluctuation_theorem_check(_jump_tilt(params), params.affinity + 1.0) > 1e-4


@pytest.mark.parametrize(
    "rho0",
    [
        basis_projector(6, 1),
        0.5 * (basis_projector(6, 0) + basis_projector(6, 2)),
    ],
    ids=["single-photon", "mixed-0-2"],
)
def test_cavity_photocounts_reproduce_initial_populations(rho0):
    model = build(ExampleDParams(G=0.0, fock_cutoff=6))
    tilted = tilted_jump(model, CurrentSpec.counting(model, "loss"))
    dist = charge_distribution(tilted, rho0, t=40.0)
    n = np.arange(6)
    np.testing.assert_allclose(dist.at(n), cavity_photocount_limit(rho0), atol=1e-6)


def test_cavity_photocounts_coherent_state():
    model = build(ExampleDParams(G=0.0, fock_cutoff=12))
    rho0 = coherent_state(12, 1.0)
    tilted = tilted_jump(model, CurrentSpec.counting(model, "loss"))
    dist = charge_distribution(tilted, rho0, t=40.0)
    n = np.arange(12)
    np.testing.assert_allclose(dist.at(n), cavity_photocount_limit(rho0), atol=1e-6)


def test_multi_field_tilt():
    model = build(BIASED)
    left = CurrentSpec.from_model(model)
    right = CurrentSpec(weights=(0.0, 0.0, 1.0, -1.0))
    tilted = tilted_jump(model, [left, right])
    assert tilted.n_fields == 2
    np.testing.assert_allclose(tilted.matrix(np.zeros(2)), vectorize(model).matrix, atol=1e-14)
    with pytest.raises(ModelError):
        tilted.matrix(0.3)
    with pytest.raises(ModelError):
        tilted.derivative(1)


def test_tilted_jump_rejects_diffusive_current():
    model = build(ExampleCParams())
    with pytest.raises(ModelError):
        tilted_jump(model, CurrentSpec.from_model(model, kind="diffusive"))


def test_non_commensurate_weights():
    model = build(BIASED)
    spec = CurrentSpec(weights=(1.0, -math.sqrt(2.0), 0.0, 0.0))
    tilted = tilted_jump(model, spec)
    with pytest.raises(NonCommensurateError):
        tilted.lattice_quantum()
    with pytest.raises(NonCommensurateError):
        charge_distribution(tilted, t=2.0, lattice=True)
    dist = charge_distribution(tilted, t=2.0)
    assert dist.support == "real"
    assert dist.total() == pytest.approx(1.0, abs=1e-6)


def test_half_integer_weights_use_a_finer_lattice():
    model = build(BIASED)
    tilted = tilted_jump(model, CurrentSpec(weights=(0.5, -1.0, 0.0, 0.0)))
    assert tilted.lattice_quantum() == pytest.approx(0.5)


def test_diffusive_decomposition():
    model = build(ExampleCParams(Gamma=1.0, Omega=1.0))
    tilted = tilted_diffusive(model, CurrentSpec.from_model(model, kind="diffusive"))
    full, reduced, residual = diffusive_decomposition(tilted, np.linspace(-1.0, 1.0, 21))
    assert residual <= 1e-10
    assert full.shape == reduced.shape == (21,)
    with pytest.raises(ModelError):
        diffusive_decomposition(_jump_tilt(BIASED), [0.1])


def test_diffusive_cumulants_match_oracle():
    params = ExampleCParams(Gamma=0.5, Omega=1.0)
    model = build(params)
    tilted = tilted_diffusive(model, CurrentSpec.from_model(model, kind="diffusive"))
    j, d = cumulants_recursive(tilted, 2)
    assert j == pytest.approx(oracle(params, "J"), abs=1e-10)
    assert d == pytest.approx(oracle(params, "D"), rel=1e-8)


def test_diffusive_distribution_is_a_density():
    model = build(ExampleCParams(Gamma=1.0, Omega=1.0))
    tilted = tilted_diffusive(model, CurrentSpec.from_model(model, kind="diffusive"))
    dist = charge_distribution(tilted, t=5.0)
    assert dist.support == "real"
    assert dist.total() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ModelError):
        dist.at(0)


def _diffusive_peaks(gamma, t):
    model = build(ExampleCParams(Gamma=gamma, Omega=1.0))
    dist = charge_distribution(tilted_diffusive(model, CurrentSpec.from_model(model, kind="diffusive")), t=t)
    peaks, _ = find_peaks(dist.values, prominence=0.05 * dist.values.max())
    return dist, dist.charges[peaks]


def test_strong_dephasing_gives_bimodal_charge():
    gamma, t = 20.0, 40.0
    dist, peaks = _diffusive_peaks(gamma, t)
    assert dist.negative_excursion >= -NEGATIVE_TOL
    assert dist.charges.size > 1024
    edge = 2 * math.sqrt(gamma) * t
    outer = np.sort(peaks[np.abs(peaks) > 100.0])
    assert outer.size == 2
    np.testing.assert_allclose(outer, [-edge, edge], atol=15.0)


def test_weak_dephasing_gives_unimodal_charge():
    dist, peaks = _diffusive_peaks(0.2, 40.0)
    assert dist.negative_excursion >= -NEGATIVE_TOL
    assert peaks.size == 1
    assert abs(peaks[0]) < 10.0


def test_classical_tilt_matches_lindblad_embedding():
    rates = np.array([[0.0, 1.0, 0.5], [2.0, 0.0, 0.3], [0.4, 1.5, 0.0]])
    weights = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
    classical = cumulants_recursive(tilted_classical(rates, weights), 3)
    model = build(ClassicalPauliParams(rates=rates, weights=weights))
    quantum = cumulants_recursive(tilted_jump(model, CurrentSpec.from_model(model)), 3)
    np.testing.assert_allclose(classical, quantum, rtol=1e-8, atol=1e-12)


def test_classical_tilt_validation():
    with pytest.raises(ModelError):
        tilted_classical(np.ones((2, 2)), np.ones((3, 3)))
    with pytest.raises(ModelError):
        tilted_classical([[0.0, -1.0], [1.0, 0.0]], np.zeros((2, 2)))
