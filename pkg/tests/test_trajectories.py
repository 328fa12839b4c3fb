import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid

from qcstats.core import ModelError
from qcstats.currents import CurrentSpec, noise
from qcstats.fcs import charge_distribution, tilted_diffusive
from qcstats.lindblad import basis_projector, propagate, sigma_z, vectorize
from qcstats.models import ExampleAParams, ExampleCParams, build
from qcstats.trajectories import (
    DiffusiveRecord,
    TrajectoryRecord,
    butterworth,
    charge_at,
    diffusive_ensemble,
    diffusive_simulate,
    empirical_spectrum,
    export_csv,
    jump_counting,
    load_record,
    mcwf_simulate,
    save_record,
    simulate_ensemble,
    trajectory_rng,
)

GROUND = basis_projector(2, 0)
EXCITED = basis_projector(2, 1)


@pytest.fixture(scope="module")
def driven_ensemble():
    model = build(ExampleAParams(gamma=1.0, Omega=1.0))
    records = simulate_ensemble(model, GROUND, 4.0, 2000, seed=11, sample_times=[0.5, 1.0, 2.0, 4.0], dt=1e-2)
    return model, records


def test_ensemble_average_reproduces_master_equation(driven_ensemble):
    model, records = driven_ensemble
    liou = vectorize(model)
    values = np.stack([r.expectation(EXCITED) for r in records])
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(len(records))
    for j, t in enumerate([0.5, 1.0, 2.0, 4.0]):
        exact = np.real(propagate(liou, GROUND, t)[1, 1])
        assert abs(mean[j] - exact) <= 3 * stderr[j]


def test_ensemble_counts_match_integrated_current(driven_ensemble):
    model, records = driven_ensemble
    liou = vectorize(model)
    spec = CurrentSpec.counting(model, "emit")
    counts = np.array([charge_at(r, spec, [4.0])[0] for r in records])
    grid = np.linspace(0.0, 4.0, 401)
    rate = [np.real(propagate(liou, GROUND, t)[1, 1]) for t in grid]
    expected = trapezoid(rate, grid)
    stderr = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - expected) <= 4 * stderr


def test_ensemble_is_deterministic_across_threads():
    model = build(ExampleAParams(gamma=1.0, Omega=1.0, nbar=0.3))
    serial = simulate_ensemble(model, GROUND, 5.0, 16, seed=3, dt=1e-2)
    threaded = simulate_ensemble(model, GROUND, 5.0, 16, seed=3, dt=1e-2, threads=4)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.channels, b.channels)
    other = simulate_ensemble(model, GROUND, 5.0, 16, seed=4, dt=1e-2)
    assert any(a.times.size != b.times.size or not np.array_equal(a.times, b.times) for a, b in zip(serial, other))


def test_single_trajectory_matches_ensemble_member():
    model = build(ExampleAParams(gamma=1.0, Omega=1.0))
    ensemble = simulate_ensemble(model, GROUND, 5.0, 4, seed=9, dt=1e-2)
    single = mcwf_simulate(model, GROUND, 5.0, seed=9, index=2, dt=1e-2)
    np.testing.assert_array_equal(single.times, ensemble[2].times)
    assert single.labels == ("emit", "absorb")


def test_trajectory_streams_are_independent():
    a = trajectory_rng(0, 0).random(4)
    b = trajectory_rng(0, 1).random(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, trajectory_rng(0, 0).random(4))


def test_first_jump_times_are_exponential():
    gamma = 2.0
    model = build(ExampleAParams(gamma=gamma, Omega=0.0))
    records = simulate_ensemble(model, EXCITED, 20.0, 500, seed=5, dt=1e-2)
    assert all(r.n_jumps == 1 and r.dark for r in records)
    first = np.array([r.times[0] for r in records])
    assert stats.kstest(first, "expon", args=(0.0, 1.0 / gamma)).pvalue > 0.01


def test_counting_variance_grows_at_the_noise_rate():
    model = build(ExampleAParams(gamma=1.0, Omega=1.0))
    spec = CurrentSpec.from_model(model)
    final_time = 200.0
    records = simulate_ensemble(model, GROUND, final_time, 2000, seed=21, dt=1e-2, threads=4)
    counts = np.array([charge_at(r, spec, [final_time])[0] for r in records])
    assert counts.var(ddof=1) / final_time == pytest.approx(noise(model, spec).D, rel=0.12)


def test_detuned_dark_state_stops_the_record():
    model = build(ExampleAParams(gamma=1.0, Omega=0.0, Delta=1.0))
    records = simulate_ensemble(model, EXCITED, 2000.0, 20, seed=8, dt=1e-2)
    assert all(r.dark and r.n_jumps == 1 for r in records)


@pytest.mark.parametrize("rho0", [np.full((2, 2), 0.5), 0.5 * np.eye(2)], ids=["superposition", "mixture"])
def test_dark_fraction_of_half_excited_start(rho0):
    model = build(ExampleAParams(gamma=1.0, Omega=0.0, Delta=1.0))
    records = simulate_ensemble(model, rho0, 50.0, 400, seed=13, dt=1e-2)
    assert all(r.dark and r.n_jumps <= 1 for r in records)
    silent = np.mean([r.n_jumps == 0 for r in records])
    assert silent == pytest.approx(0.5, abs=0.1)


def test_mixed_initial_state_uses_density_unravelling():
    model = build(ExampleAParams(gamma=1.0, Omega=1.0))
    rho0 = 0.5 * np.eye(2)
    records = simulate_ensemble(model, rho0, 2.0, 8, seed=1, sample_times=[1.0], dt=1e-2)
    for r in records:
        assert r.states.shape == (1, 2, 2)
        assert np.trace(r.states[0]).real == pytest.approx(1.0)


def test_simulation_arguments_are_validated():
    model = build(ExampleAParams())
    with pytest.raises(ModelError):
        simulate_ensemble(model, GROUND, 1.0, 0)
    with pytest.raises(ModelError):
        mcwf_simulate(model, GROUND, 0.0)
    with pytest.raises(ModelError):
        TrajectoryRecord(seed=0, index=0, final_time=1.0, times=[0.5, 0.2], channels=[0, 0])


def _hand_record():
    return TrajectoryRecord(
        seed=7,
        index=3,
        final_time=2.0,
        times=np.array([0.25, 0.5, 1.5]),
        channels=np.array([0, 1, 0]),
        labels=("emit", "absorb"),
    )


def test_charge_staircase_and_counting():
    record = _hand_record()
    spec = CurrentSpec(weights=(-1.0, 1.0))
    np.testing.assert_allclose(charge_at(record, spec, [0.0, 0.3, 0.5, 1.0, 2.0]), [0.0, -1.0, 0.0, 0.0, -1.0])
    times, steps, current = jump_counting(record, spec)
    np.testing.assert_allclose(times, [0.25, 0.5, 1.5])
    np.testing.assert_allclose(steps, [-1.0, 0.0, -1.0])
    assert current == pytest.approx(-0.5)
    with pytest.raises(ModelError):
        record.expectation(sigma_z())


def test_binned_current():
    binned = _hand_record().binned_current(CurrentSpec(weights=(-1.0, 1.0)), 0.5)
    np.testing.assert_allclose(binned, [-2.0, 2.0, 0.0, -2.0])


def test_record_round_trip(tmp_path):
    record = _hand_record()
    loaded = load_record(save_record(record, tmp_path / "jump.json"))
    np.testing.assert_array_equal(loaded.times, record.times)
    np.testing.assert_array_equal(loaded.channels, record.channels)
    assert loaded.labels == record.labels
    assert loaded.final_time == record.final_time

    diffusive = DiffusiveRecord(seed=1, index=0, dt=0.1, current=np.array([0.1, -0.2, 0.3]))
    back = load_record(save_record(diffusive, tmp_path / "diff.json"))
    np.testing.assert_array_equal(back.current, diffusive.current)
    np.testing.assert_allclose(back.charge(), [0.01, -0.01, 0.02])


def test_load_record_rejects_unknown_type(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"type": "teleport"}', encoding="utf-8")
    with pytest.raises(ModelError):
        load_record(path)


def test_export_csv(tmp_path):
    text = export_csv(_hand_record(), tmp_path / "jump.csv").read_text(encoding="utf-8").splitlines()
    assert text[0] == "# seed=7"
    assert "t,channel" in text
    assert text[-1] == "1.5,emit"

    record = DiffusiveRecord(
        seed=1, index=0, dt=0.5, current=np.array([1.0, 2.0]), observables={"x": np.array([0.25])}, sample_every=2
    )
    lines = export_csv(record, tmp_path / "diff.csv").read_text(encoding="utf-8").splitlines()
    assert lines[3] == "t,I,x"
    assert lines[4] == "0.5,1.0,"
    assert lines[5] == "1.0,2.0,0.25"


def test_diffusive_ensemble_is_reproducible():
    model = build(ExampleCParams(Gamma=1.0, Omega=1.0))
    spec = CurrentSpec.from_model(model, kind="diffusive")
    rho0 = 0.5 * np.eye(2)
    serial = diffusive_ensemble(model, spec, rho0, 1e-3, 0.5, 5, seed=2, observables={"z": sigma_z()}, sample_every=10)
    threaded = diffusive_ensemble(model, spec, rho0, 1e-3, 0.5, 5, seed=2, observables={"z": sigma_z()}, sample_every=10, threads=3)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.current, b.current)
    assert serial[0].current.shape == (500,)
    assert serial[0].observables["z"].shape == (50,)
    assert np.all(np.abs(serial[0].observables["z"]) <= 1.0 + 1e-9)
    single = diffusive_simulate(model, spec, rho0, 1e-3, 0.5, seed=2, index=3)
    np.testing.assert_allclose(single.current, serial[3].current, rtol=1e-9, atol=1e-9)


def test_diffusive_simulation_validation():
    model = build(ExampleCParams())
    with pytest.raises(ModelError):
        diffusive_ensemble(model, CurrentSpec.from_model(model), GROUND, 1e-3, 1.0, 1)
    with pytest.raises(ModelError):
        diffusive_ensemble(model, CurrentSpec.from_model(model, kind="diffusive"), GROUND, 0.0, 1.0, 1)


def test_butterworth_gain_at_cutoff():
    n, dt, k = 1024, 0.01, 50
    t = dt * np.arange(n)
    omega = 2 * math.pi * k / (n * dt)
    x = np.sin(omega * t)
    y = butterworth(x, dt, "low", 1, omega, zero_phase=True)
    assert np.std(y) == pytest.approx(np.std(x) / math.sqrt(2.0), rel=1e-6)
    high = butterworth(x, dt, "high", 4, 10 * omega)
    assert np.std(high) < 1e-3 * np.std(x)


def test_butterworth_validation():
    x = np.zeros(16)
    with pytest.raises(ModelError):
        butterworth(x, 0.1, "notch")
    with pytest.raises(ModelError):
        butterworth(x, 0.1, "band", cutoffs=1.0)


def test_empirical_spectrum_of_white_noise():
    dt = 1e-2
    rng = np.random.default_rng(0)
    series = [rng.standard_normal(4096) / math.sqrt(dt) for _ in range(4)]
    result = empirical_spectrum(series, dt, n_segments=8)
    assert result.segments == 32
    assert np.mean(result.values[1:]) == pytest.approx(1.0, rel=0.05)
    with pytest.raises(ModelError):
        empirical_spectrum([], dt)


def test_strong_dephasing_charges_follow_counting_statistics():
    gamma, final_time = 20.0, 40.0
    model = build(ExampleCParams(Gamma=gamma, Omega=1.0))
    spec = CurrentSpec.from_model(model, kind="diffusive")
    records = diffusive_ensemble(
        model, spec, 0.5 * np.eye(2), 1e-3, final_time, 192, seed=4, observables={"z": sigma_z()}, sample_every=100, threads=3
    )
    edge = 2 * math.sqrt(gamma) * final_time
    charges = np.array([r.charge()[-1] for r in records])
    near_edge = np.abs(np.abs(charges) - edge) < 40.0
    dist = charge_distribution(tilted_diffusive(model, spec), t=final_time)
    expected = np.sum(dist.values[np.abs(np.abs(dist.charges) - edge) < 40.0]) * dist.spacing
    stderr = math.sqrt(expected * (1 - expected) / charges.size)
    assert near_edge.mean() == pytest.approx(expected, abs=4 * stderr + 0.03)
    z = np.concatenate([r.observables["z"] for r in records])
    assert np.mean(np.abs(z) > 0.9) > 0.85


def test_weak_dephasing_does_not_pin_the_qubit():
    model = build(ExampleCParams(Gamma=0.2, Omega=1.0))
    spec = CurrentSpec.from_model(model, kind="diffusive")
    records = diffusive_ensemble(model, spec, GROUND, 1e-3, 20.0, 16, seed=4, observables={"z": sigma_z()}, sample_every=50)
    z = np.concatenate([r.observables["z"] for r in records])
    assert np.mean(np.abs(z) > 0.9) < 0.6
