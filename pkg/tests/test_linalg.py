import numpy as np
import pytest
import scipy.linalg as la

from qcstats.core import DefectiveMatrixError, SingularSystemError
from qcstats.linalg import (
    eig,
    expm_action,
    expm_action_grid,
    kron,
    solve_linear,
    solve_lyapunov,
    solve_sylvester,
    unit_phase,
)
from qcstats.lindblad import vec


def _random(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_kron_matches_column_stacking():
    a, b, c = _random(3, 1), _random(3, 2), _random(3, 3)
    assert np.allclose(vec(a @ b @ c), kron(c.T, a) @ vec(b))


def test_eig_is_biorthonormal_and_sorted():
    m = _random(6)
    spec = eig(m)
    assert spec.biorthonormality_error() < 1e-10
    assert spec.completeness_error() < 1e-10
    assert np.allclose(spec.reconstruct(), m)
    assert np.all(np.diff(spec.eigenvalues.real) <= 1e-9)


def test_eig_rejects_defective():
    with pytest.raises(DefectiveMatrixError):
        eig([[1.0, 1.0], [0.0, 1.0]])


def test_solve_linear_square_and_least_squares():
    a = _random(4)
    b = np.arange(4.0)
    assert np.allclose(a @ solve_linear(a, b), b)
    tall = np.vstack([a, np.ones((1, 4))])
    rhs = tall @ np.ones(4)
    assert np.allclose(solve_linear(tall, rhs), np.ones(4))


def test_solve_linear_singular():
    with pytest.raises(SingularSystemError):
        solve_linear(np.zeros((3, 3)), np.ones(3))


def test_sylvester_and_lyapunov():
    a = _random(3, 4) - 6 * np.eye(3)
    b = _random(3, 5) - 6 * np.eye(3)
    c = _random(3, 6)
    x = solve_sylvester(a, b, c)
    assert np.allclose(a @ x + x @ b, c)
    y = solve_lyapunov(a, c)
    assert np.allclose(a @ y + y @ a.conj().T, c)


def test_sylvester_singular():
    with pytest.raises(SingularSystemError):
        solve_sylvester(np.eye(2), -np.eye(2), np.eye(2))


def test_expm_action_small_and_large():
    small = _random(5) * 0.3
    v = np.ones(5)
    assert np.allclose(expm_action(small, v, 0.7), la.expm(0.7 * small) @ v)
    big = -np.eye(80) + 0.01 * _random(80)
    w = np.ones(80)
    assert np.allclose(expm_action(big, w, 1.3), la.expm(1.3 * big) @ w)
    assert np.array_equal(expm_action(big, w, 0.0), w.astype(complex))


def test_expm_action_grid_any_order():
    m = _random(4) * 0.2 - np.eye(4)
    v = np.arange(1.0, 5.0)
    times = [2.0, 0.0, 0.5, 1.0]
    out = expm_action_grid(m, v, times)
    for t, row in zip(times, out):
        assert np.allclose(row, la.expm(t * m) @ v)


def test_expm_action_rejects_negative_time():
    with pytest.raises(ValueError):
        expm_action(np.eye(2), np.ones(2), -1.0)


def test_unit_phase_is_exact_on_axes():
    assert unit_phase(0.0) == 1
    assert unit_phase(np.pi / 2) == 1j
    assert unit_phase(np.pi) == -1
    assert unit_phase(-np.pi / 2) == -1j
    assert unit_phase(0.3) == pytest.approx(np.exp(0.3j))
