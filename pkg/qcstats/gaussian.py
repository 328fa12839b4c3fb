"""Closed-form current statistics for quadratic bosonic and fermionic models.

State and dynamics live in the ordering ``R = (q_1..q_N, p_1..p_N)`` with
``q = (b + b^dagger)/sqrt2`` and ``p = i(b^dagger - b)/sqrt2``. Means follow
``dr/dt = -W r + Omega f`` and the covariance ``Theta`` solves the Lyapunov
equation ``W Theta + Theta W^dagger = Upsilon``. Everything else reduces to
Sylvester solves of size ``2N``.

Internally the two-point matrix ``Xi_ij = <R_i R_j> - r_i r_j`` is used; it is
related to the covariance by ``Xi = +-(Theta - i Omega / 2)^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from .core import ModelError, UnstableModelError, get_logger, timing
from .linalg import solve_linear, solve_lyapunov, solve_sylvester, unit_phase
from .lindblad import JumpChannel, LindbladModel, destroy

__all__ = [
    "BOSON",
    "FERMION",
    "GaussianModel",
    "CovarianceState",
    "GaussianStatistics",
    "symplectic_form",
    "phi_matrix",
    "drift_and_diffusion",
    "steady_covariance",
    "quadrature_transform",
    "moments_from_covariance",
    "occupations",
    "anomalous",
    "gaussian_jump_stats",
    "gaussian_diffusion_stats",
    "gaussian_g2",
    "to_lindblad",
]

log = get_logger("qcstats.gaussian")

BOSON = "boson"
FERMION = "fermion"
UNCERTAINTY_TOL = 1e-10


def _diag_vector(values, n: int, name: str, default: float) -> np.ndarray:
    if values is None:
        return np.full(n, default, dtype=float)
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.shape != (n,):
        raise ModelError(f"{name} must have {n} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Quadratic Hamiltonian ``A, B, epsilon`` with single-mode loss and gain.

    ``gamma_minus[i]`` and ``gamma_plus[i]`` are the rates of ``D[b_i]`` and
    ``D[b_i^dagger]``; ``nu_*`` are the current weights and ``phi_*`` the
    homodyne phases of those channels. ``eta_*`` is the detected fraction of
    each channel.
    """

    statistics: str
    A: np.ndarray
    B: Optional[np.ndarray] = None
    epsilon: Optional[np.ndarray] = None
    gamma_minus: Optional[Sequence[float]] = None
    gamma_plus: Optional[Sequence[float]] = None
    nu_minus: Optional[Sequence[float]] = None
    nu_plus: Optional[Sequence[float]] = None
    phi_minus: Optional[Sequence[float]] = None
    phi_plus: Optional[Sequence[float]] = None
    eta_minus: Optional[Sequence[float]] = None
    eta_plus: Optional[Sequence[float]] = None
    name: str = "gaussian"

    def __post_init__(self) -> None:
        if self.statistics not in (BOSON, FERMION):
            raise ModelError(f"statistics must be {BOSON!r} or {FERMION!r}, got {self.statistics!r}")
        a = np.atleast_2d(np.asarray(self.A, dtype=complex))
        n = a.shape[0]
        if a.shape != (n, n) or n == 0:
            raise ModelError(f"A must be square, got shape {a.shape}")
        if np.max(np.abs(a - a.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
            raise ModelError("A must be Hermitian")
        b = np.zeros((n, n), dtype=complex) if self.B is None else np.atleast_2d(np.asarray(self.B, dtype=complex))
        if b.shape != (n, n):
            raise ModelError(f"B must have shape {(n, n)}, got {b.shape}")
        sign = 1.0 if self.statistics == BOSON else -1.0
        if np.max(np.abs(b - sign * b.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(b))):
            kind = "symmetric" if sign > 0 else "antisymmetric"
            raise ModelError(f"B must be {kind} for {self.statistics}s")
        eps = np.zeros(n, dtype=complex) if self.epsilon is None else np.atleast_1d(np.asarray(self.epsilon, dtype=complex))
        if eps.shape != (n,):
            raise ModelError(f"epsilon must have {n} entries, got shape {eps.shape}")
        if self.statistics == FERMION and np.any(eps != 0):
            raise ModelError("fermionic models cannot have a linear drive (parity conservation)")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "epsilon", eps)
        gm = _diag_vector(self.gamma_minus, n, "gamma_minus", 0.0)
        gp = _diag_vector(self.gamma_plus, n, "gamma_plus", 0.0)
        if np.any(gm < 0) or np.any(gp < 0):
            raise ModelError("rates must be non-negative")
        object.__setattr__(self, "gamma_minus", gm)
        object.__setattr__(self, "gamma_plus", gp)
        object.__setattr__(self, "nu_minus", _diag_vector(self.nu_minus, n, "nu_minus", 1.0))
        object.__setattr__(self, "nu_plus", _diag_vector(self.nu_plus, n, "nu_plus", -1.0))
        phi_minus = _diag_vector(self.phi_minus, n, "phi_minus", 0.0)
        phi_plus = -phi_minus if self.phi_plus is None else _diag_vector(self.phi_plus, n, "phi_plus", 0.0)
        object.__setattr__(self, "phi_minus", phi_minus)
        object.__setattr__(self, "phi_plus", phi_plus)
        for attr in ("eta_minus", "eta_plus"):
            eta = _diag_vector(getattr(self, attr), n, attr, 1.0)
            if np.any(eta < 0) or np.any(eta > 1):
                raise ModelError(f"{attr} must lie in [0, 1]")
            object.__setattr__(self, attr, eta)

    @property
    def modes(self) -> int:
        return int(self.A.shape[0])

    @property
    def is_boson(self) -> bool:
        return self.statistics == BOSON

    @property
    def sign(self) -> float:
        return 1.0 if self.is_boson else -1.0

    def with_phase(self, phi: float) -> "GaussianModel":
        """Same model detected at homodyne angle ``phi`` (``phi_plus = -phi``)."""

        n = self.modes
        return replace(self, phi_minus=np.full(n, float(phi)), phi_plus=np.full(n, -float(phi)))

    def with_weights(self, nu_minus, nu_plus) -> "GaussianModel":
        return replace(self, nu_minus=nu_minus, nu_plus=nu_plus)


@dataclass(frozen=True)
class CovarianceState:
    r: np.ndarray
    theta: np.ndarray
    drift: np.ndarray
    diffusion: np.ndarray
    statistics: str = BOSON

    @property
    def modes(self) -> int:
        return self.r.shape[0] // 2

    @property
    def two_point(self) -> np.ndarray:
        """``Xi_ij = <R_i R_j> - r_i r_j``."""

        omega = symplectic_form(self.statistics, self.modes)
        sign = 1.0 if self.statistics == BOSON else -1.0
        return sign * (self.theta - 0.5j * omega).T


@dataclass(frozen=True)
class GaussianStatistics:
    J: float
    K: float
    D: float
    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    S: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))
    F: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def fano(self) -> Optional[float]:
        return None if abs(self.J) <= 1e-14 else self.D / self.J


# -- algebra -----------------------------------------------------------------------


def symplectic_form(statistics: str, n: int) -> np.ndarray:
    """``[R_i, R_j]_-+ = i Omega_ij`` in the ``(q.., p..)`` ordering."""

    if statistics == BOSON:
        return np.kron(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(n)).astype(complex)
    if statistics == FERMION:
        return -1j * np.eye(2 * n)
    raise ModelError(f"unknown statistics {statistics!r}")


def phi_matrix(n: int) -> np.ndarray:
    """``phi kron 1_N`` mapping ``(b.., b^dagger..)`` onto ``(q.., p..)``."""

    phi = np.array([[1.0, 1.0], [-1j, 1j]]) / math.sqrt(2.0)
    return np.kron(phi, np.eye(n))


def _annihilation_rows(n: int) -> np.ndarray:
    """Rows ``u_i`` with ``b_i = u_i . R``."""

    return np.hstack([np.eye(n), 1j * np.eye(n)]) / math.sqrt(2.0)


def _decay(model: GaussianModel) -> np.ndarray:
    if model.is_boson:
        return model.gamma_minus - model.gamma_plus
    return model.gamma_minus + model.gamma_plus


def drift_and_diffusion(model: GaussianModel):
    """``(W, Upsilon, Omega H)`` for the first and second moments of ``R``.

    ``W`` is obtained from the Heisenberg equations of ``(b, b^dagger)``;
    ``Omega H = (1/2) 1_2 kron Gamma - W`` is the statistics-independent
    Hamiltonian part.
    """

    n = model.modes
    gamma = np.diag(_decay(model))
    m_b = -1j * model.A - 0.5 * gamma
    m_bd = -1j * model.B
    m = np.block([[m_b, m_bd], [m_bd.conj(), m_b.conj()]])
    phi = phi_matrix(n)
    w = -phi @ m @ phi.conj().T
    if np.max(np.abs(w.imag)) > 1e-10 * max(1.0, np.max(np.abs(w))):
        raise ModelError("drift matrix is not real; check the symmetry of B")
    w = w.real
    gp, gm = np.diag(model.gamma_plus), np.diag(model.gamma_minus)
    if model.is_boson:
        upsilon = 0.5 * np.kron(np.eye(2), gp + gm).astype(complex)
    else:
        sigma_y = np.array([[0.0, -1j], [1j, 0.0]])
        upsilon = -0.5 * np.kron(sigma_y, gm - gp)
    omega_h = 0.5 * np.kron(np.eye(2), gamma) - w
    return w, upsilon, omega_h


def _drive_vector(model: GaussianModel) -> np.ndarray:
    """``Omega f`` in the mean equation."""

    e = np.concatenate([-1j * model.epsilon, 1j * model.epsilon.conj()])
    return (phi_matrix(model.modes) @ e).real


def steady_covariance(model: GaussianModel) -> CovarianceState:
    w, upsilon, _ = drift_and_diffusion(model)
    eigs = la.eigvals(w)
    if np.min(eigs.real) <= 0:
        raise UnstableModelError(
            f"drift matrix has eigenvalue with real part {np.min(eigs.real):.3g}; no steady state"
        )
    theta = solve_lyapunov(w.astype(complex), upsilon)
    theta = 0.5 * (theta + theta.conj().T)
    if model.is_boson:
        r = solve_linear(w, _drive_vector(model)).real
        theta = theta.real.astype(complex)
        omega = symplectic_form(BOSON, model.modes)
        lowest = float(np.min(np.linalg.eigvalsh(theta + 0.5j * omega)))
        if lowest < -UNCERTAINTY_TOL:
            raise ModelError(f"covariance violates the uncertainty relation (eigenvalue {lowest:.3g})")
    else:
        r = np.zeros(2 * model.modes)
    return CovarianceState(r=r, theta=theta, drift=w, diffusion=upsilon, statistics=model.statistics)


def quadrature_transform(mu, C, C_prime=None, *, statistics: str = BOSON):
    """``(r, Theta)`` from mode moments.

    ``mu_i = <b_i>``, ``C_ij = <b_j^dagger b_i> - conj(mu_j) mu_i`` and
    ``C'_ij = <b_i b_j> - mu_i mu_j``.
    """

    c = np.atleast_2d(np.asarray(C, dtype=complex))
    n = c.shape[0]
    mu = np.zeros(n, dtype=complex) if mu is None else np.atleast_1d(np.asarray(mu, dtype=complex))
    cp = np.zeros((n, n), dtype=complex) if C_prime is None else np.atleast_2d(np.asarray(C_prime, dtype=complex))
    sign = 1.0 if statistics == BOSON else -1.0
    eye = np.eye(n)
    # connected <beta_i beta_j> with beta = (b, b^dagger)
    sigma = np.block([[cp, eye + sign * c], [c.T, cp.conj().T]])
    phi = phi_matrix(n)
    xi = phi @ sigma @ phi.T
    omega = symplectic_form(statistics, n)
    theta = 0.5j * omega + sign * xi.T
    r = (phi @ np.concatenate([mu, mu.conj()])).real
    return r, theta


def moments_from_covariance(state: CovarianceState):
    """``(mu, C, C')`` from a covariance state, inverse of :func:`quadrature_transform`."""

    n = state.modes
    phi = phi_matrix(n)
    beta_mean = phi.conj().T @ state.r
    sigma = phi.conj().T @ state.two_point @ phi.conj()
    mu = beta_mean[:n]
    c = sigma[n:, :n].T
    c_prime = sigma[:n, :n]
    return mu, c, c_prime


def occupations(state: CovarianceState) -> np.ndarray:
    mu, c, _ = moments_from_covariance(state)
    return np.real(np.diag(c) + np.abs(mu) ** 2)


def anomalous(state: CovarianceState) -> np.ndarray:
    mu, _, cp = moments_from_covariance(state)
    return np.diag(cp) + mu**2


# -- currents ----------------------------------------------------------------------


def _jump_matrix(model: GaussianModel, power: int = 1) -> np.ndarray:
    """``V = sum_k c_k conj(u_k) u_k^T`` with ``c_k = nu_k^power eta_k gamma_k``."""

    rows = _annihilation_rows(model.modes)
    v = np.zeros((2 * model.modes,) * 2, dtype=complex)
    for i in range(model.modes):
        c_minus = model.nu_minus[i] ** power * model.eta_minus[i] * model.gamma_minus[i]
        c_plus = model.nu_plus[i] ** power * model.eta_plus[i] * model.gamma_plus[i]
        u = rows[i]
        v += c_minus * np.outer(u.conj(), u) + c_plus * np.outer(u, u.conj())
    return v


def _jump_correlation(model: GaussianModel, state: CovarianceState, v: np.ndarray, tau: float) -> float:
    xi = state.two_point
    g = la.expm(-state.drift * tau)
    # pairings <L_k^dag(0) L_l^dag(tau)><L_l(tau) L_k(0)> +- <L_k^dag(0) L_l(tau)><L_l^dag(tau) L_k(0)>
    x = (g @ xi.T) @ v @ (g @ xi).T
    value = np.trace((v + model.sign * v.T).T @ x)
    if model.is_boson and np.any(state.r != 0):
        r = state.r
        value += r @ (v + v.T) @ g @ (xi @ v.T + xi.T @ v) @ r
    return float(np.real(value))


def _jump_resolvent(model: GaussianModel, state: CovarianceState, v: np.ndarray, omega: float) -> float:
    """``int_{-inf}^{inf} F(tau) e^{i omega tau} dtau`` from two Sylvester/linear solves."""

    w = state.drift.astype(complex)
    xi = state.two_point
    shift = 0.5j * omega * np.eye(w.shape[0])
    x = solve_sylvester(w - shift, w.T - shift, xi.T @ v @ xi.T)
    value = np.trace((v + model.sign * v.T).T @ x)
    if model.is_boson and np.any(state.r != 0):
        r = state.r
        value += r @ (v + v.T) @ solve_linear(w - 2 * shift, (xi @ v.T + xi.T @ v) @ r)
    return 2.0 * float(np.real(value))


def gaussian_jump_stats(
    model: GaussianModel,
    omega_grid: Optional[Sequence[float]] = None,
    tau_grid: Optional[Sequence[float]] = None,
    *,
    state: Optional[CovarianceState] = None,
) -> GaussianStatistics:
    """``J, K, D`` plus ``S(omega)`` and ``F(tau)`` for the photocount current.

    Four-point functions are reduced with Wick's theorem; the spectrum needs
    one Sylvester solve per frequency.
    """

    state = state if state is not None else steady_covariance(model)
    xi_full = state.two_point + np.outer(state.r, state.r)
    v1 = _jump_matrix(model, 1)
    v2 = _jump_matrix(model, 2)
    current = float(np.real(np.sum(v1 * xi_full)))
    activity = float(np.real(np.sum(v2 * xi_full)))
    omegas = np.atleast_1d(np.asarray(omega_grid if omega_grid is not None else [], dtype=float))
    taus = np.atleast_1d(np.asarray(tau_grid if tau_grid is not None else [], dtype=float))
    with timing("gaussian.jump_stats_ms", points=int(omegas.size + taus.size)):
        noise_value = activity + _jump_resolvent(model, state, v1, 0.0)
        spectrum = np.array([activity + _jump_resolvent(model, state, v1, w) for w in omegas])
        corr = np.array([_jump_correlation(model, state, v1, abs(t)) for t in taus])
    return GaussianStatistics(J=current, K=activity, D=noise_value, omega=omegas, S=spectrum, tau=taus, F=corr)


def _homodyne_vectors(model: GaussianModel):
    """``(o, v)`` with ``x_k = sum nu (e^{-i phi} L + e^{i phi} L^dag) = o . R`` and ``v = sum nu e^{-i phi} u``."""

    rows = _annihilation_rows(model.modes)
    v = np.zeros(2 * model.modes, dtype=complex)
    floor = 0.0
    for i in range(model.modes):
        rate_minus = model.eta_minus[i] * model.gamma_minus[i]
        rate_plus = model.eta_plus[i] * model.gamma_plus[i]
        if rate_minus > 0:
            v += model.nu_minus[i] * unit_phase(-model.phi_minus[i]) * math.sqrt(rate_minus) * rows[i]
            floor += model.nu_minus[i] ** 2
        if rate_plus > 0:
            v += model.nu_plus[i] * unit_phase(-model.phi_plus[i]) * math.sqrt(rate_plus) * rows[i].conj()
            floor += model.nu_plus[i] ** 2
    return (v + v.conj()).real, v, floor


def gaussian_diffusion_stats(
    model: GaussianModel,
    omega_grid: Optional[Sequence[float]] = None,
    tau_grid: Optional[Sequence[float]] = None,
    *,
    state: Optional[CovarianceState] = None,
) -> GaussianStatistics:
    """Homodyne-current ``J, D, S(omega), F(tau)``; bosons only."""

    if not model.is_boson:
        raise ModelError("homodyne currents of fermionic modes are not Gaussian")
    state = state if state is not None else steady_covariance(model)
    o, v, floor = _homodyne_vectors(model)
    if floor == 0.0:
        raise ModelError("no channel with non-zero detected rate")
    w = state.drift
    y = (state.two_point @ v).real
    current = float(o @ state.r)
    omegas = np.atleast_1d(np.asarray(omega_grid if omega_grid is not None else [], dtype=float))
    taus = np.atleast_1d(np.asarray(tau_grid if tau_grid is not None else [], dtype=float))
    eye = np.eye(w.shape[0])

    def spectrum_at(freq: float) -> float:
        return floor + 4.0 * float(np.real(o @ solve_linear(w - 1j * freq * eye, y)))

    noise_value = spectrum_at(0.0)
    spectrum = np.array([spectrum_at(f) for f in omegas])
    corr = np.array([2.0 * float(o @ la.expm(-w * abs(t)) @ y) for t in taus])
    return GaussianStatistics(J=current, K=floor, D=noise_value, omega=omegas, S=spectrum, tau=taus, F=corr)


def gaussian_g2(model: GaussianModel, tau_grid: Sequence[float], mode: int = 0) -> np.ndarray:
    """``g2(tau)`` of the photons leaving ``mode`` through ``D[b]``."""

    n = model.modes
    if not 0 <= mode < n:
        raise ModelError(f"mode {mode} out of range")
    nu_minus = np.zeros(n)
    nu_minus[mode] = 1.0
    counted = replace(model, nu_minus=nu_minus, nu_plus=np.zeros(n), eta_minus=np.ones(n))
    stats = gaussian_jump_stats(counted, tau_grid=tau_grid)
    if stats.J <= 0:
        raise ModelError("no photons leave the selected mode")
    return 1.0 + stats.F / stats.J**2


# -- Fock-space construction -------------------------------------------------------


def _mode_operators(model: GaussianModel, cutoff: int):
    n = model.modes
    if model.is_boson:
        single = destroy(cutoff)
        ops = []
        for i in range(n):
            factors = [np.eye(cutoff)] * n
            factors[i] = single
            op = factors[0]
            for f in factors[1:]:
                op = np.kron(op, f)
            ops.append(op)
        return ops
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    parity = np.diag([1.0, -1.0])
    ops = []
    for i in range(n):
        factors = [parity] * i + [lower] + [np.eye(2)] * (n - i - 1)
        op = factors[0]
        for f in factors[1:]:
            op = np.kron(op, f)
        ops.append(op)
    return ops


def to_lindblad(model: GaussianModel, cutoff: int = 30) -> LindbladModel:
    """Master-equation form of ``model``; bosonic modes are truncated at ``cutoff`` levels.

    Channels are named ``minus<i>``/``plus<i>``; zero-rate channels are omitted.
    """

    if model.is_boson and cutoff < 2:
        raise ModelError("Fock cutoff must be at least 2")
    ops = _mode_operators(model, cutoff)
    dim = ops[0].shape[0]
    h = np.zeros((dim, dim), dtype=complex)
    for i, bi in enumerate(ops):
        for j, bj in enumerate(ops):
            h += model.A[i, j] * bi.conj().T @ bj
            h += 0.5 * (model.B[i, j] * bi.conj().T @ bj.conj().T + np.conj(model.B[i, j]) * bj @ bi)
        h += model.epsilon[i] * bi.conj().T + np.conj(model.epsilon[i]) * bi
    channels = []
    for i, bi in enumerate(ops):
        if model.gamma_minus[i] > 0:
            channels.append(
                JumpChannel(
                    label=f"minus{i}",
                    operator=math.sqrt(model.gamma_minus[i]) * bi,
                    weight=model.nu_minus[i],
                    phase=model.phi_minus[i],
                    efficiency=model.eta_minus[i],
                )
            )
        if model.gamma_plus[i] > 0:
            channels.append(
                JumpChannel(
                    label=f"plus{i}",
                    operator=math.sqrt(model.gamma_plus[i]) * bi.conj().T,
                    weight=model.nu_plus[i],
                    phase=model.phi_plus[i],
                    efficiency=model.eta_plus[i],
                )
            )
    h = 0.5 * (h + h.conj().T)
    log.debug(
        "built Fock-space model",
        extra={"event": "gaussian_to_lindblad", "modes": model.modes, "dimension": dim},
    )
    return LindbladModel(
        hamiltonian=h,
        channels=tuple(channels),
        fock_cutoff=cutoff if model.is_boson else None,
        name=f"{model.name}-fock",
    )
