"""Deterministic current statistics computed from the Liouvillian.

A current is a weighted sum of channel outputs: clicks ``sum_k nu_k dN_k``
for jump detection, or ``sum_k nu_k <x_k> + noise`` with
``x_k = e^{-i phi_k} L_k + h.c.`` for diffusive detection. Every statistic
here (average, activity, two-point function, spectrum, noise) has a jump and
a diffusive flavour that only differ in the superoperator used (``J`` versus
``H``) and in the white-noise floor ``K``.

Quadrature squeezing is not a dedicated operation. Measure the same channel
twice, once at ``phase=0`` and once at ``phase=pi/2``, pass both currents to
:func:`cross_statistics` and take the difference of the diagonal spectra:
the ``S_0 - S_{pi/2}`` combination isolates the ``<L(tau) L>`` correlator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .core import CoincidentTimesError, DarkChannelError, ModelError, get_logger, timing
from .linalg import expm_action, expm_action_grid, solve_linear, unit_phase
from .lindblad import (
    ChannelKey,
    LindbladModel,
    VectorizedLiouvillian,
    drazin_apply,
    jump_super,
    spost,
    spre,
    steady_state,
    steady_vector,
    unvec,
    vec,
    vectorize,
)

__all__ = [
    "CurrentSpec",
    "CurrentStatistics",
    "TwoPointResult",
    "SpectrumResult",
    "NoiseResult",
    "CrossStatistics",
    "CoherentDrive",
    "AbsorptionResult",
    "jump_superop",
    "diffusion_superop",
    "average_current",
    "dynamical_activity",
    "two_point_function",
    "power_spectrum",
    "noise",
    "noise_transient",
    "g2",
    "g1",
    "fano_from_g2",
    "cross_statistics",
    "multi_time_correlation",
    "emission_spectrum",
    "absorption_spectra",
]

log = get_logger("qcstats.currents")

JUMP = "jump"
DIFFUSIVE = "diffusive"
_DARK_TOL = 1e-14


@dataclass(frozen=True)
class CurrentSpec:
    """Weights (and diffusive phases) for each declared channel of a model."""

    kind: str = JUMP
    weights: Tuple[float, ...] = ()
    phases: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (JUMP, DIFFUSIVE):
            raise ModelError(f"current kind must be 'jump' or 'diffusive', got {self.kind!r}")
        weights = tuple(float(w) for w in self.weights)
        phases = tuple(float(p) for p in self.phases) if self.phases else (0.0,) * len(weights)
        if len(phases) != len(weights):
            raise ModelError(f"{len(phases)} phases for {len(weights)} weights")
        if not any(w != 0.0 for w in weights):
            raise ModelError("current needs at least one nonzero weight")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "phases", phases)

    @classmethod
    def from_model(cls, model: LindbladModel, *, kind: str = JUMP) -> "CurrentSpec":
        """Default current: the weights and phases declared on the channels."""

        return cls(
            kind=kind,
            weights=tuple(ch.weight if ch.monitored else 0.0 for ch in model.channels),
            phases=tuple(ch.phase for ch in model.channels),
        )

    @classmethod
    def counting(cls, model: LindbladModel, channel: ChannelKey, *, kind: str = JUMP, phase: Optional[float] = None):
        """Unit weight on a single channel."""

        idx = model.channel_index(channel)
        if not model.channels[idx].monitored:
            raise ModelError(f"channel {model.channels[idx].label!r} is not monitored")
        weights = [0.0] * len(model.channels)
        weights[idx] = 1.0
        phases = [ch.phase for ch in model.channels]
        if phase is not None:
            phases[idx] = float(phase)
        return cls(kind=kind, weights=tuple(weights), phases=tuple(phases))

    def check(self, model: LindbladModel) -> None:
        if len(self.weights) != len(model.channels):
            raise ModelError(
                f"current has {len(self.weights)} weights but model {model.name!r} has {len(model.channels)} channels"
            )

    def effective(self, model: LindbladModel):
        """``(channel, weight, phase)`` per effective channel; unmonitored parts weigh zero."""

        self.check(model)
        out = []
        for src, ch in zip(model.effective_sources(), model.effective_channels()):
            w = self.weights[src] if ch.monitored else 0.0
            out.append((ch, w, self.phases[src]))
        return out


def jump_superop(model: LindbladModel, spec: CurrentSpec, *, power: int = 1) -> np.ndarray:
    """``sum_k nu_k^power L_k* kron L_k``."""

    d = model.dimension
    out = np.zeros((d * d, d * d), dtype=complex)
    for ch, w, _ in spec.effective(model):
        if w != 0.0:
            out += w**power * jump_super(ch.operator)
    return out


def _homodyne_super(op: np.ndarray, phase: float) -> np.ndarray:
    u = unit_phase(phase)
    return np.conj(u) * spre(op) + u * spost(op.conj().T)


def diffusion_superop(model: LindbladModel, spec: CurrentSpec) -> np.ndarray:
    """``H rho = sum_k nu_k (e^{-i phi_k} L_k rho + e^{i phi_k} rho L_k^dagger)``."""

    d = model.dimension
    out = np.zeros((d * d, d * d), dtype=complex)
    for ch, w, phi in spec.effective(model):
        if w != 0.0:
            out += w * _homodyne_super(ch.operator, phi)
    return out


def _diffusive_floor(model: LindbladModel, spec: CurrentSpec) -> float:
    return float(sum(w * w for _, w, _ in spec.effective(model)))


@dataclass
class CurrentStatistics:
    """Steady-state ingredients shared by every statistic of one current."""

    liou: VectorizedLiouvillian
    rho: np.ndarray
    superop: np.ndarray
    current: float
    activity: float
    kind: str

    def trace(self, v) -> complex:
        return complex(self.liou.trace_row @ v)


def _stats(model: LindbladModel, spec: Optional[CurrentSpec], liou: Optional[VectorizedLiouvillian]) -> CurrentStatistics:
    spec = spec if spec is not None else CurrentSpec.from_model(model)
    liou = liou if liou is not None else vectorize(model)
    rho = steady_vector(liou)
    if spec.kind == JUMP:
        sup = jump_superop(model, spec)
        k = float(np.real(liou.trace_row @ (jump_superop(model, spec, power=2) @ rho)))
    else:
        sup = diffusion_superop(model, spec)
        k = _diffusive_floor(model, spec)
    j = float(np.real(liou.trace_row @ (sup @ rho)))
    return CurrentStatistics(liou=liou, rho=rho, superop=sup, current=j, activity=k, kind=spec.kind)


def average_current(
    model: LindbladModel,
    spec: Optional[CurrentSpec] = None,
    *,
    rho=None,
    liou: Optional[VectorizedLiouvillian] = None,
) -> float:
    """``<<1|J|rho>>`` (jump) or ``<<1|H|rho>>`` (diffusive); steady state unless ``rho`` is given."""

    spec = spec if spec is not None else CurrentSpec.from_model(model)
    if rho is None:
        return _stats(model, spec, liou).current
    sup = jump_superop(model, spec) if spec.kind == JUMP else diffusion_superop(model, spec)
    return float(np.real(np.trace(unvec(sup @ vec(rho), model.dimension))))


def dynamical_activity(
    model: LindbladModel,
    spec: Optional[CurrentSpec] = None,
    *,
    rho=None,
    liou: Optional[VectorizedLiouvillian] = None,
) -> float:
    """``sum_k nu_k^2 <L_k^dagger L_k>`` for jumps, ``sum_k nu_k^2`` for diffusion."""

    spec = spec if spec is not None else CurrentSpec.from_model(model)
    if spec.kind == DIFFUSIVE:
        return _diffusive_floor(model, spec)
    if rho is None:
        return _stats(model, spec, liou).activity
    sup = jump_superop(model, spec, power=2)
    return float(np.real(np.trace(unvec(sup @ vec(rho), model.dimension))))


@dataclass(frozen=True)
class TwoPointResult:
    tau: np.ndarray
    regular: np.ndarray
    delta_weight: float


def two_point_function(
    model: LindbladModel,
    spec: Optional[CurrentSpec],
    tau_grid: Sequence[float],
    *,
    liou: Optional[VectorizedLiouvillian] = None,
) -> TwoPointResult:
    """Regular part of ``F(tau) = K delta(tau) + <<1|J e^{L|tau|} J|rho>> - J^2``.

    The delta weight ``K`` is returned separately and never sampled.
    """

    st = _stats(model, spec, liou)
    tau = np.asarray(tau_grid, dtype=float)
    states = expm_action_grid(st.liou.matrix, st.superop @ st.rho, np.abs(tau))
    corr = states @ (st.liou.trace_row @ st.superop)
    regular = np.real(corr) - st.current**2
    return TwoPointResult(tau=tau, regular=regular, delta_weight=st.activity)


@dataclass(frozen=True)
class SpectrumResult:
    omega: np.ndarray
    values: np.ndarray
    delta_weight: float = 0.0


@dataclass(frozen=True)
class NoiseResult:
    D: float
    J: float
    K: float

    @property
    def fano(self) -> Optional[float]:
        """``D / J``; undefined (``None``) when the current vanishes."""

        if abs(self.J) <= _DARK_TOL:
            return None
        return self.D / self.J


def _noise_from(st: CurrentStatistics) -> float:
    z = drazin_apply(st.liou, st.superop @ st.rho)
    return st.activity - 2.0 * float(np.real(st.trace(st.superop @ z)))


def noise(
    model: LindbladModel,
    spec: Optional[CurrentSpec] = None,
    *,
    liou: Optional[VectorizedLiouvillian] = None,
) -> NoiseResult:
    """Long-time noise ``D = K - 2 <<1|J L^+ J|rho>>``."""

    st = _stats(model, spec, liou)
    with timing("currents.noise_ms", dimension=st.liou.size):
        d = _noise_from(st)
    result = NoiseResult(D=d, J=st.current, K=st.activity)
    if result.fano is None:
        log.info("current vanishes; Fano factor undefined", extra={"event": "fano_undefined", "component": model.name})
    return result


def power_spectrum(
    model: LindbladModel,
    spec: Optional[CurrentSpec],
    omega_grid: Sequence[float],
    *,
    liou: Optional[VectorizedLiouvillian] = None,
) -> SpectrumResult:
    """``S(w) = K - 2 Re <<1|J L (L^2 + w^2)^{-1} J|rho>>``; ``w = 0`` gives ``D``."""

    st = _stats(model, spec, liou)
    omega = np.asarray(omega_grid, dtype=float)
    lm = st.liou.matrix
    l2 = lm @ lm
    source = st.superop @ st.rho
    source = source - st.rho * st.trace(source)
    row = st.liou.trace_row @ st.superop @ lm
    eye = np.eye(lm.shape[0])
    values = np.empty(omega.size)
    cache = {}
    d0 = None
    for i, w in enumerate(np.abs(omega)):
        if w in cache:
            values[i] = cache[w]
            continue
        if w == 0.0:
            if d0 is None:
                d0 = _noise_from(st)
            val = d0
        else:
            z = solve_linear(l2 + w * w * eye, source)
            val = st.activity - 2.0 * float(np.real(row @ z))
        cache[w] = val
        values[i] = val
    return SpectrumResult(omega=omega, values=values)


def noise_transient(
    model: LindbladModel,
    spec: Optional[CurrentSpec],
    rho0,
    t_grid: Sequence[float],
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Finite-time ``D(t) = K(t) + 2 Re tr{J sigma(t)}``.

    ``sigma`` obeys ``d sigma/dt = L sigma + J rho - rho tr(J rho)`` with
    ``sigma(0) = 0``, integrated together with ``rho``.
    """

    spec = spec if spec is not None else CurrentSpec.from_model(model)
    liou = vectorize(model)
    lm = liou.matrix
    one = liou.trace_row
    if spec.kind == JUMP:
        sup = jump_superop(model, spec)
        sup2 = jump_superop(model, spec, power=2)
    else:
        sup = diffusion_superop(model, spec)
        sup2 = None
    floor = _diffusive_floor(model, spec)
    n = lm.shape[0]
    times = np.asarray(t_grid, dtype=float)
    if np.any(times < 0):
        raise ModelError("transient noise needs non-negative times")

    def rhs(_t, y):
        rho, sigma = y[:n], y[n:]
        jr = sup @ rho
        return np.concatenate([lm @ rho, lm @ sigma + jr - rho * (one @ jr)])

    y0 = np.concatenate([vec(rho0), np.zeros(n, dtype=complex)])
    order = np.argsort(times)
    t_end = float(times.max()) if times.size else 0.0
    out = np.empty(times.size)
    if t_end == 0.0:
        ys = np.repeat(y0[:, None], times.size, axis=1)
    else:
        sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", t_eval=np.sort(times), rtol=rtol, atol=atol)
        if not sol.success:
            raise ModelError(f"transient noise integration failed: {sol.message}")
        ys = np.empty((2 * n, times.size), dtype=complex)
        ys[:, order] = sol.y
    for i in range(times.size):
        rho, sigma = ys[:n, i], ys[n:, i]
        k = float(np.real(one @ (sup2 @ rho))) if sup2 is not None else floor
        out[i] = k + 2.0 * float(np.real(one @ (sup @ sigma)))
    return out


def _monitored_part(model: LindbladModel, channel: ChannelKey):
    idx = model.channel_index(channel)
    for src, ch in zip(model.effective_sources(), model.effective_channels()):
        if src == idx and ch.monitored:
            return ch
    raise ModelError(f"channel {model.channels[idx].label!r} is not monitored")


def _single_channel(model: LindbladModel, channel: ChannelKey, liou):
    liou = liou if liou is not None else vectorize(model)
    ch = _monitored_part(model, channel)
    jk = jump_super(ch.operator)
    rho = steady_vector(liou)
    jr = jk @ rho
    j = float(np.real(liou.trace_row @ jr))
    if j <= _DARK_TOL:
        raise DarkChannelError(f"channel {ch.label!r} carries no steady-state current")
    return liou, jk, jr, j


def g2(
    model: LindbladModel,
    tau_grid: Sequence[float],
    channel: ChannelKey,
    *,
    liou: Optional[VectorizedLiouvillian] = None,
) -> np.ndarray:
    """Second-order coherence ``<<1|J_k e^{L tau} J_k|rho>> / J_k^2``."""

    liou, jk, jr, j = _single_channel(model, channel, liou)
    tau = np.asarray(tau_grid, dtype=float)
    states = expm_action_grid(liou.matrix, jr, np.abs(tau))
    return np.real(states @ (liou.trace_row @ jk)) / j**2


def fano_from_g2(
    model: LindbladModel,
    channel: ChannelKey,
    *,
    liou: Optional[VectorizedLiouvillian] = None,
    horizon: Optional[float] = None,
) -> float:
    """``1 + 2 J int_0^inf (g2(tau) - 1) d tau`` by direct time integration.

    The horizon defaults to 40 relaxation times of the slowest nonzero mode.
    """

    liou, jk, jr, j = _single_channel(model, channel, liou)
    if horizon is None:
        rates = np.abs(np.real(liou.spectrum.eigenvalues[1:]))
        horizon = 40.0 / float(np.min(rates[rates > 0]))
    lm = liou.matrix
    row = liou.trace_row @ jk
    n = lm.shape[0]

    def rhs(_t, y):
        x = y[:n]
        acc = np.real(row @ x) / j**2 - 1.0
        return np.concatenate([lm @ x, [acc]])

    y0 = np.concatenate([jr, [0.0]]).astype(complex)
    sol = solve_ivp(rhs, (0.0, horizon), y0, method="DOP853", rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise ModelError(f"g2 integration failed: {sol.message}")
    integral = float(np.real(sol.y[-1, -1]))
    return 1.0 + 2.0 * j * integral


@dataclass(frozen=True)
class G1Result:
    tau: np.ndarray
    values: np.ndarray
    normalized: bool


def g1(
    model: LindbladModel,
    tau_grid: Sequence[float],
    channel: ChannelKey,
    *,
    liou: Optional[VectorizedLiouvillian] = None,
) -> G1Result:
    """First-order coherence ``<L^dagger(tau) L> / |<L>|^2``.

    Falls back to the unnormalized correlator when ``<L>`` vanishes.
    """

    liou = liou if liou is not None else vectorize(model)
    op = model.channel(channel).operator
    rho = steady_vector(liou)
    row = vec(op.conj())
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0):
        raise ModelError("g1 is evaluated on tau >= 0")
    states = expm_action_grid(liou.matrix, spre(op) @ rho, tau)
    corr = states @ row
    mean = complex(np.trace(op @ unvec(rho, model.dimension)))
    if abs(mean) ** 2 <= 1e-12:
        return G1Result(tau=tau, values=corr, normalized=False)
    return G1Result(tau=tau, values=corr / abs(mean) ** 2, normalized=True)


@dataclass
class CrossStatistics:
    """Elementary-current statistics and their composition into user currents.

    ``J``, ``D`` and ``S`` are indexed by the monitored effective channels in
    ``labels``; ``weights`` maps them onto the user currents.
    """

    labels: Tuple[str, ...]
    J: np.ndarray
    D: np.ndarray
    weights: np.ndarray
    omega: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    delta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def coherence(self) -> Optional[np.ndarray]:
        """``|S_kq|^2 / (S_kk S_qq)`` at every frequency."""

        if self.S is None:
            return None
        diag = np.real(np.einsum("wkk->wk", self.S))
        return np.abs(self.S) ** 2 / (diag[:, :, None] * diag[:, None, :])

    @property
    def currents(self) -> np.ndarray:
        return self.weights @ self.J

    @property
    def noise_matrix(self) -> np.ndarray:
        return self.weights @ self.D @ self.weights.T

    @property
    def spectrum_matrix(self) -> Optional[np.ndarray]:
        if self.S is None:
            return None
        return np.einsum("ak,wkq,bq->wab", self.weights, self.S, self.weights)


def cross_statistics(
    model: LindbladModel,
    specs: Sequence[CurrentSpec],
    omega_grid: Optional[Sequence[float]] = None,
    *,
    tau_grid: Optional[Sequence[float]] = None,
    liou: Optional[VectorizedLiouvillian] = None,
) -> CrossStatistics:
    """Current vector, noise matrix and (optionally) spectra and two-point matrices.

    All ``specs`` must share a kind. Diffusive elementary currents take each
    channel's phase from the first spec.
    """

    if not specs:
        raise ModelError("cross_statistics needs at least one current")
    kind = specs[0].kind
    if any(s.kind != kind for s in specs):
        raise ModelError("all currents passed to cross_statistics must have the same kind")
    for s in specs:
        s.check(model)
    liou = liou if liou is not None else vectorize(model)
    rho = steady_vector(liou)
    one = liou.trace_row

    labels, srcs, sups = [], [], []
    for src, ch in zip(model.effective_sources(), model.effective_channels()):
        if not ch.monitored:
            continue
        labels.append(ch.label)
        srcs.append(src)
        if kind == JUMP:
            sups.append(jump_super(ch.operator))
        else:
            sups.append(_homodyne_super(ch.operator, specs[0].phases[src]))
    n = len(sups)
    sources = np.stack([s @ rho for s in sups], axis=1)
    j_vec = np.real(one @ sources)
    delta = j_vec.copy() if kind == JUMP else np.ones(n)
    q_sources = sources - np.outer(rho, one @ sources)
    rows = np.stack([one @ s for s in sups], axis=0)

    z = drazin_apply(liou, q_sources)
    m = rows @ z
    d = np.diag(delta) - np.real(m + m.T)
    weights = np.array([[s.weights[src] for src in srcs] for s in specs], dtype=float)
    out = CrossStatistics(labels=tuple(labels), J=j_vec, D=d, weights=weights, delta=delta)

    if omega_grid is not None:
        omega = np.asarray(omega_grid, dtype=float)
        lm = liou.matrix
        eye = np.eye(lm.shape[0])
        spec = np.empty((omega.size, n, n), dtype=complex)
        for i, w in enumerate(omega):
            if w == 0.0:
                mw = -m
            else:
                mw = rows @ solve_linear(1j * w * eye - lm, q_sources)
            spec[i] = np.diag(delta) + mw + mw.conj().T
        out.omega, out.S = omega, spec

    if tau_grid is not None:
        tau = np.asarray(tau_grid, dtype=float)
        states = np.stack(
            [expm_action_grid(liou.matrix, sources[:, q], np.abs(tau)) for q in range(n)], axis=-1
        )
        f = np.einsum("kv,tvq->tkq", rows, states) - np.outer(j_vec, j_vec)[None]
        neg = tau < 0
        f[neg] = np.transpose(f[neg], (0, 2, 1))
        out.tau, out.F = tau, np.real(f)
    return out


def multi_time_correlation(
    model: LindbladModel,
    channels: Sequence[ChannelKey],
    times: Sequence[float],
    *,
    rho0=None,
    kind: str = JUMP,
    liou: Optional[VectorizedLiouvillian] = None,
) -> complex:
    """``tr[L_kM S(t_M, t_{M-1}) ... L_k1 S(t_1, 0) rho0]`` for strictly increasing times."""

    if len(channels) != len(times) or not channels:
        raise ModelError("need one channel per time and at least one of each")
    t = np.asarray(times, dtype=float)
    if t[0] < 0:
        raise ModelError("times must be non-negative")
    gaps = np.diff(t)
    if np.any(gaps == 0):
        raise CoincidentTimesError(
            "coincident times; equal-time terms are the delta contribution reported by two_point_function"
        )
    if np.any(gaps < 0):
        raise ModelError("times must be strictly increasing")
    liou = liou if liou is not None else vectorize(model)
    x = steady_vector(liou) if rho0 is None else vec(rho0)
    last = 0.0
    for key, ti in zip(channels, t):
        ch = _monitored_part(model, key)
        sup = jump_super(ch.operator) if kind == JUMP else _homodyne_super(ch.operator, ch.phase)
        x = sup @ expm_action(liou.matrix, x, ti - last)
        last = ti
    return complex(liou.trace_row @ x)


def _resolvent_spectrum(liou, row, source, omega, sign: float) -> np.ndarray:
    lm = liou.matrix
    rho = steady_vector(liou)
    q = source - rho * (liou.trace_row @ source)
    eye = np.eye(lm.shape[0])
    out = np.empty(omega.size)
    for i, w in enumerate(omega):
        if w == 0.0:
            z = -drazin_apply(liou, q)
        else:
            z = solve_linear(sign * 1j * w * eye - lm, q)
        out[i] = float(np.real(row @ z)) / math.pi
    return out


def emission_spectrum(
    model: LindbladModel,
    channel: ChannelKey,
    omega_grid: Sequence[float],
    *,
    liou: Optional[VectorizedLiouvillian] = None,
) -> SpectrumResult:
    """Regular part of ``(1/2pi) int e^{-i w tau} <L^dagger(tau) L> d tau``.

    The elastic weight ``|<L>|^2`` multiplying ``delta(w)`` is in
    ``delta_weight``.
    """

    liou = liou if liou is not None else vectorize(model)
    op = model.channel(channel).operator
    rho = steady_vector(liou)
    omega = np.asarray(omega_grid, dtype=float)
    values = _resolvent_spectrum(liou, vec(op.conj()), spre(op) @ rho, omega, 1.0)
    mean = complex(np.trace(op @ unvec(rho, model.dimension)))
    return SpectrumResult(omega=omega, values=values, delta_weight=abs(mean) ** 2)


@dataclass(frozen=True)
class CoherentDrive:
    """Coherent drive ``Omega (c + c^dagger)`` seen in the frame rotating at ``w_d``.

    ``static`` is the undriven Hamiltonian in the lab frame and ``number`` the
    excitation-number operator generating the rotation.
    """

    static: np.ndarray
    number: np.ndarray
    coupling: np.ndarray
    amplitude: float

    def hamiltonian(self, drive_frequency: float) -> np.ndarray:
        c = np.asarray(self.coupling, dtype=complex)
        h = (
            np.asarray(self.static, dtype=complex)
            - drive_frequency * np.asarray(self.number, dtype=complex)
            + self.amplitude * (c + c.conj().T)
        )
        return 0.5 * (h + h.conj().T)

    def absorbed(self, rho: np.ndarray) -> float:
        """Absorption rate ``Re(i Omega <c - c^dagger>)``."""

        c = np.asarray(self.coupling, dtype=complex)
        return float(np.real(1j * self.amplitude * np.trace((c - c.conj().T) @ rho)))


@dataclass(frozen=True)
class AbsorptionResult:
    omega: np.ndarray
    incoherent: np.ndarray
    delta_weight: float
    drive_frequencies: Optional[np.ndarray] = None
    coherent: Optional[np.ndarray] = None


def absorption_spectra(
    model: LindbladModel,
    channel: ChannelKey,
    omega_grid: Sequence[float],
    *,
    drive: Optional[CoherentDrive] = None,
    drive_grid: Optional[Sequence[float]] = None,
    liou: Optional[VectorizedLiouvillian] = None,
) -> AbsorptionResult:
    """Incoherent absorption ``(1/2pi) int e^{i w tau} <L(tau) L^dagger>`` and,
    with a drive, the coherent absorption rate over ``drive_grid``.
    """

    liou = liou if liou is not None else vectorize(model)
    op = model.channel(channel).operator
    rho = steady_vector(liou)
    omega = np.asarray(omega_grid, dtype=float)
    values = _resolvent_spectrum(liou, vec(op.T), spre(op.conj().T) @ rho, omega, -1.0)
    mean = complex(np.trace(op @ unvec(rho, model.dimension)))
    result = AbsorptionResult(omega=omega, incoherent=values, delta_weight=abs(mean) ** 2)
    if drive is None:
        return result
    if drive_grid is None:
        raise ModelError("coherent absorption needs a drive-frequency grid")
    wd = np.asarray(drive_grid, dtype=float)
    coherent = np.empty(wd.size)
    with timing("currents.coherent_absorption_ms", points=int(wd.size)):
        for i, w in enumerate(wd):
            driven = model.with_hamiltonian(drive.hamiltonian(float(w)))
            coherent[i] = drive.absorbed(steady_state(vectorize(driven)))
    return AbsorptionResult(
        omega=omega, incoherent=values, delta_weight=result.delta_weight, drive_frequencies=wd, coherent=coherent
    )
