"""Waiting-time distributions and the jump steady state.

Between detected jumps the state evolves with the no-jump generator
``L0 = L - sum_k J_k`` (sum over the monitored channels). Every quantity here
is built from ``exp(L0 t)`` and ``L0^{-1}``; the two-point function uses
``exp(L t)`` instead and describes a different question.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as la

from .core import ModelError, SingularSystemError, get_logger
from .currents import CurrentSpec, noise
from .linalg import expm_action_grid, solve_linear
from .lindblad import ChannelKey, LindbladModel, jump_super, steady_vector, unvec, vec, vectorize

__all__ = [
    "NoJumpGenerator",
    "SurvivalResult",
    "WaitingMoments",
    "JumpSteadyState",
    "RenewalReport",
    "no_jump_generator",
    "survival",
    "wtd_first",
    "wtd_between",
    "transition_matrix",
    "wtd_moments",
    "jump_steady_state",
    "jump_map_spectrum",
    "renewal_check",
    "log_time_grid",
]

log = get_logger("qcstats.wtd")

RANK_TOL = 1e-10
DARK_TOL = 1e-10


@dataclass
class NoJumpGenerator:
    matrix: np.ndarray
    labels: List[str]
    sources: List[int]
    superops: List[np.ndarray]
    trace_row: np.ndarray
    dimension: int
    _inverse: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def invertible(self) -> bool:
        w = np.abs(la.eigvals(self.matrix))
        return bool(w.min() > DARK_TOL * max(w.max(), 1e-300))

    def solve(self, v) -> np.ndarray:
        """``L0^{-1} v``."""

        if self._inverse is None:
            try:
                self._inverse = solve_linear(self.matrix, np.eye(self.matrix.shape[0], dtype=complex))
            except SingularSystemError as exc:
                raise SingularSystemError("no-jump generator is singular; the model has a dark state") from exc
        return self._inverse @ v

    @property
    def total_jump(self) -> np.ndarray:
        return sum(self.superops, np.zeros_like(self.matrix))


def _monitored_parts(model: LindbladModel, monitored: Optional[Sequence[ChannelKey]]):
    wanted = None if monitored is None else {model.channel_index(k) for k in monitored}
    labels, sources, sups = [], [], []
    for src, ch in zip(model.effective_sources(), model.effective_channels()):
        if not ch.monitored or (wanted is not None and src not in wanted):
            continue
        labels.append(model.channels[src].label)
        sources.append(src)
        sups.append(jump_super(ch.operator))
    if wanted is not None:
        missing = wanted - set(sources)
        if missing:
            names = ", ".join(model.channels[i].label for i in sorted(missing))
            raise ModelError(f"channels {names} are not monitored")
    if not sups:
        raise ModelError("no monitored channels")
    return labels, sources, sups


def no_jump_generator(model: LindbladModel, monitored: Optional[Sequence[ChannelKey]] = None) -> NoJumpGenerator:
    """``L0 = L - sum_{k monitored} J_k``; all monitored channels when ``monitored`` is None."""

    liou = vectorize(model)
    labels, sources, sups = _monitored_parts(model, monitored)
    l0 = liou.matrix - sum(sups)
    return NoJumpGenerator(l0, labels, sources, sups, liou.trace_row, model.dimension)


def _as_vec(rho) -> np.ndarray:
    x = np.asarray(rho, dtype=complex)
    return vec(x) if x.ndim == 2 else x


@dataclass(frozen=True)
class SurvivalResult:
    t: np.ndarray
    values: np.ndarray
    dark_mass: float


def _dark_mass(gen: NoJumpGenerator, x0: np.ndarray) -> float:
    w, vl, vr = la.eig(gen.matrix, left=True, right=True)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    zero = np.abs(w) <= DARK_TOL * scale
    if not np.any(zero):
        return 0.0
    total = 0.0
    for j in np.flatnonzero(zero):
        y = vl[:, j].conj()
        total += (gen.trace_row @ vr[:, j]) * (y @ x0) / (y @ vr[:, j])
    return float(np.real(total))


def survival(model: LindbladModel, monitored, rho0, t_grid: Sequence[float]) -> SurvivalResult:
    """No-jump probability ``tr{exp(L0 t) rho0}`` and its ``t -> inf`` limit."""

    gen = no_jump_generator(model, monitored)
    x0 = _as_vec(rho0)
    t = np.asarray(t_grid, dtype=float)
    states = expm_action_grid(gen.matrix, x0, t)
    return SurvivalResult(t=t, values=np.real(states @ gen.trace_row), dark_mass=_dark_mass(gen, x0))


def _wtd(gen: NoJumpGenerator, x0: np.ndarray, t: np.ndarray) -> np.ndarray:
    states = expm_action_grid(gen.matrix, x0, t)
    rows = np.stack([gen.trace_row @ s for s in gen.superops], axis=0)
    return np.real(states @ rows.T)


def wtd_first(model: LindbladModel, monitored, rho0, t_grid: Sequence[float]) -> np.ndarray:
    """``W(t, k | rho0) = tr{J_k exp(L0 t) rho0}``; columns follow the monitored channels."""

    gen = no_jump_generator(model, monitored)
    return _wtd(gen, _as_vec(rho0), np.asarray(t_grid, dtype=float))


def _after_jump(gen: NoJumpGenerator, model: LindbladModel, q: ChannelKey) -> np.ndarray:
    idx = model.channel_index(q)
    if idx not in gen.sources:
        raise ModelError(f"channel {model.channels[idx].label!r} is not among the monitored channels")
    rho = steady_vector(vectorize(model))
    seed = gen.superops[gen.sources.index(idx)] @ rho
    weight = float(np.real(gen.trace_row @ seed))
    if weight <= 1e-300:
        raise ModelError(f"channel {model.channels[idx].label!r} never fires in the steady state")
    return seed / weight


def wtd_between(model: LindbladModel, monitored, q: ChannelKey, t_grid: Sequence[float]) -> np.ndarray:
    """Waiting time to the next jump ``k`` after a steady-state jump in ``q``."""

    gen = no_jump_generator(model, monitored)
    return _wtd(gen, _after_jump(gen, model, q), np.asarray(t_grid, dtype=float))


def transition_matrix(model: LindbladModel, monitored=None) -> np.ndarray:
    """``W[k, q]``: probability that a jump in ``q`` is followed by one in ``k``."""

    gen = no_jump_generator(model, monitored)
    n = len(gen.superops)
    out = np.zeros((n, n))
    rows = np.stack([gen.trace_row @ s for s in gen.superops], axis=0)
    for j, src in enumerate(gen.sources):
        seed = _after_jump(gen, model, src)
        out[:, j] = -np.real(rows @ gen.solve(seed))
    return out


@dataclass(frozen=True)
class WaitingMoments:
    """Raw moments ``E(T^m)`` (``m = 1..n``), channel-conditioned moments and channel probabilities."""

    moments: np.ndarray
    conditional: Dict[str, np.ndarray]
    probabilities: Dict[str, float]

    @property
    def mean(self) -> float:
        return float(self.moments[0])

    @property
    def variance(self) -> float:
        if self.moments.size < 2:
            raise ModelError("variance needs moments up to order 2")
        return float(self.moments[1] - self.moments[0] ** 2)

    def total_average_residual(self) -> float:
        total = sum(self.probabilities[k] * self.conditional[k][0] for k in self.probabilities)
        return abs(total - self.mean)

    def total_variance_residual(self) -> float:
        """``|Var(T) - E[Var(T|k)] - Var(E[T|k])|``."""

        p = self.probabilities
        c = self.conditional
        within = sum(p[k] * (c[k][1] - c[k][0] ** 2) for k in p)
        between = sum(p[k] * (c[k][0] - self.mean) ** 2 for k in p)
        return abs(self.variance - within - between)


def wtd_moments(model: LindbladModel, monitored=None, rho0=None, n: int = 2) -> WaitingMoments:
    """``E(T^m) = (-1)^m m! tr{L0^{-m} rho0}`` plus the channel-conditioned versions.

    ``rho0`` defaults to the jump steady state, so ``E(T) = 1/K``.
    """

    if n < 1:
        raise ModelError(f"moment order must be positive, got {n}")
    gen = no_jump_generator(model, monitored)
    x0 = jump_steady_state(model, monitored).vector if rho0 is None else _as_vec(rho0)
    powers = [x0]
    for _ in range(n + 1):
        powers.append(gen.solve(powers[-1]))
    moments = np.array(
        [float(np.real((-1) ** m * math.factorial(m) * (gen.trace_row @ powers[m]))) for m in range(1, n + 1)]
    )
    conditional: Dict[str, np.ndarray] = {}
    probabilities: Dict[str, float] = {}
    for label, sup in zip(gen.labels, gen.superops):
        row = gen.trace_row @ sup
        # int t^m W(t, k) dt = m! <<1|J_k (-L0)^{-(m+1)}|rho0>>
        p_k = float(np.real(-(row @ powers[1])))
        probabilities[label] = p_k
        if p_k <= 0:
            conditional[label] = np.full(n, np.nan)
            continue
        conditional[label] = np.array(
            [float(np.real(math.factorial(m) * (-1) ** (m + 1) * (row @ powers[m + 1]))) / p_k for m in range(1, n + 1)]
        )
    return WaitingMoments(moments=moments, conditional=conditional, probabilities=probabilities)


@dataclass(frozen=True)
class JumpSteadyState:
    state: np.ndarray
    vector: np.ndarray
    probabilities: Dict[str, float]
    activity: float
    fixed_point_residual: float


def jump_steady_state(model: LindbladModel, monitored=None) -> JumpSteadyState:
    """``pi = J rho_ss / K`` with the relative channel frequencies ``p_k``."""

    gen = no_jump_generator(model, monitored)
    rho = steady_vector(vectorize(model))
    jr = gen.total_jump @ rho
    k = float(np.real(gen.trace_row @ jr))
    if k <= 0:
        raise ModelError("monitored channels carry no steady-state activity")
    pi = jr / k
    probs = {label: float(np.real(gen.trace_row @ (s @ rho))) / k for label, s in zip(gen.labels, gen.superops)}
    image = -(gen.total_jump @ gen.solve(pi))
    residual = float(np.max(np.abs(image - pi)))
    return JumpSteadyState(
        state=unvec(pi, model.dimension),
        vector=pi,
        probabilities=probs,
        activity=k,
        fixed_point_residual=residual,
    )


def jump_map_spectrum(model: LindbladModel, monitored=None) -> np.ndarray:
    """Eigenvalues of ``-J L0^{-1}``, sorted by decreasing modulus; one of them is 1."""

    gen = no_jump_generator(model, monitored)
    m = -(gen.total_jump @ gen.solve(np.eye(gen.matrix.shape[0], dtype=complex)))
    w = la.eigvals(m)
    return w[np.argsort(-np.abs(w))]


@dataclass(frozen=True)
class RenewalReport:
    is_renewal: Dict[str, bool]
    noise_residual: Optional[float] = None


def renewal_check(model: LindbladModel, monitored=None) -> RenewalReport:
    """Rank-one test per channel; for a single renewal channel also ``|D - sigma^2/mu^3|``."""

    gen = no_jump_generator(model, monitored)
    flags = {}
    for label, sup in zip(gen.labels, gen.superops):
        s = la.svdvals(sup)
        rank = int(np.sum(s > RANK_TOL * max(s[0], 1e-300)))
        flags[label] = rank == 1
    residual = None
    if len(gen.superops) == 1 and all(flags.values()):
        mom = wtd_moments(model, monitored, n=2)
        mu, var = mom.mean, mom.variance
        spec = CurrentSpec.counting(model, gen.sources[0])
        d = noise(model, spec).D
        residual = abs(d - var / mu**3)
        log.debug("renewal identity", extra={"event": "renewal_check", "noise": d, "residual": residual})
    return RenewalReport(is_renewal=flags, noise_residual=residual)


def log_time_grid(model: LindbladModel, monitored=None, n: int = 200) -> np.ndarray:
    """Logarithmic grid from ``1e-3/K`` to 30 times the slowest no-jump decay time."""

    gen = no_jump_generator(model, monitored)
    k = jump_steady_state(model, monitored).activity
    rates = np.abs(np.real(la.eigvals(gen.matrix)))
    rates = rates[rates > DARK_TOL * max(rates.max(), 1e-300)]
    if rates.size == 0:
        raise ModelError("no-jump generator has no decaying modes")
    return np.logspace(math.log10(1e-3 / k), math.log10(30.0 / rates.min()), n)
