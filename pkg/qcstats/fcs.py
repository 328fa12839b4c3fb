"""Full counting statistics.

The tilted generator ``L_chi`` attaches a counting phase to every counted
event. Its characteristic function ``<<1|exp(L_chi t)|rho0>>`` Fourier
inverts to the charge distribution, and its leading eigenvalue is the scaled
cumulant generating function. Derivatives are taken with respect to
``s = i chi``: ``L_chi = sum_m s^m / m! L^(m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .core import (
    ContinuationError,
    ModelError,
    NonCommensurateError,
    RootNotFoundError,
    get_logger,
    timing,
)
from .currents import JUMP, CurrentSpec, _diffusive_floor, diffusion_superop
from .linalg import expm_action
from .lindblad import LindbladModel, VectorizedLiouvillian, drazin_apply, jump_super, steady_vector, vec, vectorize

__all__ = [
    "TiltedLiouvillian",
    "ChargeDistribution",
    "tilted_jump",
    "tilted_diffusive",
    "tilted_classical",
    "charge_distribution",
    "scgf",
    "scgf_at",
    "cumulants_recursive",
    "saddle_point",
    "fluctuation_theorem_check",
    "diffusive_decomposition",
]

log = get_logger("qcstats.fcs")

MIN_LATTICE_POINTS = 512
MAX_CUMULANT_ORDER = 8
NEGATIVE_TOL = 1e-6
MAX_REAL_POINTS = 1 << 15
REFINE_TOL = 1e-10
_CONTINUATION_STEP = 0.05


class TiltedLiouvillian:
    """Counting-field dependent generator.

    Jump and classical kinds are ``base + sum_k exp(i nu_k . chi) S_k`` with
    ``S_k`` the counted transition superoperators; the diffusive kind is
    ``L + i chi H - chi^2 K / 2``.
    """

    def __init__(
        self,
        kind: str,
        base: np.ndarray,
        *,
        terms: Sequence[np.ndarray] = (),
        weights=None,
        diffusion: Optional[np.ndarray] = None,
        floor: float = 0.0,
        coherent_limit: bool = False,
        trace_row: Optional[np.ndarray] = None,
        hilbert_dim: Optional[int] = None,
        fock_cutoff: Optional[int] = None,
    ) -> None:
        self.kind = kind
        self.base = np.asarray(base, dtype=complex)
        self.terms = [np.asarray(t, dtype=complex) for t in terms]
        w = np.zeros((len(self.terms), 1)) if weights is None else np.asarray(weights, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        self.weights = w
        self.diffusion = diffusion
        self.floor = float(floor)
        self.coherent_limit = coherent_limit
        self.hilbert_dim = hilbert_dim
        self.fock_cutoff = fock_cutoff
        self._trace_row = trace_row
        self._liouvillian: Optional[VectorizedLiouvillian] = None

    @property
    def n_fields(self) -> int:
        return 1 if self.kind == "diffusive" else int(self.weights.shape[1])

    @property
    def liouvillian(self) -> VectorizedLiouvillian:
        """The untilted generator, sharing steady-state and Drazin caches."""

        if self._liouvillian is None:
            self._liouvillian = VectorizedLiouvillian(
                self.matrix(0.0),
                hilbert_dim=self.hilbert_dim,
                trace_row=self._trace_row,
                fock_cutoff=self.fock_cutoff,
            )
        return self._liouvillian

    @property
    def trace_row(self) -> np.ndarray:
        return self.liouvillian.trace_row

    def _field(self, chi) -> np.ndarray:
        c = np.atleast_1d(np.asarray(chi, dtype=complex))
        if c.size == 1 and self.n_fields > 1:
            raise ModelError(f"tilted generator has {self.n_fields} counting fields; pass a vector")
        if c.size != self.n_fields:
            raise ModelError(f"expected {self.n_fields} counting fields, got {c.size}")
        return c

    def matrix(self, chi) -> np.ndarray:
        if self.kind == "diffusive":
            c = complex(self._field(chi)[0])
            out = self.base + 1j * c * self.diffusion
            if not self.coherent_limit:
                out = out - 0.5 * c * c * self.floor * np.eye(self.base.shape[0])
            return out
        c = self._field(chi)
        out = self.base.copy()
        for w, term in zip(self.weights, self.terms):
            out += np.exp(1j * complex(w @ c)) * term
        return out

    def derivative(self, m: int) -> np.ndarray:
        """``L^(m) = d^m L / d(i chi)^m`` at ``chi = 0`` (single counting field)."""

        if self.n_fields != 1:
            raise ModelError("derivatives are defined for a single counting field")
        n = self.base.shape[0]
        if self.kind == "diffusive":
            if m == 1:
                return self.diffusion.copy()
            if m == 2 and not self.coherent_limit:
                return self.floor * np.eye(n, dtype=complex)
            return np.zeros((n, n), dtype=complex)
        out = np.zeros((n, n), dtype=complex)
        for w, term in zip(self.weights[:, 0], self.terms):
            out += w**m * term
        return out

    @property
    def prime(self) -> np.ndarray:
        """``dL_chi/dchi`` at zero."""

        return 1j * self.derivative(1)

    @property
    def double_prime(self) -> np.ndarray:
        return -self.derivative(2)

    def lattice_quantum(self, max_denominator: int = 12) -> float:
        """Common charge quantum ``q`` with every weight an integer multiple of it."""

        if self.kind == "diffusive":
            raise NonCommensurateError("diffusive charge is continuous")
        if self.n_fields != 1:
            raise ModelError("lattice inversion needs a single counting field")
        nu = np.abs(self.weights[:, 0])
        nu = nu[nu > 0]
        if nu.size == 0:
            raise ModelError("no counted transitions")
        base = float(nu.min())
        for k in range(1, max_denominator + 1):
            q = base / k
            ratio = nu / q
            if np.all(np.abs(ratio - np.round(ratio)) <= 1e-9 * np.maximum(1.0, ratio)):
                return q
        raise NonCommensurateError(f"weights {sorted(set(nu.tolist()))} are not commensurate")


def tilted_jump(model: LindbladModel, specs: Union[CurrentSpec, Sequence[CurrentSpec]]) -> TiltedLiouvillian:
    """Jump tilt; several currents give one counting field each."""

    specs = [specs] if isinstance(specs, CurrentSpec) else list(specs)
    if not specs or any(s.kind != JUMP for s in specs):
        raise ModelError("tilted_jump needs jump currents")
    liou = vectorize(model)
    base = liou.matrix.copy()
    terms, weights = [], []
    per_spec = [s.effective(model) for s in specs]
    for i, (ch, _, _) in enumerate(per_spec[0]):
        nu = [entries[i][1] for entries in per_spec]
        if not any(nu):
            continue
        s_k = jump_super(ch.operator)
        base -= s_k
        terms.append(s_k)
        weights.append(nu)
    return TiltedLiouvillian(
        JUMP,
        base,
        terms=terms,
        weights=np.array(weights, dtype=float).reshape(len(terms), len(specs)),
        hilbert_dim=model.dimension,
        fock_cutoff=model.fock_cutoff,
    )


def tilted_diffusive(model: LindbladModel, spec: CurrentSpec, *, coherent_limit: bool = False) -> TiltedLiouvillian:
    """``L + i chi H - chi^2 K_diff / 2``.

    ``coherent_limit`` drops the white-noise term, leaving the characteristic
    function of the measured observable alone. It can produce negative
    quasi-probabilities and is never the default.

    For a Gaussian measurement ``L = sqrt(lam) Y`` with ``nu = 1/(2 sqrt(lam))``
    this reads ``L_0 - lam/2 [Y, [Y, .]] + i chi/2 {Y, .} - chi^2/(8 lam)``:
    weaker measurement means less backaction and more white noise.
    """

    if spec.kind != "diffusive":
        raise ModelError("tilted_diffusive needs a diffusive current")
    liou = vectorize(model)
    return TiltedLiouvillian(
        "diffusive",
        liou.matrix,
        diffusion=diffusion_superop(model, spec),
        floor=_diffusive_floor(model, spec),
        coherent_limit=coherent_limit,
        hilbert_dim=model.dimension,
        fock_cutoff=model.fock_cutoff,
    )


def tilted_classical(rates, weights) -> TiltedLiouvillian:
    """Pauli generator with off-diagonals ``W_nj exp(i chi nu_nj)``."""

    w = np.array(rates, dtype=float)
    nu = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or nu.shape != w.shape:
        raise ModelError(f"rates {w.shape} and weights {nu.shape} must be matching square matrices")
    np.fill_diagonal(w, 0.0)
    if np.any(w < 0):
        raise ModelError("rates must be non-negative")
    n = w.shape[0]
    base = np.zeros((n, n), dtype=complex)
    base -= np.diag(w.sum(axis=0))
    terms, tilts = [], []
    for a in range(n):
        for b in range(n):
            if a == b or w[a, b] == 0:
                continue
            s = np.zeros((n, n), dtype=complex)
            s[a, b] = w[a, b]
            if nu[a, b] == 0:
                base += s
                continue
            terms.append(s)
            tilts.append(nu[a, b])
    return TiltedLiouvillian(
        "classical", base, terms=terms, weights=np.array(tilts, dtype=float).reshape(-1, 1), trace_row=np.ones(n)
    )


# -- cumulants -------------------------------------------------------------------------


def cumulants_recursive(tilted: TiltedLiouvillian, order: int) -> np.ndarray:
    """Scaled cumulants ``<<I^n>>`` for ``n = 1..order``.

    ``<<I^n>> = sum_m C(n,m) <<1|L^(m)|rho^(n-m)>>`` with
    ``rho^(n) = L^+ sum_m C(n,m) (<<I^m>> - L^(m)) rho^(n-m)``.
    """

    if not 1 <= order <= MAX_CUMULANT_ORDER:
        raise ModelError(f"cumulant order must be in 1..{MAX_CUMULANT_ORDER}, got {order}")
    liou = tilted.liouvillian
    one = liou.trace_row
    derivs = [None] + [tilted.derivative(m) for m in range(1, order + 1)]
    states: List[np.ndarray] = [steady_vector(liou)]
    cumulants = np.zeros(order + 1)
    for n in range(1, order + 1):
        total = 0.0
        for m in range(1, n + 1):
            total += comb(n, m) * float(np.real(one @ (derivs[m] @ states[n - m])))
        cumulants[n] = total
        if n == order:
            break
        rhs = np.zeros_like(states[0])
        for m in range(1, n + 1):
            rhs += comb(n, m) * (cumulants[m] * states[n - m] - derivs[m] @ states[n - m])
        states.append(drazin_apply(liou, rhs))
    return cumulants[1:]


# -- charge distribution ---------------------------------------------------------------


@dataclass(frozen=True)
class ChargeDistribution:
    """``P(n, t)`` on an integer lattice (``support == "lattice"``) or a real grid.

    On the real grid ``values`` is a probability density with spacing
    ``spacing``; on the lattice ``charges`` are multiples of ``spacing``.
    """

    support: str
    charges: np.ndarray
    values: np.ndarray
    t: float
    spacing: float

    def total(self) -> float:
        if self.support == "lattice":
            return float(np.sum(self.values))
        return float(np.sum(self.values) * self.spacing)

    def _weights(self) -> np.ndarray:
        return self.values if self.support == "lattice" else self.values * self.spacing

    def mean(self) -> float:
        return float(np.sum(self.charges * self._weights()))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.sum((self.charges - mu) ** 2 * self._weights()))

    @property
    def negative_excursion(self) -> float:
        """Most negative probability weight (zero when none)."""

        return float(min(0.0, np.min(self._weights())))

    def at(self, n) -> np.ndarray:
        """Lattice probabilities at charges ``n`` (zero off the grid)."""

        if self.support != "lattice":
            raise ModelError("point lookup is only defined on the lattice")
        idx = np.round((np.asarray(n, dtype=float) - self.charges[0]) / self.spacing).astype(int)
        ok = (idx >= 0) & (idx < self.charges.size)
        out = np.zeros(idx.shape)
        out[ok] = self.values[idx[ok]]
        return out


def _characteristic(tilted: TiltedLiouvillian, rho0: np.ndarray, t: float, chis: np.ndarray) -> np.ndarray:
    one = tilted.trace_row
    out = np.empty(chis.size, dtype=complex)
    for i, c in enumerate(chis):
        out[i] = one @ expm_action(tilted.matrix(c), rho0, t)
    return out


def _power_of_two(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def _real_grid(tilted, x0, t, m_points, width, centre, window) -> ChargeDistribution:
    x_max = window if window is not None else max(8.0 / width, m_points * math.pi / (24.0 * width))
    dchi = 2 * x_max / m_points
    chis = -x_max + dchi * np.arange(m_points)
    phi = _characteristic(tilted, x0, t, chis) * np.exp(-1j * chis * centre)
    m = np.arange(m_points) - m_points // 2
    spacing = math.pi / x_max
    vals = np.real((-1.0) ** m * np.fft.fft(phi)[m % m_points]) * dchi / (2 * math.pi)
    return ChargeDistribution("real", centre + m * spacing, vals, t, spacing)


def charge_distribution(
    tilted: TiltedLiouvillian,
    rho0=None,
    t: float = 1.0,
    resolution: int = 1024,
    *,
    lattice: Optional[bool] = None,
    window: Optional[float] = None,
) -> ChargeDistribution:
    """Invert ``<<1|exp(L_chi t)|rho0>>`` by FFT.

    Commensurate jump or classical weights give an exact lattice inversion
    over one period of ``chi``; otherwise (or with ``lattice=False``) a real
    grid symmetric around ``chi = 0`` is used. Negative weight on the real
    grid doubles the resolution (and the chi window) up to ``MAX_REAL_POINTS``.
    ``rho0`` defaults to the steady state.
    """

    if t < 0:
        raise ModelError(f"t must be non-negative, got {t}")
    if t == 0:
        return ChargeDistribution("lattice", np.zeros(1), np.ones(1), 0.0, 1.0)
    liou = tilted.liouvillian
    x0 = steady_vector(liou) if rho0 is None else np.asarray(rho0, dtype=complex)
    if x0.ndim == 2:
        x0 = vec(x0)
    m_points = _power_of_two(max(resolution, MIN_LATTICE_POINTS))
    j_mean, d = cumulants_recursive(tilted, 2)
    width = math.sqrt(max(d, 1e-300) * t) if d > 0 else math.sqrt(max(tilted.floor, 1e-12) * t)

    q = None
    if lattice is not False and tilted.kind != "diffusive":
        try:
            q = tilted.lattice_quantum()
        except NonCommensurateError:
            if lattice:
                raise
    with timing("fcs.charge_distribution_ms", points=m_points, support="lattice" if q else "real"):
        if q is not None:
            shift = int(round(j_mean * t / q))
            j = np.arange(m_points)
            chis = -math.pi / q + 2 * math.pi * j / (q * m_points)
            phi = _characteristic(tilted, x0, t, chis) * np.exp(-1j * chis * shift * q)
            m = np.arange(m_points) - m_points // 2
            vals = np.real((-1.0) ** m * np.fft.fft(phi)[m % m_points]) / m_points
            dist = ChargeDistribution("lattice", (m + shift) * q, vals, t, q)
        else:
            dist = _real_grid(tilted, x0, t, m_points, width, j_mean * t, window)
            # ringing from the truncated chi window
            while (
                dist.negative_excursion < -REFINE_TOL
                and window is None
                and not tilted.coherent_limit
                and m_points < MAX_REAL_POINTS
            ):
                m_points *= 2
                log.debug(
                    "refining real charge grid",
                    extra={"event": "fcs_refine", "points": m_points, "min_weight": dist.negative_excursion},
                )
                dist = _real_grid(tilted, x0, t, m_points, width, j_mean * t, window)
    if dist.negative_excursion < -NEGATIVE_TOL:
        log.warning(
            "charge distribution has negative weight %.3g",
            dist.negative_excursion,
            extra={"event": "negative_probability", "t": t, "support": dist.support},
        )
    return dist


# -- scaled cumulant generating function ----------------------------------------------


def _leading(mat: np.ndarray):
    w, v = la.eig(mat)
    k = int(np.argmax(w.real))
    return w, v, k


def _follow(tilted: TiltedLiouvillian, path: Sequence[complex], start=None):
    """Track the eigenvalue branch connected to ``C(0) = 0`` along ``path``."""

    if start is None:
        w, v, k = _leading(tilted.matrix(path[0]))
        value, vector = w[k], v[:, k]
    else:
        value, vector = start
    out = [value]
    for chi in path[1:]:
        w, v = la.eig(tilted.matrix(chi))
        overlaps = np.abs(v.conj().T @ vector) / (np.linalg.norm(v, axis=0) * np.linalg.norm(vector))
        order = np.argsort(overlaps)[::-1]
        best = order[0]
        if len(order) > 1:
            second = order[1]
            scale = max(1.0, abs(w[best]))
            if overlaps[second] >= overlaps[best] - 1e-6 and abs(w[best] - w[second]) > 1e-9 * scale:
                raise ContinuationError(f"eigenvalue branches collide near chi={chi}", chi=chi)
        if overlaps[best] < 0.5:
            raise ContinuationError(f"lost the leading branch at chi={chi}", chi=chi)
        value, vector = w[best], v[:, best]
        out.append(value)
    return out, (value, vector)


def _segment(a: complex, b: complex) -> List[complex]:
    steps = max(1, int(math.ceil(abs(b - a) / _CONTINUATION_STEP)))
    return [a + (b - a) * s / steps for s in range(steps + 1)]


def scgf(tilted: TiltedLiouvillian, chi_grid: Sequence[float]) -> np.ndarray:
    """``C(chi)`` on a real grid, continued from the branch with ``C(0) = 0``."""

    chis = np.asarray(chi_grid, dtype=float)
    out = np.empty(chis.size, dtype=complex)
    order = np.argsort(chis)
    pos = [i for i in order if chis[i] >= 0]
    neg = [i for i in order[::-1] if chis[i] < 0]
    for branch in (pos, neg):
        state = None
        last = 0.0
        for i in branch:
            path = _segment(last, chis[i])
            values, state = _follow(tilted, path, start=state)
            out[i] = values[-1]
            last = chis[i]
    return out


def scgf_at(tilted: TiltedLiouvillian, chi: complex) -> complex:
    """``C(chi)`` at complex ``chi``, continued along the imaginary then the real axis."""

    chi = complex(chi)
    path = _segment(0.0, 1j * chi.imag)
    values, state = _follow(tilted, path)
    if chi.real != 0:
        values, _ = _follow(tilted, _segment(1j * chi.imag, chi), start=state)
    return complex(values[-1])


def fluctuation_theorem_check(
    tilted: TiltedLiouvillian,
    affinity: float,
    chi_grid: Optional[Sequence[float]] = None,
) -> float:
    """``max |C(chi) - C(-chi + i sigma)|`` over a real grid."""

    chis = np.linspace(-math.pi, math.pi, 41) if chi_grid is None else np.asarray(chi_grid, dtype=float)
    worst = 0.0
    for c in chis:
        diff = abs(scgf_at(tilted, complex(c)) - scgf_at(tilted, complex(-c, affinity)))
        worst = max(worst, diff)
    log.debug("fluctuation theorem asymmetry", extra={"event": "ft_check", "affinity": affinity, "asymmetry": worst})
    return worst


def diffusive_decomposition(tilted: TiltedLiouvillian, chi_grid: Sequence[float]):
    """Split a diffusive SCGF into ``-chi^2 K/2 + C~(chi)``.

    Returns ``(C, C_tilde, residual)`` with ``C_tilde`` the SCGF of
    ``L + i chi H`` and ``residual`` the largest mismatch.
    """

    if tilted.kind != "diffusive":
        raise ModelError("diffusive_decomposition needs a diffusive tilt")
    chis = np.asarray(chi_grid, dtype=float)
    full = scgf(tilted, chis)
    bare = TiltedLiouvillian(
        "diffusive",
        tilted.base,
        diffusion=tilted.diffusion,
        floor=tilted.floor,
        coherent_limit=True,
        hilbert_dim=tilted.hilbert_dim,
    )
    reduced = scgf(bare, chis)
    residual = float(np.max(np.abs(full - (reduced - 0.5 * chis**2 * tilted.floor)))) if chis.size else 0.0
    return full, reduced, residual


# -- saddle point ----------------------------------------------------------------------


def _real_tilt(evaluator: Union[TiltedLiouvillian, Callable[[complex], complex]]) -> Callable[[float], float]:
    if isinstance(evaluator, TiltedLiouvillian):

        def g(k: float) -> float:
            w = la.eigvals(evaluator.matrix(-1j * k))
            return float(np.max(w.real))

        return g
    return lambda k: float(np.real(evaluator(-1j * k)))


def _saddle_one(g: Callable[[float], float], n: float, t: float):
    def slope(k: float) -> float:
        h = 1e-4 * max(1.0, abs(k))
        return (g(k + h) - g(k - h)) / (2 * h)

    target = n / t
    lo, hi = -50.0, 50.0
    while True:
        try:
            f_lo, f_hi = slope(lo) - target, slope(hi) - target
        except (OverflowError, FloatingPointError):
            f_lo = f_hi = float("nan")
        if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi < 0:
            break
        if hi >= 400.0:
            raise RootNotFoundError(f"saddle-point equation has no root in [-400, 400] for n={n}, t={t}")
        lo, hi = 2 * lo, 2 * hi
    k = brentq(lambda x: slope(x) - target, lo, hi, xtol=1e-12)
    h = 1e-3 * max(1.0, abs(k))
    curvature = (g(k + h) - 2 * g(k) + g(k - h)) / h**2
    return k, curvature


def saddle_point(
    evaluator: Union[TiltedLiouvillian, Callable[[complex], complex]],
    n,
    t: float,
    *,
    renormalize: bool = False,
) -> np.ndarray:
    """Saddle-point estimate ``exp(-n k + C(-ik) t) / sqrt(2 pi C''(-ik) t)``.

    ``k`` solves ``d/dk C(-ik) = n/t``. ``evaluator`` is either a tilted
    generator (the leading real eigenvalue is used) or a callable ``chi -> C``.
    With ``renormalize`` the estimates are scaled to sum to one over ``n``.
    """

    g = _real_tilt(evaluator)
    ns = np.atleast_1d(np.asarray(n, dtype=float))
    out = np.empty(ns.size)
    for i, ni in enumerate(ns):
        k, curv = _saddle_one(g, float(ni), t)
        out[i] = math.exp(-ni * k + g(k) * t) / math.sqrt(2 * math.pi * abs(curv) * t)
    if renormalize:
        out = out / out.sum()
    return out if np.ndim(n) else out[0]
