"""Lindblad models, vectorized Liouvillians, steady states and the Drazin inverse.

Vectorization stacks columns: ``vec(rho)[i + d*j] == rho[i, j]``. Under this
convention ``vec(A rho B) = (B^T kron A) vec(rho)`` and the trace functional is
``<<1| = vec(I)^T``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Optional, Union

import numpy as np
import scipy.linalg as la

from .core import (
    DefectiveMatrixError,
    DegenerateSteadyStateError,
    ModelError,
    SingularSystemError,
    get_logger,
    timing,
)
from .linalg import ComplexMatrix, SpectralDecomposition, eig, expm_action, kron, solve_linear

__all__ = [
    "JumpChannel",
    "LindbladModel",
    "VectorizedLiouvillian",
    "ChannelKey",
    "vec",
    "unvec",
    "spre",
    "spost",
    "sprepost",
    "jump_super",
    "dissipator",
    "destroy",
    "number",
    "sigma_minus",
    "sigma_plus",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "basis_projector",
    "coherent_state",
    "vectorize",
    "steady_vector",
    "steady_state",
    "adjoint",
    "drazin",
    "drazin_apply",
    "propagate",
    "heisenberg",
    "expectation",
    "fock_leakage",
    "validate_density_matrix",
]

log = get_logger("qcstats.lindblad")

ChannelKey = Union[int, str]

ZERO_EIGENVALUE_TOL = 1e-9
LEAKAGE_THRESHOLD = 1e-6


# -- vectorization ---------------------------------------------------------------------


def vec(m) -> np.ndarray:
    return np.asarray(m, dtype=complex).reshape(-1, order="F")


def unvec(v, d: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if d is None:
        d = math.isqrt(v.shape[0])
    return v.reshape(d, d, order="F")


def spre(a) -> ComplexMatrix:
    """Superoperator of ``rho -> a rho``."""

    a = np.asarray(a, dtype=complex)
    return kron(np.eye(a.shape[0]), a)


def spost(b) -> ComplexMatrix:
    """Superoperator of ``rho -> rho b``."""

    b = np.asarray(b, dtype=complex)
    return kron(b.T, np.eye(b.shape[0]))


def sprepost(a, b) -> ComplexMatrix:
    """Superoperator of ``rho -> a rho b``."""

    return kron(np.asarray(b, dtype=complex).T, np.asarray(a, dtype=complex))


def jump_super(op) -> ComplexMatrix:
    """``rho -> L rho L^dagger`` as ``L* kron L``."""

    op = np.asarray(op, dtype=complex)
    return kron(op.conj(), op)


def dissipator(op) -> ComplexMatrix:
    op = np.asarray(op, dtype=complex)
    ldl = op.conj().T @ op
    return jump_super(op) - 0.5 * spre(ldl) - 0.5 * spost(ldl)


# -- standard operators ----------------------------------------------------------------


def destroy(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def number(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def sigma_minus() -> np.ndarray:
    # index 0 is the ground state
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_plus() -> np.ndarray:
    return sigma_minus().T.copy()


def sigma_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_y() -> np.ndarray:
    return 1j * (sigma_minus() - sigma_plus())


def sigma_z() -> np.ndarray:
    return np.diag([-1.0, 1.0]).astype(complex)


def basis_projector(d: int, k: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    p[k, k] = 1.0
    return p


def coherent_state(d: int, alpha: complex) -> np.ndarray:
    """Truncated, renormalized coherent-state density matrix."""

    n = np.arange(d)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    amps = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_fact) * np.power(complex(alpha), n)
    amps /= np.linalg.norm(amps)
    return np.outer(amps, amps.conj())


# -- model types -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """One dissipative channel ``L_k`` with its detection parameters."""

    label: str
    operator: np.ndarray
    weight: float = 0.0
    phase: float = 0.0
    monitored: bool = True
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ModelError(f"channel {self.label!r}: operator must be square, got {op.shape}")
        if not np.all(np.isfinite(op)):
            raise ModelError(f"channel {self.label!r}: operator has non-finite entries")
        if not 0.0 <= float(self.efficiency) <= 1.0:
            raise ModelError(f"channel {self.label!r}: efficiency {self.efficiency} outside [0, 1]")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "phase", float(self.phase))
        object.__setattr__(self, "efficiency", float(self.efficiency))


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian plus jump channels on a ``d``-dimensional Hilbert space."""

    hamiltonian: np.ndarray
    channels: tuple = ()
    fock_cutoff: Optional[int] = None
    name: str = "custom"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] == 0:
            raise ModelError(f"hamiltonian must be square and non-empty, got {h.shape}")
        norm = float(np.linalg.norm(h))
        if float(np.linalg.norm(h - h.conj().T)) > 1e-12 * norm:
            raise ModelError("hamiltonian is not Hermitian")
        channels = tuple(self.channels)
        labels = set()
        for ch in channels:
            if not isinstance(ch, JumpChannel):
                raise ModelError(f"channels must be JumpChannel instances, got {type(ch).__name__}")
            if ch.operator.shape != h.shape:
                raise ModelError(
                    f"channel {ch.label!r} has shape {ch.operator.shape}, expected {h.shape}"
                )
            if ch.label in labels:
                raise ModelError(f"duplicate channel label {ch.label!r}")
            labels.add(ch.label)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "channels", channels)

    @property
    def dimension(self) -> int:
        return int(self.hamiltonian.shape[0])

    @property
    def labels(self) -> tuple:
        return tuple(ch.label for ch in self.channels)

    def channel_index(self, key: ChannelKey) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= int(key) < len(self.channels):
                raise ModelError(f"channel index {key} out of range")
            return int(key)
        for i, ch in enumerate(self.channels):
            if ch.label == key:
                return i
        raise ModelError(f"unknown channel {key!r}; known: {', '.join(self.labels)}")

    def channel(self, key: ChannelKey) -> JumpChannel:
        return self.channels[self.channel_index(key)]

    def effective_channels(self) -> tuple:
        """Channels after splitting partial efficiencies.

        A monitored channel with ``efficiency < 1`` becomes a monitored part
        ``sqrt(eta) L`` and an unmonitored part ``sqrt(1 - eta) L`` labelled
        ``"<label>:lost"``.
        """

        out = []
        for ch in self.channels:
            if ch.monitored and ch.efficiency < 1.0:
                eta = ch.efficiency
                out.append(replace(ch, operator=math.sqrt(eta) * ch.operator, efficiency=1.0))
                out.append(
                    JumpChannel(
                        label=f"{ch.label}:lost",
                        operator=math.sqrt(1.0 - eta) * ch.operator,
                        weight=0.0,
                        phase=ch.phase,
                        monitored=False,
                    )
                )
            else:
                out.append(ch)
        return tuple(out)

    def effective_sources(self) -> tuple:
        """Declared-channel index of every effective channel."""

        out = []
        for i, ch in enumerate(self.channels):
            out.append(i)
            if ch.monitored and ch.efficiency < 1.0:
                out.append(i)
        return tuple(out)

    def with_hamiltonian(self, hamiltonian) -> "LindbladModel":
        return replace(self, hamiltonian=hamiltonian)

    def with_channels(self, channels: Iterable[JumpChannel]) -> "LindbladModel":
        return replace(self, channels=tuple(channels))


class VectorizedLiouvillian:
    """Matrix form of a generator with lazily cached spectral data.

    The same object serves quantum Liouvillians (``hilbert_dim`` set, trace
    functional ``vec(I)``) and classical rate generators (population space,
    trace functional of ones).
    """

    def __init__(
        self,
        matrix,
        *,
        hilbert_dim: Optional[int] = None,
        trace_row: Optional[np.ndarray] = None,
        fock_cutoff: Optional[int] = None,
    ) -> None:
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ModelError(f"generator must be square, got {m.shape}")
        self.matrix = m
        self.hilbert_dim = hilbert_dim
        if trace_row is None:
            if hilbert_dim is not None:
                trace_row = vec(np.eye(hilbert_dim))
            else:
                trace_row = np.ones(m.shape[0], dtype=complex)
        self.trace_row = np.asarray(trace_row, dtype=complex)
        self.fock_cutoff = fock_cutoff
        self._lock = threading.RLock()
        self._cache: dict = {}

    @classmethod
    def classical(cls, rates) -> "VectorizedLiouvillian":
        """Pauli generator from ``rates[n, j]`` = rate of the jump ``j -> n``."""

        w = np.array(rates, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ModelError(f"rate matrix must be square, got {w.shape}")
        np.fill_diagonal(w, 0.0)
        if np.any(w < 0):
            raise ModelError("rates must be non-negative")
        gen = w - np.diag(w.sum(axis=0))
        return cls(gen)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def is_quantum(self) -> bool:
        return self.hilbert_dim is not None

    def _memo(self, key: str, fn: Callable[[], Any]) -> Any:
        with self._lock:
            if key not in self._cache:
                self._cache[key] = fn()
            return self._cache[key]

    @property
    def spectrum(self) -> SpectralDecomposition:
        return self._memo("spectrum", lambda: eig(self.matrix))

    def trace_residual(self) -> float:
        """max |<<1| L|, zero for any trace-preserving generator."""

        return float(np.max(np.abs(self.trace_row @ self.matrix)))

    def zero_mode_count(self) -> int:
        w = self.spectrum.eigenvalues
        scale = max(float(np.max(np.abs(w))), 1e-300)
        return int(np.sum(np.abs(w) <= ZERO_EIGENVALUE_TOL * scale))

    def __repr__(self) -> str:
        kind = f"hilbert_dim={self.hilbert_dim}" if self.is_quantum else "classical"
        return f"VectorizedLiouvillian(size={self.size}, {kind})"


# -- operations ------------------------------------------------------------------------


def vectorize(model: LindbladModel) -> VectorizedLiouvillian:
    """Build ``-i(1 kron H - H^T kron 1) + sum_k D[L_k]`` for the effective channels."""

    h = model.hamiltonian
    m = -1j * (spre(h) - spost(h))
    for ch in model.effective_channels():
        m = m + dissipator(ch.operator)
    return VectorizedLiouvillian(m, hilbert_dim=model.dimension, fock_cutoff=model.fock_cutoff)


def _compute_steady_vector(liou: VectorizedLiouvillian) -> np.ndarray:
    a = liou.matrix.copy()
    # replace the row whose trace weight is largest by the trace functional
    r = int(np.argmax(np.abs(liou.trace_row)))
    a[r, :] = liou.trace_row
    b = np.zeros(liou.size, dtype=complex)
    b[r] = 1.0
    try:
        x = solve_linear(a, b)
    except SingularSystemError as exc:
        raise DegenerateSteadyStateError(
            "zero eigenspace is degenerate; the steady state is not unique"
        ) from exc
    if liou.is_quantum:
        d = liou.hilbert_dim
        rho = unvec(x, d)
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho)
        x = vec(rho)
    else:
        x = x.real.astype(complex)
        x = x / x.sum()
    scale = max(1.0, float(np.linalg.norm(liou.matrix, ord=np.inf)))
    residual = float(np.max(np.abs(liou.matrix @ x)))
    if residual > 1e-9 * scale:
        raise DegenerateSteadyStateError(f"steady-state residual {residual:.3g} too large")
    if "spectrum" in liou._cache and liou.zero_mode_count() != 1:
        raise DegenerateSteadyStateError("more than one eigenvalue is zero to tolerance")
    return x


def steady_vector(liou: VectorizedLiouvillian) -> np.ndarray:
    """Normalized null vector |rho_ss>> of the generator."""

    def compute() -> np.ndarray:
        with timing("lindblad.steady_state_ms", dimension=liou.size):
            x = _compute_steady_vector(liou)
        if liou.fock_cutoff is not None:
            leak = fock_leakage(unvec(x, liou.hilbert_dim))
            if leak > LEAKAGE_THRESHOLD:
                log.warning(
                    "Fock truncation leakage %.3g exceeds %.0e",
                    leak,
                    LEAKAGE_THRESHOLD,
                    extra={"event": "fock_leakage", "dimension": liou.hilbert_dim, "leakage": leak},
                )
        return x

    return liou._memo("steady_vector", compute)


def steady_state(liou: VectorizedLiouvillian) -> np.ndarray:
    """Steady-state density matrix (Hermitized, unit trace)."""

    if not liou.is_quantum:
        raise ModelError("steady_state needs a quantum Liouvillian; use steady_vector")
    return unvec(steady_vector(liou), liou.hilbert_dim)


def adjoint(liou: VectorizedLiouvillian) -> VectorizedLiouvillian:
    """Heisenberg-picture generator (conjugate transpose)."""

    return VectorizedLiouvillian(
        liou.matrix.conj().T,
        hilbert_dim=liou.hilbert_dim,
        trace_row=liou.trace_row,
        fock_cutoff=liou.fock_cutoff,
    )


def _steady_projector(liou: VectorizedLiouvillian) -> np.ndarray:
    return np.outer(steady_vector(liou), liou.trace_row)


def drazin(liou: VectorizedLiouvillian) -> np.ndarray:
    """Full Drazin pseudo-inverse ``sum_{j != 0} |x_j>><<y_j| / lambda_j``."""

    def compute() -> np.ndarray:
        rho = steady_vector(liou)
        try:
            spec = liou.spectrum
        except DefectiveMatrixError:
            log.warning(
                "Liouvillian is defective to tolerance; using the bordered inverse",
                extra={"event": "drazin_fallback", "dimension": liou.size},
            )
            p = np.outer(rho, liou.trace_row)
            return la.inv(liou.matrix + p) - p
        if liou.zero_mode_count() != 1:
            raise DegenerateSteadyStateError("more than one eigenvalue is zero to tolerance")
        w = spec.eigenvalues
        keep = np.arange(len(w)) != 0
        return (spec.right[:, keep] / w[keep]) @ spec.left[keep, :]

    return liou._memo("drazin", compute)


def _augmented_qr(liou: VectorizedLiouvillian):
    def compute():
        a = np.vstack([liou.matrix, liou.trace_row[None, :]])
        q, r, perm = la.qr(a, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag[-1] <= 1e-12 * diag[0]:
            raise DegenerateSteadyStateError("augmented Drazin system is rank deficient")
        return q, r, perm

    return liou._memo("augmented_qr", compute)


def drazin_apply(liou: VectorizedLiouvillian, v) -> np.ndarray:
    """Return ``L^+ v`` without forming the full pseudo-inverse.

    Solves ``[L; <<1|] z = [v - |rho>><<1|v>>; 0]`` in the least-squares sense
    (exact, since the system is consistent).
    """

    v = np.asarray(v, dtype=complex)
    rho = steady_vector(liou)
    q_v = v - np.multiply.outer(rho, liou.trace_row @ v)
    rhs = np.concatenate([q_v, np.zeros((1,) + q_v.shape[1:], dtype=complex)], axis=0)
    q, r, perm = _augmented_qr(liou)
    y = la.solve_triangular(r, q.conj().T @ rhs)
    z = np.empty_like(y)
    z[perm] = y
    return z


def propagate(liou: VectorizedLiouvillian, rho0, t: float) -> np.ndarray:
    """``exp(L t) rho0``; ``t = inf`` returns the steady state."""

    if not liou.is_quantum:
        raise ModelError("propagate needs a quantum Liouvillian")
    if t == math.inf:
        return steady_state(liou)
    out = expm_action(liou.matrix, vec(rho0), t)
    return unvec(out, liou.hilbert_dim)


def heisenberg(liou: VectorizedLiouvillian, operator, t: float) -> np.ndarray:
    """Evolve an observable with the adjoint generator for time ``t``."""

    adj = adjoint(liou)
    return unvec(expm_action(adj.matrix, vec(operator), t), liou.hilbert_dim)


def expectation(rho, op) -> complex:
    return complex(np.trace(np.asarray(op) @ np.asarray(rho)))


def fock_leakage(rho, levels: int = 2) -> float:
    """Population of the top ``levels`` Fock states."""

    diag = np.real(np.diag(np.asarray(rho)))
    return float(np.sum(diag[-levels:]))


def validate_density_matrix(rho, *, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ModelError(f"density matrix must be square, got {rho.shape}")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ModelError(f"density matrix trace {np.trace(rho)} differs from 1")
    if np.max(np.abs(rho - rho.conj().T)) > 1e2 * tol:
        raise ModelError("density matrix is not Hermitian")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -tol:
        raise ModelError("density matrix is not positive semi-definite")
    return rho
