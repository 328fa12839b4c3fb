"""Derived figures of merit: quantum Fisher information, uncertainty bounds and
linear-response checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import ModelError, get_logger, timing
from .currents import CurrentSpec, cross_statistics, noise
from .fcs import cumulants_recursive, tilted_classical
from .lindblad import (
    LindbladModel,
    VectorizedLiouvillian,
    drazin_apply,
    spost,
    spre,
    sprepost,
    steady_vector,
    vectorize,
)
from .models import ExampleBParams, ModelParams, build

__all__ = [
    "ParametrizedModel",
    "QFIResult",
    "HasegawaReport",
    "TURReport",
    "OnsagerReport",
    "qfi_rate",
    "hasegawa_bound",
    "entropy_production",
    "classical_tur_check",
    "onsager_fdt_check",
]

log = get_logger("qcstats.analysis")

FD_STEP = 1e-6
RICHARDSON_TOL = 1e-6
ONSAGER_STEP = 1e-5


@dataclass
class ParametrizedModel:
    """A model family ``theta -> LindbladModel`` evaluated at ``theta``.

    Derivatives of ``H`` and of every ``L_k`` are taken from ``d_hamiltonian``
    and ``d_operators`` when supplied; otherwise by central differences with a
    relative step of ``1e-6`` and a Richardson comparison against twice that step.
    """

    factory: Callable[[float], LindbladModel]
    theta: float
    parameter: str = "theta"
    d_hamiltonian: Optional[np.ndarray] = None
    d_operators: Optional[Sequence[np.ndarray]] = None
    step: float = FD_STEP

    def __post_init__(self) -> None:
        self._model: Optional[LindbladModel] = None
        self.derivative_error = 0.0

    @classmethod
    def from_params(cls, params: ModelParams, parameter: str, **kwargs) -> "ParametrizedModel":
        """Family obtained by varying one field of a built-in parameter set."""

        if not hasattr(params, parameter):
            raise ModelError(f"{type(params).__name__} has no parameter {parameter!r}")
        theta = getattr(params, parameter)
        if isinstance(theta, complex) or not isinstance(theta, (int, float)):
            raise ModelError(f"parameter {parameter!r} is not real-valued")
        return cls(
            factory=lambda value: build(replace(params, **{parameter: value})),
            theta=float(theta),
            parameter=parameter,
            **kwargs,
        )

    @classmethod
    def scaling(cls, model: LindbladModel) -> "ParametrizedModel":
        """``H -> (1 + theta) H`` and ``L_k -> sqrt(1 + theta) L_k`` at ``theta = 0``."""

        return cls(
            factory=lambda value: _scaled(model, value),
            theta=0.0,
            parameter="scale",
            d_hamiltonian=model.hamiltonian,
            d_operators=[0.5 * ch.operator for ch in model.channels],
        )

    @property
    def model(self) -> LindbladModel:
        if self._model is None:
            self._model = self.factory(self.theta)
        return self._model

    def _difference(self, h: float) -> Tuple[np.ndarray, List[np.ndarray]]:
        plus, minus = self.factory(self.theta + h), self.factory(self.theta - h)
        if plus.labels != minus.labels or plus.labels != self.model.labels:
            raise ModelError(f"channel set changes with {self.parameter}; derivatives are undefined")
        d_h = (plus.hamiltonian - minus.hamiltonian) / (2 * h)
        d_ops = [(p.operator - m.operator) / (2 * h) for p, m in zip(plus.channels, minus.channels)]
        return d_h, d_ops

    def derivatives(self) -> Tuple[np.ndarray, List[np.ndarray]]:
        model = self.model
        if self.d_hamiltonian is not None or self.d_operators is not None:
            d_h = np.zeros_like(model.hamiltonian) if self.d_hamiltonian is None else np.asarray(self.d_hamiltonian, complex)
            if self.d_operators is None:
                d_ops = [np.zeros_like(ch.operator) for ch in model.channels]
            else:
                d_ops = [np.asarray(op, dtype=complex) for op in self.d_operators]
            if d_h.shape != model.hamiltonian.shape or len(d_ops) != len(model.channels):
                raise ModelError("derivative shapes do not match the model")
            if any(op.shape != model.hamiltonian.shape for op in d_ops):
                raise ModelError("derivative shapes do not match the model")
            return d_h, d_ops
        h = self.step * max(1.0, abs(self.theta))
        fine_h, fine_ops = self._difference(h)
        coarse_h, coarse_ops = self._difference(2 * h)
        # Richardson: (4 D(h) - D(2h)) / 3 removes the O(h^2) term
        d_h = (4 * fine_h - coarse_h) / 3
        d_ops = [(4 * f - c) / 3 for f, c in zip(fine_ops, coarse_ops)]
        scale = max(1.0, float(np.max(np.abs(d_h))), *(float(np.max(np.abs(op))) for op in d_ops))
        error = max(
            float(np.max(np.abs(fine_h - coarse_h))),
            *(float(np.max(np.abs(f - c))) for f, c in zip(fine_ops, coarse_ops)),
        )
        self.derivative_error = error / scale
        if self.derivative_error > RICHARDSON_TOL:
            log.warning(
                "finite-difference derivative is not converged",
                extra={"event": "derivative_unconverged", "parameter": self.parameter, "error": self.derivative_error},
            )
        return d_h, d_ops


def _scaled(model: LindbladModel, value: float) -> LindbladModel:
    factor = math.sqrt(1.0 + value)
    return model.with_hamiltonian((1.0 + value) * model.hamiltonian).with_channels(
        replace(ch, operator=factor * ch.operator) for ch in model.channels
    )


@dataclass(frozen=True)
class QFIResult:
    rate: float
    static: float
    correction: float
    parameter: str


def _qfi_parts(model: LindbladModel, d_h: np.ndarray, d_ops: Sequence[np.ndarray], liou: VectorizedLiouvillian):
    rho = steady_vector(liou)
    d = model.dimension
    d_heff = d_h.astype(complex)
    for ch, dl in zip(model.channels, d_ops):
        l = ch.operator
        d_heff = d_heff - 0.5j * (dl.conj().T @ l + l.conj().T @ dl)
    left = spre(-1j * d_heff)
    right = spost(1j * d_heff.conj().T)
    static = 0.0
    for ch, dl in zip(model.channels, d_ops):
        l = ch.operator
        left = left + sprepost(dl, l.conj().T)
        right = right + sprepost(l, dl.conj().T)
        static += float(np.real(np.trace(dl.conj().T @ dl @ rho.reshape(d, d, order="F"))))
    one = liou.trace_row
    cross = one @ left @ drazin_apply(liou, right @ rho) + one @ right @ drazin_apply(liou, left @ rho)
    return static, float(np.real(cross))


def qfi_rate(pmodel: ParametrizedModel, *, liou: Optional[VectorizedLiouvillian] = None) -> QFIResult:
    """Long-time quantum Fisher information per unit time about ``pmodel.parameter``.

    ``4 (sum_k <dL_k^dag dL_k> - <<1|L_L L^+ L_R|rho>> - <<1|L_R L^+ L_L|rho>>)``
    with ``L_L rho = -i dH_eff rho + sum dL rho L^dag`` and its mirror ``L_R``.
    """

    model = pmodel.model
    liou = liou if liou is not None else vectorize(model)
    d_h, d_ops = pmodel.derivatives()
    with timing("analysis.qfi_ms", parameter=pmodel.parameter):
        static, cross = _qfi_parts(model, d_h, d_ops, liou)
    rate = 4.0 * (static - cross)
    if rate < -1e-9 * max(1.0, abs(static)):
        log.warning("negative quantum Fisher information", extra={"event": "qfi_negative", "rate": rate})
    return QFIResult(rate=rate, static=4.0 * static, correction=-4.0 * cross, parameter=pmodel.parameter)


@dataclass(frozen=True)
class HasegawaReport:
    J: float
    D: float
    f: float
    prefactor: float

    @property
    def lhs(self) -> float:
        return math.inf if self.J == 0 else self.D / self.J**2

    @property
    def rhs(self) -> float:
        return math.inf if self.f <= 0 else self.prefactor / self.f

    @property
    def satisfied(self) -> bool:
        return self.lhs >= self.rhs * (1 - 1e-9)

    def as_dict(self) -> dict:
        return {"J": self.J, "D": self.D, "f": self.f, "lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied}


def hasegawa_bound(
    model: LindbladModel, spec: Optional[CurrentSpec] = None, *, liou: Optional[VectorizedLiouvillian] = None
) -> HasegawaReport:
    """``D/J^2 >= h/f`` with the quantum activity ``f`` and ``h = 1`` (jump) or ``1/2`` (diffusive).

    ``f`` is the Fisher information of the uniform deformation
    ``H -> (1+theta) H``, ``L -> sqrt(1+theta) L``.
    """

    spec = spec if spec is not None else CurrentSpec.from_model(model)
    liou = liou if liou is not None else vectorize(model)
    stats = noise(model, spec, liou=liou)
    f = qfi_rate(ParametrizedModel.scaling(model), liou=liou).rate
    prefactor = 1.0 if spec.kind == "jump" else 0.5
    report = HasegawaReport(J=stats.J, D=stats.D, f=f, prefactor=prefactor)
    if not report.satisfied:
        log.warning("uncertainty bound violated", extra={"event": "hasegawa_violated", **report.as_dict()})
    return report


# -- classical bounds ------------------------------------------------------------------


def _classical_steady(rates: np.ndarray) -> np.ndarray:
    p = np.real(steady_vector(VectorizedLiouvillian.classical(rates)))
    return p / p.sum()


def _check_reversible(rates: np.ndarray) -> None:
    forward = rates > 0
    np.fill_diagonal(forward, False)
    if np.any(forward != forward.T):
        raise ModelError("entropy production needs every transition to have a reverse transition")


def entropy_production(rates, p=None) -> float:
    """Schnakenberg rate ``sum W_nj p_j ln(W_nj p_j / W_jn p_n)``."""

    w = np.array(rates, dtype=float)
    np.fill_diagonal(w, 0.0)
    _check_reversible(w)
    p = _classical_steady(w) if p is None else np.asarray(p, dtype=float)
    total = 0.0
    n = w.shape[0]
    for a in range(n):
        for b in range(n):
            if a != b and w[a, b] > 0:
                flux, back = w[a, b] * p[b], w[b, a] * p[a]
                if flux > 0 and back > 0:
                    total += flux * math.log(flux / back)
    return total


@dataclass(frozen=True)
class TURReport:
    J: float
    D: float
    K: float
    entropy_production: float

    @property
    def ratio(self) -> float:
        return math.inf if self.J == 0 else self.D / self.J**2

    @property
    def tur_bound(self) -> float:
        return math.inf if self.entropy_production <= 0 else 2.0 / self.entropy_production

    @property
    def kur_bound(self) -> float:
        return math.inf if self.K <= 0 else 1.0 / self.K

    @property
    def tur_satisfied(self) -> bool:
        return self.J == 0 or self.ratio >= self.tur_bound * (1 - 1e-9)

    @property
    def kur_satisfied(self) -> bool:
        return self.J == 0 or self.ratio >= self.kur_bound * (1 - 1e-9)

    def as_dict(self) -> dict:
        return {
            "J": self.J,
            "D": self.D,
            "K": self.K,
            "entropy_production": self.entropy_production,
            "ratio": self.ratio,
            "tur_bound": self.tur_bound,
            "kur_bound": self.kur_bound,
            "tur_satisfied": self.tur_satisfied,
            "kur_satisfied": self.kur_satisfied,
        }


def classical_tur_check(rates, weights) -> TURReport:
    """Classical TUR ``D/J^2 >= 2/sigma`` and KUR ``D/J^2 >= 1/K`` for a Pauli model."""

    w = np.array(rates, dtype=float)
    np.fill_diagonal(w, 0.0)
    _check_reversible(w)
    current, diffusion = cumulants_recursive(tilted_classical(w, weights), 2)
    p = _classical_steady(w)
    activity = float(np.sum(w * p[None, :]))
    sigma = entropy_production(w, p)
    if abs(current) < 1e-14:
        current = 0.0
    return TURReport(J=float(current), D=float(diffusion), K=activity, entropy_production=sigma)


# -- linear response -------------------------------------------------------------------


@dataclass(frozen=True)
class OnsagerReport:
    onsager: np.ndarray
    noise: np.ndarray

    @property
    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.onsager - self.onsager.T)))

    @property
    def fdt_residual(self) -> float:
        return float(np.max(np.abs(self.noise - 2.0 * self.onsager)))

    @property
    def positive_semidefinite(self) -> bool:
        sym = 0.5 * (self.onsager + self.onsager.T)
        return bool(np.min(np.linalg.eigvalsh(sym)) >= -1e-9)

    def as_dict(self) -> dict:
        return {
            "onsager": self.onsager.tolist(),
            "noise": self.noise.tolist(),
            "symmetry_residual": self.symmetry_residual,
            "fdt_residual": self.fdt_residual,
            "positive_semidefinite": self.positive_semidefinite,
        }


def _bath_currents(model: LindbladModel) -> List[CurrentSpec]:
    """Particle currents out of each lead: ``<lead>_in`` counts +1, ``<lead>_out`` -1."""

    specs = []
    for lead in ("L", "R"):
        weights = []
        for ch in model.channels:
            if ch.label == f"{lead}_in":
                weights.append(1.0)
            elif ch.label == f"{lead}_out":
                weights.append(-1.0)
            else:
                weights.append(0.0)
        specs.append(CurrentSpec(kind="jump", weights=tuple(weights)))
    return specs


def _occupation(sigma: float) -> float:
    return 1.0 / (math.exp(-sigma) + 1.0)


def onsager_fdt_check(params: ExampleBParams, step: float = ONSAGER_STEP) -> OnsagerReport:
    """Onsager matrix ``dJ_a/d delta_b`` and noise matrix of the dot at equilibrium.

    ``delta_a`` shifts the lead affinity ``sigma_a = ln(f_a / (1 - f_a))``
    away from its common equilibrium value.
    """

    fl, fr = params.f_l, params.f_r
    if not math.isclose(fl, fr, rel_tol=0.0, abs_tol=1e-12):
        raise ModelError(f"leads are not in equilibrium: f_L={fl}, f_R={fr}")
    if fl in (0.0, 1.0):
        raise ModelError("equilibrium occupation must lie strictly between 0 and 1")
    sigma_eq = math.log(fl / (1.0 - fl))

    def currents(delta_l: float, delta_r: float) -> np.ndarray:
        shifted = replace(params, f_left=_occupation(sigma_eq + delta_l), f_right=_occupation(sigma_eq + delta_r))
        model = build(shifted)
        return cross_statistics(model, _bath_currents(model)).currents

    onsager = np.zeros((2, 2))
    for b in range(2):
        shift = np.zeros(2)
        shift[b] = step
        onsager[:, b] = (currents(*shift) - currents(*(-shift))) / (2 * step)
    model = build(replace(params, f_left=fl, f_right=fl))
    noise_matrix = cross_statistics(model, _bath_currents(model)).noise_matrix
    report = OnsagerReport(onsager=onsager, noise=np.real(noise_matrix))
    log.info("onsager check", extra={"event": "onsager_check", **report.as_dict()})
    return report
