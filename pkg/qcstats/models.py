"""Builders for the canonical example systems and their closed-form references.

Every builder returns a :class:`~qcstats.lindblad.LindbladModel` whose channels
carry the default current weights. The ``oracle`` functions evaluate exact
results for those systems and are what the test-suite and ``oracle-check``
compare the generic engine against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from scipy import special

from .core import ModelError, UnstableModelError, get_logger
from .lindblad import (
    JumpChannel,
    LindbladModel,
    destroy,
    number,
    sigma_minus,
    sigma_plus,
    sigma_x,
    sigma_z,
)

__all__ = [
    "ExampleAParams",
    "ExampleBParams",
    "ExampleCParams",
    "ExampleDParams",
    "QPCParams",
    "ClassicalPauliParams",
    "ModelParams",
    "fermi",
    "bose",
    "build",
    "build_gaussian",
    "default_current",
    "oracle",
    "oracle_catalog",
    "cavity_photocount_limit",
    "example_a_drive",
    "BUILDERS",
]

log = get_logger("qcstats.models")


def fermi(energy: float, mu: float, temperature: float) -> float:
    """Fermi-Dirac occupation; ``temperature == 0`` gives the step function."""

    if temperature < 0:
        raise ModelError(f"temperature must be non-negative, got {temperature}")
    if temperature == 0:
        if energy == mu:
            return 0.5
        return 1.0 if energy < mu else 0.0
    return float(special.expit(-(energy - mu) / temperature))


def bose(energy: float, temperature: float) -> float:
    if energy <= 0:
        raise ModelError(f"Bose occupation needs a positive energy, got {energy}")
    if temperature < 0:
        raise ModelError(f"temperature must be non-negative, got {temperature}")
    if temperature == 0:
        return 0.0
    return float(1.0 / np.expm1(energy / temperature))


def _require_non_negative(**values: float) -> None:
    for name, value in values.items():
        if value < 0 or not math.isfinite(value):
            raise ModelError(f"{name} must be finite and non-negative, got {value}")


# -- parameter sets ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExampleAParams:
    """Driven qubit in a thermal bath."""

    gamma: float = 1.0
    Omega: float = 1.0
    Delta: float = 0.0
    nbar: float = 0.0

    kind = "exampleA"

    def __post_init__(self) -> None:
        _require_non_negative(gamma=self.gamma, nbar=self.nbar)

    @classmethod
    def thermal(cls, *, gamma: float, Omega: float, energy: float, temperature: float, Delta: float = 0.0):
        return cls(gamma=gamma, Omega=Omega, Delta=Delta, nbar=bose(energy, temperature))


@dataclass(frozen=True)
class ExampleBParams:
    """Single-level quantum dot between two fermionic leads.

    ``f_left``/``f_right`` override the Fermi functions computed from
    ``(energy, mu_*, temp_*)`` when given.
    """

    energy: float = 0.0
    gamma_l: float = 1.0
    gamma_r: float = 1.0
    temp_l: float = 1.0
    temp_r: float = 1.0
    mu_l: float = 0.0
    mu_r: float = 0.0
    f_left: Optional[float] = None
    f_right: Optional[float] = None

    kind = "exampleB"

    def __post_init__(self) -> None:
        _require_non_negative(gamma_l=self.gamma_l, gamma_r=self.gamma_r, temp_l=self.temp_l, temp_r=self.temp_r)
        for name in ("f_left", "f_right"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {value}")

    @classmethod
    def symmetric_large_bias(cls, gamma: float = 1.0, energy: float = 0.0) -> "ExampleBParams":
        return cls(energy=energy, gamma_l=gamma, gamma_r=gamma, f_left=0.0, f_right=1.0)

    @property
    def f_l(self) -> float:
        if self.f_left is not None:
            return float(self.f_left)
        return fermi(self.energy, self.mu_l, self.temp_l)

    @property
    def f_r(self) -> float:
        if self.f_right is not None:
            return float(self.f_right)
        return fermi(self.energy, self.mu_r, self.temp_r)

    @property
    def affinity(self) -> float:
        """``beta_L (w - mu_L) - beta_R (w - mu_R)`` written through the occupations."""

        fl, fr = self.f_l, self.f_r
        if fl in (0.0, 1.0) or fr in (0.0, 1.0):
            raise ModelError("affinity is infinite for fully empty or full leads")
        return math.log((1 - fl) / fl) - math.log((1 - fr) / fr)


@dataclass(frozen=True)
class ExampleCParams:
    """Driven qubit under pure dephasing, monitored diffusively through ``sigma_z``."""

    Gamma: float = 1.0
    Omega: float = 1.0
    Delta: float = 0.0

    kind = "exampleC"

    def __post_init__(self) -> None:
        _require_non_negative(Gamma=self.Gamma)


@dataclass(frozen=True)
class ExampleDParams:
    """Parametrically driven Kerr cavity at a Fock truncation."""

    G: complex = 0.3j
    U: float = 0.0
    Delta: float = 0.0
    kappa: float = 1.0
    fock_cutoff: int = 30
    nbar: float = 0.0

    kind = "exampleD"

    def __post_init__(self) -> None:
        _require_non_negative(kappa=self.kappa, nbar=self.nbar)
        if self.fock_cutoff < 4:
            raise ModelError(f"fock_cutoff must be at least 4, got {self.fock_cutoff}")
        object.__setattr__(self, "G", complex(self.G))

    @property
    def stable(self) -> bool:
        if self.U != 0:
            return True
        return 4 * abs(self.G) ** 2 < self.kappa**2 + 4 * self.Delta**2


@dataclass(frozen=True)
class QPCParams:
    """Quantum dot whose charge is read out by a point contact.

    The point-contact channel ``transmission + coupling * n`` is the only
    monitored one.
    """

    transmission: complex = 1.0
    coupling: complex = -0.5
    dot: ExampleBParams = field(default_factory=ExampleBParams)

    kind = "qpc"


@dataclass(frozen=True)
class ClassicalPauliParams:
    """Rate matrix ``rates[n, j]`` (jump ``j -> n``) with per-transition weights."""

    rates: Any = None
    weights: Any = None

    kind = "pauli"

    def __post_init__(self) -> None:
        w = np.array(self.rates, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 2:
            raise ModelError(f"rates must be a square matrix of size >= 2, got {w.shape}")
        np.fill_diagonal(w, 0.0)
        if np.any(w < 0):
            raise ModelError("rates must be non-negative")
        nu = np.zeros_like(w) if self.weights is None else np.array(self.weights, dtype=float)
        if nu.shape != w.shape:
            raise ModelError(f"weights shape {nu.shape} does not match rates {w.shape}")
        object.__setattr__(self, "rates", w)
        object.__setattr__(self, "weights", nu)

    def transitions(self):
        """``(n, j)`` pairs with a positive rate, in row-major order."""

        n = self.rates.shape[0]
        return [(a, b) for a in range(n) for b in range(n) if a != b and self.rates[a, b] > 0]


ModelParams = Union[ExampleAParams, ExampleBParams, ExampleCParams, ExampleDParams, QPCParams, ClassicalPauliParams]


# -- builders ---------------------------------------------------------------------------


def _qubit_hamiltonian(Delta: float, Omega: float) -> np.ndarray:
    return 0.5 * Delta * sigma_z() + Omega * sigma_x()


def _build_a(p: ExampleAParams) -> LindbladModel:
    return LindbladModel(
        hamiltonian=_qubit_hamiltonian(p.Delta, p.Omega),
        channels=(
            JumpChannel("emit", math.sqrt(p.gamma * (p.nbar + 1)) * sigma_minus(), weight=-1.0),
            JumpChannel("absorb", math.sqrt(p.gamma * p.nbar) * sigma_plus(), weight=1.0),
        ),
        name=p.kind,
    )


def _dot_channels(p: ExampleBParams, *, monitored: bool = True):
    c = sigma_minus()
    fl, fr = p.f_l, p.f_r
    return (
        JumpChannel("L_out", math.sqrt(p.gamma_l * (1 - fl)) * c, weight=1.0, monitored=monitored),
        JumpChannel("L_in", math.sqrt(p.gamma_l * fl) * c.conj().T, weight=-1.0, monitored=monitored),
        JumpChannel("R_out", math.sqrt(p.gamma_r * (1 - fr)) * c, weight=0.0, monitored=monitored),
        JumpChannel("R_in", math.sqrt(p.gamma_r * fr) * c.conj().T, weight=0.0, monitored=monitored),
    )


def _build_b(p: ExampleBParams) -> LindbladModel:
    return LindbladModel(hamiltonian=p.energy * number(2), channels=_dot_channels(p), name=p.kind)


def _build_c(p: ExampleCParams) -> LindbladModel:
    return LindbladModel(
        hamiltonian=_qubit_hamiltonian(p.Delta, p.Omega),
        channels=(JumpChannel("dephase", math.sqrt(p.Gamma) * sigma_z(), weight=1.0, phase=0.0),),
        name=p.kind,
    )


def _build_d(p: ExampleDParams) -> LindbladModel:
    if not p.stable:
        raise UnstableModelError(
            f"parametric drive |G|={abs(p.G):.6g} is above threshold for kappa={p.kappa}, Delta={p.Delta}"
        )
    n = p.fock_cutoff
    a = destroy(n)
    ad = a.conj().T
    h = (
        p.Delta * ad @ a
        + 0.5 * (p.G * ad @ ad + np.conj(p.G) * a @ a)
        + 0.5 * p.U * ad @ ad @ a @ a
    )
    h = 0.5 * (h + h.conj().T)
    channels = [JumpChannel("loss", math.sqrt(p.kappa * (p.nbar + 1)) * a, weight=1.0)]
    if p.nbar > 0:
        channels.append(JumpChannel("gain", math.sqrt(p.kappa * p.nbar) * ad, weight=-1.0))
    return LindbladModel(hamiltonian=h, channels=tuple(channels), fock_cutoff=n, name=p.kind)


def _build_qpc(p: QPCParams) -> LindbladModel:
    dot = p.dot
    detector = p.transmission * np.eye(2) + p.coupling * number(2)
    channels = _dot_channels(dot, monitored=False)
    channels = tuple(
        JumpChannel(ch.label, ch.operator, weight=0.0, monitored=False) for ch in channels
    ) + (JumpChannel("qpc", detector, weight=1.0),)
    return LindbladModel(hamiltonian=dot.energy * number(2), channels=channels, name=p.kind)


def _build_pauli(p: ClassicalPauliParams) -> LindbladModel:
    n = p.rates.shape[0]
    channels = []
    for a, b in p.transitions():
        op = np.zeros((n, n), dtype=complex)
        op[a, b] = math.sqrt(p.rates[a, b])
        channels.append(JumpChannel(f"w{a}{b}", op, weight=float(p.weights[a, b])))
    return LindbladModel(hamiltonian=np.zeros((n, n)), channels=tuple(channels), name=p.kind)


_BUILDERS: Dict[type, Callable[[Any], LindbladModel]] = {
    ExampleAParams: _build_a,
    ExampleBParams: _build_b,
    ExampleCParams: _build_c,
    ExampleDParams: _build_d,
    QPCParams: _build_qpc,
    ClassicalPauliParams: _build_pauli,
}

BUILDERS: Dict[str, type] = {
    "exampleA": ExampleAParams,
    "exampleB": ExampleBParams,
    "exampleC": ExampleCParams,
    "exampleD": ExampleDParams,
    "qpc": QPCParams,
    "pauli": ClassicalPauliParams,
}


def build(params: ModelParams) -> LindbladModel:
    """Construct the Lindblad model described by ``params``."""

    try:
        builder = _BUILDERS[type(params)]
    except KeyError as exc:
        raise ModelError(f"no builder for {type(params).__name__}") from exc
    model = builder(params)
    log.debug("built model", extra={"event": "model_built", "component": params.kind, "dimension": model.dimension})
    return model


def build_gaussian(params: ModelParams):
    """Quadratic-mode description of a Gaussian example (Example D with ``U == 0``, Example B)."""

    from .gaussian import GaussianModel

    if isinstance(params, ExampleDParams):
        if params.U != 0:
            raise ModelError("Kerr nonlinearity U != 0 is not Gaussian")
        return GaussianModel(
            statistics="boson",
            A=[[params.Delta]],
            B=[[params.G]],
            gamma_minus=[params.kappa * (params.nbar + 1)],
            gamma_plus=[params.kappa * params.nbar],
            nu_minus=[1.0],
            nu_plus=[-1.0],
        )
    if isinstance(params, ExampleBParams):
        fl, fr = params.f_l, params.f_r
        out_l, in_l = params.gamma_l * (1 - fl), params.gamma_l * fl
        g_minus = out_l + params.gamma_r * (1 - fr)
        g_plus = in_l + params.gamma_r * fr
        # both leads share the mode; only the left-lead share of each rate is counted
        return GaussianModel(
            statistics="fermion",
            A=[[params.energy]],
            gamma_minus=[g_minus],
            gamma_plus=[g_plus],
            nu_minus=[1.0],
            nu_plus=[-1.0],
            eta_minus=[out_l / g_minus if g_minus > 0 else 0.0],
            eta_plus=[in_l / g_plus if g_plus > 0 else 0.0],
        )
    raise ModelError(f"{type(params).__name__} has no Gaussian form")


def default_current(model: LindbladModel, *, kind: str = "jump"):
    from .currents import CurrentSpec

    return CurrentSpec.from_model(model, kind=kind)


def example_a_drive(params: ExampleAParams, omega0: float):
    """Coherent-drive description of Example A for absorption sweeps.

    The drive detuning enters as ``H(w_d) = (omega0 - w_d) s+s- + Omega s_x``.
    """

    from .currents import CoherentDrive

    return CoherentDrive(
        static=omega0 * number(2),
        number=number(2),
        coupling=sigma_minus(),
        amplitude=params.Omega,
    )


# -- closed forms -----------------------------------------------------------------------


def _a_current(p: ExampleAParams) -> float:
    return -p.gamma * p.Omega**2 / ((p.Delta**2 + 2 * p.Omega**2) + p.gamma**2 * (p.nbar + 0.5) ** 2)


def _a_activity_undriven(p: ExampleAParams) -> float:
    return 2 * p.gamma * p.nbar * (p.nbar + 1) / (2 * p.nbar + 1)


def _a_drazin(p: ExampleAParams) -> np.ndarray:
    """4x4 Drazin inverse at ``nbar = Delta = 0`` in the package's vec ordering."""

    if p.nbar != 0 or p.Delta != 0:
        raise ModelError("closed-form Drazin inverse needs nbar = Delta = 0")
    g, w = p.gamma, p.Omega
    g2 = g**2 + 8 * w**2
    a = -g * (g**2 - 4 * w**2) / g2**2
    b = 2j * w / g2
    c = 12 * g * w**2 / g2**2
    d = 8j * w * (g**2 + 2 * w**2) / g2**2
    e = -g / g2 - 1 / g
    f = -8 * w**2 / (g**3 + 8 * g * w**2)
    h = 4j * w * (g**2 - 4 * w**2) / g2**2
    display = np.array(
        [
            [a, b, -b, c],
            [d, e, f, h],
            [-d, f, e, -h],
            [-a, -b, b, -c],
        ],
        dtype=complex,
    )
    # the display orders the excited state first; reverse to ground-first
    rev = np.arange(4)[::-1]
    return display[np.ix_(rev, rev)]


def _a_qfi(p: ExampleAParams, parameter: str) -> float:
    if p.nbar != 0 or p.Delta != 0:
        raise ModelError("closed-form QFI needs nbar = Delta = 0")
    g, w = p.gamma, p.Omega
    if parameter == "Omega":
        return 16.0 / g
    if parameter == "gamma":
        return 4 * w**2 / (g**3 + 8 * g * w**2)
    raise ModelError(f"no closed-form QFI for parameter {parameter!r}")


def _a_hasegawa_f(p: ExampleAParams) -> float:
    if p.nbar != 0 or p.Delta != 0:
        raise ModelError("closed-form Hasegawa activity needs nbar = Delta = 0")
    g, w = p.gamma, p.Omega
    return 4 * w**2 * (g**2 + 32 * w**2) / (g**3 + 8 * g * w**2)


def _a_absorption(p: ExampleAParams, detuning) -> np.ndarray:
    det = np.asarray(detuning, dtype=float)
    if p.nbar != 0:
        raise ModelError("closed-form coherent absorption needs nbar = 0")
    return p.gamma * p.Omega**2 / (det**2 + 2 * p.Omega**2 + (p.gamma / 2) ** 2)


def _b_rates(p: ExampleBParams):
    fl, fr = p.f_l, p.f_r
    return p.gamma_l, p.gamma_r, fl, fr, 1 - fl, 1 - fr


def _b_current(p: ExampleBParams) -> float:
    gl, gr, fl, fr, _, _ = _b_rates(p)
    return gl * gr * (fr - fl) / (gl + gr)


def _b_noise(p: ExampleBParams) -> float:
    gl, gr, fl, fr, flb, frb = _b_rates(p)
    s = gl + gr
    return gl * gr / s**3 * (s**2 * (fl * flb + fr * frb) + (gl**2 + gr**2) * (fr - fl) ** 2)


def _b_occupation(p: ExampleBParams) -> float:
    gl, gr, fl, fr, _, _ = _b_rates(p)
    return (gl * fl + gr * fr) / (gl + gr)


def _b_scgf(p: ExampleBParams, chi) -> np.ndarray:
    gl, gr, fl, fr, flb, frb = _b_rates(p)
    chi = np.asarray(chi, dtype=complex)
    s = 0.5 * (gl + gr)
    inner = s**2 + gl * gr * ((np.exp(1j * chi) - 1) * fr * flb + (np.exp(-1j * chi) - 1) * fl * frb)
    return -s + np.sqrt(inner)


def _b_poisson(p: ExampleBParams, n, t: float) -> np.ndarray:
    n = np.asarray(n)
    mu = p.gamma_r * t
    out = np.where(n >= 0, np.exp(special.xlogy(np.maximum(n, 0), mu) - mu - special.gammaln(np.maximum(n, 0) + 1)), 0.0)
    return out


def _b_bidirectional_poisson(p: ExampleBParams, n, t: float) -> np.ndarray:
    """Two-rate Poisson law of the slow-lead limit ``gamma_R << gamma_L``."""

    _, gr, fl, fr, flb, frb = _b_rates(p)
    up, down = fr * flb, fl * frb
    n = np.asarray(n, dtype=float)
    if down == 0:
        return _b_poisson(ExampleBParams(gamma_r=gr * up, f_left=0.0, f_right=1.0), n, t)
    z = 2 * gr * t * math.sqrt(up * down)
    log_p = -gr * t * (up + down) + 0.5 * n * math.log(up / down) + np.log(special.ive(n, z)) + z
    return np.exp(log_p)


def _b_symmetric_exact(p: ExampleBParams, n, t: float) -> np.ndarray:
    """Exact charge law at symmetric large bias started from the steady state.

    Transitions occur at rate ``gamma`` whatever the dot state, so their count
    is Poisson; half of them (rounded by the initial occupation) leave to the
    left lead.
    """

    if not (p.f_l == 0.0 and p.f_r == 1.0 and p.gamma_l == p.gamma_r):
        raise ModelError("exact distribution needs gamma_L == gamma_R, f_L = 0, f_R = 1")
    mu = p.gamma_l * t
    n = np.asarray(n)

    def pois(m):
        m = np.asarray(m)
        safe = np.maximum(m, 0)
        val = np.exp(special.xlogy(safe, mu) - mu - special.gammaln(safe + 1))
        return np.where(m >= 0, val, 0.0)

    return 0.5 * pois(2 * n - 1) + pois(2 * n) + 0.5 * pois(2 * n + 1)


def _b_saddle(p: ExampleBParams, n, t: float) -> np.ndarray:
    if not (p.f_l == 0.0 and p.f_r == 1.0 and p.gamma_l == p.gamma_r):
        raise ModelError("closed-form saddle point needs gamma_L == gamma_R, f_L = 0, f_R = 1")
    n = np.asarray(n, dtype=float)
    gt = p.gamma_l * t
    return np.exp(2 * n - gt + 2 * n * np.log(gt / (2 * n))) / np.sqrt(n * math.pi)


def _b_onsager(p: ExampleBParams) -> np.ndarray:
    gl, gr, fl, fr, _, _ = _b_rates(p)
    if not math.isclose(fl, fr, rel_tol=0, abs_tol=1e-12):
        raise ModelError("Onsager coefficients are defined at equilibrium f_L == f_R")
    val = gl * gr / (gl + gr) * fl * (1 - fl)
    return val * np.array([[1.0, -1.0], [-1.0, 1.0]])


def _b_equilibrium_noise(p: ExampleBParams) -> np.ndarray:
    return 2.0 * _b_onsager(p)


def _c_two_point(p: ExampleCParams, tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    gam, w = p.Gamma, p.Omega
    wp = np.sqrt(complex(gam**2 - 4 * w**2))
    z = wp * tau
    if wp == 0:
        sinh_ratio = tau.astype(complex)
    else:
        sinh_ratio = np.sinh(z) / wp
    return np.real(4 * gam * np.exp(-gam * tau) * (gam * sinh_ratio + np.cosh(z)))


def _c_spectrum(p: ExampleCParams, omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    gam, om = p.Gamma, p.Omega
    return 1 + 64 * gam**2 * om**2 / (4 * gam**2 * w**2 + (w**2 - 4 * om**2) ** 2)


def _c_noise(p: ExampleCParams) -> float:
    return 1 + 4 * p.Gamma**2 / p.Omega**2


def _d_pump(p: ExampleDParams) -> float:
    """Real pump strength ``g`` of ``G = i g`` at zero detuning."""

    if p.Delta != 0 or p.G.real != 0:
        raise ModelError("closed form needs Delta = 0 and a purely imaginary G")
    return p.G.imag


def _d_moments(p: ExampleDParams):
    den = p.kappa**2 + 4 * p.Delta**2 - 4 * abs(p.G) ** 2
    n = 2 * abs(p.G) ** 2 / den
    m = -p.G * (2 * p.Delta + 1j * p.kappa) / den
    return n, m


def _d_jump_current(p: ExampleDParams) -> float:
    g, k = abs(p.G), p.kappa
    if p.Delta != 0:
        raise ModelError("closed form needs Delta = 0")
    return 2 * k * g**2 / (k**2 - 4 * g**2)


def _d_homodyne(p: ExampleDParams, omega, phi: float) -> np.ndarray:
    g, k = _d_pump(p), p.kappa
    w = np.asarray(omega, dtype=float)
    num = 8 * g * k * (math.cos(2 * phi) * (4 * g**2 + k**2 + 4 * w**2) + 4 * g * k)
    den = ((k - 2 * g) ** 2 + 4 * w**2) * ((2 * g + k) ** 2 + 4 * w**2)
    return 1 + num / den


def _d_s_q(p: ExampleDParams, omega) -> np.ndarray:
    g, k = _d_pump(p), p.kappa
    w = np.asarray(omega, dtype=float)
    return 1 + 2 * g * k / (w**2 + (g - k / 2) ** 2)


def _d_s_p(p: ExampleDParams, omega) -> np.ndarray:
    g, k = _d_pump(p), p.kappa
    w = np.asarray(omega, dtype=float)
    return 1 - 2 * g * k / (w**2 + (g + k / 2) ** 2)


def _d_d_q(p: ExampleDParams) -> float:
    g, k = _d_pump(p), p.kappa
    return (k + 2 * g) ** 2 / (k - 2 * g) ** 2


def _d_d_p(p: ExampleDParams) -> float:
    g, k = _d_pump(p), p.kappa
    return (k - 2 * g) ** 2 / (k + 2 * g) ** 2


def _d_jump_spectrum(p: ExampleDParams, omega) -> np.ndarray:
    g, k = abs(p.G), p.kappa
    w = np.asarray(omega, dtype=float)
    j = _d_jump_current(p)
    return j + g**2 * k**2 / ((2 * g + k) ** 3 + (2 * g + k) * w**2) - g**2 * k**2 / (
        (2 * g - k) ** 3 + (2 * g - k) * w**2
    )


def _d_jump_noise(p: ExampleDParams) -> float:
    g, k = abs(p.G), p.kappa
    if p.Delta != 0:
        raise ModelError("closed form needs Delta = 0")
    return 4 * g**2 * k * (8 * g**4 + 2 * g**2 * k**2 + k**4) / (k**2 - 4 * g**2) ** 3


def _d_g2(p: ExampleDParams, tau) -> np.ndarray:
    g, k = abs(p.G), p.kappa
    if p.Delta != 0 or p.nbar != 0:
        raise ModelError("closed form needs Delta = 0 and nbar = 0")
    t = np.asarray(tau, dtype=float)
    return 1 + ((k - 2 * g) ** 2 * np.exp(-t * (k + 2 * g)) + (k + 2 * g) ** 2 * np.exp(-t * (k - 2 * g))) / (8 * g**2)


def _d_g2_thermal_zero(p: ExampleDParams) -> float:
    g, k, nb = abs(p.G), p.kappa, p.nbar
    return 2 + g**2 * k**2 * (2 * nb + 1) ** 2 / (2 * g**2 + nb * k**2) ** 2


def _qpc_parts(p: QPCParams):
    occ = _b_occupation(p.dot)
    p_empty = abs(p.transmission) ** 2
    p_full = abs(p.transmission + p.coupling) ** 2
    return occ, p_empty, p_full, p.dot.gamma_l + p.dot.gamma_r


def _qpc_current(p: QPCParams) -> float:
    occ, pe, pf, _ = _qpc_parts(p)
    return pe + (pf - pe) * occ


def _qpc_two_point(p: QPCParams, tau) -> np.ndarray:
    occ, pe, pf, s = _qpc_parts(p)
    t = np.asarray(tau, dtype=float)
    return np.exp(-s * t) * (pf - pe) ** 2 * occ * (1 - occ)


def _qpc_noise(p: QPCParams) -> float:
    occ, pe, pf, s = _qpc_parts(p)
    return _qpc_current(p) + 2.0 / s * (pf - pe) ** 2 * occ * (1 - occ)


def cavity_photocount_limit(rho0, n_max: Optional[int] = None) -> np.ndarray:
    """Photocount law of an undriven lossy cavity at ``t -> inf``: the initial Fock populations."""

    diag = np.real(np.diag(np.asarray(rho0)))
    if n_max is not None:
        out = np.zeros(n_max + 1)
        k = min(n_max + 1, diag.size)
        out[:k] = diag[:k]
        return out
    return diag.copy()


@dataclass(frozen=True)
class OracleEntry:
    kind: str
    quantity: str
    func: Callable[..., Any]
    description: str
    equation: str


_CATALOG = [
    OracleEntry("exampleA", "J", _a_current, "steady-state particle current", "ExampleA_Jss"),
    OracleEntry("exampleA", "K_undriven", _a_activity_undriven, "dynamical activity at Omega = 0", "K"),
    OracleEntry("exampleA", "sigma_z_undriven", lambda p: -1.0 / (2 * p.nbar + 1), "<sigma_z> at Omega = 0", "ExampleA_M"),
    OracleEntry("exampleA", "drazin", _a_drazin, "4x4 Drazin inverse at nbar = Delta = 0", "ExampleA_Drazin_inverse"),
    OracleEntry("exampleA", "qfi", _a_qfi, "QFI rate for theta in {Omega, gamma}", "Metrology_QFI"),
    OracleEntry("exampleA", "hasegawa_f", _a_hasegawa_f, "quantum-corrected activity of the noise bound", "TUR_hasegawa_f"),
    OracleEntry("exampleA", "absorption", _a_absorption, "coherent absorption versus detuning", "absorption_spectrum_ExA"),
    OracleEntry("exampleB", "J", _b_current, "steady-state current into the left lead", "ExampleB_Jss"),
    OracleEntry("exampleB", "D", _b_noise, "steady-state noise", "ExampleB_D"),
    OracleEntry("exampleB", "occupation", _b_occupation, "steady-state dot occupation", "ExampleB_Jss"),
    OracleEntry("exampleB", "scgf", _b_scgf, "scaled cumulant generating function", "eq:scgfb"),
    OracleEntry("exampleB", "poisson", _b_poisson, "large-bias slow-lead Poisson law", "poisson"),
    OracleEntry("exampleB", "bipoisson", _b_bidirectional_poisson, "slow-lead bidirectional Poisson law", "pnbipoisson"),
    OracleEntry("exampleB", "symmetric_exact", _b_symmetric_exact, "exact symmetric large-bias law", "eq:pnsymmex"),
    OracleEntry("exampleB", "saddle", _b_saddle, "saddle-point law at symmetric large bias", "eq:saddle"),
    OracleEntry(
        "exampleB", "onsager", _b_onsager, "equilibrium Onsager matrix (bath-out currents)", "eq:ExampleB_Onsager"
    ),
    OracleEntry("exampleB", "noise_matrix", _b_equilibrium_noise, "equilibrium noise matrix", "eq:noiseexampleB2"),
    OracleEntry("exampleC", "J", lambda p: 0.0, "diffusive current of the dephased qubit", "ExampleC_I_stoch"),
    OracleEntry("exampleC", "F", _c_two_point, "regular part of the two-point function", "Example_C_F"),
    OracleEntry("exampleC", "S", _c_spectrum, "homodyne power spectrum", "ExampleC_S"),
    OracleEntry("exampleC", "D", _c_noise, "homodyne noise", "ExampleC_D"),
    OracleEntry("exampleD", "occupation", lambda p: _d_moments(p)[0], "<a^dagger a>", "ExampleD_aves_ss"),
    OracleEntry("exampleD", "anomalous", lambda p: _d_moments(p)[1], "<a a>", "ExampleD_aves_ss"),
    OracleEntry("exampleD", "J", _d_jump_current, "photodetection current", "ExampleD_aves_ss"),
    OracleEntry("exampleD", "S_q", _d_s_q, "position-homodyne spectrum", "Parametric_oscillator_Sq_Sp"),
    OracleEntry("exampleD", "S_p", _d_s_p, "momentum-homodyne spectrum", "Parametric_oscillator_Sq_Sp"),
    OracleEntry("exampleD", "S_phi", _d_homodyne, "homodyne spectrum at angle phi", "Parametric_oscillator_Sq_Sp"),
    OracleEntry("exampleD", "D_q", _d_d_q, "position-homodyne noise", "Parametric_oscillator_Dq_Dp"),
    OracleEntry("exampleD", "D_p", _d_d_p, "momentum-homodyne noise", "Parametric_oscillator_Dq_Dp"),
    OracleEntry("exampleD", "S_jump", _d_jump_spectrum, "photodetection spectrum", "Parametric_oscillator_Sj"),
    OracleEntry("exampleD", "D_jump", _d_jump_noise, "photodetection noise", "Parametric_oscillator_Dj"),
    OracleEntry("exampleD", "g2", _d_g2, "second-order coherence", "ExampleD_g2"),
    OracleEntry("exampleD", "g2_thermal_zero", _d_g2_thermal_zero, "g2(0) with thermal input", "g2_0"),
    OracleEntry("qpc", "J", _qpc_current, "point-contact current", "QPC_SME_jump"),
    OracleEntry(
        "qpc", "F", _qpc_two_point, "regular part of the point-contact two-point function", "QPC_SME_jump: two-point display"
    ),
    OracleEntry("qpc", "D", _qpc_noise, "point-contact noise", "QPC_SME_jump: noise display"),
]


def oracle_catalog() -> Dict[tuple, OracleEntry]:
    """All closed forms keyed by ``(kind, quantity)``."""

    return {(e.kind, e.quantity): e for e in _CATALOG}


def oracle(params: ModelParams, quantity: str, *args, **kwargs):
    """Evaluate the closed form ``quantity`` for ``params``.

    Extra arguments are the grid (``tau``, ``omega``, ``chi``) or ``(n, t)``
    the quantity depends on.
    """

    entry = oracle_catalog().get((params.kind, quantity))
    if entry is None:
        known = sorted(q for k, q in oracle_catalog() if k == params.kind)
        raise ModelError(f"no closed form {quantity!r} for {params.kind}; known: {', '.join(known)}")
    return entry.func(params, *args, **kwargs)
