from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qcstats.analysis import (
    ParametrizedModel,
    classical_tur_check,
    hasegawa_bound,
    onsager_fdt_check,
    qfi_rate,
)
from qcstats.config import load_settings
from qcstats.core import (
    ConfigError,
    ModelError,
    QCStatsError,
    UnstableModelError,
    get_logger,
    init_logging_from_env,
    log_exception,
)
from qcstats.currents import DIFFUSIVE, JUMP, CurrentSpec, average_current, dynamical_activity, noise, power_spectrum
from qcstats.fcs import charge_distribution, cumulants_recursive, scgf, tilted_diffusive, tilted_jump
from qcstats.gaussian import gaussian_diffusion_stats, gaussian_jump_stats, occupations, steady_covariance
from qcstats.ledger import RunEventLogger, RunLedger
from qcstats.lindblad import (
    basis_projector,
    coherent_state,
    drazin,
    steady_state,
    vectorize,
)
from qcstats.modelfile import load_model, model_hash
from qcstats.models import (
    ClassicalPauliParams,
    ExampleAParams,
    ExampleBParams,
    ExampleCParams,
    ExampleDParams,
    QPCParams,
    BUILDERS,
    build,
    build_gaussian,
    oracle,
    oracle_catalog,
)
from qcstats.trajectories import charge_at, diffusive_ensemble, simulate_ensemble
from qcstats.wtd import no_jump_generator, wtd_between, wtd_first

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_USAGE = 64

MAX_GRID_POINTS = 1_000_000

log = get_logger("qcstats.cli")


# -- argument helpers ------------------------------------------------------------------


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:points[:lin|log]`` or a single value."""

    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) not in (3, 4):
            raise ValueError(text)
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"grid {text!r} is not start:stop:points[:lin|log]") from exc
    spacing = parts[3] if len(parts) == 4 else "lin"
    if not 1 <= points <= MAX_GRID_POINTS:
        raise ConfigError(f"grid {text!r} needs 1..{MAX_GRID_POINTS} points")
    if spacing == "lin":
        return np.linspace(start, stop, points)
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"logarithmic grid {text!r} needs positive bounds")
        return np.geomspace(start, stop, points)
    raise ConfigError(f"grid spacing must be 'lin' or 'log', got {spacing!r}")


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _matrix(text: str) -> np.ndarray:
    return np.array([_floats(row) for row in text.split(";")], dtype=float)


def _format(value: Any) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


@dataclass
class Table:
    columns: List[str]
    rows: List[Sequence[Any]] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)
    ok: bool = True


@dataclass
class Loaded:
    model: Any
    params: Any
    gaussian: Any
    hash: str


def write_table(table: Table, *, fmt: str, header: Dict[str, Any], output: Optional[str]) -> None:
    meta = {**header, **table.meta}
    if fmt == "json":
        doc = {
            "meta": {k: _jsonable(v) for k, v in meta.items()},
            "columns": table.columns,
            "rows": [[_jsonable(v) for v in row] for row in table.rows],
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        lines = [f"# {k}: {_format(v)}" for k, v in meta.items()]
        lines.append(",".join(table.columns))
        lines.extend(",".join(_format(v) for v in row) for row in table.rows)
        text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- model selection -------------------------------------------------------------------


def _params_from_args(args: argparse.Namespace):
    name = args.builder
    if name not in BUILDERS:
        raise ConfigError(f"unknown builder {name!r}; known: {', '.join(sorted(BUILDERS))}")
    if name == "exampleB":
        if args.symmetric_large_bias:
            return ExampleBParams.symmetric_large_bias(
                gamma=args.gamma if args.gamma is not None else 1.0,
                energy=args.energy if args.energy is not None else 0.0,
            )
        return ExampleBParams(**_dot_kwargs(args))
    if name == "qpc":
        kwargs = {k: getattr(args, k) for k in ("transmission", "coupling") if getattr(args, k) is not None}
        return QPCParams(dot=ExampleBParams(**_dot_kwargs(args)), **kwargs)
    if name == "pauli":
        if args.rates is None:
            raise ConfigError("the pauli builder needs --rates")
        weights = _matrix(args.transition_weights) if args.transition_weights else None
        return ClassicalPauliParams(rates=_matrix(args.rates), weights=weights)
    cls = BUILDERS[name]
    names = {"exampleA": ("gamma", "Omega", "Delta", "nbar"),
             "exampleC": ("Gamma", "Omega", "Delta"),
             "exampleD": ("G", "U", "Delta", "kappa", "fock_cutoff", "nbar")}[name]
    return cls(**{k: getattr(args, k) for k in names if getattr(args, k) is not None})


def _dot_kwargs(args: argparse.Namespace) -> Dict[str, Any]:
    kwargs = {}
    for key in ("energy", "gamma_l", "gamma_r", "temp_l", "temp_r", "mu_l", "mu_r", "f_left", "f_right"):
        value = getattr(args, key)
        if value is not None:
            kwargs[key] = value
    if args.gamma is not None:
        kwargs.setdefault("gamma_l", args.gamma)
        kwargs.setdefault("gamma_r", args.gamma)
    return kwargs


def load_target(args: argparse.Namespace) -> Loaded:
    if args.model:
        doc = load_model(args.model)
        return Loaded(doc.model, doc.params, doc.gaussian, doc.hash)
    if not args.builder:
        raise ConfigError("one of --model or --builder is required")
    params = _params_from_args(args)
    model = build(params)
    return Loaded(model, params, None, model_hash(model))


def current_spec(args: argparse.Namespace, target: Loaded) -> CurrentSpec:
    kind = args.kind
    if kind is None:
        kind = DIFFUSIVE if isinstance(target.params, ExampleCParams) else JUMP
    model = target.model
    if args.weights is None and args.phases is None:
        return CurrentSpec.from_model(model, kind=kind)
    weights = _floats(args.weights) if args.weights else [ch.weight if ch.monitored else 0.0 for ch in model.channels]
    phases = _floats(args.phases) if args.phases else [ch.phase for ch in model.channels]
    return CurrentSpec(kind=kind, weights=weights, phases=phases)


def initial_state(text: str, model) -> np.ndarray:
    """``steady``, ``ground``, ``fock:N`` or ``coherent:ALPHA``."""

    d = model.dimension
    if text == "steady":
        return steady_state(vectorize(model))
    if text == "ground":
        return basis_projector(d, 0)
    kind, _, arg = text.partition(":")
    try:
        if kind == "fock":
            k = int(arg)
            if not 0 <= k < d:
                raise ConfigError(f"Fock level {k} outside dimension {d}")
            return basis_projector(d, k)
        if kind == "coherent":
            return coherent_state(d, complex(arg))
    except ValueError as exc:
        raise ConfigError(f"bad initial state {text!r}") from exc
    raise ConfigError(f"initial state must be steady, ground, fock:N or coherent:ALPHA; got {text!r}")


def _tilted(target: Loaded, spec: CurrentSpec):
    if spec.kind == DIFFUSIVE:
        return tilted_diffusive(target.model, spec)
    return tilted_jump(target.model, spec)


def _gaussian_target(target: Loaded):
    if target.gaussian is not None:
        return target.gaussian
    if target.params is None:
        raise ModelError("model has no Gaussian description; add a gaussian section or use a builder")
    return build_gaussian(target.params)


# -- commands --------------------------------------------------------------------------


def cmd_steady(args, target: Loaded, settings) -> Table:
    rho = steady_state(vectorize(target.model))
    d = target.model.dimension
    table = Table(["i", "j", "re", "im"])
    for i in range(d):
        for j in range(d):
            table.rows.append((i, j, rho[i, j].real, rho[i, j].imag))
    try:
        spec = current_spec(args, target)
    except ModelError:
        return table
    table.meta["current"] = average_current(target.model, spec)
    table.meta["activity"] = dynamical_activity(target.model, spec)
    return table


def cmd_spectrum(args, target: Loaded, settings) -> Table:
    spec = current_spec(args, target)
    omega = parse_grid(args.omega)
    result = power_spectrum(target.model, spec, omega)
    return Table(["omega", "S"], [(w, s) for w, s in zip(result.omega, result.values)])


def cmd_noise(args, target: Loaded, settings) -> Table:
    result = noise(target.model, current_spec(args, target))
    return Table(["J", "K", "D", "fano"], [(result.J, result.K, result.D, result.fano)])


def cmd_fcs(args, target: Loaded, settings) -> Table:
    spec = current_spec(args, target)
    rho0 = initial_state(args.initial, target.model)
    resolution = args.resolution or settings.chi_points
    dist = charge_distribution(_tilted(target, spec), rho0, args.t, resolution)
    column = "P" if dist.support == "lattice" else "density"
    table = Table(["n", column], [(n, p) for n, p in zip(dist.charges, dist.values)])
    table.meta["support"] = dist.support
    return table


def cmd_scgf(args, target: Loaded, settings) -> Table:
    spec = current_spec(args, target)
    chi = parse_grid(args.chi)
    values = scgf(_tilted(target, spec), chi)
    return Table(["chi", "re_C", "im_C"], [(c, v.real, v.imag) for c, v in zip(chi, values)])


def cmd_cumulants(args, target: Loaded, settings) -> Table:
    spec = current_spec(args, target)
    values = cumulants_recursive(_tilted(target, spec), args.order)
    return Table(["order", "cumulant"], [(n, v) for n, v in enumerate(values, start=1)])


def cmd_trajectory(args, target: Loaded, settings) -> Table:
    spec = current_spec(args, target)
    if spec.kind != JUMP:
        raise ConfigError("trajectory simulates jump currents; use the diffusive command instead")
    rho0 = initial_state(args.initial, target.model)
    records = simulate_ensemble(
        target.model, rho0, args.t, args.n_trajectories, settings.seed, dt=args.dt, threads=settings.threads
    )
    table = Table(["index", "jumps", "charge", "current"])
    charges = []
    for rec in records:
        n = float(charge_at(rec, spec, [args.t])[0])
        charges.append(n)
        table.rows.append((rec.index, rec.n_jumps, n, n / args.t))
    charges = np.asarray(charges)
    table.meta["mean_current"] = float(charges.mean() / args.t)
    if charges.size > 1:
        table.meta["charge_variance_rate"] = float(charges.var(ddof=1) / args.t)
    return table


def cmd_diffusive(args, target: Loaded, settings) -> Table:
    spec = current_spec(args, target)
    if spec.kind != DIFFUSIVE:
        spec = CurrentSpec(kind=DIFFUSIVE, weights=spec.weights, phases=spec.phases)
    rho0 = initial_state(args.initial, target.model)
    n_runs = 1 if args.series else args.n_trajectories
    records = diffusive_ensemble(
        target.model, spec, rho0, args.dt, args.t, n_runs, settings.seed, threads=settings.threads
    )
    if args.series:
        rec = records[0]
        return Table(["t", "I"], [(t, i) for t, i in zip(rec.times, rec.current)])
    table = Table(["index", "charge", "current"])
    for rec in records:
        q = float(rec.charge()[-1])
        table.rows.append((rec.index, q, q / rec.final_time))
    return table


def cmd_wtd(args, target: Loaded, settings) -> Table:
    monitored = args.monitored.split(",") if args.monitored else None
    taus = parse_grid(args.tau)
    labels = list(no_jump_generator(target.model, monitored).labels)
    if args.after:
        values = wtd_between(target.model, monitored, args.after, taus)
    else:
        values = wtd_first(target.model, monitored, initial_state(args.initial, target.model), taus)
    return Table(["t", *labels], [(t, *row) for t, row in zip(taus, values)])


def cmd_gaussian(args, target: Loaded, settings) -> Table:
    gmodel = _gaussian_target(target)
    omega = parse_grid(args.omega) if args.omega else None
    kind = args.kind or JUMP
    if kind == DIFFUSIVE:
        stats = gaussian_diffusion_stats(gmodel.with_phase(args.phase), omega)
    else:
        stats = gaussian_jump_stats(gmodel, omega)
    state = steady_covariance(gmodel)
    if omega is None:
        table = Table(["J", "K", "D", "fano"], [(stats.J, stats.K, stats.D, stats.fano)])
    else:
        table = Table(["omega", "S"], [(w, s) for w, s in zip(stats.omega, stats.S)])
        table.meta.update(J=stats.J, D=stats.D)
    for i, n in enumerate(occupations(state)):
        table.meta[f"occupation_{i}"] = float(np.real(n))
    return table


def cmd_analyze(args, target: Loaded, settings) -> Table:
    model = target.model
    rows: List[Tuple[str, Any]] = []
    spec = current_spec(args, target)
    report = hasegawa_bound(model, spec)
    rows.extend((f"hasegawa_{k}", v) for k, v in report.as_dict().items())
    if args.parameter:
        if args.parameter == "scaling":
            pmodel = ParametrizedModel.scaling(model)
        elif target.params is None:
            raise ConfigError("a named parameter needs a builder model; use --parameter scaling")
        else:
            pmodel = ParametrizedModel.from_params(target.params, args.parameter)
        result = qfi_rate(pmodel)
        rows.extend([("qfi_rate", result.rate), ("qfi_static", result.static), ("qfi_correction", result.correction)])
    params = target.params
    if isinstance(params, ExampleBParams) and 0.0 < params.f_l < 1.0 and params.f_l == params.f_r:
        rows.extend((f"onsager_{k}", v) for k, v in onsager_fdt_check(params).as_dict().items())
    if isinstance(params, ClassicalPauliParams):
        rows.extend((f"tur_{k}", v) for k, v in classical_tur_check(params.rates, params.weights).as_dict().items())
    table = Table(["quantity", "value"])
    for key, value in rows:
        if isinstance(value, np.ndarray):
            for idx, v in np.ndenumerate(value):
                table.rows.append((f"{key}[{','.join(map(str, idx))}]", float(np.real(v))))
        else:
            table.rows.append((key, value))
    return table


# -- golden checks ---------------------------------------------------------------------


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    compute: Callable[[], Tuple[Any, Any]]
    tolerance: float
    relative: bool = True


def _close(pair) -> float:
    computed, expected = (np.asarray(x, dtype=complex) for x in pair)
    err = float(np.max(np.abs(computed - expected)))
    return err


def _rel(pair) -> float:
    computed, expected = (np.asarray(x, dtype=complex) for x in pair)
    return float(np.max(np.abs(computed - expected) / np.maximum(np.abs(expected), 1e-300)))


def _equation(name: str) -> str:
    kind, quantity = name.split(".", 1)
    catalog = oracle_catalog()
    entry = catalog.get((kind, quantity)) or catalog.get((kind, quantity.split("_", 1)[0]))
    return entry.equation if entry is not None else ""


def golden_checks() -> List[GoldenCheck]:
    a = ExampleAParams(gamma=1.0, Omega=1.0, nbar=0.2)
    a0 = ExampleAParams(gamma=1.0, Omega=1.0)
    b = ExampleBParams(gamma_l=1.0, gamma_r=0.5, f_left=0.2, f_right=0.7)
    c = ExampleCParams(Gamma=0.2, Omega=1.0)
    d = ExampleDParams(G=0.3j, fock_cutoff=30)
    qpc = QPCParams(dot=ExampleBParams(gamma_l=1.0, gamma_r=0.5, f_left=0.2, f_right=0.7))
    chi = np.linspace(-math.pi, math.pi, 33)
    omega = np.linspace(0.0, 6.0, 61)
    c_diffusive = CurrentSpec.from_model(build(c), kind=DIFFUSIVE)

    def gaussian_d():
        return build_gaussian(d)

    return [
        GoldenCheck("exampleA.J", lambda: (average_current(build(a)), oracle(a, "J")), 1e-10),
        GoldenCheck("exampleA.drazin", lambda: (drazin(vectorize(build(a0))), oracle(a0, "drazin")), 1e-10, False),
        GoldenCheck(
            "exampleA.qfi_Omega",
            lambda: (qfi_rate(ParametrizedModel.from_params(a0, "Omega")).rate, oracle(a0, "qfi", "Omega")),
            1e-6,
        ),
        GoldenCheck(
            "exampleA.qfi_gamma",
            lambda: (qfi_rate(ParametrizedModel.from_params(a0, "gamma")).rate, oracle(a0, "qfi", "gamma")),
            1e-6,
        ),
        GoldenCheck("exampleA.hasegawa_f", lambda: (hasegawa_bound(build(a0)).f, oracle(a0, "hasegawa_f")), 1e-8),
        GoldenCheck("exampleB.J", lambda: (average_current(build(b)), oracle(b, "J")), 1e-10),
        GoldenCheck("exampleB.D", lambda: (noise(build(b)).D, oracle(b, "D")), 1e-10),
        GoldenCheck(
            "exampleB.scgf",
            lambda: (scgf(tilted_jump(build(b), CurrentSpec.from_model(build(b))), chi), oracle(b, "scgf", chi)),
            1e-9,
            False,
        ),
        GoldenCheck(
            "exampleC.S",
            lambda: (power_spectrum(build(c), c_diffusive, omega).values, oracle(c, "S", omega)),
            1e-8,
        ),
        GoldenCheck("exampleC.D", lambda: (noise(build(c), c_diffusive).D, oracle(c, "D")), 1e-10),
        GoldenCheck(
            "exampleD.occupation",
            lambda: (occupations(steady_covariance(gaussian_d()))[0], oracle(d, "occupation")),
            1e-10,
        ),
        GoldenCheck(
            "exampleD.S_q",
            lambda: (gaussian_diffusion_stats(gaussian_d().with_phase(0.0), omega).S, oracle(d, "S_q", omega)),
            1e-8,
        ),
        GoldenCheck(
            "exampleD.S_p",
            lambda: (gaussian_diffusion_stats(gaussian_d().with_phase(math.pi / 2), omega).S, oracle(d, "S_p", omega)),
            1e-8,
        ),
        GoldenCheck("exampleD.J", lambda: (gaussian_jump_stats(gaussian_d()).J, oracle(d, "J")), 1e-10),
        GoldenCheck("exampleD.D_jump", lambda: (gaussian_jump_stats(gaussian_d()).D, oracle(d, "D_jump")), 1e-8),
        GoldenCheck("qpc.J", lambda: (average_current(build(qpc)), oracle(qpc, "J")), 1e-10),
        GoldenCheck("qpc.D", lambda: (noise(build(qpc)).D, oracle(qpc, "D")), 1e-8),
    ]


def cmd_oracle_check(args, target: Optional[Loaded], settings) -> Table:
    table = Table(["check", "error", "tolerance", "status", "equation"])
    selected = set(args.only.split(",")) if args.only else None
    for check in golden_checks():
        if selected is not None and check.name not in selected:
            continue
        try:
            pair = check.compute()
            err = _rel(pair) if check.relative else _close(pair)
            status = "pass" if err <= check.tolerance else "fail"
        except QCStatsError as exc:
            log_exception(log, code=exc.code, component="oracle-check", exc=exc, check=check.name)
            err, status = float("nan"), "error"
        if status != "pass":
            table.ok = False
        table.rows.append((check.name, err, check.tolerance, status, _equation(check.name)))
    return table


COMMANDS: Dict[str, Callable[..., Table]] = {
    "steady": cmd_steady,
    "spectrum": cmd_spectrum,
    "noise": cmd_noise,
    "fcs": cmd_fcs,
    "scgf": cmd_scgf,
    "cumulants": cmd_cumulants,
    "trajectory": cmd_trajectory,
    "diffusive": cmd_diffusive,
    "wtd": cmd_wtd,
    "gaussian": cmd_gaussian,
    "analyze": cmd_analyze,
    "oracle-check": cmd_oracle_check,
}


# -- parser ----------------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    run = common.add_argument_group("run")
    run.add_argument("--seed", type=int, default=None, help="Master seed (default QCSTATS_SEED or 0)")
    run.add_argument("--threads", type=int, default=None, help="Worker cap (default QCSTATS_THREADS or 1)")
    run.add_argument("--db-uri", default=None, help="SQLAlchemy URI of the run ledger")
    run.add_argument("--chi-points", type=int, default=None, help="Counting-field grid size for fcs")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--output", default=None, help="Output file (default stdout)")
    run.add_argument("--log-events", action="store_true", help="Log run lifecycle events")
    return common


def _model_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    src = p.add_argument_group("model")
    which = src.add_mutually_exclusive_group()
    which.add_argument("--model", default=None, help="JSON model document")
    which.add_argument("--builder", default=None, choices=sorted(BUILDERS), help="Named example model")
    for flag, kind in (
        ("--gamma", float), ("--Omega", float), ("--Delta", float), ("--nbar", float),
        ("--Gamma", float), ("--G", complex), ("--U", float), ("--kappa", float),
        ("--fock-cutoff", int), ("--energy", float), ("--gamma-l", float), ("--gamma-r", float),
        ("--temp-l", float), ("--temp-r", float), ("--mu-l", float), ("--mu-r", float),
        ("--f-left", float), ("--f-right", float), ("--transmission", complex), ("--coupling", complex),
    ):
        src.add_argument(flag, type=kind, default=None)
    src.add_argument("--symmetric-large-bias", action="store_true", help="exampleB with f_L = 0, f_R = 1")
    src.add_argument("--rates", default=None, help="pauli rate matrix, rows separated by ';'")
    src.add_argument("--transition-weights", default=None, help="pauli weight matrix, rows separated by ';'")
    cur = p.add_argument_group("current")
    cur.add_argument("--kind", choices=(JUMP, DIFFUSIVE), default=None)
    cur.add_argument("--weights", default=None, help="Comma-separated channel weights")
    cur.add_argument("--phases", default=None, help="Comma-separated homodyne phases")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcstats", allow_abbrev=False)
    sub = parser.add_subparsers(dest="cmd", required=True)
    common, model = _common_parser(), _model_parser()

    def add(name: str, help_text: str, *, with_model: bool = True) -> argparse.ArgumentParser:
        parents = [common, model] if with_model else [common]
        return sub.add_parser(name, help=help_text, parents=parents, allow_abbrev=False)

    add("steady", "Steady-state density matrix")
    add("spectrum", "Power spectrum S(omega)").add_argument("--omega", required=True, help="start:stop:points")
    add("noise", "Long-time noise, current and Fano factor")
    fcs = add("fcs", "Charge distribution P(n, t)")
    fcs.add_argument("--t", type=float, required=True)
    fcs.add_argument("--resolution", type=int, default=None)
    fcs.add_argument("--initial", default="steady")
    scgf_p = add("scgf", "Scaled cumulant generating function")
    scgf_p.add_argument("--chi", default=f"{-math.pi!r}:{math.pi!r}:257")
    add("cumulants", "Scaled cumulants by recursion").add_argument("--order", type=int, default=4)
    traj = add("trajectory", "Quantum-jump trajectory ensemble")
    traj.add_argument("--t", type=float, required=True)
    traj.add_argument("--n-trajectories", type=int, default=100)
    traj.add_argument("--dt", type=float, default=None)
    traj.add_argument("--initial", default="ground")
    diff = add("diffusive", "Diffusive trajectory ensemble")
    diff.add_argument("--t", type=float, required=True)
    diff.add_argument("--dt", type=float, default=1e-3)
    diff.add_argument("--n-trajectories", type=int, default=10)
    diff.add_argument("--initial", default="steady")
    diff.add_argument("--series", action="store_true", help="Emit the current record of trajectory 0")
    wtd = add("wtd", "Waiting-time distributions")
    wtd.add_argument("--tau", required=True)
    wtd.add_argument("--after", default=None, help="Condition on a jump in this channel")
    wtd.add_argument("--monitored", default=None, help="Comma-separated monitored channel labels")
    wtd.add_argument("--initial", default="steady")
    gauss = add("gaussian", "Quadratic-model statistics")
    gauss.add_argument("--omega", default=None)
    gauss.add_argument("--phase", type=float, default=0.0)
    add("analyze", "Noise bounds, QFI and Onsager checks").add_argument("--parameter", default=None)
    add("oracle-check", "Compare against closed forms", with_model=False).add_argument("--only", default=None)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    init_logging_from_env()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    command_line = shlex.join(["qcstats", *argv])
    model_id = "-"
    events = None
    ledger: Optional[RunLedger] = None
    try:
        settings = load_settings().override(
            threads=args.threads, db_uri=args.db_uri, seed=args.seed, chi_points=args.chi_points
        )
        if settings.threads < 1 or settings.seed < 0:
            raise ConfigError("--threads must be >= 1 and --seed >= 0")
        if settings.db_uri:
            ledger = RunLedger(settings.db_uri)
        events = RunEventLogger(enabled=args.log_events)
        target = None if args.cmd == "oracle-check" else load_target(args)
        if target is not None:
            model_id = target.hash
        events.log_event(kind="start", command=args.cmd, model_hash=model_id, seed=settings.seed)
        table = COMMANDS[args.cmd](args, target, settings)
        header = {"command": command_line, "model_hash": model_id, "seed": settings.seed}
        write_table(table, fmt=args.format, header=header, output=args.output)
    except (ModelError, ConfigError, UnstableModelError) as exc:
        log_exception(log, code=exc.code, component=args.cmd, exc=exc, command=args.cmd, model_hash=model_id)
        print(f"error: {exc}", file=sys.stderr)
        _record(ledger, args.cmd, model_id, "invalid", args.seed, {"error": str(exc)})
        return EXIT_INVALID
    except QCStatsError as exc:
        log_exception(log, code=exc.code, component=args.cmd, exc=exc, command=args.cmd, model_hash=model_id)
        print(f"error: {exc}", file=sys.stderr)
        _record(ledger, args.cmd, model_id, "failed", args.seed, {"error": str(exc)})
        return EXIT_FAILURE

    status = "ok" if table.ok else "failed"
    events.log_event(kind="finish", command=args.cmd, model_hash=model_id, seed=settings.seed, data={"status": status})
    _record(ledger, args.cmd, model_id, status, settings.seed, {"argv": argv})
    return EXIT_OK if table.ok else EXIT_FAILURE


def _record(ledger: Optional[RunLedger], command: str, model_id: str, status: str, seed, payload) -> None:
    if ledger is None:
        return
    try:
        ledger.record_run(command=command, model_hash=model_id, status=status, seed=seed, payload=payload)
    except Exception as exc:
        log.warning("run ledger write failed: %s", exc, extra={"event": "ledger_failed", "command": command})


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
