"""Stochastic unravellings: jump trajectories and homodyne-type SME integration.

Every trajectory owns a Philox stream keyed by ``(seed, index)``, so an
ensemble gives the same records whether it runs on one thread or many.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy import signal

from .core import ModelError, StepSizeError, get_logger, inc_metric, timing
from .currents import CurrentSpec
from .linalg import unit_phase
from .lindblad import LindbladModel, jump_super, unvec, validate_density_matrix, vec, vectorize

__all__ = [
    "TrajectoryRecord",
    "DiffusiveRecord",
    "EmpiricalSpectrum",
    "trajectory_rng",
    "mcwf_simulate",
    "simulate_ensemble",
    "jump_counting",
    "charge_at",
    "diffusive_simulate",
    "diffusive_ensemble",
    "butterworth",
    "empirical_spectrum",
    "save_record",
    "load_record",
    "export_csv",
]

log = get_logger("qcstats.trajectories")

CHUNK = 256
_STACK_BUDGET = 1 << 24
TRACE_DRIFT_LIMIT = 1e-3
EIGEN_CLIP = -1e-10
DARK_TOL = 1e-9
_BATCH = 64


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trajectory ``index`` of an ensemble seeded with ``seed``."""

    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))))


# -- records ---------------------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """Detection record ``(t_1, k_1), (t_2, k_2), ...`` of one jump trajectory.

    ``channels`` holds declared-channel indices. ``states`` (optional) are the
    normalized conditional density matrices at ``sample_times``. ``dark`` marks
    a trajectory that reached a state from which no further jump can occur.
    """

    seed: int
    index: int
    final_time: float
    times: np.ndarray
    channels: np.ndarray
    labels: Tuple[str, ...] = ()
    sample_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    states: Optional[np.ndarray] = None
    dark: bool = False

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.channels = np.asarray(self.channels, dtype=int)
        if self.times.size and (np.any(np.diff(self.times) <= 0) or self.times[0] < 0 or self.times[-1] > self.final_time):
            raise ModelError("jump times must increase strictly inside [0, final_time]")

    @property
    def n_jumps(self) -> int:
        return int(self.times.size)

    def expectation(self, op) -> np.ndarray:
        if self.states is None:
            raise ModelError("trajectory was simulated without sampled states")
        return np.real(np.einsum("ij,tji->t", np.asarray(op), self.states))

    def binned_current(self, spec: CurrentSpec, dt: float) -> np.ndarray:
        """Weighted clicks per bin divided by ``dt``."""

        n_bins = int(round(self.final_time / dt))
        w = np.asarray(spec.weights)[self.channels] if self.n_jumps else np.zeros(0)
        idx = np.minimum((self.times / dt).astype(int), n_bins - 1)
        out = np.zeros(n_bins)
        np.add.at(out, idx, w)
        return out / dt


@dataclass
class DiffusiveRecord:
    """Sampled diffusive current ``I(t_j)`` with optional conditional observables."""

    seed: int
    index: int
    dt: float
    current: np.ndarray
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    sample_every: int = 1

    @property
    def final_time(self) -> float:
        return self.dt * self.current.size

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, self.current.size + 1)

    def charge(self) -> np.ndarray:
        return np.cumsum(self.current) * self.dt


# -- jump unravelling ------------------------------------------------------------------


class _Unravelling:
    """No-jump propagation and jump updates in either wavefunction or density form."""

    def __init__(self, model: LindbladModel, rho0) -> None:
        rho0 = validate_density_matrix(rho0, tol=1e-8)
        chans = model.effective_channels()
        srcs = model.effective_sources()
        self.sources = [s for s, ch in zip(srcs, chans) if ch.monitored]
        self.ops = [ch.operator for ch in chans if ch.monitored]
        if not self.ops:
            raise ModelError("no monitored channels to unravel")
        w, v = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
        self.pure = all(ch.monitored for ch in chans) and w[-1] > 1.0 - 1e-12
        self.d = model.dimension
        if self.pure:
            h_eff = model.hamiltonian - 0.5j * sum(op.conj().T @ op for op in self.ops)
            self.gen = -1j * h_eff
            self.x0 = v[:, -1].astype(complex)
        else:
            self.gen = vectorize(model).matrix - sum(jump_super(op) for op in self.ops)
            self.x0 = vec(rho0)
            self.trace_row = vec(np.eye(self.d))
            self.jump_sups = [jump_super(op) for op in self.ops]
        rates = [float(np.linalg.norm(op.conj().T @ op, 2)) for op in self.ops]
        self.rate_max = max(max(rates), 1e-300)
        self._dark = self._dark_component()

    def weight(self, x: np.ndarray) -> np.ndarray:
        if self.pure:
            return np.real(np.sum(np.abs(x) ** 2, axis=-1))
        return np.real(x @ self.trace_row)

    def channel_weights(self, x: np.ndarray) -> np.ndarray:
        if self.pure:
            return np.array([float(np.sum(np.abs(op @ x) ** 2)) for op in self.ops])
        return np.array([float(np.real(self.trace_row @ (s @ x))) for s in self.jump_sups])

    def apply(self, x: np.ndarray, k: int) -> np.ndarray:
        if self.pure:
            y = self.ops[k] @ x
            return y / np.linalg.norm(y)
        y = self.jump_sups[k] @ x
        return y / np.real(self.trace_row @ y)

    def density(self, x: np.ndarray) -> np.ndarray:
        if self.pure:
            psi = x / np.linalg.norm(x)
            return np.outer(psi, psi.conj())
        rho = unvec(x, self.d)
        return rho / np.trace(rho)

    def chunk_size(self) -> int:
        n = self.gen.shape[0]
        return max(1, min(CHUNK, _STACK_BUDGET // (n * n)))

    def propagators(self, dt: float, count: int) -> np.ndarray:
        step = la.expm(self.gen * dt)
        out = np.empty((count,) + step.shape, dtype=complex)
        out[0] = step
        for j in range(1, count):
            out[j] = step @ out[j - 1]
        return out

    def _dark_component(self):
        """Handle on the part of the no-jump evolution that never decays.

        Pure form: orthonormal basis of the span of eigenvectors of ``H_eff``
        with real eigenvalue (``L_k v = 0`` there). Density form: the
        functional ``u`` with ``u . x = lim tr exp(G t) x``.
        """

        vals, left, right = la.eig(self.gen, left=True, right=True)
        keep = np.flatnonzero(np.abs(vals.real) <= DARK_TOL * max(1.0, self.rate_max))
        if keep.size == 0:
            return None
        if self.pure:
            return la.orth(right[:, keep])
        lk, rk = left[:, keep].conj().T, right[:, keep]
        coeff = np.linalg.solve((lk @ rk).T, self.trace_row @ rk)
        return coeff @ lk

    def asymptotic_weight(self, x: np.ndarray) -> float:
        """``lim P_no(t)`` of the unnormalized no-jump state ``x``."""

        if self._dark is None:
            return 0.0
        if self.pure:
            return float(np.sum(np.abs(self._dark.conj().T @ x) ** 2))
        return float(np.real(self._dark @ x))

    def is_dark(self, x: np.ndarray, threshold: float) -> bool:
        """``P_no`` plateaus above ``threshold``: no further jump will be drawn."""

        return self.asymptotic_weight(x) > threshold


def _step_size(unr: _Unravelling, final_time: float, dt: Optional[float]) -> float:
    if dt is not None:
        return float(dt)
    return min(1e-3 / unr.rate_max, final_time / 1e4)


def mcwf_simulate(
    model: LindbladModel,
    rho0,
    final_time: float,
    seed: int = 0,
    *,
    index: int = 0,
    sample_times: Optional[Sequence[float]] = None,
    dt: Optional[float] = None,
    _unravelling: Optional[_Unravelling] = None,
    _stack: Optional[np.ndarray] = None,
) -> TrajectoryRecord:
    """One quantum-jump trajectory by inversion sampling of the no-jump probability.

    ``P_no(t)`` is marched on a grid of step ``dt`` (default
    ``min(1e-3/gamma_max, T/1e4)``); the crossing of a uniform draw is refined
    by one bisection and linear interpolation.
    """

    if final_time <= 0:
        raise ModelError(f"final_time must be positive, got {final_time}")
    unr = _unravelling if _unravelling is not None else _Unravelling(model, rho0)
    h = _step_size(unr, final_time, dt)
    stack = _stack if _stack is not None else unr.propagators(h, unr.chunk_size())
    half = la.expm(unr.gen * (0.5 * h))
    rng = trajectory_rng(seed, index)
    samples = np.sort(np.asarray(sample_times if sample_times is not None else [], dtype=float))
    states = np.empty((samples.size, unr.d, unr.d), dtype=complex) if samples.size else None
    next_sample = 0

    def record_until(x_start, t_start, t_stop):
        nonlocal next_sample
        while next_sample < samples.size and samples[next_sample] <= t_stop:
            ts = samples[next_sample]
            x = la.expm(unr.gen * (ts - t_start)) @ x_start if ts > t_start else x_start
            states[next_sample] = unr.density(x)
            next_sample += 1

    times: List[float] = []
    chans: List[int] = []
    t = 0.0
    x = unr.x0.copy()
    r = rng.random()
    dark = False
    while t < final_time:
        if unr.is_dark(x, r):
            dark = True
            break
        steps_left = int(math.ceil((final_time - t) / h - 1e-12))
        c = max(1, min(stack.shape[0], steps_left))
        chunk = stack[:c] @ x
        p = unr.weight(chunk)
        below = np.flatnonzero(p < r)
        if below.size == 0:
            t_end = min(t + c * h, final_time)
            record_until(x, t, t_end)
            x, t = chunk[c - 1], t + c * h
            continue
        j = int(below[0])
        x1 = x if j == 0 else chunk[j - 1]
        t1 = t + j * h
        mid = half @ x1
        p1, pm, p2 = float(unr.weight(x1)), float(unr.weight(mid)), float(p[j])
        if pm < r:
            ta, xa, pa, pb, span = t1, x1, p1, pm, 0.5 * h
        else:
            ta, xa, pa, pb, span = t1 + 0.5 * h, mid, pm, p2, 0.5 * h
        tau = span * (pa - r) / (pa - pb) if pa > pb else span
        t_jump = ta + tau
        if t_jump > final_time:
            record_until(x, t, final_time)
            t = final_time
            break
        x_jump = la.expm(unr.gen * tau) @ xa
        record_until(x, t, t_jump)
        weights = np.maximum(unr.channel_weights(x_jump), 0.0)
        k = int(rng.choice(len(weights), p=weights / weights.sum()))
        times.append(t_jump)
        chans.append(unr.sources[k])
        x = unr.apply(x_jump, k)
        t = t_jump
        r = rng.random()
    if next_sample < samples.size:
        record_until(x, t, math.inf)
    if dark:
        log.debug("trajectory reached a dark state", extra={"event": "dark_state", "index": index, "t": t})
    return TrajectoryRecord(
        seed=int(seed),
        index=int(index),
        final_time=float(final_time),
        times=np.array(times),
        channels=np.array(chans, dtype=int),
        labels=model.labels,
        sample_times=samples,
        states=states,
        dark=dark,
    )


def _map_ordered(fn, indices: Sequence[int], threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, indices))


def simulate_ensemble(
    model: LindbladModel,
    rho0,
    final_time: float,
    n_trajectories: int,
    seed: int = 0,
    *,
    sample_times: Optional[Sequence[float]] = None,
    dt: Optional[float] = None,
    threads: int = 1,
) -> List[TrajectoryRecord]:
    """``n_trajectories`` independent jump trajectories, ordered by index."""

    if n_trajectories < 1:
        raise ModelError("need at least one trajectory")
    unr = _Unravelling(model, rho0)
    h = _step_size(unr, final_time, dt)
    stack = unr.propagators(h, unr.chunk_size())

    def run(i: int) -> TrajectoryRecord:
        return mcwf_simulate(
            model, rho0, final_time, seed, index=i, sample_times=sample_times, dt=h, _unravelling=unr, _stack=stack
        )

    with timing("trajectories.mcwf_ensemble_ms", trajectories=n_trajectories, threads=threads):
        records = _map_ordered(run, range(n_trajectories), threads)
    inc_metric("trajectories.mcwf_runs", n_trajectories)
    return records


def charge_at(record: TrajectoryRecord, spec: CurrentSpec, times: Sequence[float]) -> np.ndarray:
    """Staircase ``N(t) = sum_{t_i <= t} nu_{k_i}`` at the requested times."""

    t = np.asarray(times, dtype=float)
    if not record.n_jumps:
        return np.zeros(t.shape)
    cum = np.cumsum(np.asarray(spec.weights)[record.channels])
    idx = np.searchsorted(record.times, t, side="right")
    return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


def jump_counting(record: TrajectoryRecord, spec: CurrentSpec):
    """``(jump times, N after each jump, time-averaged current N(T)/T)``."""

    if record.n_jumps:
        steps = np.cumsum(np.asarray(spec.weights)[record.channels])
    else:
        steps = np.zeros(0)
    total = float(steps[-1]) if steps.size else 0.0
    return record.times.copy(), steps, total / record.final_time


# -- diffusive unravelling -------------------------------------------------------------


def _renormalize(rho: np.ndarray) -> np.ndarray:
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    w, v = np.linalg.eigh(herm)
    if np.any(w < EIGEN_CLIP):
        log.debug("clipping negative conditional eigenvalues", extra={"event": "sme_clip", "min_eig": float(w.min())})
    w = np.maximum(w, 0.0)
    w = w / w.sum(axis=-1, keepdims=True)
    return np.einsum("bij,bj,bkj->bik", v, w, v.conj())


def _sme_batch(
    model: LindbladModel,
    spec: CurrentSpec,
    rho0: np.ndarray,
    dt: float,
    noises: np.ndarray,
    observables: Dict[str, np.ndarray],
    sample_every: int,
):
    """Euler-Maruyama for a batch; ``noises`` has shape ``(batch, steps, channels)``."""

    batch, n_steps, _ = noises.shape
    d = model.dimension
    lm = vectorize(model).matrix
    measured = [(ch, w, ph) for ch, w, ph in spec.effective(model) if ch.monitored]
    lops = [unit_phase(-ph) * ch.operator for ch, _, ph in measured]
    nus = np.array([w for _, w, _ in measured])
    rho = np.repeat(rho0[None], batch, axis=0)
    current = np.empty((batch, n_steps))
    n_samples = n_steps // sample_every
    obs_out = {name: np.empty((batch, n_samples)) for name in observables}
    sqrt_dt = math.sqrt(dt)
    for step in range(n_steps):
        dw = noises[:, step, :] * sqrt_dt
        # column stacking: vec(rho_b) is row b of rho^T flattened in C order
        flat = np.swapaxes(rho, 1, 2).reshape(batch, d * d)
        drift = np.swapaxes((flat @ lm.T).reshape(batch, d, d), 1, 2)
        new = rho + drift * dt
        xs = np.empty((batch, len(lops)))
        for k, op in enumerate(lops):
            left = op @ rho
            h_rho = left + np.conj(np.swapaxes(left, -1, -2))
            x_k = np.real(np.trace(h_rho, axis1=1, axis2=2))
            xs[:, k] = x_k
            new = new + (h_rho - x_k[:, None, None] * rho) * dw[:, k, None, None]
        current[:, step] = (xs * nus).sum(axis=1) + (noises[:, step, :] * nus).sum(axis=1) / sqrt_dt
        drift_trace = np.abs(np.real(np.trace(new, axis1=1, axis2=2)) - 1.0)
        if np.any(drift_trace > TRACE_DRIFT_LIMIT):
            raise StepSizeError(
                f"conditional trace drifted by {drift_trace.max():.3g} at step {step}; reduce dt={dt}"
            )
        rho = _renormalize(new)
        if (step + 1) % sample_every == 0:
            j = (step + 1) // sample_every - 1
            for name, op in observables.items():
                obs_out[name][:, j] = np.real(np.einsum("ij,bji->b", op, rho))
    return current, obs_out


def diffusive_simulate(
    model: LindbladModel,
    spec: CurrentSpec,
    rho0,
    dt: float,
    final_time: float,
    seed: int = 0,
    *,
    index: int = 0,
    observables: Optional[Dict[str, np.ndarray]] = None,
    sample_every: int = 1,
) -> DiffusiveRecord:
    """One homodyne-type trajectory ``I(t) = sum_k nu_k (<x_k>_c + dW_k/dt)``."""

    return diffusive_ensemble(
        model, spec, rho0, dt, final_time, 1, seed, first_index=index, observables=observables, sample_every=sample_every
    )[0]


def diffusive_ensemble(
    model: LindbladModel,
    spec: CurrentSpec,
    rho0,
    dt: float,
    final_time: float,
    n_trajectories: int,
    seed: int = 0,
    *,
    first_index: int = 0,
    observables: Optional[Dict[str, np.ndarray]] = None,
    sample_every: int = 1,
    threads: int = 1,
) -> List[DiffusiveRecord]:
    """Diffusive trajectories integrated in batches; record ``i`` uses stream ``(seed, i)``."""

    if spec.kind != "diffusive":
        raise ModelError("diffusive simulation needs a diffusive current")
    if dt <= 0 or final_time <= 0:
        raise ModelError("dt and final_time must be positive")
    rho0 = validate_density_matrix(rho0, tol=1e-8)
    n_steps = int(round(final_time / dt))
    n_channels = sum(1 for ch, _, _ in spec.effective(model) if ch.monitored)
    if n_channels == 0:
        raise ModelError("no monitored channels to unravel")
    obs = {k: np.asarray(v, dtype=complex) for k, v in (observables or {}).items()}
    indices = list(range(first_index, first_index + n_trajectories))
    batches = [indices[i : i + _BATCH] for i in range(0, len(indices), _BATCH)]

    def run(batch: List[int]) -> List[DiffusiveRecord]:
        noises = np.stack([trajectory_rng(seed, i).standard_normal((n_steps, n_channels)) for i in batch])
        current, obs_out = _sme_batch(model, spec, rho0, dt, noises, obs, sample_every)
        return [
            DiffusiveRecord(
                seed=int(seed),
                index=i,
                dt=dt,
                current=current[b],
                observables={k: v[b] for k, v in obs_out.items()},
                sample_every=sample_every,
            )
            for b, i in enumerate(batch)
        ]

    with timing("trajectories.sme_ensemble_ms", trajectories=n_trajectories, steps=n_steps):
        chunks = _map_ordered(run, batches, threads)
    inc_metric("trajectories.sme_runs", n_trajectories)
    return [rec for chunk in chunks for rec in chunk]


# -- signal processing -----------------------------------------------------------------


def butterworth(
    samples,
    dt: float,
    kind: str = "low",
    order: int = 1,
    cutoffs: Union[float, Sequence[float]] = 1.0,
    *,
    zero_phase: bool = False,
) -> np.ndarray:
    """Apply an analog Butterworth response in the frequency domain.

    ``cutoffs`` are angular frequencies; ``kind="band"`` takes ``[low, high]``
    edges. With ``zero_phase`` only the gain ``|G(w)|`` is applied.
    """

    x = np.asarray(samples, dtype=float)
    btype = {"low": "lowpass", "high": "highpass", "band": "bandpass"}.get(kind)
    if btype is None:
        raise ModelError(f"filter kind must be low, high or band, got {kind!r}")
    wn = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    if (btype == "bandpass") != (wn.size == 2):
        raise ModelError("band filters need two cutoffs, low/high filters one")
    z, p, k = signal.butter(order, wn if wn.size == 2 else float(wn[0]), btype=btype, analog=True, output="zpk")
    spectrum = np.fft.rfft(x)
    omega = 2 * math.pi * np.fft.rfftfreq(x.size, dt)
    _, response = signal.freqs_zpk(z, p, k, worN=omega)
    if zero_phase:
        response = np.abs(response)
    return np.fft.irfft(spectrum * response, n=x.size)


@dataclass(frozen=True)
class EmpiricalSpectrum:
    omega: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    segments: int


def empirical_spectrum(records, dt: float, n_segments: int = 1) -> EmpiricalSpectrum:
    """Segment-averaged periodogram ``dt |sum dI e^{-i w n dt}|^2 / m`` of sampled currents.

    ``records`` may be arrays, :class:`DiffusiveRecord` objects or a single
    array. Each record is mean-subtracted and split into ``n_segments``.
    """

    if isinstance(records, np.ndarray) and records.ndim == 1:
        records = [records]
    series = [r.current if isinstance(r, DiffusiveRecord) else np.asarray(r, dtype=float) for r in records]
    if not series:
        raise ModelError("no records to analyse")
    m = min(s.size for s in series) // n_segments
    if m < 2:
        raise ModelError("segments are too short")
    periodograms = []
    for s in series:
        s = s - s.mean()
        for j in range(n_segments):
            seg = s[j * m : (j + 1) * m]
            periodograms.append(dt * np.abs(np.fft.rfft(seg)) ** 2 / m)
    arr = np.asarray(periodograms)
    count = arr.shape[0]
    stderr = arr.std(axis=0, ddof=1) / math.sqrt(count) if count > 1 else np.full(arr.shape[1], np.nan)
    omega = 2 * math.pi * np.fft.rfftfreq(m, dt)
    return EmpiricalSpectrum(omega=omega, values=arr.mean(axis=0), stderr=stderr, segments=count)


# -- record IO -------------------------------------------------------------------------


def _record_payload(record) -> dict:
    if isinstance(record, TrajectoryRecord):
        return {
            "type": "jump",
            "seed": record.seed,
            "index": record.index,
            "final_time": record.final_time,
            "labels": list(record.labels),
            "times": record.times.tolist(),
            "channels": record.channels.tolist(),
            "dark": record.dark,
        }
    if isinstance(record, DiffusiveRecord):
        return {
            "type": "diffusive",
            "seed": record.seed,
            "index": record.index,
            "dt": record.dt,
            "sample_every": record.sample_every,
            "current": record.current.tolist(),
            "observables": {k: v.tolist() for k, v in record.observables.items()},
        }
    raise ModelError(f"cannot serialise {type(record).__name__}")


def save_record(record, path: Union[str, Path]) -> Path:
    """Write a record as JSON (17 significant digits survive the round trip)."""

    path = Path(path)
    path.write_text(json.dumps(_record_payload(record)), encoding="utf-8")
    return path


def load_record(path: Union[str, Path]):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = data.get("type")
    if kind == "jump":
        return TrajectoryRecord(
            seed=data["seed"],
            index=data["index"],
            final_time=data["final_time"],
            times=np.array(data["times"], dtype=float),
            channels=np.array(data["channels"], dtype=int),
            labels=tuple(data.get("labels", ())),
            dark=bool(data.get("dark", False)),
        )
    if kind == "diffusive":
        return DiffusiveRecord(
            seed=data["seed"],
            index=data["index"],
            dt=data["dt"],
            current=np.array(data["current"], dtype=float),
            observables={k: np.array(v, dtype=float) for k, v in data.get("observables", {}).items()},
            sample_every=int(data.get("sample_every", 1)),
        )
    raise ModelError(f"unknown record type {kind!r} in {path}")


def export_csv(record, path: Union[str, Path]) -> Path:
    """Time series as CSV: ``(t, channel)`` events or ``(t, I, <observables>)`` samples."""

    path = Path(path)
    lines = [f"# seed={record.seed}", f"# index={record.index}"]
    if isinstance(record, TrajectoryRecord):
        lines.append(f"# final_time={record.final_time!r}")
        lines.append("t,channel")
        lines += [f"{t!r},{record.labels[k] if record.labels else k}" for t, k in zip(record.times, record.channels)]
    else:
        names = sorted(record.observables)
        lines.append(f"# dt={record.dt!r}")
        lines.append(",".join(["t", "I"] + names))
        times = record.times
        for j in range(record.current.size):
            row = [repr(float(times[j])), repr(float(record.current[j]))]
            if (j + 1) % record.sample_every == 0:
                s = (j + 1) // record.sample_every - 1
                row += [repr(float(record.observables[n][s])) for n in names]
            else:
                row += [""] * len(names)
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
