"""JSON model documents.

A document holds either an explicit model (``dimension``, ``hamiltonian``,
``channels``) or a ``builder`` section naming one of the canonical examples,
optionally with a ``gaussian`` section. Complex numbers are ``[re, im]`` pairs
written with ``repr`` precision, so values survive a round trip exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .core import ModelError, get_logger
from .lindblad import JumpChannel, LindbladModel
from .models import BUILDERS, ExampleBParams, ModelParams, build

__all__ = [
    "ModelDocument",
    "encode_matrix",
    "decode_matrix",
    "model_to_dict",
    "model_from_dict",
    "model_hash",
    "load_model",
    "write_model",
]

log = get_logger("qcstats.modelfile")

FORMAT_VERSION = 1


def encode_matrix(m) -> list:
    arr = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in arr]


def decode_matrix(rows, *, name: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name}: expected rows of [re, im] pairs") from exc
    if arr.ndim == 2:
        return arr.astype(complex)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ModelError(f"{name}: expected rows of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _encode_value(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return encode_matrix(value) if value.ndim == 2 else [[z.real, z.imag] for z in value]
        return value.tolist()
    if dataclasses.is_dataclass(value):
        return {f.name: _encode_value(getattr(value, f.name)) for f in dataclasses.fields(value)}
    return value


def _params_to_dict(params: ModelParams) -> Dict[str, Any]:
    return {"name": params.kind, "params": _encode_value(params)}


def _params_from_dict(section: Dict[str, Any]) -> ModelParams:
    name = section.get("name")
    if name not in BUILDERS:
        raise ModelError(f"unknown builder {name!r}; known: {', '.join(sorted(BUILDERS))}")
    cls = BUILDERS[name]
    raw = dict(section.get("params") or {})
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ModelError(f"builder {name!r} has no parameters {sorted(unknown)}")
    if "G" in raw and isinstance(raw["G"], (list, tuple)):
        raw["G"] = complex(*raw["G"])
    for key in ("transmission", "coupling"):
        if key in raw and isinstance(raw[key], (list, tuple)):
            raw[key] = complex(*raw[key])
    if "dot" in raw and isinstance(raw["dot"], dict):
        raw["dot"] = ExampleBParams(**raw["dot"])
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ModelError(f"builder {name!r}: {exc}") from exc


def _gaussian_to_dict(gmodel) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "statistics": gmodel.statistics,
        "A": encode_matrix(gmodel.A),
        "B": encode_matrix(gmodel.B),
        "epsilon": [[z.real, z.imag] for z in gmodel.epsilon],
    }
    for key in ("gamma_minus", "gamma_plus", "nu_minus", "nu_plus", "phi_minus", "phi_plus", "eta_minus", "eta_plus"):
        out[key] = [float(x) for x in getattr(gmodel, key)]
    return out


def _gaussian_from_dict(section: Dict[str, Any]):
    from .gaussian import GaussianModel

    kwargs = dict(section)
    kwargs["A"] = decode_matrix(kwargs["A"], name="gaussian.A")
    if "B" in kwargs:
        kwargs["B"] = decode_matrix(kwargs["B"], name="gaussian.B")
    if "epsilon" in kwargs:
        eps = np.asarray(kwargs["epsilon"], dtype=float)
        kwargs["epsilon"] = eps[:, 0] + 1j * eps[:, 1] if eps.ndim == 2 else eps.astype(complex)
    try:
        return GaussianModel(**kwargs)
    except TypeError as exc:
        raise ModelError(f"gaussian section: {exc}") from exc


def model_to_dict(model: LindbladModel) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "version": FORMAT_VERSION,
        "name": model.name,
        "dimension": model.dimension,
        "hamiltonian": encode_matrix(model.hamiltonian),
        "channels": [
            {
                "label": ch.label,
                "matrix": encode_matrix(ch.operator),
                "weight": ch.weight,
                "phase": ch.phase,
                "efficiency": ch.efficiency,
                "monitored": ch.monitored,
            }
            for ch in model.channels
        ],
    }
    if model.fock_cutoff is not None:
        doc["fock_cutoff"] = model.fock_cutoff
    return doc


def model_from_dict(doc: Dict[str, Any]) -> LindbladModel:
    try:
        h = decode_matrix(doc["hamiltonian"], name="hamiltonian")
        dim = int(doc.get("dimension", h.shape[0]))
        if h.shape != (dim, dim):
            raise ModelError(f"hamiltonian has shape {h.shape}, dimension says {dim}")
        channels = tuple(
            JumpChannel(
                label=str(ch["label"]),
                operator=decode_matrix(ch["matrix"], name=f"channel {ch['label']}"),
                weight=float(ch.get("weight", 0.0)),
                phase=float(ch.get("phase", 0.0)),
                monitored=bool(ch.get("monitored", True)),
                efficiency=float(ch.get("efficiency", 1.0)),
            )
            for ch in doc.get("channels", [])
        )
    except KeyError as exc:
        raise ModelError(f"model document is missing {exc}") from exc
    return LindbladModel(
        hamiltonian=h,
        channels=channels,
        fock_cutoff=doc.get("fock_cutoff"),
        name=str(doc.get("name", "custom")),
    )


def model_hash(model: LindbladModel) -> str:
    """Short content hash of the explicit model (stable across runs)."""

    text = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class ModelDocument:
    model: LindbladModel
    params: Optional[ModelParams] = None
    gaussian: Any = None
    source: Optional[str] = None

    @property
    def hash(self) -> str:
        return model_hash(self.model)


def load_model(path: Union[str, Path]) -> ModelDocument:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ModelError(f"model file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError(f"model file {path} must contain a JSON object")
    params = _params_from_dict(doc["builder"]) if "builder" in doc else None
    if "hamiltonian" in doc:
        model = model_from_dict(doc)
    elif params is not None:
        model = build(params)
    else:
        raise ModelError(f"model file {path} has neither a hamiltonian nor a builder section")
    gaussian = _gaussian_from_dict(doc["gaussian"]) if "gaussian" in doc else None
    log.debug("loaded model", extra={"event": "model_loaded", "component": model.name, "dimension": model.dimension})
    return ModelDocument(model=model, params=params, gaussian=gaussian, source=str(path))


def write_model(
    model: LindbladModel,
    path: Union[str, Path],
    *,
    params: Optional[ModelParams] = None,
    gaussian=None,
) -> Path:
    doc = model_to_dict(model)
    if params is not None:
        doc["builder"] = _params_to_dict(params)
    if gaussian is not None:
        doc["gaussian"] = _gaussian_to_dict(gaussian)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path
