"""Public package surface for quantum-current-statistics."""

from .core import (
    ErrorCodes,
    JsonLogFormatter,
    QCStatsError,
    get_logger,
    inc_metric,
    init_logging_from_env,
    log_exception,
    metric_event,
    observe_metric,
    timing,
)
from .config import Settings, load_settings
from .currents import CurrentSpec, average_current, noise, power_spectrum, two_point_function
from .fcs import charge_distribution, cumulants_recursive, scgf, tilted_diffusive, tilted_jump
from .gaussian import GaussianModel, gaussian_diffusion_stats, gaussian_jump_stats, steady_covariance
from .ledger import RunEventLogger, RunLedger
from .lindblad import JumpChannel, LindbladModel, VectorizedLiouvillian, drazin, steady_state, vectorize
from .modelfile import load_model, model_hash, write_model
from .models import build, build_gaussian, oracle

__version__ = "0.1.0"

__all__ = [
    "ErrorCodes",
    "QCStatsError",
    "JsonLogFormatter",
    "get_logger",
    "init_logging_from_env",
    "log_exception",
    "metric_event",
    "observe_metric",
    "inc_metric",
    "timing",
    "Settings",
    "load_settings",
    "JumpChannel",
    "LindbladModel",
    "VectorizedLiouvillian",
    "vectorize",
    "steady_state",
    "drazin",
    "CurrentSpec",
    "average_current",
    "noise",
    "power_spectrum",
    "two_point_function",
    "tilted_jump",
    "tilted_diffusive",
    "charge_distribution",
    "cumulants_recursive",
    "scgf",
    "GaussianModel",
    "steady_covariance",
    "gaussian_jump_stats",
    "gaussian_diffusion_stats",
    "build",
    "build_gaussian",
    "oracle",
    "load_model",
    "write_model",
    "model_hash",
    "RunEventLogger",
    "RunLedger",
]
