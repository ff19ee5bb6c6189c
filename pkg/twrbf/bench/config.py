"""
Run configuration for the benchmark harness.

Config files are flat ``key = value`` text::

    # two pairs, four relay antennas
    pairs = 2
    antennas = 4
    snr-db = 0, 10, 20
    schemes = wsr, maxmin

Keys are the long CLI flag names; ``-`` and ``_`` are interchangeable. Lists
are comma separated.
"""
import configparser
import enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic import model_validator

from twrbf.errors import ConfigError

_SECTION = "run"


class RunMode(str, enum.Enum):
    MAXMIN = "maxmin"
    POWERMIN = "powermin"
    WSR = "wsr"
    UTILITY = "utility"
    COLLAB = "collab"
    MIMO = "mimo"
    SWEEP = "sweep"


DEFAULT_SCHEMES: Dict[RunMode, List[str]] = {
    RunMode.MAXMIN: ["maxmin", "bisection", "identity", "antenna-selection"],
    RunMode.POWERMIN: ["powermin", "bisection"],
    RunMode.WSR: ["wsr", "antenna-selection"],
    RunMode.UTILITY: ["utility", "maxmin"],
    RunMode.COLLAB: ["collab-individual", "collab-total", "relay-array"],
    RunMode.MIMO: ["alternating", "alternating-wsr"],
    RunMode.SWEEP: ["wsr", "maxmin", "identity", "antenna-selection", "zf", "mmse"],
}

BASELINE_SCHEMES = ["identity", "antenna-selection", "zf", "mmse"]

ALLOWED_SCHEMES: Dict[RunMode, List[str]] = {
    RunMode.MAXMIN: DEFAULT_SCHEMES[RunMode.MAXMIN] + ["zf", "mmse"],
    RunMode.POWERMIN: DEFAULT_SCHEMES[RunMode.POWERMIN],
    RunMode.WSR: ["wsr", "maxmin"] + BASELINE_SCHEMES,
    RunMode.UTILITY: ["utility", "maxmin"] + BASELINE_SCHEMES,
    RunMode.COLLAB: DEFAULT_SCHEMES[RunMode.COLLAB],
    RunMode.MIMO: DEFAULT_SCHEMES[RunMode.MIMO],
    RunMode.SWEEP: DEFAULT_SCHEMES[RunMode.SWEEP],
}

# Weighted-sum-rate weights used in the two- and four-user experiments.
_DEFAULT_WSR_WEIGHTS = {1: [0.2, 0.8], 2: [0.2, 0.8, 0.5, 0.5]}


def _split(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: RunMode
    pairs: int = Field(1, ge=1)
    antennas: int = Field(2, ge=1)
    user_antennas: Optional[List[int]] = None
    snr_db: List[float] = Field(default_factory=lambda: [10.0], min_length=1)
    trials: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    eps: float = Field(0.01, gt=0)
    tol: float = Field(1e-6, gt=0)
    weights: Optional[List[float]] = None
    targets: Optional[List[float]] = None
    schemes: Optional[List[str]] = None
    out: Optional[str] = None
    trace_out: Optional[str] = None
    workers: int = Field(1, ge=1)
    utility: str = "rate"
    modulation: str = "qpsk"
    max_outer: int = Field(30, ge=1)
    poly_seconds: Optional[float] = Field(None, gt=0)
    timing: bool = False

    @field_validator(
        "user_antennas", "snr_db", "weights", "targets", "schemes", mode="before"
    )
    @classmethod
    def parse_list(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("weights", "targets")
    @classmethod
    def positive(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(v <= 0 for v in value):
            raise ValueError("entries must be positive")
        return value

    @field_validator("user_antennas")
    @classmethod
    def at_least_one_antenna(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and any(v < 1 for v in value):
            raise ValueError("every user needs at least one antenna")
        return value

    @field_validator("utility")
    @classmethod
    def known_utility(cls, value: str) -> str:
        if value not in ("rate", "mse", "ser"):
            raise ValueError(f"unknown utility {value!r}")
        return value

    @field_validator("modulation")
    @classmethod
    def known_modulation(cls, value: str) -> str:
        value = value.lower()
        if value not in ("bpsk", "qpsk"):
            raise ValueError(f"unknown modulation {value!r}")
        return value

    @model_validator(mode="after")
    def consistent(self) -> "RunConfig":
        n_users = 2 * self.pairs
        for name in ("weights", "targets"):
            values = getattr(self, name)
            if values is not None and len(values) != n_users:
                raise ValueError(f"{name} needs {n_users} entries, got {len(values)}")
        if self.user_antennas is not None and len(self.user_antennas) != n_users:
            raise ValueError(f"user_antennas needs {n_users} entries")
        if self.schemes is not None:
            allowed = ALLOWED_SCHEMES[self.mode]
            unknown = [s for s in self.schemes if s not in allowed]
            if unknown:
                raise ValueError(
                    f"schemes {unknown} not available in {self.mode.value} mode "
                    f"(choose from {', '.join(allowed)})"
                )
        return self

    @property
    def n_users(self) -> int:
        return 2 * self.pairs

    def resolved_schemes(self) -> List[str]:
        return list(self.schemes or DEFAULT_SCHEMES[self.mode])

    def resolved_weights(self) -> List[float]:
        if self.weights is not None:
            return list(self.weights)
        return list(_DEFAULT_WSR_WEIGHTS.get(self.pairs, [1.0] * self.n_users))

    def resolved_targets(self) -> List[float]:
        return list(self.targets or [1.0] * self.n_users)

    def resolved_user_antennas(self) -> List[int]:
        return list(self.user_antennas or [2] * self.n_users)


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Raw ``key = value`` pairs from a flat config file."""
    parser = configparser.ConfigParser(
        comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"malformed config file {path}: {e}")
    return {k.replace("-", "_"): v for k, v in parser[_SECTION].items()}


def build_config(
    file_values: Optional[Dict[str, Any]] = None, **overrides: Any
) -> RunConfig:
    """
    Merge file values with explicit overrides (``None`` overrides are
    ignored) and validate.
    """
    values: Dict[str, Any] = dict(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(_describe(e))


def load_config(path: Union[str, Path], **overrides: Any) -> RunConfig:
    return build_config(read_config_file(path), **overrides)


def _describe(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{where}: {err['msg']}")
    return "invalid run configuration: " + "; ".join(parts)
