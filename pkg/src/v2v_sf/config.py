"""Flat ``key = value`` experiment configuration.

Unknown keys are rejected, missing ones fall back to the numerical setup
used throughout (5 GHz, 30 dBm transmit power, -90 dBm noise, ...). A speed
``v_s`` may replace ``d_s`` through the two-second rule.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParameterError
from .hardcore_process import HardCoreConfig
from .lane_geometry import AntennaCase, Geometry
from .link_analysis import RadioConfig, dbm_to_watt
from .monte_carlo import SimConfig, default_sigma_grid

log = logging.getLogger(__name__)

CURVE_KINDS = ("analytic", "monte-carlo", "baseline-ppp", "approx-F1", "approx-F2")


@dataclass(frozen=True)
class ExperimentConfig:
    lambda_p: float = 0.1
    d_v: float = 5.0
    d_s: float = 145.0
    v_s: float | None = None
    w_l: float = 5.0
    alpha: float = 4.0
    pt_dbm: float = 30.0
    noise_dbm: float = -90.0
    freq_hz: float = 5e9
    d0_m: float = 1.0
    case: str = "c1"
    trials: int = 100_000
    seed: int = 0
    window_half_length: float = 4000.0
    sigma_points: int = 199
    mh_min: float = 1e-4
    mh_max: float = 1e4
    grid_spacing: str = "log"
    curves: tuple = ("analytic", "monte-carlo")
    sweep_key: str | None = None
    sweep_values: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if self.v_s is not None:
            object.__setattr__(self, "d_s", 2.0 * self.v_s)
        AntennaCase.parse(self.case)
        bad = [c for c in self.curves if c not in CURVE_KINDS]
        if bad:
            raise ParameterError(f"curves: unknown kind(s) {bad}; choose from {CURVE_KINDS}")
        if self.sweep_key is not None and self.sweep_key not in _TYPES:
            raise ParameterError(f"sweep_key: unknown parameter {self.sweep_key!r}")

    @property
    def lane(self) -> HardCoreConfig:
        return HardCoreConfig(self.lambda_p, self.d_v, self.d_s)

    @property
    def geometry(self) -> Geometry:
        return Geometry.symmetric(self.lane, self.w_l)

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(dbm_to_watt(self.pt_dbm), dbm_to_watt(self.noise_dbm), self.freq_hz, self.d0_m, self.alpha)

    @property
    def sigma_grid(self) -> np.ndarray:
        return default_sigma_grid(self.sigma_points, self.mh_min, self.mh_max, self.grid_spacing)

    def sim(self, case=None) -> SimConfig:
        return SimConfig(
            self.geometry,
            self.radio,
            AntennaCase.parse(case or self.case),
            self.trials,
            self.window_half_length,
            self.seed,
            tuple(self.sigma_grid),
        )

    def with_value(self, key: str, value) -> "ExperimentConfig":
        value = _coerce(key, value)
        if key == "d_s":
            return replace(self, d_s=value, v_s=None)
        return replace(self, **{key: value})

    def snapshot(self) -> dict:
        out = asdict(self)
        out["curves"] = list(self.curves)
        out["sweep_values"] = list(self.sweep_values)
        return out

    def digest(self) -> str:
        text = repr(sorted(self.snapshot().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _parse_tuple(text):
    if isinstance(text, (tuple, list)):
        return tuple(text)
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


_TYPES = {f.name: f for f in fields(ExperimentConfig)}
_COERCE = {
    "trials": int,
    "seed": int,
    "sigma_points": int,
    "workers": int,
    "case": str,
    "grid_spacing": str,
    "sweep_key": lambda s: None if s in (None, "") else str(s),
    "v_s": _optional_float,
    "curves": _parse_tuple,
}


def _coerce(key, value):
    if key not in _TYPES:
        raise ParameterError(f"unknown parameter {key!r}")
    if key == "sweep_values":
        return _parse_tuple(value)
    try:
        return _COERCE.get(key, float)(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{key}: cannot parse {value!r}") from exc


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=lineno)
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", line=lineno, key=key)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, key=key)
        out[key] = (value, lineno)
    return out


def build_config(raw: dict, base: ExperimentConfig | None = None, notify_defaults: bool = True) -> ExperimentConfig:
    """Turn parsed ``{key: (value, line)}`` or ``{key: value}`` pairs into a config."""
    base = base or ExperimentConfig()
    values = {}
    for key, item in raw.items():
        value, line = item if isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], int) else (item, None)
        try:
            values[key] = _coerce(key, value)
        except ParameterError as exc:
            raise ConfigError(str(exc), line=line, key=key) from None
    if notify_defaults:
        for name in ("lambda_p", "d_v", "w_l", "alpha", "pt_dbm", "noise_dbm", "freq_hz", "d0_m"):
            if name not in values:
                log.info("%s not set, using default %s", name, getattr(base, name))
        if "d_s" not in values and "v_s" not in values:
            log.info("d_s not set, using default %s", base.d_s)
    if "d_s" in values and "v_s" not in values:
        values["v_s"] = None
    return replace(base, **values)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    return build_config(parse_config_text(text))
