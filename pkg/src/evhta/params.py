"""Encoder parameters, validation, and the ``key = value`` config format.

Default values are artifact choices tuned for 50 ms windows on a
304x240 sensor; every one of them is a config key. Validation happens at
load time so a nonsensical configuration (for example a decay product
kappa_max * dt > 1, which would flip the sign of the decay base) fails
fast instead of corrupting state mid-stream.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .events import SensorGeometry


@dataclass(frozen=True)
class HTAParams:
    """Scalar knobs of the aggregation, inhibition, and projection stages."""

    lam: float = 0.2           # intra-window weight floor, in [0, 1]
    gamma_t: float = 2.0       # recency exponent, > 0
    tau: float = 2.0           # activity normalization constant, > 0
    eps: float = 1e-6          # division guard, > 0
    kappa0: float = 8.0        # base decay rate (1/s)
    alpha: float = 1.0         # decay modulation coefficient, >= 0
    kappa_min: float = 2.0     # decay lower bound (1/s)
    kappa_max: float = 19.0    # decay upper bound (1/s)
    b: float = 1.0             # decay exponent, > 0
    c: float = 1.0             # event injection coefficient, > 0
    beta: float = 1.0          # polarity inhibition coefficient, >= 0
    cap: float = 4.0           # state saturation cap, > 0
    eta: float = 0.3           # polarity-difference blend, in [0, 1]
    g: float = 5.0             # luminance gain, > 0
    sigma: float = 4.0         # luminance normalization scale, > 0
    mu: float = 0.4            # color strength, >= 0
    gamma_c: float = 1.0 / 1.2  # output gamma, > 0
    blur_radius: int = 2       # half-width of the local averaging box, >= 0


@dataclass(frozen=True)
class EncoderConfig:
    """Complete run configuration: parameters, geometry, window length."""

    params: HTAParams = HTAParams()
    geometry: SensorGeometry = SensorGeometry(width=304, height=240)
    dt_us: int = 50_000

    @property
    def dt_seconds(self) -> float:
        return self.dt_us * 1e-6


_FLOAT_KEYS = tuple(
    f.name for f in dataclasses.fields(HTAParams) if f.name != "blur_radius"
)
_INT_KEYS = ("blur_radius", "dt_us", "width", "height")
CONFIG_KEYS = _FLOAT_KEYS + _INT_KEYS


def validate(config: EncoderConfig) -> EncoderConfig:
    """Check every range constraint; raises ConfigError naming the violation."""
    p = config.params
    checks = [
        (0.0 <= p.lam <= 1.0, "lam must be in [0, 1]"),
        (p.gamma_t > 0, "gamma_t must be > 0"),
        (p.tau > 0, "tau must be > 0"),
        (p.eps > 0, "eps must be > 0"),
        (p.kappa0 > 0, "kappa0 must be > 0"),
        (p.alpha >= 0, "alpha must be >= 0"),
        (0 <= p.kappa_min <= p.kappa_max, "need 0 <= kappa_min <= kappa_max"),
        (p.b > 0, "b must be > 0"),
        (p.c > 0, "c must be > 0"),
        (p.beta >= 0, "beta must be >= 0"),
        (p.cap > 0, "cap must be > 0"),
        (0.0 <= p.eta <= 1.0, "eta must be in [0, 1]"),
        (p.g > 0, "g must be > 0"),
        (p.sigma > 0, "sigma must be > 0"),
        (p.mu >= 0, "mu must be >= 0"),
        (p.gamma_c > 0, "gamma_c must be > 0"),
        (p.blur_radius >= 0, "blur_radius must be >= 0"),
        (config.dt_us > 0, "dt_us must be > 0"),
        (p.kappa_max * config.dt_seconds <= 1.0,
         f"kappa_max * dt = {p.kappa_max * config.dt_seconds:.4g} exceeds 1; "
         "the decay base would go negative"),
    ]
    failures = [msg for ok, msg in checks if not ok]
    if failures:
        raise ConfigError("; ".join(failures))
    return config


def _parse_value(key: str, text: str):
    try:
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse value {text!r}") from None


def config_from_mapping(values: dict) -> EncoderConfig:
    """Build a validated EncoderConfig from a key/value mapping.

    Values may be strings (parsed per key type) or already-typed numbers.
    Unknown keys are errors.
    """
    parsed: dict[str, float | int] = {}
    for key, value in values.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        parsed[key] = _parse_value(key, str(value)) if isinstance(value, str) else (
            int(value) if key in _INT_KEYS else float(value))

    width = int(parsed.pop("width", 304))
    height = int(parsed.pop("height", 240))
    dt_us = int(parsed.pop("dt_us", 50_000))
    params = HTAParams(**parsed)
    try:
        geometry = SensorGeometry(width=width, height=height)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return validate(EncoderConfig(params=params, geometry=geometry, dt_us=dt_us))


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into an ordered mapping; '#' comments ok."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"config line {lineno}: expected 'key = value', "
                              f"got {body!r}")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"config line {lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(path: str | Path | None = None,
                overrides: dict[str, str] | None = None) -> EncoderConfig:
    """Load a config file (optional) and apply flag overrides on top."""
    values: dict[str, str] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    if overrides:
        values.update(overrides)
    return config_from_mapping(values)


def dump_config(config: EncoderConfig) -> str:
    """Render the effective configuration in the config-file format."""
    lines = []
    for f in dataclasses.fields(HTAParams):
        lines.append(f"{f.name} = {getattr(config.params, f.name)!r}")
    lines.append(f"dt_us = {config.dt_us}")
    lines.append(f"width = {config.geometry.width}")
    lines.append(f"height = {config.geometry.height}")
    return "\n".join(lines) + "\n"
