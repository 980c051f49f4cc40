"""Simulation configuration: defaults, validation and INI loading."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from cfidd.errors import ConfigurationError

DETECTORS = ("lmmse", "softic", "sic", "list")
MODES = ("centralized", "decentralized")
CSI = ("perfect", "imperfect")
FUSIONS = ("standard", "censor", "refine")
AP_MODES = ("all", "sel")
SNR_REFERENCES = ("realization", "large_scale")


@dataclass(frozen=True)
class SimConfig:
    # network
    L: int = 4
    N: int = 4
    K: int = 4
    D: float = 1000.0
    asd_deg: float = 15.0
    # coherence block and powers
    tau_p: int = 10
    tau_c: int = 200
    tau_u: int = 190  # recorded only, no model term uses it
    eta: float = 0.1
    psi_noise: str = "actual"  # noise term of the pilot covariance: "actual" sigma2 or "unit"
    rho: float = 1.0
    noise_power: float = -96.0  # dBm
    snr_grid: tuple = (0.0, 10.0, 20.0, 30.0)
    snr_reference: str = "realization"
    bits_per_symbol: int = 2
    # receiver
    idd_iters: int = 2
    decoder_iters: int = 10
    d_th: float = 0.38
    list_size: int = 4
    energy: str = "mean"
    beta_th: float = -20.0
    beta_rule: str = "relative"
    refine_average: bool = False
    # schemes evaluated on common random numbers
    detectors: tuple = ("lmmse", "sic", "list")
    modes: tuple = ("centralized",)
    csi: tuple = ("imperfect",)
    fusion: tuple = ("standard",)
    ap_mode: tuple = ("sel",)
    # run control
    seed: int = 0
    max_trials: int = 1000
    min_bit_errors: int = 100
    geometry_block: int = 100
    chunk_size: int = 16
    n_jobs: int = 1

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def sigma2_nominal(self) -> float:
        """Noise power in watts from the dBm setting."""
        return 10.0 ** ((self.noise_power - 30.0) / 10.0)


SECTIONS = {
    "network": ("L", "N", "K", "D", "asd_deg"),
    "link": ("tau_p", "tau_c", "tau_u", "eta", "psi_noise", "rho", "noise_power", "snr_grid", "snr_reference",
             "bits_per_symbol"),
    "receiver": ("idd_iters", "decoder_iters", "d_th", "list_size", "energy", "beta_th", "beta_rule",
                 "refine_average"),
    "schemes": ("detectors", "modes", "csi", "fusion", "ap_mode"),
    "run": ("seed", "max_trials", "min_bit_errors", "geometry_block", "chunk_size", "n_jobs"),
}

_CHOICES = {"detectors": DETECTORS, "modes": MODES, "csi": CSI, "fusion": FUSIONS, "ap_mode": AP_MODES}


def _subset(name: str, values) -> None:
    if not values:
        raise ConfigurationError(f"{name} must list at least one entry")
    bad = [v for v in values if v not in _CHOICES[name]]
    if bad:
        raise ConfigurationError(f"{name}: unknown entries {bad}; expected a subset of {_CHOICES[name]}")


def validate(cfg: SimConfig) -> None:
    for name in ("L", "N", "K", "tau_p", "tau_c", "idd_iters", "decoder_iters", "list_size", "max_trials",
                 "geometry_block", "chunk_size", "n_jobs", "bits_per_symbol"):
        value = getattr(cfg, name)
        if int(value) != value or value < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    if cfg.tau_p >= cfg.tau_c:
        raise ConfigurationError(f"tau_p={cfg.tau_p} must be smaller than tau_c={cfg.tau_c}")
    if cfg.D <= 0 or cfg.eta <= 0 or cfg.rho <= 0 or cfg.asd_deg <= 0:
        raise ConfigurationError("D, eta, rho and asd_deg must be positive")
    if cfg.d_th < 0:
        raise ConfigurationError(f"d_th must be non-negative, got {cfg.d_th}")
    if cfg.min_bit_errors < 0:
        raise ConfigurationError("min_bit_errors must be non-negative")
    if not cfg.snr_grid or list(cfg.snr_grid) != sorted(cfg.snr_grid):
        raise ConfigurationError(f"snr_grid must be non-empty and sorted, got {cfg.snr_grid}")
    if cfg.snr_reference not in SNR_REFERENCES:
        raise ConfigurationError(f"snr_reference must be one of {SNR_REFERENCES}")
    if cfg.psi_noise not in ("actual", "unit"):
        raise ConfigurationError("psi_noise must be 'actual' or 'unit'")
    if cfg.energy not in ("mean", "true"):
        raise ConfigurationError("energy must be 'mean' or 'true'")
    if cfg.beta_rule not in ("relative", "absolute"):
        raise ConfigurationError("beta_rule must be 'relative' or 'absolute'")
    for name in _CHOICES:
        _subset(name, getattr(cfg, name))


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [item for item in raw.replace(",", " ").split() if item]
            if name == "snr_grid":
                return tuple(float(item) for item in items)
            return tuple(items)
        return raw
    except (KeyError, ValueError):
        raise ConfigurationError(f"invalid value {raw!r} for key {name!r}") from None


def config_from_mapping(values: dict) -> SimConfig:
    """Build a config from ``{key: string}`` pairs, rejecting unknown keys."""
    defaults = SimConfig()
    known = {f.name for f in dataclasses.fields(SimConfig)}
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        changes[key] = _convert(key, raw, getattr(defaults, key))
    return defaults.replace(**changes)


def load_config(path) -> SimConfig:
    """Read an INI file with sections ``network``, ``link``, ``receiver``, ``schemes`` and ``run``.

    Missing keys take their defaults; unknown sections or keys are rejected.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        parser.read_string(Path(path).read_text())
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration file {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown configuration section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigurationError(f"unknown configuration key {key!r} in section [{section}]")
            values[key] = raw
    return config_from_mapping(values)


def dump_config(cfg: SimConfig) -> str:
    """INI text that :func:`load_config` reads back to ``cfg``."""
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(cfg, key)
            if isinstance(value, tuple):
                value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)

