"""YAML run configuration with environment and command-line overrides.

Sections mirror the package modules: ``model``, ``channel``, ``design`` and
``sweep``. Any key can be overridden from the environment as
``SECAIR_<SECTION>__<KEY>`` (e.g. ``SECAIR_MODEL__POWER_LIMIT=0.5``) or on the
command line as ``section.key=value``; values are parsed as YAML scalars.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import yaml

from .channel import H1_ONE_SIGMA_BELOW_MEAN, H1_QUARTER, ChannelProtocol
from .errors import ConfigError
from .model import SystemConfig
from .precoding import METHODS
from .sim import SweepSpec

ENV_PREFIX = "SECAIR_"

H1_PRESETS = {
    "one_sigma_below_mean": H1_ONE_SIGMA_BELOW_MEAN,
    "quarter": H1_QUARTER,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "model": {
        "num_users": 10,
        "dimension": 1,
        "power_limit": 1.0,
        "input_covariance": "isotropic",
        "sigma_y_sq": 0.1,
        "sigma_z_sq": 0.0,
        "sigma_h": 1.0,
        "sigma_g": 1.0,
    },
    "channel": {
        "mode": "fixed_weakest",
        "h1_fixed": "one_sigma_below_mean",
    },
    "design": {
        "method": "rre_unknown_csi",
        "bound_kind": "thm2_closed_form",
        "mu": None,
        "snr_db": None,
        "h": None,
        "g": None,
        "seed": 0,
    },
    "sweep": {
        "snr_grid_db": [float(x) for x in range(16)],
        "trials": 10_000,
        "master_seed": 0,
        "methods": list(METHODS),
        "empirical_check_fraction": 0.01,
        "empirical_draws": 200,
        "workers": 1,
    },
}


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    protocol: ChannelProtocol
    design: dict
    sweep: SweepSpec
    workers: int
    raw: dict


def _merge(base: dict, update: Mapping) -> dict:
    for section, values in update.items():
        if section not in base:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, Mapping):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in values.items():
            if key not in base[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            base[section][key] = value
    return base


def _scalar(text: str) -> Any:
    value = yaml.safe_load(text)
    # YAML 1.1 reads "1e-2" as a string
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    return value


def parse_override(text: str) -> tuple[str, str, Any]:
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    lhs, rhs = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = _scalar(rhs)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {rhs!r}: {exc}") from exc
    return section, key, value


def env_overrides(environ: Mapping[str, str]) -> list[tuple[str, str, Any]]:
    out = []
    for name, value in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
        try:
            out.append((section, key, _scalar(value)))
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {name}: {exc}") from exc
    return out


def load_raw(
    path: Optional[str] = None,
    overrides: Sequence[str] = (),
    environ: Optional[Mapping[str, str]] = None,
) -> dict:
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(data, Mapping):
            raise ConfigError(f"config {path} must be a mapping of sections")
        _merge(raw, data)
    updates = env_overrides(os.environ if environ is None else environ)
    updates += [parse_override(o) for o in overrides]
    for section, key, value in updates:
        _merge(raw, {section: {key: value}})
    return raw


def _covariance(spec, k: int) -> np.ndarray:
    if isinstance(spec, str):
        if spec != "isotropic":
            raise ConfigError(f"input_covariance must be 'isotropic' or a matrix, got {spec!r}")
        return np.eye(k) / k
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1 and arr.size == k * k:
        arr = arr.reshape(k, k)
    if arr.shape != (k, k):
        raise ConfigError(f"input_covariance must be {k}x{k} (row-major), got shape {arr.shape}")
    return arr


def _h1(value) -> float:
    if isinstance(value, str):
        if value not in H1_PRESETS:
            raise ConfigError(f"h1_fixed preset must be one of {sorted(H1_PRESETS)}, got {value!r}")
        return H1_PRESETS[value]
    return float(value)


def build(raw: dict) -> RunConfig:
    try:
        m = raw["model"]
        k = int(m["dimension"])
        system = SystemConfig(
            num_users=int(m["num_users"]),
            dimension=k,
            power_limit=float(m["power_limit"]),
            input_covariance=_covariance(m["input_covariance"], k),
            sigma_y_sq=float(m["sigma_y_sq"]),
            sigma_z_sq=float(m["sigma_z_sq"]),
            sigma_h=float(m["sigma_h"]),
            sigma_g=float(m["sigma_g"]),
        )
        c = raw["channel"]
        protocol = ChannelProtocol(mode=c["mode"], h1_fixed=_h1(c["h1_fixed"]))
        s = raw["sweep"]
        methods = s["methods"]
        if isinstance(methods, str):
            methods = [x.strip() for x in methods.split(",") if x.strip()]
        sweep = SweepSpec(
            snr_grid_db=tuple(float(x) for x in s["snr_grid_db"]),
            trials=int(s["trials"]),
            master_seed=int(s["master_seed"]),
            methods=tuple(methods),
            empirical_check_fraction=float(s["empirical_check_fraction"]),
            empirical_draws=int(s["empirical_draws"]),
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return RunConfig(
        system=system,
        protocol=protocol,
        design=dict(raw["design"]),
        sweep=sweep,
        workers=int(raw["sweep"]["workers"]),
        raw=raw,
    )


def load_config(path=None, overrides: Sequence[str] = (), environ=None) -> RunConfig:
    return build(load_raw(path, overrides, environ))
