"""YAML network configuration: parsing, validation and serialization.

Keys are tier-prefixed (``macro.lambda_los`` ...) and may be written either
nested under ``macro:``/``micro:`` or flat with dotted names.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .model import FadingModel, NetworkConfig, Tier, TierParams

__all__ = ["ConfigError", "TIER_KEYS", "GLOBAL_KEYS", "load_config", "parse_config",
           "dump_config", "bundled_config_path"]

TIER_KEYS = ("lambda_los", "omega", "mu", "power", "g_max", "g_min", "beamwidth",
             "spectrum")
GLOBAL_KEYS = ("lambda_u", "bias", "alpha", "noise", "nakagami_m")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def bundled_config_path() -> Path:
    return Path(str(resources.files("mmwave_hetnet") / "data" / "table1.yaml"))


def _flatten(data) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of keys to values")
    flat = {}
    for key, val in data.items():
        if isinstance(val, dict):
            for sub, v in val.items():
                flat[f"{key}.{sub}"] = v
        else:
            flat[str(key)] = val
    return flat


def _number(flat, key, integer=False):
    if key not in flat:
        raise ConfigError(f"{key}: missing required key")
    raw = flat[key]
    if isinstance(raw, bool):
        raise ConfigError(f"{key}: expected a number, got {raw!r}")
    try:
        val = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if integer:
        if not val.is_integer():
            raise ConfigError(f"{key}: requires an integer, got {raw!r}")
        return int(val)
    return val


def parse_config(data) -> NetworkConfig:
    flat = _flatten(data)
    expected = {f"{t.value}.{k}" for t in Tier for k in TIER_KEYS} | set(GLOBAL_KEYS)
    unknown = sorted(set(flat) - expected)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    try:
        tiers = {
            t: TierParams(t, **{k: _number(flat, f"{t.value}.{k}") for k in TIER_KEYS})
            for t in Tier
        }
        return NetworkConfig(
            macro=tiers[Tier.MACRO], micro=tiers[Tier.MICRO],
            lambda_u=_number(flat, "lambda_u"), bias=_number(flat, "bias"),
            alpha=_number(flat, "alpha"), noise=_number(flat, "noise"),
            fading=FadingModel(_number(flat, "nakagami_m", integer=True)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None = None) -> NetworkConfig:
    """Read a configuration file; ``None`` loads the bundled reference network."""
    path = bundled_config_path() if path is None else Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: unparseable YAML ({exc})") from None
    return parse_config(data)


def dump_config(cfg: NetworkConfig) -> str:
    """Serialize so that `parse_config` reproduces ``cfg`` exactly."""
    lines = []
    for t in Tier:
        tier = cfg.tier(t)
        lines.append(f"{t.value}:")
        lines += [f"  {k}: {float(getattr(tier, k))!r}" for k in TIER_KEYS]
    lines += [f"lambda_u: {cfg.lambda_u!r}", f"bias: {float(cfg.bias)!r}",
              f"alpha: {cfg.alpha!r}", f"noise: {cfg.noise!r}",
              f"nakagami_m: {cfg.m}"]
    return "\n".join(lines) + "\n"
