"""Layered INI configuration for :class:`~softskin.harness.ExperimentConfig`.

A config file has one section per parameter block::

    [experiment]
    mode = bi
    seed = 3

    [segment]
    damping = 0.25

    [training]
    lr = 5e-4

Resolution order: mode defaults, then the file, then ``section.key=value``
overrides (the CLI's ``--set``). Unknown sections or keys are errors so a
typo never silently falls back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import fields, replace
from io import StringIO

import numpy as np

from .harness import ExperimentConfig

# section name -> ExperimentConfig attribute holding that block
BLOCKS = {
    "segment": "segment",
    "skin_A": "skin_A",
    "skin_B": "skin_B",
    "actuator": "actuator",
    "gains": "gains",
    "training": "training",
}
# keys that are derived elsewhere and must not be set from a file
_HIDDEN = {("experiment", "segment"), ("experiment", "skin_A"), ("experiment", "skin_B"),
           ("experiment", "actuator"), ("experiment", "gains"), ("experiment", "training"),
           ("training", "seed")}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _parse_value(text: str, like):
    """Parse ``text`` into the type of the default value ``like``."""
    text = text.strip()
    try:
        if isinstance(like, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            return tuple(float(v) for v in text.replace(",", " ").split())
        if isinstance(like, str):
            return text
        # numpy arrays / scalars that may be given as one or several numbers
        parts = [float(v) for v in text.replace(",", " ").split()]
        return parts[0] if len(parts) == 1 else tuple(parts)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r} as {type(like).__name__}") from exc


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _apply(config: ExperimentConfig, section: str, items) -> ExperimentConfig:
    if section == "experiment":
        target = config
    elif section in BLOCKS:
        target = getattr(config, BLOCKS[section])
    else:
        raise ConfigError(f"unknown section [{section}]")
    known = {f.name: getattr(target, f.name) for f in fields(target)}
    changes = {}
    for key, text in items:
        if key not in known or (section, key) in _HIDDEN:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        changes[key] = _parse_value(text, known[key])
    if not changes:
        return config
    try:
        if target is config:
            return replace(config, **changes)
        return replace(config, **{BLOCKS[section]: replace(target, **changes)})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def parse_overrides(pairs) -> dict:
    """``['gains.K_D=0.5', ...]`` -> ``{'gains': [('K_D', '0.5')], ...}``."""
    out: dict = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        section, dot, name = key.strip().rpartition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"override {pair!r} is not of the form section.key=value")
        out.setdefault(section, []).append((name, value))
    return out


def load_config(path=None, overrides=(), seed=None) -> ExperimentConfig:
    """Build an ExperimentConfig from defaults, an optional file and overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (K_D, skin_A)
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    layers = [(s, list(parser.items(s))) for s in parser.sections()]
    layers += list(parse_overrides(overrides).items())

    mode = "uni"
    for section, items in layers:
        for key, value in items:
            if section == "experiment" and key == "mode":
                mode = value.strip()
    if mode not in ("uni", "bi"):
        raise ConfigError(f"mode must be 'uni' or 'bi', got {mode!r}")
    config = ExperimentConfig.default(mode)
    for section, items in layers:
        config = _apply(config, section, items)
    if seed is not None:
        config = replace(config, seed=int(seed))
    return config


def dump_config(config: ExperimentConfig) -> str:
    """Render every setting as an INI document that :func:`load_config` reads back."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["experiment"] = {
        f.name: _format_value(getattr(config, f.name))
        for f in fields(config)
        if ("experiment", f.name) not in _HIDDEN
    }
    for section, attr in BLOCKS.items():
        block = getattr(config, attr)
        parser[section] = {
            f.name: _format_value(_plain(getattr(block, f.name)))
            for f in fields(block)
            if (section, f.name) not in _HIDDEN
        }
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.item() if v.ndim == 0 else tuple(v.ravel().tolist())
    return v
