"""Key-value configuration files.

One ``key = value`` per line, ``#`` starts a comment::

    # fuzzy sets and consequents
    mf.medium = 0.1, 0.5, 0.9
    lower_scale = 0.8
    centroid.high = 0.75, 0.85
    # LSTM
    lstm.hidden_size = 16
    lstm.epochs = 50
    # baselines
    holt.alpha = 0.4
    pm.window = 10
    # simulation
    sim.train_split = 0.5

Fuzzy keys (``mf.*``, ``lower_scale``, ``centroid.*``) are handled by
:func:`udsdm.fuzzy.system_from_entries`; unknown keys are errors that name
their line.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .fuzzy import FuzzyConfigError, read_key_values, system_from_entries
from .simulator import SimConfig


class ConfigError(ValueError):
    pass


_SIM_KEYS = {
    "sim.train_split": ("train_split", float),
    "sim.experiments": ("experiments", int),
    "sim.quantum_mode": ("quantum_mode", str),
    "sim.max_steps": ("max_steps", int),
    "sim.max_records": ("max_records", int),
    "holt.alpha": ("holt_alpha", float),
    "holt.beta": ("holt_beta", float),
    "pm.window": ("window", int),
}


_LSTM_KEYS = {
    f"lstm.{name}": (name, kind)
    for name, kind in [
        ("learning_rate", float), ("epochs", int), ("window_length", int), ("seed", int),
        ("candidate_activation", str), ("hidden_size", int), ("clip_norm", float),
        ("batch_size", int), ("max_windows", int), ("optimizer", str),
    ]
}


def apply_config(base: SimConfig, source) -> SimConfig:
    """Return ``base`` with the overrides read from ``source`` (path or text)."""
    if isinstance(source, str) and "=" not in source and "\n" not in source:
        source = Path(source)
    if isinstance(source, Path) and not source.is_file():
        raise ConfigError(f"config file not found: {source}")
    try:
        entries = read_key_values(source)
    except OSError as exc:
        raise ConfigError(f"cannot read config {source}: {exc.strerror}") from None

    fuzzy_entries, sim_over, lstm_over = [], {}, {}
    for lineno, key, value in entries:
        if key in _SIM_KEYS or key in _LSTM_KEYS:
            name, kind = _SIM_KEYS.get(key) or _LSTM_KEYS[key]
            try:
                parsed = kind(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} expects {kind.__name__}, got {value!r}") from None
            (sim_over if key in _SIM_KEYS else lstm_over)[name] = parsed
        elif key.split(".")[0] in ("mf", "lower_scale", "centroid"):
            fuzzy_entries.append((lineno, key, value))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        fuzzy = system_from_entries(fuzzy_entries) if fuzzy_entries else base.fuzzy
        lstm = replace(base.lstm, **lstm_over)
        return replace(base, fuzzy=fuzzy, lstm=lstm, **sim_over)
    except FuzzyConfigError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
