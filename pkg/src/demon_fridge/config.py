"""Experiment configuration: JSON file plus ``key=value`` overrides.

Units are hbar = k_B = 1 and ``omega`` sets the energy scale.  ``beta1`` is
the inverse temperature of the cold reservoir, ``beta2`` that of the hot one.

``initial_state`` accepts ``vacuum``, ``steady``, ``maximally_mixed[:k]`` and
``gibbs:mu0``; left unset, each command picks its own default.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace

from . import fock
from .dynamics import gibbs, maximally_mixed, steady_state, vacuum
from .reservoir import ReservoirSpec
from .trajectory import default_workers

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_overrides"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "thermal"
    beta1: float = 5.0
    beta2: float = 1.2
    omega: float = 1.0
    gamma: float = 1.0
    r1: float = 0.0
    r2: float = 0.0
    theta: float = 0.0
    n_max: int = 30
    dt: float = 0.01
    tau: float = 2.0
    steps: int | None = None
    ensemble_size: int = 1000
    master_seed: int = 0
    workers: int | None = None
    normalization: str = "exact"
    initial_state: str | None = None
    output_path: str | None = None
    linear_sinh_moments: bool = False

    def __post_init__(self):
        if self.mode not in ("thermal", "squeezed"):
            raise ConfigError(f"mode must be 'thermal' or 'squeezed', got {self.mode!r}")
        if self.normalization not in ("exact", "first_order"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        for name in ("beta1", "beta2", "omega", "gamma", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tau < 0:
            raise ConfigError("tau must be non-negative")
        if self.r1 < 0 or self.r2 < 0:
            raise ConfigError("squeezing amplitudes must be non-negative")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ConfigError("n_max must be an integer >= 1")
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        k = round(self.tau / self.dt)
        if abs(k * self.dt - self.tau) > 1e-9 * max(self.tau, self.dt):
            raise ConfigError(f"tau={self.tau} is not an integer multiple of dt={self.dt}")
        if self.steps is not None and self.steps != k:
            raise ConfigError(f"steps={self.steps} inconsistent with tau/dt={k}")
        self._parse_initial()

    @property
    def n_steps(self) -> int:
        return int(round(self.tau / self.dt))

    @property
    def n_workers(self) -> int:
        return default_workers() if self.workers is None else int(self.workers)

    @property
    def space(self) -> fock.FockSpace:
        return fock.FockSpace(int(self.n_max))

    def reservoir(self) -> ReservoirSpec:
        try:
            return ReservoirSpec(self.beta1, self.beta2, self.omega, self.gamma,
                                 self.r1, self.r2, self.theta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _parse_initial(self, default="steady"):
        name, _, arg = (self.initial_state or default).partition(":")
        if name in ("vacuum", "steady") and not arg:
            return name, None
        if name == "maximally_mixed":
            k = int(arg) if arg else None
            if k is not None and not 1 <= k <= self.n_max + 1:
                raise ConfigError(f"maximally_mixed:{k} exceeds the {self.n_max + 1} levels")
            return name, k
        if name == "gibbs" and arg:
            return name, float(arg)
        raise ConfigError(f"initial_state must be vacuum, steady, maximally_mixed[:k] "
                          f"or gibbs:mu0, got {self.initial_state!r}")

    def initial_rho(self, bath=None, default: str = "steady"):
        """Density matrix named by ``initial_state`` (``default`` when unset).

        ``steady`` is the analytic stationary state of the configured mode.
        """
        name, arg = self._parse_initial(default)
        space = self.space
        if name == "vacuum":
            return vacuum(space)
        if name == "maximally_mixed":
            return maximally_mixed(space, arg)
        if name == "gibbs":
            return gibbs(space, arg)
        return steady_state(self.reservoir(), space, self.mode, bath=bath).rho

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INT_FIELDS = {"n_max", "steps", "ensemble_size", "master_seed", "workers"}
_BOOL_FIELDS = {"linear_sinh_moments"}
_STR_FIELDS = {"mode", "normalization", "initial_state", "output_path"}


def _coerce(key, value):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    if value is None:
        return None
    try:
        if key in _STR_FIELDS:
            return str(value)
        if key in _BOOL_FIELDS:
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(value)
                return value.lower() in ("true", "1")
            return bool(value)
        if key in _INT_FIELDS:
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def parse_overrides(pairs) -> dict:
    """``["beta1=3", "mode=squeezed"]`` to a dict; values are JSON when they parse."""
    out = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} is not key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out[key.strip()] = value
    return out


def load_config(path: str | os.PathLike | None, overrides=None) -> ExperimentConfig:
    """Read a JSON config (``None`` for defaults) and apply overrides."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    data.update(parse_overrides(overrides))
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})
