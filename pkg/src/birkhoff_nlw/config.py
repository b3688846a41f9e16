"""Flat ``key = value`` run configuration shared by the CLI and the simulator."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError

__all__ = ["RunConfig", "parse_config", "serialize_config"]


def _floats(text):
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _ints(text):
    return tuple(int(float(x)) for x in str(text).replace(";", ",").split(",") if x.strip())


def _words(text):
    return tuple(x.strip() for x in str(text).replace(";", ",").split(",") if x.strip())


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    def parse(text):
        t = str(text).strip()
        return None if t.lower() in ("", "none", "auto") else conv(t)

    return parse


@dataclass(frozen=True)
class RunConfig:
    """All tunables of every command; see the README for each key.

    ``N`` and ``T`` default to ``None`` and are derived on demand by
    :meth:`threshold` and :meth:`horizon`.
    """

    d: int = 1
    m: float = 1.0
    K: float = 16
    N: float | None = None
    r: int = 3
    s: float = 2.0
    s0: float = 1.0
    epsilon: float = 0.05
    dt: float = 0.01
    T: float | None = None
    long_run: bool = False
    f_coeffs: str = "2:1.0"
    seed: int = 0
    output_dir: str = "out"
    divisor_floor: float = 1e-8
    dealias_factor: float | None = None
    stride: int = 10
    blowup_factor: float = 10.0
    scan_conditions: tuple = ("H1",)
    scan_N: tuple = (2, 3, 4)
    high_bound: float | None = None
    radii: tuple = (1e-2, 5e-3, 2.5e-3)
    samples: int = 8
    epsilons: tuple = (0.1, 0.05, 0.025)
    flow_tol: float = 1e-12
    initial_state: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.d not in (1, 2, 3):
            raise ConfigError(f"d must be 1, 2 or 3, got {self.d}")
        if not self.m > 0:
            raise ConfigError(f"hypothesis m > 0 violated: m = {self.m}")
        if not self.s > self.s0:
            raise ConfigError(f"hypothesis s > s0 violated: s = {self.s}, s0 = {self.s0}")
        if not self.s0 > self.d / 2:
            raise ConfigError(f"hypothesis s0 > d/2 violated: s0 = {self.s0}, d/2 = {self.d / 2}")
        if self.r < 2:
            raise ConfigError(f"hypothesis r >= 2 violated: r = {self.r}")
        if not self.K >= 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.N is not None and not 1 <= self.N <= self.K:
            raise ConfigError(f"constraint 1 <= N <= K violated: N = {self.N}, K = {self.K}")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.T is not None and not self.T >= 0:
            raise ConfigError(f"T must be >= 0, got {self.T}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if not self.divisor_floor > 0:
            raise ConfigError(f"divisor_floor must be > 0, got {self.divisor_floor}")
        if not self.flow_tol > 0:
            raise ConfigError(f"flow_tol must be > 0, got {self.flow_tol}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        bad = [c for c in self.scan_conditions if c not in ("H1", "H2", "H3")]
        if bad:
            raise ConfigError(f"scan_conditions must be among H1, H2, H3; got {bad}")
        try:
            self.nonlinearity()
        except ValueError as exc:
            raise ConfigError(f"f_coeffs: {exc}") from exc

    def nonlinearity(self):
        from .polynomial import NonlinearityF

        return NonlinearityF.parse(self.f_coeffs)

    def threshold(self, epsilon=None):
        """``N`` if set, else ``min(eps^{-r/(s-s0)}, K)`` (``K`` when ``eps = 0``)."""
        if self.N is not None:
            return self.N
        eps = self.epsilon if epsilon is None else epsilon
        if eps <= 0:
            return self.K
        return min(eps ** (-self.r / (self.s - self.s0)), self.K)

    def horizon(self, epsilon=None):
        """``T`` if set, else ``1/eps`` (``eps^{-r/(s0+1)}`` with ``long_run``)."""
        if self.T is not None:
            return self.T
        eps = self.epsilon if epsilon is None else epsilon
        if eps <= 0:
            return 1.0
        return eps ** (-self.r / (self.s0 + 1)) if self.long_run else 1.0 / eps

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_PARSERS = {
    "d": int,
    "m": float,
    "K": float,
    "N": _opt(float),
    "r": int,
    "s": float,
    "s0": float,
    "epsilon": float,
    "dt": float,
    "T": _opt(float),
    "long_run": _bool,
    "f_coeffs": str,
    "seed": int,
    "output_dir": str,
    "divisor_floor": float,
    "dealias_factor": _opt(float),
    "stride": int,
    "blowup_factor": float,
    "scan_conditions": _words,
    "scan_N": _ints,
    "high_bound": _opt(float),
    "radii": _floats,
    "samples": int,
    "epsilons": _floats,
    "flow_tol": float,
    "initial_state": _opt(str),
}

VALID_KEYS = tuple(f.name for f in fields(RunConfig))
assert set(VALID_KEYS) == set(_PARSERS)


def _normalize(key, value):
    # integral floats print as ints so K = 16 stays "16"
    if key in ("K", "N") and value is not None and float(value).is_integer():
        return int(value)
    return value


def parse_config(text, **overrides):
    """Parse ``key = value`` lines (``#`` comments allowed) into a :class:`RunConfig`.

    ``overrides`` are raw strings applied after the document.

    Raises
    ------
    ConfigError
        On unknown keys, unparsable values or violated hypotheses.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        raw[key.strip()] = value.strip()
    raw.update({k: str(v) for k, v in overrides.items()})
    unknown = sorted(set(raw) - set(VALID_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; valid keys: {', '.join(VALID_KEYS)}")
    values = {}
    for key, value in raw.items():
        try:
            values[key] = _normalize(key, _PARSERS[key](value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    return RunConfig(**values)


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isfinite(value) and value.is_integer() and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def serialize_config(cfg):
    """Every key on its own line, in declaration order; reparses to an equal config."""
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))
