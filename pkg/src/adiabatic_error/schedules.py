"""Interpolating functions f(t) on [0, T] with f(0) = 0 and f(T) = 1."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import DEFAULT_TOLERANCES
from .errors import ConfigError


class Schedule:
    """Base class; subclasses are frozen dataclasses with a horizon ``T``."""

    kind: str = "abstract"
    T: float

    def _check_horizon(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon T must be finite and positive, got {self.T!r}")

    def _f(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, t):
        """f(t); accepts scalars or arrays, raises outside [0, T]."""
        arr = np.asarray(t, dtype=float)
        slack = 1e-12 * self.T
        if not np.all((arr >= -slack) & (arr <= self.T + slack)):
            raise ValueError(f"t outside [0, {self.T}]")
        out = self._f(np.clip(arr, 0.0, self.T))
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def time_integral(self) -> float:
        """Integral of f over [0, T]."""
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Interior points where f is not smooth (used to align quadrature panels)."""
        return np.empty(0)

    def max_frequency(self) -> float:
        """Angular frequency scale of f, for sizing quadrature grids."""
        return 0.0

    def with_horizon(self, T: float) -> "Schedule":
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind

    def overshoots(self, samples: int = 4097) -> bool:
        """True when f leaves [0, 1] somewhere on [0, T]."""
        t = np.union1d(np.linspace(0.0, self.T, samples), self.breakpoints())
        f = self._f(t)
        return bool(np.any(f < -1e-12) or np.any(f > 1 + 1e-12))


@dataclass(frozen=True)
class Linear(Schedule):
    T: float
    kind = "linear"

    def __post_init__(self):
        self._check_horizon()

    def _f(self, t):
        return t / self.T

    def time_integral(self):
        return self.T / 2

    def with_horizon(self, T):
        return Linear(T)


@dataclass(frozen=True)
class Quadratic(Schedule):
    T: float
    kind = "quadratic"

    def __post_init__(self):
        self._check_horizon()

    def _f(self, t):
        return (t / self.T) ** 2

    def time_integral(self):
        return self.T / 3

    def with_horizon(self, T):
        return Quadratic(T)


@dataclass(frozen=True)
class Resonant(Schedule):
    """Linear ramp plus a decaying oscillation g (1 - t/T) sin(lc t)."""

    T: float
    g: float
    lc: float
    kind = "resonant"

    def __post_init__(self):
        self._check_horizon()
        if not (math.isfinite(self.g) and math.isfinite(self.lc)):
            raise ValueError("g and lc must be finite")

    def _f(self, t):
        s = t / self.T
        return s + self.g * (1 - s) * np.sin(self.lc * t)

    def time_integral(self):
        T, g, lc = self.T, self.g, self.lc
        if lc == 0.0:
            return T / 2
        # int_0^T (1 - t/T) sin(lc t) dt = 1/lc - sin(lc T) / (lc^2 T)
        return T / 2 + g * (1 / lc - math.sin(lc * T) / (lc * lc * T))

    def max_frequency(self):
        return abs(self.lc)

    def with_horizon(self, T):
        return Resonant(T, self.g, self.lc)

    def describe(self):
        return f"resonant:g={self.g:g},lc={self.lc:g}"


@dataclass(frozen=True)
class Tabulated(Schedule):
    """Piecewise-linear interpolant through (t, f) samples.

    The first sample must sit at t = 0 and the last at t = T. Endpoint values
    within ``table_endpoint_atol`` of 0 and 1 are pinned exactly.
    """

    times: tuple
    values: tuple
    source: str = field(default="table", compare=False)
    kind = "table"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or len(t) < 2:
            raise ValueError("need at least two (t, f) samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
            raise ValueError("samples must be finite")
        if t[0] != 0.0:
            raise ValueError("first sample must be at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        atol = DEFAULT_TOLERANCES.table_endpoint_atol
        if abs(f[0]) > atol or abs(f[-1] - 1) > atol:
            raise ValueError(f"endpoint values must be 0 and 1 within {atol:g}")
        f = f.copy()
        f[0], f[-1] = 0.0, 1.0
        object.__setattr__(self, "times", tuple(float(x) for x in t))
        object.__setattr__(self, "values", tuple(float(x) for x in f))

    @property
    def T(self):
        return self.times[-1]

    def _f(self, t):
        return np.interp(t, self.times, self.values)

    def time_integral(self):
        # trapezoid rule is exact for a piecewise-linear interpolant
        t = np.asarray(self.times)
        f = np.asarray(self.values)
        return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))

    def breakpoints(self):
        return np.asarray(self.times[1:-1])

    def with_horizon(self, T):
        scale = T / self.T
        return Tabulated(tuple(x * scale for x in self.times), self.values, self.source)

    def describe(self):
        return f"table:{self.source}"


def read_table(path) -> Tabulated:
    """Load a two-column ``t f`` text file."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read schedule table: {exc}", path=path) from exc
    ts, fs = [], []
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError("expected two columns 't f'", line=n, path=path)
        try:
            ts.append(float(parts[0]))
            fs.append(float(parts[1]))
        except ValueError:
            raise ConfigError(f"non-numeric sample {line!r}", line=n, path=path) from None
    try:
        return Tabulated(tuple(ts), tuple(fs), source=str(path))
    except ValueError as exc:
        raise ConfigError(str(exc), path=path) from exc


_RESONANT = re.compile(r"^resonant:(.*)$")


def parse_schedule(text: str, T: float, base_dir=None) -> Schedule:
    """Build a schedule from CLI syntax.

    ``linear``, ``quadratic``, ``resonant:g=<v>,lc=<v>`` or ``table:<path>``.
    A table's time column is rescaled so its last sample lands on ``T``.
    """
    text = text.strip()
    if text == "linear":
        return Linear(T)
    if text == "quadratic":
        return Quadratic(T)
    m = _RESONANT.match(text)
    if m:
        params = {}
        for item in m.group(1).split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"bad resonant parameter {item!r}")
            params[key.strip()] = val.strip()
        if set(params) != {"g", "lc"}:
            raise ConfigError(f"resonant schedule needs exactly g and lc, got {sorted(params)}")
        try:
            return Resonant(T, float(params["g"]), float(params["lc"]))
        except ValueError as exc:
            raise ConfigError(f"bad resonant parameters: {exc}") from None
    if text.startswith("table:"):
        p = Path(text[len("table:"):])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return read_table(p).with_horizon(T)
    raise ConfigError(f"unknown schedule {text!r}")
