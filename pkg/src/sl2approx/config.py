"""Flat ``key = value`` experiment configs with a single include level."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .field import SUPPORTED_D


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 1
    z: str = "sqrt(2)"  # slope z1/z2 unless z1/z2 are given
    z1: str = ""
    z2: str = "1"
    target: str = "origin"  # origin | rational | irrational
    y: str = "0"  # target slope; a K-rational for the rational class
    y2: str = "1"
    max_terms: int = 41
    depth_y: int = 30
    k_min: int = 1
    k_max: int = 0  # 0: no cap beyond max_terms
    q_min_exp: int = 4  # Dirichlet grid Q = 2^e
    q_max_exp: int = 10
    H: float = 3.0
    budget: int = 10**7
    floor_scale: float = 1.0
    omega: float = 1.0625
    precision: int = 256
    precision_cap: int = 8192
    seed: int = 0
    trials: int = 1000
    digits: int = 12
    window_decades: float = 1.0
    t_ratio: float = 2.0
    tail_fraction: float = 0.5
    selftest_slope: float = 0.0  # > 0: exponent runs on a synthetic stream with this slope
    out: str = ""

    def __post_init__(self):
        if self.d not in SUPPORTED_D:
            raise ConfigError(f"d must be one of {SUPPORTED_D}, got {self.d}")
        if self.target not in ("origin", "rational", "irrational"):
            raise ConfigError(f"unknown target class {self.target!r}")
        for name in ("max_terms", "depth_y", "k_min", "precision", "precision_cap", "trials", "digits",
                     "budget"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("H", "window_decades", "floor_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.k_max < 0 or self.q_min_exp < 1 or self.q_max_exp < self.q_min_exp:
            raise ConfigError("bad k or Q range")
        if not self.omega > 1:
            raise ConfigError("omega must exceed 1")
        if self.t_ratio <= 1 or not 0 < self.tail_fraction <= 1:
            raise ConfigError("need t_ratio > 1 and 0 < tail_fraction <= 1")
        if self.precision_cap < self.precision:
            raise ConfigError("precision_cap below precision")

    def canonical(self) -> str:
        """Sorted key=value text of every field except the output path."""
        items = dataclasses.asdict(self)
        items.pop("out")
        return "".join(f"{k}={items[k]}\n" for k in sorted(items))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def _parse_lines(text: str, where: str) -> list[tuple[str, str]]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{where}:{n}: expected key = value")
        out.append((key.strip(), val.strip()))
    return out


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read ``path``; an ``include = other`` line pulls in defaults from one more file.

    Keys in the including file win over the included one; ``overrides``
    (e.g. from the command line) win over both. Includes do not nest.
    """
    path = Path(path)
    try:
        pairs = _parse_lines(path.read_text(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    values: dict[str, str] = {}
    for key, val in pairs:
        if key != "include":
            continue
        inc = (path.parent / val).resolve()
        try:
            inner = _parse_lines(inc.read_text(), str(inc))
        except OSError as exc:
            raise ConfigError(f"cannot read include {inc}: {exc}") from None
        if any(k == "include" for k, _ in inner):
            raise ConfigError(f"{inc}: nested include")
        values.update(inner)
    values.update((k, v) for k, v in pairs if k != "include")
    return config_from_mapping(values, overrides)


def config_from_mapping(values: dict, overrides: dict | None = None) -> ExperimentConfig:
    values = dict(values)
    values.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, str(v)) for k, v in values.items()})
