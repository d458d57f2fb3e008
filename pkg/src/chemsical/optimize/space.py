"""Search space over receiver rates (log10) and initial counts (integers), mapped to the unit cube."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ..blocks import RATE_MAX, RATE_MIN, ChemSicalConfig, required_rate_keys
from ..exceptions import ConfigError


@dataclass(frozen=True)
class Dim:
    """One search dimension.  ``kind`` is 'rate' (log10 scale) or 'count' (integer, linear)."""

    name: str
    kind: str
    low: float
    high: float

    def __post_init__(self):
        if self.kind not in ("rate", "count"):
            raise ConfigError(f"dimension kind must be 'rate' or 'count', got {self.kind!r}")
        if not self.high > self.low:
            raise ConfigError(f"dimension {self.name}: empty range [{self.low}, {self.high}]")

    def decode(self, u: float):
        u = min(max(float(u), 0.0), 1.0)
        v = self.low + u * (self.high - self.low)
        if self.kind == "rate":
            return float(10.0 ** v)
        return int(round(v))

    def encode(self, value) -> float:
        v = math.log10(value) if self.kind == "rate" else float(value)
        return min(max((v - self.low) / (self.high - self.low), 0.0), 1.0)


def _pool_name(i):
    return f"pool{i}"


@dataclass(frozen=True)
class ParamSpace:
    """Unit-cube view of a receiver config.

    Count dimensions named ``pool{i}`` set ``Xon{i}+Xoff{i}`` (split evenly,
    the odd molecule going to ``Xoff``); other count names map directly to
    config counts.  Keys in ``fixed`` override the decoded values.
    """

    base: ChemSicalConfig
    dims: tuple[Dim, ...]
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate dimension names")
        rate_keys = set(required_rate_keys(self.base.num_tx))
        count_keys = set(self.base.counts) | {_pool_name(i) for i in range(1, self.base.num_tx + 1)}
        for d in self.dims:
            if d.kind == "rate" and d.name not in rate_keys:
                raise ConfigError(f"unknown rate dimension {d.name!r}")
            if d.kind == "count" and d.name not in count_keys:
                raise ConfigError(f"unknown count dimension {d.name!r}")
            if d.kind == "rate" and (d.low < math.log10(RATE_MIN) - 1e-12 or d.high > math.log10(RATE_MAX) + 1e-12):
                raise ConfigError(f"rate dimension {d.name!r} exceeds the admissible rate range")
            if d.kind == "count" and d.low < 0:
                raise ConfigError(f"count dimension {d.name!r} allows negative counts")

    @classmethod
    def for_config(cls, base: ChemSicalConfig, counts: bool = True, spread: float = 0.5,
                   fixed: dict | None = None) -> "ParamSpace":
        """All receiver rates on [1e-3, 1]; indicator pools and thresholds within +-spread of the base."""
        lo, hi = math.log10(RATE_MIN), math.log10(RATE_MAX)
        fixed = dict(fixed or {})
        dims = [Dim(k, "rate", lo, hi) for k in required_rate_keys(base.num_tx) if k not in fixed]
        if counts:
            ref = {_pool_name(i): p for i, p in enumerate(base.indicator_pools, 1)}
            ref.update({k: v for k, v in base.counts.items() if k.startswith("W")})
            for k, v in ref.items():
                if k not in fixed:
                    dims.append(Dim(k, "count", max(0.0, math.floor(v * (1 - spread))), math.ceil(v * (1 + spread))))
        return cls(base, tuple(dims), fixed)

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def decode(self, u) -> dict:
        """Unit vector -> config overlay {'rates': ..., 'counts': ...}."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ConfigError(f"candidate has shape {u.shape}, expected ({self.dim},)")
        values = {d.name: d.decode(x) for d, x in zip(self.dims, u)}
        values.update(self.fixed)
        rates, counts = {}, {}
        for k, v in values.items():
            if k.startswith("pool"):
                i = k[4:]
                counts[f"Xon{i}"] = int(v) // 2
                counts[f"Xoff{i}"] = int(v) - int(v) // 2
            elif k in self.base.counts:
                counts[k] = int(v)
            else:
                rates[k] = float(v)
        return {"rates": rates, "counts": counts}

    def encode(self, overlay: dict) -> np.ndarray:
        rates = {**self.base.rates, **overlay.get("rates", {})}
        counts = {**self.base.counts, **overlay.get("counts", {})}
        out = []
        for d in self.dims:
            if d.kind == "rate":
                out.append(d.encode(rates[d.name]))
            elif d.name.startswith("pool"):
                i = d.name[4:]
                out.append(d.encode(counts[f"Xon{i}"] + counts[f"Xoff{i}"]))
            else:
                out.append(d.encode(counts[d.name]))
        return np.array(out)

    def config(self, u) -> ChemSicalConfig:
        return self.base.with_overlay(self.decode(u))

    def snap(self, u) -> np.ndarray:
        """Project onto the decodable lattice: integer dimensions land on their rounded value."""
        return self.encode(self.decode(u))

    def fingerprint(self, u) -> str:
        """Identity after rounding, so two points decoding to the same config collide."""
        doc = json.dumps(self.decode(u), sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()[:16]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((n, self.dim))

    def latin_hypercube(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n <= 0:
            return np.zeros((0, self.dim))
        return qmc.LatinHypercube(d=self.dim, seed=rng).random(n)

    def initial_design(self, n: int, rng: np.random.Generator, kind: str = "lhs") -> np.ndarray:
        """Seeded start set: 'lhs' space filling, 'high' around the base config, 'low' in the slow-rate corner."""
        if kind == "lhs":
            return self.latin_hypercube(n, rng)
        pts = self.latin_hypercube(n, rng)
        if kind == "high":
            centre = self.encode({})
            return np.clip(centre + 0.1 * (pts - 0.5), 0.0, 1.0)
        if kind == "low":
            rate = np.array([d.kind == "rate" for d in self.dims])
            out = pts.copy()
            out[:, rate] = 0.25 * pts[:, rate]
            return out
        raise ConfigError(f"unknown initial design {kind!r}")


@dataclass(frozen=True)
class UnitBox:
    """Bare unit cube for objectives that are plain functions of the vector."""

    dim: int
    digits: int = 12

    @property
    def names(self) -> list[str]:
        return [f"x{i}" for i in range(self.dim)]

    def decode(self, u) -> dict:
        return {"x": [round(float(v), self.digits) for v in np.asarray(u, dtype=float)]}

    def snap(self, u) -> np.ndarray:
        return np.clip(np.round(np.asarray(u, dtype=float), self.digits), 0.0, 1.0)

    def fingerprint(self, u) -> str:
        return hashlib.sha256(json.dumps(self.decode(u)).encode()).hexdigest()[:16]

    def latin_hypercube(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n <= 0:
            return np.zeros((0, self.dim))
        return qmc.LatinHypercube(d=self.dim, seed=rng).random(n)

    def initial_design(self, n: int, rng: np.random.Generator, kind: str = "lhs") -> np.ndarray:
        pts = self.latin_hypercube(n, rng)
        if kind == "lhs":
            return pts
        if kind == "high":
            return 0.5 + 0.1 * (pts - 0.5)
        if kind == "low":
            return 0.25 * pts
        raise ConfigError(f"unknown initial design {kind!r}")
