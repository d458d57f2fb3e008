"""Diffusion channel: received amplitudes, input distribution, random observations."""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .exceptions import ConfigError

UCA_RATIO = 0.15


@dataclass(frozen=True)
class ChannelConfig:
    """Point transmitters at increasing distance from a spherical receiver."""

    distances: tuple[float, ...] = (10e-6, 12e-6)
    rx_radius: float = 1e-6
    diffusion: float = 1e-9
    n_tx: float = 1e6
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        d = tuple(float(x) for x in np.atleast_1d(self.distances))
        object.__setattr__(self, "distances", d)
        if not d:
            raise ConfigError("at least one transmitter distance is required")
        if d[0] <= 0 or any(b < a for a, b in zip(d, d[1:])):
            raise ConfigError(f"distances must be positive and non-decreasing, got {d}")
        if self.rx_radius <= 0 or self.diffusion <= 0 or self.n_tx < 0:
            raise ConfigError("receiver radius and diffusion coefficient must be positive, n_tx non-negative")
        if self.check:
            if self.rx_radius >= UCA_RATIO * d[0]:
                warnings.warn(f"receiver radius {self.rx_radius:g} m is not small against d1 = {d[0]:g} m; "
                              "the uniform-concentration approximation is poor", stacklevel=3)
            if any(b == a for a, b in zip(d, d[1:])):
                warnings.warn("equal transmitter distances give equal amplitudes", stacklevel=3)

    @property
    def n_tx_devices(self) -> int:
        return len(self.distances)

    @property
    def rx_volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.rx_radius ** 3

    @property
    def uca_valid(self) -> bool:
        return self.rx_radius < UCA_RATIO * self.distances[0]

    def to_dict(self) -> dict:
        return {"distances": list(self.distances), "rx_radius": self.rx_radius,
                "diffusion": self.diffusion, "n_tx": self.n_tx}

    @classmethod
    def from_dict(cls, doc: dict) -> "ChannelConfig":
        unknown = set(doc) - {"distances", "rx_radius", "diffusion", "n_tx"}
        if unknown:
            raise ConfigError(f"unknown channel fields: {sorted(unknown)}")
        if "distances" not in doc:
            raise ConfigError("channel config needs 'distances'")
        return cls(**{k: (tuple(v) if k == "distances" else float(v)) for k, v in doc.items()})


def default_channel(n_tx_devices: int = 2) -> ChannelConfig:
    """The reference geometry: transmitters at 10, 12 and 14 micrometres."""
    if not 1 <= n_tx_devices <= 3:
        raise ConfigError("the reference geometry defines up to three transmitters")
    return ChannelConfig(distances=(10e-6, 12e-6, 14e-6)[:n_tx_devices])


def impulse_mean(config: ChannelConfig, tx: int, t) -> np.ndarray | float:
    """Expected molecules inside the receiver at time t after an impulse from transmitter tx."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("time must be positive")
    d = config.distances[tx]
    four_dt = 4.0 * config.diffusion * t
    val = config.n_tx * config.rx_volume / (math.pi * four_dt) ** 1.5 * np.exp(-d * d / four_dt)
    return float(val) if val.ndim == 0 else val


def _composite(config: ChannelConfig, t):
    return sum(impulse_mean(config, i, t) for i in range(config.n_tx_devices))


def peak_time(config: ChannelConfig) -> float:
    """Sampling time maximising the summed mean signal of all transmitters."""
    lo = config.distances[0] ** 2 / (6 * config.diffusion)
    hi = config.distances[-1] ** 2 / (6 * config.diffusion)
    if config.n_tx_devices == 1 or hi == lo:
        return lo
    # the composite peak lies between the single-transmitter peaks; search in log time
    res = optimize.minimize_scalar(lambda u: -_composite(config, math.exp(u)),
                                   bounds=(math.log(lo), math.log(hi)), method="bounded",
                                   options={"xatol": 1e-12})
    return float(math.exp(res.x))


def amplitudes(config: ChannelConfig) -> np.ndarray:
    """Mean received molecule count per transmitter at the shared sampling time."""
    tp = peak_time(config)
    return np.array([impulse_mean(config, i, tp) for i in range(config.n_tx_devices)])


def support_limit(lam) -> int:
    total = float(np.sum(lam))
    return int(math.ceil(total + 12.0 * math.sqrt(total + 1.0)))


def symbol_vectors(n_tx_devices: int) -> np.ndarray:
    """All 2^M symbol vectors, first transmitter most significant."""
    return np.array(list(itertools.product((0, 1), repeat=n_tx_devices)), dtype=np.int64)


@dataclass(frozen=True)
class InputPmf:
    support: np.ndarray
    prob: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", np.asarray(self.support, dtype=np.int64))
        object.__setattr__(self, "prob", np.asarray(self.prob, dtype=float))
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=float))

    def __call__(self, n):
        n = np.asarray(n)
        inside = (n >= 0) & (n < len(self.prob))
        out = np.zeros(n.shape)
        out[inside] = self.prob[n[inside]]
        return out

    def weights(self, inputs) -> np.ndarray:
        """Probabilities of the given inputs, renormalised to sum to one."""
        w = self(np.asarray(inputs, dtype=np.int64))
        s = w.sum()
        if s <= 0:
            raise ValueError("the given inputs carry no probability mass")
        return w / s

    def local_maxima(self) -> np.ndarray:
        # the last bin holds the folded tail and is never reported
        p = self.prob[:-1]
        left = np.r_[-np.inf, p[:-1]]
        right = self.prob[1:]
        return self.support[:-1][(p > left) & (p >= right)]

    def to_csv(self, path):
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "probability"])
            w.writerows(zip(self.support.tolist(), self.prob.tolist()))


def input_pmf(lam, limit: int | None = None) -> InputPmf:
    """Equiprobable mixture of Poisson laws, one per symbol vector; tail folded into the last bin."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("amplitudes must be non-negative")
    limit = support_limit(lam) if limit is None else int(limit)
    n = np.arange(limit + 1)
    symbols = symbol_vectors(len(lam))
    prob = np.zeros(limit + 1)
    for s in symbols:
        mean = float(s @ lam)
        comp = stats.poisson.pmf(n, mean)
        comp[-1] += stats.poisson.sf(limit, mean)
        prob += comp
    prob /= len(symbols)
    return InputPmf(n, prob, lam)


def sample_observation(lam, symbols, rng: np.random.Generator):
    """Poisson count with mean s . lambda; symbols may be a batch of vectors."""
    s = np.asarray(symbols)
    if not np.all((s == 0) | (s == 1)):
        raise ValueError("symbols must be 0 or 1")
    mean = s @ np.asarray(lam, dtype=float)
    return rng.poisson(mean)


def amplitudes_to_csv(config: ChannelConfig, path):
    lam = amplitudes(config)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tx", "distance_m", "amplitude"])
        for i, (d, a) in enumerate(zip(config.distances, lam), 1):
            w.writerow([i, d, a])
