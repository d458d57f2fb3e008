"""Receiver network built from comparison, translation, majority and threshold blocks.

Species naming for stage ``i``:

``Xon{i}``, ``Xoff{i}``   indicator pair set by the comparison block
``D{i}_1``, ``D{i}_0``    detection pair produced by translation
``B{i}``                  blank of the approximate-majority block
``P{i}``, ``Q{i}``        spent evidence drained from ``D{i}_1`` and ``D{i}_0``
``W{i}``                  threshold; ``W{i}B`` records its base value

Reactions are named ``<block><stage>.<step>`` so that blocks can be counted
and rate overlays applied by name.
"""

from __future__ import annotations

import functools
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

import numpy as np

from .crn import CrnModel, HillGate, RateLaw, Reaction, Species
from .exceptions import ConfigError, ModelError, UnsupportedError
from .oscillators import build_oscillator, default_spec, gate_profile, phased_initial_state, time_scaled

T_REF = 73.0
RATE_MIN, RATE_MAX = 1e-3, 1.0
VARIANTS = ("always-on", "timed")
BLOCKS = ("C", "Tr", "AM", "TA")

# rate sets for the two-transmitter receiver: (C1, Tr1, AM1, TA1, C2, Tr2, AM2)
RATE_SETS = {
    1: (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
    2: (1.0, 1.0, 1.0, 1.0, 0.1, 0.1, 0.1),
    3: (1.0, 1.0, 0.1, 1.0, 0.1, 0.1, 0.01),
    4: (1.0, 1.0, 0.1, 1.0, 0.1, 0.01, 0.001),
    5: (1.0, 1.0, 0.1, 1.0, 0.1, 0.1, 0.001),
}
_RATE_SET_KEYS = ("C1", "Tr1", "AM1", "TA1", "C2", "Tr2", "AM2")

# indicator pools (on, off), base thresholds; the three-stage pool for stage 2
# is set so that W3B + pool2 hits the 01 branch threshold
DEFAULT_COUNTS = {
    2: {"Xon1": 154, "Xoff1": 154, "Xon2": 83, "Xoff2": 84, "W1": 231, "W2B": 78},
    3: {"Xon1": 154, "Xoff1": 154, "Xon2": 78, "Xoff2": 79, "Xon3": 35, "Xoff3": 36,
        "W1": 267, "W2B": 114, "W3B": 35},
}


def tdec_value(label) -> float:
    """Decision horizon from a number or one of 'tref/4', 'tref/2', 'tref', '2tref'."""
    if isinstance(label, (int, float)):
        return float(label)
    table = {"tref/4": T_REF / 4, "tref/2": T_REF / 2, "tref": T_REF, "2tref": 2 * T_REF}
    key = str(label).lower().replace(" ", "").replace("_", "")
    if key not in table:
        try:
            return float(key)
        except ValueError:
            raise ConfigError(f"unknown decision horizon {label!r}") from None
    return table[key]


def default_rates(num_tx: int = 2, rate_set: int = 1) -> dict[str, float]:
    if rate_set not in RATE_SETS:
        raise ConfigError(f"unknown rate set {rate_set}")
    rates = dict(zip(_RATE_SET_KEYS, RATE_SETS[rate_set]))
    for i in range(3, num_tx + 1):
        rates.update({f"C{i}": 1.0, f"Tr{i}": 1.0, f"AM{i}": 1.0})
    for i in range(2, num_tx):
        rates.setdefault(f"TA{i}", 1.0)
    return rates


def required_rate_keys(num_tx: int) -> list[str]:
    keys = [f"{b}{i}" for i in range(1, num_tx + 1) for b in ("C", "Tr", "AM")]
    keys += [f"TA{i}" for i in range(1, num_tx)]
    return keys


def required_count_keys(num_tx: int) -> list[str]:
    keys = [k for i in range(1, num_tx + 1) for k in (f"Xon{i}", f"Xoff{i}")]
    return keys + ["W1"] + [f"W{i}B" for i in range(2, num_tx + 1)]


@dataclass(frozen=True)
class GateConfig:
    half: float = 600.0
    n: float = 1.0


@dataclass(frozen=True)
class ResetConfig:
    """Injected trigger ``R`` that clears decision species and releases reservoirs.

    The trigger is large so that clearing outruns any translation that
    restarts on the restored indicators; ``window`` is the time from injection
    to the reuse check.
    """

    enabled: bool = False
    kappa_clear: float = 1.0
    kappa_copy: float = 1.0
    kappa_decay: float = 1.0
    kappa_undo: float = 10.0
    trigger_count: int = 300_000
    window: float = 0.1

    def __post_init__(self):
        if min(self.kappa_clear, self.kappa_copy, self.kappa_decay, self.kappa_undo) < 0:
            raise ConfigError("reset rates must be non-negative")
        if self.trigger_count < 0 or self.window <= 0:
            raise ConfigError("reset trigger count must be non-negative and the window positive")


@dataclass(frozen=True)
class ChemSicalConfig:
    variant: str = "timed"
    num_tx: int = 2
    rates: Mapping[str, float] = field(default_factory=lambda: default_rates(2))
    counts: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_COUNTS[2]))
    t_dec: float = T_REF
    t_osc: float | None = None
    gate_s0: GateConfig = GateConfig()
    gate_k: GateConfig = GateConfig()
    reset: ResetConfig = ResetConfig()
    oscillator: str = "phospho"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_tx not in (2, 3):
            raise UnsupportedError(f"only 2 or 3 transmitters are supported, got {self.num_tx}")
        object.__setattr__(self, "rates", {k: float(v) for k, v in dict(self.rates).items()})
        object.__setattr__(self, "counts", {k: int(v) for k, v in dict(self.counts).items()})
        object.__setattr__(self, "t_dec", tdec_value(self.t_dec))
        if self.t_osc is None and self.variant == "timed":
            # two stages share one period; three stages take three half-periods
            object.__setattr__(self, "t_osc", self.t_dec if self.num_tx == 2 else 2.0 * self.t_dec / 3.0)
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for k in required_rate_keys(self.num_tx):
            if k not in self.rates:
                out.append(f"missing rate {k}")
            elif not RATE_MIN * (1 - 1e-9) <= self.rates[k] <= RATE_MAX * (1 + 1e-9):
                out.append(f"rate {k}={self.rates[k]:g} outside [{RATE_MIN:g}, {RATE_MAX:g}]")
        extra = set(self.rates) - set(required_rate_keys(self.num_tx))
        if extra:
            out.append(f"unknown rates {sorted(extra)}")
        for k in required_count_keys(self.num_tx):
            if k not in self.counts:
                out.append(f"missing count {k}")
            elif self.counts[k] < 0:
                out.append(f"count {k} is negative")
        extra = set(self.counts) - set(required_count_keys(self.num_tx))
        if extra:
            out.append(f"unknown counts {sorted(extra)}")
        if self.t_dec <= 0:
            out.append("decision horizon must be positive")
        if self.variant == "timed" and (self.t_osc is None or self.t_osc <= 0):
            out.append("oscillator period must be positive")
        return out

    @classmethod
    def default(cls, variant="timed", num_tx=2, rate_set=1, t_dec=T_REF, **kw) -> "ChemSicalConfig":
        if num_tx not in DEFAULT_COUNTS:
            raise UnsupportedError(f"only 2 or 3 transmitters are supported, got {num_tx}")
        return cls(variant=variant, num_tx=num_tx, rates=default_rates(num_tx, rate_set),
                   counts=dict(DEFAULT_COUNTS[num_tx]), t_dec=t_dec, **kw)

    def with_overlay(self, overlay: Mapping | None) -> "ChemSicalConfig":
        """Replace rates and counts named in ``overlay`` (keys 'rates', 'counts')."""
        if not overlay:
            return self
        unknown = set(overlay) - {"rates", "counts"}
        if unknown:
            raise ConfigError(f"unknown overlay sections {sorted(unknown)}")
        rates = {**self.rates, **overlay.get("rates", {})}
        counts = {**self.counts, **overlay.get("counts", {})}
        return replace(self, rates=rates, counts=counts, t_osc=self._keep_tosc())

    def with_tdec(self, t_dec) -> "ChemSicalConfig":
        return replace(self, t_dec=tdec_value(t_dec), t_osc=None)

    def _keep_tosc(self):
        return self.t_osc if self.variant == "timed" else None

    @property
    def indicator_pools(self) -> list[int]:
        return [self.counts[f"Xon{i}"] + self.counts[f"Xoff{i}"] for i in range(1, self.num_tx + 1)]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["rates"] = dict(self.rates)
        doc["counts"] = dict(self.counts)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ChemSicalConfig":
        doc = dict(doc)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known - {"rate_set"}
        if unknown:
            raise ConfigError(f"unknown receiver fields: {sorted(unknown)}")
        num_tx = int(doc.get("num_tx", 2))
        if num_tx not in DEFAULT_COUNTS:
            raise UnsupportedError(f"only 2 or 3 transmitters are supported, got {num_tx}")
        rate_set = doc.pop("rate_set", 1)
        base_rates = default_rates(num_tx, rate_set)
        doc["rates"] = {**base_rates, **doc.get("rates", {})}
        doc["counts"] = {**DEFAULT_COUNTS[num_tx], **doc.get("counts", {})}
        for key, typ in (("gate_s0", GateConfig), ("gate_k", GateConfig), ("reset", ResetConfig)):
            if key in doc and isinstance(doc[key], Mapping):
                doc[key] = typ(**doc[key])
        return cls(**doc)

    def fingerprint(self) -> str:
        import hashlib
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# block primitives


def _ma(rate):
    return RateLaw.mass_action(rate)


def comparison_block(i, rate, gate=None):
    x_on, x_off, w = f"Xon{i}", f"Xoff{i}", f"W{i}"
    return [
        Reaction({"Y_on": 1, x_off: 1}, {"Y_on": 1, x_on: 1}, _ma(rate), gate, f"C{i}.on"),
        Reaction({w: 1, x_on: 1}, {w: 1, x_off: 1}, _ma(rate), gate, f"C{i}.off"),
    ]


def translation_block(i, rate, gate=None):
    return [
        Reaction({f"Xon{i}": 1}, {f"D{i}_1": 1}, _ma(rate), gate, f"Tr{i}.on"),
        Reaction({f"Xoff{i}": 1}, {f"D{i}_0": 1}, _ma(rate), gate, f"Tr{i}.off"),
    ]


def majority_block(i, rate, gate=None):
    d1, d0, b = f"D{i}_1", f"D{i}_0", f"B{i}"
    return [
        Reaction({d1: 1, d0: 1}, {d1: 1, b: 1}, _ma(rate), gate, f"AM{i}.blank0"),
        Reaction({d0: 1, d1: 1}, {d0: 1, b: 1}, _ma(rate), gate, f"AM{i}.blank1"),
        Reaction({b: 1, d1: 1}, {d1: 2}, _ma(rate), gate, f"AM{i}.recruit1"),
        Reaction({b: 1, d0: 1}, {d0: 2}, _ma(rate), gate, f"AM{i}.recruit0"),
    ]


def adaptation_block(i, num_tx, rate, gate=None):
    """Spend detection evidence; each spent '1' adds one molecule to every later threshold.

    Both detection species drain at the same rate so the majority block keeps
    seeing an unbiased ratio while the evidence is spent.
    """
    later = {f"W{j}": 1 for j in range(i + 1, num_tx + 1)}
    return [
        Reaction({f"D{i}_1": 1}, {f"P{i}": 1, **later}, _ma(rate), gate, f"TA{i}.spend1"),
        Reaction({f"D{i}_0": 1}, {f"Q{i}": 1}, _ma(rate), gate, f"TA{i}.spend0"),
    ]


def stage_species(i, num_tx):
    out = [Species(f"Xon{i}", "indicator"), Species(f"Xoff{i}", "indicator"),
           Species(f"D{i}_1", "detection"), Species(f"D{i}_0", "detection"), Species(f"B{i}", "blank")]
    if i < num_tx:
        out += [Species(f"P{i}", "spent-evidence"), Species(f"Q{i}", "spent-evidence")]
    return out


# ---------------------------------------------------------------------------
# oscillator attachment


@functools.lru_cache(maxsize=64)
def _clock(family: str, t_osc: float, half: float, n: float):
    spec = default_spec(family)
    base_period = 1.0 / spec.target_f1
    scaled = time_scaled(spec, base_period / t_osc)
    state = phased_initial_state(scaled, t_osc, spec.clock_pair[0], half, n)
    return build_oscillator(scaled, check=False).with_initial(**state), tuple(spec.clock_pair)


def clock_model(config: ChemSicalConfig) -> tuple[CrnModel, tuple]:
    """Oscillator rescaled to the configured period and phased so the first clock species rises at T/2."""
    return _clock(config.oscillator, float(config.t_osc), float(config.gate_s0.half), float(config.gate_s0.n))


def stage_gate(config: ChemSicalConfig, stage: int) -> HillGate | None:
    if config.variant != "timed" or stage == 1:
        return None
    _, pair = clock_model(config)
    g = config.gate_s0 if stage == 2 else config.gate_k
    return HillGate(pair[0] if stage == 2 else pair[1], g.half, g.n)


# ---------------------------------------------------------------------------
# builders


def build(config: ChemSicalConfig, input_count: int) -> CrnModel:
    """Receiver network for one held input ``N(Y_on) = input_count``."""
    if input_count < 0:
        raise ConfigError("input count must be non-negative")
    m = config.num_tx
    species = [Species("Y_on", "input"), Species("W1", "threshold")]
    species += [s for j in range(2, m + 1) for s in (Species(f"W{j}", "threshold"), Species(f"W{j}B", "base-threshold"))]
    reactions = []
    for i in range(1, m + 1):
        gate = stage_gate(config, i)
        r = config.rates
        species += stage_species(i, m)
        reactions += comparison_block(i, r[f"C{i}"], gate)
        reactions += translation_block(i, r[f"Tr{i}"], gate)
        reactions += majority_block(i, r[f"AM{i}"], gate)
        if i < m:
            reactions += adaptation_block(i, m, r[f"TA{i}"], gate)
    c = config.counts
    initial = {"Y_on": int(input_count), "W1": c["W1"]}
    for j in range(2, m + 1):
        initial[f"W{j}"] = initial[f"W{j}B"] = c[f"W{j}B"]
    for i in range(1, m + 1):
        initial[f"Xon{i}"], initial[f"Xoff{i}"] = c[f"Xon{i}"], c[f"Xoff{i}"]
    model = CrnModel(species, reactions, initial, f"receiver-{config.variant}-{m}tx")
    if config.variant == "timed":
        clock, _ = clock_model(config)
        model = model.merged(clock)
    if config.reset.enabled:
        model = build_reset_extension(model, config.reset, config)
    return model


def block_count(model: CrnModel) -> int:
    """Number of distinct receiver blocks (reaction name prefix before '.')."""
    tags = {r.name.split(".", 1)[0] for r in model.reactions if "." in r.name}
    return sum(1 for t in tags if t.rstrip("0123456789") in BLOCKS)


def expected_tallies(num_tx: int, variant: str = "always-on") -> tuple[int, int]:
    """Closed-form (species, reactions) counts of the receiver part of the network."""
    species = 1 + 1 + 2 * (num_tx - 1) + 5 * num_tx + 2 * (num_tx - 1)
    reactions = 8 * num_tx + 2 * (num_tx - 1)
    return species, reactions


def clear_targets(model: CrnModel) -> list[str]:
    """Species that must be back at zero after a reset."""
    roles = ("detection", "spent-evidence", "blank", "undo")
    return [s.name for s in model.species if s.role in roles]


def restore_targets(config: ChemSicalConfig) -> dict[str, int]:
    out = {}
    for i in range(1, config.num_tx + 1):
        out[f"Xon{i}"] = config.counts[f"Xon{i}"]
        out[f"Xoff{i}"] = config.counts[f"Xoff{i}"]
    for j in range(2, config.num_tx + 1):
        out[f"W{j}"] = config.counts[f"W{j}B"]
    return out


def build_reset_extension(model: CrnModel, reset: ResetConfig, config: ChemSicalConfig) -> CrnModel:
    """Add trigger ``R``, clearing and reservoir-release reactions.

    Spent '1' evidence is not just wasted: each ``P{i}`` becomes an undo token
    that removes one molecule from every later threshold, so the adapted
    thresholds return exactly to their base values.  Indicators are refilled
    from reservoirs; leftover indicators are not cleared because clearing and
    refilling the same species under one trigger would cancel.
    """
    if "R" in model.species_names:
        raise ModelError("model already carries a reset extension")
    m = config.num_tx
    species = [Species("R", "trigger"), Species("Waste", "waste"), Species("ResUsed", "waste")]
    reactions = [Reaction({"R": 1}, {}, _ma(reset.kappa_decay), name="reset.decay")]
    kc = _ma(reset.kappa_clear)
    for i in range(1, m + 1):
        for z in (f"D{i}_1", f"D{i}_0", f"B{i}") + ((f"Q{i}",) if i < m else ()):
            reactions.append(Reaction({"R": 1, z: 1}, {"R": 1, "Waste": 1}, kc, name=f"reset.clear_{z}"))
        if i < m:
            # undo chain U{i}_{j}: token that still has to remove one W{j}
            first = f"U{i}_{i + 1}"
            reactions.append(Reaction({"R": 1, f"P{i}": 1}, {"R": 1, first: 1}, kc, name=f"reset.clear_P{i}"))
            for j in range(i + 1, m + 1):
                tok = f"U{i}_{j}"
                species.append(Species(tok, "undo"))
                nxt = {f"U{i}_{j + 1}": 1} if j < m else {"Waste": 1}
                reactions.append(Reaction({tok: 1, f"W{j}": 1}, nxt, _ma(reset.kappa_undo), name=f"reset.undo_{tok}"))
    restore = {n: v for n, v in restore_targets(config).items() if n.startswith("X")}
    species += [Species(f"Res_{n}", "reservoir") for n in restore]
    reactions += [Reaction({"R": 1, f"Res_{n}": 1}, {"R": 1, n: 1, "ResUsed": 1}, _ma(reset.kappa_copy),
                           name=f"reset.restore_{n}") for n in restore]
    ext = CrnModel(species, reactions, {f"Res_{n}": v for n, v in restore.items()})
    return model.merged(ext)


def reset_injection(reset: ResetConfig) -> dict[str, int]:
    """Counts added at the decision horizon to start the reset."""
    return {"R": int(reset.trigger_count)}


def stage_window(config: ChemSicalConfig, stage: int) -> tuple[float, float]:
    """Nominal activation interval of a stage in the timed receiver."""
    if config.variant != "timed":
        raise ConfigError("stage windows exist only for the timed variant")
    if not 1 <= stage <= config.num_tx:
        raise ConfigError(f"stage {stage} out of range")
    t = config.t_osc
    if stage == 1:
        return (0.0, config.t_dec)
    return ((stage - 1) * t / 2.0, stage * t / 2.0)


def gate_weight_profile(config: ChemSicalConfig, stage: int, samples: int = 2001):
    """ODE time course of a stage's gate factor over one decision horizon."""
    from .sim import simulate_ode
    gate = stage_gate(config, stage)
    if gate is None:
        raise ConfigError("stage is not gated")
    clock, _ = clock_model(config)
    grid = np.linspace(0.0, config.t_osc, samples)
    traj = simulate_ode(clock, config.t_osc, grid)
    return grid, gate_profile(traj[gate.species], gate.half, gate.n)
