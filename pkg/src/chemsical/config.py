"""One YAML document describing channel, detector, receiver and experiment settings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import yaml

from .blocks import ChemSicalConfig
from .channel import ChannelConfig, default_channel
from .exceptions import ConfigError
from .oscillators import OscillatorSpec
from .sic import ThresholdTree, reference_tree

SECTIONS = ("channel", "thresholds", "receiver", "overlay", "oscillators", "evaluate", "ode_screen", "optimize",
            "reset_eval")

EVALUATE_DEFAULTS = {"inputs": "reduced", "n_traj": 200, "mode": "reduced", "fill": "conservative"}
ODE_SCREEN_DEFAULTS = {"rate_sets": [1, 2, 3, 4, 5], "variants": ["timed", "always-on"], "inputs": {"start": 0, "stop": 600, "step": 1}}
OPTIMIZE_DEFAULTS = {"scheme": "bo", "budget": 1000, "cost_budget": None, "batch_size": 4, "chains": 4,
                     "init": "lhs", "rungs": [20, 60, 100, 500], "thresholds": [0.9, 0.95, 0.99],
                     "ci_promotion": 0.1, "inputs": "reduced", "counts": True, "spread": 0.5}
OSCILLATOR_DEFAULTS = {"n_traj": 100, "t_obs": 2000.0, "n_samples": 4001, "specs": {}}
TDEC_LABELS = ("tref/4", "tref/2", "tref", "2tref")
RESET_DEFAULTS = {"inputs": {"start": 0, "stop": 600, "step": 50}, "n_traj": 50, "tolerance": 0.2, "bins": 20}


def _merged(defaults, doc, section):
    doc = dict(doc or {})
    unknown = set(doc) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    return {**defaults, **doc}


def expand_inputs(spec, num_tx: int) -> list[int]:
    """'reduced', 'full', {start, stop, step} (stop inclusive) or an explicit list of counts."""
    from .evaluation import REDUCED_INPUTS

    if spec == "reduced":
        if num_tx not in REDUCED_INPUTS:
            raise ConfigError(f"no reduced input set for {num_tx} transmitters")
        return list(REDUCED_INPUTS[num_tx])
    if spec == "full":
        return list(range(0, 601))
    if isinstance(spec, Mapping):
        return list(range(int(spec["start"]), int(spec["stop"]) + 1, int(spec.get("step", 1))))
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    raise ConfigError(f"cannot read input set {spec!r}")


@dataclass
class RunDocument:
    channel: ChannelConfig = field(default_factory=lambda: default_channel(2))
    thresholds: ThresholdTree | None = None
    receiver: ChemSicalConfig = field(default_factory=ChemSicalConfig.default)
    overlay: dict = field(default_factory=dict)
    oscillators: dict = field(default_factory=lambda: dict(OSCILLATOR_DEFAULTS))
    evaluate: dict = field(default_factory=lambda: dict(EVALUATE_DEFAULTS))
    ode_screen: dict = field(default_factory=lambda: dict(ODE_SCREEN_DEFAULTS))
    optimize: dict = field(default_factory=lambda: dict(OPTIMIZE_DEFAULTS))
    reset_eval: dict = field(default_factory=lambda: dict(RESET_DEFAULTS))

    @property
    def tree(self) -> ThresholdTree:
        return reference_tree(self.receiver.num_tx) if self.thresholds is None else self.thresholds

    def receiver_config(self) -> ChemSicalConfig:
        """Receiver with the overlay applied."""
        return self.receiver.with_overlay(self.overlay)

    def oscillator_specs(self) -> dict[str, OscillatorSpec]:
        from .oscillators import load_default_specs

        specs = load_default_specs()
        for name, doc in self.oscillators.get("specs", {}).items():
            specs[name] = OscillatorSpec.from_dict(doc, name)
        return specs

    @classmethod
    def from_dict(cls, doc: Mapping | None) -> "RunDocument":
        doc = dict(doc or {})
        unknown = set(doc) - set(SECTIONS) - {"version"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        receiver = ChemSicalConfig.from_dict(doc.get("receiver", {}))
        channel = ChannelConfig.from_dict(doc["channel"]) if "channel" in doc else default_channel(receiver.num_tx)
        tree = ThresholdTree.from_dict(doc["thresholds"]) if doc.get("thresholds") is not None else None
        if tree is not None and tree.n_stages != receiver.num_tx:
            raise ConfigError("threshold tree depth does not match the number of transmitters")
        if channel.n_tx_devices != receiver.num_tx:
            raise ConfigError("channel and receiver disagree on the number of transmitters")
        overlay = dict(doc.get("overlay") or {})
        if "overlay" in overlay:  # accept a best-candidate file verbatim
            overlay = dict(overlay["overlay"])
        out = cls(channel, tree, receiver, overlay,
                  _merged(OSCILLATOR_DEFAULTS, doc.get("oscillators"), "oscillators"),
                  _merged(EVALUATE_DEFAULTS, doc.get("evaluate"), "evaluate"),
                  _merged(ODE_SCREEN_DEFAULTS, doc.get("ode_screen"), "ode_screen"),
                  _merged(OPTIMIZE_DEFAULTS, doc.get("optimize"), "optimize"),
                  _merged(RESET_DEFAULTS, doc.get("reset_eval"), "reset_eval"))
        out.receiver_config()  # validates the overlay against the receiver
        return out

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "channel": self.channel.to_dict(),
            "thresholds": None if self.thresholds is None else self.thresholds.to_dict(),
            "receiver": self.receiver.to_dict(),
            "overlay": self.overlay,
            "oscillators": self.oscillators,
            "evaluate": self.evaluate,
            "ode_screen": self.ode_screen,
            "optimize": self.optimize,
            "reset_eval": self.reset_eval,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_receiver(self, **changes) -> "RunDocument":
        return replace(self, receiver=replace(self.receiver, **changes))


def load_document(path) -> RunDocument:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if doc is not None and not isinstance(doc, Mapping):
        raise ConfigError("config document must be a mapping")
    try:
        return RunDocument.from_dict(doc)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None


def tuned_overlays() -> dict:
    """Shipped per-horizon overlays: {variant: {tdec label: {score, ci, cost, overlay}}}."""
    from importlib import resources

    text = resources.files("chemsical").joinpath("data/overlays.yaml").read_text()
    return yaml.safe_load(text)["overlays"]


def tuned_overlay(variant: str, tdec) -> dict:
    table = tuned_overlays()
    key = str(tdec).lower()
    if variant not in table or key not in table[variant]:
        raise ConfigError(f"no tuned overlay for {variant} at {tdec}")
    return table[variant][key]["overlay"]


def content_hash(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)
