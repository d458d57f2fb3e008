"""Reference successive interference cancellation by binary threshold tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, MalformedTreeError


def _prefixes(stage: int) -> list[str]:
    return [format(i, f"0{stage}b") if stage else "" for i in range(2 ** stage)]


@dataclass(frozen=True)
class ThresholdTree:
    """Per-stage thresholds keyed by the bits already detected ('' for stage 1)."""

    stages: tuple[dict, ...]

    def __post_init__(self):
        stages = tuple({str(k): float(v) for k, v in stage.items()} for stage in self.stages)
        object.__setattr__(self, "stages", stages)
        for stage in stages:
            for key, tau in stage.items():
                if tau < 0:
                    raise ConfigError(f"threshold for prefix {key!r} is negative")
                if any(c not in "01" for c in key):
                    raise ConfigError(f"prefix {key!r} is not a bit string")

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def is_complete(self) -> bool:
        return all(set(stage) == set(_prefixes(i)) for i, stage in enumerate(self.stages))

    def threshold(self, prefix: str) -> float:
        stage = len(prefix)
        if stage >= self.n_stages or prefix not in self.stages[stage]:
            raise MalformedTreeError(f"no threshold for detected prefix {prefix!r}")
        return self.stages[stage][prefix]

    def shifted(self, offset: float) -> "ThresholdTree":
        return ThresholdTree(tuple({k: v + offset for k, v in s.items()} for s in self.stages))

    @classmethod
    def from_levels(cls, levels) -> "ThresholdTree":
        """Build from nested lists: [tau1, [tau2_0, tau2_1], [tau3_00, ...]]."""
        stages = []
        for i, level in enumerate(levels):
            vals = np.atleast_1d(level).tolist()
            if len(vals) != 2 ** i:
                raise MalformedTreeError(f"stage {i + 1} needs {2 ** i} thresholds, got {len(vals)}")
            stages.append(dict(zip(_prefixes(i), vals)))
        return cls(tuple(stages))

    def to_levels(self) -> list:
        out = []
        for i, stage in enumerate(self.stages):
            vals = [stage[p] for p in _prefixes(i)]
            out.append(vals[0] if i == 0 else vals)
        return out

    def to_dict(self) -> dict:
        return {"levels": self.to_levels()}

    @classmethod
    def from_dict(cls, doc) -> "ThresholdTree":
        if isinstance(doc, dict):
            if "levels" not in doc:
                raise ConfigError("threshold tree needs 'levels'")
            doc = doc["levels"]
        return cls.from_levels(doc)


REFERENCE_TREES = {
    2: ThresholdTree.from_levels([231, [78, 386]]),
    3: ThresholdTree.from_levels([267, [114, 422], [35, 192, 343, 500]]),
}


def reference_tree(n_tx_devices: int) -> ThresholdTree:
    if n_tx_devices not in REFERENCE_TREES:
        raise ConfigError(f"no reference thresholds for {n_tx_devices} transmitters")
    return REFERENCE_TREES[n_tx_devices]


def sic_detect(count, tree: ThresholdTree) -> np.ndarray:
    """Detected symbol vector for one received count; a count equal to the threshold detects 1."""
    if count < 0:
        raise ValueError("molecule count must be non-negative")
    prefix = ""
    for _ in range(tree.n_stages):
        prefix += "1" if count >= tree.threshold(prefix) else "0"
    return np.array([int(c) for c in prefix], dtype=np.int64)


def ground_truth_labels(tree: ThresholdTree, inputs) -> dict[int, tuple[int, ...]]:
    """Map each input count to the reference detector's symbol vector."""
    return {int(n): tuple(sic_detect(int(n), tree).tolist()) for n in np.atleast_1d(inputs)}


def label_matrix(tree: ThresholdTree, inputs) -> np.ndarray:
    """Reference labels as an (n_inputs, M) array."""
    inputs = np.atleast_1d(inputs)
    if inputs.size == 0:
        return np.zeros((0, tree.n_stages), dtype=np.int64)
    return np.stack([sic_detect(int(n), tree) for n in inputs])
