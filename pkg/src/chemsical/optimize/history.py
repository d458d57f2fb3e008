"""Optimizer run records, best-so-far curves and exports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Record:
    candidate: tuple
    overlay: dict
    score: float
    ci: float
    cost: int
    cumulative_cost: int
    rung: int
    failed: bool = False
    chain: int = 0


@dataclass
class OptimizerHistory:
    scheme: str
    seed: int
    records: list[Record] = field(default_factory=list)
    log: list[str] = field(default_factory=list)
    acceptance: list[float] = field(default_factory=list)  # per adaptation window, chains pooled

    def __len__(self):
        return len(self.records)

    def add(self, record: Record):
        self.records.append(record)

    @property
    def total_cost(self) -> int:
        return self.records[-1].cumulative_cost if self.records else 0

    def best(self) -> Record | None:
        if not self.records:
            return None
        return max(self.records, key=lambda r: r.score)

    def best_so_far(self) -> np.ndarray:
        return np.maximum.accumulate([r.score for r in self.records]) if self.records else np.zeros(0)

    def best_at_cost(self, budget: float) -> float:
        """Best score among records whose cumulative cost is within ``budget``; 0 if none."""
        scores = [r.score for r in self.records if r.cumulative_cost <= budget]
        return max(scores) if scores else 0.0

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["index", "chain", "cumulative_cost", "cost", "rung", "score", "ci", "best_so_far", "failed"])
        for i, (r, b) in enumerate(zip(self.records, self.best_so_far())):
            w.writerow([i, r.chain, r.cumulative_cost, r.cost, r.rung, repr(r.score), repr(r.ci), repr(float(b)),
                        int(r.failed)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def best_overlay_json(self, path=None) -> str:
        """Best candidate as a config overlay document."""
        best = self.best()
        doc = {"scheme": self.scheme, "seed": self.seed, "score": best.score if best else None,
               "ci": best.ci if best else None, "overlay": best.overlay if best else {}}
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "seed": self.seed, "log": list(self.log),
                "acceptance": list(self.acceptance), "records": [asdict(r) for r in self.records]}

    @classmethod
    def from_dict(cls, doc) -> "OptimizerHistory":
        recs = [Record(**{**r, "candidate": tuple(r["candidate"])}) for r in doc["records"]]
        return cls(doc["scheme"], doc["seed"], recs, list(doc.get("log", [])), list(doc.get("acceptance", [])))


def cost_curve(history: OptimizerHistory | list[Record]) -> list[tuple[int, float]]:
    """Step function (cumulative cost, best score so far), records ordered by cumulative cost."""
    records = history.records if isinstance(history, OptimizerHistory) else list(history)
    if not records:
        raise ValueError("cost curve of an empty history")
    out, best = [], -np.inf
    for r in sorted(records, key=lambda r: r.cumulative_cost):
        best = max(best, r.score)
        out.append((r.cumulative_cost, float(best)))
    return out
