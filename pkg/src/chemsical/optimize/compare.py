"""Matched-budget comparison of optimisation schemes over seeds and start designs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .schemes import bo_run, mcmc_run, sa_run

RUNNERS = {"bo": bo_run, "sa": sa_run, "mcmc": mcmc_run}
MAX_EVALUATIONS = 10**6


@dataclass
class Comparison:
    """Final best-so-far score of each (scheme, init, seed) run at the shared cost budget."""

    cost_budget: int
    finals: dict = field(default_factory=dict)  # (scheme, init, seed) -> score
    histories: dict = field(default_factory=dict)

    def mean(self, scheme: str, init: str) -> float:
        vals = [v for (s, i, _), v in self.finals.items() if s == scheme and i == init]
        return float(np.mean(vals)) if vals else float("nan")

    def init_gap(self, scheme: str, high: str = "high", low: str = "low") -> float:
        return abs(self.mean(scheme, high) - self.mean(scheme, low))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["scheme", "init", "seed", "best_score", "evaluations", "cost"])
        for (s, i, seed), v in sorted(self.finals.items()):
            h = self.histories[(s, i, seed)]
            w.writerow([s, i, seed, repr(float(v)), len(h), h.total_cost])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def compare_schemes(space, make_evaluator, cost_budget: int, schemes=("bo", "sa", "mcmc"), seeds=(0, 1, 2),
                    inits=("high", "low"), options: dict | None = None) -> Comparison:
    """Run every scheme from every start design and seed until ``cost_budget`` is spent.

    ``make_evaluator()`` must return a fresh evaluator so that cost counters
    are per run; ``options`` maps a scheme name to extra keyword arguments.
    """
    options = options or {}
    out = Comparison(int(cost_budget))
    for scheme in schemes:
        for init in inits:
            for seed in seeds:
                hist = RUNNERS[scheme](space, make_evaluator(), MAX_EVALUATIONS, seed=int(seed), init=init,
                                       cost_budget=int(cost_budget), **options.get(scheme, {}))
                out.histories[(scheme, init, int(seed))] = hist
                out.finals[(scheme, init, int(seed))] = hist.best_at_cost(cost_budget)
    return out
