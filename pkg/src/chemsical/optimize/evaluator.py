"""Staged Monte-Carlo scoring with nested trajectory budgets and exact cost accounting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..blocks import ChemSicalConfig
from ..channel import InputPmf
from ..evaluation import REDUCED_INPUTS, proportion_halfwidth, simulate_outcomes, weighted_pe
from ..exceptions import ChemsicalError, ConfigError
from ..sic import ThresholdTree

log = logging.getLogger(__name__)

DEFAULT_RUNGS = (20, 60, 100, 500)
DEFAULT_THRESHOLDS = (0.90, 0.95, 0.99)
DEFAULT_CI_PROMOTION = 0.1


@dataclass(frozen=True)
class Evaluation:
    score: float
    ci: float
    cost: int
    rung: int
    failed: bool = False


class RungEvaluator:
    """Score ``1 - P_e`` (reduced mode) over an input set, refined rung by rung.

    Rung ``k`` brings every input up to ``rungs[k]`` trajectories; the first
    trajectories are reused, never redrawn.  A candidate moves on while its
    score clears the rung threshold or its half-width is still above
    ``ci_promotion``.
    """

    def __init__(self, space, pmf: InputPmf, inputs=None, rungs=DEFAULT_RUNGS, thresholds=DEFAULT_THRESHOLDS,
                 ci_promotion: float = DEFAULT_CI_PROMOTION, tree: ThresholdTree | None = None,
                 workers: int = 1, max_events: int = 20_000_000):
        rungs = tuple(int(r) for r in rungs)
        thresholds = tuple(float(t) for t in thresholds)
        if not rungs or any(b <= a for a, b in zip(rungs, rungs[1:])) or rungs[0] < 1:
            raise ConfigError("rungs must be positive and strictly increasing")
        if len(thresholds) != len(rungs) - 1 or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ConfigError("need one strictly increasing threshold per rung transition")
        self.space = space
        self.pmf = pmf
        base = space.base
        self.inputs = tuple(int(n) for n in (REDUCED_INPUTS.get(base.num_tx, ()) if inputs is None else inputs))
        if not self.inputs:
            raise ConfigError("the evaluation input set is empty")
        self.rungs, self.thresholds = rungs, thresholds
        self.ci_promotion = float(ci_promotion)
        self.tree = tree
        self.workers = workers
        self.max_events = max_events
        self.total_cost = 0

    def score_counts(self, successes: np.ndarray, n: int) -> tuple[float, float]:
        pd = successes / n
        hw = proportion_halfwidth(pd, n)
        pe, ci = weighted_pe(dict(zip(self.inputs, pd)), self.pmf, self.inputs, "reduced",
                             dict(zip(self.inputs, hw)))
        return 1.0 - pe, ci

    def promote(self, rung: int, score: float, ci: float) -> bool:
        return rung + 1 < len(self.rungs) and (score >= self.thresholds[rung] or ci > self.ci_promotion)

    def _simulate(self, config: ChemSicalConfig, n_new: int, seed: int, start: int) -> np.ndarray:
        res = simulate_outcomes(config, self.inputs, n_new, seed, self.tree, start=start,
                                workers=self.workers, max_events=self.max_events)
        return res.correct.sum(axis=1)

    def evaluate(self, u, seed: int) -> Evaluation:
        config = self.space.config(u)
        successes = np.zeros(len(self.inputs))
        done, cost, rung = 0, 0, 0
        score, ci = 0.0, 0.0
        while True:
            n_new = self.rungs[rung] - done
            cost += n_new * len(self.inputs)
            self.total_cost += n_new * len(self.inputs)
            try:
                successes += self._simulate(config, n_new, seed, done)
            except ChemsicalError as exc:
                log.warning("candidate failed in simulation: %s", exc)
                return Evaluation(0.0, 0.0, cost, rung, failed=True)
            done = self.rungs[rung]
            score, ci = self.score_counts(successes, done)
            if not self.promote(rung, score, ci):
                return Evaluation(score, ci, cost, rung)
            rung += 1


class FunctionEvaluator:
    """Evaluator around a plain function of the unit vector; used for calibration and tests.

    Each call costs ``cost_per_eval``; optional Gaussian noise of standard
    deviation ``noise`` is drawn from the seed.
    """

    def __init__(self, fn, cost_per_eval: int = 1, noise: float = 0.0, ci: float | None = None):
        self.fn = fn
        self.cost_per_eval = int(cost_per_eval)
        self.noise = float(noise)
        self.ci = 1.96 * self.noise if ci is None else float(ci)
        self.total_cost = 0

    def evaluate(self, u, seed: int) -> Evaluation:
        self.total_cost += self.cost_per_eval
        value = float(self.fn(np.asarray(u, dtype=float)))
        if self.noise:
            value += self.noise * np.random.default_rng(seed).standard_normal()
        if not math.isfinite(value):
            return Evaluation(0.0, 0.0, self.cost_per_eval, 0, failed=True)
        return Evaluation(value, self.ci, self.cost_per_eval, 0)
