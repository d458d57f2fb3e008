"""Bayesian optimisation, simulated annealing and Metropolis-Hastings search over a ParamSpace."""

from __future__ import annotations

import logging
import math
import warnings

import numpy as np
from scipy.stats import norm
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import ConstantKernel, Matern

from ..sim import child_seed
from .history import OptimizerHistory, Record

log = logging.getLogger(__name__)

NOISE_FLOOR = 1e-4
MH_BASE, MH_UNIT = 0.25, 0.01


class _Runner:
    """Shared bookkeeping: seeds, dedup, budgets and the cost counter."""

    def __init__(self, scheme, space, evaluator, budget, seed, cost_budget):
        self.space, self.evaluator = space, evaluator
        self.budget = max(0, int(budget))
        self.cost_budget = cost_budget
        self.seed = int(seed)
        self.history = OptimizerHistory(scheme, self.seed)
        self.start_cost = evaluator.total_cost
        self.seen = {}

    def exhausted(self) -> bool:
        if len(self.history) >= self.budget:
            return True
        return self.cost_budget is not None and self.evaluator.total_cost - self.start_cost >= self.cost_budget

    def run(self, u, chain=0) -> Record:
        u = self.space.snap(u)
        key = self.space.fingerprint(u)
        res = self.evaluator.evaluate(u, child_seed(self.seed, len(self.history)))
        rec = Record(tuple(float(v) for v in u), self.space.decode(u), float(res.score), float(res.ci), int(res.cost),
                     int(self.evaluator.total_cost - self.start_cost), int(res.rung), bool(res.failed), chain)
        self.history.add(rec)
        self.seen.setdefault(key, rec)
        return rec

    def note(self, msg):
        log.info(msg)
        self.history.log.append(msg)


def _reflect(u):
    u = np.abs(u)
    u = 1.0 - np.abs(1.0 - np.mod(u, 2.0))
    return np.clip(u, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Bayesian optimisation


def _fit_gp(X, y, ci, dim, rng):
    noise = np.maximum(NOISE_FLOOR, (np.asarray(ci) / 1.96) ** 2)
    kernel = ConstantKernel(0.05, (1e-5, 1e2)) * Matern(length_scale=np.full(dim, 0.3),
                                                         length_scale_bounds=(1e-2, 1e1), nu=2.5)
    for jitter in (1.0, 10.0, 100.0):
        gp = GaussianProcessRegressor(kernel, alpha=noise * jitter, normalize_y=False, n_restarts_optimizer=1,
                                      random_state=int(rng.integers(2 ** 31)))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                gp.fit(X, y)
            return gp
        except (np.linalg.LinAlgError, ValueError):
            continue
    return None


def expected_improvement(mu, sd, best, xi=0.0):
    sd = np.maximum(sd, 1e-12)
    imp = mu - best - xi
    z = imp / sd
    return imp * norm.cdf(z) + sd * norm.pdf(z)


def _propose_batch(runner, gp, X, y, size, rng, pool_size):
    d = X.shape[1]
    top = X[np.argsort(y)[-5:]]
    local = top[rng.integers(len(top), size=pool_size // 2)] + 0.05 * rng.standard_normal((pool_size // 2, d))
    pool = np.vstack([rng.random((pool_size - pool_size // 2, d)), np.clip(local, 0.0, 1.0)])
    mu, sd = gp.predict(pool, return_std=True)
    ei = expected_improvement(mu, sd, float(np.max(y)))
    try:
        scale = np.atleast_1d(gp.kernel_.k2.length_scale)
    except AttributeError:
        scale = np.full(d, 0.3)
    chosen, keys = [], set()
    for _ in range(size):
        order = np.argsort(-ei)
        pick = None
        for idx in order[:200]:
            u = runner.space.snap(pool[idx])
            key = runner.space.fingerprint(u)
            if key not in runner.seen and key not in keys:
                pick = u
                break
            ei[idx] = -np.inf
        if pick is None:
            pick = runner.space.snap(rng.random(d))
        chosen.append(pick)
        keys.add(runner.space.fingerprint(pick))
        # local penalisation: damp EI near points already in the batch
        r2 = np.sum(((pool - pick) / scale) ** 2, axis=1)
        ei = ei * (1.0 - np.exp(-2.0 * r2))
    return chosen


def bo_run(space, evaluator, budget: int, batch_size: int = 4, seed: int = 0, init: str = "lhs",
           n_init: int | None = None, cost_budget: int | None = None, pool_size: int = 2048) -> OptimizerHistory:
    """Ask-tell loop: GP surrogate (Matern 5/2, per-point noise from the score CI) and batched EI."""
    if budget > 0 and batch_size > budget:
        raise ValueError("batch size exceeds the iteration budget")
    runner = _Runner("bo", space, evaluator, budget, seed, cost_budget)
    rng = np.random.default_rng(seed)
    n_init = min(runner.budget, 2 * space.dim if n_init is None else int(n_init))
    for u in space.initial_design(n_init, rng, init):
        if runner.exhausted():
            break
        if space.fingerprint(space.snap(u)) in runner.seen:
            continue
        runner.run(u)
    while not runner.exhausted():
        recs = runner.history.records
        X = np.array([r.candidate for r in recs])
        y = np.array([r.score for r in recs])
        ci = np.array([r.ci for r in recs])
        gp = _fit_gp(X, y - y.mean(), ci, space.dim, rng) if len(recs) >= 2 else None
        if gp is None:
            runner.note(f"surrogate unavailable after {len(recs)} points; random proposals")
            batch = [space.snap(rng.random(space.dim)) for _ in range(batch_size)]
        else:
            batch = _propose_batch(runner, gp, X, y - y.mean(), batch_size, rng, pool_size)
        for u in batch:
            if runner.exhausted():
                break
            runner.run(u)
    return runner.history


# ---------------------------------------------------------------------------
# simulated annealing


def sa_run(space, evaluator, budget: int, chains: int = 4, seed: int = 0, init: str = "lhs",
           cost_budget: int | None = None, step: float = 0.1, window: int = 5, target: float = 0.3,
           t_final: float = MH_UNIT / math.log(1000.0)) -> OptimizerHistory:
    """Multi-chain annealing with Gaussian steps in the scaled space.

    The start temperature gives the median worsening move of the first step
    a 50% acceptance; cooling is geometric down to ``t_final``, where a 1%
    loss is accepted with probability 1e-3.  Step scales adapt every
    ``window`` steps toward the ``target`` acceptance rate.
    """
    if chains < 1:
        raise ValueError("need at least one chain")
    runner = _Runner("sa", space, evaluator, budget, seed, cost_budget)
    rng = np.random.default_rng(seed)
    cur = [space.snap(u) for u in space.initial_design(chains, rng, init)]
    cur_score = []
    for c, u in enumerate(cur):
        if runner.exhausted():
            return runner.history
        cur_score.append(runner.run(u, c).score)
    n_steps = max(1, math.ceil((runner.budget - chains) / chains))
    sigma = np.full((chains, space.dim), float(step))
    accepted = np.zeros(chains)
    temp, alpha = None, 1.0
    for k in range(n_steps):
        if runner.exhausted():
            break
        props = [space.snap(_reflect(cur[c] + sigma[c] * rng.standard_normal(space.dim))) for c in range(chains)]
        recs = []
        for c in range(chains):
            if runner.exhausted():
                break
            recs.append(runner.run(props[c], c))
        if temp is None:
            drops = [cur_score[c] - r.score for c, r in enumerate(recs) if r.score < cur_score[c]]
            temp = float(np.median(drops)) / math.log(2.0) if drops else 10 * t_final
            temp = max(temp, t_final)
            alpha = (t_final / temp) ** (1.0 / max(1, n_steps - 1))
            runner.note(f"start temperature {temp:.4g}, cooling factor {alpha:.4g}")
        for c, r in enumerate(recs):
            delta = r.score - cur_score[c]
            if delta >= 0 or rng.random() < math.exp(delta / temp):
                cur[c], cur_score[c] = np.array(r.candidate), r.score
                accepted[c] += 1
        if (k + 1) % window == 0:
            rate = accepted / window
            runner.history.acceptance.append(float(rate.mean()))
            sigma *= np.exp((rate - target) / target)[:, None]
            np.clip(sigma, 1e-3, 0.5, out=sigma)
            accepted[:] = 0
        temp *= alpha
    return runner.history


# ---------------------------------------------------------------------------
# Metropolis-Hastings


def mh_accept_probability(drop, base: float = MH_BASE, unit: float = MH_UNIT) -> float:
    """Acceptance of a move that lowers the score by ``drop``; a drop of ``unit`` is accepted with ``base``."""
    if drop <= 0:
        return 1.0
    return float(base ** (drop / unit))


def mcmc_run(space, evaluator, budget: int, chains: int = 4, seed: int = 0, init: str = "lhs",
             cost_budget: int | None = None, step: float = 0.1, window: int = 5,
             target: float = MH_BASE) -> OptimizerHistory:
    """Random-scan Metropolis-Hastings: one coordinate per proposal, score-ratio acceptance."""
    if chains < 1:
        raise ValueError("need at least one chain")
    runner = _Runner("mcmc", space, evaluator, budget, seed, cost_budget)
    rng = np.random.default_rng(seed)
    cur = [space.snap(u) for u in space.initial_design(chains, rng, init)]
    cur_score = []
    for c, u in enumerate(cur):
        if runner.exhausted():
            return runner.history
        cur_score.append(runner.run(u, c).score)
    sigma = np.full((chains, space.dim), float(step))
    tried = np.zeros((chains, space.dim))
    acc = np.zeros((chains, space.dim))
    k = 0
    while not runner.exhausted():
        for c in range(chains):
            if runner.exhausted():
                break
            j = int(rng.integers(space.dim))
            prop = cur[c].copy()
            prop[j] = _reflect(prop[j] + sigma[c, j] * rng.standard_normal())
            r = runner.run(prop, c)
            tried[c, j] += 1
            if rng.random() < mh_accept_probability(cur_score[c] - r.score):
                cur[c], cur_score[c] = np.array(r.candidate), r.score
                acc[c, j] += 1
        k += 1
        if k % window == 0:
            # per-coordinate scale update toward the target acceptance
            upd = tried > 0
            rate = np.where(upd, acc / np.maximum(tried, 1), target)
            runner.history.acceptance.append(float(acc.sum() / max(tried.sum(), 1)))
            sigma *= np.exp((rate - target) / target)
            np.clip(sigma, 1e-3, 0.5, out=sigma)
            tried[:] = 0
            acc[:] = 0
    return runner.history
