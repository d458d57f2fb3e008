import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsical.blocks import ChemSicalConfig
from chemsical.exceptions import ConfigError
from chemsical.optimize import (Dim, FunctionEvaluator, OptimizerHistory, ParamSpace, Record, RungEvaluator,
                                UnitBox, bo_run, compare_schemes, cost_curve, expected_improvement, mcmc_run,
                                mh_accept_probability, sa_run)
from chemsical.optimize import schemes as schemes_mod

RUNNERS = [bo_run, sa_run, mcmc_run]


def quad(u, centre=0.37):
    return 1.0 - float(np.sum((np.asarray(u) - centre) ** 2))


# --- search space -----------------------------------------------------------


def test_space_decodes_to_valid_configs(rng):
    space = ParamSpace.for_config(ChemSicalConfig.default())
    for u in space.sample(50, rng):
        cfg = space.config(u)
        assert not cfg.problems()
        assert all(isinstance(v, int) for v in cfg.counts.values())
    assert space.dim == 11


def test_space_encodes_base_config():
    base = ChemSicalConfig.default(rate_set=3)
    space = ParamSpace.for_config(base)
    assert space.config(space.encode({})) == base


def test_fixed_dimensions_pinned():
    space = ParamSpace.for_config(ChemSicalConfig.default(), counts=False, fixed={"C1": 0.5})
    assert "C1" not in space.names
    assert space.decode(np.full(space.dim, 0.5))["rates"]["C1"] == 0.5


def test_bad_dimensions():
    base = ChemSicalConfig.default()
    with pytest.raises(ConfigError):
        ParamSpace(base, (Dim("Z1", "rate", -3, 0),))
    with pytest.raises(ConfigError):
        ParamSpace(base, (Dim("C1", "rate", -4, 0),))
    with pytest.raises(ConfigError):
        Dim("C1", "spin", 0, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=11, max_size=11))
def test_snap_is_idempotent_and_collides(u):
    space = ParamSpace.for_config(ChemSicalConfig.default())
    s = space.snap(u)
    assert np.allclose(space.snap(s), s)
    assert space.fingerprint(s) == space.fingerprint(u)


# --- acquisition and acceptance laws -------------------------------------------


def test_expected_improvement_properties():
    mu = np.array([0.0, 0.0, 1.0])
    sd = np.array([0.1, 1.0, 0.1])
    ei = expected_improvement(mu, sd, 0.5)
    assert ei[1] > ei[0] and ei[2] > ei[1]
    assert np.all(ei >= 0)


def test_mh_law_values():
    assert mh_accept_probability(0.01) == pytest.approx(0.25)
    assert mh_accept_probability(0.02) == pytest.approx(0.0625)
    assert mh_accept_probability(0.0) == 1.0
    assert mh_accept_probability(-0.3) == 1.0


@pytest.mark.parametrize("delta,want,tol", [(0.01, 0.25, 0.02), (0.02, 0.0625, 0.01)])
def test_mh_empirical_acceptance(delta, want, tol):
    rng = np.random.default_rng(99)
    p = mh_accept_probability(delta)
    freq = np.mean(rng.random(10_000) < p)
    assert abs(freq - want) <= tol


# --- optimiser contracts ---------------------------------------------------------


@pytest.mark.parametrize("runner", RUNNERS)
def test_zero_budget_is_empty(runner):
    h = runner(UnitBox(2), FunctionEvaluator(quad), 0, seed=1)
    assert len(h) == 0 and h.best() is None


@pytest.mark.parametrize("runner", RUNNERS)
def test_bit_reproducible(runner):
    a = runner(UnitBox(3), FunctionEvaluator(quad), 24, seed=5)
    b = runner(UnitBox(3), FunctionEvaluator(quad), 24, seed=5)
    assert a.to_csv() == b.to_csv()
    assert [r.candidate for r in a.records] == [r.candidate for r in b.records]


@pytest.mark.parametrize("runner", RUNNERS)
def test_budget_and_monotone_best(runner):
    h = runner(UnitBox(3), FunctionEvaluator(quad, noise=0.01), 30, seed=2)
    assert len(h) <= 30
    best = h.best_so_far()
    assert np.all(np.diff(best) >= 0)
    costs = [c for c, _ in cost_curve(h)]
    assert costs == sorted(costs)


def test_bo_quadratic_oracle():
    grid = np.linspace(0, 1, 10001)
    optimum = grid[np.argmax([quad([g]) for g in grid])]
    h = bo_run(UnitBox(1), FunctionEvaluator(quad), 30, batch_size=2, seed=0)
    assert len(h) <= 30
    assert abs(h.best().candidate[0] - optimum) <= 1e-2


def test_bo_never_repeats_points():
    h = bo_run(UnitBox(2, digits=2), FunctionEvaluator(quad), 40, seed=3)
    keys = [tuple(r.candidate) for r in h.records]
    assert len(keys) == len(set(keys))


def test_bo_batch_larger_than_budget():
    with pytest.raises(ValueError):
        bo_run(UnitBox(2), FunctionEvaluator(quad), 2, batch_size=4)


def test_bo_falls_back_when_surrogate_fails(monkeypatch):
    monkeypatch.setattr(schemes_mod, "_fit_gp", lambda *a, **k: None)
    h = bo_run(UnitBox(2), FunctionEvaluator(quad), 12, seed=0)
    assert len(h) == 12
    assert any("random proposals" in m for m in h.log)


def test_sa_acceptance_controller():
    rates = []
    for seed in range(3):
        h = sa_run(UnitBox(5), FunctionEvaluator(lambda u: quad(u, 0.4)), 600, chains=4, seed=seed)
        a = h.acceptance
        rates.append(np.mean(a[len(a) // 2:]))
    assert 0.2 <= np.mean(rates) <= 0.4


def test_sa_cold_limit_only_improves():
    h = sa_run(UnitBox(2), FunctionEvaluator(quad), 60, chains=2, seed=4, t_final=1e-12)
    assert h.best().score <= 1.0
    with pytest.raises(ValueError):
        sa_run(UnitBox(2), FunctionEvaluator(quad), 10, chains=0)
    with pytest.raises(ValueError):
        mcmc_run(UnitBox(2), FunctionEvaluator(quad), 10, chains=0)


def test_failed_candidates_are_recorded():
    h = bo_run(UnitBox(2), FunctionEvaluator(lambda u: float("nan") if u[0] > 0.5 else quad(u)), 12, seed=1)
    assert any(r.failed and r.score == 0.0 for r in h.records)


def test_history_roundtrip_and_curve():
    r1 = Record((0.1,), {}, 0.5, 0.0, 10, 10, 0)
    r2 = Record((0.2,), {}, 0.3, 0.0, 10, 20, 0)
    h = OptimizerHistory("bo", 0, [r1, r2], ["x"], [0.3])
    assert cost_curve(h) == [(10, 0.5), (20, 0.5)]
    assert cost_curve([r1]) == [(10, 0.5)]
    assert OptimizerHistory.from_dict(h.to_dict()) == h
    assert h.best_at_cost(5) == 0.0
    with pytest.raises(ValueError):
        cost_curve([])


# --- staged evaluator -------------------------------------------------------------


class CountingEvaluator(RungEvaluator):
    """Replaces simulation by scripted success counts while keeping the rung logic."""

    def __init__(self, space, pmf, p, **kw):
        super().__init__(space, pmf, **kw)
        self.p = p
        self.calls = []

    def _simulate(self, config, n_new, seed, start):
        self.calls.append((n_new, start))
        return np.full(len(self.inputs), self.p * n_new)


def test_rung_schedule_and_exact_cost(pmf2):
    space = ParamSpace.for_config(ChemSicalConfig.default())
    u = space.encode({})
    low = CountingEvaluator(space, pmf2, 0.0)
    r = low.evaluate(u, 0)
    assert r.rung == 0 and r.cost == 20 * 6 and low.total_cost == 120
    # a coin-flip candidate has a wide interval at 20 trajectories and is promoted
    assert CountingEvaluator(space, pmf2, 0.5).evaluate(u, 0).rung >= 1
    high = CountingEvaluator(space, pmf2, 1.0)
    r = high.evaluate(u, 0)
    assert r.rung == 3 and r.cost == 500 * 6
    assert high.calls == [(20, 0), (40, 20), (40, 60), (400, 100)]
    mid = CountingEvaluator(space, pmf2, 0.96)
    assert mid.evaluate(u, 0).rung == 2


def test_wide_interval_promotes(pmf2):
    space = ParamSpace.for_config(ChemSicalConfig.default())
    ev = RungEvaluator(space, pmf2)
    assert ev.promote(0, 0.85, 0.15)
    assert not ev.promote(0, 0.85, 0.05)
    assert not ev.promote(3, 1.0, 0.5)
    with pytest.raises(ConfigError):
        RungEvaluator(space, pmf2, rungs=(20, 10))
    with pytest.raises(ConfigError):
        RungEvaluator(space, pmf2, thresholds=(0.9,))


def test_rung_scores_are_nested(pmf2):
    space = ParamSpace.for_config(ChemSicalConfig.default("always-on"))
    ev = RungEvaluator(space, pmf2, inputs=(20, 520), rungs=(3, 6), thresholds=(0.9,))
    cfg = space.config(space.encode({}))
    a = ev._simulate(cfg, 3, 11, 0) + ev._simulate(cfg, 3, 11, 3)
    b = ev._simulate(cfg, 6, 11, 0)
    assert np.array_equal(a, b)


def test_comparison_runs_every_cell():
    c = compare_schemes(UnitBox(2), lambda: FunctionEvaluator(quad), 20, seeds=(0, 1))
    assert len(c.finals) == 3 * 2 * 2
    assert all(h.total_cost <= 24 for h in c.histories.values())
    assert c.init_gap("bo") >= 0
    assert c.to_csv().startswith("scheme,init,seed")
