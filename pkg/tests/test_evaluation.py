import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsical.blocks import ChemSicalConfig, ResetConfig, build
from chemsical.estimators import ReceiverEstimator
from chemsical.evaluation import (REDUCED_INPUTS, EvalReport, chem_decide, decide_array, evaluate, label_correct,
                                  ode_errors, proportion_halfwidth, reset_statistics, restore_deviations,
                                  simulate_outcomes, weighted_pe)
from chemsical.exceptions import ConfigError, ModelError
from chemsical.sic import reference_tree

NAMES = ("D1_1", "D1_0", "P1", "Q1", "D2_1", "D2_0")
counts = st.integers(0, 500)


def test_chem_decide_tie_is_one():
    state = {"D1_1": 5, "D1_0": 5, "D2_1": 0, "D2_0": 3}
    assert chem_decide(state, 2).tolist() == [1, 0]
    with pytest.raises(ModelError):
        chem_decide({"D1_1": 1}, 2)


def test_spent_evidence_counts():
    state = {"D1_1": 0, "D1_0": 2, "P1": 10, "Q1": 1, "D2_1": 4, "D2_0": 1}
    assert chem_decide(state, 2).tolist() == [1, 1]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[counts] * 6), min_size=1, max_size=8))
def test_vectorised_readout_matches_scalar(rows):
    arr = np.array(rows)
    vec = decide_array(arr, NAMES, 2)
    for row, got in zip(arr, vec):
        assert got.tolist() == chem_decide(dict(zip(NAMES, row)), 2).tolist()


@settings(max_examples=60, deadline=None)
@given(pd_values=st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6))
def test_pe_identity(pmf2, pd_values):
    inputs = REDUCED_INPUTS[2]
    pd = dict(zip(inputs, pd_values))
    w = pmf2.weights(inputs)
    assert w.sum() == pytest.approx(1.0)
    pe, _ = weighted_pe(pd, pmf2, inputs)
    assert pe == pytest.approx(1.0 - float(np.dot(w, pd_values)))
    assert -1e-12 <= pe <= 1.0 + 1e-12


def test_pe_extremes_and_full_mode(pmf2):
    inputs = REDUCED_INPUTS[2]
    assert weighted_pe({n: 1.0 for n in inputs}, pmf2)[0] == pytest.approx(0.0, abs=1e-12)
    assert weighted_pe({n: 0.0 for n in inputs}, pmf2)[0] == pytest.approx(1.0)
    full = {n: 1.0 for n in inputs}
    cons, _ = weighted_pe(full, pmf2, mode="full", fill="conservative")
    interp, _ = weighted_pe(full, pmf2, mode="full", fill="interpolate")
    assert interp == pytest.approx(0.0, abs=1e-12) and cons > 0.9
    with pytest.raises(ValueError):
        weighted_pe({}, pmf2)
    with pytest.raises(ValueError):
        weighted_pe(full, pmf2, mode="sideways")


def test_ci_propagation(pmf2):
    inputs = REDUCED_INPUTS[2]
    pd = {n: 0.5 for n in inputs}
    hw = {n: float(proportion_halfwidth(0.5, 100)) for n in inputs}
    _, ci = weighted_pe(pd, pmf2, inputs, halfwidths=hw)
    w = pmf2.weights(inputs)
    assert ci == pytest.approx(np.sqrt(np.sum((w * hw[140]) ** 2)))


def test_outcomes_nested_and_reproducible():
    cfg = ChemSicalConfig.default("always-on")
    a = simulate_outcomes(cfg, [160, 320], 6, master_seed=4)
    b = simulate_outcomes(cfg, [160, 320], 3, master_seed=4, start=3)
    assert np.array_equal(a.correct[:, 3:], b.correct)
    assert np.array_equal(a.labels[:, 3:], b.labels)
    with pytest.raises(ConfigError):
        simulate_outcomes(cfg, [-1], 2)


def test_evaluate_report_roundtrip(pmf2, tmp_path):
    cfg = ChemSicalConfig.default("always-on")
    rep = evaluate(cfg, [20, 520], 5, pmf2, master_seed=1)
    back = EvalReport.from_json(rep.to_json())
    assert back == rep
    assert rep.to_csv().splitlines()[0] == "n,pd,ci_halfwidth,n_traj"
    assert rep.pd_map()[20] == pytest.approx(1.0)


def test_ode_errors_away_from_boundaries():
    cfg = ChemSicalConfig.default("timed")
    assert ode_errors(cfg, [0, 150, 300, 480]) == []


def _reset_cfg():
    return ChemSicalConfig.default("always-on", reset=ResetConfig(enabled=True))


def test_reset_statistics_small():
    rep = reset_statistics(_reset_cfg(), [300], 6, master_seed=2)
    assert 0.0 <= rep.clean_fraction <= 1.0
    assert set(rep.per_species_mean) == {"X1", "X2", "W2"}
    with pytest.raises(ConfigError):
        reset_statistics(ChemSicalConfig.default(), [300], 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 400), st.integers(0, 200), st.integers(0, 150), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_tolerance_monotone(x1, x2, w2, t1, t2):
    cfg = _reset_cfg()
    lo, hi = sorted((t1, t2))
    decision = {"D1_1": 10, "D1_0": 0, "P1": 0, "Q1": 0, "D2_1": 0, "D2_0": 10}
    after = {"Xon1": x1, "Xoff1": 0, "Xon2": x2, "Xoff2": 0, "W2": w2, "D1_1": 0, "D1_0": 0, "B1": 0,
             "P1": 0, "Q1": 0, "D2_1": 0, "D2_0": 0, "B2": 0}
    tree = reference_tree(2)
    a = label_correct(decision, 300, tree, after, cfg, tolerance=lo)
    b = label_correct(decision, 300, tree, after, cfg, tolerance=hi)
    assert a <= b
    devs = restore_deviations(after, cfg)
    assert a == int(max(devs.values()) <= lo)


def test_dirty_reset_is_incorrect():
    cfg = _reset_cfg()
    decision = {"D1_1": 10, "D1_0": 0, "D2_1": 0, "D2_0": 10}
    after = {"Xon1": 154, "Xoff1": 154, "Xon2": 83, "Xoff2": 84, "W2": 78, "D1_1": 1}
    assert label_correct(decision, 300, reference_tree(2), after, cfg) == 0
    with pytest.raises(ConfigError):
        label_correct(decision, 300, reference_tree(2), after)


def test_receiver_estimator(pmf2):
    est = ReceiverEstimator(ChemSicalConfig.default("always-on"), n_traj=4, pmf=pmf2)
    est.fit(np.array([[20], [520]]))
    assert est.predict([20, 520]).tolist() == [[0, 0], [1, 1]]
    assert est.score([20, 520]) == pytest.approx(1.0)
    assert est.predict_pd([520]).tolist() == [1.0]
    with pytest.raises(ConfigError):
        est.predict([300])
    with pytest.raises(ConfigError):
        ReceiverEstimator().predict([1])
    assert ReceiverEstimator(n_traj=7).get_params()["n_traj"] == 7


def test_model_input_is_held():
    model = build(ChemSicalConfig.default("always-on"), 123)
    assert model.initial["Y_on"] == 123
