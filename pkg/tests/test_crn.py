import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsical.crn import (CrnModel, HillGate, RateLaw, Reaction, Species, apply_reaction, propensity,
                           validate_model)
from chemsical.exceptions import InfeasibleFiringError, ModelError


def _toy():
    species = [Species("A"), Species("B"), Species("G")]
    reactions = [
        Reaction({"A": 1, "B": 1}, {"B": 2}, RateLaw.mass_action(0.5), name="r1"),
        Reaction({"A": 2}, {}, RateLaw.mass_action(2.0), name="dimer"),
        Reaction({}, {"A": 1}, RateLaw.hill(3.0, "B", 2.0), name="prod"),
        Reaction({"B": 1}, {"A": 1}, RateLaw.mass_action(1.0), HillGate("G", 10.0, 1.0), "gated"),
    ]
    return CrnModel(species, reactions, {"A": 5, "B": 3, "G": 10}, "toy")


def test_stoichiometry_is_normalised():
    r = Reaction(["A", "A", "B"], {"C": 1, "D": 0})
    assert r.reactants == (("A", 2), ("B", 1))
    assert r.products == (("C", 1),)
    assert r.order == 3
    assert r.net_change() == {"A": -2, "B": -1, "C": 1}


def test_propensity_laws():
    m = _toy()
    state = {"A": 5, "B": 3, "G": 10}
    r1, dimer, prod, gated = m.reactions
    assert propensity(r1, state) == pytest.approx(0.5 * 5 * 3)
    assert propensity(dimer, state) == pytest.approx(2.0 * 5 * 4 / 2)
    assert propensity(prod, state) == pytest.approx(3.0 / (1 + 3**2))
    assert propensity(gated, state) == pytest.approx(1.0 * 3 * 0.5)


def test_hill_gate_zero_and_half():
    g = HillGate("S", 600.0, 2.0)
    assert g.factor(0) == 0.0
    assert g.factor(600) == pytest.approx(0.5)
    assert g.factor(-3) == 0.0


def test_apply_reaction_and_infeasible():
    r = Reaction({"A": 2}, {"B": 1})
    assert apply_reaction(r, {"A": 3, "B": 0}) == {"A": 1, "B": 1}
    with pytest.raises(InfeasibleFiringError):
        apply_reaction(r, {"A": 1, "B": 0})


def test_unknown_role_and_species():
    with pytest.raises(ModelError):
        Species("X", "nonsense")
    m = _toy()
    with pytest.raises(ModelError):
        m.index("nope")
    with pytest.raises(ModelError):
        m.with_initial(nope=1)


def test_validate_flags_undeclared_species():
    m = CrnModel([Species("A")], [Reaction({"A": 1}, {"Z": 1})], {"A": 1})
    assert validate_model(m)


def test_yaml_roundtrip():
    m = _toy()
    back = CrnModel.from_yaml(m.to_yaml())
    assert back == m
    assert back.to_yaml() == m.to_yaml()


def test_merge_rejects_shared_species():
    m = _toy()
    with pytest.raises(ModelError):
        m.merged(CrnModel([Species("A")], []))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.floats(0.01, 10))
def test_mass_action_bimolecular_is_product(a, b, k):
    r = Reaction({"A": 1, "B": 1}, {}, RateLaw.mass_action(k))
    assert propensity(r, {"A": a, "B": b}) == pytest.approx(k * a * b)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 40))
def test_dimer_propensity_counts_pairs(a):
    r = Reaction({"A": 2}, {}, RateLaw.mass_action(1.0))
    assert propensity(r, {"A": a}) == pytest.approx(a * (a - 1) / 2)
    assert np.isfinite(propensity(r, {"A": a}))
