import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsical.blocks import ChemSicalConfig, build
from chemsical.crn import CrnModel, RateLaw, Reaction, Species
from chemsical.exceptions import ModelError, SolverError
from chemsical.sim import child_seed, run_batch, simulate_ode, simulate_ssa, ssa_arrays


def decay_model(n0=100, k=0.5):
    return CrnModel([Species("A")], [Reaction({"A": 1}, {}, RateLaw.mass_action(k))], {"A": n0})


def am_model(d1, d0, b=0):
    ma = RateLaw.mass_action(1.0)
    reactions = [
        Reaction({"D1": 1, "D0": 1}, {"D1": 1, "B": 1}, ma),
        Reaction({"D0": 1, "D1": 1}, {"D0": 1, "B": 1}, ma),
        Reaction({"B": 1, "D1": 1}, {"D1": 2}, ma),
        Reaction({"B": 1, "D0": 1}, {"D0": 2}, ma),
    ]
    return CrnModel([Species("D1"), Species("D0"), Species("B")], reactions, {"D1": d1, "D0": d0, "B": b})


def am_win_probability(d1, d0, b=0):
    """Exact probability that the AM chain absorbs in all-D1, from the embedded jump chain."""
    total = d1 + d0 + b
    states = [(x, y, total - x - y) for x in range(total + 1) for y in range(total + 1 - x)]
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    A = np.eye(n)
    rhs = np.zeros(n)
    for s in states:
        x, y, z = s
        i = index[s]
        moves = [(x * y, (x, y - 1, z + 1)), (x * y, (x - 1, y, z + 1)),
                 (z * x, (x + 1, y, z - 1)), (z * y, (x, y + 1, z - 1))]
        rate = sum(r for r, _ in moves)
        if rate == 0:
            rhs[i] = 1.0 if x > 0 else 0.0
            continue
        for r, t in moves:
            if r:
                A[i, index[t]] -= r / rate
    return np.linalg.solve(A, rhs)[index[(d1, d0, b)]]


def test_decay_mean_within_three_sigma():
    n0, k, t = 100, 0.5, 1.0
    _, out, _ = ssa_arrays(decay_model(n0, k), t, [child_seed(7, i) for i in range(1000)])
    final = out[:, -1, 0]
    p = np.exp(-k * t)
    mean, sd = n0 * p, np.sqrt(n0 * p * (1 - p))
    assert abs(final.mean() - mean) <= 3 * sd / np.sqrt(1000)
    assert final.var() == pytest.approx(sd**2, rel=0.15)


@pytest.mark.parametrize("start", [(2, 1, 0), (1, 1, 0), (2, 2, 0), (1, 2, 1)])
def test_am_win_probability_matches_ctmc(start):
    exact = am_win_probability(*start)
    n = 2000
    _, out, _ = ssa_arrays(am_model(*start), 200.0, [child_seed(3, i) for i in range(n)])
    final = out[:, -1, :]
    assert np.all((final[:, 0] == 0) | (final[:, 1] == 0))
    won = np.mean(final[:, 1] == 0)
    assert abs(won - exact) <= 3 * np.sqrt(exact * (1 - exact) / n) + 1e-9


def test_ctmc_oracle_symmetry():
    assert am_win_probability(1, 1) == pytest.approx(0.5)
    assert am_win_probability(2, 1) + am_win_probability(1, 2) == pytest.approx(1.0)


def test_ode_decay_matches_closed_form():
    grid = np.linspace(0, 4, 9)
    traj = simulate_ode(decay_model(100, 0.5), 4.0, grid)
    assert np.allclose(traj["A"], 100 * np.exp(-0.5 * grid), rtol=1e-5)


def test_lsoda_agrees_with_default_solver():
    model = build(ChemSicalConfig.default("always-on"), 300)
    a = simulate_ode(model, 20.0).final_state()
    b = simulate_ode(model, 20.0, method="lsoda").final_state()
    for k in a:
        assert a[k] == pytest.approx(b[k], rel=1e-3, abs=1e-3)


def test_ssa_bit_reproducible():
    m = build(ChemSicalConfig.default("always-on"), 250)
    a = simulate_ssa(m, 5.0, seed=11)
    b = simulate_ssa(m, 5.0, seed=11)
    assert np.array_equal(a.counts, b.counts)
    c = simulate_ssa(m, 5.0, seed=12)
    assert not np.array_equal(a.counts, c.counts)


def test_run_batch_seeds_are_nested():
    m = decay_model()
    full = run_batch(m, 1.0, n_traj=4, master_seed=5)
    tail = run_batch(m, 1.0, n_traj=2, master_seed=5, start=2)
    assert np.array_equal(full[2].counts, tail[0].counts)
    assert full[3].seed == child_seed(5, 3)


def test_child_seed_depends_only_on_key():
    assert child_seed(1, 2, 3) == child_seed(1, 2, 3)
    assert len({child_seed(1, i) for i in range(100)}) == 100


def test_event_cap_raises():
    with pytest.raises(SolverError):
        ssa_arrays(decay_model(1000, 1.0), 10.0, [1], max_events=10)


def test_bad_initial_state_rejected():
    with pytest.raises(ModelError):
        ssa_arrays(decay_model(), 1.0, [1], state0={"A": 1.5})


def test_trajectory_csv_and_npz(tmp_path):
    traj = simulate_ssa(decay_model(), 1.0, np.linspace(0, 1, 5), seed=3)
    text = traj.to_csv()
    assert text.splitlines()[1] == "time,A"
    traj.save_npz(tmp_path / "t.npz")
    back = type(traj).load_npz(tmp_path / "t.npz")
    assert np.array_equal(back.counts, traj.counts) and back.seed == 3


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 600), st.integers(0, 2**31 - 1))
def test_receiver_conservation_laws(n, seed):
    cfg = ChemSicalConfig.default("always-on")
    model = build(cfg, n)
    traj = simulate_ssa(model, 10.0, np.linspace(0, 10, 6), seed=seed)
    c = cfg.counts
    # input and first threshold are catalysts
    assert np.all(traj["Y_on"] == n)
    assert np.all(traj["W1"] == c["W1"])
    pool1 = sum(traj[s] for s in ("Xon1", "Xoff1", "D1_1", "D1_0", "B1", "P1", "Q1"))
    pool2 = sum(traj[s] for s in ("Xon2", "Xoff2", "D2_1", "D2_0", "B2"))
    assert np.all(pool1 == c["Xon1"] + c["Xoff1"])
    assert np.all(pool2 == c["Xon2"] + c["Xoff2"])
    assert np.all(traj["W2"] - traj["P1"] == c["W2B"])
    assert np.all(traj.counts >= 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30))
def test_comparison_pair_conservation_exact(on, off):
    ma = RateLaw.mass_action(1.0)
    m = CrnModel([Species("Y"), Species("W"), Species("Xon"), Species("Xoff")],
                 [Reaction({"Y": 1, "Xoff": 1}, {"Y": 1, "Xon": 1}, ma),
                  Reaction({"W": 1, "Xon": 1}, {"W": 1, "Xoff": 1}, ma)],
                 {"Y": 5, "W": 7, "Xon": on, "Xoff": off})
    traj = simulate_ssa(m, 3.0, np.linspace(0, 3, 7), seed=on * 31 + off)
    assert np.all(traj["Xon"] + traj["Xoff"] == on + off)
    assert np.all(traj["Y"] == 5) and np.all(traj["W"] == 7)


def test_all_am_states_enumerated():
    # the oracle covers every state of the 4-molecule chain
    for d1, d0 in itertools.product(range(3), repeat=2):
        p = am_win_probability(d1, d0)
        assert 0.0 <= p <= 1.0
