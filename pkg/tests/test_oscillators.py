import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsical.exceptions import ConfigError, ResampleRequiredError, TuningError
from chemsical.oscillators import (FAMILIES, OscillatorSpec, build_oscillator, default_spec, fundamental,
                                   load_default_specs, oscillation_check, rank_oscillators, round_state,
                                   select_clock_pair, simulate_ensemble, spectral_stats, time_scaled)
from chemsical.sim import Trajectory, simulate_ode


def test_fundamental_of_pure_sinusoid():
    t = np.linspace(0, 2000, 4001)
    x = 5 + 3 * np.sin(2 * np.pi * 0.1 * t)
    f, h = fundamental(x[:-1], t[1] - t[0])
    assert f == pytest.approx(0.1, rel=1e-3)
    assert h == pytest.approx(3.0, rel=1e-2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 0.4), st.floats(0.5, 100))
def test_refined_frequency_beats_bin_width(freq, amp):
    t = np.arange(4000) * 0.5
    f, _ = fundamental(amp * np.cos(2 * np.pi * freq * t + 0.3), 0.5)
    assert abs(f - freq) <= 0.5 / 2000


def test_nonuniform_grid_rejected():
    with pytest.raises(ResampleRequiredError):
        spectral_stats(np.zeros((1, 5)), times=[0, 1, 2, 4, 5])
    with pytest.raises(ValueError):
        spectral_stats([])


def test_spectral_stats_and_cdf():
    t = np.linspace(0, 100, 1001)
    sig = np.stack([np.sin(2 * np.pi * f * t) for f in (0.1, 0.1, 0.12)])
    s = spectral_stats(sig, times=t)
    assert s.median_f1 == pytest.approx(0.1, rel=1e-2)
    grid, cdf = s.cdf()
    assert np.all(np.diff(cdf) >= 0) and cdf[-1] == 1.0
    assert s.summary()["n_traj"] == 3


def test_default_specs_load():
    specs = load_default_specs()
    assert set(specs) == set(FAMILIES)
    with pytest.raises(ConfigError):
        OscillatorSpec("metronome")
    with pytest.raises(ConfigError):
        default_spec("metronome")


@pytest.mark.parametrize("family", FAMILIES)
def test_tuned_ode_targets(family):
    spec = default_spec(family)
    diag = oscillation_check(build_oscillator(spec, check=False), spec.signal_species, 10.0)
    assert diag["oscillates"]
    assert diag["f1"] == pytest.approx(0.1, rel=0.05)
    assert diag["peak"] == pytest.approx(2000, rel=0.2)


def test_time_scaling_divides_period():
    spec = default_spec("phospho")
    fast = time_scaled(spec, 2.0)
    assert fast.target_f1 == pytest.approx(0.2)
    diag = oscillation_check(build_oscillator(fast, check=False), "S0", 5.0)
    assert diag["f1"] == pytest.approx(0.2, rel=0.05)


def test_decaying_spec_raises():
    spec = default_spec("pentilator").with_params(beta=0.01)
    with pytest.raises(TuningError):
        build_oscillator(spec)


def test_round_state_keeps_totals():
    spec = default_spec("phospho")
    state = simulate_ode(build_oscillator(spec, check=False), 37.3).final_state()
    counts = round_state("phospho", state)
    members = ("S0", "S1", "S2", "KS0", "KS1", "FS2", "FS1")
    assert sum(counts[m] for m in members) == sum(spec.initial[m] for m in members)
    assert counts["K"] + counts["KS0"] + counts["KS1"] == spec.initial["K"] + spec.initial["KS0"] + spec.initial["KS1"]


def test_clock_pair_selection():
    t = np.linspace(0, 100, 2001)
    a = 1 + np.sin(2 * np.pi * t / 10)
    b = 1 - np.sin(2 * np.pi * t / 10)
    c = 1 + np.sin(2 * np.pi * t / 10 + 0.3)
    traj = Trajectory(t, np.stack([a, b, c], axis=1), ("a", "b", "c"), "test")
    assert set(select_clock_pair(traj)) == {"a", "b"}


def test_small_ensemble_ranking_runs():
    specs = [default_spec(f) for f in FAMILIES]
    r = rank_oscillators(specs, n_traj=2, seed=1, t_obs=200.0, n_samples=401)
    assert sorted(r.order) == sorted(FAMILIES)
    assert set(r.report()["models"]) == set(FAMILIES)
    a = simulate_ensemble(specs[0], 2, 3, t_obs=50.0, n_samples=101)
    b = simulate_ensemble(specs[0], 2, 3, t_obs=50.0, n_samples=101)
    assert np.array_equal(a[1].counts, b[1].counts)
