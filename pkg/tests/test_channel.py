import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsical.channel import (ChannelConfig, amplitudes, default_channel, impulse_mean, input_pmf, peak_time,
                               sample_observation, symbol_vectors)
from chemsical.exceptions import ConfigError


def test_reference_amplitudes():
    lam = amplitudes(default_channel(2))
    assert 300 <= lam[0] <= 318
    assert 150 <= lam[1] <= 180


def test_peak_time_maximises_composite():
    cfg = default_channel(2)
    tp = peak_time(cfg)
    f = lambda t: impulse_mean(cfg, 0, t) + impulse_mean(cfg, 1, t)
    assert f(tp) >= f(tp * 1.01) and f(tp) >= f(tp * 0.99)


def test_single_transmitter_peak_is_closed_form():
    cfg = ChannelConfig(distances=(10e-6,))
    assert peak_time(cfg) == pytest.approx((10e-6) ** 2 / 6e-9)


def test_pmf_sums_to_one_with_four_modes(pmf2):
    assert pmf2.prob.sum() == pytest.approx(1.0, abs=1e-6)
    modes = pmf2.local_maxima()
    lam = pmf2.amplitudes
    assert len(modes) == 4
    for m, target in zip(sorted(modes), [0, lam[1], lam[0], lam.sum()]):
        assert abs(m - target) <= 2


def test_weights_renormalise(pmf2):
    w = pmf2.weights([140, 167, 216, 308, 400, 475])
    assert w.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pmf2.weights([100000])


def test_invalid_geometry():
    with pytest.raises(ConfigError):
        ChannelConfig(distances=(12e-6, 10e-6))
    with pytest.raises(ConfigError):
        ChannelConfig.from_dict({"distances": [1e-5], "colour": 1})
    with pytest.warns(UserWarning):
        ChannelConfig(distances=(10e-6,), rx_radius=5e-6)


def test_sampling_reproducible(rng):
    lam = amplitudes(default_channel(2))
    s = symbol_vectors(2)
    a = sample_observation(lam, s, np.random.default_rng(3))
    b = sample_observation(lam, s, np.random.default_rng(3))
    assert np.array_equal(a, b) and a[0] == 0
    with pytest.raises(ValueError):
        sample_observation(lam, [2, 0], rng)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 400.0), min_size=1, max_size=3))
def test_pmf_normalised_for_any_amplitudes(lam):
    p = input_pmf(lam)
    assert p.prob.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(p.prob >= 0)
