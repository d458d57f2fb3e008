"""Candidate chemical clocks and their spectral stability analysis.

Three families are supported:

``am2``
    two approximate-majority switches coupled in a negative feedback ring
``pentilator``
    five-gene repression ring with Hill-type transcription
``phospho``
    mixed-mechanism dual-site phosphorylation (processive kinase,
    distributive phosphatase)

Tuned default parameters live in ``data/oscillators.yaml`` and are produced
by ``scripts/tune_oscillators.py``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np
import yaml

from .crn import CrnModel, RateLaw, Reaction, Species
from .exceptions import ConfigError, ResampleRequiredError, TuningError
from .sim import Trajectory, run_batch, simulate_ode

FAMILIES = ("am2", "pentilator", "phospho")

PHOSPHO_SPECIES = ("S0", "S1", "S2", "K", "F", "KS0", "KS1", "FS2", "FS1")
# (reactants, products) for k1..k10
PHOSPHO_REACTIONS = (
    ({"K": 1, "S0": 1}, {"KS0": 1}),
    ({"KS0": 1}, {"K": 1, "S0": 1}),
    ({"KS0": 1}, {"KS1": 1}),
    ({"KS1": 1}, {"K": 1, "S2": 1}),
    ({"F": 1, "S2": 1}, {"FS2": 1}),
    ({"FS2": 1}, {"F": 1, "S2": 1}),
    ({"FS2": 1}, {"F": 1, "S1": 1}),
    ({"F": 1, "S1": 1}, {"FS1": 1}),
    ({"FS1": 1}, {"F": 1, "S1": 1}),
    ({"FS1": 1}, {"F": 1, "S0": 1}),
)
AM2_SPECIES = ("xA", "bA", "yA", "xB", "bB", "yB")
N_GENES = 5

# Conserved totals as (slack species, members).  Rounding a real state keeps
# every total exact by assigning the remainder to the slack species.
_CONSERVATION = {
    "phospho": (
        ("K", ("K", "KS0", "KS1")),
        ("F", ("F", "FS2", "FS1")),
        ("S1", ("S0", "S1", "S2", "KS0", "KS1", "FS2", "FS1")),
    ),
    "am2": (("bA", ("xA", "bA", "yA")), ("bB", ("xB", "bB", "yB"))),
    "pentilator": (),
}


@dataclass(frozen=True)
class OscillatorSpec:
    family: str
    params: Mapping = field(default_factory=dict)
    clock_pair: tuple | None = None
    initial: Mapping | None = None
    target_f1: float = 0.1
    target_peak: float = 2000.0
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown oscillator family {self.family!r}")
        if self.clock_pair is not None:
            object.__setattr__(self, "clock_pair", tuple(self.clock_pair))
        if not self.name:
            object.__setattr__(self, "name", self.family)

    @property
    def signal_species(self) -> str:
        if self.clock_pair:
            return self.clock_pair[0]
        return {"phospho": "S0", "am2": "xA", "pentilator": "P1"}[self.family]

    def with_params(self, **params) -> "OscillatorSpec":
        return OscillatorSpec(self.family, {**self.params, **params}, self.clock_pair, self.initial,
                              self.target_f1, self.target_peak, self.name)

    def with_initial(self, initial) -> "OscillatorSpec":
        return OscillatorSpec(self.family, self.params, self.clock_pair, dict(initial),
                              self.target_f1, self.target_peak, self.name)

    def to_dict(self) -> dict:
        doc = {"family": self.family, "params": {k: float(v) for k, v in self.params.items()}}
        if self.clock_pair:
            doc["clock_pair"] = list(self.clock_pair)
        if self.initial is not None:
            doc["initial"] = {k: int(v) for k, v in self.initial.items()}
        doc["target_f1"] = float(self.target_f1)
        doc["target_peak"] = float(self.target_peak)
        return doc

    @classmethod
    def from_dict(cls, doc, name="") -> "OscillatorSpec":
        return cls(doc["family"], dict(doc.get("params", {})), doc.get("clock_pair"), doc.get("initial"),
                   float(doc.get("target_f1", 0.1)), float(doc.get("target_peak", 2000.0)), name or doc.get("name", ""))


def load_default_specs() -> dict[str, OscillatorSpec]:
    """Tuned specs shipped with the package, keyed by family."""
    text = resources.files("chemsical").joinpath("data/oscillators.yaml").read_text()
    doc = yaml.safe_load(text)
    return {name: OscillatorSpec.from_dict(entry, name) for name, entry in doc["oscillators"].items()}


def default_spec(family: str) -> OscillatorSpec:
    specs = load_default_specs()
    if family not in specs:
        raise ConfigError(f"no default spec for {family!r}")
    return specs[family]


# ---------------------------------------------------------------------------
# builders


def _phospho_model(spec):
    p = spec.params
    rates = [float(p[f"k{i}"]) for i in range(1, 11)]
    reactions = [
        Reaction(r, q, RateLaw.mass_action(k), name=f"phospho_r{i + 1}")
        for i, ((r, q), k) in enumerate(zip(PHOSPHO_REACTIONS, rates))
    ]
    species = [Species(s, "oscillator") for s in PHOSPHO_SPECIES]
    return CrnModel(species, reactions, spec.initial or {}, "phospho")


def _am_switch(x, b, y, rate, tag):
    return [
        Reaction({x: 1, y: 1}, {x: 1, b: 1}, RateLaw.mass_action(rate), name=f"{tag}_x_blanks_y"),
        Reaction({y: 1, x: 1}, {y: 1, b: 1}, RateLaw.mass_action(rate), name=f"{tag}_y_blanks_x"),
        Reaction({b: 1, x: 1}, {x: 2}, RateLaw.mass_action(rate), name=f"{tag}_x_recruits"),
        Reaction({b: 1, y: 1}, {y: 2}, RateLaw.mass_action(rate), name=f"{tag}_y_recruits"),
    ]


def _push(catalyst, target, opposite, blank, rate, tag):
    """``catalyst`` drives a switch from ``opposite`` through ``blank`` to ``target``."""
    return [
        Reaction({catalyst: 1, opposite: 1}, {catalyst: 1, blank: 1}, RateLaw.mass_action(rate), name=f"{tag}_1"),
        Reaction({catalyst: 1, blank: 1}, {catalyst: 1, target: 1}, RateLaw.mass_action(rate), name=f"{tag}_2"),
    ]


def _am2_model(spec):
    p = spec.params
    k_int = float(p["k_internal"])
    k_ext = k_int * float(p.get("coupling_ratio", 0.2))
    reactions = _am_switch("xA", "bA", "yA", k_int, "amA") + _am_switch("xB", "bB", "yB", k_int, "amB")
    # ring: xA -> B to x, xB -> A to y, yA -> B to y, yB -> A to x
    reactions += _push("xA", "xB", "yB", "bB", k_ext, "push_xA")
    reactions += _push("xB", "yA", "xA", "bA", k_ext, "push_xB")
    reactions += _push("yA", "yB", "xB", "bB", k_ext, "push_yA")
    reactions += _push("yB", "xA", "yA", "bA", k_ext, "push_yB")
    initial = spec.initial
    if initial is None:
        total = int(p.get("total", 2000))
        initial = {"xA": int(0.9 * total), "yA": total - int(0.9 * total), "xB": total // 2, "yB": total - total // 2}
    species = [Species(s, "oscillator") for s in AM2_SPECIES]
    return CrnModel(species, reactions, initial, "am2")


def _pentilator_model(spec):
    p = spec.params
    alpha, n = float(p.get("alpha", 1000.0)), float(p.get("n", 2.0))
    beta, d_m = float(p["beta"]), float(p["mrna_decay"])
    d_p = float(p.get("protein_decay", d_m))
    reactions, species = [], []
    for g in range(1, N_GENES + 1):
        prev = N_GENES if g == 1 else g - 1
        m, prot = f"m{g}", f"P{g}"
        species += [Species(m, "oscillator"), Species(prot, "oscillator")]
        reactions += [
            Reaction({}, {m: 1}, RateLaw.hill(alpha, f"P{prev}", n), name=f"transcribe_{g}"),
            Reaction({m: 1}, {m: 1, prot: 1}, RateLaw.mass_action(beta), name=f"translate_{g}"),
            Reaction({m: 1}, {}, RateLaw.mass_action(d_m), name=f"mrna_decay_{g}"),
            Reaction({prot: 1}, {}, RateLaw.mass_action(d_p), name=f"protein_decay_{g}"),
        ]
    initial = spec.initial if spec.initial is not None else {"m1": 10, "P2": 50}
    return CrnModel(species, reactions, initial, "pentilator")


_BUILDERS = {"phospho": _phospho_model, "am2": _am2_model, "pentilator": _pentilator_model}


def build_oscillator(spec: OscillatorSpec, check: bool = True) -> CrnModel:
    """Reaction network for ``spec``.

    With ``check`` the ODE solution is screened for sustained oscillation of
    the clock signal and :class:`TuningError` is raised when it decays.
    """
    model = _BUILDERS[spec.family](spec)
    if check:
        diag = oscillation_check(model, spec.signal_species, 1.0 / spec.target_f1)
        if not diag["oscillates"]:
            raise TuningError(f"{spec.name}: no sustained oscillation of {spec.signal_species}", diag)
    return model


def rescale_rates(model: CrnModel, factor: float) -> CrnModel:
    """Multiply every rate constant by ``factor``; this time-rescales the dynamics exactly."""
    return CrnModel(model.species, [r.with_rate(r.law.rate * factor) for r in model.reactions], model.initial, model.name)


_RATE_PARAMS = {
    "phospho": tuple(f"k{i}" for i in range(1, 11)),
    "am2": ("k_internal",),
    "pentilator": ("alpha", "beta", "mrna_decay", "protein_decay"),
}


def time_scaled(spec: OscillatorSpec, factor: float) -> OscillatorSpec:
    """Spec whose rate parameters are multiplied by ``factor`` (period divided by it)."""
    params = dict(spec.params)
    for key in _RATE_PARAMS[spec.family]:
        if key in params:
            params[key] = float(params[key]) * factor
    if spec.family == "pentilator" and "protein_decay" not in spec.params:
        params["protein_decay"] = float(params["mrna_decay"])
    return OscillatorSpec(spec.family, params, spec.clock_pair, spec.initial,
                          spec.target_f1 * factor, spec.target_peak, spec.name)


def oscillation_check(model, species, period_guess, n_periods=25, samples_per_period=200) -> dict:
    """Compare the signal's peak-to-peak swing early and late in a long ODE run."""
    horizon = n_periods * period_guess
    grid = np.linspace(0.0, horizon, n_periods * samples_per_period + 1)
    try:
        traj = simulate_ode(model, horizon, grid)
    except Exception as exc:  # integrator failure means no usable cycle either
        return {"oscillates": False, "reason": str(exc)}
    sig = traj[species]
    per = samples_per_period
    early = np.ptp(sig[5 * per:10 * per])
    late = np.ptp(sig[-5 * per:])
    scale = max(np.max(sig[-5 * per:]), 1e-12)
    f1, _ = fundamental(sig[-20 * per:], grid[1] - grid[0])
    ok = bool(late > 0.2 * scale and late > 0.5 * early)
    return {"oscillates": ok, "early_ptp": float(early), "late_ptp": float(late), "peak": float(scale),
            "f1": float(f1)}


# ---------------------------------------------------------------------------
# spectral analysis


def _check_uniform(times):
    times = np.asarray(times, dtype=float)
    if times.size < 4:
        raise ResampleRequiredError("need at least 4 samples")
    steps = np.diff(times)
    if np.any(np.abs(steps - steps[0]) > 1e-9 * max(abs(steps[0]), 1.0)):
        raise ResampleRequiredError("sampling grid is not uniform; resample first")
    return float(steps[0])


def fundamental(signal, dt, refine=True):
    """Fundamental frequency and amplitude of a uniformly sampled signal.

    The mean is removed and a rectangular window applied.  ``H1`` is the
    magnitude at the largest non-DC bin scaled to sinusoid amplitude
    (``2|X|/N``).  With ``refine`` the peak location is interpolated with a
    parabola through the three bins around it.
    """
    x = np.asarray(signal, dtype=float)
    x = x - x.mean()
    spec = np.abs(np.fft.rfft(x))
    spec[0] = 0.0
    i = int(np.argmax(spec))
    df = 1.0 / (x.size * dt)
    f = i * df
    if refine and 0 < i < spec.size - 1:
        a, b, c = spec[i - 1], spec[i], spec[i + 1]
        denom = a - 2 * b + c
        if denom != 0:
            f = (i + 0.5 * (a - c) / denom) * df
    return f, 2.0 * spec[i] / x.size


@dataclass
class SpectralStats:
    f1: np.ndarray
    h1: np.ndarray
    t_obs: float
    n_samples: int

    @property
    def resolution(self) -> float:
        return 1.0 / self.t_obs

    @property
    def median_f1(self) -> float:
        return float(np.median(self.f1))

    @property
    def median_h1(self) -> float:
        return float(np.median(self.h1))

    @property
    def rel_dev_f1(self) -> np.ndarray:
        return np.abs(self.f1 / self.median_f1 - 1.0)

    @property
    def rel_dev_h1(self) -> np.ndarray:
        return np.abs(self.h1 / self.median_h1 - 1.0)

    def cdf(self, which="f1", grid=None):
        """Empirical CDF of |relative deviation| evaluated on ``grid``."""
        dev = np.sort(self.rel_dev_f1 if which == "f1" else self.rel_dev_h1)
        if grid is None:
            grid = np.linspace(0.0, max(float(dev[-1]), 1e-12), 101)
        grid = np.asarray(grid, dtype=float)
        return grid, np.searchsorted(dev, grid, side="right") / dev.size

    def summary(self) -> dict:
        q = [0.1, 0.25, 0.5, 0.75, 0.9]
        return {
            "n_traj": int(self.f1.size),
            "t_obs": self.t_obs,
            "n_samples": self.n_samples,
            "median_f1": self.median_f1,
            "median_h1": self.median_h1,
            "median_abs_rel_dev_f1": float(np.median(self.rel_dev_f1)),
            "median_abs_rel_dev_h1": float(np.median(self.rel_dev_h1)),
            "quantiles": q,
            "rel_dev_f1_quantiles": np.quantile(self.rel_dev_f1, q).tolist(),
            "rel_dev_h1_quantiles": np.quantile(self.rel_dev_h1, q).tolist(),
        }


def spectral_stats(trajectories, species=None, times=None) -> SpectralStats:
    """Per-trajectory fundamental frequency/amplitude plus ensemble medians.

    ``trajectories`` is either a sequence of :class:`Trajectory` (with
    ``species`` naming the signal) or an array ``(n_traj, n_samples)`` with
    ``times`` supplied.
    """
    if len(trajectories) == 0:
        raise ValueError("need at least one trajectory")
    if isinstance(trajectories[0], Trajectory):
        times = trajectories[0].times
        signals = np.stack([t[species] for t in trajectories]).astype(float)
    else:
        signals = np.atleast_2d(np.asarray(trajectories, dtype=float))
        if times is None:
            raise ValueError("times are required for raw signal arrays")
    dt = _check_uniform(times)
    out = np.array([fundamental(s, dt) for s in signals])
    t_obs = float(times[-1] - times[0])
    return SpectralStats(out[:, 0], out[:, 1], t_obs, int(len(times)))


def clock_overlap(a, b) -> float:
    """Fraction of samples where both signals exceed half their own peak."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.mean((a > 0.5 * a.max()) & (b > 0.5 * b.max())))


def select_clock_pair(traj: Trajectory, candidates: Sequence[str] | None = None) -> tuple:
    """Pair of oscillating species with the least time spent both high."""
    names = list(candidates) if candidates is not None else list(traj.species)
    swinging = [n for n in names if np.ptp(traj[n]) > 0.2 * max(traj[n].max(), 1e-12)]
    best = None
    for a, b in itertools.combinations(swinging, 2):
        ov = clock_overlap(traj[a], traj[b])
        if best is None or ov < best[0]:
            best = (ov, (a, b))
    if best is None:
        raise TuningError("fewer than two oscillating species")
    return best[1]


@dataclass
class OscillatorRanking:
    order: list
    stats: dict

    def report(self) -> dict:
        return {
            "order": list(self.order),
            "models": {name: s.summary() for name, s in self.stats.items()},
        }


def simulate_ensemble(spec, n_traj, seed, t_obs=2000.0, n_samples=4001, workers=1, burn_in=0.0):
    """SSA ensemble of the clock signal on a uniform observation grid."""
    model = build_oscillator(spec, check=False)
    grid = burn_in + np.linspace(0.0, t_obs, n_samples)
    horizon = float(grid[-1])
    return run_batch(model, horizon, grid, n_traj, seed, workers)


def rank_oscillators(specs, n_traj=100, seed=0, t_obs=2000.0, n_samples=4001, workers=1) -> OscillatorRanking:
    """Rank oscillators from most to least stable.

    The key is the median |relative f1 deviation| over the ensemble with the
    median |relative H1 deviation| breaking ties.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one oscillator spec")
    stats = {}
    for i, spec in enumerate(specs):
        trajs = simulate_ensemble(spec, n_traj, seed + 7919 * i, t_obs, n_samples, workers)
        stats[spec.name] = spectral_stats(trajs, spec.signal_species)
    order = sorted(
        stats,
        key=lambda k: (float(np.median(stats[k].rel_dev_f1)), float(np.median(stats[k].rel_dev_h1))),
    )
    return OscillatorRanking(order, stats)


# ---------------------------------------------------------------------------
# clock phasing for the timed receiver


def round_state(family: str, state: Mapping[str, float]) -> dict[str, int]:
    """Round a real-valued state to counts keeping conserved totals exact."""
    out = {k: int(round(v)) for k, v in state.items()}
    for slack, members in _CONSERVATION[family]:
        total = int(round(sum(state[m] for m in members)))
        out[slack] = total - sum(out[m] for m in members if m != slack)
        if out[slack] < 0:
            raise TuningError(f"rounding left {slack} negative")
    return out


def gate_profile(counts, half, n=1.0):
    c = np.maximum(np.asarray(counts, float), 0.0) ** n
    return c / (c + half**n)


def phased_initial_state(spec, period, gate_species=None, half=600.0, n=1.0, window=(0.5, 1.0),
                         samples=2000, settle_periods=20, start_leak=0.01) -> dict[str, int]:
    """Limit-cycle state that puts the gate's high phase inside ``window``.

    The oscillator (already rescaled to ``period``) is integrated until
    settled, one period is sampled, and the starting offset maximising the
    gate integral inside ``window`` (fractions of the period) minus the
    integral outside it is chosen.  Offsets where the gate is still above
    ``start_leak`` times its maximum at time zero are skipped, so a pulse
    tail never wraps into the start of the cycle.
    """
    model = build_oscillator(spec, check=False)
    gate_species = gate_species or spec.signal_species
    settle = settle_periods * period
    grid = settle + np.linspace(0.0, 2 * period, 2 * samples + 1)
    traj = simulate_ode(model, float(grid[-1]), grid)
    g = gate_profile(traj[gate_species][:samples], half, n)
    g2 = np.concatenate([g, g])
    lo, hi = int(window[0] * samples), int(window[1] * samples)
    inside = np.zeros(samples)
    for off in range(samples):
        seg = g2[off:off + samples]
        inside[off] = seg[lo:hi].sum() - seg[:lo].sum() - seg[hi:].sum()
    inside[g > start_leak * g.max()] = -np.inf
    best = int(np.argmax(inside))
    return round_state(spec.family, traj.state_at(best))
