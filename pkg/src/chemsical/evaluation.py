"""Chemical decision readout, correctness labels and Monte-Carlo error estimates."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .blocks import ChemSicalConfig, build, clear_targets, reset_injection, restore_targets
from .channel import InputPmf
from .exceptions import ConfigError, ModelError
from .sic import ThresholdTree, label_matrix, reference_tree
from .sim import MAX_EVENTS, child_seed, simulate_ode, ssa_arrays

Z_95 = 1.96
DEFAULT_TOLERANCE = 0.2
REDUCED_INPUTS = {
    2: (140, 167, 216, 308, 400, 475),
}


# ---------------------------------------------------------------------------
# readout


def evidence_species(num_tx: int) -> list[tuple[list[str], list[str]]]:
    """Per stage, the species summed as evidence for '1' and for '0'."""
    out = []
    for i in range(1, num_tx + 1):
        ones, zeros = [f"D{i}_1"], [f"D{i}_0"]
        if i < num_tx:
            ones.append(f"P{i}")
            zeros.append(f"Q{i}")
        out.append((ones, zeros))
    return out


def chem_decide(state: Mapping[str, float], num_tx: int) -> np.ndarray:
    """Stage-wise decision: 1 iff evidence for '1' is at least the evidence for '0'.

    Detection species are required; spent-evidence species default to zero.
    """
    out = np.zeros(num_tx, dtype=np.int64)
    for i, (ones, zeros) in enumerate(evidence_species(num_tx)):
        for name in (ones[0], zeros[0]):
            if name not in state:
                raise ModelError(f"state lacks detection species {name!r}")
        e1 = sum(float(state.get(n, 0)) for n in ones)
        e0 = sum(float(state.get(n, 0)) for n in zeros)
        out[i] = 1 if e1 >= e0 else 0
    return out


def decide_array(counts: np.ndarray, names, num_tx: int) -> np.ndarray:
    """Vectorised :func:`chem_decide` over rows of ``counts`` (..., n_species) -> (..., M)."""
    names = list(names)
    counts = np.asarray(counts)
    cols = []
    for ones, zeros in evidence_species(num_tx):
        try:
            e1 = sum(counts[..., names.index(n)] for n in ones)
            e0 = sum(counts[..., names.index(n)] for n in zeros)
        except ValueError as exc:
            raise ModelError(f"counts lack an evidence species: {exc}") from None
        cols.append((e1 >= e0).astype(np.int64))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# reset checks


def restore_deviations(state: Mapping[str, float], config: ChemSicalConfig) -> dict[str, float]:
    """Relative deviation of every restored quantity from its target.

    Indicators are compared as on+off pools: the comparison block keeps
    re-splitting a pool by the input ratio, so only the pool is conserved.
    """
    targets = restore_targets(config)
    out = {}
    for i in range(1, config.num_tx + 1):
        want = targets[f"Xon{i}"] + targets[f"Xoff{i}"]
        have = float(state[f"Xon{i}"]) + float(state[f"Xoff{i}"])
        out[f"X{i}"] = abs(have - want) / want if want else float(have != 0)
    for j in range(2, config.num_tx + 1):
        want = targets[f"W{j}"]
        out[f"W{j}"] = abs(float(state[f"W{j}"]) - want) / want if want else float(state[f"W{j}"] != 0)
    return out


def reset_clean(state: Mapping[str, float], names) -> bool:
    return all(state[n] == 0 for n in names)


def label_correct(decision_state: Mapping[str, float], input_count: int, tree: ThresholdTree,
                  reset_state: Mapping[str, float] | None = None, config: ChemSicalConfig | None = None,
                  tolerance: float = DEFAULT_TOLERANCE) -> int:
    """1 iff the chemical decision matches the reference detector (and, with a reset state, the run is reusable)."""
    want = label_matrix(tree, [input_count])[0]
    ok = np.array_equal(chem_decide(decision_state, tree.n_stages), want)
    if reset_state is None or not ok:
        return int(ok)
    if config is None:
        raise ConfigError("a reset check needs the receiver config")
    clear = [n for n in reset_state if n.startswith(("D", "B", "P", "Q", "U")) and n[1:2].isdigit()]
    if not reset_clean(reset_state, clear):
        return 0
    return int(all(d <= tolerance for d in restore_deviations(reset_state, config).values()))


# ---------------------------------------------------------------------------
# Monte-Carlo runs


def _tree(config, tree):
    return reference_tree(config.num_tx) if tree is None else tree


def _state_rows(model, inputs, reps):
    base = model.compiled.x0
    rows = np.repeat(base[None, :], len(inputs) * reps, axis=0)
    rows[:, model.index("Y_on")] = np.repeat(np.asarray(inputs, dtype=float), reps)
    return rows


@dataclass
class RunOutcome:
    """Raw per-trajectory results for a block of inputs."""

    inputs: np.ndarray
    correct: np.ndarray  # (n_inputs, n_traj) bool
    decided: np.ndarray  # (n_inputs, n_traj) bool, decision alone
    clean: np.ndarray | None = None  # clear targets all zero
    deviations: np.ndarray | None = None  # (n_inputs, n_traj, n_restored)
    restored_names: tuple = ()
    events: int = 0
    labels: np.ndarray | None = None  # (n_inputs, n_traj, num_tx) decoded bits


def simulate_outcomes(config: ChemSicalConfig, inputs, n_traj: int, master_seed: int = 0,
                      tree: ThresholdTree | None = None, start: int = 0, workers: int = 1,
                      tolerance: float = DEFAULT_TOLERANCE, max_events: int = MAX_EVENTS) -> RunOutcome:
    """SSA runs for every input; trajectory ``j`` of input ``n`` uses ``child_seed(master, n, j)``.

    Seeds depend only on (master, n, j), so estimates at growing ``n_traj``
    are nested and inputs never share streams.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    tree = _tree(config, tree)
    inputs = np.atleast_1d(np.asarray(inputs, dtype=np.int64))
    if np.any(inputs < 0):
        raise ConfigError("input counts must be non-negative")
    model = build(config, 0)
    names = model.species_names
    seeds = np.array([child_seed(master_seed, int(n), j) for n in inputs for j in range(start, start + n_traj)])
    rows = _state_rows(model, inputs, n_traj)
    _, out, events = ssa_arrays(model, config.t_dec, seeds, state0=rows, workers=workers, max_events=max_events)
    final = out[:, -1, :]
    want = np.repeat(label_matrix(tree, inputs), n_traj, axis=0)
    got = decide_array(final, names, config.num_tx)
    decided = np.all(got == want, axis=1)
    shape = (inputs.size, n_traj)
    labels = got.reshape(shape + (config.num_tx,))
    if not config.reset.enabled:
        return RunOutcome(inputs, decided.reshape(shape), decided.reshape(shape), events=int(events.sum()),
                          labels=labels)
    x = final.astype(float)
    for k, v in reset_injection(config.reset).items():
        x[:, model.index(k)] += v
    reset_seeds = np.array([child_seed(master_seed, int(n), j, 1) for n in inputs for j in range(start, start + n_traj)])
    _, out2, events2 = ssa_arrays(model, config.reset.window, reset_seeds, state0=x, workers=workers,
                                  max_events=max_events)
    after = out2[:, -1, :]
    clear_idx = [model.index(z) for z in clear_targets(model)]
    clean = np.all(after[:, clear_idx] == 0, axis=1)
    devs = [restore_deviations(dict(zip(names, row)), config) for row in after]
    restored = tuple(devs[0])
    dev = np.array([[d[k] for k in restored] for d in devs])
    correct = decided & clean & np.all(dev <= tolerance, axis=1)
    return RunOutcome(inputs, correct.reshape(shape), decided.reshape(shape), clean.reshape(shape),
                      dev.reshape(shape + (len(restored),)), restored, int(events.sum() + events2.sum()), labels)


def proportion_halfwidth(p, n) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return Z_95 * np.sqrt(p * (1.0 - p) / np.asarray(n, dtype=float))


def estimate_pd(config: ChemSicalConfig, input_count: int, n_traj: int, master_seed: int = 0,
                tree: ThresholdTree | None = None, workers: int = 1) -> tuple[float, float]:
    """(P_d, 95% half-width) for one held input."""
    res = simulate_outcomes(config, [input_count], n_traj, master_seed, tree, workers=workers)
    p = float(res.correct.mean())
    return p, float(proportion_halfwidth(p, n_traj))


def weighted_pe(pd: Mapping[int, float], pmf: InputPmf, inputs=None, mode: str = "reduced",
                halfwidths: Mapping[int, float] | None = None, fill: str = "conservative") -> tuple[float, float]:
    """Input-weighted error probability and its propagated 95% half-width.

    ``reduced`` renormalises the pmf over ``inputs``.  ``full`` sums over the
    whole pmf support; unevaluated inputs count as P_d = 0 (``conservative``)
    or take the piecewise-linear interpolation of the evaluated ones.
    """
    inputs = sorted(pd) if inputs is None else [int(n) for n in inputs]
    if not inputs:
        raise ValueError("the evaluated input set is empty")
    missing = [n for n in inputs if n not in pd]
    if missing:
        raise ValueError(f"no P_d for inputs {missing[:5]}")
    hw = halfwidths or {}
    if mode == "reduced":
        w = pmf.weights(inputs)
        p = np.array([pd[n] for n in inputs])
        h = np.array([hw.get(n, 0.0) for n in inputs])
    elif mode == "full":
        support = pmf.support
        w = pmf.prob
        known = np.array(inputs)
        vals = np.array([pd[n] for n in inputs])
        if fill == "conservative":
            p = np.zeros(support.size)
            inside = known[known < support.size]
            p[inside] = vals[known < support.size]
        elif fill == "interpolate":
            p = np.interp(support, known, vals)
        else:
            raise ValueError(f"unknown fill {fill!r}")
        h = np.zeros(support.size)
        for n, v in hw.items():
            if 0 <= n < support.size:
                h[n] = v
    else:
        raise ValueError(f"mode must be 'reduced' or 'full', got {mode!r}")
    pe = 1.0 - float(np.dot(w, p))
    ci = float(math.sqrt(np.sum((w * h) ** 2)))
    return pe, ci


# ---------------------------------------------------------------------------
# reports


@dataclass
class EvalReport:
    variant: str
    fingerprint: str
    master_seed: int
    inputs: list[int]
    n_traj: list[int]
    pd: list[float]
    halfwidth: list[float]
    pe: float
    pe_ci: float
    mode: str = "reduced"
    fill: str = ""
    extra: dict = field(default_factory=dict)

    def pd_map(self) -> dict[int, float]:
        return dict(zip(self.inputs, self.pd))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["n", "pd", "ci_halfwidth", "n_traj"])
        for row in zip(self.inputs, self.pd, self.halfwidth, self.n_traj):
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def evaluate(config: ChemSicalConfig, inputs, n_traj: int, pmf: InputPmf, master_seed: int = 0,
             tree: ThresholdTree | None = None, mode: str = "reduced", fill: str = "conservative",
             workers: int = 1) -> EvalReport:
    """Estimate P_d for every input and the weighted P_e."""
    inputs = [int(n) for n in np.atleast_1d(inputs)]
    res = simulate_outcomes(config, inputs, n_traj, master_seed, tree, workers=workers)
    pd = res.correct.mean(axis=1)
    hw = proportion_halfwidth(pd, n_traj)
    pe, ci = weighted_pe(dict(zip(inputs, pd)), pmf, inputs, mode, dict(zip(inputs, hw)), fill)
    extra = {"events": res.events, "decision_only_pd": res.decided.mean(axis=1).tolist()}
    if res.clean is not None:
        extra["reset_clean_fraction"] = float(res.clean.mean())
        extra["reset_mean_deviation"] = float(res.deviations.mean())
    return EvalReport(config.variant, config.fingerprint(), int(master_seed), inputs, [int(n_traj)] * len(inputs),
                      pd.tolist(), hw.tolist(), pe, ci, mode, fill if mode == "full" else "", extra)


def ode_decisions(config: ChemSicalConfig, inputs) -> np.ndarray:
    """Deterministic (mean-field) decisions, one row per input."""
    rows = []
    for n in np.atleast_1d(inputs):
        traj = simulate_ode(build(config, int(n)), config.t_dec)
        rows.append(chem_decide(traj.final_state(), config.num_tx))
    return np.array(rows)


def ode_errors(config: ChemSicalConfig, inputs, tree: ThresholdTree | None = None) -> list[int]:
    """Inputs whose mean-field decision differs from the reference detector."""
    inputs = np.atleast_1d(np.asarray(inputs, dtype=np.int64))
    got = ode_decisions(config, inputs)
    want = label_matrix(_tree(config, tree), inputs)
    return [int(n) for n, g, w in zip(inputs, got, want) if not np.array_equal(g, w)]


@dataclass
class ResetReport:
    inputs: list[int]
    n_traj: int
    clean_fraction: float
    mean_deviation: float
    within_tolerance: float
    tolerance: float
    per_species_mean: dict
    decided_fraction: float

    def to_json(self, path=None) -> str:
        text = json.dumps(self.__dict__, indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def reset_statistics(config: ChemSicalConfig, inputs, n_traj: int, master_seed: int = 0,
                     tolerance: float = DEFAULT_TOLERANCE, workers: int = 1) -> ResetReport:
    """Clearing success and restoration accuracy after one decision plus reset window."""
    if not config.reset.enabled:
        raise ConfigError("reset statistics need a reset-enabled receiver")
    res = simulate_outcomes(config, inputs, n_traj, master_seed, workers=workers, tolerance=tolerance)
    dev = res.deviations
    return ResetReport([int(n) for n in res.inputs], n_traj, float(res.clean.mean()), float(dev.mean()),
                       float((dev <= tolerance).mean()), tolerance,
                       {k: float(dev[..., i].mean()) for i, k in enumerate(res.restored_names)},
                       float(res.decided.mean()))
