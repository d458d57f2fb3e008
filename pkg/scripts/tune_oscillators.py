"""Tune the three oscillator families to the clock targets and write the data file.

Targets: fundamental frequency 0.1 and a clock-signal peak of about 2000
molecules.  Each family is tuned by uniform rate scaling (sets the period)
plus one amplitude knob, using the ODE solution and an FFT as the oracle.
The result is a settled limit-cycle snapshot rounded to integer counts.

    python scripts/tune_oscillators.py [--out src/chemsical/data/oscillators.yaml]
"""

import argparse
from pathlib import Path

import numpy as np
import yaml

from chemsical.oscillators import (
    OscillatorSpec,
    build_oscillator,
    fundamental,
    round_state,
    select_clock_pair,
)
from chemsical.sim import simulate_ode

TARGET_F1 = 0.1
TARGET_PEAK = 2000.0

# Phospho starting point: a Hopf-unstable steady state found by random search
# over log-uniform rates, parameterised by the free S0, K and F levels.
PHOSPHO_BASE_RATES = [
    3.74938143e00, 7.86690348e-03, 1.54120353e00, 3.40270754e-01, 1.62075835e02,
    1.29697022e-03, 4.35027145e-02, 1.83250934e-01, 1.23347428e-03, 3.63013346e02,
]
PHOSPHO_BASE_FREE = (0.14401474, 1.88363704, 0.15552068)  # S0, K, F
BIMOLECULAR = (0, 4, 7)


def phospho_steady_state(k, s0, kin, f):
    ks0 = k[0] * kin * s0 / (k[1] + k[2])
    flux = k[2] * ks0
    ks1 = flux / k[3]
    fs2 = flux / k[6]
    s2 = (k[5] + k[6]) * fs2 / (k[4] * f)
    fs1 = flux / k[9]
    s1 = (k[8] + k[9]) * fs1 / (k[7] * f)
    return dict(zip(("S0", "S1", "S2", "K", "F", "KS0", "KS1", "FS2", "FS1"), (s0, s1, s2, kin, f, ks0, ks1, fs2, fs1)))


def measure(model, species, state0, period_guess, settle=60, window=100, per_period=100):
    t0 = settle * period_guess
    t1 = t0 + window * period_guess
    grid = np.linspace(t0, t1, window * per_period + 1)
    traj = simulate_ode(model, t1, grid, state0=state0)
    f1, _ = fundamental(traj[species], grid[1] - grid[0])
    return f1, float(traj[species].max()), traj


def snapshot(traj, family):
    return round_state(family, traj.state_at(-1))


def tune_phospho(iterations=8):
    k = np.array(PHOSPHO_BASE_RATES)
    base = phospho_steady_state(k, *PHOSPHO_BASE_FREE)
    time_scale, amp = 1.0, 2000.0 / max(base["S0"], 1e-9) / 10.0
    period_guess = 15.0
    for _ in range(iterations):
        rates = k * time_scale
        rates[list(BIMOLECULAR)] /= amp
        spec = OscillatorSpec("phospho", {f"k{i + 1}": float(r) for i, r in enumerate(rates)}, ("S0", "K"))
        model = build_oscillator(spec, check=False)
        state0 = {n: v * amp * (1.01 if n == "S0" else 1.0) for n, v in base.items()}
        f1, peak, traj = measure(model, "S0", state0, period_guess)
        time_scale *= TARGET_F1 / f1
        amp *= TARGET_PEAK / peak
        period_guess = 1.0 / TARGET_F1
        if abs(f1 / TARGET_F1 - 1) < 1e-3 and abs(peak / TARGET_PEAK - 1) < 5e-3:
            break
    spec = spec.with_initial(snapshot(traj, "phospho"))
    return spec, f1, peak


def tune_am2(iterations=8, coupling_ratio=0.2):
    total, k_int = 2000, 8.0 / 2000
    for _ in range(iterations):
        spec = OscillatorSpec("am2", {"k_internal": k_int, "coupling_ratio": coupling_ratio, "total": total})
        model = build_oscillator(spec, check=False)
        f1, peak, traj = measure(model, "xA", None, 1.0 / TARGET_F1)
        k_int *= TARGET_F1 / f1
        total = int(round(total * TARGET_PEAK / peak))
        if abs(f1 / TARGET_F1 - 1) < 1e-3 and abs(peak / TARGET_PEAK - 1) < 5e-3:
            break
    spec = OscillatorSpec("am2", {"k_internal": k_int, "coupling_ratio": coupling_ratio, "total": total})
    f1, peak, traj = measure(build_oscillator(spec, check=False), "xA", None, 1.0 / TARGET_F1)
    pair = select_clock_pair(traj, ["xA", "yA", "xB", "yB"])
    return OscillatorSpec("am2", spec.params, pair, snapshot(traj, "am2")), f1, peak


def tune_pentilator(iterations=12):
    beta, decay = 24.0, 3.5
    for _ in range(iterations):
        spec = OscillatorSpec("pentilator", {"alpha": 1000.0, "n": 2.0, "beta": beta, "mrna_decay": decay,
                                             "protein_decay": decay})
        f1, peak, traj = measure(build_oscillator(spec, check=False), "P1", None, 1.0 / TARGET_F1)
        decay *= (TARGET_F1 / f1) ** 1.2
        beta *= (TARGET_PEAK / peak) * (TARGET_F1 / f1) ** 2.4
        if abs(f1 / TARGET_F1 - 1) < 1e-3 and abs(peak / TARGET_PEAK - 1) < 5e-3:
            break
    spec = OscillatorSpec("pentilator", {"alpha": 1000.0, "n": 2.0, "beta": beta, "mrna_decay": decay,
                                         "protein_decay": decay})
    f1, peak, traj = measure(build_oscillator(spec, check=False), "P1", None, 1.0 / TARGET_F1)
    pair = select_clock_pair(traj, [f"P{g}" for g in range(1, 6)])
    if "P1" in pair:
        pair = ("P1", pair[1] if pair[0] == "P1" else pair[0])
    return OscillatorSpec("pentilator", spec.params, pair, snapshot(traj, "pentilator")), f1, peak


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_out = Path(__file__).resolve().parents[1] / "src" / "chemsical" / "data" / "oscillators.yaml"
    ap.add_argument("--out", type=Path, default=default_out)
    args = ap.parse_args(argv)

    doc = {"version": 1, "target_f1": TARGET_F1, "target_peak": TARGET_PEAK, "oscillators": {}}
    for name, tune in (("phospho", tune_phospho), ("am2", tune_am2), ("pentilator", tune_pentilator)):
        spec, f1, peak = tune()
        print(f"{name}: f1={f1:.5f} peak={peak:.1f} clock_pair={spec.clock_pair}")
        doc["oscillators"][name] = spec.to_dict()
    header = "# Generated by scripts/tune_oscillators.py; do not edit by hand.\n"
    args.out.write_text(header + yaml.safe_dump(doc, sort_keys=False))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
