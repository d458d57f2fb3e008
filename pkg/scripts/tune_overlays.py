"""Optimise one receiver overlay per (variant, decision horizon) and write the data file.

Each cell runs Bayesian optimisation over all rates and counts with the
staged evaluator on the reduced input set, stopping once the cumulative
trajectory budget is spent.  The best candidate is stored as an overlay.

    python scripts/tune_overlays.py [--budget 30000] [--seed 0] [--out src/chemsical/data/overlays.yaml]
"""

import argparse
import time
from pathlib import Path

import yaml

from chemsical.blocks import ChemSicalConfig
from chemsical.channel import amplitudes, default_channel, input_pmf
from chemsical.config import TDEC_LABELS
from chemsical.optimize import ParamSpace, RungEvaluator, bo_run


def tune(variant, tdec, budget, seed, pmf):
    base = ChemSicalConfig.default(variant, t_dec=tdec)
    space = ParamSpace.for_config(base)
    hist = bo_run(space, RungEvaluator(space, pmf), 10**6, seed=seed, cost_budget=budget)
    best = hist.best()
    return {"score": float(best.score), "ci": float(best.ci), "rung": int(best.rung), "cost": int(hist.total_cost),
            "evaluations": len(hist), "overlay": best.overlay}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budget", type=int, default=30_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variants", nargs="+", default=["timed", "always-on"])
    ap.add_argument("--tdec", nargs="+", default=list(TDEC_LABELS))
    ap.add_argument("--out", type=Path, default=Path(__file__).parents[1] / "src/chemsical/data/overlays.yaml")
    args = ap.parse_args()
    pmf = input_pmf(amplitudes(default_channel(2)))
    doc = yaml.safe_load(args.out.read_text()) if args.out.exists() else {}
    doc = {"version": 1, "budget": args.budget, "seed": args.seed, "overlays": doc.get("overlays", {})}
    for variant in args.variants:
        for label in args.tdec:
            t = time.time()
            cell = tune(variant, label, args.budget, args.seed, pmf)
            doc["overlays"].setdefault(variant, {})[label] = cell
            print(f"{variant} {label}: score {cell['score']:.3f} after {cell['cost']} trajectories "
                  f"({time.time() - t:.0f} s)", flush=True)
            args.out.write_text("# Generated by scripts/tune_overlays.py; do not edit by hand.\n"
                                + yaml.safe_dump(doc, sort_keys=False))


if __name__ == "__main__":
    main()
