"""Command-line entry point: every command reads one config document and writes CSV/JSON plus a manifest."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .blocks import default_rates
from .channel import amplitudes, input_pmf
from .config import RunDocument, canonical_json, content_hash, expand_inputs, load_document
from .evaluation import evaluate, ode_errors, simulate_outcomes
from .exceptions import ChemsicalError, ConfigError
from .oscillators import build_oscillator, oscillation_check, rank_oscillators
from .optimize import SCHEMES, ParamSpace, RungEvaluator, cost_curve

log = logging.getLogger("chemsical")

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 2, 3
MANIFEST = "manifest.json"
COMMANDS = ("oscillators", "ode-screen", "evaluate", "optimize", "reset-eval")


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    config_hash: str | None
    config: dict
    seed: int
    workers: int
    out: str
    version: str = __version__
    overrides: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return canonical_json(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# helpers


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


class _Out:
    """Collects output files so the manifest can list their hashes."""

    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def write(self, name: str, text: str):
        (self.root / name).write_text(text)
        self.files[name] = content_hash(text)


def _apply_overrides(doc: RunDocument, ov: dict) -> RunDocument:
    receiver = doc.receiver
    if ov.get("variant"):
        receiver = replace(receiver, variant=ov["variant"], t_osc=None)
    if ov.get("tdec"):
        receiver = receiver.with_tdec(ov["tdec"])
    doc = replace(doc, receiver=receiver)
    if ov.get("n_traj") is not None:
        if ov["n_traj"] < 1:
            raise ConfigError("--n-traj must be at least 1")
        doc.evaluate = {**doc.evaluate, "n_traj": ov["n_traj"]}
        doc.oscillators = {**doc.oscillators, "n_traj": ov["n_traj"]}
        doc.reset_eval = {**doc.reset_eval, "n_traj": ov["n_traj"]}
    if ov.get("scheme"):
        doc.optimize = {**doc.optimize, "scheme": ov["scheme"]}
    doc.receiver_config()
    return doc


def _pmf(doc: RunDocument):
    return input_pmf(amplitudes(doc.channel))


# ---------------------------------------------------------------------------
# commands


def cmd_oscillators(doc: RunDocument, seed: int, workers: int, out: _Out):
    cfg = doc.oscillators
    if int(cfg["n_traj"]) < 1:
        raise ConfigError("oscillator study needs n_traj >= 1")
    specs = doc.oscillator_specs()
    for name, spec in specs.items():
        check = oscillation_check(build_oscillator(spec, check=False), spec.signal_species, 1.0 / spec.target_f1)
        if not check["oscillates"]:
            raise ConfigError(f"oscillator '{name}' does not oscillate")
    ranking = rank_oscillators(specs.values(), int(cfg["n_traj"]), seed, float(cfg["t_obs"]),
                               int(cfg["n_samples"]), workers)
    for name, st in ranking.stats.items():
        rows = [(i, repr(float(f)), repr(float(h))) for i, (f, h) in enumerate(zip(st.f1, st.h1))]
        out.write(f"spectral_{name}.csv", _csv(rows, ["trajectory", "f1_hz", "h1_molecules"]))
        grid, cdf = st.cdf("f1", np.linspace(0.0, 0.05, 201))
        out.write(f"cdf_f1_{name}.csv", _csv(zip(map(repr, grid.tolist()), map(repr, cdf.tolist())),
                                             ["abs_rel_dev_f1", "cdf"]))
    out.write("ranking.json", canonical_json(ranking.report()))


def cmd_ode_screen(doc: RunDocument, seed: int, workers: int, out: _Out):
    cfg = doc.ode_screen
    inputs = expand_inputs(cfg["inputs"], doc.receiver.num_tx)
    summary = {}
    for variant in cfg["variants"]:
        for rs in cfg["rate_sets"]:
            receiver = replace(doc.receiver, variant=variant, rates=default_rates(doc.receiver.num_tx, int(rs)),
                               t_osc=None)
            errs = ode_errors(receiver, inputs, doc.tree)
            key = f"{variant}_set{rs}"
            summary[key] = {"errors": len(errs), "fraction": len(errs) / len(inputs), "inputs": errs}
            out.write(f"ode_errors_{key}.csv", _csv([(n,) for n in errs], ["input_count"]))
    out.write("ode_screen.json", canonical_json({"n_inputs": len(inputs), "sets": summary}))


def cmd_evaluate(doc: RunDocument, seed: int, workers: int, out: _Out):
    cfg = doc.evaluate
    receiver = doc.receiver_config()
    inputs = expand_inputs(cfg["inputs"], receiver.num_tx)
    report = evaluate(receiver, inputs, int(cfg["n_traj"]), _pmf(doc), seed, doc.tree, cfg["mode"], cfg["fill"],
                      workers)
    out.write("pd_curve.csv", report.to_csv())
    out.write("report.json", report.to_json())


def cmd_optimize(doc: RunDocument, seed: int, workers: int, out: _Out):
    cfg = doc.optimize
    if int(cfg["budget"]) <= 0:
        raise ConfigError("optimisation budget must be positive")
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"unknown scheme {cfg['scheme']!r}")
    receiver = doc.receiver_config()
    space = ParamSpace.for_config(receiver, counts=bool(cfg["counts"]), spread=float(cfg["spread"]))
    evaluator = RungEvaluator(space, _pmf(doc), expand_inputs(cfg["inputs"], receiver.num_tx), cfg["rungs"],
                              cfg["thresholds"], float(cfg["ci_promotion"]), doc.tree, workers)
    kw = {"seed": seed, "init": cfg["init"], "cost_budget": cfg["cost_budget"]}
    if cfg["scheme"] == "bo":
        hist = SCHEMES["bo"](space, evaluator, int(cfg["budget"]), batch_size=int(cfg["batch_size"]), **kw)
    else:
        hist = SCHEMES[cfg["scheme"]](space, evaluator, int(cfg["budget"]), chains=int(cfg["chains"]), **kw)
    out.write("history.csv", hist.to_csv())
    out.write("best_overlay.json", hist.best_overlay_json())
    if len(hist):
        curve = cost_curve(hist)
        out.write("cost_curve.csv", _csv([(c, repr(s)) for c, s in curve], ["cumulative_trajectories", "best_score"]))


def cmd_reset_eval(doc: RunDocument, seed: int, workers: int, out: _Out):
    cfg = doc.reset_eval
    receiver = doc.receiver_config()
    if not receiver.reset.enabled:
        raise ConfigError("reset evaluation needs receiver.reset.enabled = true")
    inputs = expand_inputs(cfg["inputs"], receiver.num_tx)
    tol = float(cfg["tolerance"])
    res = simulate_outcomes(receiver, inputs, int(cfg["n_traj"]), seed, doc.tree, workers=workers, tolerance=tol)
    dev = res.deviations
    edges = np.linspace(0.0, 1.0, int(cfg["bins"]) + 1)
    rows = []
    for k, name in enumerate(res.restored_names):
        hist, _ = np.histogram(np.minimum(dev[..., k].ravel(), 1.0), bins=edges)
        pmf = hist / hist.sum()
        rows += [(name, repr(float(a)), repr(float(b)), repr(float(p))) for a, b, p in zip(edges, edges[1:], pmf)]
    out.write("deviation_pmf.csv", _csv(rows, ["quantity", "dev_low", "dev_high", "probability"]))
    summary = {
        "n_traj": int(cfg["n_traj"]), "inputs": [int(n) for n in inputs], "tolerance": tol,
        "clear_success_fraction": float(res.clean.mean()),
        "mean_relative_deviation": float(dev.mean()),
        "fraction_within_tolerance": float((dev <= tol).mean()),
        "per_quantity_mean": {k: float(dev[..., i].mean()) for i, k in enumerate(res.restored_names)},
        "decision_correct_fraction": float(res.decided.mean()),
        "reusable_correct_fraction": float(res.correct.mean()),
    }
    out.write("reset_summary.json", canonical_json(summary))


HANDLERS = {
    "oscillators": cmd_oscillators,
    "ode-screen": cmd_ode_screen,
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "reset-eval": cmd_reset_eval,
}


def run_command(command: str, config_path, seed: int = 0, workers: int = 1, out_dir="out",
                overrides: dict | None = None) -> RunManifest:
    """Run one command and write its outputs plus ``manifest.json`` into ``out_dir``."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if config_path is not None:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        doc = load_document(config_path)
        chash = content_hash(text)
    else:
        doc, chash = RunDocument(), None
    doc = _apply_overrides(doc, overrides)
    out = _Out(Path(out_dir))
    HANDLERS[command](doc, int(seed), int(workers), out)
    manifest = RunManifest(command, None if config_path is None else str(config_path), chash, doc.to_dict(),
                           int(seed), int(workers), str(out_dir), overrides=overrides, outputs=dict(out.files))
    (Path(out_dir) / MANIFEST).write_text(manifest.to_json())
    return manifest


def replay(manifest_path, out_dir) -> RunManifest:
    """Re-run a manifest from its embedded config document into ``out_dir``."""
    try:
        m = RunManifest.from_json(Path(manifest_path).read_text())
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from None
    if m.command not in HANDLERS:
        raise ConfigError(f"manifest names unknown command {m.command!r}")
    doc = RunDocument.from_dict(m.config)
    out = _Out(Path(out_dir))
    HANDLERS[m.command](doc, m.seed, m.workers, out)
    new = replace(m, out=str(out_dir), outputs=dict(out.files))
    (Path(out_dir) / MANIFEST).write_text(new.to_json())
    return new


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemsical", description="Chemical SIC receiver experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="YAML config document")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", type=Path, default=Path("out") / name)
        p.add_argument("--n-traj", type=int, default=None)
        p.add_argument("--variant", choices=("timed", "always-on"), default=None)
        p.add_argument("--tdec", choices=("tref/4", "tref/2", "tref", "2tref"), default=None)
        p.add_argument("--scheme", choices=tuple(SCHEMES), default=None)
    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            m = replay(args.manifest, args.out)
        else:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            overrides = {"n_traj": args.n_traj, "variant": args.variant, "tdec": args.tdec, "scheme": args.scheme}
            m = run_command(args.command, args.config, args.seed, args.workers, args.out, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChemsicalError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    print(json.dumps({"command": m.command, "out": m.out, "outputs": sorted(m.outputs)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
