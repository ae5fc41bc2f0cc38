"""Command-line entry points for the full pipeline.

Every command accepts --config pointing at a JSON file of flag defaults;
explicit flags win over the file, which wins over built-in defaults. The
fully-resolved configuration is logged at the start of each run. Report
commands write delimited tables and render the matching PNG figures next to
them.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

log = logging.getLogger("control_studio")


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    resolved = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        file_cfg = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(f"config file sets unknown keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            resolved[key] = val
    log.info("resolved config: %s", json.dumps(resolved, sort_keys=True, default=str))
    return resolved


def _load_corpus_and_stats(corpus_dir: str):
    from .corpus import load_corpus, load_stats
    corpus = load_corpus(corpus_dir)
    stats = load_stats(corpus_dir)
    return corpus, stats


# --- commands ---------------------------------------------------------------

def cmd_gen_data(args) -> int:
    from .corpus import CorpusProfile, generate_corpus, save_corpus
    defaults = {"seed": 7, "profile": "desk", "out": "data", "sentences": None,
                "speakers": None, "styles": None, "test-sentences": None,
                "val-sentences": None, "renditions-per-test": None,
                "t-min": None, "t-max": None}
    cfg = _resolve(args, defaults)
    profile = CorpusProfile.paper() if cfg["profile"] == "paper" else CorpusProfile.desk()
    overrides = {}
    for flag, fieldname in (("sentences", "sentences"), ("speakers", "speakers"),
                            ("styles", "styles"), ("test-sentences", "test_sentences"),
                            ("val-sentences", "val_sentences"),
                            ("renditions-per-test", "renditions_per_test"),
                            ("t-min", "t_min"), ("t-max", "t_max")):
        if cfg[flag] is not None:
            overrides[fieldname] = cfg[flag]
    if overrides:
        profile = replace(profile, **overrides)
    corpus = generate_corpus(cfg["seed"], profile)
    save_corpus(corpus, cfg["out"])
    print(f"wrote {len(corpus.renditions)} renditions over {len(corpus.sentences)} "
          f"sentences to {cfg['out']}")
    return 0


def cmd_train(args) -> int:
    from .corpus import load_corpus
    from .models import ModelConfig
    from .training import TrainSchedule, save_checkpoint, train
    defaults = {"family": "micvae", "corpus": "data", "out": None, "epochs": 30,
                "batch-size": 16, "lr": 1e-3, "beta": 0.01, "policy": "subset",
                "subset-p": None, "driven-percent": 50.0, "scale": "desk", "seed": 0}
    cfg = _resolve(args, defaults)
    corpus = load_corpus(cfg["corpus"])
    out = cfg["out"] or f"{cfg['family']}.ckpt"
    model_cfg = ModelConfig.build(
        cfg["family"], corpus.phone_vocab(), max(corpus.speaker_ids()) + 1,
        max(corpus.style_ids()) + 1, scale=cfg["scale"])
    schedule = TrainSchedule(
        epochs=cfg["epochs"], batch_size=cfg["batch-size"], lr=cfg["lr"],
        beta=cfg["beta"], driving_policy=cfg["policy"], subset_p=cfg["subset-p"],
        mask_percent=100.0 - cfg["driven-percent"], seed=cfg["seed"])
    bundle = train(corpus, model_cfg, schedule, corpus_ref=str(cfg["corpus"]))
    save_checkpoint(bundle, out)
    meta = bundle.metadata
    print(f"trained {cfg['family']} for {cfg['epochs']} epochs: loss "
          f"{meta['init_loss']:.4f} -> {meta['final_loss']:.4f}; wrote {out}")
    return 0


def cmd_eval_refine(args) -> int:
    from .corpus import transplant_pairs
    from .evalsim import EvalContext, iterative_refinement
    from .evalsim.figures import render_contours, render_refinement
    from .evalsim.report import (contour_rows, refinement_rows, save_report,
                                 traces_to_json, write_contour_table, write_plot_table)
    from .training import load_checkpoint
    defaults = {"checkpoint": "micvae.ckpt", "crude-checkpoint": None,
                "corpus": "data", "pairs": 24, "max-steps": 70, "seed": 0,
                "out": "reports/refine"}
    cfg = _resolve(args, defaults)
    bundle = load_checkpoint(cfg["checkpoint"])
    corpus, _ = _load_corpus_and_stats(cfg["corpus"])
    ctx = EvalContext(corpus, bundle.stats)
    pairs = transplant_pairs(corpus, cfg["seed"])[:cfg["pairs"]]
    if not pairs:
        raise ValueError("no transplant pairs available")

    label = bundle.config.family
    traces = [iterative_refinement(bundle, ctx, p, cfg["max-steps"], label) for p in pairs]
    if cfg["crude-checkpoint"]:
        crude = load_checkpoint(cfg["crude-checkpoint"], expect_family="nocontrol")
        traces += [iterative_refinement(crude, ctx, p, cfg["max-steps"], "crude", crude=True)
                   for p in pairs]

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_plot_table(refinement_rows(traces, seed=cfg["seed"]), out / "refine.tsv")
    render_refinement(traces, out / "refine.png")
    save_report(traces_to_json(traces), out / "report.json")

    # Contour snapshot of the first pair after four greedy steps.
    first = traces[0]
    driven = [s.chosen for s in first.steps[1:5] if s.chosen]
    truth = ctx.normalized_paf(first.sentence_id, first.driving_actor)
    from .evalsim.simulate import ControlTrial, simulate_control
    pred = simulate_control(bundle, ctx, ControlTrial(
        first.sentence_id, first.driving_actor, first.target_speaker, tuple(driven)))
    rows = contour_rows(label, truth, pred, driven)
    write_contour_table(rows, out / "contour.tsv")
    render_contours(truth, {label: pred}, driven, out / "contour.png")
    print(f"wrote refinement report for {len(pairs)} pairs to {out}")
    return 0


def cmd_eval_sweep(args) -> int:
    from .evalsim import EvalContext, robustness_sweep
    from .evalsim.figures import render_sweep
    from .evalsim.report import save_report, sweep_report_to_json, sweep_rows, write_plot_table
    from .training import load_checkpoint
    defaults = {"models": "micvae,masked-0,masked-50,masked-100",
                "checkpoint-dir": ".", "crude-checkpoint": None, "corpus": "data",
                "grid": "0,6,12,36,72,256", "trials": 24, "seed": 0,
                "out": "reports/sweep"}
    cfg = _resolve(args, defaults)
    corpus, _ = _load_corpus_and_stats(cfg["corpus"])

    bundles = {}
    crude_labels = []
    for token in cfg["models"].split(","):
        token = token.strip()
        if not token:
            continue
        if "=" in token:
            label, path = token.split("=", 1)
        else:
            label, path = token, str(Path(cfg["checkpoint-dir"]) / f"{token}.ckpt")
        bundles[label] = load_checkpoint(path)
    if cfg["crude-checkpoint"]:
        bundles["crude"] = load_checkpoint(cfg["crude-checkpoint"], expect_family="nocontrol")
        crude_labels.append("crude")
    if not bundles:
        raise ValueError("no models given")

    any_bundle = next(iter(bundles.values()))
    ctx = EvalContext(corpus, any_bundle.stats)
    grid = tuple(int(k) for k in str(cfg["grid"]).split(","))
    report = robustness_sweep(bundles, ctx, k_grid=grid, trials_per_k=cfg["trials"],
                              seed=cfg["seed"], crude_labels=tuple(crude_labels))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_plot_table(sweep_rows(report), out / "sweep.tsv")
    render_sweep(report, out / "sweep.png")
    save_report(sweep_report_to_json(report), out / "report.json")
    for label in bundles:
        means = [report.models[label][k].mean for k in grid]
        print(label, " ".join(f"{m:.4f}" for m in means))
    print(f"wrote sweep report to {out}")
    return 0


def cmd_export_stimuli(args) -> int:
    from .corpus import transplant_pairs
    from .evalsim import EvalContext, export_stimuli
    from .training import load_checkpoint
    defaults = {"checkpoint": "micvae.ckpt", "corpus": "data", "pairs": 24,
                "k-a": 4, "k-b": 0, "seed": 0, "out": "stimuli"}
    cfg = _resolve(args, defaults)
    bundle = load_checkpoint(cfg["checkpoint"])
    corpus, _ = _load_corpus_and_stats(cfg["corpus"])
    ctx = EvalContext(corpus, bundle.stats)
    pairs = transplant_pairs(corpus, cfg["seed"])[:cfg["pairs"]]
    rows = export_stimuli(bundle, ctx, pairs, cfg["out"], k_a=cfg["k-a"],
                          k_b=cfg["k-b"], seed=cfg["seed"])
    print(f"wrote {len(rows)} stimulus triples to {cfg['out']}")
    return 0


def cmd_plot_data(args) -> int:
    from .evalsim.figures import render_refinement, render_sweep
    from .evalsim.report import (load_report, refinement_rows, sweep_report_from_json,
                                 sweep_rows, traces_from_json, write_plot_table)
    defaults = {"report": "reports/sweep/report.json", "out": None}
    cfg = _resolve(args, defaults)
    payload = load_report(cfg["report"])
    out = Path(cfg["out"] or Path(cfg["report"]).parent)
    out.mkdir(parents=True, exist_ok=True)
    if payload.get("kind") == "sweep":
        report = sweep_report_from_json(payload)
        write_plot_table(sweep_rows(report), out / "sweep.tsv")
        render_sweep(report, out / "sweep.png")
    elif payload.get("kind") == "refinement":
        traces = traces_from_json(payload)
        write_plot_table(refinement_rows(traces), out / "refine.tsv")
        render_refinement(traces, out / "refine.png")
    else:
        raise ValueError(f"unknown report kind {payload.get('kind')!r}")
    print(f"re-emitted {payload['kind']} tables and figures to {out}")
    return 0


def cmd_serve(args) -> int:
    from .corpus import load_corpus
    from .service import make_server, serve_forever
    from .training import load_checkpoint
    env_port = os.environ.get("CONTROL_STUDIO_PORT")
    defaults = {"checkpoint": "micvae.ckpt", "corpus": "data",
                "host": "127.0.0.1", "port": int(env_port) if env_port else 8765}
    cfg = _resolve(args, defaults)
    bundle = load_checkpoint(cfg["checkpoint"])
    corpus = load_corpus(cfg["corpus"])
    server = make_server(bundle, corpus, cfg["host"], cfg["port"])
    print(f"serving {bundle.config.family} ({bundle.fingerprint}) "
          f"on http://{cfg['host']}:{server.server_port}", flush=True)
    serve_forever(server)
    return 0


def cmd_inspect_checkpoint(args) -> int:
    from .training import inspect_checkpoint
    report = inspect_checkpoint(args.path)
    dims = report["mi_encoder_dims"]
    print(f"family: {report['family']}")
    print(f"fingerprint: {report['fingerprint']}")
    print(f"scale: {report['scale']}")
    print(f"parameters: {report['parameter_total']}")
    print("mi-encoder dims: " + " ".join(f"{k}={v}" for k, v in dims.items()))
    print(f"encoder parity ratio (masked/mi): {report['encoder_parity_ratio']:.4f}")
    for name, count in report["blobs"].items():
        print(f"  {name}: {count}")
    return 0


# --- argument wiring --------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="control-studio",
        description="sparse prosody control: data, training, evaluation, service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic corpus")
    _add_common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", choices=("desk", "paper"))
    p.add_argument("--out")
    p.add_argument("--sentences", type=int)
    p.add_argument("--speakers", type=int)
    p.add_argument("--styles", type=int)
    p.add_argument("--test-sentences", type=int)
    p.add_argument("--val-sentences", type=int)
    p.add_argument("--renditions-per-test", type=int)
    p.add_argument("--t-min", type=int)
    p.add_argument("--t-max", type=int)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model family")
    _add_common(p)
    p.add_argument("--family", choices=("micvae", "masked", "nocontrol"))
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--policy", choices=("full", "subset"))
    p.add_argument("--subset-p", type=float)
    p.add_argument("--driven-percent", type=float,
                   help="masked family: %% of PAF values provided during training")
    p.add_argument("--scale", choices=("desk", "paper"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-refine", help="iterative-refinement efficiency evaluation")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--crude-checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--pairs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_refine)

    p = sub.add_parser("eval-sweep", help="robustness sweep over K")
    _add_common(p)
    p.add_argument("--models")
    p.add_argument("--checkpoint-dir")
    p.add_argument("--crude-checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--grid")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_sweep)

    p = sub.add_parser("export-stimuli", help="write A/B/reference stimulus files")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--pairs", type=int)
    p.add_argument("--k-a", type=int)
    p.add_argument("--k-b", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_stimuli)

    p = sub.add_parser("plot-data", help="re-emit tables and figures from a report")
    _add_common(p)
    p.add_argument("--report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("serve", help="run the prediction service")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("inspect-checkpoint", help="summarise a checkpoint file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect_checkpoint)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # one-line machine-parsable failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
