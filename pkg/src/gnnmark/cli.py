"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.  Diagnostics
go to stderr; machine-readable output goes to files under ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, io
from .experiment import (ConfigError, Layout, calibration_run, embed_model, full_experiment, load_bundle, load_config,
                         load_data, load_model_file, load_wm_queries, make_data, make_watermark, parse_override,
                         render_report, resolve_threshold, root_stream, sweep_r, train_clean)
from .nn.model import save_model
from .robustness import ATTACKS, save_curve, sweep
from .serving import RemoteModel, serve
from .verification import LocalModel, save_verdict, verify_ownership
from .watermark import save_secret, save_wm_dataset

log = logging.getLogger("gnnmark")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file or bundled name (default, node)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. verification.K=3 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnnmark", description="Backdoor watermarking for graph neural networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    _common(p)

    p = sub.add_parser("train-clean", help="train a clean model")
    _common(p)
    p.add_argument("--index", type=int, default=0, help="model index (selects the seed stream)")

    p = sub.add_parser("embed", help="generate watermark data and embed it into a clean model")
    _common(p)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--clean-model", help="clean model file (default: models/clean-<index>.json)")
    p.add_argument("--secret", help="where to write the secret (default: <out>/secret.json)")

    p = sub.add_parser("calibrate", help="train K clean and K watermarked models and calibrate the threshold")
    _common(p)
    p.add_argument("--save-models", action="store_true")

    p = sub.add_parser("verify", help="verify ownership of a suspect model")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="local suspect model file (default: models/wm-00.json)")
    src.add_argument("--endpoint", help="served suspect: tcp://host:port")
    p.add_argument("--wm-data", help="watermark query file (default: <out>/wm_data.*)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--verdict", help="verdict output file (default: <out>/verdict.json)")

    p = sub.add_parser("attack", help="run one attack over a parameter grid")
    _common(p)
    p.add_argument("--kind", required=True, choices=ATTACKS)
    p.add_argument("--grid", help="comma-separated parameter values (default: from config)")
    p.add_argument("--model", help="attacked model (default: models/wm-00.json)")

    p = sub.add_parser("sweep", help="watermark accuracy as a function of the watermarking rate r")
    _common(p)

    p = sub.add_parser("serve", help="serve a model's labels over newline-delimited JSON")
    _common(p)
    p.add_argument("--model", help="model file (default: models/wm-00.json)")
    p.add_argument("--endpoint", default="stdio", help="stdio or tcp://host:port (default: stdio)")

    p = sub.add_parser("report", help="render a human-readable summary of the run directory")
    _common(p)

    p = sub.add_parser("experiment", help="run every stage and write a manifest")
    _common(p)
    return parser


def _config(args):
    overrides = dict(parse_override(s) for s in args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    return load_config(args.config, overrides)


def _grid(text: str, kind: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("grid", f"not a comma-separated list of numbers: {text!r}") from None
    return [int(v) for v in vals] if kind in ("fine_tune", "distill") else vals


def cmd_gen_data(args, cfg, layout):
    if cfg.data.path:
        raise ConfigError("data.path", "gen-data writes a synthetic dataset; unset data.path")
    layout.root.mkdir(parents=True, exist_ok=True)
    io.save_dataset(make_data(cfg), layout.dataset)
    log.info("wrote %s", layout.dataset)


def cmd_train_clean(args, cfg, layout):
    data = load_data(cfg, layout)
    path = layout.clean_model(args.index)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(train_clean(cfg, data, args.index), path)
    log.info("wrote %s", path)


def cmd_embed(args, cfg, layout):
    clean_path = Path(args.clean_model) if args.clean_model else layout.clean_model(args.index)
    clean = load_model_file(clean_path, "clean_model")
    data = load_data(cfg, layout)
    bundle = make_watermark(cfg, data)
    secret_path = Path(args.secret) if args.secret else layout.secret
    secret_path.parent.mkdir(parents=True, exist_ok=True)
    save_secret(bundle.secret, secret_path)
    save_wm_dataset(bundle.d_wm, layout.wm_data)
    out = layout.wm_model(args.index)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(embed_model(cfg, clean, bundle, args.index), out)
    log.info("wrote %s, %s and %s", secret_path, layout.wm_data, out)


def cmd_calibrate(args, cfg, layout):
    data = load_data(cfg, layout)
    bundle = load_bundle(cfg, layout, data)
    c = calibration_run(cfg, data, bundle, layout, save_models=args.save_models)
    layout.root.mkdir(parents=True, exist_ok=True)
    io.write_json(layout.calibration, c.to_obj())
    log.info("t = %s, reject H0: %s, threshold: %s", c.t_test.t, c.t_test.reject_h0, c.threshold)
    return c


def cmd_verify(args, cfg, layout):
    d = load_wm_queries(cfg, layout, args.wm_data)
    try:
        thr, source = resolve_threshold(cfg, layout, args.threshold)
    except LookupError:
        log.info("no threshold stored; calibrating on %d model pairs", cfg.verification.K)
        c = cmd_calibrate(argparse.Namespace(save_models=False), cfg, layout)
        if c.threshold is None:
            raise RuntimeError(f"calibration infeasible: {c.infeasible}")
        thr, source = c.threshold, "calibration"
    log.info("threshold %.6f (from %s)", thr, source)
    if args.endpoint:
        with RemoteModel.connect(args.endpoint) as suspect:
            verdict = verify_ownership(suspect, d, thr)
    else:
        path = Path(args.model) if args.model else layout.wm_model(0)
        verdict = verify_ownership(LocalModel(load_model_file(path, "model")), d, thr)
    out = Path(args.verdict) if args.verdict else layout.root / "verdict.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_verdict(verdict, out)
    log.info("watermark accuracy %.4f -> %s", verdict.accuracy, verdict.decision)


def cmd_attack(args, cfg, layout):
    grid = _grid(args.grid, args.kind) if args.grid else getattr(cfg.attacks, args.kind)
    model = load_model_file(Path(args.model) if args.model else layout.wm_model(0), "model")
    data = load_data(cfg, layout)
    bundle = load_bundle(cfg, layout, data)
    d = load_wm_queries(cfg, layout)
    curve = sweep(args.kind, model, grid, bundle.eval_data, d, root_stream(cfg).child("attacks").child(args.kind),
                  cfg.attacks.attack_config())
    out = layout.curve(args.kind)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_curve(curve, out)
    log.info("wrote %s", out)


def cmd_sweep(args, cfg, layout):
    data = load_data(cfg, layout)
    clean = [load_model_file(layout.clean_model(k), "clean_model") if layout.clean_model(k).is_file()
             else train_clean(cfg, data, k) for k in range(cfg.sweep.models)]
    io.write_json(layout.sweep, sweep_r(cfg, data, clean))
    log.info("wrote %s", layout.sweep)


def cmd_serve(args, cfg, layout):
    model = load_model_file(Path(args.model) if args.model else layout.wm_model(0), "model")
    serve(model, args.endpoint)


def cmd_report(args, cfg, layout):
    if not layout.root.is_dir():
        raise ConfigError("out", f"run directory not found: {layout.root}")
    layout.report.write_text(render_report(cfg, layout))
    log.info("wrote %s", layout.report)


def cmd_experiment(args, cfg, layout):
    manifest = full_experiment(cfg)
    log.info("completed stages: %s", ", ".join(manifest["stages_completed"]))


COMMANDS = {"gen-data": cmd_gen_data, "train-clean": cmd_train_clean, "embed": cmd_embed,
            "calibrate": cmd_calibrate, "verify": cmd_verify, "attack": cmd_attack, "sweep": cmd_sweep,
            "serve": cmd_serve, "report": cmd_report, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg, Layout(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except io.FormatError as exc:
        print(f"bad input file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        log.debug("traceback", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
