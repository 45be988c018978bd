"""``pgfoil`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from pgfoil import __version__
from pgfoil import checkpoint
from pgfoil import dataset as ds
from pgfoil.airfoil import NacaCode, distortion, naca4, read_dat, savgol_smooth, unflatten, write_dat
from pgfoil.cae.base import batch_evaluate
from pgfoil.config import Config, ConfigError
from pgfoil.eval import compare_models, evaluate_generator, scatter_export, write_report
from pgfoil.training import TrainingDiverged, TrainState, pg_train_approx, pg_train_exact, pretrain
from pgfoil.training.loops import CHECKPOINT_NAME

log = logging.getLogger("pgfoil")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--seed", type=int, help="seed for all randomness (run.seed)")
    p.add_argument("--parallel", type=int, help="concurrent oracle evaluations (run.parallel)")
    p.add_argument("--oracle", choices=["panel", "xfoil"], help="oracle.kind")
    p.add_argument("--xfoil", help="XFoil executable (oracle.xfoil.path)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pgfoil", description="Physics-guided conditional WGAN for airfoil inverse design.")
    parser.add_argument("--version", action="version", version=f"pgfoil {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("dataset", help="build or inspect the labeled NACA dataset")
    p.add_argument("action", choices=["build", "info"])
    p.add_argument("--out", help="output directory (build)")
    p.add_argument("--data", help="dataset directory (info)")
    p.add_argument("--limit", type=int, help="only the first N codes (smoke runs)")
    p.add_argument("--bins", type=int, default=20)
    _common(p)

    p = sub.add_parser("pretrain", help="conditional WGAN-gp pretraining on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, help="train.pretrain_iters")
    p.add_argument("--resume", action="store_true", help="continue from OUT/state.ckpt")
    _common(p)

    p = sub.add_parser("pgtrain", help="physics-guided fine-tuning from a pretrained checkpoint")
    p.add_argument("--mode", choices=["exact", "approx"], required=True)
    p.add_argument("--from", dest="source", required=True, help="checkpoint to start from")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="control labels, comma separated (train.control_labels)")
    p.add_argument("--smooth", action="store_true", help="enable the distortion penalty (train.lambda_phi = 1)")
    p.add_argument("--resume", action="store_true", help="continue from OUT/state.ckpt")
    _common(p)

    p = sub.add_parser("sample", help="generate shapes for one label and evaluate them")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--label", type=float, required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("smooth", help="Savitzky-Golay smoothing with distortion and C_L before/after")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="write the smoothed shape here")
    p.add_argument("--window", type=int, help="smooth.window")
    p.add_argument("--order", type=int, help="smooth.order")
    _common(p)

    p = sub.add_parser("eval", help="success rate, MAE and distortion of a checkpoint")
    p.add_argument("--from", dest="source", action="append", required=True,
                   help="checkpoint; repeat (optionally NAME=PATH) to build a comparison table")
    p.add_argument("--n", type=int, help="eval.n")
    p.add_argument("--range", dest="label_range", help="eval.range, lo:hi or a comma list")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("oracle", help="evaluate a single shape")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--naca", help="four-digit code, e.g. 2412")
    g.add_argument("--in", dest="infile", help="airfoil text file")
    p.add_argument("--alpha", type=float, help="oracle.alpha_deg")
    _common(p)
    return parser


# subcommand flags that are shorthands for config keys
FLAG_KEYS = {
    "pretrain": {"iters": "train.pretrain_iters"},
    "pgtrain": {"labels": "train.control_labels"},
    "eval": {"n": "eval.n", "label_range": "eval.range"},
    "oracle": {"alpha": "oracle.alpha_deg"},
    "smooth": {"window": "smooth.window", "order": "smooth.order"},
}


def _config(args) -> Config:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    flags = {"run.seed": args.seed, "run.parallel": args.parallel, "oracle.kind": args.oracle,
             "oracle.xfoil.path": args.xfoil}
    for attr, key in FLAG_KEYS.get(args.command, {}).items():
        flags[key] = getattr(args, attr)
    if args.command == "pgtrain" and args.smooth:
        flags["train.lambda_phi"] = 1.0
    overrides.update({k: str(v) for k, v in flags.items() if v is not None})
    try:
        cfg = Config.load(args.config, overrides)
        if cfg["run.parallel"] < 1:
            raise ConfigError("run.parallel must be >= 1")
        return cfg
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _train_config(cfg: Config):
    try:
        return cfg.train_config()
    except ValueError as exc:
        raise UsageError(f"invalid training config: {exc}") from None


def _load_state(path) -> TrainState:
    try:
        return TrainState.load(path)
    except FileNotFoundError:
        raise RuntimeError(f"checkpoint not found: {path}") from None
    except checkpoint.CheckpointError as exc:
        raise RuntimeError(f"{path}: {exc}") from None


def cmd_dataset(args, cfg: Config) -> int:
    if args.action == "build":
        if not args.out:
            raise UsageError("dataset build needs --out")
        codes = ds.enumerate_naca()
        if args.limit is not None:
            codes = codes[:args.limit]
        data = ds.build_dataset(cfg.oracle(), cfg.flow_conditions(), cfg["run.parallel"], codes, cfg["run.seed"])
        ds.save(data, args.out)
        cfg.write(args.out, __version__)
        m = data.manifest
        print(f"attempted {m.attempted}  converged {m.converged}  filtered {m.filtered}  retained {m.retained}")
        for reason, count in sorted(data.not_converged.items()):
            print(f"  not converged ({reason}): {count}")
        return EXIT_OK
    if not args.data:
        raise UsageError("dataset info needs --data")
    data = ds.load(args.data)
    m = data.manifest
    print(f"oracle {m.oracle}  retained {m.retained} of {m.attempted}  (converged {m.converged}, "
          f"filtered {m.filtered})")
    edges = np.linspace(ds.CL_MIN, ds.CL_MAX, args.bins + 1)
    for lo, hi, c in zip(edges[:-1], edges[1:], ds.histogram(data, args.bins)):
        print(f"  [{lo:5.2f}, {hi:5.2f})  {c}")
    return EXIT_OK


def cmd_pretrain(args, cfg: Config) -> int:
    tcfg = _train_config(cfg)
    data = ds.load(args.data)
    out = Path(args.out)
    state = _load_state(out / CHECKPOINT_NAME) if args.resume else None
    cfg.write(out, __version__)
    state = pretrain(data, tcfg, state=state, out_dir=out)
    print(f"pretrained {state.total_iterations} generator updates -> {out / CHECKPOINT_NAME}")
    return EXIT_OK


def cmd_pgtrain(args, cfg: Config) -> int:
    tcfg = _train_config(cfg)
    out = Path(args.out)
    state = _load_state(out / CHECKPOINT_NAME if args.resume else args.source)
    cfg.write(out, __version__)
    loop = pg_train_exact if args.mode == "exact" else pg_train_approx
    state = loop(state, cfg.oracle(), tcfg, cfg.flow_conditions(), out_dir=out)
    print(f"{args.mode}: {state.total_iterations} generator updates, {state.oracle_calls} oracle calls "
          f"-> {out / CHECKPOINT_NAME}")
    return EXIT_OK


def cmd_sample(args, cfg: Config) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    state = _load_state(args.source)
    out = Path(args.out)
    cfg.write(out, __version__)
    rng = np.random.default_rng(cfg["run.seed"])
    z = state.latent.sample(rng, args.n)
    shapes = state.generate(z, np.full(args.n, args.label))
    oracle, cond = cfg.oracle(), cfg.flow_conditions()
    foils = [unflatten(s, name=f"sample {i:03d} target C_L {args.label:g}") for i, s in enumerate(shapes)]
    results = batch_evaluate(foils, cond, oracle, cfg["run.parallel"])
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "target_cl", "cl", "status", "phi"])
        for i, (foil, r) in enumerate(zip(foils, results)):
            name = f"sample_{i:03d}.dat"
            write_dat(out / name, foil)
            w.writerow([name, repr(args.label), "" if r.cl is None else repr(r.cl),
                        "converged" if r.converged else r.reason, repr(_safe_phi(foil))])
    ok = sum(r.converged for r in results)
    print(f"wrote {args.n} shapes to {out} ({ok} converged)")
    return EXIT_OK


def _safe_phi(foil) -> float:
    try:
        return distortion(foil)
    except ValueError:
        return float("nan")


def _describe(result) -> str:
    return f"C_L = {result.cl:.6f}" if result.converged else f"not converged ({result.reason})"


def cmd_smooth(args, cfg: Config) -> int:
    try:
        before = read_dat(args.infile)
    except (OSError, ValueError) as exc:
        raise RuntimeError(f"cannot read {args.infile}: {exc}") from None
    try:
        after = savgol_smooth(before, cfg["smooth.window"], cfg["smooth.order"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    oracle, cond = cfg.oracle(), cfg.flow_conditions()
    r0, r1 = oracle.evaluate(before, cond), oracle.evaluate(after, cond)
    p0, p1 = _safe_phi(before), _safe_phi(after)
    print(f"before: phi = {p0 / np.pi:.4f} pi  {_describe(r0)}")
    print(f"after:  phi = {p1 / np.pi:.4f} pi  {_describe(r1)}")
    if r0.converged and r1.converged:
        print(f"C_L change: {r1.cl - r0.cl:+.6f}")
    if args.out:
        write_dat(args.out, after, name=f"{before.name} smoothed".strip())
    return EXIT_OK


def cmd_eval(args, cfg: Config) -> int:
    out = Path(args.out)
    cfg.write(out, __version__)
    named = []
    for i, item in enumerate(args.source):
        name, _, path = item.partition("=") if "=" in item else (Path(item).stem, "", item)
        named.append((name or f"model{i}", path))
    oracle, cond = cfg.oracle(), cfg.flow_conditions()
    reports = []
    for name, path in named:
        state = _load_state(path)
        report = evaluate_generator(state, cfg.eval_labels(), cfg["eval.n"], oracle, cond, cfg["run.seed"],
                                    threshold=cfg["eval.threshold"], parallel=cfg["run.parallel"])
        target = out / name if len(named) > 1 else out
        write_report(report, target)
        scatter_export(report, target / "scatter.csv")
        reports.append((name, report))
        print(f"== {name}\n{report.summary()}", end="")
    compare_models(reports, out / "comparison")
    return EXIT_OK


def cmd_oracle(args, cfg: Config) -> int:
    if args.naca:
        try:
            shape = naca4(NacaCode.parse(args.naca))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        try:
            shape = read_dat(args.infile)
        except (OSError, ValueError) as exc:
            raise RuntimeError(f"cannot read {args.infile}: {exc}") from None
    result = cfg.oracle().evaluate(shape, cfg.flow_conditions())
    print(f"{shape.name or args.infile}: alpha = {cfg['oracle.alpha_deg']:g} deg  {_describe(result)}")
    return EXIT_OK


COMMANDS = {"dataset": cmd_dataset, "pretrain": cmd_pretrain, "pgtrain": cmd_pgtrain, "sample": cmd_sample,
            "smooth": cmd_smooth, "eval": cmd_eval, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
