"""Command-line front end: gen / train / eval / forecast / scan-bench.

Every run writes a manifest JSON next to its outputs capturing the
command, the effective configuration, the seed, and the artifact paths,
so a run can be reproduced bit-identically in single-threaded mode.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from . import datasets as ds
from . import scan
from .fastweight import FastWeightModel, VariantConfig, beta_coefficients
from .tensor import NumericsError
from .training import (
    MetricsReport,
    TrainConfig,
    WindowSpec,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    seed_stream,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# spelled-out aliases accepted on the command line
VARIANT_ALIASES = {
    "fwp-ungated": "fwp",
    "qfwp": "fwp",
}

GENERATORS = {
    "shm": lambda a: ds.gen_damped_shm(),
    "bessel": lambda a: ds.gen_bessel(),
    "narma5": lambda a: ds.gen_narma(5),
    "narma10": lambda a: ds.gen_narma(10),
    "dqc": lambda a: ds.gen_dqc(),
    "jc": lambda a: ds.gen_jaynes_cummings(),
    "sunspots-synthetic": lambda a: ds.gen_synthetic_sunspots(seed=a.seed),
}


class DataError(RuntimeError):
    pass


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return "unknown"


def write_manifest(out_dir, command, config, seed, outputs):
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "git": _git_describe(),
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": outputs,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    return path


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from exc


def _effective(args, cfg_file, key, default):
    """Flags beat the config file, the config file beats defaults."""
    v = getattr(args, key.replace("-", "_"), None)
    if v is not None:
        return v
    if key in cfg_file:
        return cfg_file[key]
    return default


# --- subcommands ------------------------------------------------------------


def cmd_gen(args):
    if args.dataset not in GENERATORS:
        names = ", ".join(sorted(GENERATORS))
        raise UsageError(f"unknown dataset {args.dataset!r}; valid names: {names}")
    series = GENERATORS[args.dataset](args)
    out = args.out or f"{args.dataset}.csv"
    if args.dataset.startswith("sunspots"):
        ds.write_silso(out, series)
    else:
        ds.write_series_csv(out, series)
    out_dir = os.path.dirname(out) or "."
    write_manifest(out_dir, "gen", {"dataset": args.dataset, "out": out},
                   args.seed, [out])
    print(f"wrote {len(series)} rows to {out}")
    return EXIT_OK


def _resolve_variant(name):
    return VARIANT_ALIASES.get(name, name)


def _read_values(path):
    if not os.path.exists(path):
        raise DataError(f"data file not found: {path}")
    try:
        if path.endswith(".csv"):
            return ds.load_series_csv(path).v
        return ds.load_silso(path).v
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def cmd_train(args):
    cfg_file = _load_config_file(args.config)
    values = _read_values(args.data)
    variant = _resolve_variant(_effective(args, cfg_file, "variant", "gqkan-qkanfwp"))
    n = int(_effective(args, cfg_file, "window", 16))
    h = int(_effective(args, cfg_file, "horizon", 1))
    epochs = int(_effective(args, cfg_file, "epochs", 50))
    lr = float(_effective(args, cfg_file, "lr", 1e-3))
    batch = int(_effective(args, cfg_file, "batch", 4))
    seed = int(_effective(args, cfg_file, "seed", 0))
    solar = h > 1
    dims = {"out_dim": h}
    for key in ("slow_hidden", "slow_latent", "slow_layers",
                "fast_latent", "fast_layers"):
        if key in cfg_file:
            dims[key] = int(cfg_file[key])
    try:
        vcfg = VariantConfig(variant, **dims)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model = FastWeightModel(vcfg)
    tcfg = TrainConfig(
        epochs=epochs, batch_size=batch, learning_rate=lr, seed=seed,
        loss_kind="peak_aware" if solar else "mse",
        splits=(0.8, 0.1, 0.1) if solar else (0.8, 0.0, 0.2),
        norm_range=(0.0, 1.0) if solar else (-1.0, 1.0),
        keep_best_val=solar,
    )
    spec = WindowSpec(n, h)
    try:
        result = train(model, values, spec, tcfg)
    except (ValueError,) as exc:
        raise DataError(str(exc)) from exc
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, "checkpoint.json")
    save_checkpoint(ckpt, vcfg, result.params, result.normalizer, spec,
                    extra={"seed": seed, "epochs": epochs,
                           "final_val": result.history[-1].get("val_loss"),
                           "final_train": result.history[-1]["train_loss"]})
    curve = os.path.join(out_dir, "loss_curve.csv")
    with open(curve, "w") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for row in result.history:
            w.writerow([row["epoch"], repr(row["train_loss"]),
                        repr(row.get("val_loss", ""))])
    write_manifest(out_dir, "train",
                   {"variant": variant, "data": args.data, "window": n,
                    "horizon": h, "epochs": epochs, "lr": lr, "batch": batch,
                    "dims": dims}, seed, [ckpt, curve])
    print(f"checkpoint: {ckpt}")
    print(f"final train loss: {result.history[-1]['train_loss']:.6e}")
    return EXIT_OK


def _windows_for_checkpoint(values, spec, h):
    from .training import make_windows

    solar = h > 1
    splits = (0.8, 0.1, 0.1) if solar else (0.8, 0.0, 0.2)
    return make_windows(values, spec, splits)


def cmd_eval(args):
    vcfg, params, norm, spec, extra = _load_ckpt(args.checkpoint)
    values = _read_values(args.data)
    model = FastWeightModel(vcfg)
    scaled = norm.apply(values)
    tr, va, te = _windows_for_checkpoint(scaled, spec, spec.horizon)
    if len(te) < 1:
        raise DataError("no test windows for this series/window geometry")
    rng = seed_stream(args.seed, "shot-sampling")
    report = evaluate(model, params, te, norm, shots=args.shots, rng=rng)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.json")
    with open(metrics_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    outputs = [metrics_path]
    if args.export_trajectory:
        traj_path = os.path.join(out_dir, "trajectory.csv")
        export_trajectory(model, params, te.x[0], traj_path)
        outputs.append(traj_path)
    write_manifest(out_dir, "eval",
                   {"checkpoint": args.checkpoint, "data": args.data,
                    "shots": args.shots}, args.seed, outputs)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def export_trajectory(model, params, window, path):
    """Per-step gate/state record for one window, plus the convex
    coefficients of the final state as a JSON comment."""
    rec = model.trajectory(params, window)
    gates = rec["gates"]
    deltas = rec["deltas"]
    pre = rec["pre_states"]
    with open(path, "w") as fh:
        if rec["betas"] is not None:
            fh.write("# beta: " + json.dumps([float(b) for b in rec["betas"]]) + "\n")
        fh.write("t,gate,w_inf_norm,delta_inf_norm\n")
        for t in range(len(gates)):
            fh.write(f"{t + 1},{float(gates[t])!r},"
                     f"{float(np.abs(pre[t]).max())!r},"
                     f"{float(np.abs(deltas[t]).max())!r}\n")


def _load_ckpt(path):
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"bad checkpoint: {exc}") from exc


def cmd_forecast(args):
    vcfg, params, norm, spec, extra = _load_ckpt(args.checkpoint)
    series = (ds.load_silso(args.data) if not args.data.endswith(".csv")
              else ds.load_series_csv(args.data))
    if len(series) < spec.n:
        raise DataError(f"need at least {spec.n} records, have {len(series)}")
    model = FastWeightModel(vcfg)
    window = norm.apply(series.v[-spec.n :])[:, None][None]  # [1, N, 1]
    from . import tensor as tt

    with tt.Tape():
        pred = model.forward(tt.Tensor(params), window).data[0]
    raw = np.clip(norm.invert(pred), 0.0, None)
    out = args.out or "forecast.csv"
    with open(out, "w") as fh:
        fh.write("month_ahead,value\n")
        for i, v in enumerate(raw):
            fh.write(f"{i + 1},{float(v)!r}\n")
    out_dir = os.path.dirname(out) or "."
    write_manifest(out_dir, "forecast",
                   {"checkpoint": args.checkpoint, "data": args.data},
                   args.seed, [out])
    print(f"wrote {len(raw)}-step forecast to {out}")
    return EXIT_OK


def cmd_scan_bench(args):
    t_values = [int(v) for v in args.T.split(",")]
    p_values = [int(v) for v in args.p.split(",")]
    rows = scan.scan_bench(t_values, p_values, seed=args.seed)
    out = args.out or "scan_bench.csv"
    with open(out, "w") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "p", "mode", "wall_ns", "compose_count"])
        for r in rows:
            w.writerow([r["T"], r["p"], r["mode"], r["wall_ns"],
                        r["compose_count"]])
    out_dir = os.path.dirname(out) or "."
    write_manifest(out_dir, "scan-bench", {"T": t_values, "p": p_values},
                   args.seed, [out])
    print(f"wrote {len(rows)} timing rows to {out}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------


class UsageError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="gqfwp", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0,
                   help="master seed; named streams derive from it")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("GQFWP_THREADS", "1")),
                   help="worker cap; 1 guarantees bit-reproducibility")
    p.add_argument("--config", default=None,
                   help="JSON config file (flags take precedence)")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a benchmark series file")
    g.add_argument("dataset")
    g.add_argument("--out", default=None)
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train a variant on a series file")
    t.add_argument("--variant", default=None)
    t.add_argument("--data", required=True)
    t.add_argument("-N", "--window", type=int, default=None)
    t.add_argument("-H", "--horizon", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--out-dir", default="run")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="metrics for a checkpoint on a series")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--shots", type=int, default=None)
    e.add_argument("--export-trajectory", action="store_true")
    e.add_argument("--out-dir", default="eval")
    e.set_defaults(fn=cmd_eval)

    f = sub.add_parser("forecast", help="multi-step forecast from the last window")
    f.add_argument("--checkpoint", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--out", default=None)
    f.set_defaults(fn=cmd_forecast)

    b = sub.add_parser("scan-bench", help="sequential vs parallel scan timings")
    b.add_argument("--T", default="4096,65536")
    b.add_argument("--p", default="1,2,4,8")
    b.add_argument("--out", default=None)
    b.set_defaults(fn=cmd_scan_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads > 0:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    # seed override via config file when the flag is left at default
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericsError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
