"""Command-line surface: training, evaluation, decomposition analysis,
synthetic studies, and the gradient-check harness.

Every subcommand writes its fully resolved configuration next to its outputs,
so a run is reproducible from that file alone.  Value precedence is
flag > config file (``--config-file``, flat JSON) > built-in default, and
unknown config-file keys are rejected.  All CSVs are RFC-4180 with a header
row; all JSON is UTF-8.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import decomposition, dft, losses, model, signal_gen, training
from .errors import ConfigError, DataError, DivergenceError, FrednError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# built-in defaults, also the set of keys a config file may provide
_SHARED_DEFAULTS = {
    "lookback": 96,
    "horizon": 96,
    "variant": model.VARIANT_FREDN,
    "loss": losses.FREQ_MAE,
    "batch": 32,
    "lr": 1e-3,
    "epochs": 20,
    "patience": 5,
    "schedule": training.SCHEDULE_TYP1,
    "seed": 2025,
    "d": 8,
    "hidden": 128,
    "depth": 2,
    "dropout": 0.1,
    "ma_window": 25,
    "top_k": None,
    "ett": False,
    "standardize": True,
}


def _add_shared_flags(p):
    p.add_argument("--lookback", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--variant", choices=model.VARIANTS)
    p.add_argument("--loss", choices=losses.LOSS_KINDS)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--schedule", choices=training.SCHEDULES)
    p.add_argument("--seed", type=int)
    p.add_argument("--d", type=int, help="embedding dimension")
    p.add_argument("--hidden", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--ma-window", dest="ma_window", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--ett", action="store_true", default=None,
                   help="use the 6:2:2 chronological split ratio")
    p.add_argument("--no-standardize", dest="standardize",
                   action="store_false", default=None)
    p.add_argument("--config-file", type=Path,
                   help="flat JSON config; flags override its values")
    p.add_argument("--out-dir", type=Path, default=Path("."))


# bookkeeping keys a resolved-config file carries; harmless on re-ingestion
_META_KEYS = {"subcommand", "data", "checkpoint"}


def _resolve(args, defaults):
    """flag > config file > default; unknown file keys are rejected."""
    resolved = dict(defaults)
    if getattr(args, "config_file", None) is not None:
        path = args.config_file
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                file_values = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON ({exc})") from None
        unknown = set(file_values) - set(defaults) - _META_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        resolved.update({k: v for k, v in file_values.items()
                         if k not in _META_KEYS})
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _write_resolved(out_dir, subcommand, resolved, extras=None):
    payload = {"subcommand": subcommand, **resolved, **(extras or {})}
    path = out_dir / "resolved_config.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _train_config(resolved):
    return training.TrainConfig(
        lookback=resolved["lookback"], horizon=resolved["horizon"],
        variant=resolved["variant"], loss=resolved["loss"],
        batch_size=resolved["batch"], lr=resolved["lr"],
        epochs=resolved["epochs"], patience=resolved["patience"],
        schedule=resolved["schedule"], seed=resolved["seed"],
        embed_dim=resolved["d"], hidden_size=resolved["hidden"],
        depth=resolved["depth"], dropout=resolved["dropout"],
        ma_window=resolved["ma_window"], top_k=resolved["top_k"],
        standardize=resolved["standardize"])


# -- train -----------------------------------------------------------------

def cmd_train(args):
    resolved = _resolve(args, _SHARED_DEFAULTS)
    dataset = training.load_csv_dataset(args.data, ett_family=resolved["ett"])
    cfg = _train_config(resolved)
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_resolved(out_dir, "train", resolved, {"data": str(args.data)})

    result = training.train(dataset, cfg)

    scaler = result.standardizer
    extra = {"dataset": dataset.name, "ett": resolved["ett"],
             "loss": cfg.loss, "seed": cfg.seed,
             "scaler": None if scaler is None else
             {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()}}
    model.save_checkpoint(out_dir / "checkpoint.json", result.model_config,
                          result.params, extra=extra)
    _write_csv(out_dir / "history.csv",
               ["epoch", "train_loss", "val_loss", "lr"],
               [[h["epoch"], h["train_loss"], h["val_loss"], h["lr"]]
                for h in result.history])

    _, val_rows, _ = training.chronological_split(dataset)
    if scaler is not None:
        val_rows = scaler.apply(val_rows)
    x_val, y_val = training.make_windows(val_rows, cfg.lookback, cfg.horizon)
    report, _ = training.evaluate(result.params, result.model_config, x_val, y_val)
    report_dict = report.to_dict()
    report_dict["train_seconds"] = result.train_seconds
    report_dict["best_epoch"] = result.best_epoch
    with open(out_dir / "eval_val.json", "w", encoding="utf-8") as fh:
        json.dump(report_dict, fh, indent=2)
    print(f"trained {cfg.variant} for {len(result.history)} epochs "
          f"(best epoch {result.best_epoch}, val {cfg.loss} "
          f"{result.best_val_loss:.6f}); artifacts in {out_dir}")
    return EXIT_OK


# -- eval ------------------------------------------------------------------

def cmd_eval(args):
    resolved = _resolve(args, _SHARED_DEFAULTS)
    mcfg, params, extra = model.load_checkpoint(args.checkpoint)
    dataset = training.load_csv_dataset(
        args.data, ett_family=resolved["ett"] or extra.get("ett", False))
    if dataset.n_channels != mcfg.n_channels:
        raise ConfigError(
            f"checkpoint expects {mcfg.n_channels} channels but "
            f"{args.data} has {dataset.n_channels}")
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_resolved(out_dir, "eval", resolved,
                    {"data": str(args.data), "checkpoint": str(args.checkpoint)})

    _, _, test_rows = training.chronological_split(dataset)
    if extra.get("scaler"):
        scaler = training.Standardizer(np.asarray(extra["scaler"]["mean"]),
                                       np.asarray(extra["scaler"]["std"]))
        test_rows = scaler.apply(test_rows)
    x_test, y_test = training.make_windows(test_rows, mcfg.lookback, mcfg.horizon)
    report, y_hat = training.evaluate(params, mcfg, x_test, y_test)
    report_dict = report.to_dict()
    baseline_mse, baseline_mae = training.repeat_last_metrics(x_test, y_test)
    report_dict["repeat_last_mse"] = baseline_mse
    report_dict["repeat_last_mae"] = baseline_mae
    report_dict["param_groups"] = model.param_count(params)["groups"]
    with open(out_dir / "eval_test.json", "w", encoding="utf-8") as fh:
        json.dump(report_dict, fh, indent=2)
    if args.dump_predictions is not None:
        rows = []
        for w in range(y_hat.shape[0]):
            for c in range(y_hat.shape[1]):
                for t in range(y_hat.shape[2]):
                    rows.append([w, c, t, y_test[w, c, t], y_hat[w, c, t]])
        _write_csv(args.dump_predictions,
                   ["window", "channel", "step", "y", "y_hat"], rows)
    print(f"test mse {report.mse:.6f} mae {report.mae:.6f} "
          f"({report.n_windows} windows); report in {out_dir / 'eval_test.json'}")
    return EXIT_OK


# -- synth -----------------------------------------------------------------

def _parse_season(specs):
    components = []
    for item in specs or []:
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--season wants freq:amplitude:phase, got {item!r}")
        try:
            components.append(tuple(float(p) for p in parts))
        except ValueError:
            raise ConfigError(f"non-numeric --season component {item!r}") from None
    return components


def cmd_synth(args):
    resolved = {
        "len": args.len, "trend_degree": args.trend_degree,
        "trend_knots": args.trend_knots, "trend_amp": args.trend_amp,
        "season": args.season or [], "noise": args.noise, "seed": args.seed,
    }
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_resolved(out_dir, "synth", resolved)
    components = _parse_season(args.season) or [(8.5, 1.0, 0.0)]
    signal = signal_gen.synthesize(
        args.len, seed=args.seed, trend_degree=args.trend_degree,
        knot_count=args.trend_knots, trend_amplitude=args.trend_amp,
        seasonal_components=components, noise_std=args.noise)

    _write_csv(out_dir / "components.csv",
               ["t", "trend", "seasonal", "noise", "composite"],
               [[t, signal.trend[t], signal.seasonal[t], signal.noise[t],
                 signal.composite[t]] for t in range(signal.length)])
    mags = {name: dft.rfft(getattr(signal, name)).magnitudes()
            for name in ("trend", "seasonal", "noise", "composite")}
    bins = len(mags["composite"])
    _write_csv(out_dir / "spectra.csv",
               ["bin", "trend_mag", "seasonal_mag", "noise_mag", "composite_mag"],
               [[k, mags["trend"][k], mags["seasonal"][k], mags["noise"][k],
                 mags["composite"][k]] for k in range(bins)])
    props = signal_gen.spectral_proportions(signal)
    _write_csv(out_dir / "proportions.csv",
               ["bin", "trend_share", "seasonal_share", "noise_share", "zero_energy"],
               [[k, *props.shares[k], int(props.zero_energy[k])]
                for k in range(bins)])
    k_max = min(64, bins - 1)
    exponent = signal_gen.spectral_decay_fit(dft.rfft(signal.trend), 4, k_max)
    _write_csv(out_dir / "trend_decay.csv",
               ["bin", "log_bin", "log_trend_mag", "fitted_exponent"],
               [[k, np.log(k), np.log(max(mags["trend"][k], 1e-300)), exponent]
                for k in range(4, k_max + 1)])
    print(f"synthetic study written to {out_dir} "
          f"(trend decay exponent {exponent:.3f})")
    return EXIT_OK


# -- decompose ---------------------------------------------------------------

def cmd_decompose(args):
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {"method": args.method, "window": args.window, "k": args.k,
                "channel": args.channel, "len": args.len,
                "data": str(args.data),
                "checkpoint": str(args.checkpoint) if args.checkpoint else None}
    _write_resolved(out_dir, "decompose", resolved)
    dataset = training.load_csv_dataset(args.data)
    if not 0 <= args.channel < dataset.n_channels:
        raise ConfigError(f"channel {args.channel} out of range "
                          f"[0, {dataset.n_channels})")
    x = dataset.values[-args.len:, args.channel]
    if len(x) < args.len:
        raise DataError(f"dataset has {len(x)} rows, --len wants {args.len}")

    if args.method == "ma":
        result = decomposition.moving_average_decomp(x, args.window)
    elif args.method == "topk":
        k = args.k or decomposition.default_top_k(len(x))
        result = decomposition.topk_decomp(x, k)
    else:  # fred
        share = _fred_trend_share(args, len(x))
        spec = dft.rfft(x)
        trend_spec = spec.data * share
        result = decomposition.DecompositionResult(
            trend=np.fft.irfft(trend_spec, n=len(x)),
            seasonal=np.fft.irfft(spec.data * (1 - share), n=len(x)),
            method=decomposition.FRED)

    _write_csv(out_dir / "series.csv", ["t", "x", "trend", "seasonal"],
               [[t, x[t], result.trend[t], result.seasonal[t]]
                for t in range(len(x))])
    x_mag = dft.rfft(x).magnitudes()
    trend_mag = dft.rfft(result.trend).magnitudes()
    season_mag = dft.rfft(result.seasonal).magnitudes()
    header = ["bin", "freq", "x_mag", "trend_mag", "seasonal_mag"]
    rows = []
    freqs = np.arange(len(x_mag)) / len(x)
    if args.method == "ma":
        header.append("theory_mag")
        theory = np.abs(decomposition.ma_frequency_response(freqs, args.window))
        for k in range(len(x_mag)):
            rows.append([k, freqs[k], x_mag[k], trend_mag[k], season_mag[k],
                         theory[k]])
    else:
        for k in range(len(x_mag)):
            rows.append([k, freqs[k], x_mag[k], trend_mag[k], season_mag[k]])
    _write_csv(out_dir / "spectrum.csv", header, rows)
    print(f"{args.method} decomposition of channel {args.channel} "
          f"written to {out_dir}")
    return EXIT_OK


def _fred_trend_share(args, length):
    """Per-bin trend share for the analysis view: a trained mask when a
    checkpoint is given, the decay-prior initialization otherwise."""
    if args.checkpoint:
        _, params, _ = model.load_checkpoint(args.checkpoint)
        weights = params["mask"]
        if weights.shape[0] != dft.n_freq(length):
            raise ConfigError(
                f"checkpoint mask covers {weights.shape[0]} bins but --len "
                f"{length} needs {dft.n_freq(length)}")
        return decomposition.DisentanglerMask(weights).trend_share().mean(axis=1)
    mask = decomposition.init_mask(dft.n_freq(length), 1)
    return mask.trend_share()[:, 0]


# -- gradcheck ----------------------------------------------------------------

_GRADCHECK_PRESETS = {
    "tiny": dict(n_channels=2, lookback=16, horizon=8, embed_dim=2,
                 hidden_size=8, depth=2, dropout=0.0, ma_window=5),
}


def cmd_gradcheck(args):
    if args.config not in _GRADCHECK_PRESETS:
        raise ConfigError(f"unknown gradcheck config {args.config!r}; "
                          f"choose from {sorted(_GRADCHECK_PRESETS)}")
    dims = _GRADCHECK_PRESETS[args.config]
    variants = [args.variant] if args.variant else list(model.VARIANTS)
    loss_kinds = [args.loss] if args.loss else list(losses.LOSS_KINDS)
    failed = False
    for variant in variants:
        config = model.ModelConfig(variant=variant, **dims)
        report = model.gradient_check(config, loss_kinds=loss_kinds,
                                      seed=args.seed or 0)
        for kind, per_param in report.items():
            groups = {}
            for name, err in per_param.items():
                group = name.split(".")[0]
                groups[group] = max(groups.get(group, 0.0), err)
            worst = max(per_param.values())
            status = "ok" if worst < args.tol else "FAIL"
            if worst >= args.tol:
                failed = True
            detail = " ".join(f"{g}={e:.2e}" for g, e in sorted(groups.items()))
            print(f"{variant:>14} {kind:>9}: worst {worst:.3e} [{status}] {detail}")
    if failed:
        print(f"gradient check FAILED at tolerance {args.tol}")
        return EXIT_DIVERGED
    print(f"all gradients match finite differences within {args.tol}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="fredn",
                     description="frequency-disentangled forecasting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model on a CSV dataset")
    p_train.add_argument("--data", type=Path, required=True)
    _add_shared_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--data", type=Path, required=True)
    p_eval.add_argument("--dump-predictions", type=Path)
    _add_shared_flags(p_eval)

    p_synth = sub.add_parser("synth", help="generate the entanglement study data")
    p_synth.add_argument("--len", type=int, default=720)
    p_synth.add_argument("--trend-degree", type=int, default=3)
    p_synth.add_argument("--trend-knots", type=int, default=8)
    p_synth.add_argument("--trend-amp", type=float, default=1.0)
    p_synth.add_argument("--season", action="append",
                         help="freq:amplitude:phase, repeatable")
    p_synth.add_argument("--noise", type=float, default=0.1)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--out-dir", type=Path, default=Path("."))

    p_dec = sub.add_parser("decompose", help="trend/season split of one channel")
    p_dec.add_argument("--method", choices=("ma", "topk", "fred"), required=True)
    p_dec.add_argument("--data", type=Path, required=True)
    p_dec.add_argument("--window", type=int, default=25)
    p_dec.add_argument("--k", type=int)
    p_dec.add_argument("--channel", type=int, default=0)
    p_dec.add_argument("--len", type=int, default=720)
    p_dec.add_argument("--checkpoint", type=Path)
    p_dec.add_argument("--out-dir", type=Path, default=Path("."))

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_gc.add_argument("--config", default="tiny")
    p_gc.add_argument("--variant", choices=model.VARIANTS)
    p_gc.add_argument("--loss", choices=losses.LOSS_KINDS)
    p_gc.add_argument("--tol", type=float, default=1e-4)
    p_gc.add_argument("--seed", type=int)

    return parser


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FrednError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
