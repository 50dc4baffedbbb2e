"""Command-line entry point.

Subcommands: synth | kselect | train | forecast | evaluate | bench.
Every command requires an explicit --seed; reruns with the same seed and
inputs produce byte-identical output files. Exit codes: 0 success, 1 usage
or configuration error, 2 data error, 3 numeric/training error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bias import BetaSchedule, BiasSpec, compute_population_means, kmeans_fit, silhouette_select_k
from .data import (
    PanelDataset,
    PanelSchema,
    SynthSpec,
    gen_synthetic,
    hot_deck_impute,
    load_panel_csv,
    train_val_split,
    truncate_entities,
    write_panel_csv,
    write_truth_sidecar,
)
from .evaluate import compare_reports, emit_outputs, horizon_mae
from .exceptions import ConfigError, DataError, HorizoncastError, TrainingError
from .models import (
    ForecastResult,
    Model1Config,
    Model2Config,
    forecast_dataset,
    forecast_persistence,
    load_forecaster,
    save_forecaster,
    train_model1,
    train_model2,
    train_univariate,
    transform_dataset,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3

BENCH_EPOCHS = 150
BENCH_LR = 0.001


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the spec wants exit 1
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    options: dict

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _csv_names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def parse_schedule(text: str) -> BetaSchedule:
    kind, _, arg = text.partition(":")
    if kind == "step":
        if not arg:
            raise ConfigError("step schedule needs a threshold, e.g. step:20")
        return BetaSchedule.step_at(int(arg))
    if kind == "reciprocal":
        return BetaSchedule.reciprocal()
    if kind == "constant":
        if not arg:
            raise ConfigError("constant schedule needs a value, e.g. constant:0.5")
        return BetaSchedule.constant(float(arg))
    raise ConfigError(f"unknown schedule {text!r}; use step:T, reciprocal, or constant:V")


# Per-command option table: dest -> (add_argument kwargs, default).
# Defaults of None marked "model-dependent" are resolved after parsing.
def _build_parser() -> _Parser:
    parser = _Parser(prog="horizoncast", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_common(p):
        p.add_argument("--seed", type=int, help="master RNG seed (required)")
        p.add_argument("--config", type=str, help="JSON config file; flags override its keys")

    def add_data_opts(p):
        p.add_argument("--data", type=str, help="panel CSV path")
        p.add_argument("--target", type=str, help="name of the target column")
        p.add_argument("--drop-time-index", dest="drop_time_index", type=str,
                       help="comma-separated time indices to drop at load")
        p.add_argument("--forward-fill", dest="forward_fill", type=str,
                       help="comma-separated columns to forward-fill within entities")
        p.add_argument("--uniform-spacing", dest="uniform_spacing", action="store_true",
                       default=None, help="require uniform time spacing per entity")

    p = sub.add_parser("synth", description="Write a synthetic panel CSV plus a prototype sidecar.")
    add_common(p)
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--entities", type=int)
    p.add_argument("--features", type=int)
    p.add_argument("--length", type=int, help="observations per entity")
    p.add_argument("--prototypes", type=int)
    p.add_argument("--reversion", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--prototype-spread", dest="prototype_spread", type=float)
    p.add_argument("--initial-spread", dest="initial_spread", type=float)
    p.add_argument("--target-noise-scale", dest="target_noise_scale", type=float)

    p = sub.add_parser("kselect", description="Print silhouette scores per K and the chosen K.")
    add_common(p)
    add_data_opts(p)
    p.add_argument("--k-candidates", dest="k_candidates", type=str)
    p.add_argument("--difference", action="store_true", default=None)
    p.add_argument("--no-standardize", dest="no_standardize", action="store_true", default=None)
    p.add_argument("--out", type=str, help="optional output directory for kselect.json")

    p = sub.add_parser("train", description="Train a forecaster and write its model document.")
    add_common(p)
    add_data_opts(p)
    p.add_argument("--out", type=str)
    p.add_argument("--model", type=str, choices=["model1", "model2", "univariate"])
    p.add_argument("--bias", type=str,
                   choices=["none", "hold", "population", "cluster-hard", "cluster-interpolated"])
    p.add_argument("--schedule", type=str, help="beta schedule: step:T | reciprocal | constant:V")
    p.add_argument("--k", type=int, help="cluster count for cluster bias modes")
    p.add_argument("--kselect", action="store_true", default=None,
                   help="pick K by silhouette over --k-candidates")
    p.add_argument("--k-candidates", dest="k_candidates", type=str)
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--target-replication", dest="target_replication", type=float,
                   help="alpha for target replication loss (omit to disable)")
    p.add_argument("--outer-alpha", dest="outer_alpha", type=float)
    p.add_argument("--feature-alphas", dest="feature_alphas", type=str,
                   help="comma-separated weights, one per column")
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--difference", action="store_true", default=None)
    p.add_argument("--no-standardize", dest="no_standardize", action="store_true", default=None)
    p.add_argument("--standard-output-gate", dest="standard_output_gate", action="store_true",
                   default=None, help="use h = o * tanh(c) instead of the default tanh(o * c)")
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--warmup", type=str, choices=["full", "last"])

    p = sub.add_parser("forecast", description="Roll a trained model forward and write forecasts.csv.")
    add_common(p)
    add_data_opts(p)
    p.add_argument("--out", type=str)
    p.add_argument("--model-file", dest="model_file", type=str)
    p.add_argument("--horizon", type=int)
    p.add_argument("--warmup", type=str, choices=["full", "last"])

    p = sub.add_parser("evaluate", description="Score forecast CSVs against a truth panel.")
    add_common(p)
    add_data_opts(p)
    p.add_argument("--out", type=str)
    p.add_argument("--forecast", action="append", dest="forecast",
                   help="label=path of a forecasts.csv; repeatable, first is the baseline")

    p = sub.add_parser("bench", description="End-to-end synthetic benchmark: "
                       "synth, train, roll out the bias roster, evaluate.")
    add_common(p)
    p.add_argument("--out", type=str)
    p.add_argument("--entities", type=int)
    p.add_argument("--features", type=int)
    p.add_argument("--prototypes", type=int)
    p.add_argument("--train-length", dest="train_length", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--reversion", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--test-obs", dest="test_obs", type=int,
                   help="observed prefix length for held-out entities "
                        "(default: train-length minus horizon)")
    p.add_argument("--include-univariate", dest="include_univariate", action="store_true", default=None)
    return parser


_DEFAULTS: dict[str, dict] = {
    "synth": {
        "out": None, "entities": 200, "features": 4, "length": 30, "prototypes": 3,
        "reversion": 0.15, "noise": 0.1, "prototype_spread": 3.0, "initial_spread": 1.0,
        "target_noise_scale": 0.25,
    },
    "kselect": {
        "data": None, "target": None, "drop_time_index": "", "forward_fill": "",
        "uniform_spacing": False, "k_candidates": "2,3,4", "difference": False,
        "no_standardize": False, "out": None,
    },
    "train": {
        "data": None, "target": None, "out": None, "model": "model1", "bias": "hold",
        "schedule": "reciprocal", "k": 3, "kselect": False, "k_candidates": "2,3,4",
        "hidden": 64, "layers": 2, "lr": None, "epochs": 500, "target_replication": None,
        "outer_alpha": 0.5, "feature_alphas": None, "val_fraction": 0.2, "difference": False,
        "no_standardize": False, "standard_output_gate": False, "clip_norm": 5.0,
        "warmup": "full", "drop_time_index": "", "forward_fill": "", "uniform_spacing": False,
    },
    "forecast": {
        "data": None, "target": None, "out": None, "model_file": None, "horizon": None,
        "warmup": "full", "drop_time_index": "", "forward_fill": "", "uniform_spacing": False,
    },
    "evaluate": {
        "data": None, "target": None, "out": None, "forecast": None,
        "drop_time_index": "", "forward_fill": "", "uniform_spacing": False,
    },
    "bench": {
        "out": None, "entities": 200, "features": 4, "prototypes": 3, "train_length": 30,
        "horizon": 24, "noise": 0.1, "reversion": 0.15, "epochs": BENCH_EPOCHS, "hidden": 64,
        "layers": 2, "lr": BENCH_LR, "k": 3, "val_fraction": 0.2, "test_obs": None,
        "include_univariate": False,
    },
}

_REQUIRED: dict[str, tuple[str, ...]] = {
    "synth": ("out",),
    "kselect": ("data", "target"),
    "train": ("data", "target", "out"),
    "forecast": ("data", "target", "out", "model_file", "horizon"),
    "evaluate": ("data", "target", "out", "forecast"),
    "bench": ("out",),
}


def parse_config(argv) -> RunConfig:
    """Parse argv (plus an optional JSON config file) into a resolved RunConfig."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required: synth | kselect | train | forecast | evaluate | bench")
    defaults = dict(_DEFAULTS[ns.command])
    file_cfg = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        known = set(defaults) | {"seed"}
        for key in file_cfg:
            if key not in known:
                raise UsageError(f"unknown config key {key!r} for command {ns.command}")
    options = {}
    cli = vars(ns)
    for key, default in defaults.items():
        value = cli.get(key)
        if value is None:
            value = file_cfg.get(key, default)
        options[key] = value
    seed = cli.get("seed")
    if seed is None:
        seed = file_cfg.get("seed")
    if seed is None:
        raise UsageError("--seed is required (no wall-clock seeding)")
    options["seed"] = int(seed)
    for key in _REQUIRED[ns.command]:
        if options.get(key) in (None, []):
            raise UsageError(f"--{key.replace('_', '-')} is required for {ns.command}")
    return RunConfig(command=ns.command, options=options)


def _write_resolved(cfg: RunConfig, out_dir: Path) -> None:
    doc = {"command": cfg.command}
    for key, value in cfg.options.items():
        doc[key] = list(value) if isinstance(value, tuple) else value
    with open(out_dir / "resolved_config.json", "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _schema(cfg: RunConfig) -> PanelSchema:
    return PanelSchema(
        target=cfg.target,
        drop_time_indices=_csv_ints(cfg.drop_time_index or ""),
        forward_fill_columns=_csv_names(cfg.forward_fill or ""),
        require_uniform_spacing=bool(cfg.uniform_spacing),
    )


def _load_complete(cfg: RunConfig) -> PanelDataset:
    dataset = load_panel_csv(cfg.data, _schema(cfg))
    if dataset.has_missing():
        dataset = hot_deck_impute(dataset, seed=cfg.seed)
    return dataset


def _fmt(x: float) -> str:
    return repr(float(x))


def write_forecast_csv(results: list[ForecastResult], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("entity_id,horizon_step,time_index,prediction\n")
        for r in results:
            for s in range(r.horizon):
                fh.write(f"{r.entity_id},{s + 1},{int(r.times[s])},{_fmt(r.values[s])}\n")


def read_forecast_csv(path) -> list[ForecastResult]:
    import csv as _csv

    groups: dict[str, list[tuple[int, int, float]]] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = _csv.DictReader(fh)
        needed = {"entity_id", "horizon_step", "time_index", "prediction"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise DataError(f"{path}: forecast CSV needs columns {sorted(needed)}")
        for row in reader:
            groups.setdefault(row["entity_id"], []).append(
                (int(row["horizon_step"]), int(row["time_index"]), float(row["prediction"]))
            )
    results = []
    for entity_id, items in groups.items():
        items.sort(key=lambda it: it[0])
        results.append(
            ForecastResult(
                entity_id=entity_id,
                values=np.array([v for _, _, v in items]),
                times=np.array([t for _, t, _ in items], dtype=np.int64),
            )
        )
    return results


def _write_training_log(log, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("epoch,train_loss,val_mae\n")
        for epoch, train_loss, val_mae in log:
            fh.write(f"{epoch},{_fmt(train_loss)},{_fmt(val_mae)}\n")


# ---------------------------------------------------------------------------
# Command bodies
# ---------------------------------------------------------------------------

def _cmd_synth(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(
        n_entities=cfg.entities,
        n_features=cfg.features,
        seq_len=cfg.length,
        n_prototypes=cfg.prototypes,
        reversion_rate=cfg.reversion,
        noise_sigma=cfg.noise,
        seed=cfg.seed,
        prototype_spread=cfg.prototype_spread,
        initial_spread=cfg.initial_spread,
        target_noise_scale=cfg.target_noise_scale,
    )
    dataset, assignment = gen_synthetic(spec)
    write_panel_csv(dataset, out / "data.csv")
    write_truth_sidecar(dataset, assignment, out / "truth.csv")
    _write_resolved(cfg, out)
    print(f"wrote {dataset.n_entities} entities x {cfg.length} steps to {out / 'data.csv'}")
    return EXIT_OK


def _kselect_rows(cfg: RunConfig, dataset: PanelDataset) -> np.ndarray:
    from .data import difference_apply, standardize_apply, standardize_fit

    work = difference_apply(dataset) if cfg.difference else dataset
    if not cfg.no_standardize:
        work = standardize_apply(work, standardize_fit(work))
    return work.all_rows()


def _cmd_kselect(cfg: RunConfig) -> int:
    dataset = _load_complete(cfg)
    rows = _kselect_rows(cfg, dataset)
    candidates = _csv_ints(cfg.k_candidates)
    best, scores = silhouette_select_k(rows, candidates, seed=cfg.seed)
    for k in sorted(scores):
        print(f"K={k} silhouette={scores[k]:.6f}")
    print(f"chosen K={best}")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "kselect.json", "w") as fh:
            json.dump(
                {"chosen_k": best, "scores": {str(k): scores[k] for k in sorted(scores)}},
                fh, sort_keys=True, indent=2,
            )
            fh.write("\n")
        _write_resolved(cfg, out)
    return EXIT_OK


def _train_config(cfg: RunConfig, dataset: PanelDataset):
    bias_mode = "hold" if cfg.bias == "none" else cfg.bias
    schedule = parse_schedule(cfg.schedule) if bias_mode != "hold" else None
    bias = BiasSpec(mode=bias_mode, schedule=schedule)
    lr = cfg.lr
    if lr is None:
        lr = 0.0001 if cfg.model == "model2" else 0.0003
    common = dict(
        hidden=cfg.hidden,
        layers=cfg.layers,
        lr=lr,
        epochs=cfg.epochs,
        target_replication_alpha=cfg.target_replication,
        bias=bias,
        cluster_k=cfg.k,
        seed=cfg.seed,
        standardize=not cfg.no_standardize,
        difference=bool(cfg.difference),
        clip_norm=cfg.clip_norm,
        standard_output_gate=bool(cfg.standard_output_gate),
    )
    if cfg.model == "model2":
        alphas = _csv_floats(cfg.feature_alphas) if cfg.feature_alphas else None
        return Model2Config(feature_alphas=alphas, outer_alpha=cfg.outer_alpha, **common)
    return Model1Config(**common)


def _cmd_train(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_complete(cfg)
    train_ds, val_ds = train_val_split(dataset, 1.0 - cfg.val_fraction, seed=cfg.seed)
    model_cfg = _train_config(cfg, dataset)
    if model_cfg.bias.mode.startswith("cluster") and cfg.kselect:
        rows = _kselect_rows(cfg, train_ds)
        best, scores = silhouette_select_k(rows, _csv_ints(cfg.k_candidates), seed=cfg.seed)
        print(f"silhouette chose K={best} from {sorted(scores)}")
        model_cfg.cluster_k = best
        cfg.options["k"] = best
    trainer = {"model1": train_model1, "model2": train_model2, "univariate": train_univariate}
    model = trainer[cfg.model](train_ds, val_ds, model_cfg)
    save_forecaster(model, out / "model.json")
    _write_training_log(model.training_log, out / "training_log.csv")
    _write_resolved(cfg, out)
    last_val = model.training_log[-1][2] if model.training_log else float("nan")
    print(
        f"trained {cfg.model} for {model_cfg.epochs} epochs; "
        f"best epoch {model.best_epoch}, final val MAE {last_val:.6g}"
    )
    return EXIT_OK


def _cmd_forecast(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model = load_forecaster(cfg.model_file)
    dataset = _load_complete(cfg)
    if dataset.feature_names != model.feature_names:
        raise DataError(
            f"data columns {dataset.feature_names} do not match the model's {model.feature_names}"
        )
    results = forecast_dataset(model, dataset, cfg.horizon, warmup=cfg.warmup)
    write_forecast_csv(results, out / "forecasts.csv")
    _write_resolved(cfg, out)
    print(f"wrote {len(results)} forecasts x {cfg.horizon} steps to {out / 'forecasts.csv'}")
    return EXIT_OK


def _cmd_evaluate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = load_panel_csv(cfg.data, _schema(cfg))
    reports = []
    for item in cfg.forecast:
        label, _, path = item.partition("=")
        if not path:
            raise UsageError(f"--forecast expects label=path, got {item!r}")
        reports.append(horizon_mae(read_forecast_csv(path), truth, label=label))
    comparison = compare_reports(reports)
    emit_outputs(reports, out, comparison=comparison)
    _write_resolved(cfg, out)
    print(comparison.format())
    return EXIT_OK


def _cmd_bench(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    (out / "data").mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(4)
    synth_seed, split_seed, train_seed, kmeans_seed = (int(s) for s in seeds)

    spec = SynthSpec(
        n_entities=cfg.entities,
        n_features=cfg.features,
        seq_len=cfg.train_length,
        n_prototypes=cfg.prototypes,
        reversion_rate=cfg.reversion,
        noise_sigma=cfg.noise,
        seed=synth_seed,
    )
    dataset, assignment = gen_synthetic(spec)
    write_panel_csv(dataset, out / "data" / "data.csv")
    write_truth_sidecar(dataset, assignment, out / "data" / "truth.csv")

    # Held-out entities forecast from a short observed prefix; the rest of
    # their series is the truth the rollouts are scored against.
    n_obs = cfg.test_obs if cfg.test_obs is not None else cfg.train_length - cfg.horizon
    if n_obs < 1 or n_obs + cfg.horizon > cfg.train_length:
        raise ConfigError(
            f"test prefix {n_obs} plus horizon {cfg.horizon} must fit in the "
            f"series length {cfg.train_length}"
        )
    fit_full, test_full = train_val_split(dataset, 1.0 - cfg.val_fraction, seed=split_seed)
    train_ds, val_ds = train_val_split(fit_full, 0.85, seed=split_seed)
    test_obs = truncate_entities(test_full, n_obs)

    model_cfg = Model1Config(
        hidden=cfg.hidden,
        layers=cfg.layers,
        lr=cfg.lr,
        epochs=cfg.epochs,
        seed=train_seed,
    )
    model = train_model1(train_ds, val_ds, model_cfg)
    save_forecaster(model, out / "model.json")
    _write_training_log(model.training_log, out / "training_log.csv")

    # The bias estimators only change rollouts for this architecture, so the
    # roster shares one trained network and varies the fitted BiasSpec.
    train_t = transform_dataset(train_ds, model.transforms)
    rows = train_t.all_rows()
    specs = {
        "model1-unbiased": BiasSpec(),
        "model1-pop-average": BiasSpec(
            mode="population",
            schedule=BetaSchedule.reciprocal(),
            stats=compute_population_means(rows),
        ),
        "model1-cluster-hard": BiasSpec(
            mode="cluster-hard",
            clusters=kmeans_fit(rows, cfg.k, seed=kmeans_seed),
        ),
    }

    reports = []
    persisted = [
        forecast_persistence(e, cfg.horizon, dataset.target_index) for e in test_obs.entities
    ]
    write_forecast_csv(persisted, out / "forecasts_persistence.csv")
    reports.append(horizon_mae(persisted, test_full, label="persistence"))

    for label, spec_obj in specs.items():
        variant = dataclasses.replace(model, bias=spec_obj)
        results = forecast_dataset(variant, test_obs, cfg.horizon)
        write_forecast_csv(results, out / f"forecasts_{label}.csv")
        reports.append(horizon_mae(results, test_full, label=label))

    if cfg.include_univariate:
        uni = train_univariate(train_ds, val_ds, dataclasses.replace(model_cfg))
        results = forecast_dataset(uni, test_obs, cfg.horizon)
        write_forecast_csv(results, out / "forecasts_univariate.csv")
        reports.append(horizon_mae(results, test_full, label="univariate"))

    comparison = compare_reports(reports)
    emit_outputs(reports, out, comparison=comparison)
    with open(out / "comparison.csv", "w", newline="") as fh:
        fh.write("model,overall_mae,ratio_to_first\n")
        for label in comparison.labels:
            fh.write(f"{label},{_fmt(comparison.overall[label])},{_fmt(comparison.ratio_to_first[label])}\n")
    _write_resolved(cfg, out)
    print(comparison.format())
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "kselect": _cmd_kselect,
    "train": _cmd_train,
    "forecast": _cmd_forecast,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
}


def run_command(cfg: RunConfig) -> int:
    return _COMMANDS[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv if argv is not None else sys.argv[1:])
        return run_command(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, FloatingPointError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except HorizoncastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
