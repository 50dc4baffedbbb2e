"""Training and rollout of the forecasting architectures.

Model 1 (single output): the network reads [predictor features..., target]
and predicts the next target value. Training is teacher forced on observed
consecutive pairs. At forecast time the target channel is fed the model's own
previous prediction while the predictor channels come from the bias estimator
anchored at the last observed row, so the bias choice only changes rollouts.

Model 2 (multiple outputs): the network predicts every column one step ahead.
With an active bias estimator each input row is concatenated with its bias
vector (doubling the input width); with bias "hold" there is no concatenation,
which is the unbiased multi-output baseline. At forecast time all columns
evolve through the network's own predictions.

The univariate architecture is Model 1 with an empty predictor set: the input
is the target alone and bias cannot influence it.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .bias import BetaSchedule, BiasSpec, compute_population_means, kmeans_fit, make_bias_inputs
from .data import (
    Entity,
    FeatureTransform,
    PanelDataset,
    dataset_hash,
    difference_apply,
    standardize_apply,
    standardize_fit,
)
from .exceptions import ConfigError, DataError
from .losses import mae_loss, target_replication_loss, weighted_feature_loss
from .network import (
    AdamState,
    StackedNetwork,
    adam_step,
    init_params,
    initial_states,
    network_backward,
    network_forward,
    network_from_doc,
    network_step,
    network_to_doc,
)

MODEL_DOC_FORMAT = "horizoncast.model"


@dataclass
class Model1Config:
    """Hyperparameters for the single-output architecture."""

    hidden: int = 64
    layers: int = 2
    lr: float = 0.0003
    epochs: int = 500
    target_replication_alpha: float | None = None
    bias: BiasSpec = field(default_factory=BiasSpec)
    cluster_k: int = 3
    seed: int = 0
    standardize: bool = True
    difference: bool = False
    clip_norm: float | None = 5.0
    standard_output_gate: bool = False

    def validate(self) -> None:
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError("hidden size and layer count must be >= 1")
        if self.lr <= 0.0:
            raise ConfigError("learning rate must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.target_replication_alpha is not None and not 0.0 <= self.target_replication_alpha <= 1.0:
            raise ConfigError("target_replication_alpha must lie in [0, 1]")
        if self.bias.mode in ("population", "cluster-interpolated") and self.bias.schedule is None:
            raise ConfigError(f"bias mode {self.bias.mode!r} needs a beta schedule")
        if self.bias.mode.startswith("cluster") and self.cluster_k < 1:
            raise ConfigError("cluster_k must be >= 1")


@dataclass
class Model2Config(Model1Config):
    """Hyperparameters for the multi-output architecture.

    ``feature_alphas`` weighs the per-column losses (uniform when None) and
    ``outer_alpha`` weighs the feature loss against the target loss.
    """

    lr: float = 0.0001
    feature_alphas: tuple[float, ...] | None = None
    outer_alpha: float = 0.5

    def validate(self) -> None:
        super().validate()
        if not 0.0 <= self.outer_alpha <= 1.0:
            raise ConfigError("outer_alpha must lie in [0, 1]")
        if self.feature_alphas is not None:
            a = np.asarray(self.feature_alphas, dtype=np.float64)
            if np.any(a < 0.0) or np.any(a > 1.0) or abs(float(a.sum()) - 1.0) > 1e-9:
                raise ConfigError("feature_alphas must lie in [0, 1] and sum to 1")


@dataclass
class ForecastResult:
    """Per-entity rollout output in original units."""

    entity_id: str
    values: np.ndarray
    times: np.ndarray

    @property
    def horizon(self) -> int:
        return self.values.shape[0]


@dataclass
class TrainedForecaster:
    network: StackedNetwork
    architecture: str  # "model1" | "model2" | "univariate"
    transforms: FeatureTransform
    bias: BiasSpec
    target_index: int
    feature_names: list[str]
    config: dict
    training_log: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0

    def predictor_indices(self) -> list[int]:
        if self.architecture == "univariate":
            return []
        return [j for j in range(len(self.feature_names)) if j != self.target_index]


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _seeds(master: int, n: int = 4) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(master).generate_state(n)]


def _config_doc(cfg) -> dict:
    doc = asdict(cfg)
    doc["bias"] = cfg.bias.to_doc()
    return doc


def _prepare_datasets(train: PanelDataset, val: PanelDataset, cfg):
    for name, ds in (("training", train), ("validation", val)):
        if ds.has_missing():
            raise DataError(f"{name} split still has missing values; impute before training")
    work_train = difference_apply(train) if cfg.difference else train
    work_val = difference_apply(val) if cfg.difference else val
    if cfg.standardize:
        tf = standardize_fit(work_train)
        tf.difference = cfg.difference
        return standardize_apply(work_train, tf), standardize_apply(work_val, tf), tf
    tf = FeatureTransform.identity(train.n_features, difference=cfg.difference)
    tf.fitted_on = dataset_hash(work_train)
    return work_train, work_val, tf


def transform_dataset(dataset: PanelDataset, tf: FeatureTransform) -> PanelDataset:
    """Apply a fitted transform: difference (if enabled) then standardize."""
    work = difference_apply(dataset) if tf.difference else dataset
    return standardize_apply(work, tf)


def fit_bias_spec(cfg, train_t: PanelDataset, kmeans_seed: int) -> BiasSpec:
    """Fit the requested estimator's statistics on the transformed training split."""
    mode = cfg.bias.mode
    if mode == "hold":
        return BiasSpec()
    if mode == "population":
        return BiasSpec(
            mode="population",
            schedule=cfg.bias.schedule,
            stats=compute_population_means(train_t.all_rows()),
        )
    clusters = kmeans_fit(train_t.all_rows(), cfg.cluster_k, seed=kmeans_seed)
    return BiasSpec(mode=mode, schedule=cfg.bias.schedule, clusters=clusters)


def _training_sequences(dataset: PanelDataset, build_inputs):
    """Skip entities that are too short; error out if nothing remains."""
    sequences = []
    for e in dataset.entities:
        if e.length < 2:
            warnings.warn(f"entity {e.entity_id!r} has fewer than 2 observations; skipped")
            continue
        sequences.append(build_inputs(e))
    if not sequences:
        raise DataError("no trainable entity has at least 2 observations")
    return sequences


def _train_loop(cfg, net: StackedNetwork, sequences, step_loss, val_mae_fn, shuffle_seed: int):
    adam = AdamState.for_network(net)
    rng = np.random.default_rng(shuffle_seed)
    log: list[tuple[int, float, float]] = []
    best_net = None
    best_val = np.inf
    best_epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(sequences))
        total = 0.0
        for idx in order:
            inputs, payload = sequences[idx]
            outputs, caches = network_forward(net, inputs)
            loss, ograds = step_loss(outputs, payload)
            grads = network_backward(net, caches, ograds)
            adam_step(net, grads, adam, cfg.lr, clip_norm=cfg.clip_norm)
            total += loss
        val_mae = val_mae_fn(net)
        log.append((epoch, total / len(sequences), val_mae))
        if np.isfinite(val_mae) and val_mae < best_val:
            best_val = val_mae
            best_net = net.copy()
            best_epoch = epoch
    if best_net is None:
        best_net = net
        best_epoch = cfg.epochs
    return best_net, log, best_epoch


# ---------------------------------------------------------------------------
# Model 1 / univariate
# ---------------------------------------------------------------------------

def _model1_inputs(rows: np.ndarray, pred_idx: list[int], target_index: int) -> np.ndarray:
    return np.concatenate([rows[:, pred_idx], rows[:, [target_index]]], axis=1)


def _model1_val_fn(val_t: PanelDataset, pred_idx, target_index):
    entities = [e for e in val_t.entities if e.length >= 2]

    def val_mae(net: StackedNetwork) -> float:
        errors = []
        for e in entities:
            inputs = _model1_inputs(e.rows[:-1], pred_idx, target_index)
            outputs, _ = network_forward(net, inputs)
            errors.append(np.abs(outputs[:, 0] - e.rows[1:, target_index]))
        return float(np.mean(np.concatenate(errors))) if errors else float("nan")

    return val_mae


def _train_single_output(train, val, cfg: Model1Config, architecture: str) -> TrainedForecaster:
    cfg.validate()
    init_seed, shuffle_seed, kmeans_seed, _ = _seeds(cfg.seed)
    train_t, val_t, tf = _prepare_datasets(train, val, cfg)
    bias_spec = fit_bias_spec(cfg, train_t, kmeans_seed)
    target_index = train.target_index
    if architecture == "univariate":
        pred_idx: list[int] = []
    else:
        pred_idx = [j for j in range(train.n_features) if j != target_index]

    def build(e: Entity):
        inputs = _model1_inputs(e.rows[:-1], pred_idx, target_index)
        return inputs, e.rows[1:, target_index]

    sequences = _training_sequences(train_t, build)
    net = init_params(
        _layer_dims(len(pred_idx) + 1, cfg.hidden, cfg.layers),
        output_dim=1,
        seed=init_seed,
        standard_output_gate=cfg.standard_output_gate,
    )
    alpha = cfg.target_replication_alpha

    def step_loss(outputs, truths):
        preds = outputs[:, 0]
        if alpha is None:
            loss, g = mae_loss(preds, truths)
        else:
            loss, g = target_replication_loss(preds, truths[-1], alpha)
        return loss, g[:, None]

    best_net, log, best_epoch = _train_loop(
        cfg, net, sequences, step_loss, _model1_val_fn(val_t, pred_idx, target_index), shuffle_seed
    )
    return TrainedForecaster(
        network=best_net,
        architecture=architecture,
        transforms=tf,
        bias=bias_spec,
        target_index=target_index,
        feature_names=list(train.feature_names),
        config=_config_doc(cfg),
        training_log=log,
        best_epoch=best_epoch,
    )


def train_model1(train: PanelDataset, val: PanelDataset, cfg: Model1Config) -> TrainedForecaster:
    return _train_single_output(train, val, cfg, "model1")


def train_univariate(train: PanelDataset, val: PanelDataset, cfg: Model1Config) -> TrainedForecaster:
    """Model 1 restricted to the target column alone; bias has no channel."""
    return _train_single_output(train, val, cfg, "univariate")


# ---------------------------------------------------------------------------
# Model 2
# ---------------------------------------------------------------------------

def _model2_bias_matrix(rows: np.ndarray, spec: BiasSpec) -> np.ndarray:
    # Teacher-forced steps use the observed row as its own anchor at rollout
    # step 1 (beta(1) = 1), so scheduled modes duplicate the row and the hard
    # cluster mode contributes the assigned center.
    return np.stack([make_bias_inputs(spec, row, 1) for row in rows])


def _model2_inputs(rows: np.ndarray, spec: BiasSpec) -> np.ndarray:
    if spec.mode == "hold":
        return rows.copy()
    return np.concatenate([rows, _model2_bias_matrix(rows, spec)], axis=1)


def _model2_val_fn(val_t: PanelDataset, spec: BiasSpec, target_index: int):
    entities = [e for e in val_t.entities if e.length >= 2]

    def val_mae(net: StackedNetwork) -> float:
        errors = []
        for e in entities:
            outputs, _ = network_forward(net, _model2_inputs(e.rows[:-1], spec))
            errors.append(np.abs(outputs[:, target_index] - e.rows[1:, target_index]))
        return float(np.mean(np.concatenate(errors))) if errors else float("nan")

    return val_mae


def train_model2(train: PanelDataset, val: PanelDataset, cfg: Model2Config) -> TrainedForecaster:
    cfg.validate()
    init_seed, shuffle_seed, kmeans_seed, _ = _seeds(cfg.seed)
    train_t, val_t, tf = _prepare_datasets(train, val, cfg)
    bias_spec = fit_bias_spec(cfg, train_t, kmeans_seed)
    n = train.n_features
    target_index = train.target_index
    alphas = (
        np.full(n, 1.0 / n)
        if cfg.feature_alphas is None
        else np.asarray(cfg.feature_alphas, dtype=np.float64)
    )
    if alphas.shape != (n,):
        raise ConfigError(f"feature_alphas must have length {n}")
    outer = cfg.outer_alpha
    trl_alpha = cfg.target_replication_alpha

    def build(e: Entity):
        return _model2_inputs(e.rows[:-1], bias_spec), e.rows[1:]

    sequences = _training_sequences(train_t, build)
    width = n if bias_spec.mode == "hold" else 2 * n
    net = init_params(
        _layer_dims(width, cfg.hidden, cfg.layers),
        output_dim=n,
        seed=init_seed,
        standard_output_gate=cfg.standard_output_gate,
    )

    def step_loss(outputs, truths):
        steps = outputs.shape[0]
        ograds = np.zeros_like(outputs)
        feat_total = 0.0
        for t in range(steps):
            fl, fg = weighted_feature_loss(outputs[t], truths[t], alphas)
            feat_total += fl
            ograds[t] += outer * fg / steps
        feat_loss = feat_total / steps
        if trl_alpha is None:
            tgt_loss, tg = mae_loss(outputs[:, target_index], truths[:, target_index])
        else:
            tgt_loss, tg = target_replication_loss(
                outputs[:, target_index], truths[-1, target_index], trl_alpha
            )
        ograds[:, target_index] += (1.0 - outer) * tg
        return outer * feat_loss + (1.0 - outer) * tgt_loss, ograds

    best_net, log, best_epoch = _train_loop(
        cfg, net, sequences, step_loss, _model2_val_fn(val_t, bias_spec, target_index), shuffle_seed
    )
    return TrainedForecaster(
        network=best_net,
        architecture="model2",
        transforms=tf,
        bias=bias_spec,
        target_index=target_index,
        feature_names=list(train.feature_names),
        config=_config_doc(cfg),
        training_log=log,
        best_epoch=best_epoch,
    )


def _layer_dims(n_inputs: int, hidden: int, layers: int) -> list[tuple[int, int]]:
    return [(n_inputs, hidden)] + [(hidden, hidden)] * (layers - 1)


# ---------------------------------------------------------------------------
# Forecasting
# ---------------------------------------------------------------------------

def _transform_entity(entity: Entity, tf: FeatureTransform) -> Entity:
    if entity.missing.any():
        raise DataError(f"entity {entity.entity_id!r} has missing values; impute before forecasting")
    work = entity
    if tf.difference:
        if entity.length < 2:
            raise DataError(
                f"entity {entity.entity_id!r} needs at least 2 observations for differencing"
            )
        work = Entity(
            entity.entity_id,
            entity.times[1:].copy(),
            np.diff(entity.rows, axis=0),
            entity.missing[1:].copy(),
        )
    return Entity(work.entity_id, work.times, (work.rows - tf.mean) / tf.std, work.missing)


def _horizon_times(entity: Entity, horizon: int) -> np.ndarray:
    dt = int(entity.times[-1] - entity.times[-2]) if entity.length >= 2 else 1
    return entity.times[-1] + dt * np.arange(1, horizon + 1, dtype=np.int64)


def _invert_target(model: TrainedForecaster, entity: Entity, preds_t: np.ndarray) -> np.ndarray:
    ti = model.target_index
    values = preds_t * model.transforms.std[ti] + model.transforms.mean[ti]
    if model.transforms.difference:
        anchor = float(entity.rows[-1, ti])
        values = anchor + np.cumsum(values)
    return values


def forecast_model1(
    model: TrainedForecaster, entity: Entity, horizon: int, warmup: str = "full"
) -> ForecastResult:
    """Recursive rollout: bias supplies predictor channels, predictions chain on y.

    ``warmup`` is "full" (prime state on the whole observed history) or
    "last" (prime on the final observation only).
    """
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    if entity.length < 1:
        raise DataError("entity history is empty")
    if warmup not in ("full", "last"):
        raise ConfigError(f"warmup must be 'full' or 'last', got {warmup!r}")
    ti = model.target_index
    pred_idx = model.predictor_indices()
    hist = _transform_entity(entity, model.transforms)
    rows = hist.rows if warmup == "full" else hist.rows[-1:]
    states = initial_states(model.network)
    for t in range(rows.shape[0] - 1):
        inp = np.concatenate([rows[t, pred_idx], rows[t, [ti]]])
        _, states = network_step(model.network, inp, states)
    anchor = rows[-1]
    y_prev = float(anchor[ti])
    preds = np.empty(horizon)
    for s in range(1, horizon + 1):
        e_full = make_bias_inputs(model.bias, anchor, s)
        inp = np.concatenate([e_full[pred_idx], [y_prev]])
        out, states = network_step(model.network, inp, states)
        y_prev = float(out[0])
        preds[s - 1] = y_prev
    return ForecastResult(entity.entity_id, _invert_target(model, entity, preds), _horizon_times(entity, horizon))


def forecast_model2(
    model: TrainedForecaster, entity: Entity, horizon: int, warmup: str = "full"
) -> ForecastResult:
    """Recursive rollout where every column evolves through the network."""
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    if entity.length < 1:
        raise DataError("entity history is empty")
    if warmup not in ("full", "last"):
        raise ConfigError(f"warmup must be 'full' or 'last', got {warmup!r}")
    ti = model.target_index
    spec = model.bias
    hist = _transform_entity(entity, model.transforms)
    rows = hist.rows if warmup == "full" else hist.rows[-1:]
    states = initial_states(model.network)
    for t in range(rows.shape[0] - 1):
        inp = rows[t] if spec.mode == "hold" else np.concatenate(
            [rows[t], make_bias_inputs(spec, rows[t], 1)]
        )
        _, states = network_step(model.network, inp, states)
    anchor = rows[-1]
    x_prev = anchor.copy()
    preds = np.empty(horizon)
    for s in range(1, horizon + 1):
        if spec.mode == "hold":
            inp = x_prev
        else:
            inp = np.concatenate([x_prev, make_bias_inputs(spec, anchor, s)])
        out, states = network_step(model.network, inp, states)
        x_prev = out
        preds[s - 1] = float(out[ti])
    return ForecastResult(entity.entity_id, _invert_target(model, entity, preds), _horizon_times(entity, horizon))


def forecast_persistence(entity: Entity, horizon: int, target_index: int) -> ForecastResult:
    """Every horizon step repeats the last observed target value."""
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    if entity.length < 1:
        raise DataError("entity history is empty")
    observed = np.flatnonzero(~entity.missing[:, target_index])
    if observed.size == 0:
        raise DataError(f"entity {entity.entity_id!r} never observes the target")
    last = float(entity.rows[observed[-1], target_index])
    return ForecastResult(entity.entity_id, np.full(horizon, last), _horizon_times(entity, horizon))


def forecast(model: TrainedForecaster, entity: Entity, horizon: int, warmup: str = "full") -> ForecastResult:
    if model.architecture == "model2":
        return forecast_model2(model, entity, horizon, warmup)
    return forecast_model1(model, entity, horizon, warmup)


def forecast_dataset(
    model: TrainedForecaster, dataset: PanelDataset, horizon: int, warmup: str = "full"
) -> list[ForecastResult]:
    return [forecast(model, e, horizon, warmup) for e in dataset.entities]


# ---------------------------------------------------------------------------
# Model document
# ---------------------------------------------------------------------------

def forecaster_to_doc(model: TrainedForecaster) -> dict:
    return {
        "format": MODEL_DOC_FORMAT,
        "version": 1,
        "architecture": model.architecture,
        "feature_names": model.feature_names,
        "target_index": model.target_index,
        "config": model.config,
        "transforms": model.transforms.to_doc(),
        "bias": model.bias.to_doc(),
        "network": network_to_doc(model.network),
        "best_epoch": model.best_epoch,
    }


def forecaster_from_doc(doc: dict) -> TrainedForecaster:
    if doc.get("format") != MODEL_DOC_FORMAT:
        raise DataError(f"not a {MODEL_DOC_FORMAT} document")
    return TrainedForecaster(
        network=network_from_doc(doc["network"]),
        architecture=doc["architecture"],
        transforms=FeatureTransform.from_doc(doc["transforms"]),
        bias=BiasSpec.from_doc(doc["bias"]),
        target_index=int(doc["target_index"]),
        feature_names=list(doc["feature_names"]),
        config=doc.get("config", {}),
        best_epoch=int(doc.get("best_epoch", 0)),
    )


def save_forecaster(model: TrainedForecaster, path) -> None:
    with open(path, "w") as fh:
        json.dump(forecaster_to_doc(model), fh, sort_keys=True, separators=(",", ":"))


def load_forecaster(path) -> TrainedForecaster:
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} is not valid JSON: {exc}") from None
    return forecaster_from_doc(doc)
