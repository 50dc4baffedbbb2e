"""Panel data: ingestion, preprocessing transforms, and a synthetic generator.

A panel is a set of entities, each observed as its own time series over a
shared feature schema, with one feature designated as the forecast target.
Missing cells are stored as NaN plus an explicit boolean mask.

CSV layout: header ``entity_id,time_index,<feature columns...>``; empty cells
mean missing. The synthetic generator writes the same layout plus a sidecar
file mapping each entity to the prototype that generated it.
"""

from __future__ import annotations

import csv
import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DataError, ShapeError


@dataclass
class Entity:
    entity_id: str
    times: np.ndarray  # strictly increasing ints
    rows: np.ndarray  # (T, F) float64, NaN where missing
    missing: np.ndarray  # (T, F) bool

    @property
    def length(self) -> int:
        return self.rows.shape[0]

    def copy(self) -> "Entity":
        return Entity(self.entity_id, self.times.copy(), self.rows.copy(), self.missing.copy())


@dataclass
class PanelDataset:
    entities: list[Entity]
    feature_names: list[str]
    target_index: int

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def all_rows(self) -> np.ndarray:
        return np.concatenate([e.rows for e in self.entities], axis=0)

    def has_missing(self) -> bool:
        return any(e.missing.any() for e in self.entities)

    def entity(self, entity_id: str) -> Entity:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise DataError(f"no entity {entity_id!r} in dataset")

    def copy(self) -> "PanelDataset":
        return PanelDataset(
            entities=[e.copy() for e in self.entities],
            feature_names=list(self.feature_names),
            target_index=self.target_index,
        )


@dataclass
class PanelSchema:
    """Column roles for CSV ingestion."""

    target: str
    drop_time_indices: tuple[int, ...] = ()
    forward_fill_columns: tuple[str, ...] = ()
    require_uniform_spacing: bool = False


def dataset_hash(dataset: PanelDataset) -> str:
    """Short fingerprint of the entity ids and shapes (fitted-on marker)."""
    h = hashlib.sha1()
    for e in dataset.entities:
        h.update(e.entity_id.encode())
        h.update(str(e.length).encode())
        h.update(str(int(e.times[0])).encode() if e.length else b"-")
    h.update(",".join(dataset.feature_names).encode())
    return h.hexdigest()[:12]


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

def load_panel_csv(path, schema: PanelSchema) -> PanelDataset:
    """Read a panel CSV, group rows by entity, and sort by time."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "entity_id" or header[1] != "time_index":
            raise DataError(
                f"{path}: header must start with entity_id,time_index followed by feature columns"
            )
        feature_names = header[2:]
        if schema.target not in feature_names:
            raise DataError(f"{path}: target column {schema.target!r} not in {feature_names}")
        for col in schema.forward_fill_columns:
            if col not in feature_names:
                raise DataError(f"{path}: forward-fill column {col!r} not in {feature_names}")
        drop = set(schema.drop_time_indices)
        seen: dict[tuple[str, int], int] = {}
        groups: dict[str, list[tuple[int, np.ndarray, np.ndarray]]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}")
            entity_id = row[0]
            try:
                time_index = int(row[1])
            except ValueError:
                raise DataError(f"{path}:{line_no}: time_index {row[1]!r} is not an integer") from None
            if time_index in drop:
                continue
            key = (entity_id, time_index)
            if key in seen:
                raise DataError(
                    f"{path}:{line_no}: duplicate (entity_id={entity_id!r}, time_index={time_index})"
                    f" first seen on line {seen[key]}"
                )
            seen[key] = line_no
            values = np.empty(len(feature_names))
            mask = np.zeros(len(feature_names), dtype=bool)
            for j, cell in enumerate(row[2:]):
                if cell.strip() == "":
                    values[j] = np.nan
                    mask[j] = True
                else:
                    try:
                        values[j] = float(cell)
                    except ValueError:
                        raise DataError(
                            f"{path}:{line_no}: non-numeric value {cell!r} in column"
                            f" {feature_names[j]!r}"
                        ) from None
            groups.setdefault(entity_id, []).append((time_index, values, mask))

    if not groups:
        raise DataError(f"{path}: no data rows")
    ffill_idx = [feature_names.index(c) for c in schema.forward_fill_columns]
    entities = []
    for entity_id, items in groups.items():
        items.sort(key=lambda it: it[0])
        times = np.array([it[0] for it in items], dtype=np.int64)
        rows = np.stack([it[1] for it in items])
        mask = np.stack([it[2] for it in items])
        for j in ffill_idx:
            for t in range(1, rows.shape[0]):
                if mask[t, j] and not mask[t - 1, j]:
                    rows[t, j] = rows[t - 1, j]
                    mask[t, j] = False
        if schema.require_uniform_spacing and times.size > 2:
            gaps = np.diff(times)
            if not np.all(gaps == gaps[0]):
                raise DataError(f"entity {entity_id!r} has non-uniform time spacing {gaps.tolist()}")
        entities.append(Entity(entity_id, times, rows, mask))
    return PanelDataset(
        entities=entities,
        feature_names=feature_names,
        target_index=feature_names.index(schema.target),
    )


def write_panel_csv(dataset: PanelDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_id", "time_index"] + list(dataset.feature_names))
        for e in dataset.entities:
            for t in range(e.length):
                cells = [e.entity_id, str(int(e.times[t]))]
                for j in range(dataset.n_features):
                    cells.append("" if e.missing[t, j] else repr(float(e.rows[t, j])))
                writer.writerow(cells)


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass
class FeatureTransform:
    """Fitted preprocessing: optional differencing, then per-feature z-scoring."""

    mean: np.ndarray
    std: np.ndarray
    difference: bool = False
    fitted_on: str = ""

    def to_doc(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "difference": self.difference,
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FeatureTransform":
        return cls(
            mean=np.asarray(doc["mean"], dtype=np.float64),
            std=np.asarray(doc["std"], dtype=np.float64),
            difference=bool(doc["difference"]),
            fitted_on=doc.get("fitted_on", ""),
        )

    @classmethod
    def identity(cls, n_features: int, difference: bool = False) -> "FeatureTransform":
        return cls(mean=np.zeros(n_features), std=np.ones(n_features), difference=difference)


def standardize_fit(train: PanelDataset) -> FeatureTransform:
    """Fit per-feature mean and standard deviation on the training split."""
    if train.n_entities == 0:
        raise DataError("cannot fit a transform on an empty dataset")
    if train.has_missing():
        raise DataError("dataset still has missing values; impute before standardizing")
    rows = train.all_rows()
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    for j, s in enumerate(std):
        if s <= 0.0:
            raise DataError(
                f"feature {train.feature_names[j]!r} has zero variance and cannot be standardized"
            )
    return FeatureTransform(mean=mean, std=std, fitted_on=dataset_hash(train))


def standardize_apply(dataset: PanelDataset, tf: FeatureTransform) -> PanelDataset:
    if tf.mean.shape[0] != dataset.n_features:
        raise ShapeError("transform feature count does not match dataset")
    out = dataset.copy()
    for e in out.entities:
        e.rows = (e.rows - tf.mean) / tf.std
    return out


def standardize_invert(dataset: PanelDataset, tf: FeatureTransform) -> PanelDataset:
    if tf.mean.shape[0] != dataset.n_features:
        raise ShapeError("transform feature count does not match dataset")
    out = dataset.copy()
    for e in out.entities:
        e.rows = e.rows * tf.std + tf.mean
    return out


# ---------------------------------------------------------------------------
# Differencing
# ---------------------------------------------------------------------------

def difference_apply(dataset: PanelDataset) -> PanelDataset:
    """Replace each entity's rows with consecutive deltas (first row dropped)."""
    entities = []
    for e in dataset.entities:
        if e.length < 2:
            warnings.warn(f"entity {e.entity_id!r} has fewer than 2 rows; dropped by differencing")
            continue
        entities.append(
            Entity(
                entity_id=e.entity_id,
                times=e.times[1:].copy(),
                rows=np.diff(e.rows, axis=0),
                missing=e.missing[1:] | e.missing[:-1],
            )
        )
    return PanelDataset(entities, list(dataset.feature_names), dataset.target_index)


def difference_invert(last_level, deltas) -> np.ndarray:
    """Rebuild levels from an anchor level and a run of deltas (cumulative sum)."""
    deltas = np.asarray(deltas, dtype=np.float64)
    anchor = np.asarray(last_level, dtype=np.float64)
    return anchor + np.cumsum(deltas, axis=0)


# ---------------------------------------------------------------------------
# Supervised pairs
# ---------------------------------------------------------------------------

def to_supervised(dataset: PanelDataset):
    """Per-entity (inputs, targets) with inputs = rows[:-1] and targets = rows[1:].

    Entities shorter than 2 observations produce nothing.
    """
    out = []
    for e in dataset.entities:
        if e.length < 2:
            continue
        out.append((e.entity_id, e.rows[:-1], e.rows[1:]))
    return out


# ---------------------------------------------------------------------------
# Hot-deck imputation
# ---------------------------------------------------------------------------

def hot_deck_impute(dataset: PanelDataset, seed: int) -> PanelDataset:
    """Fill missing cells from the nearest fully observed donor row.

    Distance is Euclidean over the features the recipient row observes; exact
    distance ties are broken by a seeded random choice. If the dataset has no
    fully observed row at all, the donor pool for a cell falls back to rows
    that observe that feature.
    """
    out = dataset.copy()
    all_rows = out.all_rows()
    all_missing = np.concatenate([e.missing for e in out.entities], axis=0)
    for j in range(out.n_features):
        if all_missing[:, j].all():
            raise DataError(
                f"feature {out.feature_names[j]!r} is missing everywhere; cannot impute"
            )
    if not all_missing.any():
        return out
    rng = np.random.default_rng(seed)
    full_pool = np.flatnonzero(~all_missing.any(axis=1))

    def nearest(pool: np.ndarray, observed: np.ndarray, row: np.ndarray, self_idx: int) -> int:
        pool = pool[pool != self_idx]
        if pool.size == 0:
            raise DataError("no donor rows available for imputation")
        if observed.any():
            diff = all_rows[pool][:, observed] - row[observed]
            donor_missing = all_missing[pool][:, observed]
            diff = np.where(donor_missing, 0.0, np.nan_to_num(diff))
            d2 = np.einsum("ij,ij->i", diff, diff)
        else:
            d2 = np.zeros(pool.size)
        ties = pool[d2 == d2.min()]
        return int(ties[0]) if ties.size == 1 else int(rng.choice(ties))

    flat = 0
    for e in out.entities:
        for t in range(e.length):
            miss = e.missing[t]
            if miss.any():
                observed = ~miss
                if full_pool.size > 0:
                    donor = nearest(full_pool, observed, e.rows[t], flat + t)
                    fill = all_rows[donor]
                    e.rows[t, miss] = fill[miss]
                else:
                    for j in np.flatnonzero(miss):
                        pool = np.flatnonzero(~all_missing[:, j])
                        donor = nearest(pool, observed, e.rows[t], flat + t)
                        e.rows[t, j] = all_rows[donor, j]
                e.missing[t] = False
        flat += e.length
    return out


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def train_val_split(dataset: PanelDataset, fraction: float, seed: int):
    """Entity-level split: whole entities go to one side, seeded shuffle."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction!r}")
    n = dataset.n_entities
    n_train = int(round(fraction * n))
    if n_train < 1 or n_train >= n:
        raise ConfigError(f"fraction {fraction} leaves an empty split for {n} entities")
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = sorted(perm[:n_train].tolist())
    val_idx = sorted(perm[n_train:].tolist())

    def subset(indices):
        return PanelDataset(
            entities=[dataset.entities[i] for i in indices],
            feature_names=list(dataset.feature_names),
            target_index=dataset.target_index,
        )

    return subset(train_idx), subset(val_idx)


def truncate_entities(dataset: PanelDataset, length: int) -> PanelDataset:
    """Keep only the first ``length`` observations of every entity."""
    if length < 1:
        raise ConfigError("truncation length must be >= 1")
    return PanelDataset(
        entities=[
            Entity(e.entity_id, e.times[:length].copy(), e.rows[:length].copy(), e.missing[:length].copy())
            for e in dataset.entities
        ],
        feature_names=list(dataset.feature_names),
        target_index=dataset.target_index,
    )


# ---------------------------------------------------------------------------
# Synthetic panels
# ---------------------------------------------------------------------------

@dataclass
class SynthSpec:
    """Desk-scale synthetic panel: entities drift toward group prototypes.

    Each entity is assigned one of ``n_prototypes`` prototype vectors
    (round-robin). Features follow

        x[t+1] = x[t] + reversion_rate * (prototype - x[t]) + N(0, noise_sigma)

    and the target column is ``target_weights @ x[t]`` plus Gaussian noise of
    scale ``noise_sigma * target_noise_scale``. The generated dataset has
    ``n_features`` predictor columns plus a final ``target`` column.

    Entities start ``initial_spread`` away from their prototype, so early
    observations carry a live transient toward the group-typical values while
    late observations hover around them. Default target weights alternate in
    sign and taper linearly from 1.0 to 0.5 in magnitude, so every predictor
    carries signal.
    """

    n_entities: int = 200
    n_features: int = 4
    seq_len: int = 30
    n_prototypes: int = 3
    reversion_rate: float = 0.15
    noise_sigma: float = 0.1
    target_weights: tuple[float, ...] | None = None
    seed: int = 0
    prototype_spread: float = 3.0
    initial_spread: float = 2.0
    target_noise_scale: float = 0.25

    def resolved_weights(self) -> np.ndarray:
        if self.target_weights is not None:
            w = np.asarray(self.target_weights, dtype=np.float64)
            if w.shape != (self.n_features,):
                raise ConfigError(f"target_weights must have length {self.n_features}")
            return w
        n = self.n_features
        taper = np.linspace(1.0, 0.5, n) if n > 1 else np.array([1.0])
        signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
        return taper * signs

    def validate(self) -> None:
        if min(self.n_entities, self.n_features, self.seq_len, self.n_prototypes) < 1:
            raise ConfigError("all synthetic counts must be >= 1")
        if not 0.0 < self.reversion_rate <= 1.0:
            raise ConfigError("reversion_rate must lie in (0, 1]")
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be finite and >= 0")
        self.resolved_weights()


def gen_synthetic(spec: SynthSpec) -> tuple[PanelDataset, np.ndarray]:
    """Generate a panel plus the ground-truth prototype index per entity."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    weights = spec.resolved_weights()
    prototypes = rng.normal(0.0, spec.prototype_spread, size=(spec.n_prototypes, spec.n_features))
    assignment = np.arange(spec.n_entities) % spec.n_prototypes
    entities = []
    for i in range(spec.n_entities):
        proto = prototypes[assignment[i]]
        x = proto + rng.normal(0.0, spec.initial_spread, size=spec.n_features)
        rows = np.empty((spec.seq_len, spec.n_features + 1))
        for t in range(spec.seq_len):
            y = float(weights @ x) + rng.normal(0.0, spec.noise_sigma * spec.target_noise_scale)
            rows[t, : spec.n_features] = x
            rows[t, spec.n_features] = y
            x = x + spec.reversion_rate * (proto - x) + rng.normal(
                0.0, spec.noise_sigma, size=spec.n_features
            )
        entities.append(
            Entity(
                entity_id=f"e{i:04d}",
                times=np.arange(spec.seq_len, dtype=np.int64),
                rows=rows,
                missing=np.zeros((spec.seq_len, spec.n_features + 1), dtype=bool),
            )
        )
    names = [f"f{j}" for j in range(spec.n_features)] + ["target"]
    return PanelDataset(entities, names, spec.n_features), assignment


def write_truth_sidecar(dataset: PanelDataset, assignment: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_id", "prototype"])
        for e, proto in zip(dataset.entities, assignment):
            writer.writerow([e.entity_id, str(int(proto))])
