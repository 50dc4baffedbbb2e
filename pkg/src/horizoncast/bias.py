"""Expectation-bias estimators for long-horizon rollouts.

When a forecaster rolls out beyond the observed data it has no future feature
values. These estimators supply substitutes: either the last observation held
fixed, a blend toward the population mean, or a blend toward the entity's
cluster center. The blending weight beta(t) starts at 1 (trust the last
observation) and decays toward 0 (trust the anchor) as the horizon grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DataError, DegenerateDataError, ShapeError

BIAS_MODES = ("hold", "population", "cluster-hard", "cluster-interpolated")


# ---------------------------------------------------------------------------
# beta(t) schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaSchedule:
    """A function of the rollout step t >= 1 with values in [0, 1].

    kind "step": 1 while t < threshold, 0 afterwards.
    kind "reciprocal": 1/t.
    kind "constant": a fixed value.
    """

    kind: str
    threshold: int | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind == "step":
            if self.threshold is None or self.threshold < 1:
                raise ConfigError("step schedule needs a threshold >= 1")
        elif self.kind == "constant":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise ConfigError("constant schedule needs a value in [0, 1]")
        elif self.kind != "reciprocal":
            raise ConfigError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def step_at(cls, threshold: int) -> "BetaSchedule":
        return cls(kind="step", threshold=threshold)

    @classmethod
    def reciprocal(cls) -> "BetaSchedule":
        return cls(kind="reciprocal")

    @classmethod
    def constant(cls, value: float) -> "BetaSchedule":
        return cls(kind="constant", value=value)

    def to_doc(self) -> dict:
        return {"kind": self.kind, "threshold": self.threshold, "value": self.value}

    @classmethod
    def from_doc(cls, doc: dict) -> "BetaSchedule":
        return cls(kind=doc["kind"], threshold=doc.get("threshold"), value=doc.get("value"))


def beta_value(schedule: BetaSchedule, t: int) -> float:
    """Evaluate the schedule at rollout step t (1-based)."""
    if t < 1:
        raise DataError(f"rollout step must be >= 1, got {t}")
    if schedule.kind == "step":
        return 1.0 if t < schedule.threshold else 0.0
    if schedule.kind == "reciprocal":
        return 1.0 / t
    return float(schedule.value)


# ---------------------------------------------------------------------------
# Population averaging
# ---------------------------------------------------------------------------

@dataclass
class PopulationStats:
    """Per-feature means over every entity-timestep sample of the training split."""

    mu: np.ndarray
    n_samples: int


def compute_population_means(samples) -> PopulationStats:
    """Mean of each feature over all samples.

    Accepts an (N, F) array or any object with an ``all_rows()`` method
    (e.g. a PanelDataset). Missing values are not allowed; impute first.
    """
    rows = samples.all_rows() if hasattr(samples, "all_rows") else np.asarray(samples, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DataError("need a non-empty 2-d sample matrix")
    if not np.isfinite(rows).all():
        raise DataError("samples contain missing or non-finite values; impute before averaging")
    return PopulationStats(mu=rows.mean(axis=0), n_samples=rows.shape[0])


def population_average_bias(x: np.ndarray, stats: PopulationStats, beta: float) -> np.ndarray:
    """beta * x + (1 - beta) * mu, componentwise."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != stats.mu.shape:
        raise ShapeError(f"x has shape {x.shape}, stats have {stats.mu.shape}")
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must lie in [0, 1], got {beta!r}")
    return beta * x + (1.0 - beta) * stats.mu


# ---------------------------------------------------------------------------
# K-means clustering (Lloyd's algorithm, k-means++ seeding)
# ---------------------------------------------------------------------------

@dataclass
class KMeansModel:
    centers: np.ndarray  # (K, F)
    k: int
    inertia: float
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)


def _sq_distances(samples: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(N, K) squared Euclidean distances."""
    diff = samples[:, None, :] - centers[None, :, :]
    return np.einsum("nkf,nkf->nk", diff, diff)


def _plus_plus_seeds(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = samples.shape[0]
    centers = [samples[rng.integers(n)]]
    for _ in range(1, k):
        d2 = _sq_distances(samples, np.asarray(centers)).min(axis=1)
        total = d2.sum()
        if total <= 0.0:
            # All remaining points coincide with chosen centers; caller
            # guarantees enough distinct samples, so pick any unseen point.
            centers.append(samples[rng.integers(n)])
            continue
        centers.append(samples[rng.choice(n, p=d2 / total)])
    return np.asarray(centers, dtype=np.float64)


def kmeans_fit(
    samples,
    k: int,
    seed: int,
    max_iter: int = 100,
    init_centers: np.ndarray | None = None,
) -> KMeansModel:
    """Lloyd iterations until the assignment stops changing or max_iter.

    Seeding is k-means++ style from ``seed`` unless explicit ``init_centers``
    are given. An emptied cluster is re-centered on the point of the largest
    cluster farthest from its center.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise DataError("need a non-empty 2-d sample matrix")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    n_distinct = np.unique(samples, axis=0).shape[0]
    if n_distinct < k:
        raise ConfigError(f"only {n_distinct} distinct samples for k={k}")
    rng = np.random.default_rng(seed)
    if init_centers is not None:
        centers = np.asarray(init_centers, dtype=np.float64).copy()
        if centers.shape != (k, samples.shape[1]):
            raise ShapeError(f"init_centers must have shape ({k}, {samples.shape[1]})")
    else:
        centers = _plus_plus_seeds(samples, k, rng)

    labels = np.full(samples.shape[0], -1)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_distances(samples, centers)
        new_labels = d2.argmin(axis=1)  # argmin breaks ties toward the lowest index
        history.append(float(d2[np.arange(samples.shape[0]), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = samples[labels == j]
            if members.shape[0] > 0:
                centers[j] = members.mean(axis=0)
            else:
                sizes = np.bincount(labels, minlength=k)
                big = int(sizes.argmax())
                big_members = np.flatnonzero(labels == big)
                far = big_members[d2[big_members, big].argmax()]
                centers[j] = samples[far]
                labels[far] = j
    final_d2 = _sq_distances(samples, centers)
    inertia = float(final_d2[np.arange(samples.shape[0]), final_d2.argmin(axis=1)].sum())
    return KMeansModel(centers=centers, k=k, inertia=inertia, n_iter=n_iter, inertia_history=history)


def assign_cluster(model: KMeansModel, x: np.ndarray) -> int:
    """Index of the nearest center; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.centers.shape[1],):
        raise ShapeError(f"x has shape {x.shape}, centers have {model.centers.shape[1]} features")
    d2 = np.sum((model.centers - x) ** 2, axis=1)
    return int(d2.argmin())


def mean_silhouette(samples: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient (b - a) / max(a, b) with Euclidean distance.

    Samples in singleton clusters score 0 by convention.
    """
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels)
    n = samples.shape[0]
    dist = np.sqrt(np.maximum(_sq_distances(samples, samples), 0.0))
    ks = np.unique(labels)
    scores = np.zeros(n)
    for idx in range(n):
        own = labels[idx]
        own_mask = labels == own
        own_size = int(own_mask.sum())
        if own_size <= 1:
            continue
        a = dist[idx, own_mask].sum() / (own_size - 1)
        b = min(dist[idx, labels == other].mean() for other in ks if other != own)
        denom = max(a, b)
        scores[idx] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def silhouette_select_k(
    samples, candidate_ks, seed: int
) -> tuple[int, dict[int, float]]:
    """Fit each candidate K and return the one with the best mean silhouette.

    Ties are broken toward the smaller K.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if np.unique(samples, axis=0).shape[0] < 2:
        raise DegenerateDataError("all samples are identical; silhouette is undefined")
    candidate_ks = sorted(set(int(k) for k in candidate_ks))
    if not candidate_ks or min(candidate_ks) < 2:
        raise ConfigError("candidate K values must all be >= 2")
    scores: dict[int, float] = {}
    for k in candidate_ks:
        model = kmeans_fit(samples, k, seed=seed)
        labels = _sq_distances(samples, model.centers).argmin(axis=1)
        scores[k] = mean_silhouette(samples, labels)
    best = max(candidate_ks, key=lambda k: (scores[k], -k))
    return best, scores


def cluster_bias(model: KMeansModel, x: np.ndarray, mode: str, beta: float = 0.0) -> np.ndarray:
    """Bias from the assigned cluster center.

    "hard": the center itself. "interpolated": beta * x + (1 - beta) * center.
    """
    x = np.asarray(x, dtype=np.float64)
    center = model.centers[assign_cluster(model, x)]
    if mode == "hard":
        return center.copy()
    if mode == "interpolated":
        if not 0.0 <= beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {beta!r}")
        return beta * x + (1.0 - beta) * center
    raise ConfigError(f"unknown cluster bias mode {mode!r}")


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

@dataclass
class BiasSpec:
    """Which estimator a rollout uses, plus its fitted statistics.

    mode "hold" needs nothing fitted and returns the anchor unchanged, which
    realizes the unbiased baselines. "population" and "cluster-interpolated"
    need a schedule; the cluster modes need a fitted KMeansModel.
    """

    mode: str = "hold"
    schedule: BetaSchedule | None = None
    stats: PopulationStats | None = None
    clusters: KMeansModel | None = None

    def __post_init__(self):
        if self.mode not in BIAS_MODES:
            raise ConfigError(f"unknown bias mode {self.mode!r}; expected one of {BIAS_MODES}")

    @property
    def fitted(self) -> bool:
        if self.mode == "hold":
            return True
        if self.mode == "population":
            return self.stats is not None and self.schedule is not None
        if self.mode == "cluster-interpolated":
            return self.clusters is not None and self.schedule is not None
        return self.clusters is not None

    def require_fitted(self) -> None:
        if not self.fitted:
            raise ConfigError(f"bias spec {self.mode!r} is missing fitted statistics or a schedule")

    def to_doc(self) -> dict:
        return {
            "mode": self.mode,
            "schedule": self.schedule.to_doc() if self.schedule else None,
            "population": (
                {"mu": self.stats.mu.tolist(), "n_samples": self.stats.n_samples}
                if self.stats
                else None
            ),
            "clusters": (
                {
                    "centers": self.clusters.centers.tolist(),
                    "k": self.clusters.k,
                    "inertia": self.clusters.inertia,
                }
                if self.clusters
                else None
            ),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "BiasSpec":
        stats = None
        if doc.get("population"):
            stats = PopulationStats(
                mu=np.asarray(doc["population"]["mu"], dtype=np.float64),
                n_samples=int(doc["population"]["n_samples"]),
            )
        clusters = None
        if doc.get("clusters"):
            clusters = KMeansModel(
                centers=np.asarray(doc["clusters"]["centers"], dtype=np.float64),
                k=int(doc["clusters"]["k"]),
                inertia=float(doc["clusters"]["inertia"]),
            )
        schedule = BetaSchedule.from_doc(doc["schedule"]) if doc.get("schedule") else None
        return cls(mode=doc["mode"], schedule=schedule, stats=stats, clusters=clusters)


def make_bias_inputs(spec: BiasSpec, x0: np.ndarray, t: int) -> np.ndarray:
    """Bias vector for rollout step t, anchored at the last observation x0."""
    spec.require_fitted()
    if t < 1:
        raise DataError(f"rollout step must be >= 1, got {t}")
    x0 = np.asarray(x0, dtype=np.float64)
    if spec.mode == "hold":
        return x0.copy()
    if spec.mode == "population":
        return population_average_bias(x0, spec.stats, beta_value(spec.schedule, t))
    if spec.mode == "cluster-hard":
        return cluster_bias(spec.clusters, x0, "hard")
    return cluster_bias(spec.clusters, x0, "interpolated", beta_value(spec.schedule, t))
