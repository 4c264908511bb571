"""Dataset containers, normalization, splits, bootstrap resampling, synthetic
domain-shift generation, and delimited-text I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Example:
    """A single feature row with a stable identifier."""

    id: str
    features: np.ndarray


@dataclass(eq=False)
class LabeledDataset:
    """Feature matrix plus multi-hot labels over a fixed event set.

    ``features`` is (n, d) float64, ``labels`` is (n, C) with entries in
    {0, 1}. Ids are unique within the dataset. Instances are treated as
    immutable once constructed.
    """

    ids: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.ids = tuple(self.ids)
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=np.int8))
        self.class_names = tuple(self.class_names)
        n = len(self.ids)
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise ValueError(
                f"inconsistent sizes: {n} ids, {self.features.shape[0]} feature rows, "
                f"{self.labels.shape[0]} label rows"
            )
        if self.labels.shape[1] != len(self.class_names):
            raise ValueError(
                f"{self.labels.shape[1]} label columns but {len(self.class_names)} class names"
            )
        if n and not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if len(set(self.ids)) != n:
            raise ValueError("duplicate example ids")

    def __len__(self):
        return len(self.ids)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def example(self, i: int) -> tuple[Example, np.ndarray]:
        return Example(self.ids[i], self.features[i]), self.labels[i]

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=int)
        return LabeledDataset(
            [self.ids[i] for i in indices],
            self.features[indices],
            self.labels[indices],
            self.class_names,
        )


@dataclass(eq=False)
class UnlabeledPool:
    """Feature rows without labels; ids disjoint from any labeled set used alongside."""

    ids: tuple[str, ...]
    features: np.ndarray

    def __post_init__(self):
        self.ids = tuple(self.ids)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("pool features must be a 2-D array")
        if self.features.shape[0] != len(self.ids):
            raise ValueError(
                f"{len(self.ids)} ids but {self.features.shape[0]} feature rows"
            )
        if len(self.ids) and not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate example ids")

    def __len__(self):
        return len(self.ids)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class NormStats:
    """Per-dimension mean and standard deviation (population, floored)."""

    mean: np.ndarray
    std: np.ndarray


def compute_norm_stats(data) -> NormStats:
    """Global per-dimension mean/variance statistics over all examples.

    Population (not sample) variance; standard deviations are floored at
    ``STD_FLOOR`` so constant columns stay normalizable.
    """
    if len(data) == 0:
        raise ValueError("cannot compute normalization stats on an empty dataset")
    mean = data.features.mean(axis=0)
    std = np.maximum(data.features.std(axis=0), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def apply_norm(stats: NormStats, data):
    """Return a normalized copy of a dataset or pool: (x - mean) / std."""
    feats = (data.features - stats.mean) / stats.std
    if isinstance(data, LabeledDataset):
        return LabeledDataset(data.ids, feats, data.labels, data.class_names)
    return UnlabeledPool(data.ids, feats)


def invert_norm(stats: NormStats, features: np.ndarray) -> np.ndarray:
    """Map normalized features back to the original scale."""
    return features * stats.std + stats.mean


def _largest_remainder(total: int, ratios: np.ndarray) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``ratios`` (sums exactly)."""
    quotas = total * ratios / ratios.sum()
    alloc = np.floor(quotas).astype(int)
    remainder = total - alloc.sum()
    order = np.argsort(-(quotas - alloc), kind="stable")
    alloc[order[:remainder]] += 1
    return alloc


def split(data: LabeledDataset, ratios=(0.7, 0.1, 0.2), seed: int = 0,
          allow_empty: bool = False):
    """Seeded stratified three-way partition into (train, dev, test).

    Positives of each event are allocated across the splits by the given
    ratios (rarest events first), remaining examples fill each split up to
    its global target size. The partition is exact and disjoint.

    Args:
        ratios: (train, dev, test) fractions, must sum to 1.
        allow_empty: permit zero-sized splits (e.g. ratios (1, 0, 0)).
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (3,) or (ratios < 0).any() or abs(ratios.sum() - 1.0) > 1e-9:
        raise ValueError(f"ratios must be 3 nonnegative fractions summing to 1, got {ratios}")
    n = len(data)
    targets = _largest_remainder(n, ratios)
    if not allow_empty and (targets == 0).any():
        raise ValueError(
            f"split of {n} examples at ratios {tuple(ratios)} leaves an empty part; "
            "use allow_empty=True if that is intended"
        )
    rng = np.random.default_rng(seed)
    assignment = np.full(n, -1, dtype=int)
    counts = np.zeros(3, dtype=int)
    # Rarest events first, so their positives are stratified before
    # co-occurring examples get claimed by more common events. Each event's
    # free positives are allocated to close the gap between its per-split
    # targets and the positives already placed by earlier events.
    for c in np.argsort(data.labels.sum(axis=0), kind="stable"):
        pos = np.flatnonzero(data.labels[:, c] == 1)
        cand = pos[assignment[pos] == -1]
        if cand.size == 0:
            continue
        event_targets = _largest_remainder(pos.size, ratios)
        already = np.array([(assignment[pos] == s).sum() for s in range(3)])
        weights = np.maximum(event_targets - already, 0).astype(np.float64)
        if weights.sum() == 0:
            weights = ratios
        alloc = _largest_remainder(cand.size, weights)
        cand = rng.permutation(cand)
        start = 0
        for s in range(3):
            chosen = cand[start:start + alloc[s]]
            assignment[chosen] = s
            counts[s] += chosen.size
            start += alloc[s]
    rest = rng.permutation(np.flatnonzero(assignment == -1))
    need = np.maximum(targets - counts, 0)
    if need.sum() != rest.size:
        # some split already overfull with positives: shrink needs to fit
        need = _largest_remainder(rest.size, need / max(need.sum(), 1))
    start = 0
    for s in range(3):
        assignment[rest[start:start + need[s]]] = s
        start += need[s]
    return tuple(data.subset(np.sort(np.flatnonzero(assignment == s))) for s in range(3))


def bootstrap_sample(data: LabeledDataset, seed: int = 0) -> LabeledDataset:
    """Uniform resample with replacement to the original size.

    Resampled rows keep their original id plus a replica index
    (``id#0``, ``id#1``, ...) so ids stay unique inside the replica.
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot bootstrap an empty dataset")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=n)
    seen: dict[str, int] = {}
    ids = []
    for i in idx:
        base = data.ids[i]
        k = seen.get(base, 0)
        seen[base] = k + 1
        ids.append(f"{base}#{k}")
    return LabeledDataset(ids, data.features[idx], data.labels[idx], data.class_names)


def concat_datasets(first: LabeledDataset, *rest: LabeledDataset) -> LabeledDataset:
    """Concatenate datasets with identical class names and feature width."""
    for other in rest:
        if other.class_names != first.class_names:
            raise ValueError("cannot concatenate datasets with different class names")
        if other.input_dim != first.input_dim:
            raise ValueError("cannot concatenate datasets with different feature widths")
    parts = (first,) + rest
    return LabeledDataset(
        [i for p in parts for i in p.ids],
        np.concatenate([p.features for p in parts], axis=0),
        np.concatenate([p.labels for p in parts], axis=0),
        first.class_names,
    )


# ---------------------------------------------------------------------------
# synthetic benchmark generator


@dataclass(eq=False)
class SyntheticConfig:
    """Configuration of the Gaussian multi-event generator.

    Every example is a background draw N(0, background_scale^2 I) plus, for
    each active event c, a signature draw N(event_means[c], diag(event_scales[c]^2)).
    The labeled set contains ``positives_per_event[c]`` rows with event c
    forced active (other events co-occur independently at ``co_occur_rate``)
    plus ``num_negatives`` pure background rows. The unlabeled pool is built
    the same way at ``pool_size`` with per-event frequencies rescaled by
    ``pool_prior_factors`` and event means translated by ``pool_shift``.
    """

    input_dim: int
    class_names: tuple[str, ...]
    positives_per_event: tuple[int, ...]
    num_negatives: int
    event_means: np.ndarray
    event_scales: np.ndarray
    background_scale: float = 1.0
    co_occur_rate: float = 0.0
    pool_size: int = 0
    pool_shift: np.ndarray | None = None
    pool_prior_factors: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        C, d = len(self.class_names), self.input_dim
        if d < 1 or C < 1:
            raise ValueError("need input_dim >= 1 and at least one event")
        self.class_names = tuple(self.class_names)
        self.positives_per_event = tuple(int(k) for k in self.positives_per_event)
        if len(self.positives_per_event) != C or any(k < 0 for k in self.positives_per_event):
            raise ValueError("positives_per_event must give a nonnegative count per event")
        if self.num_negatives < 0:
            raise ValueError("num_negatives must be nonnegative")
        self.event_means = np.asarray(self.event_means, dtype=np.float64)
        if self.event_means.shape != (C, d):
            raise ValueError(f"event_means must have shape ({C}, {d})")
        scales = np.asarray(self.event_scales, dtype=np.float64)
        if scales.ndim == 1:
            scales = np.repeat(scales[:, None], d, axis=1)
        if scales.shape != (C, d) or (scales <= 0).any() or not np.isfinite(scales).all():
            raise ValueError("event_scales must be positive (diagonal covariance)")
        self.event_scales = scales
        if self.background_scale <= 0:
            raise ValueError("background_scale must be positive")
        if not 0.0 <= self.co_occur_rate < 1.0:
            raise ValueError("co_occur_rate must be in [0, 1)")
        if self.pool_shift is None:
            self.pool_shift = np.zeros((C, d))
        self.pool_shift = np.asarray(self.pool_shift, dtype=np.float64)
        if self.pool_shift.shape != (C, d):
            raise ValueError(f"pool_shift must have shape ({C}, {d})")
        if self.pool_prior_factors is None:
            self.pool_prior_factors = np.ones(C)
        self.pool_prior_factors = np.asarray(self.pool_prior_factors, dtype=np.float64)
        if self.pool_prior_factors.shape != (C,) or (self.pool_prior_factors < 0).any():
            raise ValueError("pool_prior_factors must be nonnegative, one per event")

    @property
    def num_labeled(self) -> int:
        return sum(self.positives_per_event) + self.num_negatives


def _activation_matrix(primary_counts, num_negatives, co_occur_rate, rng) -> np.ndarray:
    """Multi-hot rows: one block per event with that event forced on, then negatives."""
    C = len(primary_counts)
    blocks = []
    for c, count in enumerate(primary_counts):
        block = (rng.random((count, C)) < co_occur_rate).astype(np.int8)
        block[:, c] = 1
        blocks.append(block)
    blocks.append(np.zeros((num_negatives, C), dtype=np.int8))
    return np.concatenate(blocks, axis=0)


def _draw_features(active, means, scales, background_scale, rng) -> np.ndarray:
    """Background noise plus one signature draw per active event (superposition)."""
    n = active.shape[0]
    d = means.shape[1]
    x = rng.normal(0.0, background_scale, size=(n, d))
    for c in range(means.shape[0]):
        rows = np.flatnonzero(active[:, c])
        if rows.size:
            x[rows] += means[c] + rng.normal(size=(rows.size, d)) * scales[c]
    return x


def generate_synthetic(config: SyntheticConfig):
    """Draw a labeled dataset and a domain-shifted unlabeled pool.

    Returns (labeled, pool, pool_truth) where ``pool_truth`` holds the pool's
    ground-truth multi-hot labels for diagnostics only; they never enter any
    training path.
    """
    rng = np.random.default_rng(config.seed)
    C = len(config.class_names)

    active = _activation_matrix(
        config.positives_per_event, config.num_negatives, config.co_occur_rate, rng)
    feats = _draw_features(
        active, config.event_means, config.event_scales, config.background_scale, rng)
    perm = rng.permutation(len(active))
    width = max(5, len(str(max(len(active), config.pool_size))))
    labeled = LabeledDataset(
        [f"L{j:0{width}d}" for j in range(len(active))],
        feats[perm], active[perm], list(config.class_names))

    pool = UnlabeledPool([], np.zeros((0, config.input_dim)))
    pool_truth = np.zeros((0, C), dtype=np.int8)
    if config.pool_size > 0:
        base_rates = np.asarray(config.positives_per_event) / max(config.num_labeled, 1)
        pool_counts = np.rint(
            config.pool_size * base_rates * config.pool_prior_factors).astype(int)
        pool_negatives = config.pool_size - pool_counts.sum()
        if pool_negatives < 0:
            raise ValueError("pool event counts exceed pool_size; lower pool_prior_factors")
        pool_active = _activation_matrix(pool_counts, pool_negatives, config.co_occur_rate, rng)
        pool_feats = _draw_features(
            pool_active, config.event_means + config.pool_shift,
            config.event_scales, config.background_scale, rng)
        perm = rng.permutation(config.pool_size)
        pool = UnlabeledPool(
            [f"U{j:0{width}d}" for j in range(config.pool_size)], pool_feats[perm])
        pool_truth = pool_active[perm]
    return labeled, pool, pool_truth


def benchmark_config(seed: int = 0, pool_size: int = 20000) -> SyntheticConfig:
    """Desk-scale 3-event benchmark: rare events, heavy negatives, and a pool
    whose event signatures are shifted by a small/medium/large amount."""
    d = 20
    patterns = np.zeros((3, d))
    signature = np.array([1.0, 1.0, -1.0, 1.0, -1.0, 1.0]) / np.sqrt(6.0)
    for c in range(3):
        patterns[c, 6 * c:6 * c + 6] = signature
    shift_dir = np.zeros((3, d))
    sideways = np.array([1.0, -1.0, 1.0, 1.0, 1.0, -1.0]) / np.sqrt(6.0)
    for c in range(3):
        shift_dir[c, 6 * c:6 * c + 6] = sideways
    separation = 2.3
    shift_sizes = np.array([0.3, 0.9, 1.8])
    return SyntheticConfig(
        input_dim=d,
        class_names=("near", "mid", "far"),
        positives_per_event=(300, 300, 300),
        num_negatives=3600,
        event_means=separation * patterns,
        event_scales=np.ones(3),
        background_scale=1.0,
        co_occur_rate=0.02,
        pool_size=pool_size,
        pool_shift=shift_sizes[:, None] * shift_dir,
        pool_prior_factors=np.ones(3),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# delimited-text file format
#
# Header: id,feat_0,...,feat_{d-1}[,label_<name>,...]
# One row per example, comma separated, floats written with repr() so a
# save/load round trip is exact. Pool files simply omit the label columns.


def save_dataset(data, path):
    """Write a LabeledDataset or UnlabeledPool as delimited text."""
    path = Path(path)
    labeled = isinstance(data, LabeledDataset)
    header = ["id"] + [f"feat_{j}" for j in range(data.features.shape[1])]
    if labeled:
        for name in data.class_names:
            if "," in name:
                raise ValueError(f"class name {name!r} contains the delimiter")
        header += [f"label_{name}" for name in data.class_names]
    lines = [",".join(header)]
    for i, ex_id in enumerate(data.ids):
        if "," in ex_id:
            raise ValueError(f"id {ex_id!r} contains the delimiter")
        fields = [ex_id] + [repr(float(v)) for v in data.features[i]]
        if labeled:
            fields += [str(int(v)) for v in data.labels[i]]
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n")


def load_dataset(path):
    """Load a dataset file; returns UnlabeledPool when label columns are absent."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[0] != "id":
        raise ValueError(f"{path}: malformed header (must start with 'id')")
    dim = 0
    while 1 + dim < len(header) and header[1 + dim] == f"feat_{dim}":
        dim += 1
    if dim == 0:
        raise ValueError(f"{path}: malformed header (no feat_* columns)")
    label_cols = header[1 + dim:]
    class_names = []
    for col in label_cols:
        if not col.startswith("label_"):
            raise ValueError(f"{path}: malformed header (unexpected column {col!r})")
        class_names.append(col[len("label_"):])
    width = len(header)
    ids, feats, labels = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != width:
            raise ValueError(
                f"{path}: row {lineno} (id {fields[0]!r}) has {len(fields)} fields, expected {width}"
            )
        ids.append(fields[0])
        feats.append([float(v) for v in fields[1:1 + dim]])
        if class_names:
            row = fields[1 + dim:]
            if any(v not in ("0", "1") for v in row):
                raise ValueError(f"{path}: row {lineno} has non-binary label fields")
            labels.append([int(v) for v in row])
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate example ids")
    feats = np.asarray(feats, dtype=np.float64).reshape(len(ids), dim)
    if class_names:
        return LabeledDataset(ids, feats, np.asarray(labels, dtype=np.int8), class_names)
    return UnlabeledPool(ids, feats)
