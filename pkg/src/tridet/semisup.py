"""Self-training and ensemble tri-training over an unlabeled pool.

Both procedures score the pool, pick the top-k examples per class, attach
pseudo-label vectors, and retrain from scratch on the growing training set.
Tri-training additionally gates each candidate on the agreement of the two
peer models. Pool probabilities are clamped away from exact 0/1 before
gating and scoring so candidate scores stay inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import learner
from .data import LabeledDataset, UnlabeledPool, bootstrap_sample, concat_datasets

CANDIDATE_LOG_HEADER = "iteration,target_model,example_id,class_index,score,assigned_label"


@dataclass(frozen=True)
class PseudoLabelCandidate:
    """One pool example selected for one class, with its full label vector."""

    example_id: str
    class_index: int
    score: float
    assigned_label: tuple[int, ...]
    iteration: int
    target_model: int | None = None  # 1..3 for tri-training, None for self-training

    def __post_init__(self):
        object.__setattr__(self, "assigned_label", tuple(int(v) for v in self.assigned_label))
        if not 0.0 < self.score < 1.0:
            raise ValueError(f"candidate score {self.score} outside (0, 1)")
        if not 0 <= self.class_index < len(self.assigned_label):
            raise ValueError("class_index outside the label vector")
        if any(v not in (0, 1) for v in self.assigned_label):
            raise ValueError("assigned_label must be 0/1")
        if self.assigned_label[self.class_index] != 1:
            raise ValueError("assigned_label must mark the selected class positive")
        if self.iteration < 0:
            raise ValueError("iteration must be nonnegative")
        if self.target_model is not None and self.target_model not in (1, 2, 3):
            raise ValueError("target_model must be 1, 2 or 3")


def _theta_vector(theta, num_classes: int) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64)
    if t.ndim == 0:
        t = np.full(num_classes, float(t))
    if t.shape != (num_classes,):
        raise ValueError(f"expected {num_classes} thresholds, got shape {t.shape}")
    if not ((t > 0.0).all() and (t < 1.0).all()):
        raise ValueError("every theta_c must lie in (0, 1)")
    return t


@dataclass(frozen=True)
class SelfTrainParams:
    model: learner.ModelConfig
    train: learner.TrainParams
    k: int
    iterations: int = 1
    theta: object = 0.5  # scalar or per-class; shapes the non-selected label entries
    class_weight_policy: str = "balanced"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class TriTrainParams:
    model: learner.ModelConfig
    train: learner.TrainParams
    k: int = 5000
    t_iters: int = 1
    theta: object = 0.5
    bootstrap_seeds: tuple[int, int, int] = (1, 2, 3)
    class_weight_policy: str = "balanced"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.t_iters < 1:
            raise ValueError("t_iters must be >= 1")
        if len(self.bootstrap_seeds) != 3:
            raise ValueError("exactly three bootstrap seeds are required")


@dataclass(eq=False)
class TriTrainResult:
    initial_models: tuple
    final_models: tuple
    candidates: list

    def __post_init__(self):
        if len(self.initial_models) != 3 or len(self.final_models) != 3:
            raise ValueError("tri-training produces exactly 3 initial and 3 final models")

    @property
    def all_models(self) -> list:
        return list(self.initial_models) + list(self.final_models)


def score_pool(models, pool: UnlabeledPool) -> np.ndarray:
    """Per-class probabilities over the pool.

    A single model gives an (n, C) matrix; a sequence of M models an
    (M, n, C) stack.
    """
    if isinstance(models, learner.Model):
        return models.predict_proba(pool.features)
    return np.stack([m.predict_proba(pool.features) for m in models])


def select_top_k(candidates, k: int):
    """The k highest-score candidates, descending; ties broken by example_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(candidates, key=lambda c: (-c.score, c.example_id))
    return ranked[:k]


def pseudo_dataset(pool: UnlabeledPool, candidates, class_names):
    """Pseudo-labeled rows, one per (example, class) candidate.

    Duplicate (example_id, class_index) pairs keep the earliest candidate.
    Row ids are "<example_id>@<class_name>" so an example selected for two
    classes yields two distinct rows. Returns None when nothing survives.
    """
    index = {eid: i for i, eid in enumerate(pool.ids)}
    ids, rows, labels = [], [], []
    seen = set()
    for cand in candidates:
        key = (cand.example_id, cand.class_index)
        if key in seen:
            continue
        seen.add(key)
        if cand.example_id not in index:
            raise ValueError(f"candidate references unknown pool id {cand.example_id!r}")
        ids.append(f"{cand.example_id}@{class_names[cand.class_index]}")
        rows.append(pool.features[index[cand.example_id]])
        labels.append(cand.assigned_label)
    if not ids:
        return None
    return LabeledDataset(tuple(ids), np.array(rows, dtype=np.float64),
                          np.array(labels, dtype=np.int8), tuple(class_names))


def assemble_training_set(base: LabeledDataset, pool: UnlabeledPool, candidates) -> LabeledDataset:
    """Base rows followed by the deduplicated pseudo-labeled rows."""
    extra = pseudo_dataset(pool, candidates, base.class_names)
    return base if extra is None else concat_datasets(base, extra)


def _train_fresh(config, train_params, data, policy, seed_offset):
    cfg = replace(config, seed=config.seed + seed_offset)
    tp = replace(train_params, seed=train_params.seed + seed_offset)
    weights = learner.compute_class_weights(data, policy)
    return learner.train(learner.init_model(cfg), data, weights, tp)


def _label_vector(above_row: np.ndarray, class_index: int) -> tuple:
    label = above_row.astype(int)
    label[class_index] = 1
    return tuple(int(v) for v in label)


def _self_candidates(pool, probs, theta, k, iteration):
    above = probs > theta
    out = []
    for c in range(probs.shape[1]):
        cands = [PseudoLabelCandidate(pool.ids[r], c, float(probs[r, c]),
                                      _label_vector(above[r], c), iteration)
                 for r in range(probs.shape[0])]
        out.extend(select_top_k(cands, k))
    return out


def _tri_candidates(pool, peer_a, peer_b, theta, k, iteration, target_model):
    both = (peer_a > theta) & (peer_b > theta)
    score = 0.5 * (peer_a + peer_b)
    out = []
    for c in range(peer_a.shape[1]):
        cands = [PseudoLabelCandidate(pool.ids[r], c, float(score[r, c]),
                                      _label_vector(both[r], c), iteration, target_model)
                 for r in np.flatnonzero(both[:, c])]
        out.extend(select_top_k(cands, k))
    return out


def _check_dims(labeled, pool, config):
    if len(labeled) == 0:
        raise ValueError("labeled set must be nonempty")
    if labeled.input_dim != pool.input_dim:
        raise ValueError(f"labeled feature width {labeled.input_dim} != pool width "
                         f"{pool.input_dim}")
    if config.input_dim != labeled.input_dim or config.num_classes != labeled.num_classes:
        raise ValueError("model config does not match the dataset dimensions")


def self_train(labeled: LabeledDataset, pool: UnlabeledPool, params: SelfTrainParams,
               candidate_log: list | None = None) -> learner.Model:
    """Iterative self-training; returns the final model.

    Each iteration scores the pool with the current model, takes the top-k
    per class by the model's own probability, and retrains from scratch on
    the labeled set plus every pseudo row accumulated so far. Seeds are
    offset by the iteration index so retrainings are deterministic but not
    identical. Pass a list as candidate_log to receive the selections.
    """
    _check_dims(labeled, pool, params.model)
    theta = _theta_vector(params.theta, labeled.num_classes)
    model = _train_fresh(params.model, params.train, labeled,
                         params.class_weight_policy, seed_offset=0)
    accumulated = []
    for t in range(1, params.iterations + 1):
        probs = learner.clamp_probs(score_pool(model, pool))
        cands = _self_candidates(pool, probs, theta, params.k, t)
        accumulated.extend(cands)
        if candidate_log is not None:
            candidate_log.extend(cands)
        train_set = assemble_training_set(labeled, pool, accumulated)
        model = _train_fresh(params.model, params.train, train_set,
                             params.class_weight_policy, seed_offset=t)
    return model


def tri_train(labeled: LabeledDataset, pool: UnlabeledPool,
              params: TriTrainParams) -> TriTrainResult:
    """Ensemble tri-training; returns all three initial and final models.

    Three bootstrap replicas of the labeled set seed three initial models.
    Per iteration, a pool example becomes a candidate for class c of model i
    only when BOTH peers put strictly more than theta_c probability on c;
    its score is the mean of the two peer probabilities. The top-k per class
    join model i's training set, and f^t_i is retrained from scratch on the
    replica plus every candidate set collected for i so far (deduplicated
    by example and class). Model i's own scores never gate its candidates.
    """
    _check_dims(labeled, pool, params.model)
    theta = _theta_vector(params.theta, labeled.num_classes)
    replicas = [bootstrap_sample(labeled, s) for s in params.bootstrap_seeds]
    initial = tuple(
        _train_fresh(params.model, params.train, replicas[i],
                     params.class_weight_policy, seed_offset=i + 1)
        for i in range(3))
    current = list(initial)
    per_model = [[], [], []]
    log = []
    for t in range(1, params.t_iters + 1):
        # freeze this round's probabilities so the three branches are independent
        probs = [learner.clamp_probs(score_pool(m, pool)) for m in current]
        retrained = []
        for i in range(3):
            j, h = (x for x in range(3) if x != i)
            cands = _tri_candidates(pool, probs[j], probs[h], theta,
                                    params.k, t, i + 1)
            per_model[i].extend(cands)
            log.extend(cands)
            train_set = assemble_training_set(replicas[i], pool, per_model[i])
            retrained.append(_train_fresh(params.model, params.train, train_set,
                                          params.class_weight_policy,
                                          seed_offset=1000 * t + i + 1))
        current = retrained
    return TriTrainResult(initial, tuple(current), log)


# ---------------------------------------------------------------------------
# candidate log file: the audit trail for the agreement gate


def save_candidate_log(candidates, path):
    """Comma-delimited log, one selected candidate per line, label as a bitstring."""
    lines = [CANDIDATE_LOG_HEADER]
    for c in candidates:
        target = "" if c.target_model is None else str(c.target_model)
        label = "".join(str(v) for v in c.assigned_label)
        lines.append(f"{c.iteration},{target},{c.example_id},{c.class_index},"
                     f"{repr(c.score)},{label}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_candidate_log(path):
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CANDIDATE_LOG_HEADER:
        raise ValueError(f"{path}: malformed candidate log header")
    out = []
    for row, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"{path}: line {row}: expected 6 fields, got {len(parts)}")
        iteration, target, example_id, class_index, score, label = parts
        out.append(PseudoLabelCandidate(
            example_id=example_id,
            class_index=int(class_index),
            score=float(score),
            assigned_label=tuple(int(ch) for ch in label),
            iteration=int(iteration),
            target_model=None if target == "" else int(target),
        ))
    return out
