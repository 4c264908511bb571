"""Probability-averaged model ensembles and their distillation into a single
student network trained on soft teacher targets plus the hard labels."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import learner
from .data import LabeledDataset
from .learner import Model, ModelConfig, TrainParams, clamp_probs, sigmoid_t


@dataclass(eq=False)
class Ensemble:
    """Nonempty collection of models combined by averaging their probabilities."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        dims = {(m.config.input_dim, m.config.num_classes) for m in members}
        if len(dims) != 1:
            raise ValueError(f"members disagree on (input_dim, num_classes): {sorted(dims)}")

    @property
    def input_dim(self) -> int:
        return self.members[0].config.input_dim

    @property
    def num_classes(self) -> int:
        return self.members[0].config.num_classes

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        total = self.members[0].predict_proba(features)
        for m in self.members[1:]:
            total = total + m.predict_proba(features)
        return total / len(self.members)

    def predict_logits(self, features: np.ndarray) -> np.ndarray:
        p = clamp_probs(self.predict_proba(features))
        return np.log(p) - np.log1p(-p)


def ensemble_predict(ens: Ensemble, x: np.ndarray) -> np.ndarray:
    """Mean of the members' sigmoid probabilities for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.input_dim,):
        raise ValueError(f"expected a length-{ens.input_dim} vector, got shape {x.shape}")
    return ens.predict_proba(x[None, :])[0]


def ensemble_logits(ens: Ensemble, x: np.ndarray) -> np.ndarray:
    """log(p / (1 - p)) of the clamped mean probability; always finite."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.input_dim,):
        raise ValueError(f"expected a length-{ens.input_dim} vector, got shape {x.shape}")
    return ens.predict_logits(x[None, :])[0]


@dataclass(frozen=True)
class DistillParams:
    student: ModelConfig
    train: TrainParams
    alpha: float = 0.5
    temperature: float = 2.0
    # the standard formulation also temperature-scales the student's
    # soft-term probabilities; turn off to leave the student at T = 1
    scale_student: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def _soft_student_probs(student_logits, temperature, scale_student):
    if scale_student:
        return sigmoid_t(student_logits, temperature)
    return expit(student_logits)


def kd_loss_terms(student: Model, features, teacher_logits, labels, weights,
                  temperature: float, scale_student: bool = True):
    """(soft, hard) loss sums before the alpha/T^2 weighting.

    soft: cross-entropy of the student's temperature-scaled probabilities
    against the teacher's soft targets sigmoid_t(teacher_logits, T), with
    the class weight on the teacher's positive mass. hard: the usual
    class-weighted BCE against the 0/1 labels.
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    z_t = np.atleast_2d(np.asarray(teacher_logits, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    if not (X.shape[0] == z_t.shape[0] == Y.shape[0]):
        raise ValueError("features, teacher logits and labels disagree on length")
    w = learner._as_class_weights(weights, student.config.num_classes)
    z_s = student.predict_logits(X)
    y_soft = sigmoid_t(z_t, temperature)
    s = clamp_probs(_soft_student_probs(z_s, temperature, scale_student))
    f = clamp_probs(expit(z_s))
    soft = float(-np.sum(w * y_soft * np.log(s) + (1.0 - y_soft) * np.log1p(-s)))
    hard = float(-np.sum(w * Y * np.log(f) + (1.0 - Y) * np.log1p(-f)))
    return soft, hard


def kd_loss(student: Model, features, teacher_logits, labels, weights,
            alpha: float, temperature: float, scale_student: bool = True) -> float:
    """alpha * T^2 * soft + (1 - alpha) * hard, summed over the examples.

    At alpha = 0 this is exactly the class-weighted BCE of the labels.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    soft, hard = kd_loss_terms(student, features, teacher_logits, labels, weights,
                               temperature, scale_student)
    return alpha * temperature ** 2 * soft + (1.0 - alpha) * hard


def _kd_delta(student_logits, y_soft, labels, w, alpha, temperature, scale_student):
    """d(kd_loss)/d(student logits); exact away from the probability clamp."""
    f = expit(student_logits)
    hard = (1.0 - labels) * f - w * labels * (1.0 - f)
    s = _soft_student_probs(student_logits, temperature, scale_student)
    soft = (1.0 - y_soft) * s - w * y_soft * (1.0 - s)
    # chain rule through s = sigmoid(z / T) cancels one factor of T
    soft_scale = alpha * temperature if scale_student else alpha * temperature ** 2
    return soft_scale * soft + (1.0 - alpha) * hard


def kd_loss_gradients(student: Model, features, teacher_logits, labels, weights,
                      alpha: float, temperature: float, scale_student: bool = True):
    """Analytic kd_loss gradients mirroring (student.weights, student.biases)."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    z_t = np.atleast_2d(np.asarray(teacher_logits, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    w = learner._as_class_weights(weights, student.config.num_classes)
    y_soft = sigmoid_t(z_t, temperature)
    acts, z_s = learner._forward_cached(student, X)
    delta = _kd_delta(z_s, y_soft, Y, w, alpha, temperature, scale_student)
    return learner._backprop(student, acts, delta)


def distill(teacher: Ensemble, labeled: LabeledDataset, weights,
            params: DistillParams) -> Model:
    """Train a fresh student against the frozen teacher; returns the student.

    Teacher logits are computed once per labeled example up front. Only the
    labeled set is consumed; no unlabeled data enters distillation. With
    alpha = 0 the procedure reduces bit-for-bit to supervised training of
    the student configuration.
    """
    if len(labeled) == 0:
        raise ValueError("cannot distill on an empty dataset")
    if teacher.input_dim != labeled.input_dim or teacher.num_classes != labeled.num_classes:
        raise ValueError("teacher does not match the dataset dimensions")
    if (params.student.input_dim != labeled.input_dim
            or params.student.num_classes != labeled.num_classes):
        raise ValueError("student config does not match the dataset dimensions")
    w = learner._as_class_weights(weights, labeled.num_classes)
    z_teacher = teacher.predict_logits(labeled.features)
    y_soft = sigmoid_t(z_teacher, params.temperature)
    Y = labeled.labels.astype(np.float64)
    alpha, temp, scale = params.alpha, params.temperature, params.scale_student

    def delta_fn(logits, yb, idx):
        return _kd_delta(logits, y_soft[idx], yb, w, alpha, temp, scale)

    def loss_fn(logits, yb, idx):
        s = clamp_probs(_soft_student_probs(logits, temp, scale))
        f = clamp_probs(expit(logits))
        soft = -np.sum(w * y_soft[idx] * np.log(s) + (1.0 - y_soft[idx]) * np.log1p(-s))
        hard = -np.sum(w * yb * np.log(f) + (1.0 - yb) * np.log1p(-f))
        return alpha * temp ** 2 * soft + (1.0 - alpha) * hard

    student = learner.init_model(params.student)
    return learner._fit(student, labeled.features, Y, params.train, delta_fn, loss_fn)


# ---------------------------------------------------------------------------
# teacher-logit cache and ensemble manifest files


def save_teacher_logits(ids, logits, class_names, path):
    """Comma-delimited cache keyed by example id, one logit column per event."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape != (len(ids), len(class_names)):
        raise ValueError("logits must be (len(ids), len(class_names))")
    header = "id," + ",".join(f"logit_{name}" for name in class_names)
    lines = [header]
    for eid, row in zip(ids, logits):
        lines.append(eid + "," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_teacher_logits(path):
    """Returns (ids, logits, class_names) from a cache file."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln]
    if not lines or not lines[0].startswith("id,"):
        raise ValueError(f"{path}: malformed teacher-logit header")
    names = []
    for col in lines[0].split(",")[1:]:
        if not col.startswith("logit_"):
            raise ValueError(f"{path}: unexpected column {col!r}")
        names.append(col[len("logit_"):])
    ids, rows = [], []
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 1 + len(names):
            raise ValueError(f"{path}: line {row_no}: expected {1 + len(names)} fields")
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return tuple(ids), np.array(rows, dtype=np.float64), tuple(names)


ENSEMBLE_FORMAT = "tridet-ensemble-v1"


def save_ensemble(ens: Ensemble, directory, stem: str = "member") -> Path:
    """Write one checkpoint per member plus a manifest listing them.

    Returns the manifest path; member paths inside it are relative to the
    manifest's directory.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, member in enumerate(ens.members):
        name = f"{stem}_{i}.json"
        learner.save_model(member, directory / name)
        names.append(name)
    manifest = directory / "ensemble.json"
    manifest.write_text(json.dumps({"format": ENSEMBLE_FORMAT, "members": names},
                                   indent=1) + "\n")
    return manifest


def load_ensemble(manifest_path) -> Ensemble:
    manifest_path = Path(manifest_path)
    payload = json.loads(manifest_path.read_text())
    if payload.get("format") != ENSEMBLE_FORMAT:
        raise ValueError(f"{manifest_path}: not a {ENSEMBLE_FORMAT} manifest")
    members = tuple(learner.load_model(manifest_path.parent / name)
                    for name in payload["members"])
    return Ensemble(members)
