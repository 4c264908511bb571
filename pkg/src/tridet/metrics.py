"""Detection-error-tradeoff metrics: per-event DET curves, area under the
DET curve, and equal error rate. Lower is better for both AUC and EER."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class DetCurve:
    """DET sweep points ordered by ascending FPR.

    ``thresholds`` holds the decision threshold per point (descending, with
    +/-inf sentinels); a score is predicted positive iff score > threshold.
    """

    fpr: np.ndarray
    fnr: np.ndarray
    thresholds: np.ndarray


@dataclass(frozen=True)
class EventMetrics:
    auc: float
    eer: float
    num_positives: int
    num_negatives: int


@dataclass(frozen=True)
class MetricsReport:
    """Per-event AUC/EER; events skipped for lack of both label values map to None."""

    class_names: tuple[str, ...]
    events: dict


def det_curve(scores, labels) -> DetCurve:
    """Sweep thresholds over the distinct scores (plus +/-inf sentinels).

    At threshold t an example is predicted positive iff score > t, giving
    FPR = FP / negatives and FNR = FN / positives. Needs at least one
    positive and one negative label. Consecutive sweep points with an
    identical (FPR, FNR) are merged, keeping the first.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be 1-D and the same length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"need at least one positive and one negative label, "
                         f"got {n_pos} positives / {n_neg} negatives")
    pos_sorted = np.sort(scores[labels == 1])
    neg_sorted = np.sort(scores[labels == 0])
    thresholds = np.concatenate(([np.inf], np.unique(scores)[::-1], [-np.inf]))
    # counts strictly above each threshold
    fn = np.searchsorted(pos_sorted, thresholds, side="right")
    fp = n_neg - np.searchsorted(neg_sorted, thresholds, side="right")
    fnr = fn / n_pos
    fpr = fp / n_neg
    keep = np.ones(len(thresholds), dtype=bool)
    keep[1:] = (np.diff(fpr) != 0) | (np.diff(fnr) != 0)
    return DetCurve(fpr=fpr[keep], fnr=fnr[keep], thresholds=thresholds[keep])


def auc_det(curve: DetCurve) -> float:
    """Trapezoidal area under FNR as a function of FPR over [0, 1]."""
    return float(np.trapezoid(curve.fnr, curve.fpr))


def eer(curve: DetCurve) -> float:
    """Error rate where FNR equals FPR.

    Located by linear interpolation between the two sweep points straddling
    the crossing; with several crossings the first by ascending FPR wins.
    """
    diff = curve.fnr - curve.fpr
    below = np.flatnonzero(diff <= 0)
    if below.size == 0:  # no crossing inside the sweep; curve ends at (1, 0)
        return float(curve.fpr[-1])
    i = below[0]
    if i == 0 or diff[i] == 0:
        return float(curve.fpr[i])
    d0, d1 = diff[i - 1], diff[i]
    t = d0 / (d0 - d1)
    return float(curve.fpr[i - 1] + t * (curve.fpr[i] - curve.fpr[i - 1]))


def evaluate(predictor, test) -> MetricsReport:
    """Per-event DET metrics of a predictor on a labeled test set.

    ``predictor`` is anything with ``predict_proba(features) -> (n, C)``
    (a single model or an ensemble). Events without both a positive and a
    negative example are reported as skipped (None), not failed.
    """
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    probs = predictor.predict_proba(test.features)
    events = {}
    for c, name in enumerate(test.class_names):
        labels = test.labels[:, c]
        n_pos = int((labels == 1).sum())
        n_neg = int((labels == 0).sum())
        if n_pos == 0 or n_neg == 0:
            events[name] = None
            continue
        curve = det_curve(probs[:, c], labels)
        events[name] = EventMetrics(
            auc=auc_det(curve), eer=eer(curve),
            num_positives=n_pos, num_negatives=n_neg)
    return MetricsReport(class_names=tuple(test.class_names), events=events)


def mean_auc(report: MetricsReport) -> float:
    """Mean DET-AUC over the evaluated (non-skipped) events."""
    values = [m.auc for m in report.events.values() if m is not None]
    if not values:
        raise ValueError("report contains no evaluated events")
    return float(np.mean(values))


def format_report(report: MetricsReport) -> str:
    """Delimited text with AUC/EER as percentages at two decimals per event."""
    lines = ["event,auc_pct,eer_pct,positives,negatives"]
    for name in report.class_names:
        m = report.events[name]
        if m is None:
            lines.append(f"{name},skipped,skipped,,")
        else:
            lines.append(f"{name},{100 * m.auc:.2f},{100 * m.eer:.2f},"
                         f"{m.num_positives},{m.num_negatives}")
    return "\n".join(lines) + "\n"


def save_report(report: MetricsReport, path):
    Path(path).write_text(format_report(report))


def save_det_points(curves: dict, path):
    """Export DET sweep points (one row per point) for external plotting."""
    lines = ["event,threshold,fpr,fnr"]
    for name, curve in curves.items():
        for t, x, y in zip(curve.thresholds, curve.fpr, curve.fnr):
            lines.append(f"{name},{repr(float(t))},{repr(float(x))},{repr(float(y))}")
    Path(path).write_text("\n".join(lines) + "\n")
