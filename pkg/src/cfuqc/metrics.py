"""Quantitative machinery: evaluation loss, consensus gate, screening and
count-validation rates, detection mAP, balanced F1, ROC-AUC and calibration
error.

The consensus gate compares two independent counts relative to the larger of
the two (floored at 1 so the 0-vs-0 and 0-vs-1 cases are defined) and
auto-approves when the relative difference is within the tolerance delta,
default 5%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedRateError, ValidationError
from .vision import Box, iou

DEFAULT_DELTA = 0.05
CLASSES = ("bacteria", "mold")


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.alpha == 0 and self.beta == 0:
            raise ValidationError("loss weights must not both be zero")


@dataclass(frozen=True)
class ConsensusDecision:
    count_a: int
    count_b: int
    relative_delta: float
    delta_threshold: float
    outcome: str  # "auto_approve" | "escalate"

    def to_dict(self) -> dict:
        return {
            "count_a": self.count_a,
            "count_b": self.count_b,
            "relative_delta": self.relative_delta,
            "delta_threshold": self.delta_threshold,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class ScreenConfusion:
    """Screening confusion counts; the positive class is the valid plate."""

    tp: int
    fn: int
    fp: int
    tn: int

    def validate(self) -> None:
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")


def smooth_l1(x: float) -> float:
    """Huber-style loss: 0.5 x^2 inside |x| < 1, |x| - 0.5 outside."""
    ax = abs(x)
    return 0.5 * x * x if ax < 1.0 else ax - 0.5


def eval_loss(true_count: float, pred_count: float, true_class: str | None,
              class_probs: dict[str, float] | None,
              w: LossWeights = LossWeights()) -> float:
    """Combined count + classification evaluation loss.

    alpha * smoothL1(pred - true) + beta * crossEntropy(true_class, probs).
    The classification term is skipped when beta is 0; otherwise
    ``class_probs`` must be a distribution over the two colony classes.
    """
    w.validate()
    total = w.alpha * smooth_l1(pred_count - true_count)
    if w.beta > 0:
        if class_probs is None or true_class is None:
            raise ValidationError("class term requested but class data missing")
        if true_class not in CLASSES:
            raise ValidationError(f"unknown class {true_class!r}")
        if any(p < 0 for p in class_probs.values()):
            raise ValidationError("class probabilities must be non-negative")
        if abs(sum(class_probs.get(c, 0.0) for c in CLASSES) - 1.0) > 1e-9:
            raise ValidationError("class probabilities must sum to 1")
        p = class_probs.get(true_class, 0.0)
        total += w.beta * (-math.log(p) if p > 0 else math.inf)
    return total


def consensus(count_a: int, count_b: int,
              delta: float = DEFAULT_DELTA) -> ConsensusDecision:
    """Consensus gate between two independent counts.

    relative_delta = |a - b| / max(a, b, 1); auto-approve iff it is <= delta.
    Symmetric in its arguments.
    """
    for name, c in (("count_a", count_a), ("count_b", count_b)):
        if c < 0 or int(c) != c:
            raise ValidationError(f"{name}: {c} is not a non-negative integer")
    if delta < 0:
        raise ValidationError(f"delta: {delta} is negative")
    a, b = int(count_a), int(count_b)
    rel = abs(a - b) / max(a, b, 1)
    outcome = "auto_approve" if rel <= delta else "escalate"
    return ConsensusDecision(a, b, rel, delta, outcome)


def screen_rates(c: ScreenConfusion) -> dict[str, float]:
    """Detection/false rates from the screening confusion matrix.

    dr + fnr = 1 over actual-valid plates; fpr + npdr = 1 over actual-invalid
    plates.
    """
    c.validate()
    if c.tp + c.fn == 0:
        raise UndefinedRateError("no actual-valid plates: dr/fnr undefined")
    if c.fp + c.tn == 0:
        raise UndefinedRateError("no actual-invalid plates: fpr/npdr undefined")
    pos = c.tp + c.fn
    neg = c.fp + c.tn
    return {
        "dr": c.tp / pos,
        "fnr": c.fn / pos,
        "fpr": c.fp / neg,
        "npdr": c.tn / neg,
    }


def _pct(x: float) -> int:
    # Half-up rounding so reported percentages are platform-stable.
    return int(math.floor(x * 100.0 + 0.5))


def count_validation_rates(match: int, total: int,
                           mismatch: int | None = None) -> dict:
    """Approval / verify rates for count validation against a reference.

    ``mismatch`` may be supplied independently (some reported tallies are);
    when omitted it defaults to total - match.  ``consistent`` flags whether
    match + mismatch fits within the total.
    """
    if total <= 0:
        raise ValidationError(f"total: {total} must be positive")
    if not (0 <= match <= total):
        raise ValidationError(f"match: {match} outside [0, {total}]")
    if mismatch is None:
        mismatch = total - match
    if mismatch < 0:
        raise ValidationError(f"mismatch: {mismatch} is negative")
    return {
        "approval_rate": match / total,
        "verify_rate": mismatch / total,
        "approval_pct": _pct(match / total),
        "verify_pct": _pct(mismatch / total),
        "consistent": match + mismatch <= total,
    }


def _match_detections(dets: list[tuple[int, Box]], truths: list[list[Box]],
                      iou_cut: float) -> list[bool]:
    """Greedy score-descending matching; at most one detection per truth box.

    ``dets`` are (image_index, box) pairs already sorted by descending score
    (ties broken by image then insertion order).  Returns a TP flag per
    detection in that order.
    """
    taken: list[set[int]] = [set() for _ in truths]
    flags: list[bool] = []
    for img, det in dets:
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(truths[img]):
            if j in taken[img]:
                continue
            v = iou(det, gt)
            if v >= iou_cut and v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0:
            taken[img].add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def map_at_iou(detections: list[list[Box]], truths: list[list[Box]],
               iou_cut: float = 0.5) -> dict[str, float]:
    """Average precision at a fixed IoU cut, plus set-level precision/recall.

    AP is the area under the all-point interpolated precision-recall curve
    built from greedy score-descending matching.
    """
    if len(detections) != len(truths):
        raise ValidationError("detections and truths must cover the same images")
    n_gt = sum(len(t) for t in truths)
    flat = [(i, b) for i, per_img in enumerate(detections) for b in per_img]
    for _, b in flat:
        b.validate()
    flat.sort(key=lambda t: -t[1].score)

    if not flat:
        return {"map": 0.0, "precision": 0.0, "recall": 0.0}
    flags = _match_detections(flat, truths, iou_cut)

    tp = np.cumsum(flags)
    fp = np.cumsum([not f for f in flags])
    precision = tp / (tp + fp)
    recall = tp / n_gt if n_gt > 0 else np.zeros_like(tp, dtype=float)

    set_precision = float(tp[-1] / len(flat))
    set_recall = float(tp[-1] / n_gt) if n_gt > 0 else 0.0
    if n_gt == 0:
        return {"map": 0.0, "precision": set_precision, "recall": 0.0}

    # All-point interpolation: running max of precision from the right,
    # integrated over recall steps.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_r = 0.0
    for k in range(len(flags)):
        r = float(recall[k])
        if r > prev_r:
            ap += (r - prev_r) * float(envelope[k])
            prev_r = r
    return {"map": ap, "precision": set_precision, "recall": set_recall}


def _per_class_prf(labels: list[str], predictions: list[str],
                   cls: str) -> tuple[float, float, float]:
    tp = sum(1 for l, p in zip(labels, predictions) if l == cls and p == cls)
    fp = sum(1 for l, p in zip(labels, predictions) if l != cls and p == cls)
    fn = sum(1 for l, p in zip(labels, predictions) if l == cls and p != cls)
    if tp + fn == 0:
        raise UndefinedRateError(f"class {cls!r} absent from labels")
    recall = tp / (tp + fn)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0
    return precision, recall, f1


def balanced_f1(labels: list[str], predictions: list[str]) -> float:
    """Unweighted mean of per-class F1 over the two colony classes."""
    if len(labels) != len(predictions):
        raise ValidationError("labels and predictions must align")
    return float(np.mean([_per_class_prf(labels, predictions, c)[2] for c in CLASSES]))


def macro_recall(labels: list[str], predictions: list[str]) -> float:
    """Unweighted mean of per-class recall."""
    if len(labels) != len(predictions):
        raise ValidationError("labels and predictions must align")
    return float(np.mean([_per_class_prf(labels, predictions, c)[1] for c in CLASSES]))


def roc_auc(labels: list[str], scores: list[float], positive: str = "mold") -> float:
    """Rank-based AUC: probability a random positive outranks a random
    negative, ties counting one half."""
    if len(labels) != len(scores):
        raise ValidationError("labels and scores must align")
    pos = [s for l, s in zip(labels, scores) if l == positive]
    neg = [s for l, s in zip(labels, scores) if l != positive]
    if not pos or not neg:
        raise UndefinedRateError("roc_auc needs both classes present")
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def ece(confidences: list[float], correctness: list[bool], bins: int = 10) -> float:
    """Expected calibration error over equal-width confidence bins."""
    if len(confidences) != len(correctness):
        raise ValidationError("confidences and correctness must align")
    if any(not (0.0 <= c <= 1.0) for c in confidences):
        raise ValidationError("confidences must lie in [0, 1]")
    if not confidences:
        raise ValidationError("ece needs at least one sample")
    conf = np.asarray(confidences, dtype=float)
    corr = np.asarray(correctness, dtype=float)
    idx = np.minimum((conf * bins).astype(int), bins - 1)
    total = 0.0
    n = len(conf)
    for b in range(bins):
        sel = idx == b
        if not sel.any():
            continue
        gap = abs(float(corr[sel].mean()) - float(conf[sel].mean()))
        total += (int(sel.sum()) / n) * gap
    return total
