"""Dynamic classifier selection for the bacteria/mold decision.

Four candidate models with genuinely different inductive biases compete on
deterministic stratified 5-fold cross-validation.  Ranking is by balanced F1
with documented tie-breaks (higher recall, then lower latency, then id); the
winner is promoted, logged, and refitted on the full dataset for production
use.  Live performance monitoring flags degradation against the promoted
cross-validation score.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .metrics import balanced_f1, ece, macro_recall, roc_auc
from .vision import Component

DEGRADATION_MARGIN = 0.10
MIN_LIVE_WINDOW = 20
_LABELS = ("bacteria", "mold")  # encoded 0 / 1


@dataclass(frozen=True)
class ColonyFeatures:
    area: float  # px^2
    circularity: float  # 4*pi*area / perimeter^2, clamped to 1.2
    mean_intensity: float  # 0..255
    intensity_variance: float
    edge_density: float  # exposed edge length / area

    def vector(self) -> np.ndarray:
        return np.array(
            [self.area, self.circularity, self.mean_intensity,
             self.intensity_variance, self.edge_density],
            dtype=np.float64,
        )


def features_from_component(image: np.ndarray, comp: Component) -> ColonyFeatures:
    """Measure the classifier features of one segmented colony."""
    mask = comp.mask
    padded = np.pad(mask, 1)
    # Crack length: mask-to-background transitions along the 4 axes.
    crack = 0
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        crack += int(np.sum(padded & ~np.roll(padded, shift, axis=axis)))
    perimeter = crack * (np.pi / 4.0)  # taxicab -> Euclidean correction
    circularity = min(4.0 * np.pi * comp.area / max(perimeter, 1e-9) ** 2, 1.2)
    vals = comp.pixel_values(image).astype(np.float64)
    return ColonyFeatures(
        area=float(comp.area),
        circularity=float(circularity),
        mean_intensity=float(vals.mean()),
        intensity_variance=float(vals.var()),
        edge_density=float(crack / comp.area),
    )


@dataclass(frozen=True)
class CandidateReport:
    candidate_id: str
    balanced_f1: float
    recall: float
    roc_auc: float
    calibration_error: float
    latency_us: float
    fold_scores: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "balanced_f1": self.balanced_f1,
            "recall": self.recall,
            "roc_auc": self.roc_auc,
            "calibration_error": self.calibration_error,
            "latency_us": self.latency_us,
            "fold_scores": list(self.fold_scores),
        }


@dataclass(frozen=True)
class PromotionRecord:
    candidate_id: str
    timestamp: float
    report: CandidateReport
    reason: str

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "timestamp": self.timestamp,
            "report": self.report.to_dict(),
            "reason": self.reason,
        }


class AreaStump:
    """Single-feature threshold on colony area, direction chosen on fit."""

    candidate_id = "area-stump"

    def __init__(self):
        self.threshold = 0.0
        self.mold_if_greater = True

    def fit(self, X: np.ndarray, y: np.ndarray) -> None:
        areas = X[:, 0]
        order = np.sort(np.unique(areas))
        cuts = (order[:-1] + order[1:]) / 2.0 if len(order) > 1 else [order[0]]
        best = (-1.0, 0.0, True)
        for cut in cuts:
            for greater in (True, False):
                pred = (areas > cut) == greater
                acc_mold = pred[y == 1].mean() if (y == 1).any() else 0.0
                acc_bact = (~pred[y == 0]).mean() if (y == 0).any() else 0.0
                score = (acc_mold + acc_bact) / 2.0
                if score > best[0]:
                    best = (score, float(cut), greater)
        _, self.threshold, self.mold_if_greater = best

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        pred = (X[:, 0] > self.threshold) == self.mold_if_greater
        return np.where(pred, 0.9, 0.1)


class LinearLogistic:
    """Logistic scorer on standardized features, fixed-step gradient descent."""

    candidate_id = "linear-logistic"
    steps = 500
    step_size = 0.1

    def __init__(self):
        self.mean = None
        self.std = None
        self.w = None

    def _design(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.std
        return np.hstack([Z, np.ones((len(Z), 1))])

    def fit(self, X: np.ndarray, y: np.ndarray) -> None:
        self.mean = X.mean(axis=0)
        self.std = np.maximum(X.std(axis=0), 1e-9)
        D = self._design(X)
        self.w = np.zeros(D.shape[1])
        for _ in range(self.steps):
            p = 1.0 / (1.0 + np.exp(-D @ self.w))
            grad = D.T @ (p - y) / len(y)
            self.w -= self.step_size * grad

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self._design(X) @ self.w))


class NearestNeighbors3:
    """3-nearest-neighbour vote on standardized features."""

    candidate_id = "knn-3"
    k = 3

    def __init__(self):
        self.mean = None
        self.std = None
        self.Z = None
        self.y = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> None:
        self.mean = X.mean(axis=0)
        self.std = np.maximum(X.std(axis=0), 1e-9)
        self.Z = (X - self.mean) / self.std
        self.y = y.astype(float)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.std
        d = ((Z[:, None, :] - self.Z[None, :, :]) ** 2).sum(axis=2)
        idx = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        return self.y[idx].mean(axis=1)


class MorphologyRule:
    """Fixed rule: mold iff large area and low circularity.  No fitting."""

    candidate_id = "morphology-rule"
    area_cut = 250.0
    circularity_cut = 1.05

    def fit(self, X: np.ndarray, y: np.ndarray) -> None:
        pass

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        pred = (X[:, 0] > self.area_cut) & (X[:, 1] < self.circularity_cut)
        return np.where(pred, 0.9, 0.1)


def default_candidates() -> list:
    return [AreaStump(), LinearLogistic(), NearestNeighbors3(), MorphologyRule()]


def _encode(labels: list[str]) -> np.ndarray:
    for l in labels:
        if l not in _LABELS:
            raise ValidationError(f"unknown class label {l!r}")
    return np.array([1 if l == "mold" else 0 for l in labels], dtype=int)


def stratified_folds(labels: list[str], n_folds: int = 5,
                     seed: int = 0) -> list[np.ndarray]:
    """Deterministic stratified split: shuffled per class, dealt round-robin."""
    rng = np.random.Generator(np.random.PCG64(seed))
    y = _encode(labels)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for i, sample in enumerate(idx):
            folds[i % n_folds].append(int(sample))
    return [np.array(sorted(f), dtype=int) for f in folds]


def evaluate_candidates(features: list[ColonyFeatures], labels: list[str],
                        candidates: list | None = None,
                        seed: int = 0) -> list[CandidateReport]:
    """Score each candidate with stratified 5-fold cross-validation.

    Every sample is scored exactly once as held-out; the headline balanced F1
    is the mean of the five fold scores, the remaining metrics are pooled
    over the held-out predictions.
    """
    if candidates is None:
        candidates = default_candidates()
    y = _encode(labels)
    for cls, name in ((0, "bacteria"), (1, "mold")):
        if int((y == cls).sum()) < 10:
            raise ValidationError(
                f"class starvation: need >= 10 {name!r} samples, "
                f"have {int((y == cls).sum())}"
            )
    X = np.stack([f.vector() for f in features])
    folds = stratified_folds(labels, 5, seed)

    reports = []
    for cand in candidates:
        fold_scores = []
        pooled_proba = np.zeros(len(y))
        elapsed = 0.0
        for fold in folds:
            train = np.setdiff1d(np.arange(len(y)), fold)
            cand.fit(X[train], y[train])
            t0 = time.perf_counter()
            proba = cand.predict_proba(X[fold])
            elapsed += time.perf_counter() - t0
            pooled_proba[fold] = proba
            fold_pred = ["mold" if p >= 0.5 else "bacteria" for p in proba]
            fold_scores.append(balanced_f1([labels[i] for i in fold], fold_pred))
        pooled_pred = ["mold" if p >= 0.5 else "bacteria" for p in pooled_proba]
        confidence = [max(p, 1.0 - p) for p in pooled_proba]
        correct = [p == l for p, l in zip(pooled_pred, labels)]
        reports.append(
            CandidateReport(
                candidate_id=cand.candidate_id,
                balanced_f1=float(np.mean(fold_scores)),
                recall=macro_recall(labels, pooled_pred),
                roc_auc=roc_auc(labels, list(pooled_proba)),
                calibration_error=ece(confidence, correct),
                latency_us=elapsed / len(y) * 1e6,
                fold_scores=tuple(fold_scores),
            )
        )
    return reports


def select_best(reports: list[CandidateReport]) -> CandidateReport:
    """Ranking rule: balanced F1, then recall, then latency, then id."""
    if not reports:
        raise ValidationError("promote requires at least one report")
    return sorted(
        reports,
        key=lambda r: (-r.balanced_f1, -r.recall, r.latency_us, r.candidate_id),
    )[0]


def promote(reports: list[CandidateReport], store=None,
            timestamp: float | None = None) -> PromotionRecord:
    """Pick the winning candidate and append the promotion record."""
    best = select_best(reports)
    record = PromotionRecord(
        candidate_id=best.candidate_id,
        timestamp=time.time() if timestamp is None else timestamp,
        report=best,
        reason=(
            f"balanced_f1={best.balanced_f1:.4f} recall={best.recall:.4f} "
            f"latency_us={best.latency_us:.1f}; ranked by balanced F1 with "
            "recall/latency tie-breaks"
        ),
    )
    if store is not None:
        store.append_promotion(record)
    return record


def monitor_live(window: list[tuple[str, str]], promoted_cv_f1: float,
                 margin: float = DEGRADATION_MARGIN) -> dict:
    """Compare live (prediction, expert_label) pairs against the promoted
    cross-validation score; degradation triggers replacement upstream."""
    if len(window) < MIN_LIVE_WINDOW:
        raise InsufficientDataError(
            f"live window has {len(window)} pairs, need >= {MIN_LIVE_WINDOW}"
        )
    preds = [p for p, _ in window]
    labels = [l for _, l in window]
    live = balanced_f1(labels, preds)
    return {"degraded": live < promoted_cv_f1 - margin, "live_f1": live}


class Registry:
    """Candidate pool plus the currently promoted, fully-fitted classifier."""

    def __init__(self, store=None, candidates: list | None = None, seed: int = 0):
        self.store = store
        self.candidates = candidates if candidates is not None else default_candidates()
        self.seed = seed
        self._promoted: PromotionRecord | None = None
        self._fitted = None

    @property
    def promoted(self) -> PromotionRecord | None:
        return self._promoted

    def train_and_promote(self, features: list[ColonyFeatures],
                          labels: list[str]) -> PromotionRecord:
        reports = evaluate_candidates(features, labels, self.candidates, self.seed)
        record = promote(reports, store=self.store)
        winner = next(c for c in self.candidates
                      if c.candidate_id == record.candidate_id)
        winner.fit(np.stack([f.vector() for f in features]), _encode(labels))
        self._promoted = record
        self._fitted = winner
        return record

    def classify(self, features: ColonyFeatures) -> str:
        """Label one colony with the promoted model (fixed rule as fallback)."""
        model = self._fitted if self._fitted is not None else MorphologyRule()
        p = float(model.predict_proba(features.vector()[None, :])[0])
        return "mold" if p >= 0.5 else "bacteria"

    def check_live(self, window: list[tuple[str, str]]) -> dict:
        if self._promoted is None:
            raise ValidationError("no promoted model to monitor")
        result = monitor_live(window, self._promoted.report.balanced_f1)
        if result["degraded"] and self.store is not None:
            self.store.append_audit(
                actor="system", action="retraining_triggered",
                payload={"live_f1": result["live_f1"],
                         "candidate_id": self._promoted.candidate_id},
            )
        return result
