"""Confusion matrices, F1 scores and stratified k-fold cross-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import StratificationError, ValidationError
from .mlp import MlpConfig, MlpModel, fit_normalization, predict, train


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true label and columns = predicted label."""

    labels: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else math.nan

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if self.labels != other.labels:
            raise ValidationError("cannot add confusion matrices over different labels")
        return ConfusionMatrix(self.labels, self.counts + other.counts)

    def to_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(str(v) for v in self.labels)]
        for lab, row in zip(self.labels, self.counts):
            lines.append(f"{lab}," + ",".join(str(int(c)) for c in row))
        return "\n".join(lines) + "\n"


def confusion_matrix(true_labels, predicted_labels, vocab: Sequence) -> ConfusionMatrix:
    vocab = tuple(vocab)
    true_labels = list(true_labels)
    predicted_labels = list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise ValidationError("true and predicted label sequences differ in length")
    lookup = {v: i for i, v in enumerate(vocab)}
    counts = np.zeros((len(vocab), len(vocab)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        try:
            counts[lookup[_py(t)], lookup[_py(p)]] += 1
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]!r} not in vocabulary {list(vocab)}") from None
    return ConfusionMatrix(vocab, counts)


def _py(v):
    return v.item() if isinstance(v, np.generic) else v


def f1_score(n_tp: int, n_fp: int, n_fn: int) -> float:
    """Harmonic mean of precision and recall.

    0 when precision + recall is 0; NaN (undefined) when all counts are 0.
    """
    if min(n_tp, n_fp, n_fn) < 0:
        raise ValidationError("counts must be non-negative")
    denom = 2 * n_tp + n_fp + n_fn
    if denom == 0:
        return math.nan
    return 2 * n_tp / denom


@dataclass(frozen=True)
class ScoreReport:
    labels: tuple
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]

    @property
    def macro_f1(self) -> float:
        """Unweighted mean F1 over classes whose F1 is defined."""
        defined = [v for v in self.f1 if not math.isnan(v)]
        return sum(defined) / len(defined) if defined else math.nan

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": [None if math.isnan(v) else v for v in self.f1],
            "support": list(self.support),
            "macro_f1": _json_float(self.macro_f1),
        }


def _json_float(v):
    return None if v is None or math.isnan(v) else float(v)


def score_report(cm: ConfusionMatrix) -> ScoreReport:
    """Per-class precision, recall and F1 (one-vs-rest) from a confusion matrix.

    Precision (recall) is reported as 0 for a class never predicted (never
    present).
    """
    c = cm.counts.tolist()
    k = len(c)
    tp = [c[i][i] for i in range(k)]
    fp = [sum(row[i] for row in c) - tp[i] for i in range(k)]
    fn = [sum(c[i]) - tp[i] for i in range(k)]
    prec = tuple(tp[i] / (tp[i] + fp[i]) if tp[i] + fp[i] else 0.0 for i in range(k))
    rec = tuple(tp[i] / (tp[i] + fn[i]) if tp[i] + fn[i] else 0.0 for i in range(k))
    f1 = tuple(f1_score(tp[i], fp[i], fn[i]) for i in range(k))
    return ScoreReport(cm.labels, prec, rec, f1, tuple(sum(row) for row in c))


@dataclass(frozen=True)
class CvPlan:
    n_folds: int = 10
    n_repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2 or self.n_repeats < 1:
            raise ValidationError("need n_folds >= 2 and n_repeats >= 1")


def stratified_kfold(labels, plan: CvPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """``n_folds * n_repeats`` (train, test) index pairs.

    Within a repeat the test folds partition the samples and each fold holds
    floor or ceil of n_c / k samples of every class c. Classes are dealt
    round-robin, continuing where the previous class stopped, so fold sizes
    differ by at most one.
    """
    labels = [_py(v) for v in labels]
    n = len(labels)
    classes = sorted(set(labels), key=lambda v: (str(type(v)), v))
    members = {c: np.array([i for i, v in enumerate(labels) if v == c], dtype=np.int64)
               for c in classes}
    small = {c: len(m) for c, m in members.items() if len(m) < plan.n_folds}
    if small:
        raise StratificationError(
            f"classes with fewer samples than {plan.n_folds} folds: {small}"
        )
    rng = np.random.default_rng(plan.seed)
    out = []
    for _ in range(plan.n_repeats):
        fold_of = np.empty(n, dtype=np.int64)
        offset = 0
        for c in classes:
            idx = rng.permutation(members[c])
            fold_of[idx] = (offset + np.arange(len(idx))) % plan.n_folds
            offset = (offset + len(idx)) % plan.n_folds
        for k in range(plan.n_folds):
            out.append((np.flatnonzero(fold_of != k), np.flatnonzero(fold_of == k)))
    return out


@dataclass
class FoldResult:
    fold: int
    repeat: int
    n_train: int
    n_test: int
    confusion: ConfusionMatrix
    scores: ScoreReport
    final_train_loss: float
    final_train_accuracy: float


@dataclass
class EvalReport:
    labels: tuple
    folds: list[FoldResult] = field(default_factory=list)
    models: list[MlpModel] = field(default_factory=list)

    @property
    def fold_macro_f1(self) -> list[float]:
        return [f.scores.macro_f1 for f in self.folds]

    @property
    def mean_macro_f1(self) -> float:
        return float(np.nanmean(self.fold_macro_f1))

    @property
    def std_macro_f1(self) -> float:
        return float(np.nanstd(self.fold_macro_f1))

    @property
    def summed_confusion(self) -> ConfusionMatrix:
        total = self.folds[0].confusion
        for f in self.folds[1:]:
            total = total + f.confusion
        return total

    @property
    def pooled_scores(self) -> ScoreReport:
        return score_report(self.summed_confusion)

    def to_dict(self) -> dict:
        pooled = self.pooled_scores
        return {
            "labels": [_py(v) for v in self.labels],
            "f1_average": "macro",
            "aggregate": {
                "mean_macro_f1": _json_float(self.mean_macro_f1),
                "std_macro_f1": _json_float(self.std_macro_f1),
                "pooled": pooled.to_dict(),
                "summed_confusion": self.summed_confusion.counts.tolist(),
                "accuracy": self.summed_confusion.accuracy,
            },
            "folds": [
                {
                    "repeat": f.repeat,
                    "fold": f.fold,
                    "n_train": f.n_train,
                    "n_test": f.n_test,
                    "scores": f.scores.to_dict(),
                    "confusion": f.confusion.counts.tolist(),
                    "final_train_loss": f.final_train_loss,
                    "final_train_accuracy": f.final_train_accuracy,
                }
                for f in self.folds
            ],
        }


def fit_fold(config: MlpConfig, X, y, vocab, train_idx) -> tuple:
    """Train on the given rows only; normalization is fitted on them too."""
    Xtr = X[train_idx]
    return train(config, Xtr, [y[i] for i in train_idx], vocab,
                 normalization=fit_normalization(Xtr))


def _run_fold(args):
    config, X, y, vocab, train_idx, test_idx = args
    model, log = fit_fold(config, X, y, vocab, train_idx)
    pred, _ = predict(model, X[test_idx])
    return model, log, pred


def cross_validate(config: MlpConfig, features, labels, plan: CvPlan, vocab=None,
                   executor=None, keep_models: bool = False) -> EvalReport:
    """Train and score a fresh model per fold.

    Fold ``i`` (counting across repeats) trains with seed
    ``config.rng_seed + i``. ``executor`` (anything with ``map``) lets folds
    run in parallel; results are assembled in fold order either way.
    """
    X = np.asarray(features, dtype=float)
    y = [_py(v) for v in labels]
    if vocab is None:
        vocab = sorted(set(y))
    vocab = tuple(vocab)
    config = replace(config, output_classes=len(vocab))
    splits = stratified_kfold(y, plan)
    jobs = [
        (replace(config, rng_seed=config.rng_seed + i), X, y, vocab, tr, te)
        for i, (tr, te) in enumerate(splits)
    ]
    mapper = executor.map if executor is not None else map
    report = EvalReport(vocab)
    for i, ((model, log, pred), (_, _, _, _, tr, te)) in enumerate(zip(mapper(_run_fold, jobs), jobs)):
        cm = confusion_matrix([y[j] for j in te], pred, vocab)
        report.folds.append(FoldResult(
            fold=i % plan.n_folds,
            repeat=i // plan.n_folds,
            n_train=len(tr),
            n_test=len(te),
            confusion=cm,
            scores=score_report(cm),
            final_train_loss=log.loss[-1],
            final_train_accuracy=log.accuracy[-1],
        ))
        if keep_models:
            report.models.append(model)
    return report
