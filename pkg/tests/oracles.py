"""Independent reference computations shared by unit and acceptance tests."""

import itertools
import math
from fractions import Fraction
from functools import lru_cache

from photoanthro.evaluation import confusion_matrix, score_report


@lru_cache(maxsize=None)
def _exact_f1(tp, fp, fn):
    """F1 from precision and recall as exact fractions; NaN when undefined."""
    if tp + fp + fn == 0:
        return math.nan
    prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    return float(2 * prec * rec / (prec + rec)) if prec + rec else 0.0


def brute_force_scores(true, pred, vocab):
    """Counts, per-class F1 and macro F1 by direct counting with exact fractions."""
    pos = {v: i for i, v in enumerate(vocab)}
    counts = [[0] * len(vocab) for _ in vocab]
    for t, p in zip(true, pred):
        counts[pos[t]][pos[p]] += 1
    f1 = []
    for i in range(len(vocab)):
        tp = counts[i][i]
        fp = sum(counts[j][i] for j in range(len(vocab))) - tp
        fn = sum(counts[i]) - tp
        f1.append(_exact_f1(tp, fp, fn))
    defined = [v for v in f1 if not math.isnan(v)]
    return counts, f1, defined


def exhaustive_f1_check(max_n=6, max_k=3):
    """Compare every label assignment with N <= max_n, K <= max_k. Returns (cases, mismatches)."""
    cases = mismatches = 0
    for k in range(2, max_k + 1):
        vocab = tuple(range(k))
        for n in range(1, max_n + 1):
            for true in itertools.product(vocab, repeat=n):
                for pred in itertools.product(vocab, repeat=n):
                    cases += 1
                    counts, f1, defined = brute_force_scores(true, pred, vocab)
                    cm = confusion_matrix(true, pred, vocab)
                    rep = score_report(cm)
                    ok = cm.counts.tolist() == counts and all(
                        (math.isnan(a) and math.isnan(b)) or a == b for a, b in zip(rep.f1, f1))
                    if defined:
                        ok = ok and rep.macro_f1 == sum(defined) / len(defined)
                    else:
                        ok = ok and math.isnan(rep.macro_f1)
                    mismatches += not ok
    return cases, mismatches
