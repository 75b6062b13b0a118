"""Descriptive statistics over PAI tables.

Tukey boxplots, the Shapiro-Wilk normality test (Royston's AS R94
approximation) and a two-way sex x age ANOVA with interaction, run per
PAI and per (sex, age) cell.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import (
    DegenerateSampleError,
    DesignError,
    InsufficientDataError,
    PhotoAnthroError,
    UnsupportedSizeError,
)
from .ingest import N_PAIS, PaiTable

ALPHA = 0.01


@dataclass(frozen=True)
class BoxplotSummary:
    group: tuple
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


def boxplot_summary(values, group=()) -> BoxplotSummary:
    """Tukey boxplot statistics with type-7 (linear interpolation) quantiles."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size < 5:
        raise InsufficientDataError(f"boxplot needs at least 5 values, got {x.size}")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    return BoxplotSummary(
        group=tuple(group),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)]),
    )


def _poly(coefs, x):
    result = 0.0
    for c in reversed(coefs):
        result = result * x + c
    return result


_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def shapiro_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weight vector a (length n, increasing order statistics)."""
    half = n // 2
    if n == 3:
        a_half = np.array([math.sqrt(0.5)])
    else:
        i = np.arange(1, half + 1)
        # Expected normal order statistics of the lower half (negative).
        m = special.ndtri((i - 0.375) / (n + 0.25))
        summ2 = 2.0 * np.sum(m**2)
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) - m[0] / ssumm2
        a_half = np.empty(half)
        if n > 5:
            a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
            a_half[1] = a2
            start = 2
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
            start = 1
        a_half[0] = a1
        a_half[start:] = -m[start:] / fac
    a = np.zeros(n)
    a[:half] = -a_half
    a[n - half:] = a_half[::-1]
    return a


def shapiro_wilk(values) -> tuple[float, float]:
    """Shapiro-Wilk W statistic and p-value for 3 <= n <= 5000."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if not 3 <= n <= 5000:
        raise UnsupportedSizeError(f"Shapiro-Wilk supports 3 <= n <= 5000, got n={n}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("sample contains non-finite values")
    span = x[-1] - x[0]
    if span <= 0:
        raise DegenerateSampleError("all values are equal")
    # Scale first so W is unaffected by the magnitude of the data.
    xc = (x - x.mean()) / span
    ss = float(np.dot(xc, xc))
    if ss <= 0:
        raise DegenerateSampleError("zero variance")
    a = shapiro_coefficients(n)
    w = float(np.dot(a, xc)) ** 2 / (float(np.dot(a, a)) * ss)
    w = min(w, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return w, min(max(p, 0.0), 1.0)
    y = math.log1p(-w) if w < 1 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 0.0
        y = -math.log(gamma - y)
        m = _poly(_C3, n)
        s = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        m = _poly(_C5, ln)
        s = math.exp(_poly(_C6, ln))
    p = float(special.ndtr(-(y - m) / s))
    return w, p


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if math.isnan(f):
        return math.nan
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(special.betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))


@dataclass(frozen=True)
class AnovaEffect:
    sum_of_squares: float
    df: int
    f_statistic: float
    p_value: float


@dataclass(frozen=True)
class AnovaTable:
    pai_index: int | None
    sex: AnovaEffect
    age: AnovaEffect
    interaction: AnovaEffect
    residual_ss: float
    residual_df: int

    @property
    def total_ss(self) -> float:
        return self.sex.sum_of_squares + self.age.sum_of_squares + \
            self.interaction.sum_of_squares + self.residual_ss


def _rss(design: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), int(rank)


def anova_two_way(y, sex, age, pai_index=None) -> AnovaTable:
    """Two-way ANOVA with interaction, sequential (type I) sums of squares.

    Factor order is sex, age, sex x age. In a balanced design the type I, II
    and III decompositions coincide.
    """
    y = np.asarray(y, dtype=float)
    sex = np.asarray(sex)
    age = np.asarray(age)
    sex_levels = np.unique(sex)
    age_levels = np.unique(age)
    if len(sex_levels) < 2 or len(age_levels) < 2:
        raise DesignError("two-way ANOVA needs at least 2 levels of each factor")
    si = np.searchsorted(sex_levels, sex)
    ai = np.searchsorted(age_levels, age)
    counts = np.zeros((len(sex_levels), len(age_levels)), dtype=int)
    np.add.at(counts, (si, ai), 1)
    if np.any(counts == 0):
        s, a = np.argwhere(counts == 0)[0]
        raise DesignError(f"empty cell (sex={sex_levels[s]}, age={age_levels[a]})")
    n = y.size
    n_cells = counts.size
    resid_df = n - n_cells
    if resid_df <= 0:
        raise DesignError("zero residual degrees of freedom (one observation per cell)")
    if not np.all(np.isfinite(y)):
        raise DegenerateSampleError("non-finite observations")

    # Centre before fitting: F is shift-invariant and this keeps lstsq accurate.
    yc = y - y.mean()
    total_ss = float(yc @ yc)
    if total_ss == 0:
        raise DegenerateSampleError("constant response: no variance to decompose")

    ones = np.ones((n, 1))
    sex_d = (si[:, None] == np.arange(1, len(sex_levels))).astype(float)
    age_d = (ai[:, None] == np.arange(1, len(age_levels))).astype(float)
    inter_d = (sex_d[:, :, None] * age_d[:, None, :]).reshape(n, -1)

    rss0 = total_ss
    rss1, r1 = _rss(np.hstack([ones, sex_d]), yc)
    rss2, r2 = _rss(np.hstack([ones, sex_d, age_d]), yc)
    # Full model: residual about the cell means.
    cell_sum = np.zeros_like(counts, dtype=float)
    np.add.at(cell_sum, (si, ai), yc)
    resid = yc - (cell_sum / counts)[si, ai]
    rss3 = float(resid @ resid)

    ss_sex = max(rss0 - rss1, 0.0)
    ss_age = max(rss1 - rss2, 0.0)
    ss_int = max(rss2 - rss3, 0.0)
    df_sex = r1 - 1
    df_age = r2 - r1
    df_int = n_cells - r2
    ms_res = rss3 / resid_df

    def effect(ss, df):
        if df == 0:
            return AnovaEffect(ss, 0, math.nan, math.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.float64(ss / df) / np.float64(ms_res)
        f = float(f)
        return AnovaEffect(ss, df, f, f_sf(f, df, resid_df))

    return AnovaTable(
        pai_index=pai_index,
        sex=effect(ss_sex, df_sex),
        age=effect(ss_age, df_age),
        interaction=effect(ss_int, df_int),
        residual_ss=rss3,
        residual_df=resid_df,
    )


def two_way_anova(table: PaiTable, pai_index: int) -> AnovaTable:
    """ANOVA of one PAI column (1-based index) against sex and age."""
    if not 1 <= pai_index <= N_PAIS:
        raise ValueError(f"pai_index must be in 1..{N_PAIS}")
    return anova_two_way(table.features[:, pai_index - 1], table.sex, table.age, pai_index)


@dataclass
class DescriptiveReport:
    boxplots: list[BoxplotSummary] = field(default_factory=list)
    # (pai_index, sex, age, n, W, p, status)
    shapiro: list[tuple] = field(default_factory=list)
    anova: list[AnovaTable] = field(default_factory=list)
    # pai_index -> reason
    anova_failures: dict[int, str] = field(default_factory=dict)
    alpha: float = ALPHA

    def boxplots_csv(self) -> str:
        rows = [
            [b.group[0], b.group[1], b.group[2], _g(b.q1), _g(b.median), _g(b.q3),
             _g(b.whisker_low), _g(b.whisker_high), len(b.outliers),
             ";".join(_g(o) for o in b.outliers)]
            for b in self.boxplots
        ]
        return _csv(["pai_index", "sex", "age", "q1", "median", "q3", "whisker_low",
                     "whisker_high", "n_outliers", "outliers"], rows)

    def shapiro_csv(self) -> str:
        rows = [
            [pai, sex, age, n, _g(w), _g(p), status,
             "" if status != "ok" else int(p < self.alpha)]
            for pai, sex, age, n, w, p, status in self.shapiro
        ]
        return _csv(["pai_index", "sex", "age", "n", "W", "p_value", "status",
                     "reject_normality"], rows)

    def anova_csv(self) -> str:
        header = ["pai_index", "status"]
        for name in ("sex", "age", "interaction"):
            header += [f"{name}_ss", f"{name}_df", f"{name}_F", f"{name}_p", f"{name}_significant"]
        header += ["residual_ss", "residual_df"]
        rows = []
        for t in self.anova:
            row = [t.pai_index, "ok"]
            for eff in (t.sex, t.age, t.interaction):
                row += [_g(eff.sum_of_squares), eff.df, _g(eff.f_statistic),
                        _g(eff.p_value), int(eff.p_value < self.alpha)]
            rows.append(row + [_g(t.residual_ss), t.residual_df])
        for pai, reason in self.anova_failures.items():
            rows.append([pai, f"degenerate: {reason}"] + [""] * 17)
        rows.sort(key=lambda r: r[0])
        return _csv(header, rows)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in (("boxplots.csv", self.boxplots_csv()),
                           ("shapiro.csv", self.shapiro_csv()),
                           ("anova.csv", self.anova_csv())):
            (out / name).write_text(text, encoding="utf-8", newline="")


def _g(x) -> str:
    return "{:.9g}".format(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_descriptives(table: PaiTable, alpha: float = ALPHA, pai_indexes=None) -> DescriptiveReport:
    """Boxplots and Shapiro-Wilk per (PAI, sex, age) cell, plus per-PAI ANOVA.

    Degenerate cells or columns (for instance a PAI that is constant by
    construction) are recorded with their reason; the sweep continues.
    """
    report = DescriptiveReport(alpha=alpha)
    cells = [(s, a) for s in np.unique(table.sex) for a in np.unique(table.age)]
    masks = {(s, a): (table.sex == s) & (table.age == a) for s, a in cells}
    indexes = range(1, N_PAIS + 1) if pai_indexes is None else pai_indexes
    for pai in indexes:
        col = table.features[:, pai - 1]
        for s, a in cells:
            vals = col[masks[s, a]]
            try:
                report.boxplots.append(boxplot_summary(vals, (pai, str(s), int(a))))
            except InsufficientDataError:
                pass
            try:
                w, p = shapiro_wilk(vals)
                report.shapiro.append((pai, str(s), int(a), vals.size, w, p, "ok"))
            except PhotoAnthroError as exc:
                report.shapiro.append((pai, str(s), int(a), vals.size, math.nan, math.nan, exc.category))
        try:
            report.anova.append(two_way_anova(table, pai))
        except PhotoAnthroError as exc:
            report.anova_failures[pai] = f"{exc.category}: {exc}"
    return report
