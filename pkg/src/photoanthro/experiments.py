"""Experiment groups A (sex), B (age classes) and C (age thresholds).

A spec names the rows it uses (ages, sex filter), how labels are built from
them and whether sex is appended as an input feature. ``run_suite``
cross-validates every spec and ``write_suite`` stores the reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import PhotoAnthroError, ValidationError
from .evaluation import CvPlan, EvalReport, cross_validate
from .ingest import MAX_AGE, MIN_AGE, N_PAIS, PaiTable
from .mlp import MlpConfig

log = logging.getLogger(__name__)

SEX_MODES = ("all_without_sex", "female_only", "male_only", "sex_as_input")
TARGETS = ("sex", "age", "age_group_14", "age_group_18")
_MODE_TAG = {"all_without_sex": "no_sex", "female_only": "female",
             "male_only": "male", "sex_as_input": "sex_input"}

GROUP_B_CLASSES = {
    1: tuple(range(6, 23)),
    2: tuple(range(6, 23, 2)),
    3: (6, 10, 14, 18, 22),
    4: (5, 10, 15, 20),
}
THRESHOLDS = {1: 14, 2: 18}


@dataclass(frozen=True)
class ExperimentSpec:
    group: str
    test_id: int
    target: str
    ages: tuple[int, ...]
    sex_mode: str = "all_without_sex"
    classes: tuple[int, ...] | None = None
    tag: str = ""

    def __post_init__(self):
        if self.group not in ("A", "B", "C"):
            raise ValidationError(f"unknown group {self.group!r}")
        if self.target not in TARGETS:
            raise ValidationError(f"unknown target {self.target!r}")
        if self.sex_mode not in SEX_MODES:
            raise ValidationError(f"unknown sex mode {self.sex_mode!r}")
        if self.sex_mode == "sex_as_input" and self.target == "sex":
            raise ValidationError("sex cannot be both input and target")
        ages = tuple(sorted(set(int(a) for a in self.ages)))
        if not ages or ages[0] < MIN_AGE or ages[-1] > MAX_AGE:
            raise ValidationError(f"age filter must lie within [{MIN_AGE}, {MAX_AGE}]")
        object.__setattr__(self, "ages", ages)
        if self.classes is not None:
            if list(self.classes) != sorted(self.classes):
                raise ValidationError("interval classes must be sorted ascending")
            object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))

    @property
    def name(self) -> str:
        if self.group == "A":
            return f"A{self.test_id}-{self.tag or 'all'}"
        if self.group == "C":
            return f"C{self.threshold}-{_MODE_TAG[self.sex_mode]}"
        return f"B{self.test_id}-{_MODE_TAG[self.sex_mode]}"

    @property
    def threshold(self) -> int | None:
        return int(self.target.rsplit("_", 1)[1]) if self.target.startswith("age_group") else None

    @property
    def input_dim(self) -> int:
        return N_PAIS + 1 if self.sex_mode == "sex_as_input" else N_PAIS

    @property
    def vocab(self) -> tuple:
        if self.target == "sex":
            return ("F", "M")
        if self.target == "age":
            return self.classes if self.classes is not None else self.ages
        t = self.threshold
        return (f"<{t}", f">={t}")

    def labels(self, sex: np.ndarray, age: np.ndarray) -> list:
        if self.target == "sex":
            return [str(s) for s in sex]
        if self.target == "age":
            return [int(a) for a in age]
        t = self.threshold
        return [f">={t}" if a >= t else f"<{t}" for a in age]

    def row_mask(self, table: PaiTable) -> np.ndarray:
        mask = np.isin(table.age, self.ages)
        if self.sex_mode == "female_only":
            mask &= table.sex == "F"
        elif self.sex_mode == "male_only":
            mask &= table.sex == "M"
        return mask

    def design(self, table: PaiTable) -> tuple[np.ndarray, list, np.ndarray]:
        """Feature matrix, labels and the selected row indexes."""
        rows = np.flatnonzero(self.row_mask(table))
        X = table.features[rows]
        if self.sex_mode == "sex_as_input":
            X = np.hstack([X, (table.sex[rows] == "M").astype(float)[:, None]])
        return X, self.labels(table.sex[rows], table.age[rows]), rows

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ages"] = list(self.ages)
        d["classes"] = None if self.classes is None else list(self.classes)
        d["name"] = self.name
        d["input_dim"] = self.input_dim
        d["vocab"] = list(self.vocab)
        return d


def build_group_a(ages=range(MIN_AGE, MAX_AGE + 1)) -> list[ExperimentSpec]:
    """One sex classifier per age, plus one over all ages pooled."""
    ages = sorted(set(int(a) for a in ages))
    specs = [ExperimentSpec("A", 1, "sex", (a,), tag=f"age{a:02d}") for a in ages]
    specs.append(ExperimentSpec("A", 2, "sex", tuple(ages), tag="all"))
    return specs


def build_group_b(include_sex_as_input: bool = False) -> list[ExperimentSpec]:
    """Four age-class tests, each without sex, female only and male only."""
    modes = ["all_without_sex", "female_only", "male_only"]
    if include_sex_as_input:
        modes.append("sex_as_input")
    return [
        ExperimentSpec("B", test, "age", classes, mode, classes=classes)
        for test, classes in GROUP_B_CLASSES.items()
        for mode in modes
    ]


def build_group_c(ages=range(MIN_AGE, MAX_AGE + 1)) -> list[ExperimentSpec]:
    """Binary age-threshold tests at 14 and 18 years (label: age >= threshold)."""
    ages = tuple(sorted(set(int(a) for a in ages)))
    return [
        ExperimentSpec("C", test, f"age_group_{t}", ages, mode)
        for test, t in THRESHOLDS.items()
        for mode in ("all_without_sex", "female_only", "male_only")
    ]


def build_groups(groups: str = "all", ages=range(MIN_AGE, MAX_AGE + 1)) -> list[ExperimentSpec]:
    groups = "ABC" if groups.lower() == "all" else groups.upper()
    specs = []
    if "A" in groups:
        specs += build_group_a(ages)
    if "B" in groups:
        specs += build_group_b()
    if "C" in groups:
        specs += build_group_c(ages)
    return specs


def table_checksum(table: PaiTable) -> str:
    h = hashlib.sha256()
    h.update("\n".join(table.subject_ids).encode())
    h.update(table.sex.astype("U1").tobytes())
    h.update(table.age.astype("<i8").tobytes())
    h.update(np.ascontiguousarray(table.features, dtype="<f8").tobytes())
    return h.hexdigest()


def shuffle_labels(table: PaiTable, seed: int) -> PaiTable:
    """Copy of ``table`` whose (sex, age) label pairs are permuted across rows.

    Labels become independent of the features while every (sex, age) cell
    keeps its size.
    """
    perm = np.random.default_rng(seed).permutation(len(table))
    out = table.subset(slice(None))
    out.sex = table.sex[perm]
    out.age = table.age[perm]
    return out


@dataclass
class SuiteResult:
    specs: list[ExperimentSpec]
    reports: dict[str, EvalReport] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    n_rows: dict[str, int] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def mean_f1(self, name: str) -> float:
        return self.reports[name].mean_macro_f1


def run_suite(table: PaiTable, specs, plan: CvPlan, seed: int,
              config: MlpConfig | None = None, jobs: int = 1) -> SuiteResult:
    """Cross-validate every spec on its slice of ``table``.

    Specs that cannot run (missing classes, too few rows to stratify) are
    recorded in ``errors`` and the suite carries on.
    """
    config = replace(config or MlpConfig(), rng_seed=seed)
    plan = replace(plan, seed=seed)
    result = SuiteResult(list(specs))
    result.metadata = {
        "dataset_checksum": table_checksum(table),
        "n_records": len(table),
        "seed": seed,
        "folds": plan.n_folds,
        "repeats": plan.n_repeats,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    executor = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        for spec in result.specs:
            X, y, rows = spec.design(table)
            result.n_rows[spec.name] = len(rows)
            missing = sorted(set(spec.vocab) - set(y), key=str)
            if missing:
                result.errors[spec.name] = f"skipped: classes absent from data: {missing}"
                log.warning("%s %s", spec.name, result.errors[spec.name])
                continue
            cfg = replace(config, input_dim=spec.input_dim, output_classes=len(spec.vocab))
            try:
                result.reports[spec.name] = cross_validate(
                    cfg, X, y, plan, vocab=spec.vocab, executor=executor)
            except PhotoAnthroError as exc:
                result.errors[spec.name] = f"{exc.category}: {exc}"
                log.warning("%s failed: %s", spec.name, exc)
                continue
            log.info("%s mean macro F1 %.3f", spec.name, result.reports[spec.name].mean_macro_f1)
    finally:
        if executor is not None:
            executor.shutdown()
    return result


def _clean(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def spec_report(result: SuiteResult, spec: ExperimentSpec, config: MlpConfig) -> dict:
    rep = result.reports[spec.name]
    return _clean({
        "experiment": spec.to_dict(),
        "config": asdict(replace(config, input_dim=spec.input_dim,
                                 output_classes=len(spec.vocab))),
        "plan": {"folds": result.metadata["folds"], "repeats": result.metadata["repeats"],
                 "seed": result.metadata["seed"]},
        "dataset_checksum": result.metadata["dataset_checksum"],
        "n_rows": result.n_rows[spec.name],
        **rep.to_dict(),
    })


def write_suite(result: SuiteResult, out_dir, config: MlpConfig | None = None) -> list[Path]:
    """One ``<spec>/report.json`` and ``<spec>/confusion.csv`` per spec, plus suite.json.

    Only suite.json carries a timestamp; every other byte is a function of
    the data, specs, plan and seed.
    """
    config = replace(config or MlpConfig(), rng_seed=result.metadata["seed"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summary = []
    for spec in result.specs:
        entry = {"name": spec.name, "group": spec.group, "test_id": spec.test_id,
                 "n_rows": result.n_rows.get(spec.name)}
        if spec.name in result.reports:
            rep = result.reports[spec.name]
            d = out / spec.name
            d.mkdir(exist_ok=True)
            (d / "report.json").write_text(
                json.dumps(spec_report(result, spec, config), indent=2) + "\n", encoding="utf-8")
            (d / "confusion.csv").write_text(rep.summed_confusion.to_csv(), encoding="utf-8")
            written += [d / "report.json", d / "confusion.csv"]
            entry.update(status="ok", mean_macro_f1=rep.mean_macro_f1,
                         std_macro_f1=rep.std_macro_f1,
                         pooled_macro_f1=rep.pooled_scores.macro_f1)
        else:
            entry.update(status="error", error=result.errors.get(spec.name, "not run"))
        summary.append(entry)
    suite = _clean({"metadata": {**result.metadata, "f1_average": "macro"},
                    "experiments": summary})
    (out / "suite.json").write_text(json.dumps(suite, indent=2) + "\n", encoding="utf-8")
    written.append(out / "suite.json")
    return written
