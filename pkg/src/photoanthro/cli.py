"""Command-line entry point: synth, pai, pai-list, stats, run, train, predict.

Data goes to files or stdout, diagnostics to stderr. Failures exit 1 with a
line ``error[<category>]: <message>``; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import PhotoAnthroError, ValidationError
from .evaluation import CvPlan
from .experiments import (
    SEX_MODES,
    TARGETS,
    ExperimentSpec,
    build_group_a,
    build_group_b,
    build_group_c,
    run_suite,
    write_suite,
)
from .ingest import MAX_AGE, MIN_AGE, parse_landmark_csv, parse_pai_csv, write_landmark_csv, write_pai_csv
from .mlp import MlpConfig, fit_normalization, load_model, predict, save_model, train
from .pai import compute_dataset_pais, compute_pai_vector, pai_listing
from .stats import run_descriptives
from .synth import default_growth_model, generate

log = logging.getLogger("photoanthro")


def parse_ages(text: str) -> tuple[int, ...]:
    """``"6..22"``, ``"5,10,15"`` or a mix such as ``"5,8..10"``."""
    ages = set()
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                ages.update(range(int(lo), int(hi) + 1))
            elif part:
                ages.add(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad age list {text!r}") from None
    if not ages or min(ages) < MIN_AGE or max(ages) > MAX_AGE:
        raise argparse.ArgumentTypeError(f"ages must be within {MIN_AGE}..{MAX_AGE}")
    return tuple(sorted(ages))


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _mlp_config(args) -> MlpConfig:
    cfg = MlpConfig(rng_seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, epochs=args.epochs)
    return cfg


def cmd_synth(args) -> int:
    model = default_growth_model(args.seed, noise_px=args.noise_px)
    ds = generate(model, args.n_per_cell, ages=args.ages)
    write_landmark_csv(ds, args.out)
    log.info("wrote %d records to %s", len(ds.records), args.out)
    return 0


def cmd_pai(args) -> int:
    table = compute_dataset_pais(parse_landmark_csv(args.inp))
    for sid, reason in table.rejects:
        print(f"rejected {sid}: {reason}", file=sys.stderr)
    write_pai_csv(table, args.out)
    log.info("wrote %d rows to %s", len(table), args.out)
    return 0


def cmd_pai_list(args) -> int:
    text = pai_listing()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_stats(args) -> int:
    report = run_descriptives(parse_pai_csv(args.data), alpha=args.alpha)
    report.write(args.out)
    for pai, reason in sorted(report.anova_failures.items()):
        log.info("anova skipped for PAI %d: %s", pai, reason)
    return 0


def _select_specs(args) -> list[ExperimentSpec]:
    group = args.group.upper()
    ages = args.ages or tuple(range(MIN_AGE, MAX_AGE + 1))
    specs = []
    if group in ("A", "ALL"):
        specs += build_group_a(ages)
    if group in ("B", "ALL"):
        specs += build_group_b(include_sex_as_input=args.sex_input)
    if group in ("C", "ALL"):
        specs += build_group_c(ages)
    return specs


def cmd_run(args) -> int:
    table = parse_pai_csv(args.data)
    specs = _select_specs(args)
    config = _mlp_config(args)
    plan = CvPlan(args.folds, args.repeats, args.seed)
    result = run_suite(table, specs, plan, args.seed, config=config, jobs=args.jobs)
    write_suite(result, args.out, config)
    for name, msg in result.errors.items():
        print(f"{name}: {msg}", file=sys.stderr)
    for name, rep in result.reports.items():
        log.info("%-16s mean macro F1 %.3f (sd %.3f)", name, rep.mean_macro_f1, rep.std_macro_f1)
    return 0


def cmd_train(args) -> int:
    table = parse_pai_csv(args.data)
    ages = args.ages or tuple(range(MIN_AGE, MAX_AGE + 1))
    target = args.target
    classes = ages if target == "age" else None
    spec = ExperimentSpec("A" if target == "sex" else "C", 0, target, ages, args.sex_mode,
                          classes=classes)
    X, y, rows = spec.design(table)
    if not rows.size:
        raise ValidationError("no rows match the requested ages and sex mode")
    present = [v for v in spec.vocab if v in set(y)]
    config = replace(_mlp_config(args), input_dim=spec.input_dim, output_classes=len(present))
    model, tlog = train(config, X, y, present, normalization=fit_normalization(X))
    save_model(model, args.out)
    log.info("trained on %d rows; final loss %.4f, accuracy %.3f",
             len(rows), tlog.loss[-1], tlog.accuracy[-1])
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = parse_landmark_csv(args.landmarks)
    records = ds.records
    if args.subject is not None:
        records = [r for r in records if r.subject_id == args.subject]
        if not records:
            raise ValidationError(f"subject {args.subject!r} not found")
    elif len(records) != 1:
        raise ValidationError(f"{len(records)} rows in input; pick one with --subject")
    rec = records[0]
    x = compute_pai_vector(rec.landmarks)
    if model.input_dim == x.size + 1:
        x = np.append(x, float(rec.sex == "M"))
    label, probs = predict(model, x)
    out = {
        "subject_id": rec.subject_id,
        "prediction": label,
        "probabilities": {str(v): float(p) for v, p in zip(model.vocab, probs)},
    }
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photoanthro", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    p.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("synth", help="generate a synthetic landmark CSV")
    s.add_argument("--n-per-cell", type=_positive, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ages", type=parse_ages, default=tuple(range(MIN_AGE, MAX_AGE + 1)))
    s.add_argument("--noise-px", type=float, default=1.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pai", help="landmark CSV to PAI CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pai)

    s = sub.add_parser("pai-list", help="print the 208 index definitions")
    s.add_argument("--out")
    s.set_defaults(func=cmd_pai_list)

    s = sub.add_parser("stats", help="boxplot, Shapiro-Wilk and ANOVA tables")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--alpha", type=float, default=0.01)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("run", help="cross-validate experiment groups")
    s.add_argument("--group", choices=["A", "B", "C", "all", "a", "b", "c", "ALL"], required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--folds", type=_positive, default=10)
    s.add_argument("--repeats", type=_positive, default=1)
    s.add_argument("--out", default="results")
    s.add_argument("--ages", type=parse_ages, help="per-age tests, e.g. 6..22")
    s.add_argument("--sex-input", action="store_true",
                   help="add age tests with sex as an extra input")
    s.add_argument("--epochs", type=_positive, help="override the 500 training epochs")
    s.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("train", help="fit one model on all matching rows")
    s.add_argument("--data", required=True)
    s.add_argument("--target", choices=TARGETS, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ages", type=parse_ages)
    s.add_argument("--sex-mode", choices=SEX_MODES, default="all_without_sex")
    s.add_argument("--epochs", type=_positive)
    s.add_argument("--jobs", type=_positive, default=1, help="accepted for symmetry; training is serial")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="classify one face from a landmark CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--landmarks", required=True)
    s.add_argument("--subject", help="subject id when the CSV holds several rows")
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PhotoAnthroError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
