"""End-to-end tour on a small synthetic cohort.

Generates landmarks, turns them into the 208 iris-normalized indices, prints
a few descriptive statistics and cross-validates the two age-threshold
classifiers with a shortened training run.

    python demos/walkthrough.py [--n-per-cell 12] [--epochs 60]
"""

import argparse

import numpy as np

from photoanthro import (
    CvPlan,
    MlpConfig,
    compute_dataset_pais,
    default_growth_model,
    enumerate_pais,
    generate,
    run_descriptives,
)
from photoanthro.experiments import build_group_c, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-per-cell", type=int, default=12)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    ds = generate(default_growth_model(args.seed), args.n_per_cell)
    table = compute_dataset_pais(ds)
    print(f"{len(ds.records)} faces -> PAI table {table.features.shape}, {len(table.rejects)} rejected")

    defs = {d.index: d for d in enumerate_pais()}
    report = run_descriptives(table)
    print("ANOVA for the first five indices:")
    for a in report.anova[:5]:
        col = table.features[:, a.pai_index - 1]
        print(f"  PAI {a.pai_index:3d} {defs[a.pai_index].description:<36s} median {np.median(col):6.3f}"
              f"  p(sex) {a.sex.p_value:.1e}  p(age) {a.age.p_value:.1e}")
    tested = [row for row in report.shapiro if row[-1] == "ok"]
    kept = sum(1 for row in tested if row[5] >= report.alpha)
    print(f"Shapiro-Wilk: normality kept for {kept}/{len(tested)} (PAI, sex, age) samples")

    specs = [s for s in build_group_c() if s.sex_mode == "all_without_sex"]
    res = run_suite(table, specs, CvPlan(seed=args.seed), args.seed, MlpConfig(epochs=args.epochs))
    for name, rep in res.reports.items():
        print(f"{name}: mean macro F1 {rep.mean_macro_f1:.3f} (sd {rep.std_macro_f1:.3f})")
        print(rep.summed_confusion.to_csv().rstrip())


if __name__ == "__main__":
    main()
