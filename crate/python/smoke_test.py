#!/usr/bin/env python3
"""Smoke test for the ttesurv_py extension module.

Builds the extension, generates a small synthetic cohort, trains a model,
predicts curves and event times, and checks the metric report — exercising
every exported function once.

Run from the repository root:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "ttesurv-py", "--release"], cwd=ROOT, check=True
    )
    built = ROOT / "target" / "release" / "libttesurv_py.so"
    dest = Path(__file__).resolve().parent / "ttesurv_py.so"
    shutil.copyfile(built, dest)
    return dest


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b}"


def main() -> None:
    build_extension()
    sys.path.insert(0, str(Path(__file__).resolve().parent))
    import ttesurv_py as tt

    # curve algebra round trip
    hazards = [0.1, 0.2, 0.3, 0.4]
    surv = tt.hazard_to_survival(hazards)
    approx(surv[0], 0.9)
    approx(surv[-1], 0.9 * 0.8 * 0.7 * 0.6)
    back = tt.survival_to_hazard(surv)
    for h, b in zip(hazards, back):
        approx(h, b, 1e-12)
    pmf = tt.event_time_pmf(hazards)
    approx(sum(pmf) + surv[-1], 1.0, 1e-12)

    e_row, c_row = tt.build_label_matrix(3, True, 5)
    assert e_row == [1, 1, 0, 0, 0] and c_row == [0, 0, 1, 0, 0]

    # event-time prediction on a hand-made curve
    steep = tt.hazard_to_survival([0.01] * 5 + [0.6] * 5)
    infl = tt.inflection_time(steep, smoothing_window=1)
    assert abs(infl["t_hat"] - 6) <= 1, infl
    thr = tt.threshold_time(steep, 0.5)
    assert thr["t_hat"] == 6, thr

    theta = tt.fit_threshold([steep], [6], [True])
    assert 0.0 < theta < 1.0

    # metrics on perfectly anti-ordered risks
    curves = [tt.hazard_to_survival([h] * 4) for h in (0.8, 0.5, 0.2)]
    c = tt.concordance_index(curves, [1, 2, 3], [True, True, True])
    approx(c, 1.0)
    a = tt.auroc_pooled(curves, [1, 2, 3], [True, True, False])
    assert 0.0 <= a <= 1.0

    # end-to-end: synthesize, train, predict, evaluate
    with tempfile.TemporaryDirectory() as tmp:
        cohort = Path(tmp) / "cohort.csv"
        oracle = Path(tmp) / "oracle.csv"
        tt.generate_cohort(
            str(cohort), str(oracle), n=150, horizon=10, censor_hazard=0.05, seed=7
        )
        assert cohort.exists() and oracle.exists()

        ckpt = tt.train_model(str(cohort), epochs=5, hidden_size=8, seed=7)
        assert json.loads(ckpt)["version"] == 1

        ensembles = tt.predict_cohort(ckpt, str(cohort), seed=7)
        assert len(ensembles) == 150
        for entry in ensembles.values():
            mean = entry["mean"]
            assert len(mean) == 10
            assert all(x >= y - 1e-12 for x, y in zip(mean, mean[1:]))

        preds = tt.predict_times(
            {i: e["mean"] for i, e in ensembles.items()}, method="inflection"
        )
        # recover each record's final row for (t, event)
        last = {}
        for line in cohort.read_text().splitlines()[1:]:
            cols = line.split(",")
            last[cols[0]] = (int(cols[1]), cols[-1] == "1")
        outcomes = [(i, t, e) for i, (t, e) in last.items()]

        report = json.loads(
            tt.evaluate(
                {i: e["mean"] for i, e in ensembles.items()},
                {i: (p["t_hat"], p["spread"]) for i, p in preds.items()},
                outcomes,
            )
        )
        for key in (
            "auroc",
            "c_index",
            "distance_score",
            "score_std",
            "n_records",
            "n_comparable_pairs",
            "per_window",
        ):
            assert key in report, key
        assert report["n_records"] == 150
        assert math.isfinite(report["distance_score"])

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
