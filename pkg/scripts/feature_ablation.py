"""Nearest-centroid accuracy on synthetic accelerometer windows, per feature group.

Fits on one seeded batch and scores on another, for every coarse activity
class. Prints a table of accuracy and macro F1 per group.

    python scripts/feature_ablation.py --per-class 60 --seeds 5
"""

from __future__ import annotations

import argparse

import numpy as np

from dailylog.imu_features import BLOCK_NAMES, imu_block
from dailylog.inference import CentroidModel
from dailylog.metrics import accuracy, confusion, macro_prf
from dailylog.synth import imu_pattern
from dailylog.vocab import SYNTH_CLASSES

GROUPS = {
    "time": range(0, 9),
    "frequency": range(9, 15),
    "autocorr": range(15, 17),
    "axis": range(17, 26),
    "all": range(0, 26),
}


def batch(rng, per_class, n, fs):
    X, y = [], []
    for cls in SYNTH_CLASSES:
        for _ in range(per_class):
            X.append(imu_block(imu_pattern(cls, n, fs, rng)))
            y.append(cls)
    return np.array(X), y


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--per-class", type=int, default=60)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--clip-s", type=float, default=10.0)
    ap.add_argument("--fs", type=float, default=50.0)
    args = ap.parse_args(argv)

    n = int(args.clip_s * args.fs)
    rows = {g: [] for g in GROUPS}
    for seed in range(args.seeds):
        rng = np.random.Generator(np.random.PCG64(seed))
        Xtr, ytr = batch(rng, args.per_class, n, args.fs)
        Xte, yte = batch(rng, args.per_class, n, args.fs)
        for g, idx in GROUPS.items():
            cols = list(idx)
            # pad to the full block so CentroidModel's shape check holds
            mask = np.zeros(len(BLOCK_NAMES))
            mask[cols] = 1.0
            model = CentroidModel.fit(Xtr * mask, ytr)
            pred = [model.predict(x * mask) for x in Xte]
            m = confusion(yte, pred, SYNTH_CLASSES)
            rows[g].append((accuracy(m), macro_prf(m)[2]))

    print(f"{'group':<10} {'n_feat':>6} {'accuracy':>9} {'macro_f1':>9}")
    for g, vals in rows.items():
        acc, f1 = np.mean(vals, axis=0)
        print(f"{g:<10} {len(GROUPS[g]):>6} {acc:>9.3f} {f1:>9.3f}")


if __name__ == "__main__":
    main()
