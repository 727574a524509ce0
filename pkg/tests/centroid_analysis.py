"""Mel-band centroid analysis of translated spectrograms.

Reads an ``.npz`` archive whose keys are ``<group>_<index>`` with groups
``a`` (source domain), ``b`` (target domain) and ``ab`` (A translated to B),
each holding one normalized ``mel x frames`` matrix. Prints a JSON summary.

Per frame, the centroid is the mean mel-band index weighted by ``(v + 1) / 2``
(0 at the silence floor, 1 at the corpus peak), divided by ``mel - 1`` so it
lies in [0, 1]. Frames with no weight at all are skipped. The group centroid
is the mean over all frames of all its matrices, and

    shift = (centroid(ab) - centroid(a)) / (centroid(b) - centroid(a))

is the fraction of the way the translations moved from A toward B.

Usage: python centroid_analysis.py archive.npz

Deliberately self-contained (numpy only) so it does not share code with the
package under test.
"""
import json
import sys

import numpy as np


def frame_centroids(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    w = (np.clip(v, -1.0, 1.0) + 1.0) / 2.0
    total = w.sum(axis=0)
    bands = np.arange(v.shape[0], dtype=np.float64)[:, None]
    keep = total > 0
    return (w[:, keep] * bands).sum(axis=0) / total[keep] / (v.shape[0] - 1)


def group_centroid(matrices) -> float:
    return float(np.mean(np.concatenate([frame_centroids(m) for m in matrices])))


def mean_profile(matrices) -> np.ndarray:
    return np.mean(np.concatenate([np.asarray(m, dtype=np.float64) for m in matrices], axis=1), axis=1)


def analyze(archive) -> dict:
    groups = {"a": [], "b": [], "ab": []}
    for key in sorted(archive.keys(), key=lambda k: (k.rsplit("_", 1)[0], int(k.rsplit("_", 1)[1]))):
        group = key.rsplit("_", 1)[0]
        if group in groups:
            groups[group].append(archive[key])
    for name, mats in groups.items():
        if not mats:
            raise ValueError(f"archive has no '{name}_<i>' entries")
    c = {name: group_centroid(mats) for name, mats in groups.items()}
    shift = (c["ab"] - c["a"]) / (c["b"] - c["a"])
    # correlation of the translated mean band profile with each domain's profile
    prof = {name: mean_profile(mats) for name, mats in groups.items()}
    corr_b = float(np.corrcoef(prof["ab"], prof["b"])[0, 1])
    corr_a = float(np.corrcoef(prof["ab"], prof["a"])[0, 1])
    return {"centroid_a": c["a"], "centroid_b": c["b"], "centroid_ab": c["ab"], "shift": shift,
            "profile_corr_b": corr_b, "profile_corr_a": corr_a,
            "counts": {k: len(v) for k, v in groups.items()}}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(__doc__.strip().splitlines()[-3], file=sys.stderr)
        return 2
    with np.load(argv[0]) as archive:
        print(json.dumps(analyze(archive), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
