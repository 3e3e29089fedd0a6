"""Regenerates the golden map pairs and the expected metric report.

Run from this directory: python3 generate.py
"""
import json
import struct
from pathlib import Path

import numpy as np
from scipy import stats

HERE = Path(__file__).parent
N, H, W = 12, 8, 8
ROI = {"top": 2, "left": 1, "height": 3, "width": 4}
OVERRIDES = {"m07": {"top": 4, "left": 4, "height": 2, "width": 3}}
ALPHA = 0.01


def write_map(path, a):
    a = a.astype("<f4")
    with open(path, "wb") as f:
        f.write(b"SFMAP1")
        f.write(struct.pack("<II", a.shape[0], a.shape[1]))
        f.write(a.tobytes())


def roi_of(name):
    r = OVERRIDES.get(name, ROI)
    return slice(r["top"], r["top"] + r["height"]), slice(r["left"], r["left"] + r["width"])


def main():
    rng = np.random.default_rng(20240611)
    (HERE / "vanilla").mkdir(exist_ok=True)
    (HERE / "debiased").mkdir(exist_ok=True)
    rrf, adr, dif, diffs = [], [], [], []
    for i in range(N):
        name = f"m{i:02d}"
        v = rng.normal(0.0, 1.0, (H, W)) + 0.4
        rows, cols = roi_of(name)
        v[rows, cols] += 1.0
        d = v.copy()
        d[rows, cols] -= rng.uniform(-0.2, 0.8, d[rows, cols].shape)
        d += rng.normal(0.0, 0.6, (H, W))
        v = v.astype(np.float32).astype(np.float64)
        d = d.astype(np.float32).astype(np.float64)
        write_map(HERE / "vanilla" / f"{name}.sfmap", v)
        write_map(HERE / "debiased" / f"{name}.sfmap", d)
        rrf.append(d[rows, cols].sum() / d.sum())
        adr.append((v[rows, cols] - d[rows, cols]).mean())
        dif.append((d[rows, cols] < v[rows, cols]).mean())
        diffs.append(v[rows, cols].mean() - d[rows, cols].mean())
    diffs = np.array(diffs)
    t = diffs.mean() / (diffs.std(ddof=1) / np.sqrt(N))
    p = stats.t.sf(t, N - 1)
    with open(HERE / "roi.json", "w") as f:
        json.dump({**ROI, "overrides": OVERRIDES}, f, indent=2)
    expected = {
        "RRF": float(np.mean(rrf)),
        "ADR": float(np.mean(adr)),
        "DIF": float(np.mean(dif)),
        "t_statistic": float(t),
        "p_value": float(p),
        "decision": bool(p < ALPHA),
        "alpha": ALPHA,
        "n": N,
    }
    with open(HERE / "expected.json", "w") as f:
        json.dump(expected, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
