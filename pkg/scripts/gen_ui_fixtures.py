#!/usr/bin/env python3
"""Freeze reference TF-resampler outputs for the frontend test suite.

Writes frontend/tests/fixtures/tf_resample.json: 20 random control-point
sets plus their 256-entry tables resampled by the reference implementation.
"""

import json
import sys
from pathlib import Path

import numpy as np

from tetray.transfer import TransferFunction

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def main() -> int:
    rng = np.random.default_rng(42)
    cases = []
    for i in range(20):
        n_pts = int(rng.integers(1, 9))
        xs = np.sort(rng.random(n_pts))
        pts = [[float(x), *[float(v) for v in rng.random(4)]] for x in xs]
        tf = TransferFunction.from_control_points(pts, size=256)
        cases.append({"points": pts, "table": tf.table.tolist()})
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / "tf_resample.json"
    path.write_text(json.dumps({"size": 256, "cases": cases}))
    print(f"wrote {path} ({len(cases)} cases)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
