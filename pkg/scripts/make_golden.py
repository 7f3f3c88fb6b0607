#!/usr/bin/env python3
"""Regenerate the bundled golden image for the CLI determinism test.

Run only after the full suite passes; the golden pins the verified output:

    python scripts/make_golden.py
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from golden_scene import GOLDEN_DIR, GOLDEN_HEATMAP, GOLDEN_IMAGE, write_golden_scene  # noqa: E402
from tetray.cli import main as cli_main  # noqa: E402


def main() -> int:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        scene = write_golden_scene(Path(tmp))
        rc = cli_main(["render", "--scene", str(scene),
                       "--out", str(GOLDEN_IMAGE),
                       "--heatmap", str(GOLDEN_HEATMAP)])
        if rc != 0:
            return rc
    print(f"wrote {GOLDEN_IMAGE} and {GOLDEN_HEATMAP}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
