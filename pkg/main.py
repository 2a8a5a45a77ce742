"""Run the dwb CLI from a source checkout: ``python main.py power-sweep --trials 10``."""

from __future__ import annotations

import sys
from pathlib import Path

SRC_DIR = Path(__file__).resolve().parent / "src"
if SRC_DIR.is_dir() and str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from dwbsim.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
