#!/usr/bin/env python3
"""
Records and Champions - Command Line Launcher
=============================================
Runs the recmax CLI from a source checkout without installing the package.

Usage:
    python scripts/recmax.py norm --model logistic:2 --x -3,-4
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from recmax.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
