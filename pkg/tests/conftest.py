from pathlib import Path
import os
import sys


REPO_ROOT = Path(__file__).resolve().parents[1]
PYTHON_PACKAGE_ROOT = REPO_ROOT / "python"

os.environ.setdefault("MPLBACKEND", "Agg")

if str(PYTHON_PACKAGE_ROOT) not in sys.path:
    sys.path.insert(0, str(PYTHON_PACKAGE_ROOT))
