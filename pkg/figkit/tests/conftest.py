import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def report_dir(tmp_path_factory):
    """Analysis bundle from the training pipeline, built once per session.

    The pipeline is driven through its CLI: the renderer consumes only the
    CSV files, so the tests do the same.
    """
    root = tmp_path_factory.mktemp("report")
    proc = subprocess.run(
        [sys.executable, "-m", "amdkit.cli", "report", "--preset", "desk",
         "--seed", "1", "--epochs", "60", "--out-dir", str(root)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return root / "analysis_odds_ratio"
