"""Build a render-figures spec for an analysis directory and run it.

Points the standalone figkit renderer at the CSV files one analysis run
leaves behind. The coupling is files-only: this script writes a JSON spec
naming the inputs and shells out to the render-figures console script.

Usage:
  python3 scripts/render_report_figures.py runs/report/analysis_odds_ratio
  python3 scripts/render_report_figures.py runs/report/analysis_odds_ratio \
      --out-dir figures --format svg --spec-only
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

FIGURES = (
    ("importance_scatter", "importance_scatter.csv"),
    ("acquisition_sweep", "acquisition_correlation.csv"),
    ("mi_strip", "mi_summary.csv"),
    ("rsa_heatmap", "rsa.csv"),
)


def build_spec(analysis_dir: Path, out_dir: Path, fmt: str) -> list[dict]:
    spec = []
    for figure_id, csv_name in FIGURES:
        csv_path = analysis_dir / csv_name
        if not csv_path.is_file():
            raise SystemExit(f"error: {csv_path} not found; "
                             "expected an analyze/report output directory")
        spec.append({
            "figure_id": figure_id,
            "inputs": [str(csv_path)],
            "output": str(out_dir / f"{figure_id}.{fmt}"),
        })
    return spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("analysis_dir", type=Path,
                        help="an analysis_* directory produced by "
                             "amdkit analyze or report")
    parser.add_argument("--out-dir", type=Path,
                        help="where the images go (default: analysis_dir/figures)")
    parser.add_argument("--format", choices=["png", "svg"], default="png")
    parser.add_argument("--spec-only", action="store_true",
                        help="write figures.json but do not render")
    parser.add_argument("--dump-back", action="store_true",
                        help="ask the renderer to re-emit the plotted values")
    args = parser.parse_args(argv)

    out_dir = args.out_dir or args.analysis_dir / "figures"
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = build_spec(args.analysis_dir, out_dir, args.format)

    spec_path = out_dir / "figures.json"
    spec_path.write_text(json.dumps(spec, indent=2) + "\n")
    print(f"wrote {spec_path}")
    if args.spec_only:
        return 0

    cmd = ["render-figures", "--spec", str(spec_path)]
    if args.dump_back:
        cmd.append("--dump-back")
    return subprocess.run(cmd).returncode


if __name__ == "__main__":
    sys.exit(main())
