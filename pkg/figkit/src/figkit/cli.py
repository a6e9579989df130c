"""render-figures: draw one or more figures from a JSON spec file.

The spec file holds a single figure spec or a list of them; each entry names
a figure_id, its input CSV, the output image path, and optional style keys
(width, height, dpi, title). --dump-back additionally writes the plotted
table next to each image as <output stem>.data.csv.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureSpec, dump_back_path, render
from .tables import FigureInputError


def load_specs(path: Path) -> list[FigureSpec]:
    if not path.exists():
        raise FigureInputError(f"missing spec file: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FigureInputError(f"{path}: not valid JSON ({e})") from None
    entries = raw if isinstance(raw, list) else [raw]
    if not entries:
        raise FigureInputError(f"{path}: spec list is empty")
    return [FigureSpec.from_dict(entry) for entry in entries]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render analysis-bundle CSVs into figures.")
    parser.add_argument("--spec", required=True,
                        help="JSON file: one figure spec or a list of them")
    parser.add_argument("--dump-back", action="store_true",
                        help="also write each plotted table as CSV")
    args = parser.parse_args(argv)
    try:
        specs = load_specs(Path(args.spec))
        for spec in specs:
            out = render(spec, dump_back=args.dump_back)
            msg = f"wrote {out}"
            if args.dump_back:
                msg += f" (+ {dump_back_path(out)})"
            print(msg)
    except FigureInputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
