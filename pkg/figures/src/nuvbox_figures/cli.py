"""render-figures: turn nuvbox CSV output into figure files."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from nuvbox_figures.render import FIGURES, SchemaError, render, renderable_figures


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render figures from nuvbox CSV/JSON results.",
    )
    parser.add_argument("--in", dest="in_dir", required=True, help="directory with nuvbox CSV output")
    parser.add_argument("--out", dest="out_dir", required=True, help="directory for image files")
    parser.add_argument("--only", default=None, help=f"render a single figure id ({', '.join(sorted(FIGURES))})")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    if args.only is not None:
        targets = [args.only]
    else:
        targets = renderable_figures(args.in_dir)
        if not targets:
            print(f"error: no renderable inputs found in {args.in_dir}", file=sys.stderr)
            return 2
    failures = 0
    for fid in targets:
        try:
            path = render(fid, args.in_dir, args.out_dir)
            print(f"wrote {path}")
        except SchemaError as exc:
            print(f"error: {fid}: {exc}", file=sys.stderr)
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
