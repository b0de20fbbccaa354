"""Shared helpers for the figure-data scripts."""

import argparse
import csv
from pathlib import Path


def parse_out(description: str, default: str) -> Path:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out", type=Path, default=Path("figures") / default)
    return ap.parse_args().out


def write_rows(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        wr.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
