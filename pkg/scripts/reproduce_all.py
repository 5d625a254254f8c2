#!/usr/bin/env python3
"""Write the CSV series behind every figure into figures/ (or the given directory)."""
import argparse
import os

from gigdeploy import experiments as ex

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="figures")
ap.add_argument("--resolution", type=int, default=None, help="override points per axis")
ap.add_argument("--skip-mmk", action="store_true", help="skip the slow M/M/k map")
ap.add_argument("--jobs", type=int, default=1)
args = ap.parse_args()

os.makedirs(args.out, exist_ok=True)
for fig in ex.FIGURES:
    if fig == "figMMk" and args.skip_mmk:
        continue
    for stem, (cols, rows) in ex.reproduce(fig, args.resolution, args.jobs).items():
        path = os.path.join(args.out, f"{stem}.csv")
        ex.emit(ex.csv_text(cols, rows), path)
        print(path, len(rows), "rows")
