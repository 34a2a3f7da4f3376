#!/usr/bin/env python3
"""
Reference external simulator: the polynomial validation model over the file protocol

Usage:
  python scripts/echo_polynomial.py --degree 3 [--grid midpoint] [--sigma 0.0]
      --params params.json --seed 7 --steps 2000 --out out.csv
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

# Add the project root to Python path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from models.builtin_models import PolynomialModel


def main() -> int:
    parser = argparse.ArgumentParser(description="Polynomial model over the file protocol")
    parser.add_argument("--degree", type=int, required=True)
    parser.add_argument("--grid", choices=["midpoint", "uniform"], default="midpoint")
    parser.add_argument("--sigma", type=float, default=0.0)
    parser.add_argument("--params", required=True)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--steps", type=int, required=True)
    parser.add_argument("--out", required=True)
    # Fault injection for protocol tests
    parser.add_argument("--drop-rows", type=int, default=0)
    parser.add_argument("--sleep", type=float, default=0.0)
    args = parser.parse_args()

    if args.sleep:
        time.sleep(args.sleep)

    model = PolynomialModel.on_grid(args.degree, args.steps, args.grid, args.sigma)
    with open(args.params, "r", encoding="utf-8") as f:
        values = json.load(f)
    coefficients = np.array([float(values[name]) for name in model.parameter_names])

    series = model.evaluate(coefficients, args.seed)[0]
    rows = series[: len(series) - args.drop_rows] if args.drop_rows else series

    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(model.variable_names) + "\n")
        for value in rows:
            f.write(repr(float(value)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
