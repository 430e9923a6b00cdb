#!/usr/bin/env python3
"""Write the UCI optical digits data bundled with scikit-learn as a binary
LibSVM file: label +1 for digits 5-9, -1 for digits 0-4. Zero pixels are
omitted, feature indices are 1-based."""
import sys

from sklearn.datasets import load_digits


def main(path):
    data = load_digits()
    with open(path, "w") as out:
        for row, target in zip(data.data, data.target):
            label = "+1" if target >= 5 else "-1"
            feats = " ".join(f"{j + 1}:{int(v)}" for j, v in enumerate(row) if v != 0)
            out.write(f"{label} {feats}\n" if feats else f"{label}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/digits.libsvm")
