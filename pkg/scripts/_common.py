"""Shared helpers for the experiment scripts."""

import os

import numpy as np

RESULTS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "results")


def write_table(name, header, rows):
    os.makedirs(RESULTS, exist_ok=True)
    path = os.path.join(RESULTS, name)
    np.savetxt(path, np.asarray(rows, dtype=float), delimiter=", ", header=", ".join(header), fmt="%.10g")
    print(f"wrote {os.path.normpath(path)}")
