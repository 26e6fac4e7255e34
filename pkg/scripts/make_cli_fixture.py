"""Regenerate the 20 x 30 CLI fixture in tests/data (inputs only).

The golden output is written separately by running the CLI once the
solution has been checked against the conic oracle in the test suite.
"""

import csv
from pathlib import Path

import numpy as np

out = Path(__file__).resolve().parents[1] / "tests" / "data"
out.mkdir(parents=True, exist_ok=True)
rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(2024)))
n, p = 20, 30
labels = np.repeat(np.arange(10), 3)
rng.shuffle(labels)
X = rng.standard_normal((n, p))
beta = np.zeros(p)
beta[labels == 2] = 2.0
beta[labels == 7] = -1.5
y = X @ beta + 0.5 * rng.standard_normal(n)


def write(name, header, rows):
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


write("fixture_X.csv", [f"x{j}" for j in range(p)], [[repr(float(v)) for v in row] for row in X])
write("fixture_y.csv", ["y"], [[repr(float(v))] for v in y])
write("fixture_groups.csv", ["variable", "group"], [[j, int(g)] for j, g in enumerate(labels)])
