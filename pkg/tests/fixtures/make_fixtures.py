"""Regenerate the bundled CSV fixtures: ``python tests/fixtures/make_fixtures.py``."""

from pathlib import Path

import numpy as np

from fourier_gpc.data import Dataset, save_csv
from fourier_gpc.datasets import make_blobs

HERE = Path(__file__).parent


def main():
    save_csv(HERE / "blobs.csv", make_blobs(300, seed=11))
    # classes 16 units apart along x0: any sensible model is perfect
    rng = np.random.Generator(np.random.PCG64(5))
    y = np.repeat([0, 1], 60)
    X = rng.standard_normal((120, 2)) * 0.5
    X[:, 0] += np.where(y == 1, 8.0, -8.0)
    save_csv(HERE / "separable.csv", Dataset(X, y))
    save_csv(HERE / "three_dims.csv", Dataset(rng.standard_normal((20, 3)), np.tile([0, 1], 10)))
    with open(HERE / "headerless.csv", "w") as fh:
        for xi, yi in zip(rng.standard_normal((12, 2)), np.tile([0, 1], 6)):
            fh.write(f"{float(xi[0])!r},{float(xi[1])!r},{yi}\n")


if __name__ == "__main__":
    main()
