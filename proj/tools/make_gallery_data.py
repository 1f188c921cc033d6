"""Regenerates the gallery data files. Output is deterministic."""
import csv
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent / "gallery"


def write(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def blobs(rng, n, centers, spread):
    labels = rng.integers(0, len(centers), n)
    pts = np.array(centers)[labels] + rng.normal(0, spread, (n, 2))
    return pts


def main():
    rng = np.random.default_rng(20240601)
    # Pickup-like points around a few hot spots, with an hour column.
    pts = blobs(rng, 10000, [(-73.98, 40.75), (-73.95, 40.78), (-73.87, 40.77), (-74.0, 40.71)], 0.012)
    hours = rng.integers(0, 24, len(pts))
    write(ROOT / "density_data_chunking" / "data.csv", ["lon", "lat", "hour"],
          [(f"{x:.6f}", f"{y:.6f}", int(h)) for (x, y), h in zip(pts, hours)])

    pts = blobs(rng, 2000, [(2, 2), (8, 3), (5, 8), (1, 7), (9, 9)], 0.9)
    rows = [(f"{x:.5f}", f"{y:.5f}") for x, y in pts]
    write(ROOT / "kmeans_process" / "data.csv", ["x", "y"], rows)
    write(ROOT / "kmeans_mixed" / "data.csv", ["x", "y"], rows)

    pts = blobs(rng, 3000, [(-73.98, 40.75), (-73.95, 40.78), (-73.87, 40.77)], 0.015)
    hours = rng.integers(0, 24, len(pts))
    write(ROOT / "backend_demo" / "data.csv", ["lon", "lat", "hour", "weekday"],
          [(f"{x:.6f}", f"{y:.6f}", int(h), int(i % 7)) for i, ((x, y), h) in enumerate(zip(pts, hours))])


if __name__ == "__main__":
    main()
