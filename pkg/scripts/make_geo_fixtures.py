#!/usr/bin/env python3
"""Generate the bundled geomagnetic-style fixture CSVs.

The values are synthetic smooth fields with realistic scales (a
dipole-like total intensity in nT and a sinusoidal declination in
degrees); they stand in for the web service the pipeline does not
call. Train rows sample random locations; test rows form the 5-degree
grid at zero altitude (37 x 72 = 2664 locations).
"""

import csv
import sys
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.2


def total_intensity(phi, theta, h):
    lat = np.radians(phi)
    lon = np.radians(theta)
    radial = (EARTH_RADIUS_KM / (EARTH_RADIUS_KM + h)) ** 3
    base = 30500.0 * np.sqrt(1.0 + 3.0 * np.sin(lat) ** 2)
    ripple = 1500.0 * np.cos(lat) * np.sin(2.0 * lon) + 900.0 * np.sin(3.0 * lat)
    return radial * (base + ripple)


def declination(phi, theta, h):
    lat = np.radians(phi)
    lon = np.radians(theta)
    damp = 1.0 / (1.0 + h / 2000.0)
    return damp * (
        12.0 * np.sin(lon) * np.cos(lat)
        + 8.0 * np.sin(2.0 * lat) * np.cos(lon / 2.0)
        + 3.0 * np.sin(lat)
    )


def write_rows(path, phi, theta, h):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi", "theta", "h", "total_intensity", "declination"])
        ti = total_intensity(phi, theta, h)
        dec = declination(phi, theta, h)
        for row in zip(phi, theta, h, ti, dec):
            writer.writerow([f"{v:.6f}" for v in row])


def main(out_dir="data", n_train=2000, seed=20240815):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(-90.0, 90.0, n_train)
    theta = rng.uniform(-180.0, 180.0, n_train)
    h = rng.uniform(0.0, 600.0, n_train)
    write_rows(out / "geomagnetic_train.csv", phi, theta, h)

    grid_phi = np.arange(-90.0, 90.0 + 1e-9, 5.0)
    grid_theta = np.arange(-180.0, 175.0 + 1e-9, 5.0)
    pp, tt = np.meshgrid(grid_phi, grid_theta, indexing="ij")
    write_rows(
        out / "geomagnetic_test.csv",
        pp.ravel(), tt.ravel(), np.zeros(pp.size),
    )
    print(f"wrote {out / 'geomagnetic_train.csv'} ({n_train} rows)")
    print(f"wrote {out / 'geomagnetic_test.csv'} ({pp.size} rows)")


if __name__ == "__main__":
    main(*sys.argv[1:2])
