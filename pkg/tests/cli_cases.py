"""A small end-to-end run of every CLI command, used for determinism checks.

All paths are relative, so the run must happen with the working directory set
to the target folder; the resolved configs embedded in the reports then do not
depend on where the run took place.
"""

import json
import os

import numpy as np

from universality_lab.cli import main
from universality_lab.geometry import GridSpec, annulus_mask, mask_to_pgm, points_to_csv


def write_inputs():
    z = 0.5 + 0.3 * np.exp(2j * np.pi * np.arange(40) / 40)
    t = 1 / (z - 0.1) + z ** 2
    rows = ["re,im,t_re,t_im"] + [",".join(repr(float(v)) for v in (x.real, x.imag, y.real, y.imag))
                                  for x, y in zip(z, t)]
    with open("fit.csv", "w") as fh:
        fh.write("\n".join(rows) + "\n")
    grid = GridSpec(0j, 1.0, 64)
    with open("ring.pgm", "wb") as fh:
        fh.write(mask_to_pgm(annulus_mask(grid, 0, 0.3, 0.6).mask))
    with open("a.csv", "w") as fh:
        fh.write(points_to_csv(np.array([0, 1j, 0.5 + 0.5j])))
    with open("b.csv", "w") as fh:
        fh.write(points_to_csv(np.array([0.1, 1.2j])))
    # 0.2 and its partner share a Blaschke image, so h = g o f^n cannot tell them apart
    w = 0.2 * (0.2 - 0.6) / (1 - 0.6 * 0.2)
    partner = max(np.roots([1, -0.6 + 0.6 * w, -w]), key=lambda r: abs(r - 0.2))
    with open("pts.csv", "w") as fh:
        fh.write(points_to_csv(np.array([0.2, partner, 0.1 + 0.1j, -0.3j])))
    schedule = {
        "command": "universal-build", "symbol": "blaschke:0.6", "punctures": "0,0",
        "targets": [{"target": "const", "coeffs": [[1, 0]],
                     "L": {"center": [0, 0], "radius": 0.15, "samples": 64}, "eps": 1e-3}],
    }
    with open("schedule.json", "w") as fh:
        json.dump(schedule, fh)
    finite = {"command": "universal-build", "symbol": "poly:0;0;1", "guess": "0.1,0",
              "finite": {"E": [[0.3, 0], [0.5, 0]], "vectors": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]],
                         "eps": 1e-6}}
    with open("finite.json", "w") as fh:
        json.dump(finite, fh)


RUNS = [
    ["classify", "--symbol", "blaschke:0.6", "--guess", "0.1,0.0", "--out", "classify.json"],
    ["basin", "--res", "64", "--out", "basin.pgm"],
    ["chart-table", "--samples", "50", "--out", "chart.csv"],
    ["chart-table", "--symbol", "poly:0;1;1", "--guess", "0.01,0", "--samples", "20", "--out", "abel.csv"],
    ["render-g0", "--res", "128", "--out", "g0.pgm"],
    ["runge-fit", "--input", "fit.csv", "--poles", "0.1,0:1", "--degree", "4", "--out", "fit.json"],
    ["universal-build", "--config", "schedule.json", "--out", "sched.json"],
    ["universal-build", "--config", "finite.json", "--out", "finite_out.json"],
    ["omega-check", "--schedule", "sched.json", "--points", "pts.csv", "--out", "omega.json"],
    ["hull", "--mask", "ring.pgm", "--out", "hull.pgm"],
    ["hausdorff", "--a", "a.csv", "--b", "b.csv", "--out", "hd.json"],
    ["boxdim", "--mask", "ring.pgm", "--out", "box.json"],
]


def run_all(folder):
    """Run every command inside ``folder``; returns (command, exit code) pairs and the file bytes."""
    here = os.getcwd()
    os.makedirs(folder, exist_ok=True)
    os.chdir(folder)
    try:
        write_inputs()
        codes = [(argv[0], main(argv)) for argv in RUNS]
        files = {}
        for name in sorted(os.listdir(".")):
            with open(name, "rb") as fh:
                files[name] = fh.read()
    finally:
        os.chdir(here)
    return codes, files
