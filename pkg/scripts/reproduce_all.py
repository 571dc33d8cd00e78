"""Run every reference scenario (errors, objective landscapes, fits) through the command-line interface.

Usage: python scripts/reproduce_all.py [OUTDIR]

Each scenario writes its CSV/JSON artifacts below OUTDIR (default
``results``); the exit code of each run is listed at the end.
"""

import sys
from pathlib import Path

from biofilm_inverse.cli import main

HERE = Path(__file__).resolve().parent.parent
TWO = str(HERE / "configs" / "two_parameter_fit.ini")
EIGHT = str(HERE / "configs" / "eight_parameter_fit.ini")
REDUCED_GUESS = "d1=1,d2=1.0005,K1=1.0032,K3=0.2268,K4=1,a=1.0041,b=2.0007"


def scenarios(out):
    yield "convergence example1", ["convergence", "--case", "example1", "--meshes", "0.1,0.05,0.01",
                                   "--out", f"{out}/convergence_example1.csv"]
    yield "convergence example2 (dt = dx/2)", ["convergence", "--case", "example2", "--meshes", "0.1,0.05,0.01",
                                               "--dt-ratio", "0.5",
                                               "--out", f"{out}/example2_convergence.csv"]
    yield "recovery example2 (stated points)", ["recover", "--case", "example2", "--stated-points",
                                                "--out", f"{out}/recovery_example2_stated.json"]
    yield "recovery example2 (scanned points)", ["recover", "--case", "example2",
                                                 "--out", f"{out}/recovery_example2.json"]
    yield "recovery example1 (scanned points)", ["recover", "--case", "example1",
                                                 "--out", f"{out}/recovery_example1.json"]
    for mesh in ("0.1", "0.05", "0.01"):
        yield f"floor at truth {mesh}", ["scan", "--mesh", mesh, "--weighting", "sum", "--a-range", "1,1",
                                         "--b-range", "2,2", "--counts", "1,1",
                                         "--out", f"{out}/floor_at_truth_{mesh}.csv"]
        yield f"scan H(a,b) {mesh}", ["scan", "--config", TWO, "--mesh", mesh, "--weighting", "sum",
                                      "--out", f"{out}/scan_ab_{mesh}.csv"]
        yield f"section H(a,2) {mesh}", ["scan", "--config", TWO, "--mesh", mesh, "--weighting", "sum",
                                         "--b-range", "2,2", "--counts", "41,1",
                                         "--out", f"{out}/section_a_{mesh}.csv"]
        yield f"section H(1,b) {mesh}", ["scan", "--config", TWO, "--mesh", mesh, "--weighting", "sum",
                                         "--a-range", "1,1", "--counts", "1,31",
                                         "--out", f"{out}/section_b_{mesh}.csv"]
    for a0 in ("0", "2", "3"):
        yield f"two-parameter fit a0={a0}", ["fit", "--config", TWO, "--guess", f"a={a0},b=1",
                                             "--out", f"{out}/fit_ab_a0_{a0}.json"]
    for d1 in ("1.3", "0.5"):
        yield f"eight-parameter flux-only d1_0={d1}", ["fit", "--config", EIGHT, "--flavor", "flux",
                                                       "--guess", f"d1={d1}",
                                                       "--out", f"{out}/fit8_flux_d1_{d1}.json"]
        yield f"eight-parameter flux+biomass d1_0={d1}", ["fit", "--config", EIGHT, "--guess", f"d1={d1}",
                                                          "--out", f"{out}/fit8_flux_biomass_d1_{d1}.json"]
    yield "reduced seven-parameter fit", ["fit", "--config", EIGHT, "--unknowns", "d1,d2,K1,K3,K4,a,b",
                                          "--reduce-k2", "--guess", REDUCED_GUESS,
                                          "--out", f"{out}/fit7_reduced.json"]
    yield "noisy two-parameter fit", ["fit", "--config", TWO, "--noise", "0.01", "--seed", "1",
                                      "--out", f"{out}/fit_ab_noise.json"]


def run(out="results"):
    Path(out).mkdir(parents=True, exist_ok=True)
    status = []
    for name, argv in scenarios(out):
        print(f"== {name}", flush=True)
        status.append((name, main(argv)))
    print("\nexit codes")
    for name, code in status:
        print(f"  {code}  {name}")
    return status


if __name__ == "__main__":
    run(sys.argv[1] if len(sys.argv) > 1 else "results")
