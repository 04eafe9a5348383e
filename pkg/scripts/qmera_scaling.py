"""Contract qMERA variances at the widest and narrowest cones and fit power laws in N."""

import argparse
import csv
import sys
from dataclasses import dataclass, fields

from plateau.circuit import Observable, build_ansatz
from plateau.closed_form import fit_power_law, qmera_reference_sites
from plateau.zx import circuit_variance


@dataclass
class Config:
    sizes: tuple[int, ...] = (4, 8, 16)
    all_sites: bool = False   # every site instead of the two reference sites


def parse_args() -> Config:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=lambda s: tuple(int(x) for x in s.split(",")), default=Config.sizes)
    p.add_argument("--all-sites", action="store_true")
    args = p.parse_args()
    return Config(**{f.name: getattr(args, f.name) for f in fields(Config)})


def main(cfg: Config):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n_qubits", "site", "role", "variance"])
    curves = {"lower": [], "upper": []}
    for n in cfg.sizes:
        c = build_ansatz("qMERA", n)
        lower, upper = qmera_reference_sites(n)
        sites = range(1, n + 1) if cfg.all_sites else (lower, upper)
        for i in sites:
            v = circuit_variance(c, Observable.pauli("X", i), (1, 1))
            role = "lower" if i == lower else "upper" if i == upper else ""
            if role:
                curves[role].append((n, v))
            w.writerow([n, i, role, repr(v)])
    for role, pts in curves.items():
        if len({n for n, _ in pts}) >= 2:
            fit = fit_power_law(pts)
            print(f"# {role}: exponent={fit.exponent:.4f} prefactor={fit.prefactor:.4g} r2={fit.r_squared:.5f}")


if __name__ == "__main__":
    main(parse_args())
