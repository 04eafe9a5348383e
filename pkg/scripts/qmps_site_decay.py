"""Per-site qMPS variances for the k-th rotation on every register, next to the closed forms."""

import argparse
import csv
import sys
from dataclasses import dataclass

from plateau.circuit import Observable, build_ansatz
from plateau.closed_form import var_qmps
from plateau.zx import circuit_variance_all_params


@dataclass
class Config:
    n_qubits: int = 8
    pauli: str = "X"
    k: int = 1


def parse_args() -> Config:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--qubits", dest="n_qubits", type=int, default=Config.n_qubits)
    p.add_argument("--pauli", choices="XYZ", default=Config.pauli)
    p.add_argument("-k", type=int, default=Config.k, help="rotation index within each register")
    return Config(**vars(p.parse_args()))


def main(cfg: Config):
    c = build_ansatz("qMPS", cfg.n_qubits)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["site", "param_j", "param_k", "tn", "closed"])
    for i in range(1, cfg.n_qubits + 1):
        tn = circuit_variance_all_params(c, Observable.pauli(cfg.pauli, i))
        for p, v in sorted(tn.items()):
            if p.k != cfg.k:
                continue
            closed = var_qmps(cfg.pauli, cfg.n_qubits, i, p.j, p.k)
            w.writerow([i, p.j, p.k, repr(v), "" if closed is None else repr(float(closed))])


if __name__ == "__main__":
    main(parse_args())
