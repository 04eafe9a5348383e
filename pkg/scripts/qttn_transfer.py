"""Exact qTTN X_1 variance against its leading-eigenvalue approximation."""

import argparse
from dataclasses import dataclass

from plateau.circuit import Observable, build_ansatz
from plateau.closed_form import QttnTransfer, var_qttn_x1, var_qttn_x1_asymptotic, var_qttn_xn
from plateau.zx import circuit_variance


@dataclass
class Config:
    max_depth: int = 12
    contract_up_to: int = 5   # also contract the network for n <= this


def parse_args() -> Config:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-depth", type=int, default=Config.max_depth)
    p.add_argument("--contract-up-to", type=int, default=Config.contract_up_to)
    return Config(**vars(p.parse_args()))


def main(cfg: Config):
    t = QttnTransfer()
    lam1, lam2 = t.eigenvalues
    print(f"# det={t.det} trace={t.trace} lambda1={lam1:.6f} lambda2={lam2:.6f}")
    print("n,x1_exact,x1_asymptotic,ratio,xn,x1_tn")
    for n in range(1, cfg.max_depth + 1):
        exact = float(var_qttn_x1(n))
        approx = var_qttn_x1_asymptotic(n)
        tn = ""
        if n <= cfg.contract_up_to:
            tn = repr(circuit_variance(build_ansatz("qTTN", 2**n), Observable.pauli("X", 1), (1, 1)))
        print(f"{n},{exact!r},{approx!r},{exact / approx:.10f},{float(var_qttn_xn(n))!r},{tn}")


if __name__ == "__main__":
    main(parse_args())
