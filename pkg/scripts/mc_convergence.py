"""Monte Carlo error against sample count for one instance, with the exact value for reference."""

import argparse
from dataclasses import dataclass

from plateau.circuit import Observable, build_ansatz
from plateau.oracle import mc_variance
from plateau.zx import circuit_variance


@dataclass
class Config:
    ansatz: str = "qMPS"
    n_qubits: int = 3
    observable: str = "X:3"
    param: tuple[int, int] = (1, 1)
    samples: tuple[int, ...] = (1_000, 10_000, 100_000, 200_000)
    seed: int = 0


def parse_args() -> Config:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--ansatz", default=Config.ansatz)
    p.add_argument("--qubits", dest="n_qubits", type=int, default=Config.n_qubits)
    p.add_argument("--observable", default=Config.observable)
    p.add_argument("--param", type=lambda s: tuple(int(x) for x in s.split(",")), default=Config.param)
    p.add_argument("--samples", type=lambda s: tuple(int(x) for x in s.split(",")), default=Config.samples)
    p.add_argument("--seed", type=int, default=Config.seed)
    return Config(**vars(p.parse_args()))


def main(cfg: Config):
    c = build_ansatz(cfg.ansatz, cfg.n_qubits)
    obs = Observable.parse(cfg.observable)
    exact = circuit_variance(c, obs, cfg.param)
    print(f"# exact={exact!r}")
    print("samples,estimate,stderr,z,mean,mean_stderr")
    for s in cfg.samples:
        est = mc_variance(c, obs, cfg.param, s, cfg.seed)
        z = (est.value - exact) / est.stderr if est.stderr else float("nan")
        print(f"{s},{est.value!r},{est.stderr!r},{z:.3f},{est.mean!r},{est.mean_stderr!r}")


if __name__ == "__main__":
    main(parse_args())
