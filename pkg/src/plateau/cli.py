"""Command line: `plateau variance`, `plateau scan`, `plateau verify`.

Exit codes: 0 success, 1 a verification check failed, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import closed_form as cf
from . import zx
from .circuit import (Circuit, Observable, ParamId, build_ansatz, canonical_family, causal_cone,
                      parse_observables)
from .oracle import grid_variance, mc_variance

CSV_FIELDS = ("ansatz", "n_qubits", "observable", "param_j", "param_k", "method",
              "variance", "stderr", "samples", "seed", "ms")
METHODS = ("tn", "closed", "mc", "grid")


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


@dataclass(frozen=True)
class RunRecord:
    ansatz: str
    n_qubits: int
    observable: str
    param_j: int
    param_k: int
    method: str
    variance: float
    stderr: float
    samples: int
    seed: int | str
    ms: int

    def sort_key(self):
        return (self.ansatz, self.n_qubits, self.observable, self.param_j, self.param_k, self.method)


# ---------------------------------------------------------------- shared pieces

def _default_seed() -> int:
    raw = os.environ.get("PLATEAU_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError("PLATEAU_SEED", f"must be an integer, got {raw!r}") from None


def _build(family: str, n: int) -> Circuit:
    try:
        family = canonical_family(family)
    except ValueError as e:
        raise UsageError("--ansatz", str(e)) from None
    try:
        return build_ansatz(family, n)
    except ValueError as e:
        raise UsageError("--qubits", str(e)) from None


def _observables(text: str, n: int) -> list[Observable]:
    try:
        return parse_observables(text, n)
    except ValueError as e:
        raise UsageError("--observable", str(e)) from None


def _param(circuit: Circuit, text_or_pid) -> ParamId:
    try:
        pid = ParamId.parse(text_or_pid) if isinstance(text_or_pid, str) else ParamId(*text_or_pid)
    except ValueError as e:
        raise UsageError("--param", str(e)) from None
    if not circuit.has_param(pid):
        raise UsageError("--param", f"{pid} is not a parameter of {circuit.family}({circuit.n_qubits})")
    return pid


def run_one(circuit: Circuit, obs: Observable, pid: ParamId, method: str, *,
            samples: int, seed: int, timing: bool) -> RunRecord:
    start = time.perf_counter()
    stderr, used_samples, used_seed = 0.0, 0, ""
    try:
        if method == "tn":
            value = zx.circuit_variance(circuit, obs, pid)
        elif method == "closed":
            value = cf.closed_form_variance(circuit.family, circuit.n_qubits, obs, pid)
        elif method == "grid":
            est = grid_variance(circuit, obs, pid)
            value, used_samples = est.value, est.samples
        elif method == "mc":
            est = mc_variance(circuit, obs, pid, samples, seed)
            value, stderr, used_samples, used_seed = est.value, est.stderr, est.samples, seed
        else:
            raise UsageError("--method", f"unknown method {method!r}")
    except cf.NotCovered as e:
        raise UsageError("--method", str(e)) from None
    except ValueError as e:
        raise UsageError("--method", f"{method} cannot handle this instance: {e}") from None
    ms = round((time.perf_counter() - start) * 1000) if timing else 0
    return RunRecord(circuit.family, circuit.n_qubits, str(obs), pid.j, pid.k, method,
                     float(value), float(stderr), used_samples, used_seed, ms)


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def render(records: list[RunRecord], fmt: str, fit: cf.PowerLawFit | None = None) -> str:
    records = sorted(records, key=RunRecord.sort_key)
    if fmt == "json":
        rows = [asdict(r) for r in records]
        doc = rows if fit is None else {"records": rows, "fit": asdict(fit)}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(_fmt(getattr(r, f)) for f in CSV_FIELDS)
    if fit is not None:
        buf.write(f"# fit,exponent={fit.exponent!r},prefactor={fit.prefactor!r},r_squared={fit.r_squared!r}\n")
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- variance

def cmd_variance(args) -> int:
    circuit = _build(args.ansatz, args.qubits)
    pid = _param(circuit, args.param)
    seed = args.seed if args.seed is not None else _default_seed()
    records = [run_one(circuit, obs, pid, args.method, samples=args.samples, seed=seed, timing=args.timing)
               for obs in _observables(args.observable, circuit.n_qubits)]
    _emit(render(records, args.format), args.out)
    return 0


# ---------------------------------------------------------------- scan

def parse_int_list(text: str, flag: str, n: int | None = None) -> list[int]:
    """'4,8,16', '2:10' (inclusive) or '2:16:x2'; 'N' stands for the qubit count."""
    def num(tok):
        tok = tok.strip()
        if tok.upper() == "N":
            if n is None:
                raise UsageError(flag, "'N' is only allowed in --site-range")
            return n
        try:
            return int(tok)
        except ValueError:
            raise UsageError(flag, f"not an integer: {tok!r}") from None

    out = []
    for part in text.split(","):
        if ":" in part:
            bits = part.split(":")
            lo, hi = num(bits[0]), num(bits[1])
            if len(bits) == 3 and bits[2].startswith("x"):
                v = lo
                while v <= hi:
                    out.append(v)
                    v *= int(bits[2][1:])
            else:
                step = num(bits[2]) if len(bits) == 3 else 1
                out.extend(range(lo, hi + 1, step))
        elif part.strip():
            out.append(num(part))
    return out


_PLACEHOLDER = re.compile(r"\{(N|i|lower|upper)\}")


def _expand(template: str, n: int, site: int | None) -> str:
    def sub(m):
        key = m.group(1)
        if key == "N":
            return str(n)
        if key == "i":
            if site is None:
                raise UsageError("--observable", "{i} needs --site-range")
            return str(site)
        try:
            lower, upper = cf.qmera_reference_sites(n)
        except ValueError as e:
            raise UsageError("--observable", str(e)) from None
        return str(lower if key == "lower" else upper)

    return _PLACEHOLDER.sub(sub, template)


def cmd_scan(args) -> int:
    if args.qubits_range:
        sizes = parse_int_list(args.qubits_range, "--qubits-range")
    elif args.qubits is not None:
        sizes = [args.qubits]
    else:
        raise UsageError("--qubits-range", "give --qubits or --qubits-range")
    seed = args.seed if args.seed is not None else _default_seed()
    records = []
    for n in sizes:
        circuit = _build(args.ansatz, n)
        sites = parse_int_list(args.site_range, "--site-range", n) if args.site_range else [None]
        for site in sites:
            if site is not None and not 1 <= site <= n:
                raise UsageError("--site-range", f"site {site} outside 1..{n}")
            for obs in _observables(_expand(args.observable, n, site), n):
                if args.all_params:
                    if args.method == "tn":
                        # one shared sweep for every parameter
                        start = time.perf_counter()
                        values = zx.circuit_variance_all_params(circuit, obs)
                        ms = round((time.perf_counter() - start) * 1000) if args.timing else 0
                        records += [RunRecord(circuit.family, n, str(obs), p.j, p.k, "tn", float(v), 0.0, 0, "", ms)
                                    for p, v in values.items()]
                        continue
                    pids = circuit.params
                else:
                    pids = [_param(circuit, args.param)]
                records += [run_one(circuit, obs, p, args.method, samples=args.samples, seed=seed,
                                    timing=args.timing) for p in pids]
    if not records:
        raise UsageError("--qubits-range", "the sweep is empty")
    fit = None
    if args.fit:
        pts = [(r.n_qubits, r.variance) for r in records]
        if len({n for n, _ in pts}) < 2 or len(pts) != len({n for n, _ in pts}):
            raise UsageError("--fit", "needs exactly one record per qubit count and at least two qubit counts")
        try:
            fit = cf.fit_power_law(pts)
        except ValueError as e:
            raise UsageError("--fit", str(e)) from None
    _emit(render(records, args.format, fit), args.out)
    return 0


# ---------------------------------------------------------------- verify

@dataclass(frozen=True)
class Check:
    name: str
    worst: float
    tolerance: float
    instances: int
    passed: bool
    detail: str = ""


def _max_error(pairs) -> tuple[float, int]:
    errs = [abs(a - b) for a, b in pairs]
    return (max(errs) if errs else 0.0), len(errs)


def _check(name, pairs, tol, detail="") -> Check:
    worst, count = _max_error(pairs)
    return Check(name, worst, tol, count, worst <= tol, detail)


def _qmps_branch(n: int, i: int, j: int, k: int) -> str | None:
    if cf.qmps_zero_case(n, i, j, k):
        return "qmps zero cases"
    if k != 1:
        return None
    if i == n:
        return "qmps X_N, j<N" if j < n else "qmps X_N, j=N"
    if j < i or j == i == 1:
        return "qmps X_i, j<i"
    return "qmps X_i, j=i" if j == i else "qmps X_i, j=i+1"


def _fast_checks() -> list[Check]:
    checks = []

    basis = np.eye(3)
    want_up = [np.array([c[0] + c[2] / 4, 3 * c[1] / 8, 0.0]) for c in basis]
    want_down = [np.array([c[0], c[1] / 8 + c[2], c[1] / 8]) for c in basis]
    pairs = [(float(x), float(y)) for c, u, d in zip(basis, want_up, want_down)
             for x, y in zip(np.concatenate([zx.M_UP @ c, zx.M_DOWN @ c]), np.concatenate([u, d]))]
    checks.append(_check("transfer maps", pairs, 1e-15))

    edge = [(zx.H_EDGE @ zx.V13, zx.V13), (zx.H_EDGE @ zx.V2, 0.5 * (zx.V2 + zx.V13M)), (zx.H_EDGE @ zx.V13M, zx.V2)]
    checks.append(_check("hadamard edge identities", [(float(a), float(b)) for x, y in edge for a, b in zip(x, y)], 1e-15))

    try:
        zx.block_map()
        checks.append(Check("block map invariants", 0.0, 0.0, 1, True))
    except RuntimeError as e:
        checks.append(Check("block map invariants", float("nan"), 0.0, 1, False, str(e)))

    lam = cf.QttnTransfer().eigenvalues
    checks.append(_check("qttn transfer eigenvalues", list(zip(lam, (0.4313, 2.3187))), 5e-5))

    branches: dict[str, list] = {}
    for n in range(2, 7):
        circuit = build_ansatz("qMPS", n)
        for i in range(1, n + 1):
            tn = zx.circuit_variance_all_params(circuit, Observable.pauli("X", i))
            for p, v in tn.items():
                label = _qmps_branch(n, i, p.j, p.k)
                if label:
                    branches.setdefault(label, []).append((float(cf.var_qmps("X", n, i, p.j, p.k)), v))
        for i in range(1, n):
            label = "qmps X_iX_i+1, " + ("i=1" if i == 1 else "i=N-1" if i == n - 1 else "1<i<N-1")
            tn = zx.circuit_variance(circuit, Observable.pauli("X", i, i + 1), (1, 1))
            branches.setdefault(label, []).append((float(cf.var_qmps_xx(n, i)), tn))
    checks += [_check(name, pairs, 1e-10) for name, pairs in sorted(branches.items())]

    xn, x1 = [], []
    for n in range(1, 4):
        circuit = build_ansatz("qTTN", 2**n)
        xn.append((float(cf.var_qttn_xn(n)), zx.circuit_variance(circuit, Observable.pauli("X", 2**n), (1, 1))))
        x1.append((float(cf.var_qttn_x1(n)), zx.circuit_variance(circuit, Observable.pauli("X", 1), (1, 1))))
    checks += [_check("qttn X_N", xn, 1e-10), _check("qttn X_1", x1, 1e-10)]

    rel = []
    for n, ref in cf.QMERA_REFERENCE.items():
        circuit = build_ansatz("qMERA", n)
        for site, want in zip(cf.qmera_reference_sites(n), ref):
            got = zx.circuit_variance(circuit, Observable.pauli("X", site), (1, 1))
            rel.append((got / want, 1.0))
    checks.append(_check("qmera reference table (relative)", rel, 5e-3))
    return checks


def _oracle_checks() -> list[Check]:
    pairs = []
    for family, sizes in (("qMPS", (2, 3, 4)), ("qTTN", (2, 4)), ("qMERA", (2, 4))):
        for n in sizes:
            circuit = build_ansatz(family, n)
            observables = [Observable.pauli(p, i) for i in range(1, n + 1) for p in "XYZ"]
            observables += [Observable.pauli("XX", i, i + 1) for i in range(1, n)]
            for obs in observables:
                cone = causal_cone(circuit, obs)
                for p in circuit.params:
                    if cone.contains_param(circuit, p):
                        pairs.append((zx.circuit_variance(circuit, obs, p), grid_variance(circuit, obs, p).value))
    checks = [_check("tn vs grid quadrature", pairs, 1e-10)]

    spots = [("qMPS", 3, Observable.pauli("X", 3)), ("qMERA", 4, Observable.pauli("X", 1)),
             ("qTTN", 8, Observable.pauli("X", 5))]
    zs = []
    for family, n, obs in spots:
        circuit = build_ansatz(family, n)
        est = mc_variance(circuit, obs, (1, 1), 200_000, 12345)
        zs.append((abs(est.value - zx.circuit_variance(circuit, obs, (1, 1))) / est.stderr, 0.0))
    checks.append(_check("monte carlo within 4 stderr", zs, 4.0))
    return checks


def run_checks(level: str) -> list[Check]:
    checks = _fast_checks()
    if level == "full":
        checks += _oracle_checks()
    return checks


def cmd_verify(args) -> int:
    checks = run_checks(args.level)
    if args.format == "json":
        text = json.dumps([asdict(c) for c in checks], indent=2) + "\n"
    else:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: worst={c.worst:.3e} tol={c.tolerance:.0e} n={c.instances}"
                 + (f"  ({c.detail})" if c.detail else "") for c in checks]
        failed = sum(not c.passed for c in checks)
        lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------- parser

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateau", description="Gradient variance of tensor-network circuit ansaetze.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, sweep: bool):
        p.add_argument("--ansatz", required=True, help="qmps, qttn or qmera")
        p.add_argument("--qubits", type=_positive_int, required=not sweep)
        p.add_argument("--observable", required=True,
                       help="e.g. X:3, X:2*X:3, ising:J,h or heisenberg" + ("; {N}, {i}, {lower}, {upper} expand" if sweep else ""))
        p.add_argument("--param", default="1,1", help="j,k (default 1,1)")
        p.add_argument("--method", choices=METHODS, default="tn")
        p.add_argument("--samples", type=_positive_int, default=100_000)
        p.add_argument("--seed", type=int, default=None, help="defaults to $PLATEAU_SEED or 0")
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--timing", action="store_true", help="fill the ms column with wall time")

    p = sub.add_parser("variance", help="variance for one instance")
    common(p, sweep=False)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("scan", help="sweep qubit counts, sites or parameters")
    common(p, sweep=True)
    p.add_argument("--qubits-range", help="e.g. 4,8,16 or 2:10 or 2:16:x2")
    p.add_argument("--site-range", help="values for {i}, e.g. 1:N")
    p.add_argument("--all-params", action="store_true")
    p.add_argument("--fit", action="store_true", help="power-law fit of variance against qubit count")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="cross-check the three methods")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"plateau {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
