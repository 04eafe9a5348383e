"""Acceptance criteria 1-9, one test each.

Run on its own with `python tests/test_acceptance.py` (or `pytest tests/test_acceptance.py`);
the terminal summary prints one PASS/FAIL line per criterion.
"""

import math
import random
import time
from itertools import combinations

import pytest

from plateau.circuit import Observable, build_ansatz, causal_cone
from plateau.closed_form import (QMERA_REFERENCE, QttnTransfer, fit_power_law, klocal_lower_bound,
                                 qmera_reference, qmera_reference_sites, qmps_zero_case, var_qmera_lower,
                                 var_qmps, var_qmps_xx, var_qttn_xn)
from plateau.oracle import grid_variance, mc_variance
from plateau.zx import circuit_variance, circuit_variance_all_params


class Stopwatch:
    def __init__(self, limit_s):
        self.limit = limit_s
        self.start = time.perf_counter()

    def check(self):
        elapsed = time.perf_counter() - self.start
        assert elapsed < self.limit, f"took {elapsed:.1f}s, limit {self.limit}s"


def _mismatches(pairs, tol):
    return [(label, want, got) for label, want, got in pairs if not abs(want - got) <= tol]


@pytest.mark.criterion(1, "qMPS single-site closed forms match contraction (N = 2..10)")
def test_criterion_1_qmps_closed_forms():
    clock = Stopwatch(5)
    pairs = []
    for n in range(2, 11):
        c = build_ansatz("qMPS", n)
        for i in range(1, n + 1):
            for p, got in circuit_variance_all_params(c, Observable.pauli("X", i)).items():
                want = var_qmps("X", n, i, p.j, p.k)
                if want is not None:
                    pairs.append(((n, i, tuple(p)), float(want), got))
    assert float(var_qmps("X", 3, 3, 1)) == 9 / 256
    bad = _mismatches(pairs, 1e-10)
    assert not bad, f"{len(bad)}/{len(pairs)} mismatches, first {bad[:3]}"
    clock.check()


@pytest.mark.criterion(2, "qMPS X_i X_i+1 closed form matches contraction (N <= 6)")
def test_criterion_2_qmps_two_local():
    clock = Stopwatch(5)
    pairs = []
    for n in range(2, 7):
        c = build_ansatz("qMPS", n)
        for i in range(1, n):
            pairs.append(((n, i), float(var_qmps_xx(n, i)),
                          circuit_variance(c, Observable.pauli("XX", i, i + 1), (1, 1))))
    bad = _mismatches(pairs, 1e-10)
    assert not bad, f"{len(bad)}/{len(pairs)} mismatches, first {bad[:3]}"
    clock.check()


@pytest.mark.criterion(3, "qTTN last-site formula, transfer eigenvalues and site ordering")
def test_criterion_3_qttn():
    clock = Stopwatch(30)
    for n in range(1, 5):
        c = build_ansatz("qTTN", 2**n)
        got = circuit_variance(c, Observable.pauli("X", 2**n), (1, 1))
        assert got == pytest.approx(float(var_qttn_xn(n)), abs=1e-10)
    lam1, lam2 = QttnTransfer().eigenvalues
    assert abs(lam1 - 0.4313) <= 5e-5 and abs(lam2 - 2.3187) <= 5e-5
    for n_qubits in (4, 8, 16):
        c = build_ansatz("qTTN", n_qubits)
        v = [circuit_variance(c, Observable.pauli("X", i), (1, 1)) for i in range(1, n_qubits + 1)]
        assert all(v[-1] - 1e-15 <= x <= v[0] + 1e-15 for x in v), n_qubits
    clock.check()


@pytest.mark.criterion(4, "qMERA reference table reproduced to 5e-3 relative")
def test_criterion_4_qmera_table():
    clock = Stopwatch(60)
    bad = []
    for n in QMERA_REFERENCE:
        c = build_ansatz("qMERA", n)
        for site, want in zip(qmera_reference_sites(n), qmera_reference(n)):
            got = circuit_variance(c, Observable.pauli("X", site), (1, 1))
            if abs(got / want - 1) > 5e-3:
                bad.append((n, site, want, got))
    assert not bad
    clock.check()


@pytest.mark.criterion(5, "qMERA scaling exponents -1.2 (upper) and -2.7 (lower)")
def test_criterion_5_exponents():
    clock = Stopwatch(1)
    sizes = (4, 8, 16)
    upper = fit_power_law([(n, qmera_reference(n)[1]) for n in sizes])
    lower = fit_power_law([(n, qmera_reference(n)[0]) for n in sizes])
    assert abs(upper.exponent + 1.2) <= 0.2, upper
    assert abs(lower.exponent + 2.7) <= 0.2, lower
    clock.check()


def _oracle_instances():
    for family in ("qMPS", "qTTN", "qMERA"):
        for n in (2, 3, 4) if family == "qMPS" else (2, 4):
            c = build_ansatz(family, n)
            observables = [Observable.pauli(p, i) for i in range(1, n + 1) for p in "XYZ"]
            observables += [Observable.pauli("XX", i, i + 1) for i in range(1, n)]
            for obs in observables:
                cone = causal_cone(c, obs)
                for p in c.params:
                    if cone.contains_param(c, p):
                        yield c, obs, p


@pytest.fixture(scope="module")
def oracle_table():
    """(label, tn, grid value, grid mean) on every criterion-6 instance, computed once."""
    start = time.perf_counter()
    rows = []
    for c, obs, p in _oracle_instances():
        est = grid_variance(c, obs, p, restrict=False)
        rows.append(((c.family, c.n_qubits, str(obs), tuple(p)), circuit_variance(c, obs, p), est.value, est.mean))
    return rows, time.perf_counter() - start


@pytest.mark.criterion(6, "grid quadrature equals contraction on every small in-cone instance")
def test_criterion_6_oracle_equivalence(oracle_table):
    rows, elapsed = oracle_table
    assert len(rows) >= 200
    bad = _mismatches([(label, tn, grid) for label, tn, grid, _ in rows], 1e-10)
    assert not bad, f"{len(bad)}/{len(rows)} mismatches, first {bad[:3]}"
    assert elapsed < 600


@pytest.mark.criterion(7, "gradient mean is zero (grid exactly, Monte Carlo within 4 stderr)")
def test_criterion_7_mean_zero(oracle_table):
    rows, _ = oracle_table
    assert max(abs(mean) for *_, mean in rows) <= 1e-12
    rng = random.Random(2024)
    families = [("qMPS", range(3, 9)), ("qTTN", (4, 8)), ("qMERA", (4, 8))]
    for _ in range(10):
        family, sizes = rng.choice(families)
        c = build_ansatz(family, rng.choice(list(sizes)))
        obs = Observable.pauli(rng.choice("XYZ"), rng.randint(1, c.n_qubits))
        p = rng.choice([q for q in c.params if causal_cone(c, obs).contains_param(c, q)])
        est = mc_variance(c, obs, p, 200_000, seed=rng.getrandbits(63))
        assert abs(est.mean) <= 4 * est.mean_stderr, (family, c.n_qubits, str(obs), p, est)


@pytest.mark.criterion(8, "qMPS variance is zero exactly on the structural case list (TN and grid)")
def test_criterion_8_causal_cone_zeros():
    bad = []
    for n in range(2, 7):
        c = build_ansatz("qMPS", n)
        for i in range(1, n + 1):
            obs = Observable.pauli("X", i)
            tn = circuit_variance_all_params(c, obs)
            for p in c.params:
                listed = qmps_zero_case(n, i, p.j, p.k)
                grid = grid_variance(c, obs, p).value
                if (tn[p] == 0.0) != listed or (abs(grid) <= 1e-14) != listed:
                    bad.append((n, i, tuple(p), listed, tn[p], grid))
    assert not bad, f"{len(bad)} disagreements, first {bad[:4]}"


@pytest.mark.criterion(9, "lower bounds hold for the reference table and k = 1, 2 products")
def test_criterion_9_bounds():
    for n_qubits, (lower, _) in QMERA_REFERENCE.items():
        assert lower >= float(var_qmera_lower(int(math.log2(n_qubits))))
    for family in ("qTTN", "qMERA"):
        for n_qubits in (2, 4, 8):
            c = build_ansatz(family, n_qubits)
            for k in (1, 2):
                bound = float(klocal_lower_bound(family, n_qubits, k))
                for sites in combinations(range(1, n_qubits + 1), k):
                    v = circuit_variance(c, Observable.pauli("X" * k, *sites), (1, 1))
                    assert v >= bound - 1e-15, (family, n_qubits, sites, v, bound)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
