"""Closed-form gradient variances, bounds and scaling fits.

Nothing here contracts a network: every function evaluates a formula directly,
so the results can be checked against `plateau.zx` and the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .circuit import Observable, ParamId, exact_log2, build_ansatz, canonical_family

Q = Fraction(3, 8)


# ---------------------------------------------------------------- qMPS

def qmps_zero_case(n_qubits: int, i: int, j: int, k: int) -> bool:
    """True when parameter (j, k) of qMPS(N) cannot reach the observable on site i.

    Register j holds two rotations from the block above it (none for j = 1),
    two from its own block and two trailing ones, so the cut-offs are
    k > 4 (k > 2 for j = 1) below the site, and k > 2 just past it.
    """
    _check_qmps_indices(n_qubits, i, j)
    if j > i + 1:
        return True
    if j == i + 1:
        return k > 2
    if j < i:
        return k > (2 if j == 1 else 4)
    return False


def _check_qmps_indices(n_qubits: int, i: int, j: int):
    if n_qubits < 2:
        raise ValueError(f"qMPS needs at least 2 qubits, got {n_qubits}")
    if not 1 <= i <= n_qubits:
        raise ValueError(f"site {i} outside 1..{n_qubits}")
    if not 1 <= j <= n_qubits:
        raise ValueError(f"register {j} outside 1..{n_qubits}")


def var_qmps(pauli: str, n_qubits: int, i: int, j: int, k: int = 1) -> Fraction | None:
    """Variance of d<P_i>/d(j,k) for qMPS(N), or None when no formula covers the case.

    Covered: P = X with k = 1 and j <= i + 1, plus every structurally zero
    parameter.
    """
    _check_qmps_indices(n_qubits, i, j)
    if qmps_zero_case(n_qubits, i, j, k):
        return Fraction(0)
    if pauli.upper() != "X" or k != 1:
        return None
    if i == n_qubits:
        if j < n_qubits:
            return Fraction(1, 4) * Q ** (n_qubits - 1)
        return Fraction(1, 4) * (1 + Q ** (n_qubits - 1))
    if j < i or j == i == 1:
        return 11 * Fraction(1, 64) * Q ** (i - 1)
    if j == i:
        return 3 * Fraction(1, 64) * (1 + Fraction(11, 8) * Q ** (i - 2))
    return 3 * Fraction(1, 64) * (1 + Q ** (i - 1))


def qmps_xx_coefficient(n_qubits: int, i: int) -> Fraction:
    if not 1 <= i <= n_qubits - 1:
        raise ValueError(f"pair site {i} outside 1..{n_qubits - 1}")
    if i == 1:
        return Fraction(1, 4) * (Q**2 + Fraction(13, 16))
    if i < n_qubits - 1:
        return Fraction(1, 4) * (Fraction(37, 2 * 64) + Fraction(3, 16))
    return Fraction(37, 3 * 64)


def var_qmps_xx(n_qubits: int, i: int) -> Fraction:
    """Variance of d<X_i X_{i+1}>/d(1,1) for qMPS(N): c_i (3/8)^i."""
    return qmps_xx_coefficient(n_qubits, i) * Q**i


# ---------------------------------------------------------------- qTTN

def var_qttn_xn(n: int) -> Fraction:
    """Variance of d<X_N>/d(1,1) for qTTN(2^n): the last register only sees 'up' steps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Fraction(1, 4) * Q**n


@dataclass(frozen=True)
class QttnTransfer:
    """Two-component recursion (alpha_k, beta_k) = M^k u0 behind the qTTN X_1 variance."""

    matrix: tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]] = (
        (Fraction(3, 4), Fraction(2)),
        (Fraction(1, 4), Fraction(2)),
    )
    u0: tuple[Fraction, Fraction] = (Fraction(3, 4), Fraction(1, 4))

    @property
    def det(self) -> Fraction:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    @property
    def trace(self) -> Fraction:
        return self.matrix[0][0] + self.matrix[1][1]

    @cached_property
    def _eig(self):
        vals, vecs = np.linalg.eig(np.array(self.matrix, dtype=float))
        order = np.argsort(vals)
        return vals[order], vecs[:, order]

    @property
    def eigenvalues(self) -> tuple[float, float]:
        """(lambda_1, lambda_2) in increasing order."""
        lo, hi = self._eig[0]
        return float(lo), float(hi)

    @property
    def eigenvectors(self) -> tuple[np.ndarray, np.ndarray]:
        vecs = self._eig[1]
        return vecs[:, 0].copy(), vecs[:, 1].copy()

    def coefficients(self, k: int) -> tuple[Fraction, Fraction]:
        a, b = self.u0
        (m00, m01), (m10, m11) = self.matrix
        for _ in range(k):
            a, b = m00 * a + m01 * b, m10 * a + m11 * b
        return a, b

    def dominant_coefficients(self, k: int) -> np.ndarray:
        """Component of M^k u0 along the lambda_2 eigenvector."""
        vals, vecs = self._eig
        weights = np.linalg.solve(vecs, np.array(self.u0, dtype=float))
        return weights[1] * vals[1] ** k * vecs[:, 1]


def var_qttn_x1(n: int) -> Fraction:
    """Exact variance of d<X_1>/d(1,1) for qTTN(2^n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = QttnTransfer().coefficients(n - 1)
    return (a + 8 * b) / 4 ** (n + 1)


def var_qttn_x1_asymptotic(n: int) -> float:
    """Leading-eigenvalue approximation of `var_qttn_x1`; scales as (lambda_2 / 4)^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = QttnTransfer().dominant_coefficients(n - 1)
    return float((a + 8 * b) / 4 ** (n + 1))


# ---------------------------------------------------------------- qMERA

# Contracted values for the widest ("lower") and narrowest ("upper") cones,
# rounded to four significant figures, keyed by N: (lower, upper).
QMERA_REFERENCE = {
    2: (0.09375, 0.1719),
    4: (0.02477, 0.05242),
    8: (0.004109, 0.02304),
    16: (0.000622, 0.00882),
}

# Observable sites the reference values belong to, in the register numbering
# of build_ansatz("qMERA", N): (lower, upper).
QMERA_REFERENCE_SITES = {2: (2, 1), 4: (2, 1), 8: (8, 1), 16: (16, 1)}


def qmera_reference(n_qubits: int) -> tuple[float, float]:
    try:
        return QMERA_REFERENCE[n_qubits]
    except KeyError:
        raise ValueError(f"no reference values for N={n_qubits}; tabulated N are 2, 4, 8, 16") from None


def qmera_reference_sites(n_qubits: int) -> tuple[int, int]:
    try:
        return QMERA_REFERENCE_SITES[n_qubits]
    except KeyError:
        raise ValueError(f"no reference sites for N={n_qubits}; tabulated N are 2, 4, 8, 16") from None


def var_qmera_lower(n: int) -> Fraction:
    """Lower bound 1/4 (3/8)^(2n) on the qMERA(2^n) variance of any single-site X."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Fraction(1, 4) * Q ** (2 * n)


# ---------------------------------------------------------------- bounds

def klocal_lower_bound(family: str, n_qubits: int, k: int) -> Fraction | None:
    """Lower bound for a k-site X product, or None for qMPS (no such bound)."""
    family = canonical_family(family)
    if k < 1:
        raise ValueError("k must be >= 1")
    n = exact_log2(n_qubits)
    if family == "qTTN":
        return Fraction(1, 4) * Q ** (k * n)
    if family == "qMERA":
        return Fraction(1, 4) * Q ** (2 * k * n)
    return None


def chebyshev_tail(variance: float, kappa: float) -> float:
    """Upper bound on P(|gradient| >= kappa) for a zero-mean gradient."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if variance < 0:
        raise ValueError("variance must be non-negative")
    return min(1.0, variance / kappa**2)


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float

    def __call__(self, n):
        return self.prefactor * np.asarray(n, dtype=float) ** self.exponent


def fit_power_law(points) -> PowerLawFit:
    """Ordinary least squares of log(variance) against log(N)."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ValueError("power-law fit needs positive N and variance")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    if np.ptp(x) == 0:
        raise ValueError("need at least two distinct N")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(np.exp(intercept)), r2)


# ---------------------------------------------------------------- dispatch

class NotCovered(ValueError):
    """No closed form exists for the requested instance."""


def closed_form_variance(family: str, n_qubits: int, observable, param) -> float:
    """Closed-form value for one product observable, or raise NotCovered."""
    family = canonical_family(family)
    param = ParamId(*param)
    obs: Observable = observable
    obs.check_registers(n_qubits)
    if not build_ansatz(family, n_qubits).has_param(param):
        raise ValueError(f"parameter {param} not in {family}({n_qubits})")
    support = obs.support
    labels = [obs.pauli_label(r) for r in support]
    scale = obs.weight**2

    if family == "qMPS":
        if len(support) == 1 and labels[0] is not None:
            value = var_qmps(labels[0], n_qubits, support[0], param.j, param.k)
            if value is not None:
                return scale * float(value)
        if (len(support) == 2 and labels == ["X", "X"] and support[1] == support[0] + 1
                and param == (1, 1)):
            return scale * float(var_qmps_xx(n_qubits, support[0]))
    elif family == "qTTN" and param == (1, 1) and labels == ["X"]:
        n = exact_log2(n_qubits)
        if support[0] == n_qubits:
            return scale * float(var_qttn_xn(n))
        if support[0] == 1:
            return scale * float(var_qttn_x1(n))
    elif family == "qMERA" and param == (1, 1) and labels == ["X"] and n_qubits in QMERA_REFERENCE:
        sites = qmera_reference_sites(n_qubits)
        if support[0] in sites:
            return scale * qmera_reference(n_qubits)[sites.index(support[0])]
    raise NotCovered(f"no closed form for {family}({n_qubits}), {obs}, parameter {param}")
