"""Brute-force reference: statevector simulation, parameter-shift gradients,
Monte Carlo and exact-quadrature variance estimates.

Nothing here uses the ZX engine.  The only shared piece is the optional
causal-cone restriction, which can be switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Observable, ParamId, causal_cone

MAX_QUBITS = 20
MAX_GRID_WIDTH = 5
MAX_GRID_PARAMS = 14
GRID_NODES = (-2 * math.pi / 3, 0.0, 2 * math.pi / 3)
CHUNK = 4096

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def rotation(kind: str, theta: float) -> np.ndarray:
    """exp(-i theta V / 2) for V = X or Z."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    raise ValueError(f"not a rotation: {kind}")


def site_matrix(k) -> np.ndarray:
    k0, k1, k2, k3 = k
    return k0 * _I + k1 * _X + k2 * _Y + k3 * _Z


# ---------------------------------------------------------------- statevector

class StateVector:
    """Dense N-qubit state; axis q is register q + 1, starting from |0...0>."""

    def __init__(self, n_qubits: int):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(f"statevector supports 1..{MAX_QUBITS} qubits, got {n_qubits}")
        self.n_qubits = n_qubits
        self.amps = np.zeros((2,) * n_qubits, dtype=complex)
        self.amps[(0,) * n_qubits] = 1.0

    def apply_1q(self, u: np.ndarray, q: int):
        self.amps = np.moveaxis(np.tensordot(u, self.amps, axes=([1], [q])), 0, q)

    def apply_2q(self, u: np.ndarray, a: int, b: int):
        t = np.tensordot(u.reshape(2, 2, 2, 2), self.amps, axes=([2, 3], [a, b]))
        self.amps = np.moveaxis(t, [0, 1], [a, b])

    def apply(self, kind: str, targets, theta: float = 0.0):
        """Apply one gate; `targets` are 0-based axes."""
        if kind in ("RX", "RZ"):
            self.apply_1q(rotation(kind, theta), targets[0])
        elif kind == "H":
            self.apply_1q(_H, targets[0])
        elif kind == "CNOT":
            self.apply_2q(_CNOT, *targets)
        else:
            raise ValueError(f"unsupported gate {kind}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def expectation(self, sites) -> float:
        """<psi| prod_q A_q |psi> for `sites` = [(axis, 2x2 matrix), ...]."""
        phi = self.amps
        for q, m in sites:
            phi = np.moveaxis(np.tensordot(m, phi, axes=([1], [q])), 0, q)
        return float(np.vdot(self.amps, phi).real)


def _observable_sites(observable: Observable, relabel=None):
    relabel = relabel or (lambda r: r - 1)
    return [(relabel(r), site_matrix(k)) for r, k in observable.sites]


def _check_theta(circuit: Circuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} angles, got shape {theta.shape}")
    return theta


def simulate(circuit: Circuit, theta) -> StateVector:
    theta = _check_theta(circuit, theta)
    sv = StateVector(circuit.n_qubits)
    p = 0
    for g in circuit.gates:
        if g.param is not None:
            sv.apply(g.kind, [g.targets[0] - 1], theta[p])
            p += 1
        else:
            sv.apply(g.kind, [r - 1 for r in g.targets])
    return sv


def expectation(circuit: Circuit, observable, theta) -> float:
    """<H> at angles `theta` (ordered like circuit.params); a list of terms is summed."""
    terms = observable if isinstance(observable, (list, tuple)) else [observable]
    sv = simulate(circuit, theta)
    total = 0.0
    for obs in terms:
        obs.check_registers(circuit.n_qubits)
        total += obs.weight * sv.expectation(_observable_sites(obs))
    return total


def param_shift_grad(circuit: Circuit, observable, theta, param) -> float:
    theta = _check_theta(circuit, theta)
    idx = circuit.param_index(ParamId(*param))
    plus, minus = theta.copy(), theta.copy()
    plus[idx] += math.pi / 2
    minus[idx] -= math.pi / 2
    return 0.5 * (expectation(circuit, observable, plus) - expectation(circuit, observable, minus))


# ---------------------------------------------------------------- batched simulation

def _batch_rotation(state, kind, q, theta):
    # state has shape (B, 2, ..., 2); axis q + 1 is register q.
    c = np.cos(theta / 2).reshape((-1,) + (1,) * (state.ndim - 1))
    s = np.sin(theta / 2).reshape(c.shape)
    zero = np.take(state, 0, axis=q + 1)
    one = np.take(state, 1, axis=q + 1)
    c, s = np.squeeze(c, q + 1), np.squeeze(s, q + 1)
    if kind == "RX":
        new0 = c * zero - 1j * s * one
        new1 = -1j * s * zero + c * one
    else:
        new0 = (c - 1j * s) * zero
        new1 = (c + 1j * s) * one
    return np.stack([new0, new1], axis=q + 1)


def _batch_fixed(state, kind, targets):
    if kind == "H":
        q = targets[0] + 1
        zero, one = np.take(state, 0, axis=q), np.take(state, 1, axis=q)
        return np.stack([zero + one, zero - one], axis=q) / math.sqrt(2)
    c, t = targets[0] + 1, targets[1] + 1
    out = state.copy()
    sel = [slice(None)] * state.ndim
    sel[c] = 1
    sub = out[tuple(sel)]
    t_axis = t - 1 if t > c else t
    out[tuple(sel)] = np.flip(sub, axis=t_axis)
    return out


@dataclass(frozen=True)
class _Compact:
    gates: tuple            # (kind, 0-based targets, linear param index or None)
    width: int
    sites: tuple            # ((axis, matrix), ...)
    weight: float
    n_params: int


def _compact(circuit: Circuit, observable: Observable, restrict: bool) -> _Compact:
    observable.check_registers(circuit.n_qubits)
    if restrict:
        cone = causal_cone(circuit, observable)
        keep = sorted(cone.gates)
        regs = sorted(cone.registers | set(observable.support)) or [1]
    else:
        keep = range(len(circuit.gates))
        regs = list(range(1, circuit.n_qubits + 1))
    relabel = {r: i for i, r in enumerate(regs)}
    gates = []
    for gi in keep:
        g = circuit.gates[gi]
        p = circuit.param_index(g.param) if g.param is not None else None
        gates.append((g.kind, tuple(relabel[r] for r in g.targets), p))
    sites = tuple((relabel[r], site_matrix(k)) for r, k in observable.sites if r in relabel)
    return _Compact(tuple(gates), len(regs), sites, observable.weight, circuit.n_params)


def _batch_run(gates, state, thetas):
    for kind, targets, p in gates:
        if p is None:
            state = _batch_fixed(state, kind, targets)
        else:
            state = _batch_rotation(state, kind, targets[0], thetas[:, p])
    return state


def _batch_expectation(state, sites):
    phi = state
    for q, m in sites:
        phi = np.moveaxis(np.tensordot(m, phi, axes=([1], [q + 1])), 0, q + 1)
    b = state.shape[0]
    return np.einsum("bi,bi->b", state.reshape(b, -1).conj(), phi.reshape(b, -1)).real


def _batch_gradients(compact: _Compact, idx: int, thetas: np.ndarray) -> np.ndarray:
    """Parameter-shift gradients for a batch of angle vectors (rows of `thetas`)."""
    b = thetas.shape[0]
    split = next((i for i, g in enumerate(compact.gates) if g[2] == idx), None)
    if split is None:
        return np.zeros(b)
    state = np.zeros((b,) + (2,) * compact.width, dtype=complex)
    state[(slice(None),) + (0,) * compact.width] = 1.0
    state = _batch_run(compact.gates[:split], state, thetas)
    both = np.concatenate([state, state])
    shifted = np.concatenate([thetas, thetas])
    shifted[:b, idx] += math.pi / 2
    shifted[b:, idx] -= math.pi / 2
    both = _batch_run(compact.gates[split:], both, shifted)
    values = compact.weight * _batch_expectation(both, compact.sites)
    return 0.5 * (values[:b] - values[b:])


# ---------------------------------------------------------------- estimates

@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    stderr: float
    method: str
    samples: int
    seed: int | None = None
    mean: float = 0.0
    mean_stderr: float = 0.0


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))


def mc_variance(circuit: Circuit, observable: Observable, param, samples: int, seed: int,
                *, restrict: bool = True) -> VarianceEstimate:
    """Sample variance of the parameter-shift gradient over theta ~ U[-pi, pi]^M.

    Angles for samples [c*CHUNK, (c+1)*CHUNK) come from a generator keyed by
    (seed, c), so the estimate does not depend on how chunks are scheduled.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    param = ParamId(*param)
    idx = circuit.param_index(param)
    compact = _compact(circuit, observable, restrict)
    grads = np.empty(samples)
    for c, start in enumerate(range(0, samples, CHUNK)):
        stop = min(start + CHUNK, samples)
        thetas = _chunk_rng(seed, c).uniform(-math.pi, math.pi, size=(CHUNK, circuit.n_params))
        grads[start:stop] = _batch_gradients(compact, idx, thetas[: stop - start])
    n = samples
    mean = float(np.mean(grads))
    dev = grads - mean
    var = float(np.sum(dev**2)) / (n - 1)
    m4 = float(np.mean(dev**4))
    se_var = math.sqrt(max(m4 - var**2 * (n - 3) / (n - 1), 0.0) / n)
    return VarianceEstimate(var, se_var, "mc", n, seed, mean, math.sqrt(var / n))


def _grid_enumerate(compact: _Compact, idx: int) -> tuple[float, float]:
    m = compact.n_params
    if m > MAX_GRID_PARAMS:
        raise ValueError(f"enumerated grid needs 3^{m} points; capped at {MAX_GRID_PARAMS} parameters")
    nodes = np.array(GRID_NODES)
    total = 3**m
    s1 = s2 = 0.0
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(start + CHUNK, total))
        digits = (codes[:, None] // 3 ** np.arange(m)[None, :]) % 3
        g = _batch_gradients(compact, idx, nodes[digits])
        s1 += float(np.sum(g))
        s2 += float(np.sum(g * g))
    mean = s1 / total
    return s2 / total - mean**2, mean


class _Copies:
    """c-fold tensor power of the density matrix, with exact per-rotation averaging.

    Only live registers are stored: a register joins in |0><0| at its first
    gate and is traced out after its last one unless it is measured.  Each
    live register owns 2c consecutive axes (ket, bra) for copy 1, copy 2, ...
    """

    def __init__(self, copies: int):
        self.c = copies
        self.live: list[int] = []
        self.t = np.ones((), dtype=complex)

    def _axes(self, q):
        base = 2 * self.c * self.live.index(q)
        return list(range(base, base + 2 * self.c))

    def ensure(self, q):
        if q in self.live:
            return
        if len(self.live) >= MAX_GRID_WIDTH:
            raise ValueError(f"exact grid quadrature keeps at most {MAX_GRID_WIDTH} live registers")
        block = np.zeros((2,) * (2 * self.c), dtype=complex)
        block[(0,) * (2 * self.c)] = 1.0
        self.t = np.multiply.outer(self.t, block)
        self.live.append(q)

    def discard(self, q, matrix=None):
        """Trace register q out, after applying `matrix` on every ket if given."""
        axes = self._axes(q)
        t = np.moveaxis(self.t, axes, range(self.t.ndim - 2 * self.c, self.t.ndim))
        for _ in range(self.c):
            if matrix is not None:
                t = np.tensordot(t, matrix, axes=([t.ndim - 2], [1]))
                t = np.moveaxis(t, -1, -2)
            t = np.trace(t, axis1=-2, axis2=-1)
        self.t = t
        self.live.remove(q)

    @staticmethod
    def _mat(t, m, ax):
        return np.moveaxis(np.tensordot(m, t, axes=([1], [ax])), 0, ax)

    def _conj_1q(self, t, us, q):
        # one unitary per copy: U on the ket axis, U* on the bra axis
        axes = self._axes(q)
        for i, u in enumerate(us):
            t = self._mat(t, u, axes[2 * i])
            t = self._mat(t, u.conj(), axes[2 * i + 1])
        return t

    def fixed(self, kind, targets):
        if kind == "H":
            self.t = self._conj_1q(self.t, [_H] * self.c, targets[0])
            return
        a, b = targets
        u = _CNOT.reshape(2, 2, 2, 2)
        ax_a, ax_b = self._axes(a), self._axes(b)
        for i in range(2 * self.c):
            m = u if i % 2 == 0 else u.conj()
            t = np.tensordot(m, self.t, axes=([2, 3], [ax_a[i], ax_b[i]]))
            self.t = np.moveaxis(t, [0, 1], [ax_a[i], ax_b[i]])

    def averaged(self, kind, q):
        acc = 0
        for th in GRID_NODES:
            acc = acc + self._conj_1q(self.t, [rotation(kind, th)] * self.c, q)
        self.t = acc / len(GRID_NODES)

    def differentiated(self, kind, q):
        # each copy gets (Phi(θ + π/2) - Phi(θ - π/2)) / 2, then θ is averaged
        acc = 0
        for th in GRID_NODES:
            shifts = [(rotation(kind, th + math.pi / 2), 0.5), (rotation(kind, th - math.pi / 2), -0.5)]
            for combo in np.ndindex(*(2,) * self.c):
                coef = np.prod([shifts[s][1] for s in combo])
                acc = acc + coef * self._conj_1q(self.t, [shifts[s][0] for s in combo], q)
        self.t = acc / len(GRID_NODES)


def _grid_factorized(compact: _Compact, idx: int) -> tuple[float, float]:
    measured = dict(compact.sites)
    last_use = {}
    for gi, (_, targets, _) in enumerate(compact.gates):
        for q in targets:
            last_use[q] = gi
    moments = []
    for copies in (1, 2):
        st = _Copies(copies)
        for gi, (kind, targets, p) in enumerate(compact.gates):
            for q in targets:
                st.ensure(q)
            if p is None:
                st.fixed(kind, targets)
            elif p == idx:
                st.differentiated(kind, targets[0])
            else:
                st.averaged(kind, targets[0])
            for q in targets:
                if last_use[q] == gi and q not in measured:
                    st.discard(q)
        for q, m in measured.items():
            if q in st.live:
                st.discard(q, m)
            else:
                # never touched: still in |0>
                st.t = st.t * complex(m[0, 0]) ** copies
        moments.append(compact.weight**copies * float(st.t.real))
    mean, second = moments
    return second - mean**2, mean


def grid_variance(circuit: Circuit, observable: Observable, param, *, restrict: bool = True,
                  enumerate: bool = False) -> VarianceEstimate:
    """Exact variance by 3-node quadrature per angle.

    The gradient is a trigonometric polynomial of degree at most 1 in each
    angle, so its square has degree at most 2 and the uniform average equals
    the average over the nodes {-2pi/3, 0, 2pi/3}.  By default each rotation is
    averaged in place on a two-copy density tensor (at most 5 registers alive at once);
    `enumerate=True` walks all 3^M grid points instead (needs M <= 14).
    """
    param = ParamId(*param)
    idx = circuit.param_index(param)
    compact = _compact(circuit, observable, restrict)
    if not any(g[2] == idx for g in compact.gates):
        return VarianceEstimate(0.0, 0.0, "grid", 3 ** circuit.n_params if enumerate else 0)
    if enumerate:
        value, mean = _grid_enumerate(compact, idx)
        samples = 3**compact.n_params
    else:
        value, mean = _grid_factorized(compact, idx)
        samples = 0
    return VarianceEstimate(value, 0.0, "grid", samples, None, mean)
