"""Exact gradient variance by contracting the averaged ZX tensor network.

After averaging each uniformly random phase, every Z-spider becomes a copy
tensor on a 3-dimensional index, every Hadamard edge becomes the matrix 2M,
and the differentiated spider is pinned to index 1.  The circuit is turned
into graph-like form on the fly: each wire carries its current Z-spider and a
pending-Hadamard flag, so consecutive Hadamards cancel before any edge is
replaced by 2M.  Contraction is a sweep over the causal cone with one
3-valued index per live register.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .circuit import Circuit, Observable, ParamId, build_ansatz, causal_cone

V13 = np.array([1.0, 0.0, 1.0])
V2 = np.array([0.0, 1.0, 0.0])
V13M = np.array([1.0, 0.0, -1.0])
BASIS = np.column_stack([V13, V2, V13M])

M_MATRIX = 0.25 * np.array([[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0]])
H_EDGE = 2 * M_MATRIX

M_UP = np.array([[1.0, 0.0, 0.25], [0.0, 3 / 8, 0.0], [0.0, 0.0, 0.0]])
M_DOWN = np.array([[1.0, 0.0, 0.0], [0.0, 1 / 8, 1.0], [0.0, 1 / 8, 0.0]])

# Each Hadamard edge carries 1/4 from the four copies, each spider gives back
# a factor from its averaged phase; with 2M on every edge the net scalar is
# 2**(edges - spiders) = 2**(links - width).  For a tree-shaped network that
# is 1/2, pinned by the two-qubit block with X_1 and the first parameter
# (variance 11/64).
TREE_SCALE = 0.5

MAX_CONE_WIDTH = 13


@dataclass(frozen=True)
class RegisterVector:
    """Coefficients over v13 = [1,0,1], v2 = [0,1,0], v13- = [1,0,-1]."""

    c13: float
    c2: float
    c13m: float

    def to_standard(self) -> np.ndarray:
        return self.c13 * V13 + self.c2 * V2 + self.c13m * V13M

    @classmethod
    def from_standard(cls, v) -> RegisterVector:
        a, b, c = v
        return cls((a + c) / 2, b, (a - c) / 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.c13, self.c2, self.c13m])

    @classmethod
    def from_array(cls, x) -> RegisterVector:
        return cls(*(x[i] for i in range(3)))


def copy_tensor(n_in: int, n_out: int) -> np.ndarray:
    t = np.zeros((3,) * (n_in + n_out))
    for i in range(3):
        t[(i,) * (n_in + n_out)] = 1.0
    return t


def p2_tensor(n_in: int, n_out: int) -> np.ndarray:
    """Sum_i |i>^n_in <1|^n_out."""
    t = np.zeros((3,) * (n_in + n_out))
    for i in range(3):
        t[(i,) * n_in + (1,) * n_out] = 1.0
    return t


def observable_vector(k, *, hadamard_pending: bool = False) -> np.ndarray:
    """Output-leg vector for a site mixture k0 I + k1 X + k2 Y + k3 Z.

    On a leg that ends on a Z-spider, X and Y both land on v2 and Z on v13-.
    A pending Hadamard swaps the roles of X and Z.
    """
    k0, k1, k2, k3 = k
    if hadamard_pending:
        k1, k3 = k3, k1
    return k0**2 * V13 + (k1**2 + k2**2) * V2 + k3**2 * V13M


def apply_m_edge(v: RegisterVector) -> RegisterVector:
    return RegisterVector.from_standard(H_EDGE @ v.to_standard())


def transfer_up(v: RegisterVector) -> RegisterVector:
    return RegisterVector.from_array(M_UP @ v.as_array())


def transfer_down(v: RegisterVector) -> RegisterVector:
    return RegisterVector.from_array(M_DOWN @ v.as_array())


# ---------------------------------------------------------------- leg program

@dataclass(frozen=True)
class _Program:
    """Linear operations on per-register spider indices, in circuit order.

    ("edge", q): apply 2M on register q (a new spider behind a Hadamard edge)
    ("link", c, t): multiply by 2M[i_c, i_t] (the CNOT's Hadamard edge)
    ("param", q, pid): the current spider of q carries parameter pid
    """

    ops: tuple
    width: int
    pending: tuple[bool, ...]

    @property
    def scale(self) -> float:
        links = sum(1 for op in self.ops if op[0] == "link")
        return 2.0 ** (links - self.width)


def _compile(gates, width: int) -> _Program:
    ops = []
    pending = [True] * width        # |0> is an X-spider: a Z-spider behind a Hadamard
    phased = [False] * width        # whether the current spider carries a phase

    def z_spider(q):
        if pending[q]:
            if not phased[q]:
                raise ValueError("network has a phase-free spider; only rotation-dense circuits are supported")
            ops.append(("edge", q))
            pending[q] = False
            phased[q] = False

    for kind, targets, pid in gates:
        if kind == "H":
            pending[targets[0]] ^= True
        elif kind == "RZ":
            q = targets[0]
            z_spider(q)
            ops.append(("param", q, pid))
            phased[q] = True
        elif kind == "RX":
            q = targets[0]
            pending[q] ^= True
            z_spider(q)
            ops.append(("param", q, pid))
            phased[q] = True
            pending[q] ^= True
        elif kind == "CNOT":
            c, t = targets
            z_spider(c)
            pending[t] ^= True
            z_spider(t)
            pending[t] ^= True
            ops.append(("link", c, t))
        else:
            raise ValueError(f"unsupported gate {kind}")
    if not all(phased):
        raise ValueError("network has a phase-free output spider; only rotation-dense circuits are supported")
    return _Program(tuple(ops), width, tuple(pending))


def _apply(state: np.ndarray, op) -> np.ndarray:
    kind = op[0]
    if kind == "edge":
        q = op[1]
        return np.moveaxis(np.tensordot(H_EDGE, state, axes=([1], [q])), 0, q)
    if kind == "link":
        c, t = op[1], op[2]
        shape = [1] * state.ndim
        shape[c], shape[t] = 3, 3
        return state * H_EDGE.reshape(shape)
    return state


def _project(state: np.ndarray, q: int) -> np.ndarray:
    out = np.zeros_like(state)
    idx = [slice(None)] * state.ndim
    idx[q] = 1
    out[tuple(idx)] = state[tuple(idx)]
    return out


def _output_tensor(program: _Program, site_coeffs) -> np.ndarray:
    vecs = [observable_vector(k, hadamard_pending=p) for k, p in zip(site_coeffs, program.pending)]
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return out


def _check_mixtures(circuit: Circuit, observable: Observable):
    # Cross terms between different Paulis on one site average out only if
    # the register finishes with RX then RZ.
    for r, k in observable.sites:
        if sum(1 for x in k if x != 0) <= 1:
            continue
        last = [g.kind for g in circuit.gates if r in g.targets][-2:]
        if last != ["RX", "RZ"]:
            raise ValueError(f"mixed Pauli site {r} needs a trailing RX RZ on that register")


def _cone_program(circuit: Circuit, observable: Observable):
    _check_mixtures(circuit, observable)
    cone = causal_cone(circuit, observable)
    gates, width = circuit.restricted(cone.gates)
    regs = sorted(cone.registers)
    if width > MAX_CONE_WIDTH:
        raise ValueError(f"causal cone spans {width} registers; the dense sweep is capped at {MAX_CONE_WIDTH}")
    if width == 0:
        return None, cone, []
    coeffs = [observable.coeffs(r) for r in regs]
    # Unobserved registers are traced out; a rotation pair there is a no-op
    # but keeps their last spider phased.
    for q, k in enumerate(coeffs):
        if tuple(k) == (1.0, 0.0, 0.0, 0.0):
            gates += [("RX", (q,), None), ("RZ", (q,), None)]
    program = _compile(gates, width)
    return program, cone, coeffs


def circuit_variance(circuit: Circuit, observable: Observable, param) -> float:
    """Var over uniform angles of d<H>/d(param) for one product observable."""
    param = ParamId(*param)
    observable.check_registers(circuit.n_qubits)
    if not circuit.has_param(param):
        raise ValueError(f"parameter {param} not in circuit")
    program, cone, coeffs = _cone_program(circuit, observable)
    if program is None or not cone.contains_param(circuit, param):
        return 0.0
    state = np.ones((3,) * program.width)
    for op in program.ops:
        if op[0] == "param":
            if op[2] == param:
                state = _project(state, op[1])
        else:
            state = _apply(state, op)
    value = program.scale * float(np.sum(state * _output_tensor(program, coeffs)))
    return observable.weight**2 * value


def circuit_variance_all_params(circuit: Circuit, observable: Observable) -> dict[ParamId, float]:
    """Variances for every parameter from one forward and one backward sweep.

    All operations in the program are symmetric, so the backward environment
    is the same program run in reverse from the output vectors.
    """
    observable.check_registers(circuit.n_qubits)
    out = {p: 0.0 for p in circuit.params}
    program, cone, coeffs = _cone_program(circuit, observable)
    if program is None:
        return out
    forward = {}
    state = np.ones((3,) * program.width)
    for i, op in enumerate(program.ops):
        if op[0] == "param" and op[2] is not None:
            forward[i] = state
        else:
            state = _apply(state, op)
    env = _output_tensor(program, coeffs)
    scale = program.scale * observable.weight**2
    for i in range(len(program.ops) - 1, -1, -1):
        op = program.ops[i]
        if op[0] == "param" and op[2] is not None:
            q = op[1]
            f = np.take(forward[i], 1, axis=q)
            b = np.take(env, 1, axis=q)
            out[op[2]] = scale * float(np.sum(f * b))
        else:
            env = _apply(env, op)
    return out


def contract_variance_tn(family: str, n_qubits: int, observable: Observable, param) -> float:
    return circuit_variance(build_ansatz(family, n_qubits), observable, param)


def contract_variance_all_params(family: str, n_qubits: int, observable: Observable) -> dict[ParamId, float]:
    return circuit_variance_all_params(build_ansatz(family, n_qubits), observable)


# ---------------------------------------------------------------- block map

def _block_program():
    # Both wires enter on a bare Z-spider (after an RZ) and run RX RX RZ RZ CNOT.
    ops = []
    for q in (0, 1):
        ops += [("edge", q), ("edge", q)]
    ops += [("edge", 1), ("link", 0, 1)]
    return ops


@lru_cache(maxsize=1)
def _block_matrix() -> np.ndarray:
    ops = _block_program()
    cols = []
    for e in np.eye(9):
        x = e.reshape(3, 3)
        for op in reversed(ops):
            x = _apply(x, op)
        cols.append(x.reshape(-1))
    standard = np.column_stack(cols)
    change = np.kron(BASIS, BASIS)
    coeff = np.linalg.solve(change, standard @ change)
    coeff[np.abs(coeff) < 1e-15] = 0.0
    return coeff


def block_map() -> np.ndarray:
    """9x9 map on (register a, register b) coefficient pairs for one two-qubit block.

    Acts backwards (from the legs after the CNOT to the legs before the RX
    pair), with row/column index 3*i + j for basis vectors i on a and j on b.
    """
    m = _block_matrix()
    # v13 on both wires must pass through unchanged up to the link weight,
    # and every coefficient must stay non-negative.
    if abs(m[0, 0] - 0.5) > 1e-12 or np.abs(m[1:, 0]).max() > 1e-12:
        raise RuntimeError("block map does not fix v13 (x) v13; network mis-assembled")
    if m.min() < -1e-12:
        raise RuntimeError("block map produced a negative coefficient; network mis-assembled")
    return m.copy()


def fraction_matrix(m: np.ndarray, max_den: int = 1 << 16) -> list[list[Fraction]]:
    return [[Fraction(float(x)).limit_denominator(max_den) for x in row] for row in m]
