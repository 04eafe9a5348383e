"""Ansatz circuits over {RX, RZ, CNOT, H}, parameter addressing and causal cones.

Registers are 1-based throughout.  Gates are applied left to right to |0...0>.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

ROTATIONS = ("RX", "RZ")
GATE_KINDS = ("RX", "RZ", "CNOT", "H")
FAMILIES = ("qMPS", "qTTN", "qMERA", "custom")

PAULI_COEFFS = {
    "I": (1.0, 0.0, 0.0, 0.0),
    "X": (0.0, 1.0, 0.0, 0.0),
    "Y": (0.0, 0.0, 1.0, 0.0),
    "Z": (0.0, 0.0, 0.0, 1.0),
}


class ParamId(NamedTuple):
    """k-th rotation on register j, counted in circuit order."""

    j: int
    k: int

    def __str__(self) -> str:
        return f"{self.j},{self.k}"

    @classmethod
    def parse(cls, text: str) -> ParamId:
        m = re.fullmatch(r"\s*(\d+)\s*,\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"parameter must look like 'j,k', got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    param: ParamId | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "CNOT" else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} acts on {arity} register(s), got {self.targets}")
        if self.kind == "CNOT" and self.targets[0] == self.targets[1]:
            raise ValueError("CNOT control and target must differ")
        if (self.kind in ROTATIONS) != (self.param is not None):
            raise ValueError(f"{self.kind} gate has inconsistent parameter {self.param}")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS


@dataclass(frozen=True)
class Layer:
    """A named group of gate indices, e.g. one block or one coarse-graining layer."""

    name: str
    gates: tuple[int, ...]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    family: str = "custom"
    layers: tuple[Layer, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        seen = set()
        for g in self.gates:
            for r in g.targets:
                if not 1 <= r <= self.n_qubits:
                    raise ValueError(f"register {r} outside 1..{self.n_qubits}")
            if g.param is not None:
                if g.param in seen:
                    raise ValueError(f"parameter {g.param} appears twice")
                if g.param.j != g.targets[0]:
                    raise ValueError(f"parameter {g.param} sits on register {g.targets[0]}")
                seen.add(g.param)

    @cached_property
    def params(self) -> tuple[ParamId, ...]:
        """Parameters in circuit order; position is the linear parameter index."""
        return tuple(g.param for g in self.gates if g.param is not None)

    @property
    def n_params(self) -> int:
        return len(self.params)

    @cached_property
    def _param_lookup(self) -> dict[ParamId, tuple[int, int]]:
        out = {}
        linear = 0
        for gi, g in enumerate(self.gates):
            if g.param is not None:
                out[g.param] = (linear, gi)
                linear += 1
        return out

    def param_index(self, param: ParamId) -> int:
        """Position of `param` in the parameter vector."""
        return self._lookup(param)[0]

    def gate_index(self, param: ParamId) -> int:
        return self._lookup(param)[1]

    def _lookup(self, param) -> tuple[int, int]:
        param = ParamId(*param)
        try:
            return self._param_lookup[param]
        except KeyError:
            raise ValueError(f"parameter {param} not in this {self.n_qubits}-qubit circuit") from None

    def has_param(self, param) -> bool:
        return ParamId(*param) in self._param_lookup

    @property
    def n_cnots(self) -> int:
        return sum(g.kind == "CNOT" for g in self.gates)

    def restricted(self, gate_indices: Iterable[int]) -> tuple[list[tuple[str, tuple[int, ...], ParamId | None]], int]:
        """Gates in `gate_indices` with the registers they touch renumbered 0..w-1.

        Returns the compact gate list and the width w.  Parameter labels are kept.
        """
        keep = sorted(set(gate_indices))
        regs = sorted({r for gi in keep for r in self.gates[gi].targets})
        relabel = {r: i for i, r in enumerate(regs)}
        out = [(self.gates[gi].kind, tuple(relabel[r] for r in self.gates[gi].targets),
                self.gates[gi].param) for gi in keep]
        return out, len(regs)

    def to_json(self) -> str:
        doc = {
            "family": self.family,
            "n_qubits": self.n_qubits,
            "gates": [
                {"kind": g.kind, "targets": list(g.targets),
                 "param": list(g.param) if g.param is not None else None}
                for g in self.gates
            ],
        }
        return json.dumps(doc, indent=None, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> Circuit:
        doc = json.loads(text)
        gates = tuple(
            Gate(d["kind"], tuple(d["targets"]),
                 ParamId(*d["param"]) if d.get("param") is not None else None)
            for d in doc["gates"]
        )
        return cls(doc["n_qubits"], gates, doc.get("family", "custom"))


# ---------------------------------------------------------------- builders

def _assign_params(n: int, raw: list[tuple[str, tuple[int, ...]]]) -> tuple[Gate, ...]:
    counts = [0] * (n + 1)
    gates = []
    for kind, targets in raw:
        if kind in ROTATIONS:
            r = targets[0]
            counts[r] += 1
            gates.append(Gate(kind, targets, ParamId(r, counts[r])))
        else:
            gates.append(Gate(kind, targets))
    return tuple(gates)


def _pair(a: int, b: int) -> list[tuple[str, tuple[int, ...]]]:
    return [("RX", (a,)), ("RX", (b,)), ("RZ", (a,)), ("RZ", (b,)), ("CNOT", (a, b))]


def _tail(*regs: int) -> list[tuple[str, tuple[int, ...]]]:
    return [g for r in regs for g in (("RX", (r,)), ("RZ", (r,)))]


def exact_log2(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(f"qubit count must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


def _build_qmps(n: int):
    raw, layers = [], []
    for j in range(1, n):
        start = len(raw)
        raw += _pair(j, j + 1) + _tail(j)
        if j == n - 1:
            raw += _tail(j + 1)
        layers.append(Layer(f"U{j}", tuple(range(start, len(raw)))))
    return raw, layers


def _ttn_node(lo: int, size: int, depth: int, raw: list, levels: dict):
    half = size // 2
    levels.setdefault(depth, []).extend(range(len(raw), len(raw) + 5))
    raw += _pair(lo, lo + half)
    if half == 1:
        levels.setdefault(depth + 1, []).extend(range(len(raw), len(raw) + 4))
        raw += _tail(lo, lo + 1)
        return
    _ttn_node(lo, half, depth + 1, raw, levels)
    _ttn_node(lo + half, half, depth + 1, raw, levels)


def _build_qttn(n: int):
    exact_log2(n)
    raw, levels = [], {}
    _ttn_node(1, n, 1, raw, levels)
    layers = [Layer(f"level{d}", tuple(sorted(ix))) for d, ix in sorted(levels.items())]
    return raw, layers


def _mera_ring(n: int):
    """Ring order of registers after each level, numbered like the qTTN.

    Level 1 pairs (1, 1 + n/2).  At level 2 each of those registers gains a
    partner n/4 below it, placed on the outer side of the ring.  From level 3
    on, every coarse-graining pair (a, b) at adjacent ring slots splits into
    a, a + h, b + h, b.
    """
    a, b = 1, 1 + n // 2
    ring, h = [a, b], n // 2
    rings = [list(ring)]
    while len(ring) < n:
        h //= 2
        if len(ring) == 2:
            ring = [a + h, a, b, b + h]
        else:
            ring = [x for m in range(0, len(ring), 2)
                    for x in (ring[m], ring[m] + h, ring[m + 1] + h, ring[m + 1])]
        rings.append(list(ring))
    return rings


def _build_qmera(n: int):
    exact_log2(n)
    raw, layers = [], []

    def add(name, part):
        layers.append(Layer(name, tuple(range(len(raw), len(raw) + len(part)))))
        raw.extend(part)

    for level, ring in enumerate(_mera_ring(n), start=1):
        size = len(ring)
        add(f"CG{level}", [g for m in range(0, size, 2) for g in _pair(ring[m], ring[m + 1])])
        if level > 1:
            # disentanglers join neighbouring blocks, the last one across the wrap
            add(f"DIS{level}", [g for m in range(1, size, 2) for g in _pair(ring[m], ring[(m + 1) % size])])
    add("final", _tail(*range(1, n + 1)))
    return raw, layers


def _mera_cg_open(level: int, n_layers: int, n: int):
    step = 2 ** (n_layers - level + 1)
    half = step // 2
    return [g for a in range(1, n + 1, step) for g in _pair(a, a + half)]


def _mera_dis_open(level: int, n_layers: int, n: int):
    if level <= 1:
        return []
    stride = 2 ** (n_layers - level)
    raw = _mera_dis_open(level - 1, n_layers, n)
    # newly added registers at this level sit at 1 + stride + 2*stride*m
    c = 1 + stride
    while c + 2 * stride <= n:
        raw += _pair(c, c + 2 * stride)
        c += 4 * stride
    return raw


def _build_qmera_open(n: int):
    n_layers = exact_log2(n)
    raw, layers = [], []
    for level in range(1, n_layers + 1):
        for name, part in ((f"CG{level}", _mera_cg_open(level, n_layers, n)),
                           (f"DIS{level}", _mera_dis_open(level, n_layers, n))):
            if part:
                layers.append(Layer(name, tuple(range(len(raw), len(raw) + len(part)))))
                raw += part
    start = len(raw)
    raw += _tail(*range(1, n + 1))
    layers.append(Layer("final", tuple(range(start, len(raw)))))
    return raw, layers


def qmera_param_count(n: int) -> int:
    """Parameter count from the layer recursion alone, without building gates.

    Level l holds 2**(l-1) coarse-graining blocks and, for l >= 2, as many
    disentanglers; each block has four rotations, and the final layer two per
    register.
    """
    levels = exact_log2(n)
    blocks = sum(2 ** (l - 1) * (1 if l == 1 else 2) for l in range(1, levels + 1))
    return 4 * blocks + 2 * n


def qttn_param_count(n: int) -> int:
    """A node over 2**k registers has one block plus its two children; leaves add two rotations each."""
    exact_log2(n)
    return 4 * (n - 1) + 2 * n


_BUILDERS = {"qMPS": _build_qmps, "qTTN": _build_qttn, "qMERA": _build_qmera}
_ALIASES = {f.lower(): f for f in _BUILDERS}


def canonical_family(family: str) -> str:
    try:
        return _ALIASES[family.lower()]
    except KeyError:
        raise ValueError(f"unknown ansatz family {family!r}; choose from qmps, qttn, qmera") from None


def build_ansatz(family: str, n_qubits: int, *, open_boundary: bool = False) -> Circuit:
    """Build a qMPS, qTTN or qMERA circuit.

    The qMERA is periodic by default: its last disentangler in each level
    wraps from the bottom register back to the top.  ``open_boundary=True``
    drops those wrapping gates and uses a fixed-stride disentangler pattern.
    """
    family = canonical_family(family)
    if n_qubits < 2:
        raise ValueError(f"need at least 2 qubits, got {n_qubits}")
    if open_boundary and family != "qMERA":
        raise ValueError("open_boundary only applies to qMERA")
    builder = _build_qmera_open if open_boundary else _BUILDERS[family]
    raw, layers = builder(n_qubits)
    return Circuit(n_qubits, _assign_params(n_qubits, raw), family, tuple(layers))


# ---------------------------------------------------------------- observables

@dataclass(frozen=True)
class Observable:
    """Product observable: per-site mixtures k0*I + k1*X + k2*Y + k3*Z, times a weight.

    Registers missing from `sites` carry the identity.
    """

    sites: tuple[tuple[int, tuple[float, float, float, float]], ...]
    weight: float = 1.0

    def __post_init__(self):
        regs = [r for r, _ in self.sites]
        if len(set(regs)) != len(regs):
            raise ValueError("observable lists a register twice")
        if list(regs) != sorted(regs):
            object.__setattr__(self, "sites", tuple(sorted(self.sites)))
        for r, k in self.sites:
            if r < 1 or len(k) != 4:
                raise ValueError(f"bad site entry {(r, k)}")

    @classmethod
    def pauli(cls, label: str, *registers: int, weight: float = 1.0) -> Observable:
        """`pauli("X", 3)` is X_3; `pauli("XZ", 2, 3)` is X_2 Z_3."""
        if len(label) == 1 and len(registers) > 1:
            label = label * len(registers)
        if len(label) != len(registers):
            raise ValueError("one Pauli letter per register")
        return cls(tuple((r, PAULI_COEFFS[p]) for p, r in zip(label.upper(), registers)), weight)

    @classmethod
    def parse(cls, text: str) -> Observable:
        """Parse `X:2*Z:3`, optionally with a leading numeric weight (`-0.5*Z:1*Z:2`)."""
        weight = 1.0
        factors = []
        for part in text.replace(" ", "").split("*"):
            m = re.fullmatch(r"([IXYZ]):(\d+)", part, flags=re.IGNORECASE)
            if m:
                factors.append((m.group(1).upper(), int(m.group(2))))
                continue
            try:
                weight *= float(part)
            except ValueError:
                raise ValueError(f"cannot parse observable factor {part!r}") from None
        if not factors:
            raise ValueError(f"observable {text!r} has no Pauli factor")
        regs = [r for _, r in factors]
        if len(set(regs)) != len(regs):
            raise ValueError(f"observable {text!r} repeats a register")
        return cls.pauli("".join(p for p, _ in factors), *regs, weight=weight)

    def coeffs(self, register: int) -> tuple[float, float, float, float]:
        for r, k in self.sites:
            if r == register:
                return k
        return PAULI_COEFFS["I"]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(r for r, k in self.sites if tuple(k) != PAULI_COEFFS["I"])

    def pauli_label(self, register: int) -> str | None:
        k = tuple(self.coeffs(register))
        for p, c in PAULI_COEFFS.items():
            if k == c:
                return p
        return None

    def __str__(self) -> str:
        parts = []
        for r, k in self.sites:
            p = self.pauli_label(r)
            if p is None:
                return f"{self.weight}*" + "*".join(f"{list(k)}:{r}" for r, k in self.sites)
            if p != "I":
                parts.append(f"{p}:{r}")
        body = "*".join(parts) if parts else "I:1"
        return body if self.weight == 1.0 else f"{self.weight:g}*{body}"

    def check_registers(self, n_qubits: int):
        for r, _ in self.sites:
            if r > n_qubits:
                raise ValueError(f"observable site {r} outside 1..{n_qubits}")


def ising_terms(n_qubits: int, J: float, h: float) -> list[Observable]:
    """-J sum Z_i Z_{i+1} - h sum X_i on an open chain, one Observable per term."""
    terms = [Observable.pauli("ZZ", i, i + 1, weight=-J) for i in range(1, n_qubits)]
    terms += [Observable.pauli("X", i, weight=-h) for i in range(1, n_qubits + 1)]
    return terms


def heisenberg_terms(n_qubits: int) -> list[Observable]:
    """1/4 sum (XX + YY + ZZ) over neighbouring pairs of an open chain."""
    return [Observable.pauli(p * 2, i, i + 1, weight=0.25)
            for i in range(1, n_qubits) for p in "XYZ"]


def parse_observables(text: str, n_qubits: int) -> list[Observable]:
    """Observable string or preset (`ising:J,h`, `heisenberg`) to a list of terms."""
    t = text.strip().lower()
    if t.startswith("ising"):
        m = re.fullmatch(r"ising:([-+0-9.eE]+),([-+0-9.eE]+)", t)
        if not m:
            raise ValueError(f"ising preset must look like 'ising:J,h', got {text!r}")
        return ising_terms(n_qubits, float(m.group(1)), float(m.group(2)))
    if t == "heisenberg":
        return heisenberg_terms(n_qubits)
    obs = Observable.parse(text)
    obs.check_registers(n_qubits)
    return [obs]


# ---------------------------------------------------------------- causal cones

@dataclass(frozen=True)
class CausalCone:
    registers: frozenset[int]
    gates: frozenset[int] = field(repr=False)

    def contains_param(self, circuit: Circuit, param) -> bool:
        return circuit.gate_index(param) in self.gates


def causal_cone(circuit: Circuit, observable: Observable) -> CausalCone:
    """Backward light cone of the observable's support."""
    observable.check_registers(circuit.n_qubits)
    live = set(observable.support)
    regs = set(live)
    gates = set()
    for gi in range(len(circuit.gates) - 1, -1, -1):
        g = circuit.gates[gi]
        if live.intersection(g.targets):
            gates.add(gi)
            live.update(g.targets)
            regs.update(g.targets)
    return CausalCone(frozenset(regs), frozenset(gates))


def variance_is_zero(family: str, n_qubits: int, observable: Observable, param) -> bool:
    """True when the parameter cannot influence the observable at all."""
    circuit = build_ansatz(family, n_qubits)
    param = ParamId(*param)
    if not circuit.has_param(param):
        raise ValueError(f"parameter {param} not in {family}({n_qubits})")
    return not causal_cone(circuit, observable).contains_param(circuit, param)
