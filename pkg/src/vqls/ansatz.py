"""Parameterized trial circuits ``V(alpha)``.

An :class:`Ansatz` is a structure (a tuple of slots) plus a parameter vector.
Each rotation slot owns exactly one parameter, so a shift of ``alpha[i]``
shifts exactly one gate; this is what the parameter-shift gradient relies on.

Families
--------
``hea``
    layered hardware-efficient ansatz of RY columns and alternating CZ pairs.
``qaoa``
    alternating driver / mixer evolutions applied to ``H^{(x)n}|0>``.
``variable``
    a structure that grows by inserting identity-compiling blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from .cost import CostKind
from .problem import QlspInstance
from .simulator import Circuit, Gate, Statevector, pauli_matrix, run_circuit

ROTATIONS = ("ry", "rz")
GROWTH_BLOCK_SIZE = 4
QAOA_CAP = 12


class AnsatzError(ValueError):
    pass


@dataclass(frozen=True)
class Slot:
    kind: str  # ry | rz | cz | h | driver | mixer
    qubits: tuple[int, ...] = ()

    @property
    def parametric(self) -> bool:
        return self.kind in ROTATIONS or self.kind in ("driver", "mixer")


@dataclass(frozen=True)
class QaoaSpec:
    p: int = 1
    driver: CostKind = CostKind.GLOBAL_HAT
    driver_scale: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise AnsatzError("QAOA needs p >= 1")
        if not self.driver_scale > 0:
            raise AnsatzError("driver_scale must be positive")
        object.__setattr__(self, "driver", CostKind.parse(self.driver))
        if self.driver not in (CostKind.GLOBAL_HAT, CostKind.LOCAL_HAT):
            raise AnsatzError("driver must be the GlobalHat or LocalHat Hamiltonian")


class QaoaOperators:
    """Dense driver / mixer exponentials for one instance (eigendecomposition cached)."""

    def __init__(self, inst: QlspInstance, spec: QaoaSpec):
        if inst.n > QAOA_CAP:
            raise AnsatzError(f"QAOA dense exponentials capped at {QAOA_CAP} qubits")
        self.n = inst.n
        self.spec = spec
        self.H_D = effective_hamiltonian(inst, spec.driver)
        self.evals, self.evecs = np.linalg.eigh(self.H_D)
        self.X_all = pauli_matrix("X" * inst.n)

    def driver(self, t: float) -> np.ndarray:
        ph = np.exp(-1j * self.evals * t)
        return (self.evecs * ph) @ self.evecs.conj().T

    def mixer(self, t: float) -> np.ndarray:
        # (X...X)^2 = I, so the exponential has a closed form
        return math.cos(t) * np.eye(2**self.n) - 1j * math.sin(t) * self.X_all


def effective_hamiltonian(inst: QlspInstance, kind: CostKind | str) -> np.ndarray:
    """Dense ``H_G = A^dag (I - |b><b|) A`` or ``H_L = A^dag U (I - (1/n) sum_j |0_j><0_j|) U^dag A``."""
    kind = CostKind.parse(kind)
    A = inst.dense
    dim = A.shape[0]
    if kind.local:
        n = inst.n
        idx = np.arange(dim)
        zeros = np.array([n - bin(i).count("1") for i in idx], dtype=float)
        U = inst.b_prep_unitary
        mid = U @ np.diag(1.0 - zeros / n) @ U.conj().T
    else:
        b = inst.b
        mid = np.eye(dim) - np.outer(b, b.conj())
    H = A.conj().T @ mid @ A
    return (H + H.conj().T) / 2


@dataclass(frozen=True)
class Ansatz:
    n: int
    family: str
    structure: tuple[Slot, ...]
    parameters: np.ndarray = field(default=None, compare=False)
    qaoa: QaoaOperators | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "structure", tuple(self.structure))
        if self.parameters is None:
            params = np.zeros(self.num_parameters)
        else:
            params = np.array(self.parameters, dtype=float)
        if params.shape != (self.num_parameters,):
            raise AnsatzError(f"expected {self.num_parameters} parameters, got {params.shape}")
        params.setflags(write=False)
        object.__setattr__(self, "parameters", params)

    @cached_property
    def param_slots(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.structure) if s.parametric)

    @property
    def num_parameters(self) -> int:
        return sum(s.parametric for s in self.structure)

    @property
    def num_gates(self) -> int:
        return len(self.structure)

    @property
    def shift_compatible(self) -> bool:
        return self.family != "qaoa"

    def with_parameters(self, alpha) -> "Ansatz":
        return replace(self, parameters=np.asarray(alpha, dtype=float))

    def _check(self, alpha) -> np.ndarray:
        alpha = self.parameters if alpha is None else np.asarray(alpha, dtype=float)
        if alpha.shape != (self.num_parameters,):
            raise AnsatzError(f"expected {self.num_parameters} parameters, got {alpha.shape}")
        return alpha

    def circuit(self, alpha=None) -> Circuit:
        """Bind parameters and return the concrete circuit."""
        alpha = self._check(alpha)
        it = iter(alpha)
        gates = []
        full = tuple(range(self.n))
        for s in self.structure:
            if s.kind in ROTATIONS:
                gates.append(Gate(s.kind, s.qubits, float(next(it))))
            elif s.kind == "driver":
                t = float(next(it)) * self.qaoa.spec.driver_scale
                gates.append(Gate("unitary", full, matrix=self.qaoa.driver(t)))
            elif s.kind == "mixer":
                gates.append(Gate("unitary", full, matrix=self.qaoa.mixer(float(next(it)))))
            else:
                gates.append(Gate(s.kind, s.qubits))
        return Circuit(self.n, tuple(gates))


def prepare_state(a: Ansatz, alpha=None) -> Statevector:
    return run_circuit(a.circuit(alpha))


class StatePlan:
    """Precompiled ``alpha -> V(alpha)|0>`` for optimization loops.

    Skips gate-object construction and runs a flat op table through a
    compiled kernel; RY/CZ/H-only structures use real amplitudes.  Agrees
    with :func:`prepare_state` to rounding.
    """

    _codes = {"ry": _kernels.RY, "rz": _kernels.RZ, "cz": _kernels.CZ, "h": _kernels.H}

    def __init__(self, a: Ansatz):
        if a.family == "qaoa":
            raise AnsatzError("QAOA states go through prepare_state")
        self.n = a.n
        self.real = all(s.kind in ("ry", "cz", "h") for s in a.structure)
        rows = []
        p = 0
        for s in a.structure:
            if s.kind not in self._codes:
                raise AnsatzError(f"slot kind {s.kind!r} not supported by StatePlan")
            q2 = s.qubits[1] if len(s.qubits) > 1 else 0
            rows.append((self._codes[s.kind], s.qubits[0], q2, p if s.parametric else 0))
            p += s.parametric
        self.ops = np.array(rows, dtype=np.int64).reshape(-1, 4)

    def __call__(self, alpha) -> np.ndarray:
        buf = np.zeros(2**self.n, dtype=float if self.real else complex)
        buf[0] = 1.0
        _kernels.run_plan(self.ops, np.asarray(alpha, dtype=float), buf)
        return buf


def _pairs(n: int, start: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(start, n - 1, 2)]


def hea_counts(n: int, layers: int) -> tuple[int, int]:
    """Closed-form (gates, parameters) of :func:`build_hea` with the RY alphabet."""
    even, odd = n // 2, (n - 1) // 2
    params = n + layers * (n + 2 * odd)
    gates = params + layers * (even + odd)
    return gates, params


def hea_structure(n: int, layers: int, complex_alphabet: bool = False) -> list[Slot]:
    """Slot list for the layered hardware-efficient ansatz.

    Layout: an RY column, then per layer CZ on pairs ``(0,1),(2,3),...``, an
    RY column, CZ on pairs ``(1,2),(3,4),...`` and RY on the qubits those
    pairs touch.  ``complex_alphabet`` follows every RY with an RZ.
    """
    if n < 2:
        raise AnsatzError("the hardware-efficient ansatz needs n >= 2")
    if layers < 1:
        raise AnsatzError("need at least one layer")

    def rot(q):
        out = [Slot("ry", (q,))]
        if complex_alphabet:
            out.append(Slot("rz", (q,)))
        return out

    slots: list[Slot] = []
    for q in range(n):
        slots += rot(q)
    odd_qubits = sorted({q for p in _pairs(n, 1) for q in p})
    for _ in range(layers):
        slots += [Slot("cz", p) for p in _pairs(n, 0)]
        for q in range(n):
            slots += rot(q)
        slots += [Slot("cz", p) for p in _pairs(n, 1)]
        for q in odd_qubits:
            slots += rot(q)
    return slots


def build_hea(n: int, layers: int, complex_alphabet: bool = False, alpha=None) -> Ansatz:
    return Ansatz(n, "hea", tuple(hea_structure(n, layers, complex_alphabet)), alpha)


def build_qaoa(inst: QlspInstance, spec: QaoaSpec = QaoaSpec(), alpha=None) -> Ansatz:
    """``V = e^{-i H_M a_2p} e^{-i H_D a_2p-1} ... e^{-i H_M a_2} e^{-i H_D a_1}`` after ``H^{(x)n}``.

    ``spec.driver_scale`` multiplies every driver time (odd 1-based index).
    """
    ops = QaoaOperators(inst, spec)
    slots = [Slot("h", (q,)) for q in range(inst.n)]
    for _ in range(spec.p):
        slots += [Slot("driver"), Slot("mixer")]
    return Ansatz(inst.n, "qaoa", tuple(slots), alpha, ops)


def build_variable(n: int, seed_structure: Sequence[Slot] | None = None, complex_alphabet: bool = False) -> Ansatz:
    """Variable-structure ansatz; starts from one RY column (plus an RZ column
    with ``complex_alphabet``) unless given a structure."""
    if n < 2:
        raise AnsatzError("growth blocks need n >= 2")
    if seed_structure is not None:
        slots = list(seed_structure)
    else:
        slots = [Slot("ry", (q,)) for q in range(n)]
        if complex_alphabet:
            slots += [Slot("rz", (q,)) for q in range(n)]
    return Ansatz(n, "variable", tuple(slots))


def growth_block(q: int, axes: Sequence[str] = ("ry",) * 4) -> list[Slot]:
    """Two rotation columns on ``(q, q+1)`` each closed by a CZ; identity at zero angles."""
    a = list(axes)
    return [
        Slot(a[0], (q,)),
        Slot(a[1], (q + 1,)),
        Slot("cz", (q, q + 1)),
        Slot(a[2], (q,)),
        Slot(a[3], (q + 1,)),
        Slot("cz", (q, q + 1)),
    ]


def grow_variable(a: Ansatz, seed=None) -> Ansatz:
    """Insert a zero-angle growth block at a random position on a random neighbor edge.

    If the structure already holds an RZ slot each block rotation axis is
    drawn from {RY, RZ}; otherwise the block is all RY.
    """
    if a.family != "variable":
        raise AnsatzError("only variable ansatze can grow")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pos = int(rng.integers(len(a.structure) + 1))
    q = int(rng.integers(a.n - 1))
    axes = ("ry",) * 4
    if any(s.kind == "rz" for s in a.structure):
        axes = tuple(ROTATIONS[k] for k in rng.integers(2, size=4))
    new_slots = list(a.structure[:pos]) + growth_block(q, axes) + list(a.structure[pos:])
    before = sum(s.parametric for s in a.structure[:pos])
    alpha = np.concatenate([a.parameters[:before], np.zeros(GROWTH_BLOCK_SIZE), a.parameters[before:]])
    return Ansatz(a.n, a.family, tuple(new_slots), alpha)


# -- gate-list serialization -----------------------------------------------


def slots_to_json(a: Ansatz) -> list[dict]:
    if a.family == "qaoa":
        raise AnsatzError("QAOA structure depends on the instance; serialize the bound circuit instead")
    out = []
    it = iter(a.parameters)
    for s in a.structure:
        d = {"gate": s.kind, "targets": list(s.qubits)}
        if s.parametric:
            d["theta"] = float(next(it))
        out.append(d)
    return out


def slots_from_json(n: int, family: str, items: list[dict]) -> Ansatz:
    slots, alpha = [], []
    for d in items:
        s = Slot(d["gate"], tuple(int(t) for t in d["targets"]))
        slots.append(s)
        if s.parametric:
            alpha.append(float(d["theta"]))
    return Ansatz(n, family, tuple(slots), np.array(alpha))


def state_function(a: Ansatz):
    """Fast ``alpha -> amplitudes`` callable for any family."""
    if a.family != "qaoa":
        return StatePlan(a)
    plus = np.full(2**a.n, 2 ** (-a.n / 2), dtype=complex)
    scale = a.qaoa.spec.driver_scale

    def run(alpha):
        x = plus
        for k, t in enumerate(alpha):
            x = (a.qaoa.driver(t * scale) if k % 2 == 0 else a.qaoa.mixer(t)) @ x
        return x

    return run
