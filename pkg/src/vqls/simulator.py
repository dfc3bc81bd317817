"""Dense statevector simulation of small qubit registers.

Amplitude ordering is little-endian: qubit ``q`` is bit ``q`` of the basis
index, so ``|q1 q0> = |10>`` lives at index 2.  Multi-qubit gate matrices use
the same convention over their own target list: the first target is the
least-significant bit of the matrix index.

Pauli words are strings over ``IXYZ`` where character ``k`` acts on qubit ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 14
UNITARY_CHECK_QUBITS = 6  # larger explicit matrices are trusted

_SQ2 = 1.0 / np.sqrt(2.0)

_FIXED = {
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    # control is the first target (least-significant matrix bit)
    "cx": np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    ),
    "swap": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}

PARAMETRIC = ("ry", "rz")
GATE_KINDS = tuple(_FIXED) + PARAMETRIC + ("cu", "unitary")
_ARITY = {"cz": 2, "cx": 2, "swap": 2}


class SimulationError(ValueError):
    """Raised on invalid qubit indices, dimension mismatches or malformed input."""


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class Gate:
    """One gate of the alphabet.

    ``kind`` is one of ``h x y z s sdg ry rz cz cx swap cu unitary``.
    ``cu`` applies the ``inner`` gate sequence conditioned on ``targets[0]``;
    ``unitary`` carries an explicit matrix over ``targets``.
    """

    kind: str
    targets: tuple[int, ...]
    theta: float | None = None
    inner: tuple["Gate", ...] = ()
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise SimulationError(f"repeated target in {self.targets}")
        if self.kind in PARAMETRIC and self.theta is None:
            raise SimulationError(f"{self.kind} needs an angle")
        if self.kind == "cu":
            if len(self.targets) != 1:
                raise SimulationError("cu takes exactly one control qubit")
            for g in self.inner:
                if self.targets[0] in g.qubits():
                    raise SimulationError("control qubit also targeted by inner gate")
        elif self.kind == "unitary":
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2 ** len(self.targets),) * 2:
                raise SimulationError("unitary matrix shape does not match targets")
            if len(self.targets) <= UNITARY_CHECK_QUBITS:
                if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10):
                    raise SimulationError("matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        else:
            if len(self.targets) != _ARITY.get(self.kind, 1):
                raise SimulationError(f"{self.kind} acts on {_ARITY.get(self.kind, 1)} qubit(s)")

    def qubits(self) -> set[int]:
        out = set(self.targets)
        for g in self.inner:
            out |= g.qubits()
        return out

    def local_matrix(self) -> np.ndarray:
        """Matrix over ``targets`` (not defined for ``cu``)."""
        if self.kind == "ry":
            return ry_matrix(self.theta)
        if self.kind == "rz":
            return rz_matrix(self.theta)
        if self.kind == "unitary":
            return self.matrix
        if self.kind == "cu":
            raise SimulationError("controlled gates have no local matrix")
        return _FIXED[self.kind]

    def dagger(self) -> "Gate":
        if self.kind in PARAMETRIC:
            return Gate(self.kind, self.targets, -self.theta)
        if self.kind == "s":
            return Gate("sdg", self.targets)
        if self.kind == "sdg":
            return Gate("s", self.targets)
        if self.kind == "cu":
            return Gate("cu", self.targets, inner=tuple(g.dagger() for g in reversed(self.inner)))
        if self.kind == "unitary":
            return Gate("unitary", self.targets, matrix=self.matrix.conj().T)
        return self

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        same = (self.kind, self.targets, self.theta, self.inner) == (
            other.kind,
            other.targets,
            other.theta,
            other.inner,
        )
        if same and self.kind == "unitary":
            return np.array_equal(self.matrix, other.matrix)
        return same

    def __hash__(self):
        return hash((self.kind, self.targets, self.theta, self.inner))


def controlled(control: int, gates: Iterable[Gate]) -> Gate:
    return Gate("cu", (control,), inner=tuple(gates))


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            bad = [q for q in g.qubits() if not 0 <= q < self.n]
            if bad:
                raise SimulationError(f"gate {g.kind} references qubit(s) {bad} outside n={self.n}")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise SimulationError("cannot concatenate circuits of different width")
        return Circuit(self.n, self.gates + other.gates)

    def dagger(self) -> "Circuit":
        return Circuit(self.n, tuple(g.dagger() for g in reversed(self.gates)))

    def widened(self, n: int, offset: int = 0) -> "Circuit":
        """Same gates on a register of ``n`` qubits, shifted by ``offset``."""
        return Circuit(n, tuple(shift_gate(g, offset) for g in self.gates))

    def controlled_by(self, control: int) -> Gate:
        return controlled(control, self.gates)


def shift_gate(g: Gate, offset: int) -> Gate:
    if offset == 0:
        return g
    return Gate(
        g.kind,
        tuple(t + offset for t in g.targets),
        g.theta,
        tuple(shift_gate(h, offset) for h in g.inner),
        g.matrix,
    )


class Statevector:
    """Immutable container for ``2**n`` amplitudes.

    Normalized states are checked on construction.  Pass
    ``normalized=False`` for vectors such as ``A|x>`` whose norm carries
    information.
    """

    __slots__ = ("n", "amplitudes", "normalized")

    def __init__(self, amplitudes, normalized: bool = True, cap: int = MAX_QUBITS, copy: bool = True):
        amps = np.array(amplitudes, dtype=complex, copy=copy).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else -1
        if n < 0 or 2**n != amps.size:
            raise SimulationError(f"length {amps.size} is not a power of two")
        if n > cap:
            raise SimulationError(f"{n} qubits exceeds the cap of {cap}")
        if normalized and abs(np.vdot(amps, amps).real - 1.0) > 1e-10:
            raise SimulationError("state is not normalized; pass normalized=False")
        amps.setflags(write=False)
        self.n = n
        self.amplitudes = amps
        self.normalized = normalized

    @classmethod
    def zero(cls, n: int, cap: int = MAX_QUBITS) -> "Statevector":
        if n > cap:
            raise SimulationError(f"{n} qubits exceeds the cap of {cap}")
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(amps, copy=False, cap=cap)

    @classmethod
    def basis(cls, n: int, index: int) -> "Statevector":
        amps = np.zeros(2**n, dtype=complex)
        amps[index] = 1.0
        return cls(amps, copy=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self):
        return f"Statevector(n={self.n}, normalized={self.normalized})"


# -- kernels ---------------------------------------------------------------


def _apply_matrix(psi: np.ndarray, m: np.ndarray, axes: Sequence[int]) -> None:
    """In place: contract ``m`` (little-endian over ``axes``) into tensor ``psi``."""
    k = len(axes)
    if k == 1:
        ax = axes[0]
        a0 = psi[(slice(None),) * ax + (0, Ellipsis)]
        a1 = psi[(slice(None),) * ax + (1, Ellipsis)]
        n0 = m[0, 0] * a0 + m[0, 1] * a1
        a1[...] = m[1, 0] * a0 + m[1, 1] * a1
        a0[...] = n0
        return
    # matrix axes are big-endian over targets after reshape
    t = m.reshape([2] * (2 * k))
    state_axes = list(reversed(axes))
    out = np.tensordot(t, psi, axes=(list(range(k, 2 * k)), state_axes))
    psi[...] = np.moveaxis(out, list(range(k)), state_axes)


def _apply(psi: np.ndarray, g: Gate, axis_of: dict[int, int]) -> None:
    if g.kind == "cu":
        ax = axis_of[g.targets[0]]
        sub = psi[(slice(None),) * ax + (1, Ellipsis)]
        sub_axes = {q: (a - 1 if a > ax else a) for q, a in axis_of.items() if q != g.targets[0]}
        for h in g.inner:
            _apply(sub, h, sub_axes)
        return
    if g.kind == "cz":
        a, b = axis_of[g.targets[0]], axis_of[g.targets[1]]
        idx = [slice(None)] * psi.ndim
        idx[a] = 1
        idx[b] = 1
        psi[tuple(idx)] *= -1
        return
    if g.kind == "z":
        psi[(slice(None),) * axis_of[g.targets[0]] + (1,)] *= -1
        return
    _apply_matrix(psi, g.local_matrix(), [axis_of[t] for t in g.targets])


def _check_gate(n: int, g: Gate) -> None:
    bad = [q for q in g.qubits() if not 0 <= q < n]
    if bad:
        raise SimulationError(f"gate {g.kind} targets qubit(s) {bad} outside n={n}")


def _axes(n: int) -> dict[int, int]:
    return {q: n - 1 - q for q in range(n)}


def apply_gate(state: Statevector, g: Gate) -> Statevector:
    _check_gate(state.n, g)
    buf = state.amplitudes.copy()
    _apply(buf.reshape([2] * state.n), g, _axes(state.n))
    return Statevector(buf, normalized=state.normalized, copy=False, cap=max(state.n, MAX_QUBITS))


def apply_gates_inplace(buf: np.ndarray, n: int, gates: Iterable[Gate]) -> np.ndarray:
    """Apply gates to a raw amplitude buffer owned by the caller."""
    psi = buf.reshape([2] * n)
    axes = _axes(n)
    for g in gates:
        _apply(psi, g, axes)
    return buf


def run_circuit(c: Circuit, initial: Statevector | None = None) -> Statevector:
    if initial is None:
        initial = Statevector.zero(c.n, cap=max(c.n, MAX_QUBITS))
    if initial.n != c.n:
        raise SimulationError(f"circuit has {c.n} qubits but state has {initial.n}")
    buf = initial.amplitudes.copy()
    apply_gates_inplace(buf, c.n, c.gates)
    return Statevector(buf, normalized=initial.normalized, copy=False, cap=max(c.n, MAX_QUBITS))


def run_batch(c: Circuit, block: np.ndarray) -> np.ndarray:
    """Apply ``c`` to every column of a ``(2**n, k)`` block; returns a new array."""
    buf = np.array(block, dtype=complex, order="C")
    if buf.shape[0] != 2**c.n:
        raise SimulationError("block height does not match circuit width")
    psi = buf.reshape([2] * c.n + [buf.shape[1]])
    axes = _axes(c.n)
    for g in c.gates:
        _apply(psi, g, axes)
    return buf


def circuit_unitary(c: Circuit, cap: int = 12) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a circuit (columns are images of basis states)."""
    if c.n > cap:
        raise SimulationError(f"dense unitary of {c.n} qubits exceeds cap {cap}")
    dim = 2**c.n
    # batch all basis states as an extra trailing axis
    buf = np.eye(dim, dtype=complex)
    psi = buf.reshape([2] * c.n + [dim])
    axes = _axes(c.n)
    for g in c.gates:
        _apply(psi, g, axes)
    return buf


def inner_product(a: Statevector, b: Statevector) -> complex:
    if a.n != b.n:
        raise SimulationError("inner product of states with different qubit counts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


# -- Pauli words -----------------------------------------------------------


def parse_pauli(word: str, n: int | None = None) -> tuple[int, int, int]:
    """Return ``(xmask, zmask, ny)`` for a word, ``ny`` counting Y factors."""
    if not isinstance(word, str) or any(ch not in "IXYZ" for ch in word.upper()):
        raise SimulationError(f"malformed Pauli word {word!r}")
    word = word.upper()
    if n is not None and len(word) > n:
        raise SimulationError(f"Pauli word {word!r} longer than {n} qubits")
    xmask = zmask = ny = 0
    for q, ch in enumerate(word):
        if ch in "XY":
            xmask |= 1 << q
        if ch in "ZY":
            zmask |= 1 << q
        ny += ch == "Y"
    return xmask, zmask, ny


def _parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    out = np.zeros_like(v)
    while v.any():
        out ^= v & 1
        v >>= 1
    return out


def pauli_action(word: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``P|i> = phase[i] |perm[i]>`` for the word ``P`` on ``n`` qubits."""
    xmask, zmask, ny = parse_pauli(word, n)
    idx = np.arange(2**n)
    phase = (1j**ny) * (1 - 2 * _parity(idx & zmask)).astype(complex)
    return idx ^ xmask, phase


def expectation_pauli(state: Statevector, word: str) -> float:
    perm, phase = pauli_action(word, state.n)
    a = state.amplitudes
    val = np.vdot(a[perm], phase * a)
    return float(val.real)


def pauli_circuit(word: str, n: int | None = None) -> Circuit:
    n = len(word) if n is None else n
    parse_pauli(word, n)
    gates = [Gate(ch.lower(), (q,)) for q, ch in enumerate(word.upper()) if ch != "I"]
    return Circuit(n, tuple(gates))


def pauli_matrix(word: str, n: int | None = None) -> np.ndarray:
    n = len(word) if n is None else n
    perm, phase = pauli_action(word, n)
    m = np.zeros((2**n, 2**n), dtype=complex)
    m[perm, np.arange(2**n)] = phase
    return m
