"""Linear-system instances in linear-combination-of-unitaries form.

An instance bundles ``A = sum_l c_l A_l`` (each ``A_l`` a circuit), the
circuit ``U`` with ``|b> = U|0...0>``, and the condition number when it is
known by construction.  The benchmark families rescale their spectra onto
``[1/kappa, 1]`` with a dense eigensolver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .simulator import (
    MAX_QUBITS,
    Circuit,
    Gate,
    Statevector,
    circuit_unitary,
    controlled,
    pauli_circuit,
    pauli_matrix,
    run_circuit,
)

DENSE_CAP = 12


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class LcuTerm:
    coeff: complex
    circuit: Circuit
    word: str | None = None  # set when the unitary is a Pauli word


@dataclass(frozen=True)
class LcuMatrix:
    n: int
    terms: tuple[LcuTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ProblemError("an LCU matrix needs at least one term")
        for t in self.terms:
            if t.circuit.n != self.n:
                raise ProblemError("term width does not match n")

    @property
    def L(self) -> int:
        return len(self.terms)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms], dtype=complex)

    @classmethod
    def from_paulis(cls, n: int, pairs: Sequence[tuple[complex, str]]) -> "LcuMatrix":
        terms = []
        for c, w in pairs:
            w = w.upper()
            if len(w) != n:
                raise ProblemError(f"Pauli word {w!r} does not have length {n}")
            terms.append(LcuTerm(complex(c), pauli_circuit(w, n), w))
        return cls(n, tuple(terms))


def term_matrix(t: LcuTerm, n: int) -> np.ndarray:
    if t.word is not None:
        return pauli_matrix(t.word, n)
    return circuit_unitary(t.circuit, cap=DENSE_CAP)


def assemble_dense(A: LcuMatrix, cap: int = DENSE_CAP) -> np.ndarray:
    if A.n > cap:
        raise ProblemError(f"dense assembly of {A.n} qubits exceeds cap {cap}")
    out = np.zeros((2**A.n, 2**A.n), dtype=complex)
    for t in A.terms:
        out += t.coeff * term_matrix(t, A.n)
    return out


@dataclass(frozen=True)
class QlspInstance:
    A: LcuMatrix
    b_prep: Circuit
    kappa: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.A.n != self.b_prep.n:
            raise ProblemError("A and b_prep act on different qubit counts")

    @property
    def n(self) -> int:
        return self.A.n

    @cached_property
    def dense(self) -> np.ndarray:
        return assemble_dense(self.A)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array(run_circuit(self.b_prep).amplitudes)

    @cached_property
    def b_prep_unitary(self) -> np.ndarray:
        return circuit_unitary(self.b_prep, cap=DENSE_CAP)


def _rescale(m: np.ndarray, kappa: float) -> tuple[float, float]:
    """Affine map ``m -> (m + shift) / scale`` sending the spectrum onto [1/kappa, 1]."""
    ev = np.linalg.eigvalsh(m)
    lo, hi = ev[0], ev[-1]
    if hi - lo < 1e-12:
        raise ProblemError("spectrum is degenerate; cannot reach the requested condition number")
    scale = (hi - lo) / (1.0 - 1.0 / kappa)
    return scale - hi, scale


def _check_n(n: int) -> None:
    if n < 2:
        raise ProblemError("need at least two qubits")
    if n > MAX_QUBITS:
        raise ProblemError(f"{n} qubits exceeds the simulator cap of {MAX_QUBITS}")
    if n > DENSE_CAP:
        raise ProblemError(f"{n} qubits exceeds the dense eigensolver cap of {DENSE_CAP}")


def hadamard_prep(n: int) -> Circuit:
    return Circuit(n, tuple(Gate("h", (q,)) for q in range(n)))


def ising_qlsp(n: int, J: float = 0.1, kappa: float = 20.0) -> QlspInstance:
    """Transverse-field chain ``(sum X_j + J sum Z_j Z_{j+1} + eta) / zeta`` with ``|b> = |+...+>``."""
    if kappa <= 1:
        raise ProblemError("kappa must exceed 1")
    if J < 0:
        raise ProblemError("J must be nonnegative")
    _check_n(n)
    words = []
    for j in range(n):
        words.append((1.0, "I" * j + "X" + "I" * (n - j - 1)))
    for j in range(n - 1):
        words.append((J, "I" * j + "ZZ" + "I" * (n - j - 2)))
    raw = sum(c * pauli_matrix(w, n) for c, w in words)
    eta, zeta = _rescale(raw, kappa)
    pairs = [(c / zeta, w) for c, w in words] + [(eta / zeta, "I" * n)]
    return QlspInstance(
        LcuMatrix.from_paulis(n, pairs), hadamard_prep(n), float(kappa), f"ising(n={n},J={J},kappa={kappa})"
    )


def random_qlsp(
    n: int,
    kappa: float,
    pair_probability: float = 0.3,
    seed=None,
    max_retries: int = 50,
) -> QlspInstance:
    """Random two-body Pauli matrix ``xi1 (I + xi2 sum p a sigma_j sigma_k)``.

    Each ordered pair ``j != k`` is switched on independently with
    probability ``pair_probability``; weights are uniform in (-1, 1) and the
    Pauli axes uniform over x, y, z.
    """
    if kappa <= 1:
        raise ProblemError("kappa must exceed 1")
    _check_n(n)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        pairs = []
        for j in range(n):
            for k in range(n):
                if j == k:
                    continue
                p = rng.random() < pair_probability
                a = rng.uniform(-1.0, 1.0)
                ax = rng.integers(0, 3, size=2)
                if not p:
                    continue
                w = ["I"] * n
                w[j], w[k] = "XYZ"[ax[0]], "XYZ"[ax[1]]
                pairs.append((a, "".join(w)))
        if not pairs:
            continue
        raw = sum(c * pauli_matrix(w, n) for c, w in pairs)
        ev = np.linalg.eigvalsh(raw)
        lo, hi = ev[0], ev[-1]
        if hi - lo < 1e-9 or hi <= 0 or lo >= 0:
            continue
        xi2 = (kappa - 1.0) / (hi - kappa * lo)
        xi1 = 1.0 / (1.0 + xi2 * hi)
        terms = [(xi1, "I" * n)] + [(xi1 * xi2 * c, w) for c, w in pairs]
        return QlspInstance(
            LcuMatrix.from_paulis(n, terms), hadamard_prep(n), float(kappa), f"random(n={n},kappa={kappa})"
        )
    raise ProblemError(f"no usable random matrix after {max_retries} draws")


def degenerate_qlsp(variant: int, kappa: float) -> QlspInstance:
    """Three-qubit diagonal matrices whose smallest eigenvalue has degeneracy 1, 2 or 4."""
    if variant not in (1, 2, 3):
        raise ProblemError("variant must be 1, 2 or 3")
    if kappa <= 1:
        raise ProblemError("kappa must exceed 1")
    k = float(kappa)
    # words are qubit-0-first, so Z1 -> "ZII", Z3 -> "IIZ"
    if variant == 1:
        pairs = [(4 * (k + 1), "III"), (k - 1, "IIZ"), (k - 1, "IZI"), (2 * (k - 1), "ZII")]
        norm = 8 * k
    elif variant == 2:
        pairs = [(2 * (k + 1), "III"), (k - 1, "IIZ"), (k - 1, "IZI")]
        norm = 4 * k
    else:
        pairs = [(k + 1, "III"), (k - 1, "IIZ")]
        norm = 2 * k
    return QlspInstance(
        LcuMatrix.from_paulis(3, [(c / norm, w) for c, w in pairs]),
        hadamard_prep(3),
        k,
        f"degenerate(A{variant},kappa={kappa})",
    )


def pauli_qlsp(n: int, pairs: Sequence[tuple[complex, str]], b_prep: Circuit, kappa: float | None = None, label: str = "") -> QlspInstance:
    return QlspInstance(LcuMatrix.from_paulis(n, pairs), b_prep, kappa, label)


def dense_solve_oracle(inst: QlspInstance) -> Statevector:
    if inst.n > DENSE_CAP:
        raise ProblemError(f"dense solve of {inst.n} qubits exceeds cap {DENSE_CAP}")
    A = inst.dense
    if np.linalg.cond(A) > 1e14:
        raise ProblemError("matrix is numerically singular")
    x = np.linalg.solve(A, inst.b)
    return Statevector(x / np.linalg.norm(x))


def estimate_kappa(inst: QlspInstance) -> float:
    s = np.linalg.svd(inst.dense, compute_uv=False)
    return float(s[0] / s[-1])


# -- sparse oracle decomposition ------------------------------------------


@dataclass(frozen=True)
class SparseOracle:
    """Row-sparse access to a matrix: entries ``A[j, i]`` and neighbor lists ``F_j``."""

    n: int
    d: int
    entry: Callable[[int, int], complex]
    neighbors: tuple[tuple[int, ...], ...]
    hermitian: bool = True

    @classmethod
    def from_dense(cls, A: np.ndarray, d: int | None = None, tol: float = 0.0) -> "SparseOracle":
        A = np.asarray(A, dtype=complex)
        N = A.shape[0]
        n = int(round(math.log2(N)))
        if A.shape != (N, N) or 2**n != N:
            raise ProblemError("matrix must be square with power-of-two dimension")
        rows = tuple(tuple(int(i) for i in np.flatnonzero(np.abs(A[j]) > tol)) for j in range(N))
        width = max(len(r) for r in rows)
        d = width if d is None else d
        frozen = A.copy()
        return cls(
            n,
            max(d, 1),
            lambda j, i: complex(frozen[j, i]),
            rows,
            hermitian=bool(np.allclose(A, A.conj().T, atol=1e-12)),
        )

    def neighbor(self, j: int, l: int) -> int:
        """Column index of the ``l``-th nonzero in row ``j``, extended to a bijection of l."""
        F = self.neighbors[j]
        if l < len(F):
            return F[l]
        rest = [i for i in range(2**self.n) if i not in set(F)]
        return rest[l - len(F)]

    def to_dense(self) -> np.ndarray:
        N = 2**self.n
        out = np.zeros((N, N), dtype=complex)
        for j in range(N):
            for i in self.neighbors[j]:
                out[j, i] = self.entry(j, i)
        return out


def _branch_sqrt(z: complex) -> complex:
    return complex(np.sqrt(complex(z)))


def _half_walk_unitary(oracle: SparseOracle, codebook: dict, transpose: bool, bits: int) -> np.ndarray:
    """Dense matrix of ``U_x`` (``transpose=False``) or ``U_y`` on ``2n + 2`` qubits.

    Simulated step by step on basis states carrying the temporary value
    register: Hadamards on the index register, neighbor query, value query,
    controlled rotation, value uncompute.  The value register must return
    to zero on every branch.
    """
    n = oracle.n
    N = 2**n
    d = oracle.d
    logd = int(math.log2(d))
    dim = 4 * N * N
    values = codebook["values"]
    U = np.zeros((dim, dim), dtype=complex)

    for col in range(dim):
        r1, r2, q3, q4 = col % N, (col // N) % N, (col >> (2 * n)) & 1, (col >> (2 * n + 1)) & 1
        state = {(r1, r2, 0, q3, q4): 1.0 + 0j}

        # 1. Hadamards on the low log d qubits of the index register
        for bit in range(logd):
            nxt: dict = {}
            for (a, b, t, c3, c4), amp in state.items():
                reg = b if not transpose else a
                v = (reg >> bit) & 1
                for w in (0, 1):
                    sign = -1.0 if (v and w) else 1.0
                    new = (reg & ~(1 << bit)) | (w << bit)
                    key = (a, new, t, c3, c4) if not transpose else (new, b, t, c3, c4)
                    nxt[key] = nxt.get(key, 0) + amp * sign / math.sqrt(2)
            state = nxt

        # 2. neighbor query: |j>|l> -> |j>|f(j, l)>
        nxt = {}
        for (a, b, t, c3, c4), amp in state.items():
            key = (a, oracle.neighbor(a, b), t, c3, c4) if not transpose else (oracle.neighbor(b, a), b, t, c3, c4)
            nxt[key] = nxt.get(key, 0) + amp
        state = nxt

        # 3. value query into the temporary register
        def query(st):
            out = {}
            for (a, b, t, c3, c4), amp in st.items():
                k = codebook["key"].get((a, b), 0)
                key = (a, b, t ^ k, c3, c4)
                out[key] = out.get(key, 0) + amp
            return out

        state = query(state)

        # 4. rotation controlled on the stored value
        nxt = {}
        for (a, b, t, c3, c4), amp in state.items():
            if t >= len(values):
                raise ProblemError("value register holds an undefined code")
            val = values[t]
            s = _branch_sqrt(val)
            r = math.sqrt(max(0.0, 1.0 - abs(val)))
            if not transpose:
                # |0> -> conj(s)|0> + r|1> on the last qubit
                rot = np.array([[s.conjugate(), -r], [r, s]])
                src = c4
            else:
                # |0> -> s|0> + r|1> on the first single-qubit register
                rot = np.array([[s, -r], [r, s.conjugate()]])
                src = c3
            for w in (0, 1):
                coef = rot[w, src]
                if coef == 0:
                    continue
                key = (a, b, t, c3, w) if not transpose else (a, b, t, w, c4)
                nxt[key] = nxt.get(key, 0) + amp * coef
        state = nxt

        # 5. uncompute the value register
        state = query(state)

        for (a, b, t, c3, c4), amp in state.items():
            if t != 0:
                if abs(amp) > 1e-14:
                    raise ProblemError("value register not returned to zero")
                continue
            row = a + N * b + (c3 << (2 * n)) + (c4 << (2 * n + 1))
            U[row, col] += amp
    return U


def _codebook(oracle: SparseOracle, bits: int) -> dict:
    """Map each distinct nonzero entry to a key of the temporary value register."""
    values = [0j]
    index: dict[complex, int] = {0j: 0}
    key = {}
    N = 2**oracle.n
    for j in range(N):
        for i in oracle.neighbors[j]:
            v = oracle.entry(j, i)
            if v == 0:
                continue
            if v not in index:
                index[v] = len(values)
                values.append(v)
            key[(j, i)] = index[v]
    if len(values) > 2**bits:
        raise ProblemError(f"{len(values)} distinct entries do not fit a {bits}-bit value register")
    return {"values": values, "key": key}


def reflection_about_zero(n: int, qubits: Sequence[int]) -> Circuit:
    """``exp(i pi P) = I - 2P`` with ``P`` projecting ``qubits`` onto |0...0>."""
    qubits = list(qubits)
    flips = tuple(Gate("x", (q,)) for q in qubits)
    core: Gate = Gate("z", (qubits[-1],))
    for q in reversed(qubits[:-1]):
        core = controlled(q, [core])
    return Circuit(n, flips + (core,) + flips)


def sparse_to_lcu(oracle: SparseOracle, bits: int = 8) -> LcuMatrix:
    """Four-unitary decomposition of ``A (x) |0~><0~|`` on ``2n + 2`` qubits.

    Register layout (little-endian): row index on qubits ``0..n-1``, column
    index on ``n..2n-1``, then the two single-qubit flags.  Returned weights
    are ``(d/4, -d/4, -d/4, d/4)``: the minus signs of
    ``(1 - R) W (1 - R)`` stay in the coefficients.
    """
    if not oracle.hermitian:
        raise ProblemError("sparse decomposition requires a Hermitian oracle")
    N = 2**oracle.n
    for j in range(N):
        if len(oracle.neighbors[j]) > oracle.d:
            raise ProblemError(f"row {j} has more than d={oracle.d} nonzeros")
        for i in oracle.neighbors[j]:
            if abs(oracle.entry(j, i)) > 1 + 1e-12:
                raise ProblemError(f"entry ({j},{i}) has magnitude above 1")
    d = oracle.d
    if d & (d - 1):
        d = 1 << (d - 1).bit_length()
        oracle = SparseOracle(oracle.n, d, oracle.entry, oracle.neighbors, oracle.hermitian)
    if d > N:
        raise ProblemError("sparsity exceeds the dimension")
    n = oracle.n
    width = 2 * n + 2
    if width > MAX_QUBITS:
        raise ProblemError(f"decomposition needs {width} qubits, above the cap")

    book = _codebook(oracle, bits)
    ux = _half_walk_unitary(oracle, book, transpose=False, bits=bits)
    uy = _half_walk_unitary(oracle, book, transpose=True, bits=bits)
    everything = tuple(range(width))
    swap = tuple(Gate("swap", (q, n + q)) for q in range(n))
    walk = swap + (Gate("unitary", everything, matrix=uy), Gate("unitary", everything, matrix=ux.conj().T))
    refl = reflection_about_zero(width, range(n, width)).gates
    w = d / 4
    terms = (
        LcuTerm(w, Circuit(width, walk)),
        LcuTerm(-w, Circuit(width, refl + walk)),
        LcuTerm(-w, Circuit(width, walk + refl)),
        LcuTerm(w, Circuit(width, refl + walk + refl)),
    )
    return LcuMatrix(width, terms)


def zero_flag_projector(n: int) -> np.ndarray:
    """``A (x) |0~><0~|`` embedding target: projector on everything but the row register."""
    P = np.zeros((4 * 2**n, 4 * 2**n))
    P[0, 0] = 1.0
    return P


def embed_with_zero_flags(A: np.ndarray) -> np.ndarray:
    n = int(round(math.log2(A.shape[0])))
    return np.kron(zero_flag_projector(n), A)
