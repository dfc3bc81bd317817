"""Cost functions and their beta / gamma / delta constituents.

Two interchangeable backends evaluate the same quantities:

``direct``
    linear algebra on simulated statevectors;
``circuit``
    simulated Hadamard and Hadamard-Overlap test circuits, read out either
    as exact ancilla probabilities or as finite-shot samples.

Conventions for the constituent arrays (``x = V|0>``, ``phi_l = A_l x``,
``chi_l = U^dag phi_l``)::

    beta[l, m]     = <phi_m | phi_l>
    gamma[l, m]    = <b|phi_l> <phi_m|b>
    delta[l, m, j] = <chi_m | (|0><0|_j (x) I) | chi_l>

so every cost is a double sum ``sum_{l,m} c_l conj(c_m) X[l, m]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .problem import QlspInstance, LcuMatrix
from .simulator import (
    Circuit,
    Gate,
    circuit_unitary,
    controlled,
    pauli_action,
    run_batch,
    run_circuit,
)

PSI_FLOOR = 1e-14


class CostError(ValueError):
    pass


class CostKind(enum.Enum):
    GLOBAL_HAT = "global_hat"
    GLOBAL = "global"
    LOCAL_HAT = "local_hat"
    LOCAL = "local"

    @property
    def normalized(self) -> bool:
        return self in (CostKind.GLOBAL, CostKind.LOCAL)

    @property
    def local(self) -> bool:
        return self in (CostKind.LOCAL_HAT, CostKind.LOCAL)

    @classmethod
    def parse(cls, value) -> "CostKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower().replace("-", "_"))


@dataclass(frozen=True)
class ShotConfig:
    mode: str = "exact"
    shots_per_term: int = 10_000
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise CostError(f"unknown shot mode {self.mode!r}")
        if self.mode == "sampled" and self.shots_per_term < 1:
            raise CostError("sampled mode needs at least one shot per term")

    @property
    def sampled(self) -> bool:
        return self.mode == "sampled"


EXACT = ShotConfig()


@dataclass
class CostReport:
    kind: CostKind
    value: float
    psi_norm_sq: float
    beta: np.ndarray
    gamma: np.ndarray | None = None
    delta: np.ndarray | None = None
    shots_used: int | None = None  # None means exact probabilities
    post_selected: tuple[int, int] | None = None
    backend: str = "direct"


def weighted_sum(coeffs: np.ndarray, M: np.ndarray) -> complex:
    """``sum_{l,m} c_l conj(c_m) M[l, m]`` with compensated summation."""
    w = np.outer(coeffs, coeffs.conj()) * M
    return complex(math.fsum(w.real.ravel()), math.fsum(w.imag.ravel()))


# -- direct backend --------------------------------------------------------


def _apply_term(term, x: np.ndarray, n: int) -> np.ndarray:
    if term.word is not None:
        perm, phase = pauli_action(term.word, n)
        out = np.empty_like(x)
        out[perm] = phase * x
        return out
    return run_batch(term.circuit, x[:, None])[:, 0]


def term_states(inst: QlspInstance, V: Circuit) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``x``, the ``L`` states ``A_l x`` and the ``L`` states ``U^dag A_l x`` (rows)."""
    if V.n != inst.n:
        raise CostError(f"ansatz acts on {V.n} qubits but the instance has {inst.n}")
    x = np.array(run_circuit(V).amplitudes)
    phis = np.stack([_apply_term(t, x, inst.n) for t in inst.A.terms])
    chis = run_batch(inst.b_prep.dagger(), phis.T).T
    return x, phis, chis


def _zero_masks(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.stack([((idx >> j) & 1) == 0 for j in range(n)])


def direct_terms(inst: QlspInstance, V: Circuit, local: bool = True):
    _, phis, chis = term_states(inst, V)
    beta = phis @ phis.conj().T
    g = chis[:, 0]
    gamma = np.outer(g, g.conj())
    delta = None
    if local:
        masks = _zero_masks(inst.n)
        delta = np.stack([(chis[:, m] @ chis[:, m].conj().T) for m in masks], axis=-1)
    return beta, gamma, delta


def _check_index(inst: QlspInstance, *ls):
    for l in ls:
        if not 0 <= l < inst.A.L:
            raise CostError(f"term index {l} out of range for L={inst.A.L}")


def beta_term(inst: QlspInstance, V: Circuit, l: int, lp: int) -> complex:
    _check_index(inst, l, lp)
    _, phis, _ = term_states(inst, V)
    return complex(np.vdot(phis[lp], phis[l]))


def gamma_term(inst: QlspInstance, V: Circuit, l: int, lp: int) -> complex:
    _check_index(inst, l, lp)
    _, _, chis = term_states(inst, V)
    return complex(chis[l, 0] * np.conj(chis[lp, 0]))


def delta_term(inst: QlspInstance, V: Circuit, l: int, lp: int, j: int) -> complex:
    _check_index(inst, l, lp)
    if not 0 <= j < inst.n:
        raise CostError(f"qubit index {j} out of range")
    _, _, chis = term_states(inst, V)
    m = _zero_masks(inst.n)[j]
    return complex(np.vdot(chis[lp, m], chis[l, m]))


def combine(kind: CostKind, n: int, coeffs, beta, gamma, delta) -> tuple[float, float]:
    """Cost value and ``<psi|psi>`` from constituent arrays."""
    psi = weighted_sum(coeffs, beta).real
    if kind.normalized and psi <= PSI_FLOOR:
        raise CostError(f"<psi|psi> = {psi:.3e}: A|x> is effectively zero")
    if kind.local:
        overlap = math.fsum(weighted_sum(coeffs, delta[:, :, j]).real for j in range(n)) / n
    else:
        overlap = weighted_sum(coeffs, gamma).real
    hat = psi - overlap
    value = hat / psi if kind.normalized else hat
    return value, psi


def _clip(v: float) -> float:
    return 0.0 if -1e-12 < v < 0 else v


def evaluate_cost(
    inst: QlspInstance,
    V: Circuit,
    kind: CostKind | str,
    backend: str = "direct",
    shots: ShotConfig = EXACT,
    delta_route: str = "split",
) -> CostReport:
    """Evaluate one of the four costs at the state prepared by ``V``.

    ``delta_route`` selects how the circuit backend obtains local terms:
    ``"split"`` uses beta plus a Z-element Hadamard test, ``"overlap"`` the
    Hadamard-Overlap test averaged over all bit-flip prefixes.
    """
    kind = CostKind.parse(kind)
    c = inst.A.coeffs
    if backend == "direct":
        if shots.sampled:
            raise CostError("the direct backend has no sampled mode")
        beta, gamma, delta = direct_terms(inst, V, local=kind.local)
        value, psi = combine(kind, inst.n, c, beta, gamma, delta)
        return CostReport(kind, _clip(value), psi, beta, gamma, delta)
    if backend != "circuit":
        raise CostError(f"unknown backend {backend!r}")
    est = CircuitEstimator(inst, V, shots)
    beta = est.beta_matrix()
    gamma = est.gamma_matrix() if not kind.local else None
    delta = est.delta_tensor(beta, route=delta_route) if kind.local else None
    value, psi = combine(kind, inst.n, c, beta, gamma, delta)
    if not shots.sampled:
        value = _clip(value)
    return CostReport(
        kind,
        value,
        psi,
        beta,
        gamma,
        delta,
        shots_used=est.shots_used if shots.sampled else None,
        post_selected=tuple(est.post_selected) if shots.sampled else None,
        backend="circuit",
    )


def _real_if_exact(m: np.ndarray) -> np.ndarray:
    return m.real.copy() if not np.any(m.imag) else m


class CostFunction:
    """Fast repeated evaluation for optimization loops.

    Uses the dense matrix of ``A`` and of ``U`` once assembled; agrees with
    :func:`evaluate_cost` on the direct backend.
    """

    def __init__(self, inst: QlspInstance, kind: CostKind | str):
        self.inst = inst
        self.kind = CostKind.parse(kind)
        self.A = _real_if_exact(inst.dense)
        self.b = _real_if_exact(inst.b)
        self.Udag = _real_if_exact(inst.b_prep_unitary.conj().T)
        n = inst.n
        idx = np.arange(2**n)
        self.zero_count = np.array([n - bin(i).count("1") for i in idx], dtype=float)

    def from_state(self, x: np.ndarray) -> tuple[float, float]:
        psi = self.A @ x
        pp = float(np.vdot(psi, psi).real)
        if self.kind.normalized and pp <= PSI_FLOOR:
            raise CostError(f"<psi|psi> = {pp:.3e}: A|x> is effectively zero")
        if self.kind.local:
            chi = self.Udag @ psi
            overlap = float(np.abs(chi) ** 2 @ self.zero_count) / self.inst.n
        else:
            overlap = abs(np.vdot(self.b, psi)) ** 2
        hat = pp - overlap
        value = hat / pp if self.kind.normalized else hat
        return max(value, 0.0), pp


# -- circuit backend -------------------------------------------------------


def _ancilla_sign(total: int, anc: int) -> np.ndarray:
    idx = np.arange(2**total)
    return 1.0 - 2.0 * ((idx >> anc) & 1)


def _sample_mean(probs: np.ndarray, values: np.ndarray, shots: int, rng) -> tuple[float, np.ndarray]:
    p = np.clip(probs, 0, None)
    counts = rng.multinomial(shots, p / p.sum())
    return float(counts @ values) / shots, counts


def hadamard_test(
    prep: Circuit,
    segments,
    part: str = "real",
    shots: ShotConfig = EXACT,
    rng=None,
) -> float:
    """Estimate ``Re`` or ``Im`` of ``<0|P^dag W P|0>`` with one ancilla.

    ``prep`` is ``P``; ``segments`` is a sequence of ``(circuit, controlled)``
    pairs whose product (in order) is ``W``.  Segments flagged uncontrolled
    must cancel on the ancilla-0 branch.  The ancilla sits above the work
    register.  Returns ``P(0) - P(1)`` (exact) or the mean of +-1 outcomes.
    """
    n = prep.n
    anc = n
    gates: list[Gate] = [Gate("h", (anc,))]
    gates += prep.gates
    for seg, is_ctrl in segments:
        if is_ctrl:
            gates.append(controlled(anc, seg.gates))
        else:
            gates += seg.gates
    if part == "imag":
        gates.append(Gate("sdg", (anc,)))
    elif part != "real":
        raise CostError("part must be 'real' or 'imag'")
    gates.append(Gate("h", (anc,)))
    state = run_circuit(Circuit(n + 1, tuple(gates)))
    probs = state.probabilities()
    sign = _ancilla_sign(n + 1, anc)
    if not shots.sampled:
        return float(probs @ sign)
    rng = np.random.default_rng(shots.seed) if rng is None else rng
    p0 = float(probs[sign > 0].sum())
    k = rng.binomial(shots.shots_per_term, min(max(p0, 0.0), 1.0))
    return (2 * k - shots.shots_per_term) / shots.shots_per_term


@dataclass
class OverlapOutcome:
    estimate: float
    shots: int | None
    ancilla_zero: int | None = None
    ancilla_one: int | None = None


def overlap_test_counts(
    U: Circuit,
    V: Circuit,
    A_l: Circuit,
    A_lp: Circuit,
    part: str = "real",
    shots: ShotConfig = EXACT,
    rng=None,
    s2_prefix: Circuit | None = None,
) -> OverlapOutcome:
    """Hadamard-Overlap test on ``2n + 1`` qubits.

    Register ``S1`` (qubits ``0..n-1``) holds ``V|0>``, ``S2`` (``n..2n-1``)
    holds ``U|0>`` (after the optional ``s2_prefix``), the ancilla is qubit
    ``2n``.  The ancilla controls ``A_l`` on S1 and ``A_lp^dag`` on S2; a
    Bell-basis readout of S1/S2 then yields each shot's value
    ``(-1)^ancilla * (-1)^{|s1 & s2|}``, whose mean is ``Re gamma``
    (``Im gamma`` when ``part='imag'``).
    """
    n = V.n
    anc = 2 * n
    total = 2 * n + 1
    gates: list[Gate] = [Gate("h", (anc,))]
    gates += V.widened(total).gates
    if s2_prefix is not None:
        gates += s2_prefix.widened(total, n).gates
    gates += U.widened(total, n).gates
    gates.append(controlled(anc, A_l.widened(total).gates))
    gates.append(controlled(anc, A_lp.dagger().widened(total, n).gates))
    if part == "imag":
        gates.append(Gate("rz", (anc,), -math.pi / 2))
    elif part != "real":
        raise CostError("part must be 'real' or 'imag'")
    gates.append(Gate("h", (anc,)))
    for q in range(n):
        gates.append(Gate("cx", (q, n + q)))
        gates.append(Gate("h", (q,)))
    probs = run_circuit(Circuit(total, tuple(gates))).probabilities()

    idx = np.arange(2**total)
    s1 = idx & ((1 << n) - 1)
    s2 = (idx >> n) & ((1 << n) - 1)
    parity = np.zeros_like(idx)
    v = s1 & s2
    while v.any():
        parity ^= v & 1
        v >>= 1
    values = (1.0 - 2.0 * parity) * _ancilla_sign(total, anc)
    if not shots.sampled:
        return OverlapOutcome(float(probs @ values), None)
    rng = np.random.default_rng(shots.seed) if rng is None else rng
    mean, counts = _sample_mean(probs, values, shots.shots_per_term, rng)
    a1 = int(counts[((idx >> anc) & 1) == 1].sum())
    return OverlapOutcome(mean, shots.shots_per_term, shots.shots_per_term - a1, a1)


def overlap_test(U, V, A_l, A_lp, part="real", shots: ShotConfig = EXACT, rng=None, s2_prefix=None) -> float:
    return overlap_test_counts(U, V, A_l, A_lp, part, shots, rng, s2_prefix).estimate


def bitflip_prefix(n: int, j: int, r: int) -> Circuit:
    """``R_j``: X on every qubit ``k != j`` whose bit ``k`` of ``r`` is set."""
    return Circuit(n, tuple(Gate("x", (k,)) for k in range(n) if k != j and (r >> k) & 1))


def zero_probability(c: Circuit, shots: ShotConfig = EXACT, rng=None) -> float:
    """Probability of the all-zeros outcome after running ``c`` on |0...0>."""
    p = float(abs(run_circuit(c).amplitudes[0]) ** 2)
    if not shots.sampled:
        return p
    rng = np.random.default_rng(shots.seed) if rng is None else rng
    return rng.binomial(shots.shots_per_term, min(max(p, 0.0), 1.0)) / shots.shots_per_term


def z_circuit(n: int, j: int) -> Circuit:
    return Circuit(n, (Gate("z", (j,)),))


class CircuitEstimator:
    """Collects beta / gamma / delta from simulated test circuits.

    Only ``l <= m`` entries are estimated; the rest follow from Hermitian
    symmetry, and ``beta[l, l] = 1``.
    """

    def __init__(self, inst: QlspInstance, V: Circuit, shots: ShotConfig = EXACT):
        self.inst = inst
        self.V = V
        self.shots = shots
        self.rng = np.random.default_rng(shots.seed)
        self.shots_used = 0
        self.post_selected = [0, 0]
        self.A = [t.circuit for t in inst.A.terms]

    def _count(self, k: int = 1):
        if self.shots.sampled:
            self.shots_used += k * self.shots.shots_per_term

    def _had(self, segments) -> complex:
        re = hadamard_test(self.V, segments, "real", self.shots, self.rng)
        im = hadamard_test(self.V, segments, "imag", self.shots, self.rng)
        self._count(2)
        return complex(re, im)

    def beta(self, l: int, m: int) -> complex:
        if l == m:
            return 1.0 + 0j
        return self._had([(self.A[l], True), (self.A[m].dagger(), True)])

    def zeta(self, l: int, m: int, j: int) -> complex:
        U = self.inst.b_prep
        return self._had(
            [(self.A[l], True), (U.dagger(), False), (z_circuit(self.inst.n, j), True), (U, False), (self.A[m].dagger(), True)]
        )

    def _overlap(self, l, m, prefix=None) -> complex:
        U = self.inst.b_prep
        out = []
        for part in ("real", "imag"):
            o = overlap_test_counts(U, self.V, self.A[l], self.A[m], part, self.shots, self.rng, prefix)
            if o.shots is not None:
                self.post_selected[0] += o.ancilla_zero
                self.post_selected[1] += o.ancilla_one
            out.append(o.estimate)
        self._count(2)
        return complex(*out)

    def gamma(self, l: int, m: int) -> complex:
        if l == m:
            c = self.inst.b_prep.dagger()
            self._count()
            return complex(zero_probability(self.V + self.A[l] + c, self.shots, self.rng))
        return self._overlap(l, m)

    def delta_overlap(self, l: int, m: int, j: int) -> complex:
        """Exhaustive average over the ``2**(n-1)`` bit-flip prefixes, rescaled."""
        n = self.inst.n
        rs = [r for r in range(2**n) if not (r >> j) & 1]
        acc = sum(self._overlap(l, m, bitflip_prefix(n, j, r)) for r in rs)
        return acc / len(rs) * 2 ** (n - 1)

    def beta_matrix(self) -> np.ndarray:
        L = self.inst.A.L
        B = np.eye(L, dtype=complex)
        for l in range(L):
            for m in range(l + 1, L):
                B[l, m] = self.beta(l, m)
                B[m, l] = np.conj(B[l, m])
        return B

    def gamma_matrix(self) -> np.ndarray:
        L = self.inst.A.L
        G = np.zeros((L, L), dtype=complex)
        for l in range(L):
            for m in range(l, L):
                G[l, m] = self.gamma(l, m)
                G[m, l] = np.conj(G[l, m])
        return G

    def delta_tensor(self, beta: np.ndarray, route: str = "split") -> np.ndarray:
        L, n = self.inst.A.L, self.inst.n
        D = np.zeros((L, L, n), dtype=complex)
        for j in range(n):
            for l in range(L):
                for m in range(l, L):
                    if route == "split":
                        val = 0.5 * (beta[l, m] + self.zeta(l, m, j))
                    elif route == "overlap":
                        val = self.delta_overlap(l, m, j)
                    else:
                        raise CostError(f"unknown delta route {route!r}")
                    if l == m:
                        val = complex(val.real, 0.0)
                    D[l, m, j] = val
                    D[m, l, j] = np.conj(val)
        return D


def global_hat_standard_error(inst: QlspInstance, V: Circuit, shots_per_term: int) -> float:
    """Standard error of the sampled circuit-backend ``GlobalHat`` estimate.

    Every estimated real number is an average of ``shots_per_term``
    independent outcomes; variances come from the exact constituents.
    """
    beta, gamma, _ = direct_terms(inst, V, local=False)
    c = inst.A.coeffs
    L = len(c)
    var = 0.0
    for l in range(L):
        p = gamma[l, l].real
        var += abs(c[l]) ** 4 * p * (1 - p)
        for m in range(l + 1, L):
            w = c[l] * np.conj(c[m])
            for val, weight in (
                (beta[l, m].real, 2 * w.real),
                (beta[l, m].imag, -2 * w.imag),
                (gamma[l, m].real, -2 * w.real),
                (gamma[l, m].imag, 2 * w.imag),
            ):
                var += weight**2 * (1 - val**2)
    return math.sqrt(var / shots_per_term)


# -- hardness construction -------------------------------------------------


def maximally_entangling(n: int) -> Circuit:
    """``E`` on ``2n`` qubits: Hadamards on the first register, CNOTs across."""
    gates = [Gate("h", (q,)) for q in range(n)] + [Gate("cx", (q, n + q)) for q in range(n)]
    return Circuit(2 * n, tuple(gates))


def choi_cost_identity_check(U_small: Circuit, V_small: Circuit) -> tuple[float, float]:
    """Global cost between Choi states of two ``n``-qubit circuits, and ``|Tr(V^dag U)|^2 / d^2``.

    The two numbers satisfy ``cost = 1 - trace_magnitude``.
    """
    n = U_small.n
    if V_small.n != n:
        raise CostError("circuits act on different qubit counts")
    if n > 6:
        raise CostError("Choi construction capped at 6 qubits")
    E = maximally_entangling(n)
    b_prep = E + U_small.widened(2 * n)
    V = E + V_small.widened(2 * n)
    inst = QlspInstance(LcuMatrix.from_paulis(2 * n, [(1.0, "I" * 2 * n)]), b_prep, None, "choi")
    cost = evaluate_cost(inst, V, CostKind.GLOBAL).value
    d = 2**n
    tr = np.trace(circuit_unitary(V_small).conj().T @ circuit_unitary(U_small))
    return cost, float(abs(tr) ** 2 / d**2)
