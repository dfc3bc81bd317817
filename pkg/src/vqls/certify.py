"""Turn cost values into guarantees on the prepared solution.

With ``||A|| <= 1`` and condition number ``kappa`` the trace distance
``eps`` between ``|x>`` and the true solution obeys::

    GlobalHat, Global >= eps**2 / kappa**2
    LocalHat,  Local  >= eps**2 / (n kappa**2)

and, for the normalized kinds, the same with an extra ``1/<psi|psi>`` on the
right.  The functions here invert those relations.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ansatz import effective_hamiltonian
from .cost import CostKind, CostReport
from .problem import DENSE_CAP, QlspInstance, estimate_kappa
from .simulator import Statevector, expectation_pauli


class CertifyError(ValueError):
    pass


def _check_kappa(kappa: float, strict: bool = True) -> None:
    if kappa is None or not (kappa > 1 if strict else kappa >= 1):
        raise CertifyError(f"kappa must exceed 1, got {kappa}")


def _as_array(x) -> np.ndarray:
    return np.asarray(x.amplitudes if isinstance(x, Statevector) else x, dtype=complex)


def trace_distance_pure(x, x0) -> float:
    """``sqrt(1 - |<x|x0>|^2)`` for two normalized pure states."""
    a, b = _as_array(x), _as_array(x0)
    if a.shape != b.shape:
        raise CertifyError("states have different dimensions")
    f = abs(np.vdot(a, b)) ** 2
    return math.sqrt(min(max(1.0 - f, 0.0), 1.0))


def epsilon_from_cost(kind: CostKind | str, cost: float, kappa: float, n: int, psi_norm_sq: float = 1.0, tightened: bool = False) -> float:
    kind = CostKind.parse(kind)
    _check_kappa(kappa)
    inner = max(cost, 0.0)
    if kind.local:
        inner *= n
    if tightened and kind.normalized:
        inner *= psi_norm_sq
    return min(kappa * math.sqrt(inner), 1.0)


def epsilon_bound(report: CostReport, kappa: float, n: int, tightened: bool = False) -> float:
    """Upper bound on the trace distance implied by a cost report, clipped to ``[0, 1]``."""
    return epsilon_from_cost(report.kind, report.value, kappa, n, report.psi_norm_sq, tightened)


def cost_floor(kind: CostKind | str, eps: float, kappa: float, n: int, psi_norm_sq: float = 1.0, tightened: bool = False) -> float:
    """Smallest cost value compatible with trace distance ``eps``."""
    kind = CostKind.parse(kind)
    v = eps**2 / kappa**2
    if kind.local:
        v /= n
    if tightened and kind.normalized:
        v /= psi_norm_sq
    return v


def observable_deviation(x, x0, word: str) -> tuple[float, float]:
    """``D(M) = |<x|M|x> - <x0|M|x0>|`` for a Pauli word, and ``D(M)**2``."""
    a = x if isinstance(x, Statevector) else Statevector(x)
    b = x0 if isinstance(x0, Statevector) else Statevector(x0)
    if a.n != b.n:
        raise CertifyError("states have different dimensions")
    d = abs(expectation_pauli(a, word) - expectation_pauli(b, word))
    return d, d * d


@dataclass
class ObservableRecord:
    word: str
    expectation: float
    deviation_bound: float


@dataclass
class Certificate:
    kind: CostKind
    cost_value: float
    kappa: float
    n: int
    psi_norm_sq: float
    epsilon_upper: float
    tightened: bool = False
    observables: list[ObservableRecord] = field(default_factory=list)
    circuit: list | None = None  # bound V(alpha) as a gate list, for re-checking

    @classmethod
    def from_report(cls, report: CostReport, kappa: float, n: int, tightened: bool = False, x=None, words=(), circuit=None) -> "Certificate":
        eps = epsilon_bound(report, kappa, n, tightened)
        obs = []
        if x is not None:
            sv = x if isinstance(x, Statevector) else Statevector(x)
            # |<M>_x - <M>_x0| <= 2 ||M|| eps with ||M|| = 1 for Pauli words
            obs = [ObservableRecord(w, expectation_pauli(sv, w), min(2 * eps, 2.0)) for w in words]
        return cls(report.kind, report.value, kappa, n, report.psi_norm_sq, eps, tightened, obs, circuit)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        d = dict(d)
        d["kind"] = CostKind.parse(d["kind"])
        d["observables"] = [ObservableRecord(**o) for o in d.get("observables", [])]
        return cls(**d)


@dataclass
class SpectralReport:
    E0: float
    E1: float
    kappa: float
    gap_ok: bool
    ground_ok: bool


def spectral_check(inst: QlspInstance, kappa: float | None = None) -> SpectralReport:
    """Dense spectrum of ``H_G = A^dag (I - |b><b|) A``: ground energy 0 and gap ``>= 1/kappa**2``."""
    if inst.n > min(DENSE_CAP, 10):
        raise CertifyError("spectral check capped at 10 qubits")
    if kappa is None:
        kappa = inst.kappa if inst.kappa is not None else estimate_kappa(inst)
    _check_kappa(kappa, strict=False)
    w = np.linalg.eigvalsh(effective_hamiltonian(inst, CostKind.GLOBAL_HAT))
    E0, E1 = float(w[0]), float(w[1])
    return SpectralReport(E0, E1, kappa, E1 >= 1 / kappa**2 - 1e-9, abs(E0) <= 1e-9)
