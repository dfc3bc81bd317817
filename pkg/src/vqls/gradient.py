"""Cost gradients by the parameter-shift rule, plus a finite-difference oracle.

For a rotation ``exp(-i a sigma / 2)`` every cost constituent ``X`` (a
matrix element quadratic in ``V``) satisfies::

    dX/da = (X(a + pi/2) - X(a - pi/2)) / 2

so the gradient reuses the circuits that evaluate the cost itself.
"""

from __future__ import annotations

import math

import numpy as np

from .ansatz import Ansatz, AnsatzError
from .cost import CostKind, combine, direct_terms, weighted_sum
from .problem import QlspInstance

SHIFT = math.pi / 2


class GradientError(ValueError):
    pass


def _terms(inst: QlspInstance, a: Ansatz, alpha, local: bool):
    return direct_terms(inst, a.circuit(alpha), local=local)


def shifted_terms(inst: QlspInstance, a: Ansatz, alpha, i: int, local: bool = True):
    """Parameter-shift derivatives ``(dbeta, dgamma, ddelta)`` with respect to ``alpha[i]``."""
    alpha = np.asarray(alpha, dtype=float)
    up, dn = alpha.copy(), alpha.copy()
    up[i] += SHIFT
    dn[i] -= SHIFT
    bp, gp, dp = _terms(inst, a, up, local)
    bm, gm, dm = _terms(inst, a, dn, local)
    dd = (dp - dm) / 2 if local else None
    return (bp - bm) / 2, (gp - gm) / 2, dd


def _overlap_part(kind: CostKind, n: int, c, gamma, delta) -> float:
    if kind.local:
        return math.fsum(weighted_sum(c, delta[:, :, j]).real for j in range(n)) / n
    return weighted_sum(c, gamma).real


def analytic_gradient(inst: QlspInstance, a: Ansatz, alpha, kind: CostKind | str, fallback: bool = True) -> np.ndarray:
    """Gradient of ``kind`` at ``alpha``, one entry per parameter (cost per radian).

    Normalized kinds use the quotient rule on ``B = <psi|psi>`` and the
    overlap part ``G``: ``d(1 - G/B) = -(dG * B - G * dB) / B**2``.  Ansatze
    whose parameters are not single-rotation angles (QAOA) fall back to
    central differences unless ``fallback`` is false.
    """
    kind = CostKind.parse(kind)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (a.num_parameters,):
        raise AnsatzError(f"expected {a.num_parameters} parameters, got {alpha.shape}")
    if not a.shift_compatible:
        if not fallback:
            raise GradientError(f"{a.family} parameters are not shift-compatible")
        return finite_difference_gradient(inst, a, alpha, kind)
    c = inst.A.coeffs
    n = inst.n
    beta, gamma, delta = _terms(inst, a, alpha, kind.local)
    B = weighted_sum(c, beta).real
    G = _overlap_part(kind, n, c, gamma, delta)
    grad = np.empty(len(alpha))
    for i in range(len(alpha)):
        db, dg, dd = shifted_terms(inst, a, alpha, i, kind.local)
        dB = weighted_sum(c, db).real
        dG = _overlap_part(kind, n, c, dg, dd)
        if kind.normalized:
            grad[i] = -(dG * B - G * dB) / B**2
        else:
            grad[i] = dB - dG
    return grad


def finite_difference_gradient(inst: QlspInstance, a: Ansatz, alpha, kind: CostKind | str, h: float = 1e-4) -> np.ndarray:
    """Central differences ``(C(a + h e_i) - C(a - h e_i)) / 2h``."""
    if not h > 0:
        raise GradientError("step h must be positive")
    kind = CostKind.parse(kind)
    alpha = np.asarray(alpha, dtype=float)

    def cost(x):
        beta, gamma, delta = _terms(inst, a, x, kind.local)
        return combine(kind, inst.n, inst.A.coeffs, beta, gamma, delta)[0]

    grad = np.empty(len(alpha))
    for i in range(len(alpha)):
        e = np.zeros_like(alpha)
        e[i] = h
        grad[i] = (cost(alpha + e) - cost(alpha - e)) / (2 * h)
    return grad
