"""Compiled inner loop for ansatz state preparation.

``run_plan`` applies a flat op table (``code, q1, q2, param``) to ``|0...0>``.
Codes: 0 RY, 1 RZ, 2 CZ, 3 H.  Little-endian: qubit ``q`` is bit ``q``.
Uses numba when importable and falls back to an equivalent numpy loop.
"""

from __future__ import annotations

import math

import numpy as np

RY, RZ, CZ, H = 0, 1, 2, 3

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None


def _run_plan_py(ops: np.ndarray, alpha: np.ndarray, buf: np.ndarray) -> None:
    n_amp = buf.shape[0]
    idx = np.arange(n_amp)
    r = 1 / math.sqrt(2)
    for code, q1, q2, p in ops:
        if code == CZ:
            m = ((idx >> q1) & 1) & ((idx >> q2) & 1) == 1
            buf[m] *= -1
            continue
        lo = idx[(idx >> q1) & 1 == 0]
        hi = lo | (1 << q1)
        a0, a1 = buf[lo], buf[hi]
        if code == RY:
            c, s = math.cos(alpha[p] / 2), math.sin(alpha[p] / 2)
            buf[lo], buf[hi] = c * a0 - s * a1, s * a0 + c * a1
        elif code == RZ:
            ph = complex(math.cos(alpha[p] / 2), math.sin(alpha[p] / 2))
            buf[lo], buf[hi] = a0 * ph.conjugate(), a1 * ph
        else:
            buf[lo], buf[hi] = (a0 + a1) * r, (a0 - a1) * r


if njit is not None:

    @njit(cache=True)
    def _ry(buf, bit, c, s):
        for i in range(buf.shape[0]):
            if i & bit == 0:
                a0, a1 = buf[i], buf[i | bit]
                buf[i] = c * a0 - s * a1
                buf[i | bit] = s * a0 + c * a1

    @njit(cache=True)
    def _h(buf, bit):
        r = 1.0 / math.sqrt(2.0)
        for i in range(buf.shape[0]):
            if i & bit == 0:
                a0, a1 = buf[i], buf[i | bit]
                buf[i] = (a0 + a1) * r
                buf[i | bit] = (a0 - a1) * r

    @njit(cache=True)
    def _cz(buf, m):
        for i in range(buf.shape[0]):
            if i & m == m:
                buf[i] = -buf[i]

    @njit(cache=True)
    def _rz(buf, bit, theta):
        ph = complex(math.cos(theta / 2), math.sin(theta / 2))
        phc = ph.conjugate()
        for i in range(buf.shape[0]):
            if i & bit == 0:
                buf[i] = buf[i] * phc
            else:
                buf[i] = buf[i] * ph

    @njit(cache=True)
    def _run_real(ops, alpha, buf):
        for k in range(ops.shape[0]):
            code, q1, q2, p = ops[k, 0], ops[k, 1], ops[k, 2], ops[k, 3]
            if code == 0:
                _ry(buf, 1 << q1, math.cos(alpha[p] / 2), math.sin(alpha[p] / 2))
            elif code == 2:
                _cz(buf, (1 << q1) | (1 << q2))
            else:
                _h(buf, 1 << q1)

    @njit(cache=True)
    def _run_complex(ops, alpha, buf):
        for k in range(ops.shape[0]):
            code, q1, q2, p = ops[k, 0], ops[k, 1], ops[k, 2], ops[k, 3]
            if code == 0:
                _ry(buf, 1 << q1, math.cos(alpha[p] / 2), math.sin(alpha[p] / 2))
            elif code == 1:
                _rz(buf, 1 << q1, alpha[p])
            elif code == 2:
                _cz(buf, (1 << q1) | (1 << q2))
            else:
                _h(buf, 1 << q1)

    def run_plan(ops, alpha, buf):
        if np.iscomplexobj(buf):
            _run_complex(ops, alpha, buf)
        else:
            _run_real(ops, alpha, buf)

else:  # pragma: no cover
    run_plan = _run_plan_py
