import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import H1, dense_solution, random_state
from vqls.ansatz import build_hea
from vqls.certify import (
    Certificate,
    CertifyError,
    cost_floor,
    epsilon_bound,
    epsilon_from_cost,
    observable_deviation,
    spectral_check,
    trace_distance_pure,
)
from vqls.cost import CostKind, evaluate_cost
from vqls.problem import degenerate_qlsp, ising_qlsp, pauli_qlsp, random_qlsp
from vqls.io import circuit_to_json
from vqls.simulator import Circuit, Gate, Statevector, run_circuit

KINDS = list(CostKind)


class TestTraceDistance:
    def test_identical(self):
        v = random_state(3, np.random.default_rng(0))
        assert trace_distance_pure(v, v) < 1e-7

    def test_orthogonal(self):
        assert trace_distance_pure([1, 0], [0, 1]) == 1

    def test_overlap_point_eight(self):
        x = np.array([0.8, 0.6])
        assert abs(trace_distance_pure(x, [1, 0]) - 0.6) < 1e-15

    def test_phase_invariant(self):
        v = random_state(2, np.random.default_rng(1))
        assert trace_distance_pure(v, np.exp(0.7j) * v) < 1e-7

    def test_mismatch(self):
        with pytest.raises(CertifyError):
            trace_distance_pure([1, 0], [1, 0, 0, 0])


class TestEpsilonBound:
    def test_global_hat_example(self):
        assert abs(epsilon_from_cost("global_hat", 1e-6, 10, 4) - 0.01) < 1e-15

    @pytest.mark.parametrize("c,kappa,n,psi", [(1e-7, 20, 4, 0.3), (4e-6, 5, 6, 0.9)])
    def test_local_tightened(self, c, kappa, n, psi):
        got = epsilon_from_cost("local", c, kappa, n, psi, tightened=True)
        assert abs(got - kappa * math.sqrt(n * c * psi)) < 1e-15

    def test_local_hat(self):
        assert abs(epsilon_from_cost("local_hat", 1e-6, 10, 4) - 10 * math.sqrt(4e-6)) < 1e-15

    def test_tightened_ignored_for_hat_kinds(self):
        assert epsilon_from_cost("global_hat", 1e-6, 10, 4, 0.25, True) == epsilon_from_cost("global_hat", 1e-6, 10, 4)

    def test_zero_cost(self):
        for k in KINDS:
            assert epsilon_from_cost(k, 0.0, 10, 3) == 0

    def test_clipped(self):
        assert epsilon_from_cost("global", 0.5, 10, 3) == 1

    @pytest.mark.parametrize("kappa", [1.0, 0.5])
    def test_kappa_error(self, kappa):
        with pytest.raises(CertifyError):
            epsilon_from_cost("global", 0.1, kappa, 2)

    def test_report_version(self):
        inst = ising_qlsp(3, 0.1, 10)
        a = build_hea(3, 1)
        V = a.circuit(np.full(a.num_parameters, 0.3))
        r = evaluate_cost(inst, V, "local")
        assert epsilon_bound(r, 10, 3, True) == epsilon_from_cost("local", r.value, 10, 3, r.psi_norm_sq, True)

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("tightened", [False, True])
    def test_floor_inverts_bound(self, kind, tightened):
        f = cost_floor(kind, 0.03, 12, 5, 0.7, tightened)
        assert abs(epsilon_from_cost(kind, f, 12, 5, 0.7, tightened) - 0.03) < 1e-14


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(KINDS),
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(1.001, 100),
    st.floats(1.001, 100),
    st.integers(1, 8),
    st.booleans(),
)
def test_bound_monotone(kind, c1, c2, k1, k2, n, tightened):
    lo_c, hi_c = sorted((c1, c2))
    lo_k, hi_k = sorted((k1, k2))
    e = lambda c, k: epsilon_from_cost(kind, c, k, n, 0.5, tightened)  # noqa: E731
    assert e(lo_c, lo_k) <= e(hi_c, lo_k) <= e(hi_c, hi_k)


class TestObservableDeviation:
    def test_hadamard_system_expectation(self):
        # A = H, b = X|0>; the solution is H|1> with <Z> = 0
        inst = pauli_qlsp(1, [(1 / math.sqrt(2), "X"), (1 / math.sqrt(2), "Z")], Circuit(1, (Gate("x", (0,)),)))
        x0 = dense_solution(inst)
        np.testing.assert_allclose(abs(np.vdot(H1[:, 1], x0)), 1, atol=1e-12)
        d, _ = observable_deviation(Statevector(x0), Statevector([1, 0]), "Z")
        assert abs(d - 1) < 1e-12  # <Z>_x0 = 0 against <Z>_|0> = 1

    def test_diagonal_system_expectation(self):
        # A = (I + 0.25 Z)/1.25, b = X|0>; the solution is |1>
        inst = pauli_qlsp(1, [(0.8, "I"), (0.2, "Z")], Circuit(1, (Gate("x", (0,)),)))
        x0 = dense_solution(inst)
        d, d2 = observable_deviation(Statevector(x0), Statevector([1, 0]), "Z")
        assert abs(d - 2) < 1e-12 and abs(d2 - 4) < 1e-12

    def test_zero_for_same_state(self):
        v = Statevector(random_state(3, np.random.default_rng(2)))
        for w in ("XYZ", "ZZI", "IIX"):
            assert observable_deviation(v, v, w) == (0.0, 0.0)

    def test_malformed(self):
        with pytest.raises(Exception):
            observable_deviation(Statevector.zero(1), Statevector.zero(1), "Q")


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_deviation_at_most_twice_trace_distance(n, seed):
    rng = np.random.default_rng(seed)
    x, x0 = random_state(n, rng), random_state(n, rng)
    eps = trace_distance_pure(x, x0)
    word = "".join("IXYZ"[k] for k in rng.integers(4, size=n))
    assert observable_deviation(x, x0, word)[0] <= 2 * eps + 1e-12


class TestSpectral:
    def test_identity_matrix(self):
        inst = pauli_qlsp(2, [(1.0, "II")], Circuit(2, (Gate("h", (0,)),)))
        r = spectral_check(inst, kappa=1.0)
        assert abs(r.E0) < 1e-12 and abs(r.E1 - 1) < 1e-12 and r.gap_ok and r.ground_ok

    def test_ising(self):
        r = spectral_check(ising_qlsp(3, 0.1, 20))
        assert r.ground_ok and r.E1 >= 1 / 400

    def test_degenerate(self):
        r = spectral_check(degenerate_qlsp(3, 10))
        assert abs(r.E0) <= 1e-9 and r.E1 >= 0.01 - 1e-12

    def test_cap(self):
        with pytest.raises(CertifyError):
            spectral_check(ising_qlsp(11, 0.1, 10))

    def test_estimates_kappa_when_missing(self):
        inst = ising_qlsp(3, 0.1, 20)
        bare = pauli_qlsp(3, [(t.coeff, t.word) for t in inst.A.terms], inst.b_prep)
        assert abs(spectral_check(bare).kappa - 20) < 1e-8


@pytest.mark.parametrize("make", [lambda: ising_qlsp(4, 0.1, 20), lambda: random_qlsp(3, 8, seed=4), lambda: degenerate_qlsp(1, 15)])
@pytest.mark.parametrize("kind", KINDS)
def test_soundness_random_angles(make, kind):
    inst = make()
    a = build_hea(inst.n, 2)
    x0 = dense_solution(inst)
    rng = np.random.default_rng(0)
    for _ in range(20):
        alpha = rng.uniform(-math.pi, math.pi, a.num_parameters) * rng.choice([1.0, 0.05])
        V = a.circuit(alpha)
        r = evaluate_cost(inst, V, kind)
        x = run_circuit(V).amplitudes
        for t in (False, True):
            assert trace_distance_pure(x, x0) <= epsilon_bound(r, inst.kappa, inst.n, t) + 1e-9


class TestCertificate:
    def make(self):
        inst = ising_qlsp(3, 0.1, 10)
        a = build_hea(3, 1)
        V = a.circuit(np.full(a.num_parameters, 0.1))
        r = evaluate_cost(inst, V, "local")
        return Certificate.from_report(r, 10, 3, True, run_circuit(V), ("ZII", "XXX"), circuit_to_json(V)), r

    def test_fields(self):
        cert, r = self.make()
        assert cert.epsilon_upper == epsilon_bound(r, 10, 3, True)
        assert [o.word for o in cert.observables] == ["ZII", "XXX"]
        assert all(o.deviation_bound == min(2 * cert.epsilon_upper, 2) for o in cert.observables)

    def test_json_round_trip(self):
        cert, _ = self.make()
        text = cert.to_json()
        back = Certificate.from_dict(json.loads(text))
        assert back == cert and back.to_json() == text
