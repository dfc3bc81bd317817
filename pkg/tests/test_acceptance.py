"""Acceptance gate: one test per criterion, each recording a PASS/FAIL verdict.

Reference values come from the dense constructions in ``oracles`` wherever
an independent route exists; the verdict lines are printed in the terminal
summary by ``conftest.py``.
"""

import math

import numpy as np
import pytest

from oracles import (
    dense_A,
    dense_circuit,
    dense_costs,
    dense_solution,
    random_circuit,
    random_instance,
    random_sparse_hermitian,
    state_prep,
    term_dense,
)
from vqls.ansatz import Ansatz, Slot, build_hea, build_variable, grow_variable, prepare_state
from vqls.bench import BenchmarkConfig, fit_linear, fit_power, one_run
from vqls.certify import observable_deviation, spectral_check
from vqls.cost import (
    CostError,
    CostKind,
    ShotConfig,
    bitflip_prefix,
    choi_cost_identity_check,
    direct_terms,
    evaluate_cost,
    global_hat_standard_error,
    overlap_test,
)
from vqls.gradient import analytic_gradient
from vqls.optimizer import TerminationRule, minimize
from vqls.problem import (
    LcuMatrix,
    QlspInstance,
    SparseOracle,
    degenerate_qlsp,
    ising_qlsp,
    pauli_qlsp,
    random_qlsp,
    sparse_to_lcu,
)
from vqls.simulator import Circuit, Gate

KINDS = list(CostKind)


def engineered(n: int, rng) -> tuple[QlspInstance, Circuit]:
    """Instance whose exact solution is ``V|0>``: pick A and V, then set |b> ∝ A V|0>."""
    while True:
        base = random_instance(n, rng, L=int(rng.integers(1, 4)), circuit_terms=n > 1 and rng.random() < 0.5)
        A = dense_A(base)
        if np.linalg.cond(A) < 1e4:
            break
    V = random_circuit(n, rng, depth=4 * n + 4)
    x = dense_circuit(V)[:, 0]
    inst = QlspInstance(base.A, state_prep(A @ x), None, "engineered")
    return inst, V


def floor(kind: CostKind, eps: float, kappa: float, n: int, psi: float, tightened: bool) -> float:
    """Smallest cost compatible with a trace distance ``eps`` (written out independently of the package)."""
    g = eps**2 / kappa**2
    if kind.local:
        g /= n
    if tightened and kind.normalized:
        g /= psi
    return g


def test_01_faithfulness(record_criterion):
    rng = np.random.default_rng(101)
    worst_exact, least_perturbed = 0.0, math.inf
    for k in range(50):
        n = 1 + k % 6
        inst, V = engineered(n, rng)
        x0 = dense_solution(inst)
        x = dense_circuit(V)[:, 0]
        assert abs(abs(np.vdot(x0, x)) - 1) < 1e-9  # V really prepares the solution
        exact = [evaluate_cost(inst, V, kind).value for kind in KINDS]
        worst_exact = max(worst_exact, max(exact))
        # a small rotation on every qubit moves the state off the solution
        kick = Circuit(n, tuple(Gate("ry", (q,), 0.05) for q in range(n)) + tuple(Gate("rz", (q,), 0.05) for q in range(n)))
        perturbed = [evaluate_cost(inst, V + kick, kind).value for kind in KINDS]
        ref = dense_costs(inst, dense_circuit(V + kick)[:, 0])
        for kind, v in zip(KINDS, perturbed):
            assert abs(v - ref[kind.value]) < 1e-10
        least_perturbed = min(least_perturbed, min(perturbed))
    ok = worst_exact <= 1e-9 and least_perturbed >= 1e-6
    record_criterion(1, ok, f"max exact cost {worst_exact:.2e}, min perturbed cost {least_perturbed:.2e}")
    assert ok


def test_02_sandwich(record_criterion):
    rng = np.random.default_rng(202)
    violations, cases = 0, 0
    while cases < 1000:
        n = int(rng.integers(1, 7))
        inst = random_instance(n, rng, L=int(rng.integers(1, 5)))
        V = random_circuit(n, rng, depth=12)
        try:
            c = {k: evaluate_cost(inst, V, k).value for k in KINDS}
        except CostError:
            continue  # A V|0> = 0 leaves the normalized costs undefined
        cases += 1
        gh, g, lh, lo = c[CostKind.GLOBAL_HAT], c[CostKind.GLOBAL], c[CostKind.LOCAL_HAT], c[CostKind.LOCAL]
        tol = 1e-10
        violations += not (lh <= gh + tol and gh <= n * lh + tol)
        violations += not (lo <= g + tol and g <= n * lo + tol)
    record_criterion(2, violations == 0, f"{violations} violations over {cases} cases")
    assert violations == 0


def test_03_bound_soundness(record_criterion):
    runs = [
        (ising_qlsp(3, 0.1, 10), build_hea(3, 2), "powell", 3000),
        (random_qlsp(3, 8, seed=3), build_hea(3, 2, complex_alphabet=True), "random_line_search", 3000),
        (degenerate_qlsp(2, 15), build_hea(3, 2), "coordinate", 3000),
        (ising_qlsp(5, 0.1, 20), build_hea(5, 2), "gradient_descent", 4000),
        (random_qlsp(4, 10, seed=1), build_hea(4, 2, complex_alphabet=True), "powell", 3000),
        (ising_qlsp(8, 0.1, 20), build_hea(8, 1), "powell", 3000),
    ]
    iterates, violations, slack = 0, 0, math.inf
    for i, (inst, a, method, budget) in enumerate(runs):
        x0 = dense_solution(inst)
        for kind in KINDS:
            rule = TerminationRule(0.001, kind, inst.kappa, inst.n, max_evaluations=budget)
            tr = minimize(inst, a, kind, method, rule, seed=i)
            for h in tr.history:
                x = prepare_state(a, h.alpha).amplitudes
                eps_true = math.sqrt(max(0.0, 1 - abs(np.vdot(x0, x)) ** 2))
                for tightened in (False, True):
                    gap = h.cost - floor(kind, eps_true, inst.kappa, inst.n, h.psi_norm_sq, tightened)
                    slack = min(slack, gap)
                    violations += gap < -1e-9
                iterates += 1
    ok = violations == 0 and iterates >= 2000
    record_criterion(3, ok, f"{iterates} iterates, {violations} violations, min slack {slack:.2e}")
    assert ok


def test_04_gradients(record_criterion):
    rng = np.random.default_rng(404)
    worst = 0.0
    h = 1e-4
    for k in range(100):
        n = int(rng.integers(2, 5))
        inst = random_instance(n, rng, L=int(rng.integers(1, 4)), circuit_terms=rng.random() < 0.3)
        choice = k % 3
        if choice == 0:
            a = build_hea(n, int(rng.integers(1, 3)))
        elif choice == 1:
            a = build_hea(n, 1, complex_alphabet=True)
        else:
            a = build_variable(n, complex_alphabet=True)
            for _ in range(2):
                a = grow_variable(a, rng)
        kind = KINDS[k % 4]
        alpha = rng.uniform(-math.pi, math.pi, a.num_parameters)
        g = analytic_gradient(inst, a, alpha, kind)
        fd = np.empty_like(g)
        for i in range(len(alpha)):
            up, dn = alpha.copy(), alpha.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (evaluate_cost(inst, a.circuit(up), kind).value - evaluate_cost(inst, a.circuit(dn), kind).value) / (2 * h)
        worst = max(worst, float(np.abs(g - fd).max()))
    record_criterion(4, worst <= 1e-6, f"max |analytic - central difference| = {worst:.2e}")
    assert worst <= 1e-6


def test_05_backend_equivalence(record_criterion):
    rng = np.random.default_rng(505)
    worst = 0.0
    for k in range(200):
        n = 1 + k % 3
        inst = random_instance(n, rng, L=int(rng.integers(1, 4)), circuit_terms=n > 1 and rng.random() < 0.5)
        V = random_circuit(n, rng)
        beta, gamma, delta = direct_terms(inst, V)
        route = "overlap" if n == 3 and k % 2 else "split"
        c = evaluate_cost(inst, V, "local_hat", backend="circuit", delta_route=route)
        cg = evaluate_cost(inst, V, "global_hat", backend="circuit")
        worst = max(worst, np.abs(c.beta - beta).max(), np.abs(cg.gamma - gamma).max(), np.abs(c.delta - delta).max())
    # the averaged route by exhaustive enumeration of the bit-flip strings at n = 3
    for k in range(10):
        inst = random_instance(3, rng, L=2)
        V = random_circuit(3, rng)
        A = [t.circuit for t in inst.A.terms]
        _, _, delta = direct_terms(inst, V)
        for j in range(3):
            rs = [r for r in range(8) if not (r >> j) & 1]
            acc = 0j
            for r in rs:
                p = bitflip_prefix(3, j, r)
                acc += complex(overlap_test(inst.b_prep, V, A[0], A[1], "real", s2_prefix=p), overlap_test(inst.b_prep, V, A[0], A[1], "imag", s2_prefix=p))
            worst = max(worst, abs(acc / len(rs) * 4 - delta[0, 1, j]))
    record_criterion(5, worst <= 1e-10, f"max deviation {worst:.2e} over 200 cases plus enumeration")
    assert worst <= 1e-10


def test_06_sparse_reconstruction(record_criterion):
    rng = np.random.default_rng(606)
    worst = 0.0
    for k in range(50):
        n, d = (2, 3)[k % 2], (1, 2, 4)[k % 3]
        M = random_sparse_hermitian(n, d, rng)
        lcu = sparse_to_lcu(SparseOracle.from_dense(M, d))
        dense = sum(t.coeff * term_dense(t) for t in lcu.terms)
        # column register and both flags sit above the row register, all projected on |0>
        P0 = np.zeros((2 ** (n + 2),) * 2)
        P0[0, 0] = 1
        worst = max(worst, float(np.abs(dense - np.kron(P0, M)).max()))
    record_criterion(6, worst <= 1e-10, f"max reconstruction error {worst:.2e}")
    assert worst <= 1e-10


def test_07_spectral_gap(record_criterion):
    instances = [ising_qlsp(n, 0.1, k) for n in (2, 4, 6) for k in (10, 40)]
    instances += [random_qlsp(n, k, seed=s) for n in (2, 4, 6) for k in (10, 40) for s in range(2)]
    instances += [degenerate_qlsp(v, k) for v in (1, 2, 3) for k in (10, 40)]
    bad = 0
    for inst in instances:
        r = spectral_check(inst)
        A = dense_A(inst)
        b = dense_circuit(inst.b_prep)[:, 0]
        H = A.conj().T @ (np.eye(len(b)) - np.outer(b, b.conj())) @ A
        w = np.linalg.eigvalsh((H + H.conj().T) / 2)
        kappa = inst.kappa
        bad += not (r.ground_ok and r.gap_ok)
        bad += not (abs(w[0]) <= 1e-9 and w[1] >= 1 / kappa**2 - 1e-9)
    record_criterion(7, bad == 0, f"{bad} failures over {len(instances)} instances (package and dense routes)")
    assert bad == 0


def test_08_choi_identity(record_criterion):
    rng = np.random.default_rng(808)
    worst = 0.0
    for _ in range(50):
        U, V = random_circuit(2, rng, depth=12), random_circuit(2, rng, depth=12)
        cost, _ = choi_cost_identity_check(U, V)
        ref = abs(np.trace(dense_circuit(V).conj().T @ dense_circuit(U))) ** 2 / 16
        worst = max(worst, abs(cost - (1 - ref)))
    record_criterion(8, worst <= 1e-10, f"max deviation {worst:.2e}")
    assert worst <= 1e-10


SCALING_NS = (4, 6, 8)
SCALING_KAPPAS = (10, 20, 40, 80)
EPS_SWEEP = (0.1, 0.05, 0.02, 0.01)
SCALING_BUDGET = 400_000


@pytest.mark.slow
def test_09_scaling_shape(record_criterion, session_elapsed):
    t0 = session_elapsed()
    medians: dict[tuple[int, int], float] = {}
    eps_medians: dict[int, list[float]] = {}
    for n in SCALING_NS:
        cfg = BenchmarkConfig.from_dict(
            {"sweep": "kappa", "values": list(SCALING_KAPPAS), "family": "ising", "n": n, "J": 0.1, "layers": 4,
             "kind": "local", "method": "powell", "runs": 10, "max_evaluations": SCALING_BUDGET}
        )
        for kappa in SCALING_KAPPAS:
            # at kappa = 20 one run per seed also yields the precision sweep
            targets = list(EPS_SWEEP) if kappa == 20 else [0.05]
            rows = np.array([one_run(cfg, n, kappa, targets, r).evaluations for r in range(cfg.runs)])
            med = np.median(rows, axis=0)
            medians[n, kappa] = float(med[targets.index(0.05)])
            if kappa == 20:
                eps_medians[n] = [float(v) for v in med]
            print(f"n={n} kappa={kappa} median TTS {med} failures {np.isinf(rows).sum(axis=0)}")
    exps, mono = {}, True
    for n in SCALING_NS:
        y = [medians[n, k] for k in SCALING_KAPPAS]
        mono &= all(np.diff(y) >= 0)
        exps[n] = fit_power(SCALING_KAPPAS, y)[0]
    part_a = mono and all(np.isfinite(m) and m <= 1.5 for m in exps.values())
    # the precision sweep is asserted where every target is reached by most seeds
    r2 = {n: fit_linear(np.log(1 / np.array(EPS_SWEEP)), v)[1] for n, v in eps_medians.items()}
    part_b = r2[4] >= 0.8
    slope_n = {k: fit_linear(SCALING_NS, np.log([medians[n, k] for n in SCALING_NS]))[0] for k in SCALING_KAPPAS}
    minutes = (session_elapsed() - t0) / 60
    ok = part_a and part_b and minutes <= 30
    detail = (
        f"(a) exponents {{{', '.join(f'n={n}: {m:.2f}' for n, m in exps.items())}}} monotone={mono}; "
        f"(b) R2 {{{', '.join(f'n={n}: {v:.3f}' for n, v in r2.items())}}}; "
        f"(c) log-TTS slope per qubit {{{', '.join(f'k={k}: {s:.2f}' for k, s in slope_n.items())}}} (reported); "
        f"{minutes:.1f} min"
    )
    record_criterion(9, ok, detail)
    assert ok


def one_qubit_solve(pairs, b_prep, kappa):
    inst = pauli_qlsp(1, pairs, Circuit(1, b_prep), kappa)
    a = Ansatz(1, "hea", (Slot("ry", (0,)), Slot("rz", (0,))))
    # D(Z) <= 2 eps, so eps = 0.01 certifies the 0.02 tolerance
    tr = minimize(inst, a, "global", "powell", TerminationRule(0.01, "global", kappa, 1, max_evaluations=5000), seed=0)
    assert tr.terminated_by == "threshold"
    return inst, prepare_state(a, tr.final_alpha)


def test_10_observable_ground_truths(record_criterion):
    r = 1 / math.sqrt(2)
    # A = H is unitary (kappa = 1); any larger kappa still gives a valid bound
    _, x_h = one_qubit_solve([(r, "X"), (r, "Z")], (Gate("x", (0,)),), 1.01)
    z_h = float(np.vdot(x_h.amplitudes, np.diag([1, -1]) @ x_h.amplitudes).real)
    # A = I + 0.25 Z, rescaled to unit norm; eigenvalues 1.25 and 0.75
    _, x_d = one_qubit_solve([(0.8, "I"), (0.2, "Z")], (Gate("x", (0,)),), 5 / 3)
    z_d = float(np.vdot(x_d.amplitudes, np.diag([1, -1]) @ x_d.amplitudes).real)
    ok = abs(z_h) <= 0.02 and abs(z_d + 1) <= 0.02
    # the package's deviation routine agrees with the direct expectation
    d, _ = observable_deviation(x_d, np.array([0, 1]), "Z")
    ok = ok and abs(d - abs(z_d + 1)) < 1e-12
    record_criterion(10, ok, f"A=H: <Z> = {z_h:+.2e}; A=I+0.25Z: <Z> = {z_d:+.6f}")
    assert ok


def test_11_shot_noise(record_criterion):
    rng = np.random.default_rng(1111)
    inst = random_instance(2, rng, L=3, circuit_terms=True)
    V = random_circuit(2, rng)
    shots = 10_000
    exact = evaluate_cost(inst, V, "global_hat").value
    se = global_hat_standard_error(inst, V, shots)
    ests = np.array(
        [evaluate_cost(inst, V, "global_hat", backend="circuit", shots=ShotConfig("sampled", shots, seed)).value for seed in range(100)]
    )
    rate = float(np.mean(np.abs(ests - exact) <= 4 * se))
    # the stated error should also describe the observed spread
    spread = float(ests.std(ddof=1) / se)
    ok = rate >= 0.95 and 0.7 <= spread <= 1.3
    record_criterion(11, ok, f"pass rate {rate:.2f}, empirical/stated standard error {spread:.2f}")
    assert ok


@pytest.mark.session_last
def test_12_suite_runtime(record_criterion, session_elapsed):
    minutes = session_elapsed() / 60
    ok = minutes <= 45
    record_criterion(12, ok, f"session wall clock {minutes:.1f} min at the time of this check")
    assert ok
