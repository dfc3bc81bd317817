"""Command-line harness: ``vqls solve | bench | decompose | verify``.

Exit codes: 0 success (threshold reached / check passed), 2 evaluation
budget exhausted, 3 configuration or input error, 4 numerical failure.
A one-line JSON reason is printed to stderr on every nonzero exit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .ansatz import AnsatzError, QaoaSpec, build_hea, build_qaoa, build_variable, prepare_state
from .bench import BenchmarkConfig, ConfigError, default_threads, fits, sweep_points
from .certify import CertifyError, Certificate, epsilon_bound, trace_distance_pure
from .cost import CostError, CostKind, evaluate_cost
from .optimizer import METHODS, OptimizerError, TerminationRule, minimize, minimize_variable
from .problem import (
    ProblemError,
    QlspInstance,
    SparseOracle,
    assemble_dense,
    degenerate_qlsp,
    dense_solve_oracle,
    embed_with_zero_flags,
    estimate_kappa,
    ising_qlsp,
    random_qlsp,
    sparse_to_lcu,
)
from .simulator import Circuit, SimulationError, run_circuit

EXIT_OK, EXIT_BUDGET, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
VERIFY_TOL = 1e-9
DECOMPOSE_TOL = 1e-10


class CliFailure(Exception):
    def __init__(self, code: int, reason: str, **extra):
        super().__init__(reason)
        self.code, self.reason, self.extra = code, reason, extra


def _fail(code: int, reason: str, **extra):
    raise CliFailure(code, reason, **extra)


# -- solve -----------------------------------------------------------------


def _instance(args):
    if args.problem:
        inst = io.read_problem(args.problem)
        return inst
    if args.family == "ising":
        return ising_qlsp(args.n, args.J, args.kappa)
    if args.family == "random":
        return random_qlsp(args.n, args.kappa, args.pair_probability, seed=args.instance_seed)
    if args.family == "degenerate":
        return degenerate_qlsp(args.variant, args.kappa)
    _fail(EXIT_CONFIG, "give --problem or --family")


def cmd_solve(args) -> int:
    inst = _instance(args)
    kappa = inst.kappa
    if kappa is None:
        if inst.n > 10:
            _fail(EXIT_CONFIG, "instance has no kappa and is too large to estimate it")
        kappa = estimate_kappa(inst)
    kind = CostKind.parse(args.kind)
    rule = TerminationRule(args.epsilon, kind, kappa, inst.n, args.tightened, args.max_evaluations)
    if args.ansatz == "hea":
        a = build_hea(inst.n, args.layers, complex_alphabet=args.complex_alphabet)
    elif args.ansatz == "qaoa":
        a = build_qaoa(inst, QaoaSpec(args.p, CostKind.GLOBAL_HAT, args.driver_scale))
    else:
        a = build_variable(inst.n, complex_alphabet=args.complex_alphabet)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    if args.ansatz == "variable":
        trace = minimize_variable(inst, a, kind, rule, rng, args.method)
    else:
        trace = minimize(inst, a, kind, args.method, rule, rng)
    if args.write_problem:
        io.write_problem(inst, args.write_problem)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            io.write_trace(trace, fh, timing=args.timing)

    V = trace.ansatz.circuit()
    report = evaluate_cost(inst, V, kind)
    x = prepare_state(trace.ansatz)
    words = args.observables.split(",") if args.observables else []
    cert = Certificate.from_report(report, kappa, inst.n, args.tightened, x, words, io.circuit_to_json(V))
    if args.certificate:
        io.write_certificate(cert, args.certificate)
    summary = {
        "terminated_by": trace.terminated_by,
        "evaluations": trace.evaluations,
        "cost": report.value,
        "epsilon_upper": cert.epsilon_upper,
    }
    print(json.dumps(summary))
    if trace.terminated_by != "threshold":
        _fail(EXIT_BUDGET, "evaluation budget exhausted", evaluations=trace.evaluations)
    return EXIT_OK


# -- bench -----------------------------------------------------------------


def cmd_bench(args) -> int:
    try:
        cfg_dict = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        _fail(EXIT_CONFIG, f"cannot read config: {e}")
    if args.output:
        cfg_dict["output"] = args.output
    cfg = BenchmarkConfig.from_dict(cfg_dict)
    threads = args.threads if args.threads else default_threads()
    out = open(cfg.output, "w", newline="") if cfg.output else sys.stdout
    try:
        writer = io.BenchWriter(out)
        points = []
        if cfg.sweep == "epsilon":
            points = sweep_points(cfg, threads)
            for p in points:
                writer.row("point", p.sweep_value, p.median, p.mean, p.success_rate, len(p.tts))
        else:
            for v in cfg.values:
                # one sweep point at a time so each row lands as soon as it is known
                sub = BenchmarkConfig.from_dict({**cfg.to_dict(), "values": [v]})
                try:
                    p = sweep_points(sub, threads)[0]
                except (CostError, SimulationError, ProblemError, np.linalg.LinAlgError) as e:
                    writer.row("error", v)
                    print(json.dumps({"point": v, "error": str(e)}), file=sys.stderr)
                    continue
                points.append(p)
                writer.row("point", v, p.median, p.mean, p.success_rate, len(p.tts))
        if len(points) >= 2:
            for name, (param, r2) in fits(cfg, points).items():
                writer.row(name, None, None, None, None, None, param, r2)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- decompose -------------------------------------------------------------


def cmd_decompose(args) -> int:
    M = io.read_matrix(args.matrix)
    oracle = SparseOracle.from_dense(M, args.d)
    if oracle.d > (args.d or oracle.d):
        _fail(EXIT_CONFIG, f"matrix has rows with more than d={args.d} nonzeros")
    if not oracle.hermitian:
        _fail(EXIT_CONFIG, "matrix is not Hermitian")
    lcu = sparse_to_lcu(oracle, bits=args.bits)
    inst = QlspInstance(lcu, Circuit(lcu.n, ()), None, args.label)
    io.write_problem(inst, args.output)
    result = {"output": args.output, "qubits": lcu.n, "terms": lcu.L}
    if args.verify:
        back = io.read_problem(args.output)
        dev = float(np.abs(assemble_dense(back.A) - embed_with_zero_flags(M)).max())
        result["max_deviation"] = dev
        print(json.dumps(result))
        if dev > DECOMPOSE_TOL:
            _fail(EXIT_NUMERIC, "reconstruction deviates", max_deviation=dev)
        return EXIT_OK
    print(json.dumps(result))
    return EXIT_OK


# -- verify ----------------------------------------------------------------


def cmd_verify(args) -> int:
    inst = io.read_problem(args.problem)
    cert = io.read_certificate(args.certificate)
    if cert.circuit is None:
        _fail(EXIT_CONFIG, "certificate carries no circuit")
    if cert.n != inst.n:
        _fail(EXIT_CONFIG, "certificate and problem sizes differ")
    V = io.circuit_from_json(inst.n, cert.circuit)
    report = evaluate_cost(inst, V, cert.kind, backend=args.backend)
    eps = epsilon_bound(report, cert.kappa, cert.n, cert.tightened)
    out = {
        "cost_recomputed": report.value,
        "cost_certified": cert.cost_value,
        "epsilon_recomputed": eps,
        "epsilon_certified": cert.epsilon_upper,
    }
    ok = abs(report.value - cert.cost_value) <= VERIFY_TOL and abs(eps - cert.epsilon_upper) <= VERIFY_TOL
    if inst.n <= 10:
        x0 = dense_solve_oracle(inst)
        eps_true = trace_distance_pure(run_circuit(V), x0)
        out["epsilon_true"] = eps_true
        ok = ok and eps_true <= cert.epsilon_upper + VERIFY_TOL
    out["ok"] = ok
    print(json.dumps(out))
    if not ok:
        _fail(EXIT_NUMERIC, "certificate does not check out", **out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vqls", description="Variational linear-system solver on a statevector simulator.")
    p.add_argument("--threads", type=int, default=None, help="worker processes for independent runs (default: all cores; 1 is bitwise deterministic)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="train an ansatz on one instance and write a certificate")
    src = s.add_argument_group("instance")
    src.add_argument("--problem", help="problem JSON file")
    src.add_argument("--family", choices=("ising", "random", "degenerate"))
    src.add_argument("--n", type=int, default=3)
    src.add_argument("--J", type=float, default=0.1)
    src.add_argument("--kappa", type=float, default=20.0)
    src.add_argument("--variant", type=int, default=2)
    src.add_argument("--pair-probability", type=float, default=0.3)
    src.add_argument("--instance-seed", type=int, default=0)
    s.add_argument("--ansatz", choices=("hea", "qaoa", "variable"), default="hea")
    s.add_argument("--layers", type=int, default=4)
    s.add_argument("--complex-alphabet", action="store_true", help="add RZ rotations (needed when the solution has complex amplitudes)")
    s.add_argument("--p", type=int, default=1, help="QAOA rounds")
    s.add_argument("--driver-scale", type=float, default=1.0)
    s.add_argument("--kind", default="local", choices=[k.value for k in CostKind])
    s.add_argument("--method", default="powell", choices=METHODS)
    s.add_argument("--epsilon", type=float, default=0.05)
    s.add_argument("--tightened", action="store_true")
    s.add_argument("--max-evaluations", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--observables", default="", help="comma-separated Pauli words to report")
    s.add_argument("--trace", help="trace CSV output path")
    s.add_argument("--timing", action="store_true", help="fill wallclock_ms in the trace (breaks bitwise reproducibility)")
    s.add_argument("--certificate", help="certificate JSON output path")
    s.add_argument("--write-problem", help="also write the instance as a problem file")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a time-to-solution sweep from a JSON config")
    b.add_argument("config")
    b.add_argument("--output", help="CSV path (overrides the config)")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("decompose", help="four-unitary decomposition of a sparse Hermitian matrix")
    d.add_argument("matrix", help="JSON file with a dense matrix")
    d.add_argument("--d", type=int, default=None, help="sparsity (default: widest row)")
    d.add_argument("--bits", type=int, default=8)
    d.add_argument("--label", default="sparse")
    d.add_argument("--output", required=True)
    d.add_argument("--verify", action="store_true", help="reassemble densely and report the max deviation")
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("verify", help="re-check a certificate against a problem file")
    v.add_argument("--problem", required=True)
    v.add_argument("--certificate", required=True)
    v.add_argument("--backend", choices=("direct", "circuit"), default="direct")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print(json.dumps({"error": "config", "reason": "--threads must be at least 1"}), file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except CliFailure as f:
        print(json.dumps({"error": {2: "budget", 3: "config", 4: "numerical"}[f.code], "reason": f.reason, **f.extra}), file=sys.stderr)
        return f.code
    except (io.FormatError, ConfigError, ProblemError, AnsatzError, OptimizerError, CertifyError, SimulationError) as e:
        print(json.dumps({"error": "config", "reason": str(e)}), file=sys.stderr)
        return EXIT_CONFIG
    except (CostError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(json.dumps({"error": "numerical", "reason": str(e)}), file=sys.stderr)
        return EXIT_NUMERIC


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
