"""File formats: problem and certificate JSON, trace and benchmark CSV.

Complex numbers are written as ``[re, im]`` pairs.  Gates are objects
``{"gate", "targets", "theta"?, "inner"?, "matrix"?}``.  Python's float repr
round-trips exactly, so reading and rewriting a file reproduces it byte for
byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import TextIO

import numpy as np

from .certify import Certificate
from .optimizer import OptimizerTrace
from .problem import LcuMatrix, LcuTerm, ProblemError, QlspInstance
from .simulator import Circuit, Gate, SimulationError

TRACE_HEADER = "# vqls-trace v1"
TRACE_COLUMNS = ("eval_index", "cost", "psi_norm_sq", "epsilon_bound", "wallclock_ms")
BENCH_HEADER = "# vqls-bench v1"
BENCH_COLUMNS = ("row_type", "sweep_value", "tts_median", "tts_mean", "success_rate", "runs", "fit_param", "r_squared")


class FormatError(ValueError):
    pass


def complex_to_json(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise FormatError(f"cannot read {v!r} as a complex number")


def gate_to_json(g: Gate) -> dict:
    d: dict = {"gate": g.kind, "targets": list(g.targets)}
    if g.theta is not None:
        d["theta"] = g.theta
    if g.inner:
        d["inner"] = [gate_to_json(h) for h in g.inner]
    if g.kind == "unitary":
        d["matrix"] = [[complex_to_json(z) for z in row] for row in g.matrix]
    return d


def gate_from_json(d: dict) -> Gate:
    try:
        kind = d["gate"]
        targets = tuple(int(t) for t in d["targets"])
    except (KeyError, TypeError) as e:
        raise FormatError(f"malformed gate {d!r}") from e
    inner = tuple(gate_from_json(h) for h in d.get("inner", ()))
    matrix = None
    if "matrix" in d:
        matrix = np.array([[complex_from_json(z) for z in row] for row in d["matrix"]], dtype=complex)
    try:
        return Gate(kind, targets, d.get("theta"), inner, matrix)
    except SimulationError as e:
        raise FormatError(str(e)) from e


def circuit_to_json(c: Circuit) -> list[dict]:
    return [gate_to_json(g) for g in c.gates]


def circuit_from_json(n: int, items) -> Circuit:
    if not isinstance(items, list):
        raise FormatError("a gate list must be a JSON array")
    try:
        return Circuit(n, tuple(gate_from_json(d) for d in items))
    except SimulationError as e:
        raise FormatError(str(e)) from e


def problem_to_dict(inst: QlspInstance) -> dict:
    terms = []
    for t in inst.A.terms:
        entry: dict = {"coeff": complex_to_json(t.coeff)}
        if t.word is not None:
            entry["pauli_word"] = t.word
        else:
            entry["circuit"] = circuit_to_json(t.circuit)
        terms.append(entry)
    return {
        "n": inst.n,
        "terms": terms,
        "b_prep": circuit_to_json(inst.b_prep),
        "kappa": inst.kappa,
        "label": inst.label,
    }


def problem_from_dict(d: dict) -> QlspInstance:
    if not isinstance(d, dict):
        raise FormatError("problem file must hold a JSON object")
    try:
        n = int(d["n"])
        raw_terms = d["terms"]
        b_prep = circuit_from_json(n, d["b_prep"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"problem file is missing or has a malformed field: {e}") from e
    if not isinstance(raw_terms, list) or not raw_terms:
        raise FormatError("'terms' must be a nonempty array")
    terms = []
    for t in raw_terms:
        if not isinstance(t, dict) or "coeff" not in t:
            raise FormatError(f"malformed term {t!r}")
        c = complex_from_json(t["coeff"])
        if "pauli_word" in t:
            w = str(t["pauli_word"]).upper()
            if len(w) != n or set(w) - set("IXYZ"):
                raise FormatError(f"bad Pauli word {w!r} for n={n}")
            terms.extend(LcuMatrix.from_paulis(n, [(c, w)]).terms)
        elif "circuit" in t:
            terms.append(LcuTerm(c, circuit_from_json(n, t["circuit"])))
        else:
            raise FormatError("each term needs 'pauli_word' or 'circuit'")
    kappa = d.get("kappa")
    try:
        return QlspInstance(LcuMatrix(n, tuple(terms)), b_prep, None if kappa is None else float(kappa), str(d.get("label", "")))
    except (ProblemError, SimulationError) as e:
        raise FormatError(str(e)) from e


def dumps_problem(inst: QlspInstance) -> str:
    return json.dumps(problem_to_dict(inst), indent=2) + "\n"


def write_problem(inst: QlspInstance, path) -> None:
    Path(path).write_text(dumps_problem(inst))


def read_problem(path) -> QlspInstance:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read problem file {path}: {e}") from e
    return problem_from_dict(data)


def read_matrix(path) -> np.ndarray:
    """Dense matrix from JSON: ``{"matrix": rows}`` or a bare list of rows."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read matrix file {path}: {e}") from e
    rows = data["matrix"] if isinstance(data, dict) else data
    try:
        return np.array([[complex_from_json(z) for z in row] for row in rows], dtype=complex)
    except TypeError as e:
        raise FormatError("matrix rows must be arrays") from e


def write_certificate(cert: Certificate, path) -> None:
    Path(path).write_text(cert.to_json() + "\n")


def read_certificate(path) -> Certificate:
    try:
        return Certificate.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"cannot read certificate {path}: {e}") from e


# -- CSV -------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_trace(trace: OptimizerTrace, stream: TextIO, timing: bool = False) -> None:
    """One row per improvement of the best cost.  ``wallclock_ms`` stays blank unless ``timing``."""
    stream.write(TRACE_HEADER + "\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for h in trace.history:
        w.writerow([h.eval_index, _fmt(h.cost), _fmt(h.psi_norm_sq), _fmt(h.epsilon_bound), _fmt(h.wallclock_ms) if timing else ""])


def read_trace(stream: TextIO) -> list[dict]:
    lines = [ln for ln in stream.read().splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


class BenchWriter:
    """Single writer for benchmark rows; each row is flushed as soon as it is complete."""

    def __init__(self, stream: TextIO):
        self.stream = stream
        self.stream.write(BENCH_HEADER + "\n")
        self.w = csv.writer(stream, lineterminator="\n")
        self.w.writerow(BENCH_COLUMNS)
        self.stream.flush()

    def row(self, row_type: str, sweep_value=None, tts_median=None, tts_mean=None, success_rate=None, runs=None, fit_param=None, r_squared=None):
        self.w.writerow([_fmt(v) for v in (row_type, sweep_value, tts_median, tts_mean, success_rate, runs, fit_param, r_squared)])
        self.stream.flush()


def read_bench(stream: TextIO) -> list[dict]:
    return read_trace(stream)
