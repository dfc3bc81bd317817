"""Classical outer loop with certified termination.

Every method minimizes one cost kind over the ansatz angles and stops as
soon as an evaluated cost drops to the threshold implied by the target
precision, or when the evaluation budget runs out.  The history keeps only
improvements of the best cost so far, so it is nonincreasing by design;
each entry carries the angles that produced it.

The starting point is always evaluated (index 0) and counts towards the
budget.  When a method stalls before either stopping condition it restarts
from the best point, and from a fresh random point if that also fails.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .ansatz import Ansatz, grow_variable, state_function
from .certify import cost_floor, epsilon_from_cost
from .cost import CostFunction, CostKind
from .gradient import analytic_gradient
from .problem import QlspInstance

METHODS = ("random_line_search", "coordinate", "gradient_descent", "powell")
GOLDEN = (math.sqrt(5) - 1) / 2
LINE_EVALS = 32
COORD_TOL = 1e-9
POWELL_XTOL = 1e-4
GROWTH_REL_GAIN = 1e-3


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class TerminationRule:
    target_epsilon: float
    kind: CostKind
    kappa: float
    n: int
    use_tightened: bool = False
    max_evaluations: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "kind", CostKind.parse(self.kind))
        if not 0 < self.target_epsilon < 1:
            raise OptimizerError("target_epsilon must lie in (0, 1)")
        if not self.kappa > 1:
            raise OptimizerError("kappa must exceed 1")
        if self.max_evaluations < 0:
            raise OptimizerError("max_evaluations must be nonnegative")


def termination_threshold(rule: TerminationRule, psi_norm_sq: float = 1.0) -> float:
    """Cost level ``gamma`` below which ``target_epsilon`` is guaranteed."""
    return cost_floor(rule.kind, rule.target_epsilon, rule.kappa, rule.n, psi_norm_sq, rule.use_tightened)


@dataclass
class HistoryEntry:
    eval_index: int
    cost: float
    psi_norm_sq: float
    epsilon_bound: float
    wallclock_ms: float
    alpha: np.ndarray = field(repr=False)


@dataclass
class OptimizerTrace:
    method: str
    kind: CostKind
    evaluations: int = 0
    history: list[HistoryEntry] = field(default_factory=list)
    final_alpha: np.ndarray | None = None
    terminated_by: str = "budget"
    restarts: int = 0
    growth_events: list[dict] = field(default_factory=list)
    ansatz: Ansatz | None = field(default=None, repr=False)

    @property
    def final_cost(self) -> float:
        return self.history[-1].cost

    @property
    def final_psi_norm_sq(self) -> float:
        return self.history[-1].psi_norm_sq

    def first_reaching(self, threshold: Callable[[float], float]) -> int | None:
        """Evaluation count when the best cost first met ``threshold(psi_norm_sq)``."""
        for h in self.history:
            if h.cost <= threshold(h.psi_norm_sq):
                return h.eval_index + 1
        return None


class _Stop(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class Objective:
    """Counting cost oracle shared by all methods."""

    def __init__(self, inst: QlspInstance, a: Ansatz, rule: TerminationRule, trace: OptimizerTrace, offset: int = 0):
        self.f = CostFunction(inst, rule.kind)
        self.state = state_function(a)
        self.rule = rule
        self.trace = trace
        self.offset = offset
        self.t0 = time.perf_counter()
        self.best = math.inf
        self.best_alpha = None
        self.best_psi = None
        self.count = 0

    def value(self, alpha) -> tuple[float, float]:
        """Uncounted evaluation (used for bookkeeping, never by the search)."""
        return self.f.from_state(self.state(np.asarray(alpha, dtype=float)))

    def __call__(self, alpha) -> float:
        if self.count > 0 and self.offset + self.count >= self.rule.max_evaluations:
            raise _Stop("budget")
        alpha = np.array(alpha, dtype=float)
        value, psi = self.f.from_state(self.state(alpha))
        idx = self.offset + self.count
        self.count += 1
        self.trace.evaluations = self.offset + self.count
        if value < self.best:
            self.best, self.best_alpha, self.best_psi = value, alpha, psi
            r = self.rule
            self.trace.history.append(
                HistoryEntry(
                    idx,
                    value,
                    psi,
                    epsilon_from_cost(r.kind, value, r.kappa, r.n, psi, r.use_tightened),
                    (time.perf_counter() - self.t0) * 1e3,
                    alpha,
                )
            )
            if value <= termination_threshold(r, psi):
                raise _Stop("threshold")
        if self.offset + self.count >= self.rule.max_evaluations:
            raise _Stop("budget")
        return value


# -- one-dimensional searches ----------------------------------------------


def golden_section(phi: Callable[[float], float], lo: float, hi: float, max_evals: int, tol: float = 0.0):
    """Minimize ``phi`` on ``[lo, hi]``; returns ``(t, phi(t))`` of the best point seen."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    best = (c, fc) if fc <= fd else (d, fd)
    used = 2
    while used < max_evals and b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = phi(c)
            if fc < best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = phi(d)
            if fd < best[1]:
                best = (d, fd)
        used += 1
    return best


def line_search(phi: Callable[[float], float], f0: float, step: float, max_evals: int = LINE_EVALS):
    """Doubling bracket from 0, then golden-section; returns ``(t, phi(t))`` (``t = 0`` if nothing helps)."""
    used = 0
    fp = phi(step)
    used += 1
    if fp < f0:
        sgn, f1 = 1.0, fp
    else:
        fm = phi(-step)
        used += 1
        if fm >= f0:
            # minimum lies inside (-step, step)
            t, ft = golden_section(phi, -step, step, max_evals - used)
            return (t, ft) if ft < f0 else (0.0, f0)
        sgn, f1 = -1.0, fm
    lo, mid, fmid = 0.0, step, f1
    hi = 2 * step
    fh = phi(sgn * hi)
    used += 1
    while fh < fmid and used < max_evals // 2:
        lo, mid, fmid = mid, hi, fh
        hi *= 2
        fh = phi(sgn * hi)
        used += 1
    if fh < fmid:
        return sgn * hi, fh
    t, ft = golden_section(lambda s: phi(sgn * s), lo, hi, max_evals - used)
    if ft < fmid:
        return sgn * t, ft
    return sgn * mid, fmid


# -- methods ---------------------------------------------------------------


def _random_line_search(obj: Objective, alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    f = obj(alpha)
    step = 0.1
    stall = 0
    while stall < 5 * len(alpha) + 20:
        w = rng.normal(size=len(alpha))
        w /= np.linalg.norm(w)
        t, ft = line_search(lambda s: obj(alpha + s * w), f, step)
        if ft < f:
            rel = (f - ft) / max(f, 1e-300)
            alpha, f = alpha + t * w, ft
            step = max(abs(t), 1e-6)
            stall = 0 if rel > 1e-6 else stall + 1
        else:
            step = max(step / 2, 1e-6)
            stall += 1
    return alpha


def _coordinate(obj: Objective, alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    f = obj(alpha)
    alpha = alpha.copy()
    while True:
        f_start = f
        for i in range(len(alpha)):
            base = alpha[i]

            def phi(t):
                x = alpha.copy()
                x[i] = t
                return obj(x)

            t, ft = golden_section(phi, base - math.pi, base + math.pi, 64, tol=COORD_TOL)
            if ft < f:
                alpha[i], f = t, ft
        if f_start - f <= 1e-12 * max(f_start, 1e-300):
            return alpha


def _gradient_descent(obj: Objective, alpha: np.ndarray, rng: np.random.Generator, grad: Callable) -> np.ndarray:
    f = obj(alpha)
    step = 0.1
    stall = 0
    while stall < 3:
        g = grad(alpha)
        gn = float(np.linalg.norm(g))
        if gn == 0:
            return alpha
        trial_step = step
        for _ in range(30):
            x = alpha - trial_step * g
            fx = obj(x)
            if fx < f:
                break
            trial_step /= 2
        else:
            stall += 1
            continue
        rel = (f - fx) / max(f, 1e-300)
        alpha, f = x, fx
        stall = 0 if rel > 1e-9 else stall + 1
        step = min(trial_step * 2, 10.0)
    return alpha


def _powell(obj: Objective, alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    res = optimize.minimize(obj, alpha, method="Powell", options={"xtol": POWELL_XTOL, "ftol": 1e-15, "maxfev": 10**9})
    return np.asarray(res.x, dtype=float)


def _counted_gradient(obj: Objective, inst: QlspInstance, a: Ansatz, kind: CostKind):
    """Parameter-shift gradient; each shifted circuit is charged as one cost evaluation."""

    def grad(alpha):
        charge = 2 * len(alpha)
        remaining = obj.rule.max_evaluations - (obj.offset + obj.count)
        if remaining < charge:
            raise _Stop("budget")
        obj.count += charge
        obj.trace.evaluations = obj.offset + obj.count
        return analytic_gradient(inst, a, alpha, kind)

    return grad


def initial_alpha(a: Ansatz, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-math.pi, math.pi, a.num_parameters)


def minimize(
    inst: QlspInstance,
    a: Ansatz,
    kind: CostKind | str,
    method: str = "powell",
    rule: TerminationRule | None = None,
    seed=None,
    alpha0=None,
    _offset: int = 0,
    _trace: OptimizerTrace | None = None,
) -> OptimizerTrace:
    """Minimize ``kind`` over the angles of ``a`` until ``rule`` certifies the target or the budget ends."""
    kind = CostKind.parse(kind)
    if method not in METHODS:
        raise OptimizerError(f"unknown method {method!r}; choose from {METHODS}")
    if rule is None:
        kappa = inst.kappa if inst.kappa is not None else 10.0
        rule = TerminationRule(0.01, kind, kappa, inst.n)
    if rule.kind != kind:
        raise OptimizerError("rule and requested cost kind differ")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    trace = _trace if _trace is not None else OptimizerTrace(method, kind)
    obj = Objective(inst, a, rule, trace, _offset)
    alpha = initial_alpha(a, rng) if alpha0 is None else np.array(alpha0, dtype=float)
    runners = {
        "random_line_search": _random_line_search,
        "coordinate": _coordinate,
        "powell": _powell,
        "gradient_descent": lambda o, x, r: _gradient_descent(o, x, r, _counted_gradient(o, inst, a, kind)),
    }
    try:
        last_best = math.inf
        while True:
            runners[method](obj, alpha, rng)
            if obj.best < last_best * (1 - 1e-9):
                alpha = obj.best_alpha
            else:
                alpha = initial_alpha(a, rng)
            last_best = obj.best
            trace.restarts += 1
    except _Stop as stop:
        trace.terminated_by = stop.reason
    trace.final_alpha = obj.best_alpha
    trace.ansatz = a.with_parameters(obj.best_alpha)
    return trace


def minimize_variable(
    inst: QlspInstance,
    a: Ansatz,
    kind: CostKind | str,
    rule: TerminationRule,
    seed=None,
    method: str = "powell",
    inner_budget: int = 2000,
) -> OptimizerTrace:
    """Alternate inner angle optimization with structure growth.

    A growth is kept only when the following inner loop lowers the cost by a
    relative ``GROWTH_REL_GAIN``; otherwise the previous structure and angles
    are restored exactly.
    """
    if a.family != "variable":
        raise OptimizerError("minimize_variable needs a variable-structure ansatz")
    kind = CostKind.parse(kind)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    trace = OptimizerTrace(f"variable/{method}", kind)

    def inner(ans: Ansatz, alpha0) -> OptimizerTrace:
        used = trace.evaluations
        sub_rule = TerminationRule(
            rule.target_epsilon, kind, rule.kappa, rule.n, rule.use_tightened, min(rule.max_evaluations, used + inner_budget)
        )
        sub = OptimizerTrace(method, kind)
        sub.history = []
        res = minimize(inst, ans, kind, method, sub_rule, rng, alpha0, _offset=used, _trace=sub)
        trace.evaluations = max(trace.evaluations, res.evaluations)
        return res

    current = a
    res = inner(current, initial_alpha(current, rng) if not a.parameters.any() else a.parameters)
    _merge(trace, res)
    current = res.ansatz
    best = trace.history[-1].cost
    while res.terminated_by != "threshold" and trace.evaluations < rule.max_evaluations:
        grown = grow_variable(current, rng)
        before = best
        res = inner(grown, grown.parameters)
        after = res.history[-1].cost if res.history else math.inf
        accepted = after < before * (1 - GROWTH_REL_GAIN)
        trace.growth_events.append(
            {"eval_index": trace.evaluations, "accepted": accepted, "cost_before": before, "cost_after": after, "num_parameters": grown.num_parameters}
        )
        if accepted:
            _merge(trace, res)
            current = res.ansatz
            best = trace.history[-1].cost
        elif res.terminated_by == "threshold":
            _merge(trace, res)
            current = res.ansatz
            break
    last = trace.history[-1]
    trace.terminated_by = "threshold" if last.cost <= termination_threshold(rule, last.psi_norm_sq) else "budget"
    trace.final_alpha = current.parameters
    trace.ansatz = current
    return trace


def _merge(trace: OptimizerTrace, res: OptimizerTrace) -> None:
    best = trace.history[-1].cost if trace.history else math.inf
    for h in res.history:
        if h.cost < best:
            trace.history.append(h)
            best = h.cost


# -- time to solution ------------------------------------------------------


@dataclass
class TtsResult:
    value: float
    per_instance: list[float]
    unresolved: int


def time_to_solution(
    run: Callable[[int, int], OptimizerTrace],
    instances: int = 1,
    runs_per_instance: int = 1,
    best_of: int | None = None,
) -> TtsResult:
    """Time-to-solution under either protocol.

    ``run(instance_index, run_index)`` performs one optimization.  With
    ``best_of`` set, each instance contributes its fastest successful run
    among ``best_of`` and the result averages over instances; otherwise it is
    the mean over all successful runs.  Runs ending on the budget are left out
    and counted in ``unresolved``.
    """
    if instances < 1 or runs_per_instance < 1 or (best_of is not None and best_of < 1):
        raise OptimizerError("protocol counts must be at least 1")
    per, unresolved = [], 0
    for i in range(instances):
        counts = []
        for r in range(best_of if best_of is not None else runs_per_instance):
            t = run(i, r)
            if t.terminated_by == "threshold":
                counts.append(t.evaluations)
            else:
                unresolved += 1
        if best_of is not None:
            if counts:
                per.append(float(min(counts)))
        else:
            per.extend(float(c) for c in counts)
    if unresolved:
        warnings.warn(f"{unresolved} run(s) did not reach the threshold and were excluded", RuntimeWarning)
    value = float(np.mean(per)) if per else math.nan
    return TtsResult(value, per, unresolved)
