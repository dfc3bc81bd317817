"""Time-to-solution sweeps over condition number, precision, size or random instances.

Each run gets its own generator spawned from ``(base_seed, run_index)``, so
run ``r`` starts from the same angles at every sweep point and results do
not depend on how runs are distributed over worker processes.

For an ``epsilon`` sweep every run optimizes once down to the smallest
target and the time-to-solution of each larger target is read off the
history: the trajectory up to a stop does not depend on where it stops.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .ansatz import QaoaSpec, build_hea, build_qaoa, build_variable
from .certify import cost_floor
from .cost import CostKind
from .optimizer import METHODS, TerminationRule, minimize, minimize_variable
from .problem import QlspInstance, degenerate_qlsp, ising_qlsp, random_qlsp

SWEEPS = ("kappa", "epsilon", "n", "random")
FAMILIES = ("ising", "random", "degenerate")
OPT_CAP = 8


class ConfigError(ValueError):
    pass


@dataclass
class BenchmarkConfig:
    sweep: str
    values: list
    family: str = "ising"
    n: int = 4
    kappa: float = 20.0
    epsilon: float = 0.05
    J: float = 0.1
    variant: int = 2
    pair_probability: float = 0.3
    ansatz: str = "hea"
    layers: int = 4
    complex_alphabet: bool | None = None  # None: on for the random family, whose solutions are complex
    qaoa_p: int = 1
    driver_scale: float = 1.0
    kind: str = "local"
    method: str = "powell"
    runs: int = 10
    best_of: int = 4
    instances: int = 10
    base_seed: int = 0
    max_evaluations: int = 200_000
    tightened: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}")
        if not isinstance(self.values, list) or not self.values:
            raise ConfigError("values must be a nonempty list")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        try:
            CostKind.parse(self.kind)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if min(self.runs, self.best_of, self.instances) < 1:
            raise ConfigError("protocol counts must be at least 1")
        ns = self.values if self.sweep == "n" else [self.n]
        if max(ns) > OPT_CAP:
            raise ConfigError(f"optimization loops are capped at n = {OPT_CAP}")
        if self.sweep == "epsilon" and not all(0 < v < 1 for v in self.values):
            raise ConfigError("epsilon values must lie in (0, 1)")
        if self.sweep in ("kappa", "random") and not all(v > 1 for v in self.values):
            raise ConfigError("kappa values must exceed 1")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        return asdict(self)


def make_instance(cfg: BenchmarkConfig, n: int, kappa: float, instance_index: int = 0) -> QlspInstance:
    if cfg.family == "ising":
        return ising_qlsp(n, cfg.J, kappa)
    if cfg.family == "degenerate":
        return degenerate_qlsp(cfg.variant, kappa)
    seed = np.random.SeedSequence([cfg.base_seed, 7919, instance_index])
    return random_qlsp(n, kappa, cfg.pair_probability, seed=np.random.default_rng(seed))


def make_ansatz(cfg: BenchmarkConfig, inst: QlspInstance):
    cplx = cfg.family == "random" if cfg.complex_alphabet is None else cfg.complex_alphabet
    if cfg.ansatz == "hea":
        return build_hea(inst.n, cfg.layers, complex_alphabet=cplx)
    if cfg.ansatz == "qaoa":
        return build_qaoa(inst, QaoaSpec(cfg.qaoa_p, CostKind.GLOBAL_HAT, cfg.driver_scale))
    if cfg.ansatz == "variable":
        return build_variable(inst.n, complex_alphabet=cplx)
    raise ConfigError(f"unknown ansatz {cfg.ansatz!r}")


def run_rng(base_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, run_index]))


@dataclass
class RunResult:
    evaluations: list  # per target epsilon; inf when not reached
    final_cost: float


def one_run(cfg: BenchmarkConfig, n: int, kappa: float, epsilons: list[float], run_index: int, instance_index: int = 0) -> RunResult:
    inst = make_instance(cfg, n, kappa, instance_index)
    a = make_ansatz(cfg, inst)
    kind = CostKind.parse(cfg.kind)
    rule = TerminationRule(min(epsilons), kind, kappa, inst.n, cfg.tightened, cfg.max_evaluations)
    rng = run_rng(cfg.base_seed, run_index)
    if cfg.ansatz == "variable":
        trace = minimize_variable(inst, a, kind, rule, rng, cfg.method)
    else:
        trace = minimize(inst, a, kind, cfg.method, rule, rng)
    out = []
    for e in epsilons:
        hit = trace.first_reaching(lambda p, e=e: cost_floor(kind, e, kappa, inst.n, p, cfg.tightened))
        out.append(math.inf if hit is None else float(hit))
    return RunResult(out, trace.final_cost)


def _one_run_star(args):
    return one_run(*args)


@dataclass
class PointSummary:
    sweep_value: float
    tts: list  # per-run (or per-instance) times, inf for failures
    median: float
    mean: float
    success_rate: float


def summarize(value: float, tts: list[float]) -> PointSummary:
    arr = np.array(tts, dtype=float)
    ok = np.isfinite(arr)
    med = float(np.median(arr)) if len(arr) else math.nan
    mean = float(arr[ok].mean()) if ok.any() else math.nan
    return PointSummary(value, list(arr), med, mean, float(ok.mean()) if len(arr) else 0.0)


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def fit_linear(x, y) -> tuple[float, float]:
    """Least-squares slope and coefficient of determination."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2 or not np.all(np.isfinite(y)):
        return math.nan, math.nan
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def fit_power(x, y) -> tuple[float, float]:
    """Exponent ``m`` of ``y ~ x**m`` by a log-log fit, with its R^2."""
    y = np.asarray(y, float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        return math.nan, math.nan
    return fit_linear(np.log(np.asarray(x, float)), np.log(y))


def sweep_points(cfg: BenchmarkConfig, threads: int = 1) -> list[PointSummary]:
    """Run the configured sweep and return one summary per sweep value."""
    if cfg.sweep == "epsilon":
        jobs = [(cfg, cfg.n, cfg.kappa, list(cfg.values), r) for r in range(cfg.runs)]
        results = _map(_one_run_star, jobs, threads)
        return [summarize(e, [res.evaluations[k] for res in results]) for k, e in enumerate(cfg.values)]
    points = []
    for v in cfg.values:
        n, kappa = (int(v), cfg.kappa) if cfg.sweep == "n" else (cfg.n, float(v))
        if cfg.sweep == "random":
            jobs = [(cfg, n, kappa, [cfg.epsilon], i * cfg.best_of + r, i) for i in range(cfg.instances) for r in range(cfg.best_of)]
            res = _map(_one_run_star, jobs, threads)
            per_inst = [min(res[i * cfg.best_of + r].evaluations[0] for r in range(cfg.best_of)) for i in range(cfg.instances)]
            points.append(summarize(v, per_inst))
        else:
            jobs = [(cfg, n, kappa, [cfg.epsilon], r) for r in range(cfg.runs)]
            res = _map(_one_run_star, jobs, threads)
            points.append(summarize(v, [r.evaluations[0] for r in res]))
    return points


def fits(cfg: BenchmarkConfig, points: list[PointSummary]) -> dict[str, tuple[float, float]]:
    x = np.array([p.sweep_value for p in points], float)
    y = np.array([p.median for p in points], float)
    if cfg.sweep == "epsilon":
        return {"fit_log": fit_linear(np.log(1 / x), y), "fit_power": fit_power(1 / x, y)}
    if cfg.sweep == "n":
        with np.errstate(divide="ignore"):
            return {"fit_exp": fit_linear(x, np.log(y)), "fit_power": fit_power(x, y)}
    return {"fit_power": fit_power(x, y), "fit_log": fit_linear(np.log(x), y)}


def default_threads() -> int:
    return os.cpu_count() or 1
