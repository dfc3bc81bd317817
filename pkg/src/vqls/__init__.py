"""Variational linear-system solver on a dense statevector simulator."""

from .ansatz import Ansatz, QaoaSpec, build_hea, build_qaoa, build_variable, grow_variable, prepare_state
from .certify import Certificate, epsilon_bound, observable_deviation, spectral_check, trace_distance_pure
from .cost import CostKind, CostReport, ShotConfig, evaluate_cost
from .gradient import analytic_gradient, finite_difference_gradient
from .optimizer import OptimizerTrace, TerminationRule, minimize, minimize_variable, termination_threshold, time_to_solution
from .problem import (
    LcuMatrix,
    QlspInstance,
    SparseOracle,
    assemble_dense,
    degenerate_qlsp,
    dense_solve_oracle,
    ising_qlsp,
    random_qlsp,
    sparse_to_lcu,
)
from .simulator import Circuit, Gate, Statevector, apply_gate, expectation_pauli, inner_product, run_circuit

__version__ = "0.1.0"
