# ## Costs, bounds and the exact solution
#
# A small Ising-type system, four cost functions, and how far a trial state
# can be from the true solution given its cost.

import numpy as np

from vqls.ansatz import build_hea, prepare_state
from vqls.certify import epsilon_bound, spectral_check, trace_distance_pure
from vqls.cost import CostKind, evaluate_cost
from vqls.problem import dense_solve_oracle, ising_qlsp

# ### The instance

inst = ising_qlsp(n=4, J=0.1, kappa=20)
print(inst.label, "terms:", inst.A.L)
print("eigenvalues of A:", np.round(np.linalg.eigvalsh(inst.dense)[[0, -1]], 4))

x0 = dense_solve_oracle(inst)

# ### Costs at random angles

a = build_hea(4, 2)
rng = np.random.default_rng(0)
alpha = rng.uniform(-np.pi, np.pi, a.num_parameters)
V = a.circuit(alpha)
reports = {k: evaluate_cost(inst, V, k) for k in CostKind}
for k, r in reports.items():
    print(f"{k.value:>10}  cost={r.value:.4f}  eps_bound={epsilon_bound(r, inst.kappa, inst.n):.3f}")

# the local cost sits between C_G / n and C_G
g, l = reports[CostKind.GLOBAL].value, reports[CostKind.LOCAL].value
print("C_L <= C_G <= n C_L:", l <= g <= inst.n * l)

eps_true = trace_distance_pure(prepare_state(a, alpha), x0)
print("true trace distance:", round(eps_true, 4))

# ### The effective Hamiltonian has the solution as its ground state

r = spectral_check(inst)
print(f"E0={r.E0:.1e}  E1={r.E1:.5f}  1/kappa^2={1 / inst.kappa**2:.5f}")
