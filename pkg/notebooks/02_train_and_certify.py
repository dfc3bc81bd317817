# ## Training an ansatz and writing a certificate
#
# Powell's method drives the local cost down until the cost alone guarantees
# the requested precision; the dense solution is used only to check the claim.

import numpy as np

from vqls.ansatz import build_hea, prepare_state
from vqls.certify import Certificate, trace_distance_pure
from vqls.cost import evaluate_cost
from vqls.io import circuit_to_json
from vqls.optimizer import TerminationRule, minimize, termination_threshold
from vqls.problem import dense_solve_oracle, ising_qlsp

inst = ising_qlsp(n=4, J=0.1, kappa=20)
a = build_hea(4, 4)
rule = TerminationRule(target_epsilon=0.05, kind="local", kappa=20, n=4, max_evaluations=100_000)
print("stop when C_L <=", termination_threshold(rule))

trace = minimize(inst, a, "local", "powell", rule, seed=1)
print(trace.terminated_by, "after", trace.evaluations, "evaluations")

# ### The trajectory

for h in trace.history[:: max(1, len(trace.history) // 8)]:
    print(f"{h.eval_index:>7}  C_L={h.cost:.3e}  eps<={h.epsilon_bound:.3f}")

# ### Certificate and observables

V = a.circuit(trace.final_alpha)
x = prepare_state(a, trace.final_alpha)
cert = Certificate.from_report(evaluate_cost(inst, V, "local"), 20, 4, False, x, ["ZIII", "XXXX"], circuit_to_json(V))
print("certified eps:", round(cert.epsilon_upper, 4))
for o in cert.observables:
    print(o.word, "expectation", round(o.expectation, 4), "within", round(o.deviation_bound, 4))

print("actual eps:", round(trace_distance_pure(x, dense_solve_oracle(inst)), 4))
