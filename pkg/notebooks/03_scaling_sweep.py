# ## Time to solution against condition number and precision
#
# A reduced version of the scaling study: medians over seeded runs, a power
# fit in kappa and a linear fit against log(1/eps).

import numpy as np

from vqls.bench import BenchmarkConfig, fits, sweep_points

# ### Condition number

cfg = BenchmarkConfig.from_dict(
    {"sweep": "kappa", "values": [10, 20, 40], "family": "ising", "n": 4, "layers": 4, "epsilon": 0.1, "runs": 5}
)
points = sweep_points(cfg)
for p in points:
    print(f"kappa={p.sweep_value:>4}  median TTS={p.median:>9.0f}  success={p.success_rate:.1f}")
m, r2 = fits(cfg, points)["fit_power"]
print(f"TTS ~ kappa^{m:.2f}  (R2={r2:.3f})")

# ### Precision; each run is read off at every target

cfg = BenchmarkConfig.from_dict(
    {"sweep": "epsilon", "values": [0.2, 0.1, 0.05, 0.02], "family": "ising", "n": 4, "kappa": 10, "layers": 4, "runs": 5}
)
points = sweep_points(cfg)
print("medians:", np.array([p.median for p in points]))
slope, r2 = fits(cfg, points)["fit_log"]
print(f"TTS ~ {slope:.0f} log(1/eps) + const  (R2={r2:.3f})")
