r"""
Two measures and the time step
------------------------------
The linear equation under the raw noise measure Q carries a weight ||phi||^2
whose mean stays 1; reweighting Q-paths by it reproduces physical averages.
Halving the time step shows the weak order of the Euler scheme.
"""
from functools import partial

import numpy as np

from coherent_collapse import oscillator as osc
from coherent_collapse.sde_engine import observable_recorder, run_ensemble, weak_order_check

p = osc.OscillatorParams(omega=1.0, lam=0.5, n_max=24)
psi = osc.branch_superposition((0, 1.0), (1, 1), 24)
rec = observable_recorder({"P0": partial(osc.projection, n=0)})

#%%
qe = run_ensemble(psi, osc.build_linear_model(p), 1.0, 0.01, 22, 1000, rec, form="linear",
                  workers=2)
w = np.array([r.weights[-1] for r in qe])
print(f"E_Q[weight] = {w.mean():.3f} +- {w.std(ddof=1) / np.sqrt(len(w)):.3f}")

pe = run_ensemble(psi, osc.build_model(p), 1.0, 0.01, 21, 1000, rec, workers=2)
p_vac = np.mean([r["P0"][-1] for r in pe])
q_vac = np.mean(w * np.array([r["P0"][-1] for r in qe]))
print(f"P(vacuum) physical {p_vac:.3f}, reweighted {q_vac:.3f}")

#%%
# Weak order of Euler-Maruyama on <H>_T via nested time steps with shared
# noise.
rep = weak_order_check(osc.build_model(p), psi, osc.energy, 1.0, 101, 200,
                       [0.02, 0.01, 0.005, 0.0025], scheme="euler")
print(f"weak order exponent {rep.exponent:.2f} +- {rep.exponent_se:.2f}")
