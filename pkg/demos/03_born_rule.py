r"""
Outcome frequencies
-------------------
Classify many final states by fidelity to the decayed branch coherent states
and compare the counts with the squared initial weights.  A smaller branch
separation (alpha = 4) keeps the run short.
"""
import math

from coherent_collapse import oscillator as osc

p = osc.OscillatorParams(omega=1.0, lam=1.0, n_max=40)

for weights in [(1, 1), (math.sqrt(0.25), math.sqrt(0.75)), (1, 0)]:
    res = osc.born_probability_experiment(p, (0, 4), weights, 150, 7, T=1.0, dt=0.0025,
                                          workers=2)
    print(f"weights {tuple(round(w, 3) for w in weights)}: "
          f"expected {res.expected.round(3)}, observed {res.frequencies.round(3)}, "
          f"z {res.z_scores().round(2)}, unclassified {res.unclassified}")

#%%
# The same tabulation applies to an ensemble you ran yourself, for example at
# a different horizon.
from coherent_collapse.sde_engine import run_ensemble

psi0 = osc.branch_superposition((0, 4), (1, 1), p.n_max)
ens = run_ensemble(psi0, osc.build_model(p), 0.1, 0.0025, 3, 100, None, workers=2)
early = osc.tabulate_branches(ens, p, (0, 4), (1, 1), 0.1, 0.0025)
print("after t = 0.1 only", 100 - early.unclassified, "paths have settled")
