r"""
Oscillator reduction trajectories
---------------------------------
Five paths started from the equal superposition of |0> and |alpha=8>.  Each
path picks one branch: the energy drops to the vacuum value or follows the
slowly decaying coherent branch, while the variance of ``a`` collapses on a
time scale of about 1 / (lambda^2 <N>_0).
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from coherent_collapse import oscillator as osc
from coherent_collapse.sde_engine import run_ensemble

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

p = osc.OscillatorParams(omega=1.0, lam=0.5, n_max=128)
psi0 = osc.branch_superposition((0, 8), (1, 1), p.n_max)
tau, rate = osc.reduction_timescale_physical(osc.number(psi0), p.lam, p.omega)
print(f"reduction time ~ {tau:.3f}, initial energy loss rate {rate:.1f}")

#%%
# Run the paths.  Seeds are counter based, so trajectory k is the same no
# matter how many workers share the job.
ens = run_ensemble(psi0, osc.build_model(p), 8.0, 0.01, 1, 5, osc.standard_recorder(p))
t = ens[0].times

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for r in ens:
    ax1.plot(t, r["H"], lw=1)
    ax2.plot(t, r["Va"], lw=1)
ax1.plot(t, 0.5 + 64 * np.exp(-p.lam ** 2 * t), "k--", lw=0.8, label="coherent branch")
ax1.set(xlabel="t", ylabel="<H>", title="energy")
ax1.legend()
ax2.set(xlabel="t", ylabel="V[a]", title="variance of a", xlim=(0, 1))
fig.tight_layout()
fig.savefig(out / "oscillator_paths.png", dpi=120)
print("final energies:", [round(float(r["H"][-1]), 2) for r in ens])

#%%
# The audits check the ensemble laws pathwise.  Five paths are too few for a
# Born-rule count but plenty for the energy law.
for rep in (osc.energy_drift_audit(ens, p.omega, p.lam),
            osc.variance_supermartingale_audit(ens, p.lam),
            osc.projection_martingale_audit(ens, 0, p.lam)):
    print(rep.text().splitlines()[0])
