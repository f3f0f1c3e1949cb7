r"""
A classical current makes a coherent field
------------------------------------------
A current pulse coupled linearly to the field displaces the vacuum.  The
eigenvalue follows from one integral; the state from a product of short
displacements.  Two opposite pulses in superposition are then separated by
the field reduction.
"""
import numpy as np

from coherent_collapse import fermion_induced as fi
from coherent_collapse import field_lattice as fl
from coherent_collapse import fock

c = fl.LatticeConfig(L=2, mass=1.0, lam=0.0, n_max=24, modes=(0,))
pulse = fi.CurrentPulse(envelope="gaussian", center=1.5, width=0.5, t_end=3.0)
alpha = fi.alpha_of(pulse, 0, pulse.t_end, c.omegas[0])
print("unit pulse alpha =", alpha)

#%%
# Rescale to |alpha| = 1.5 and evolve.
pulse = pulse.scaled(1.5 / abs(alpha))
alpha = fi.alpha_of(pulse, 0, pulse.t_end, c.omegas[0])
psi = fi.evolve_with_current(pulse, c, pulse.t_end, 0.01)
print("|alpha| =", abs(alpha))
print("||(a - alpha) psi|| =", fi.coherence_residual(psi, c, 0, alpha))
print("fidelity with |alpha> =", fock.fidelity(psi, fock.coherent_state(alpha, 24)))

#%%
# Superpose the fields of two opposite pulses and switch on reduction.
a = pulse.scaled(2.0 / 1.5)
b = a.scaled(-1.0)
cr = c.replace(n_max=32)
res = fi.induced_reduction_demo(a, b, (1, 1), 1.0, cr, 4.0, 0.01, 60, 3, workers=2)
print("branch frequencies", res.frequencies, "+-", res.standard_errors.round(3),
      "unreduced", res.unreduced)
