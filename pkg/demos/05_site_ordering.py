r"""
Does the order of site updates matter?
--------------------------------------
Within one time step the site increments can be applied together or one
after another.  With identical noise per (path, step, site), the difference
between policies in E[<H>_T] should carry no lambda^2 term.
"""
from coherent_collapse import field_lattice as fl
from coherent_collapse import fock

c = fl.LatticeConfig(L=2, mass=1.0, n_max=8, modes=(0, 1))
psi = fock.superpose([fl.lattice_coherent(c, (0, 0)), fl.lattice_coherent(c, (1.2, 0.8))], [1, 1])

rep = fl.foliation_comparison(c, psi, "H", 1.0, 0.02, [0.1, 0.2, 0.4], 5, 60)
for lam, d, se in zip(rep.lams, rep.deltas, rep.delta_ses):
    print(f"lambda={lam:.2f}  delta={d:.2e} +- {se:.2e}")
print("indistinguishable from zero:", rep.indistinguishable_from_zero, " passed:", rep.passed)

#%%
# On one site every ordering is the same update, bit for bit.
c1 = fl.LatticeConfig(L=1, mass=1.0, n_max=8, modes=(0,))
ctl = fl.foliation_comparison(c1, fl.lattice_coherent(c1, (1.0,)), "H", 1.0, 0.02,
                              [0.1, 0.2, 0.4], 5, 10)
print("single-site deltas:", ctl.deltas)
