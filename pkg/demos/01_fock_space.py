r"""
Truncated Fock space
--------------------
States live in a truncated number basis.  This walk-through builds coherent
states, shows how truncation error is measured, and forms the two-branch
superposition used throughout the oscillator demos.
"""
import numpy as np

from coherent_collapse import fock

#%%
# A coherent state is an eigenvector of the annihilation operator.  With
# ``n_max`` levels the eigen-relation only fails on the top level, and the
# exact size of that failure is available in closed form.
alpha = 2.0
for n_max in (12, 20, 32):
    psi = fock.coherent_state(alpha, n_max)
    alg = fock.make_algebra(n_max)
    resid = np.linalg.norm(alg.a @ psi.amplitudes - alpha * psi.amplitudes)
    print(f"n_max={n_max:3d}  residual={resid:.2e}  "
          f"tail bound={fock.coherent_residual_bound(alpha, n_max):.2e}  "
          f"top-level mass={psi.leakage():.1e}")

#%%
# Asking for a state too large for the basis is refused rather than silently
# truncated.
try:
    fock.coherent_state(8.0, 64)
except fock.TruncationRiskError as exc:
    print("refused:", exc)

#%%
# The equal superposition of |0> and |alpha=8> at n_max = 128.  The energy
# sits halfway between the branches and the variance of ``a`` is large.
psi = fock.superpose([fock.coherent_state(0, 128), fock.coherent_state(8, 128)], [1, 1])
alg = fock.make_algebra(128)
print("<N> =", fock.expect(psi, alg.number).real)
print("<H> =", fock.expect(psi, alg.hamiltonian).real)
print("V[a] =", fock.variance(psi, alg.a))
print("P(vacuum) =", abs(psi.amplitudes[0]) ** 2)

#%%
# Several modes are stored as one flattened tensor product.
two = fock.product_state([fock.coherent_state(0.5, 8), fock.basis_state((1,), (8,))])
print(two.dims, two.is_normalized)
