# %% [markdown]
# # Choosing k without the true solution, and why LSQR speeds up
#
# With no reference solution, k is taken at the corner of the L-curve of
# ``(||A x_{L,k} - b||, ||L x_{L,k}||)``.  We also watch the condition number of
# the projected regularizer shrink as the RSVD subspace grows.

# %%
import numpy as np

from mtrsvd import (add_noise, build_regularizer, derive_seed, generate, lcurve_corner,
                    projected_condition_number, rsvd, semiconvergence_scan)

n = 256
truth = add_noise(generate("shaw", n), 1e-2, seed=2)
L = build_regularizer("L1", n)
rep = semiconvergence_scan(truth, L, q=9, k_max=14, seed=derive_seed(2, 1))
corner = lcurve_corner(np.column_stack([rep.residuals, rep.seminorms]))
print(f"error-optimal k0 = {rep.k0}, L-curve corner k = {rep.ks[corner]}")

# %%
r = rsvd(truth.A, 40, 4, seed=5)
for kind in ("L1", "L3"):
    Lk = build_regularizer(kind, n)
    kappas = [projected_condition_number(Lk, r.Vtilde[:, :k]) for k in (1, 5, 10, 20, 40)]
    print(kind, " ".join(f"{c:8.2f}" for c in kappas))
