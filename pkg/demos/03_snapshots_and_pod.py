# %% [markdown]
# # Snapshot generation and POD bases
#
# Reduced-order models are trained offline on snapshots: full-order
# solves collected over a grid of (a, lambda) parameter values and
# restricted to each subdomain's interior, interface, and port index
# sets.  Proper orthogonal decomposition (POD) of those restricted
# blocks gives the linear trial bases used by the linear ROM and the
# normalization data used by the nonlinear one.

# %%
import numpy as np

from ddrom import Grid2D, build_partition, pod
from ddrom import snapshots

grid = Grid2D(nx=40, ny=8)
part = build_partition(grid, 2, 1)
params = snapshots.sample_grid(6, 5, a_range=(100.0, 5000.0),
                               lam_range=(8.0, 20.0))
snap = snapshots.generate(grid, params, part)
print(f"{snap.states.shape[1]} snapshot columns, {len(snap.failures)} failed solves")
print(f"newton iterations per solve: min {min(snap.newton_iters)}, "
      f"max {max(snap.newton_iters)}")

# %% [markdown]
# Singular values of the interior snapshot block decay fast -- a handful
# of modes capture nearly all of the snapshot energy, which is what makes
# a low-dimensional linear ROM viable here.

# %%
basis = pod(snap.interior[0], tol=1e-8)
print(f"subdomain 0 interior: {basis.n} modes kept at tol 1e-8")
lead = basis.sigma[:10] / basis.sigma[0]
print("leading normalized singular values:")
print("  " + "  ".join(f"{s:.2e}" for s in lead))

# %% [markdown]
# The projection error of the snapshot matrix onto the first n modes
# equals the discarded singular-value energy; truncating at a fixed n
# trades dimension against accuracy.

# %%
X = snap.interior[0]
for n in (2, 4, 8, 12):
    b = pod(X, fixed_n=n)
    tail = np.linalg.norm(X - b.Phi @ (b.Phi.T @ X)) / np.linalg.norm(X)
    print(f"  n = {n:2d}: relative projection tail = {tail:.3e}")

# %% [markdown]
# Residual snapshots (Newton-iterate residuals recorded during the same
# solves) feed the gappy-POD hyper-reduction basis later on.

# %%
for i, R in snap.residual.items():
    print(f"subdomain {i}: residual snapshot block {R.shape[0]} x {R.shape[1]}")
