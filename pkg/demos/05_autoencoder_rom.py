"""Train the nonlinear (autoencoder-based) DD ROM and compare with POD.

The nonlinear ROM replaces each POD basis with a shallow sparse
autoencoder: one masked encoder layer, one masked decoder layer, Swish
activations, trained with Adam on the same snapshots.  The sparsity
mask limits every output to a small band of hidden units, which is what
later lets hyper-reduction evaluate just a few decoder rows.

Training here is deliberately short so the demo finishes in about a
minute; push `epochs` up for better reconstruction.

Run:  python demos/05_autoencoder_rom.py
"""

import time

import numpy as np

from ddrom import Grid2D, ParameterPoint, build_partition, solve_monolithic
from ddrom import snapshots
from ddrom.autoencoder import TrainConfig
from ddrom.driver import build_lsrom, build_nmrom, fit_initializer, solve_rom
from ddrom.sqp import SqpConfig

grid = Grid2D(nx=40, ny=8)
part = build_partition(grid, 2, 1)
params = snapshots.sample_grid(8, 6, a_range=(100.0, 8000.0),
                               lam_range=(8.0, 22.0))
snap = snapshots.generate(grid, params, part)

p = ParameterPoint(3777.0, 14.3)
fom_state, _ = solve_monolithic(grid, p)

cfg = SqpConfig(tol=1e-6, max_iter=30)

# Linear baseline at the same latent dimensions.
ls = fit_initializer(build_lsrom(part, snap, 6, 4, "wfpc", n_c=4), snap)
ls_sol, _ = solve_rom(ls, p, cfg, fom_state=fom_state, fom_seconds=np.nan)
print(f"linear ROM   (6,4): error = {ls_sol.error:.3e}")

# Nonlinear ROM: train 2 interior + 2 interface nets.
t0 = time.perf_counter()
nm = build_nmrom(part, snap, 6, 4, "wfpc", n_c=4,
                 train_cfg=TrainConfig(epochs=400, seed=3))
nm = fit_initializer(nm, snap)
print(f"trained 4 nets in {time.perf_counter() - t0:.1f} s")

nm_sol, rec = solve_rom(nm, p, cfg, fom_state=fom_state, fom_seconds=np.nan)
print(f"autoencoder ROM (6,4): error = {nm_sol.error:.3e}  "
      f"iters = {rec.n_iter}  converged = {rec.converged}")

# Decoder quality on a training snapshot: encode/decode round trip.
net = nm.interior_maps[0]
col = snap.interior[0][:, 10]
rt = net.decode(net.encode(col))
print(f"interior net round-trip error on a training column: "
      f"{np.linalg.norm(rt - col) / np.linalg.norm(col):.3e}")
