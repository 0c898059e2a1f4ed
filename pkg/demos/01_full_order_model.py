"""
Solving the full-order 2-D steady Burgers problem
=================================================

The model problem is the steady viscous Burgers system on the rectangle
[-1, 1] x [0, 0.05], discretized with centered finite differences on a
uniform grid.  Boundary data come from an exact solution parameterized
by (a, lambda), which makes it easy to check the discretization error
and to generate as many test problems as we like.

Run:  python demos/01_full_order_model.py
"""

import numpy as np

from ddrom import Grid2D, ParameterPoint, exact_state, solve_monolithic

# A modest grid: nx * ny interior nodes per velocity component, so the
# nonlinear system has 2 * nx * ny unknowns (u stacked over v).
grid = Grid2D(nx=60, ny=8, nu=0.1)
print(f"grid: {grid.nx} x {grid.ny} interior nodes, {grid.ndof} unknowns")

p = ParameterPoint(a=5000.0, lam=15.0)

# Newton's method with a backtracking line search.  The trace records
# every iterate, so we can watch the quadratic convergence kick in.
state, trace = solve_monolithic(grid, p)
print(f"converged: {trace.converged} in {len(trace.norms)} steps")
for k, (rn, al) in enumerate(zip(trace.norms, trace.alphas)):
    print(f"  step {k}: |r| = {rn:.3e}  alpha = {al:.2f}")

# The manufactured solution lets us measure the discretization error
# directly -- it should shrink as the grid is refined (demo 02 checks
# the rate).
u_exact = exact_state(grid, p)
err = np.linalg.norm(state - u_exact) / np.linalg.norm(u_exact)
print(f"relative discretization error vs exact solution: {err:.3e}")

# Sharpness of the solution profile is controlled by lambda; the a
# parameter scales the overall amplitude through the boundary data.
for a, lam in [(1.0, 5.0), (100.0, 15.0), (1e4, 25.0)]:
    s, tr = solve_monolithic(grid, ParameterPoint(a, lam))
    print(f"(a={a:>8.0f}, lam={lam:>4.1f}) -> max|u| = {np.abs(s).max():9.3f}"
          f"  newton steps = {len(tr.norms)}")
