"""Finite-difference full-order model of the steady 2-D Burgers equation.

The model lives on the rectangle ``[-1, 1] x [0, 0.05]`` with Dirichlet data
supplied by a closed-form exact solution parameterized by a shock position
``a`` and a steepness ``lam``.  A state is a vector of length ``2*nx*ny``
holding the ``u``-velocity block followed by the ``v``-velocity block; within
each block node ``(i, j)`` (1-based grid indices) sits at flat position
``(j-1)*nx + (i-1)``, i.e. rows of constant ``y`` are contiguous.

The discrete residual for the ``u`` block is

    r_u = u * (Bx u - b_ux) + v * (By u - b_uy) + Cdiff u + c_u

with central first differences ``Bx, By``, the scaled 5-point Laplacian
``Cdiff``, and boundary vectors built from the exact solution on ghost
points; the ``v`` block is analogous.  The analytic Jacobian is assembled
exactly (Hadamard products contribute diagonal cross-coupling between the
``u`` and ``v`` blocks).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SingularityError

X_MIN, X_MAX = -1.0, 1.0
Y_MIN, Y_MAX = 0.0, 0.05

#: below this magnitude psi is treated as singular; analytically psi > 0
#: everywhere on the domain for parameters in the sampled box, so the guard
#: only catches out-of-range misuse.
PSI_GUARD = 1e-300

A_RANGE = (1.0, 1.0e4)
LAM_RANGE = (5.0, 25.0)


@dataclass(frozen=True)
class ParameterPoint:
    """Shock parameters ``(a, lam)`` of the exact solution."""

    a: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.lam)):
            raise ValueError("parameters must be finite")
        if not self.in_domain:
            warnings.warn(
                f"parameter ({self.a}, {self.lam}) lies outside the sampled "
                f"box {A_RANGE} x {LAM_RANGE}",
                stacklevel=3,
            )

    @property
    def in_domain(self) -> bool:
        return (A_RANGE[0] <= self.a <= A_RANGE[1]
                and LAM_RANGE[0] <= self.lam <= LAM_RANGE[1])


@dataclass(frozen=True)
class Grid2D:
    """Uniform interior grid: ``nx`` by ``ny`` nodes, viscosity ``nu``."""

    nx: int
    ny: int
    nu: float = 0.1

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need nx >= 2 and ny >= 2")
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")

    @property
    def hx(self) -> float:
        return (X_MAX - X_MIN) / (self.nx + 1)

    @property
    def hy(self) -> float:
        return (Y_MAX - Y_MIN) / (self.ny + 1)

    @property
    def x(self) -> np.ndarray:
        """Interior x-coordinates ``x_i = -1 + i*hx``, ``i = 1..nx``."""
        return X_MIN + self.hx * np.arange(1, self.nx + 1)

    @property
    def y(self) -> np.ndarray:
        """Interior y-coordinates ``y_j = j*hy``, ``j = 1..ny``."""
        return self.hy * np.arange(1, self.ny + 1)

    @property
    def nnode(self) -> int:
        return self.nx * self.ny

    @property
    def ndof(self) -> int:
        """State length: u and v at every interior node."""
        return 2 * self.nx * self.ny


def exact_solution(p: ParameterPoint, x, y, nu: float = 0.1):
    """Closed-form ``(u, v)`` at coordinates ``(x, y)`` (broadcastable).

    Raises :class:`SingularityError` if the denominator ``psi`` falls below
    ``PSI_GUARD`` anywhere.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = p.lam
    ep = np.exp(lam * (x - 1.0))
    em = np.exp(-lam * (x - 1.0))
    cy = np.cos(lam * y)
    sy = np.sin(lam * y)
    psi = p.a * (1.0 + x) + (ep + em) * cy
    if np.any(np.abs(psi) < PSI_GUARD):
        raise SingularityError("psi vanishes at an evaluation point")
    u = -2.0 * nu * (p.a + lam * (ep - em) * cy) / psi
    v = 2.0 * nu * lam * (ep + em) * sy / psi
    return u, v


def exact_state(grid: Grid2D, p: ParameterPoint) -> np.ndarray:
    """Exact solution sampled on the interior grid, in state ordering."""
    X, Y = np.meshgrid(grid.x, grid.y)  # shape (ny, nx); [j, i] layout
    u, v = exact_solution(p, X, Y, nu=grid.nu)
    return np.concatenate([u.ravel(), v.ravel()])


def split_uv(grid: Grid2D, s: np.ndarray):
    """View a state vector as its ``(u, v)`` halves."""
    n = grid.nnode
    if s.shape != (2 * n,):
        raise ValueError(f"state must have shape ({2 * n},), got {s.shape}")
    return s[:n], s[n:]


@dataclass(frozen=True, eq=False)
class FomOperators:
    """Immutable discrete operators and boundary vectors for one ``(grid, p)``."""

    grid: Grid2D
    param: ParameterPoint
    Bx: sp.csr_matrix = field(repr=False)
    By: sp.csr_matrix = field(repr=False)
    Cdiff: sp.csr_matrix = field(repr=False)
    bux: np.ndarray = field(repr=False)
    buy: np.ndarray = field(repr=False)
    cu: np.ndarray = field(repr=False)
    bvx: np.ndarray = field(repr=False)
    bvy: np.ndarray = field(repr=False)
    cv: np.ndarray = field(repr=False)


def _first_difference(n: int) -> sp.csr_matrix:
    """Tridiagonal (-1, 0, +1) matrix of order n."""
    e = np.ones(n - 1)
    return sp.diags([-e, e], [-1, 1], format="csr")


def _second_difference(n: int) -> sp.csr_matrix:
    """Tridiagonal (1, -2, 1) matrix of order n."""
    e = np.ones(n)
    return sp.diags([e[:-1], -2.0 * e, e[:-1]], [-1, 0, 1], format="csr")


def assemble(grid: Grid2D, p: ParameterPoint) -> FomOperators:
    """Build the sparse operators and exact-solution boundary vectors."""
    nx, ny, nu = grid.nx, grid.ny, grid.nu
    hx, hy = grid.hx, grid.hy
    n = grid.nnode

    Bx = (-1.0 / (2.0 * hx)) * sp.kron(sp.identity(ny), _first_difference(nx),
                                       format="csr")
    By = (-1.0 / (2.0 * hy)) * sp.kron(_first_difference(ny), sp.identity(nx),
                                       format="csr")
    Cdiff = ((nu / hx**2) * sp.kron(sp.identity(ny), _second_difference(nx))
             + (nu / hy**2) * sp.kron(_second_difference(ny),
                                      sp.identity(nx))).tocsr()

    # Ghost values of the exact solution just outside each edge.
    uL, vL = exact_solution(p, X_MIN, grid.y, nu=nu)
    uR, vR = exact_solution(p, X_MAX, grid.y, nu=nu)
    uB, vB = exact_solution(p, grid.x, Y_MIN, nu=nu)
    uT, vT = exact_solution(p, grid.x, Y_MAX, nu=nu)

    left = np.arange(ny) * nx          # flat positions with i = 1
    right = left + (nx - 1)            # i = nx
    bottom = np.arange(nx)             # j = 1
    top = (ny - 1) * nx + np.arange(nx)  # j = ny

    def edge_vectors(gL, gR, gB, gT):
        exl = np.zeros(n); exl[left] = gL
        exr = np.zeros(n); exr[right] = gR
        eyb = np.zeros(n); eyb[bottom] = gB
        eyt = np.zeros(n); eyt[top] = gT
        bx = (-1.0 / (2.0 * hx)) * (exl - exr)
        by = (-1.0 / (2.0 * hy)) * (eyb - eyt)
        c = (nu / hx**2) * (exl + exr) + (nu / hy**2) * (eyb + eyt)
        return bx, by, c

    bux, buy, cu = edge_vectors(uL, uR, uB, uT)
    bvx, bvy, cv = edge_vectors(vL, vR, vB, vT)

    return FomOperators(grid=grid, param=p, Bx=Bx, By=By, Cdiff=Cdiff,
                        bux=bux, buy=buy, cu=cu, bvx=bvx, bvy=bvy, cv=cv)


def residual(ops: FomOperators, s: np.ndarray) -> np.ndarray:
    """Discrete residual ``(r_u; r_v)`` at state ``s``."""
    u, v = split_uv(ops.grid, s)
    ru = (u * (ops.Bx @ u - ops.bux) + v * (ops.By @ u - ops.buy)
          + ops.Cdiff @ u + ops.cu)
    rv = (u * (ops.Bx @ v - ops.bvx) + v * (ops.By @ v - ops.bvy)
          + ops.Cdiff @ v + ops.cv)
    return np.concatenate([ru, rv])


def jacobian(ops: FomOperators, s: np.ndarray) -> sp.csr_matrix:
    """Analytic Jacobian of :func:`residual` at ``s`` (sparse)."""
    u, v = split_uv(ops.grid, s)
    Du = sp.diags(u)
    Dv = sp.diags(v)
    Juu = (sp.diags(ops.Bx @ u - ops.bux) + Du @ ops.Bx + Dv @ ops.By
           + ops.Cdiff)
    Juv = sp.diags(ops.By @ u - ops.buy)
    Jvu = sp.diags(ops.Bx @ v - ops.bvx)
    Jvv = (Du @ ops.Bx + sp.diags(ops.By @ v - ops.bvy) + Dv @ ops.By
           + ops.Cdiff)
    return sp.bmat([[Juu, Juv], [Jvu, Jvv]], format="csr")


def structural_pattern(grid: Grid2D) -> sp.csr_matrix:
    """State-independent Jacobian sparsity pattern (boolean CSR).

    The pattern is the union over all states of the analytic Jacobian's
    support: 5-point coupling within each velocity block plus diagonal
    cross-coupling between blocks.
    """
    nx, ny = grid.nx, grid.ny

    def absval(m):
        m = m.tocsr(copy=True)
        m.data = np.abs(m.data)
        return m

    # summing |entries| keeps the union support (signed sums can cancel)
    block = (sp.kron(sp.identity(ny), absval(_first_difference(nx)))
             + sp.kron(absval(_first_difference(ny)), sp.identity(nx))
             + sp.kron(sp.identity(ny), absval(_second_difference(nx)))
             + sp.kron(absval(_second_difference(ny)), sp.identity(nx))
             + sp.identity(nx * ny))
    eye = sp.identity(nx * ny)
    pat = sp.bmat([[block, eye], [eye, block]], format="csr")
    pat.data = np.ones_like(pat.data)
    return pat.astype(bool)


@dataclass
class NewtonTrace:
    """Iteration history of a monolithic Newton solve."""

    iterates: list
    residuals: list
    norms: list
    alphas: list
    converged: bool = False

    @property
    def niter(self) -> int:
        return len(self.alphas)


def solve_monolithic(grid: Grid2D, p: ParameterPoint, init=None,
                     tol: float = 1e-8, max_iter: int = 25):
    """Damped Newton solve of the full-order model.

    Returns ``(state, NewtonTrace)``.  The trace keeps every iterate and its
    residual vector so downstream snapshot harvesting can reuse them.
    Raises :class:`ConvergenceError` on stagnation or iteration exhaustion.
    """
    ops = assemble(grid, p)
    if init is None:
        s = np.zeros(grid.ndof)
    else:
        s = np.array(init, dtype=float, copy=True)
        if s.shape != (grid.ndof,):
            raise ValueError("initial state has wrong length")
        if not np.all(np.isfinite(s)):
            raise ValueError("initial state contains non-finite entries")

    trace = NewtonTrace(iterates=[], residuals=[], norms=[], alphas=[])
    r = residual(ops, s)
    rnorm = float(np.linalg.norm(r))
    trace.iterates.append(s.copy())
    trace.residuals.append(r.copy())
    trace.norms.append(rnorm)

    for _ in range(max_iter):
        if rnorm <= tol:
            trace.converged = True
            return s, trace
        J = jacobian(ops, s)
        try:
            lu = spla.splu(J.tocsc())
        except RuntimeError as exc:  # pragma: no cover - defensive
            raise ConvergenceError(f"singular Jacobian: {exc}", trace) from exc
        d = lu.solve(-r)
        alpha = 1.0
        for _halving in range(21):
            s_new = s + alpha * d
            r_new = residual(ops, s_new)
            rnorm_new = float(np.linalg.norm(r_new))
            if rnorm_new < rnorm:
                break
            alpha *= 0.5
        else:
            raise ConvergenceError(
                f"Newton stagnated at |r| = {rnorm:.3e}", trace)
        s, r, rnorm = s_new, r_new, rnorm_new
        trace.alphas.append(alpha)
        trace.iterates.append(s.copy())
        trace.residuals.append(r.copy())
        trace.norms.append(rnorm)

    if rnorm <= tol:
        trace.converged = True
        return s, trace
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations (|r| = {rnorm:.3e})", trace)
