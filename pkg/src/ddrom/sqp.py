"""Equality-constrained Gauss-Newton SQP for block-separable least squares.

Solves

    min_x  0.5 * sum_i || B_i r_i(x_i) ||^2   s.t.  sum_i c_i(x_i^gam) = 0

where each block ``i`` owns an (interior, interface) latent pair and only
the interface part enters the coupling constraint.  Every iteration solves
one block-arrow KKT system with Gauss-Newton Hessian blocks and takes a
damped step chosen by Armijo backtracking on the first-order optimality
norm.  The same loop serves the decomposed FOM (identity decoders) and all
ROM variants; blocks are callables, so the solver knows nothing about
Burgers or autoencoders.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError


@dataclass(frozen=True, eq=False)
class SqpBlock:
    """One subdomain's evaluators.

    ``residual(x_int, x_gam)`` returns the weighted residual and its two
    Jacobian blocks ``(Br, B@R_int, B@R_gam)``; ``constraint(x_gam)``
    returns this block's additive contribution to the coupling constraint
    and its Jacobian ``(value, jac)``.  Both must be side-effect-free.
    """

    n_int: int
    n_gam: int
    residual: object
    constraint: object


class SqpProblem:
    def __init__(self, blocks, n_mult: int):
        if not blocks:
            raise ValueError("need at least one block")
        if n_mult < 0:
            raise ValueError("multiplier dimension must be nonnegative")
        self.blocks = list(blocks)
        self.n_mult = n_mult
        self.offsets = []
        pos = 0
        for b in self.blocks:
            self.offsets.append(pos)
            pos += b.n_int + b.n_gam
        self.n_primal = pos

    def split(self, x):
        """Per-block (x_int, x_gam) views of the stacked vector."""
        out = []
        for off, b in zip(self.offsets, self.blocks):
            out.append((x[off:off + b.n_int],
                        x[off + b.n_int:off + b.n_int + b.n_gam]))
        return out


@dataclass(frozen=True)
class SqpConfig:
    tol: float = 1e-4
    max_iter: int = 15
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_halvings: int = 25
    reg_scale: float = 1e-12
    record_iterates: bool = True

    def __post_init__(self):
        if (self.tol <= 0 or self.max_iter < 1 or self.armijo_c1 <= 0
                or not 0 < self.backtrack_factor < 1 or self.max_halvings < 0):
            raise ValueError("invalid solver configuration")


@dataclass(eq=False)
class _BlockEval:
    Br: np.ndarray
    R_int: np.ndarray
    R_gam: np.ndarray
    con_val: np.ndarray
    con_jac: np.ndarray
    seconds: float


@dataclass(eq=False)
class SqpEval:
    """Gradients and cached block data at one (x, lam) point."""

    rho: np.ndarray                 # stacked Lagrangian gradient, n_primal
    con: np.ndarray                 # constraint value, n_mult
    blocks: list = field(repr=False, default_factory=list)
    block_max_seconds: float = 0.0
    block_sum_seconds: float = 0.0

    @property
    def optimality(self) -> np.ndarray:
        return np.concatenate([self.rho, self.con])

    @property
    def merit(self) -> float:
        return float(np.linalg.norm(self.optimality))

    @property
    def objective(self) -> float:
        return 0.5 * sum(float(b.Br @ b.Br) for b in self.blocks)


def eval_gradients(prob: SqpProblem, x: np.ndarray,
                   lam: np.ndarray) -> SqpEval:
    """First-order optimality pieces at ``(x, lam)`` (block-local work)."""
    rho = np.zeros(prob.n_primal)
    con = np.zeros(prob.n_mult)
    evals = []
    for i, (block, (xi, xg)) in enumerate(zip(prob.blocks, prob.split(x))):
        t0 = time.perf_counter()
        try:
            Br, R_int, R_gam = block.residual(xi, xg)
            cval, cjac = block.constraint(xg)
        except Exception as exc:
            raise RuntimeError(f"evaluation failed in block {i}") from exc
        dt = time.perf_counter() - t0
        cval = np.asarray(cval, dtype=float)
        cjac = np.atleast_2d(np.asarray(cjac, dtype=float))
        if cval.shape != (prob.n_mult,) or cjac.shape != (prob.n_mult,
                                                          block.n_gam):
            raise ValueError(f"block {i} constraint has inconsistent shape")
        off = prob.offsets[i]
        rho[off:off + block.n_int] = R_int.T @ Br
        rho[off + block.n_int:off + block.n_int + block.n_gam] = (
            R_gam.T @ Br + cjac.T @ lam)
        con += cval
        evals.append(_BlockEval(Br=Br, R_int=np.asarray(R_int, dtype=float),
                                R_gam=np.asarray(R_gam, dtype=float),
                                con_val=cval, con_jac=cjac, seconds=dt))
    return SqpEval(rho=rho, con=con, blocks=evals,
                   block_max_seconds=max(b.seconds for b in evals),
                   block_sum_seconds=sum(b.seconds for b in evals))


def _kkt_matrix(prob: SqpProblem, ev: SqpEval) -> np.ndarray:
    n, m = prob.n_primal, prob.n_mult
    K = np.zeros((n + m, n + m))
    for off, block, be in zip(prob.offsets, prob.blocks, ev.blocks):
        R = np.hstack([be.R_int, be.R_gam])
        w = block.n_int + block.n_gam
        K[off:off + w, off:off + w] = R.T @ R
        gs = off + block.n_int
        K[n:, gs:gs + block.n_gam] = be.con_jac
        K[gs:gs + block.n_gam, n:] = be.con_jac.T
    return K


def assemble_and_solve_kkt(prob: SqpProblem, ev: SqpEval,
                           reg_scale: float = 1e-12):
    """Solve the block-arrow saddle-point system for the SQP step.

    Dense LU with one round of iterative refinement; the back-substitution
    residual must come out below 1e-10 relative, otherwise the Hessian
    blocks are regularized by +delta*I once and the solve retried.
    """
    n = prob.n_primal
    K = _kkt_matrix(prob, ev)
    rhs = -ev.optimality
    rhs_norm = max(np.linalg.norm(rhs), 1e-300)

    def attempt(mat):
        lu, piv = scipy.linalg.lu_factor(mat)
        pivot = float(np.abs(np.diag(lu)).min())
        sol = scipy.linalg.lu_solve((lu, piv), rhs)
        if not np.all(np.isfinite(sol)):
            return sol, np.inf, pivot
        sol += scipy.linalg.lu_solve((lu, piv), rhs - mat @ sol)
        if not np.all(np.isfinite(sol)):
            return sol, np.inf, pivot
        res = np.linalg.norm(rhs - mat @ sol) / rhs_norm
        return sol, res, pivot

    try:
        sol, res, pivot = attempt(K)
        ok = res <= 1e-10
    except scipy.linalg.LinAlgError:
        sol, res, pivot, ok = None, np.inf, 0.0, False
    if not ok:
        delta = reg_scale * max(np.trace(K[:n, :n]), 1.0)
        warnings.warn(
            f"KKT solve needed +{delta:.3e} regularization "
            f"(smallest pivot {pivot:.3e})", RuntimeWarning, stacklevel=2)
        K[np.arange(n), np.arange(n)] += delta
        try:
            sol, res, pivot = attempt(K)
        except scipy.linalg.LinAlgError as exc:
            raise ConvergenceError(
                f"KKT matrix is singular (smallest pivot {pivot:.3e})"
            ) from exc
        if res > 1e-10:
            raise ConvergenceError(
                f"KKT back-substitution residual {res:.3e} exceeds 1e-10 "
                f"after regularization (smallest pivot {pivot:.3e})")
    return sol[:n], sol[n:]


@dataclass(eq=False)
class SqpResult:
    x: np.ndarray
    lam: np.ndarray
    converged: bool
    n_iter: int
    merit_history: list
    objective_history: list
    alpha_history: list
    failure_reason: str | None = None
    iterates: list = field(default_factory=list, repr=False)
    steps: list = field(default_factory=list, repr=False)
    timings: dict = field(default_factory=dict, repr=False)

    @property
    def final_merit(self) -> float:
        return self.merit_history[-1]


def iterate(prob: SqpProblem, x0, lam0=None,
            cfg: SqpConfig = SqpConfig()) -> SqpResult:
    """Run the SQP loop from ``(x0, lam0)`` until the optimality norm
    drops below ``cfg.tol`` or the iteration budget is exhausted."""
    x = np.array(x0, dtype=float)
    if x.shape != (prob.n_primal,):
        raise ValueError("initial point has wrong length")
    lam = (np.zeros(prob.n_mult) if lam0 is None
           else np.array(lam0, dtype=float))
    if lam.shape != (prob.n_mult,):
        raise ValueError("initial multiplier has wrong length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
        raise ValueError("initial point must be finite")

    ev = eval_gradients(prob, x, lam)
    merits = [ev.merit]
    objectives = [ev.objective]
    alphas = []
    iterates = [(x.copy(), lam.copy())] if cfg.record_iterates else []
    steps = []
    timings = {"block_max": [], "block_sum": [], "kkt": []}
    best = (ev.merit, x.copy(), lam.copy())
    failure = None

    n_iter = 0
    while merits[-1] >= cfg.tol and n_iter < cfg.max_iter:
        t_par = ev.block_max_seconds
        t_sum = ev.block_sum_seconds
        t0 = time.perf_counter()
        s, s_lam = assemble_and_solve_kkt(prob, ev, cfg.reg_scale)
        t_kkt = time.perf_counter() - t0

        alpha = 1.0
        accepted = None
        for _ in range(cfg.max_halvings + 1):
            trial = eval_gradients(prob, x + alpha * s, lam + alpha * s_lam)
            t_par += trial.block_max_seconds
            t_sum += trial.block_sum_seconds
            if trial.merit <= (1.0 - cfg.armijo_c1 * alpha) * merits[-1]:
                accepted = trial
                break
            alpha *= cfg.backtrack_factor
        timings["block_max"].append(t_par)
        timings["block_sum"].append(t_sum)
        timings["kkt"].append(t_kkt)
        if accepted is None:
            failure = "line_search"
            break

        x += alpha * s
        lam += alpha * s_lam
        ev = accepted
        n_iter += 1
        merits.append(ev.merit)
        objectives.append(ev.objective)
        alphas.append(alpha)
        if cfg.record_iterates:
            iterates.append((x.copy(), lam.copy()))
            steps.append((s.copy(), s_lam.copy()))
        if ev.merit < best[0]:
            best = (ev.merit, x.copy(), lam.copy())

    if failure is not None:
        _, x, lam = best
    return SqpResult(x=x, lam=lam, converged=bool(merits[-1] < cfg.tol)
                     and failure is None,
                     n_iter=n_iter, merit_history=merits,
                     objective_history=objectives, alpha_history=alphas,
                     failure_reason=failure, iterates=iterates, steps=steps,
                     timings=timings)


def convergence_diagnostics(prob: SqpProblem, result: SqpResult,
                            fd_step: float = 1e-6) -> dict:
    """Report-only convergence measures from a recorded run.

    ``eta`` estimates the Gauss-Newton inexactness per accepted step as
    ||(true Hessian - GN Hessian) s|| / ||F|| using finite-difference
    Hessian-vector products, so it costs two gradient sweeps per iteration:
    meant for small problems.  Never gates or alters a solve.
    """
    if len(result.iterates) < 2 or not result.steps:
        raise ValueError("diagnostics need a recorded run of >= 1 step")
    merits = result.merit_history
    ratios = [merits[k + 1] / merits[k] if merits[k] > 0 else np.nan
              for k in range(len(merits) - 1)]
    etas = []
    for (xk, lamk), (s, _) in zip(result.iterates, result.steps):
        ev = eval_gradients(prob, xk, lamk)
        h = fd_step / max(np.linalg.norm(s), 1e-300)
        plus = eval_gradients(prob, xk + h * s, lamk)
        minus = eval_gradients(prob, xk - h * s, lamk)
        Hs_true = (plus.rho - minus.rho) / (2.0 * h)
        Hs_gn = _kkt_matrix(prob, ev)[:prob.n_primal, :prob.n_primal] @ s
        denom = max(ev.merit, 1e-300)
        etas.append(float(np.linalg.norm(Hs_true - Hs_gn)) / denom)
    return {"merit": list(merits),
            "contraction": ratios,
            "eta": etas,
            "iterations": list(range(len(merits)))}
