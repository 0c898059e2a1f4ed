"""Assembles partitions, reduction maps, HR operators and the SQP solver
into runnable decomposed ROMs.

A :class:`RomInstance` bundles per-subdomain interior and interface maps
(POD bases or autoencoders behind one decode/encode/jacobian duck type)
with one of two coupling modes:

* ``wfpc`` -- weak FOM-port constraints: the decoded interface traces are
  tied together through the FOM port constraint matrix compressed by a
  seeded Gaussian test matrix C;
* ``srpc`` -- strong ROM-port constraints: interface maps are assembled
  from shared port maps and the constraint acts linearly on latent blocks.

The module also houses RBF initialization, the relative state error used
throughout the benchmarks, sampled residual-bound diagnostics, and the
sweep harness that writes records.csv / pareto.csv.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import RBFInterpolator

from .autoencoder import TrainConfig, assemble_srpc_interface, build_mask, \
    train
from .burgers import FomOperators, Grid2D, ParameterPoint, assemble, \
    solve_monolithic
from .errors import ConvergenceError
from .hyper import extract_subnet, greedy_sample, hr_collocation, hr_gappy, \
    hr_none, hr_rows_for_subdomain
from .partition import ConstraintMatrix, Partition, RestrictedResidual, \
    assemble_fom_constraints, assemble_rom_constraints
from .pod import LinearMap, pod, port_interface_basis
from .sqp import SqpBlock, SqpConfig, SqpProblem, SqpResult, eval_gradients, \
    iterate


def port_latent_dims(port_table, n_request: int) -> dict:
    """Per-port latent dims: the requested size, capped below the port
    size and floored at one."""
    return {p.index: max(min(p.size - 1, n_request), 1)
            for p in port_table.ports}


def wfpc_test_matrix(n_c: int, n_rows: int, seed: int) -> np.ndarray:
    """Seeded Gaussian compression C of the FOM port constraints."""
    if not 1 <= n_c <= n_rows:
        raise ValueError("n_c must lie in [1, number of FOM constraints]")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_c, n_rows)) / np.sqrt(n_c)


@dataclass(eq=False)
class RbfInitializer:
    """Thin-plate-spline interpolant of latent coordinates over the
    parameter box, fitted on unit-square-normalized parameters."""

    params: np.ndarray                 # n_mu x 2, raw (a, lam)
    latents: np.ndarray = field(repr=False)   # n_mu x n_D
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)
    _rbf: RBFInterpolator = field(repr=False, default=None)

    @classmethod
    def fit(cls, params, latents):
        pts = np.asarray([[p.a, p.lam] for p in params], dtype=float)
        latents = np.asarray(latents, dtype=float)
        if pts.shape[0] != latents.shape[0] or pts.shape[0] < 3:
            raise ValueError("need >= 3 matching parameter/latent rows")
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        rbf = RBFInterpolator((pts - lo) / span, latents,
                              kernel="thin_plate_spline")
        return cls(params=pts, latents=latents, lo=lo, hi=hi, _rbf=rbf)

    def query(self, p: ParameterPoint) -> np.ndarray:
        q = np.array([p.a, p.lam], dtype=float)
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        qn = (q - self.lo) / span
        if np.any(qn < -0.1) or np.any(qn > 1.1):
            warnings.warn(
                f"initializing far outside the training box at {q}",
                RuntimeWarning, stacklevel=2)
        return self._rbf(qn[None, :])[0]


@dataclass(eq=False)
class RomInstance:
    """Everything needed to evaluate one decomposed ROM configuration."""

    partition: Partition
    interior_maps: list = field(repr=False)
    interface_maps: list = field(repr=False)
    constraint_mode: str = "wfpc"
    fom_constraints: ConstraintMatrix = field(repr=False, default=None)
    wfpc_C: np.ndarray | None = field(repr=False, default=None)
    rom_constraints: ConstraintMatrix | None = field(repr=False,
                                                     default=None)
    hr: list | None = field(repr=False, default=None)
    initializer: RbfInitializer | None = field(repr=False, default=None)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        part = self.partition
        n = len(part.subdomains)
        if len(self.interior_maps) != n or len(self.interface_maps) != n:
            raise ValueError("one interior and one interface map per "
                             "subdomain required")
        for i, sub in enumerate(part.subdomains):
            if self.interior_maps[i].ambient_dim != sub.n_interior:
                raise ValueError(f"interior map {i} has wrong ambient dim")
            if self.interface_maps[i].ambient_dim != sub.n_interface:
                raise ValueError(f"interface map {i} has wrong ambient dim")
        if self.constraint_mode not in ("wfpc", "srpc"):
            raise ValueError("constraint mode must be 'wfpc' or 'srpc'")
        if self.fom_constraints is None:
            self.fom_constraints = assemble_fom_constraints(part.ports)
        if self.constraint_mode == "wfpc" and self.wfpc_C is None:
            raise ValueError("wfpc mode needs a test matrix C")
        if self.constraint_mode == "srpc" and self.rom_constraints is None:
            raise ValueError("srpc mode needs assembled ROM constraints")

    @property
    def n_mult(self) -> int:
        if self.constraint_mode == "wfpc":
            return self.wfpc_C.shape[0]
        return self.rom_constraints.n_rows

    @property
    def latent_layout(self):
        """(n_int, n_gam) per subdomain, in SQP stacking order."""
        return [(m.latent_dim, g.latent_dim)
                for m, g in zip(self.interior_maps, self.interface_maps)]

    def split_latent(self, x: np.ndarray):
        out, off = [], 0
        for ni, ng in self.latent_layout:
            out.append((x[off:off + ni], x[off + ni:off + ni + ng]))
            off += ni + ng
        return out

    def decode(self, x: np.ndarray):
        """Full per-subdomain decoded states [(x_int, x_gam), ...]."""
        return [(self.interior_maps[i].decode(xi),
                 self.interface_maps[i].decode(xg))
                for i, (xi, xg) in enumerate(self.split_latent(x))]


# -- builders ------------------------------------------------------------


def build_dd_fom(partition: Partition) -> RomInstance:
    """Identity maps, B = I, C = I: the decomposed FOM as a ROM instance."""
    A = assemble_fom_constraints(partition.ports)
    return RomInstance(
        partition=partition,
        interior_maps=[LinearMap(np.eye(s.n_interior))
                       for s in partition.subdomains],
        interface_maps=[LinearMap(np.eye(s.n_interface))
                        for s in partition.subdomains],
        constraint_mode="wfpc", fom_constraints=A,
        wfpc_C=np.eye(A.n_rows),
        provenance={"rom": "dd-fom", "constraint": "wfpc", "hr": "none"})


def default_n_c(part, n_gam: int) -> int:
    """Twice the SRPC constraint count at the same interface dims, capped
    at the FOM constraint count."""
    n_rows = assemble_fom_constraints(part.ports).n_rows
    dims = port_latent_dims(part.ports, n_gam)
    srpc_rows = sum((len(p.members) - 1) * dims[p.index]
                    for p in part.ports.ports)
    return min(max(2 * srpc_rows, 1), n_rows)


def _wfpc_matrix_for(part, n_gam, n_c, seed):
    A = assemble_fom_constraints(part.ports)
    if n_c is None:
        n_c = default_n_c(part, n_gam)
    return A, wfpc_test_matrix(n_c, A.n_rows, seed)


def build_lsrom(partition: Partition, snap, n_int: int, n_gam: int,
                constraint: str = "wfpc", *, wfpc_seed: int = 0,
                n_c: int | None = None) -> RomInstance:
    """POD-based ROM: interior bases per subdomain; interface bases per
    subdomain (wfpc) or assembled from per-port bases (srpc)."""
    interior = [
        LinearMap(pod(snap.interior[i],
                      fixed_n=min(n_int, *snap.interior[i].shape)).Phi)
        for i in range(len(partition.subdomains))]
    prov = {"rom": "lsrom", "constraint": constraint, "hr": "none",
            "n_int": n_int, "n_gam": n_gam}
    if constraint == "wfpc":
        A, C = _wfpc_matrix_for(partition, n_gam, n_c, wfpc_seed)
        gams = [LinearMap(pod(snap.interface[i],
                              fixed_n=min(n_gam, *snap.interface[i].shape)
                              ).Phi)
                for i in range(len(partition.subdomains))]
        return RomInstance(partition=partition, interior_maps=interior,
                           interface_maps=gams, constraint_mode="wfpc",
                           fom_constraints=A, wfpc_C=C, provenance=prov)
    dims = port_latent_dims(partition.ports, n_gam)
    dims = {j: min(d, snap.port[j].shape[1]) for j, d in dims.items()}
    bases = {j: pod(snap.port[j], fixed_n=dims[j]) for j in dims}
    gams = [LinearMap(port_interface_basis(partition.ports, bases, i))
            for i in range(len(partition.subdomains))]
    return RomInstance(partition=partition, interior_maps=interior,
                       interface_maps=gams, constraint_mode="srpc",
                       rom_constraints=assemble_rom_constraints(
                           partition.ports, dims),
                       provenance=prov)


def train_nets(partition: Partition, snap, n_int: int, n_gam: int,
               constraint: str = "wfpc", *, band: int = 5, shift: int = 5,
               port_band: int = 3, port_shift: int = 3,
               train_cfg: TrainConfig = TrainConfig()):
    """Train the decoder nets for one NM-ROM configuration.

    Returns ``{"interior": [net, ...], "interface": [net, ...]}`` for
    wfpc and ``{"interior": ..., "port": {j: net}}`` for srpc.  Swish
    interior/interface nets, Sigmoid port nets; each net's seed derives
    deterministically from ``train_cfg.seed``.
    """
    nsub = len(partition.subdomains)

    def fit(X, n, tag, offset, b, s):
        cfg = replace(train_cfg, seed=train_cfg.seed + offset)
        n_eff = max(1, min(n, X.shape[0] - 1))
        ae, _ = train(X, build_mask(X.shape[0], b, s), n_eff, cfg,
                      activation=tag)
        return ae

    nets = {"interior": [fit(snap.interior[i], n_int, "swish", 100 + i,
                             band, shift) for i in range(nsub)]}
    if constraint == "wfpc":
        nets["interface"] = [fit(snap.interface[i], n_gam, "swish",
                                 200 + i, band, shift)
                             for i in range(nsub)]
    else:
        dims = port_latent_dims(partition.ports, n_gam)
        nets["port"] = {j: fit(snap.port[j], dims[j], "sigmoid", 300 + j,
                               port_band, port_shift) for j in dims}
    return nets


def build_nmrom(partition: Partition, snap, n_int: int, n_gam: int,
                constraint: str = "wfpc", *, band: int = 5, shift: int = 5,
                port_band: int = 3, port_shift: int = 3,
                train_cfg: TrainConfig = TrainConfig(),
                wfpc_seed: int = 0, n_c: int | None = None) -> RomInstance:
    """Autoencoder ROM: Swish interior (and wfpc interface) nets, Sigmoid
    port nets assembled into srpc interface decoders."""
    nets = train_nets(partition, snap, n_int, n_gam, constraint,
                      band=band, shift=shift, port_band=port_band,
                      port_shift=port_shift, train_cfg=train_cfg)
    prov = {"rom": "nmrom", "constraint": constraint, "hr": "none",
            "n_int": n_int, "n_gam": n_gam, "seed": train_cfg.seed}
    if constraint == "wfpc":
        A, C = _wfpc_matrix_for(partition, n_gam, n_c, wfpc_seed)
        return RomInstance(partition=partition,
                           interior_maps=nets["interior"],
                           interface_maps=nets["interface"],
                           constraint_mode="wfpc",
                           fom_constraints=A, wfpc_C=C, provenance=prov)
    gams = [assemble_srpc_interface(partition.ports, nets["port"], i)
            for i in range(len(partition.subdomains))]
    dims = {j: net.latent_dim for j, net in nets["port"].items()}
    return RomInstance(partition=partition, interior_maps=nets["interior"],
                       interface_maps=gams, constraint_mode="srpc",
                       rom_constraints=assemble_rom_constraints(
                           partition.ports, dims),
                       provenance=prov)


def attach_hr(instance: RomInstance, snap, mode: str,
              n_samples: int = 100, energy: float = 1e-10) -> RomInstance:
    """Return a copy of ``instance`` with per-subdomain HR operators built
    from residual snapshots (POD residual basis + greedy row sampling)."""
    if mode not in ("none", "collocation", "gappy"):
        raise ValueError("hr mode must be none, collocation or gappy")
    ops = []
    for i, sub in enumerate(instance.partition.subdomains):
        if mode == "none":
            ops.append(hr_none(sub.n_res))
            continue
        basis = pod(snap.residual[i], tol=energy).Phi
        ns = min(max(n_samples, basis.shape[1]), sub.n_res)
        rows = greedy_sample(basis, ns)
        ops.append(hr_collocation(rows, sub.n_res) if mode == "collocation"
                   else hr_gappy(rows, basis))
    return replace_instance(instance, hr=ops,
                            provenance={**instance.provenance, "hr": mode,
                                        "hr_samples": n_samples})


def replace_instance(instance: RomInstance, **kw) -> RomInstance:
    fields = dict(partition=instance.partition,
                  interior_maps=instance.interior_maps,
                  interface_maps=instance.interface_maps,
                  constraint_mode=instance.constraint_mode,
                  fom_constraints=instance.fom_constraints,
                  wfpc_C=instance.wfpc_C,
                  rom_constraints=instance.rom_constraints,
                  hr=instance.hr, initializer=instance.initializer,
                  provenance=instance.provenance)
    fields.update(kw)
    return RomInstance(**fields)


def fit_initializer(instance: RomInstance, snap) -> RomInstance:
    """Encode every training snapshot and fit the latent RBF model."""
    rows = []
    for k in range(snap.n_mu):
        parts = []
        for i in range(len(instance.partition.subdomains)):
            parts.append(instance.interior_maps[i].encode(
                snap.interior[i][:, k]))
            parts.append(instance.interface_maps[i].encode(
                snap.interface[i][:, k]))
        rows.append(np.concatenate(parts))
    init = RbfInitializer.fit(snap.params, np.vstack(rows))
    return replace_instance(instance, initializer=init)


# -- SQP problem assembly ------------------------------------------------


def _memo_map(m):
    store = {}

    def get(xg):
        key = xg.tobytes()
        if store.get("key") != key:
            store["key"] = key
            store["g"] = m.decode(xg)
            store["J"] = np.asarray(m.jacobian(xg))
        return store["g"], store["J"]

    return get


def _restrict_map(m, rows):
    if hasattr(m, "restrict_outputs"):
        return m.restrict_outputs(rows)
    return extract_subnet(m, rows)


def build_problem(instance: RomInstance, ops: FomOperators) -> SqpProblem:
    """Instantiate the block-separable SQP problem at one parameter."""
    part = instance.partition
    blocks = []
    for i, sub in enumerate(part.subdomains):
        int_map = instance.interior_maps[i]
        gam_map = instance.interface_maps[i]
        hr = (instance.hr[i] if instance.hr is not None
              else hr_none(sub.n_res))
        gam_full = _memo_map(gam_map)

        if instance.constraint_mode == "wfpc":
            CA = instance.wfpc_C @ instance.fom_constraints.blocks[i]\
                .toarray()

            def constraint(xg, CA=CA, gam_full=gam_full):
                g, J = gam_full(xg)
                return CA @ g, CA @ J
        else:
            Ahat = instance.rom_constraints.blocks[i].toarray()

            def constraint(xg, Ahat=Ahat):
                return Ahat @ xg, Ahat

        if hr.mode == "none":
            ev = part.evaluator(ops, i)

            def residual(xi, xg, ev=ev, int_map=int_map,
                         gam_full=gam_full):
                x_int = int_map.decode(xi)
                x_gam, J_gam_map = gam_full(xg)
                r = ev.residual(x_int, x_gam)
                Ji, Jg = ev.jacobians(x_int, x_gam)
                return (r, Ji @ np.asarray(int_map.jacobian(xi)),
                        Jg @ J_gam_map)
        else:
            rows = hr.apply_B_rows()
            io, gio = hr_rows_for_subdomain(part, i, rows)
            cols = np.concatenate([sub.interior_cols[io],
                                   sub.interface_cols[gio]])
            restricted = RestrictedResidual(ops, sub.res_rows[rows], cols)
            sub_int = _restrict_map(int_map, io) if io.size else None
            # wfpc keeps the full interface decoder (its constraint needs
            # every trace entry anyway); srpc may subnet it
            sub_gam = (_restrict_map(gam_map, gio)
                       if instance.constraint_mode == "srpc" and gio.size
                       else None)

            def residual(xi, xg, hr=hr, restricted=restricted,
                         sub_int=sub_int, sub_gam=sub_gam,
                         gam_full=gam_full, n_io=io.size, n_gio=gio.size,
                         gio=gio, n_int=int_map.latent_dim,
                         n_gam=gam_map.latent_dim):
                if sub_int is not None:
                    v_int = sub_int.decode(xi)
                else:
                    v_int = np.zeros(0)
                if sub_gam is not None:
                    v_gam = sub_gam.decode(xg)
                    J_gam_rows = np.asarray(sub_gam.jacobian(xg))
                elif n_gio:
                    g, J = gam_full(xg)
                    v_gam, J_gam_rows = g[gio], J[gio]
                else:
                    v_gam = np.zeros(0)
                    J_gam_rows = np.zeros((0, n_gam))
                r_s = restricted.residual(np.concatenate([v_int, v_gam]))
                Jd = restricted.jacobian(
                    np.concatenate([v_int, v_gam])).toarray()
                if sub_int is not None:
                    J_int = Jd[:, :n_io] @ np.asarray(sub_int.jacobian(xi))
                else:
                    J_int = np.zeros((Jd.shape[0], n_int))
                J_gam = Jd[:, n_io:] @ J_gam_rows
                return (hr.apply_sampled(r_s),
                        hr.apply_sampled_matrix(J_int),
                        hr.apply_sampled_matrix(J_gam))

        blocks.append(SqpBlock(int_map.latent_dim, gam_map.latent_dim,
                               residual, constraint))
    return SqpProblem(blocks, instance.n_mult)


# -- initialization ------------------------------------------------------


def init_guess(instance: RomInstance, p: ParameterPoint, *,
               ops: FomOperators | None = None,
               prob: SqpProblem | None = None):
    """RBF latent prediction plus least-squares multipliers.

    The multiplier solve uses the interface stationarity rows, which are
    linear in the multipliers for fixed latents.
    """
    if instance.initializer is None:
        raise ValueError("instance has no fitted initializer")
    x0 = instance.initializer.query(p)
    if ops is None:
        ops = assemble(instance.partition.grid, p)
    if prob is None:
        prob = build_problem(instance, ops)
    lam0 = multiplier_least_squares(prob, x0)
    return x0, lam0


def multiplier_least_squares(prob: SqpProblem, x0: np.ndarray) -> np.ndarray:
    """argmin over multipliers of the interface stationarity residual."""
    ev = eval_gradients(prob, x0, np.zeros(prob.n_mult))
    rows, rhs = [], []
    for off, block, be in zip(prob.offsets, prob.blocks, ev.blocks):
        gs = off + block.n_int
        rows.append(be.con_jac.T)
        rhs.append(-ev.rho[gs:gs + block.n_gam])
    lam, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs),
                              rcond=None)
    return lam


# -- error metric --------------------------------------------------------


def restrict_blocks(partition: Partition, state: np.ndarray):
    """Split a global state into per-subdomain (interior, interface)."""
    return [partition.restrict(i, state)
            for i in range(len(partition.subdomains))]


def assemble_global(partition: Partition, states) -> np.ndarray:
    """Merge per-subdomain states into one global vector; shared interface
    entries are averaged over the subdomains holding them."""
    acc = np.zeros(partition.grid.ndof)
    count = np.zeros(partition.grid.ndof)
    for sub, (x_int, x_gam) in zip(partition.subdomains, states):
        acc[sub.interior_cols] += x_int
        count[sub.interior_cols] += 1
        acc[sub.interface_cols] += x_gam
        count[sub.interface_cols] += 1
    return acc / np.maximum(count, 1)


def relative_error(fom_blocks, rom_blocks) -> float:
    """Root mean over subdomains of the squared blockwise relative error."""
    if len(fom_blocks) != len(rom_blocks):
        raise ValueError("block counts differ")
    total = 0.0
    for (fi, fg), (ri, rg) in zip(fom_blocks, rom_blocks):
        denom = float(fi @ fi + fg @ fg)
        if denom == 0.0:
            raise ValueError("zero-norm reference block")
        num = float((fi - ri) @ (fi - ri) + (fg - rg) @ (fg - rg))
        total += num / denom
    return float(np.sqrt(total / len(fom_blocks)))


# -- solving -------------------------------------------------------------


@dataclass(eq=False)
class RomSolution:
    x_latent: np.ndarray
    lam: np.ndarray
    states: list = field(repr=False)      # [(x_int, x_gam), ...] decoded
    sqp: SqpResult = field(repr=False, default=None)
    error: float = np.nan


@dataclass(eq=False)
class BenchmarkRecord:
    label: str
    config: dict
    a: float
    lam: float
    error: float = np.nan
    fom_seconds: float = np.nan
    rom_seconds: float = np.nan
    parallel_seconds: float = np.nan
    per_iter_seconds: float = np.nan
    speedup: float = np.nan
    n_iter: int = 0
    converged: bool = False
    final_merit: float = np.nan
    status: str = "ok"

    HEADER = ["label", "rom", "constraint", "hr", "n_int", "n_gam", "a",
              "lambda", "error", "fom_seconds", "rom_seconds",
              "parallel_seconds", "per_iter_seconds", "speedup", "n_iter",
              "converged", "final_merit", "status"]

    def row(self):
        c = self.config
        return [self.label, c.get("rom", ""), c.get("constraint", ""),
                c.get("hr", ""), c.get("n_int", ""), c.get("n_gam", ""),
                self.a, self.lam, self.error, self.fom_seconds,
                self.rom_seconds, self.parallel_seconds,
                self.per_iter_seconds, self.speedup, self.n_iter,
                int(self.converged), self.final_merit, self.status]


def solve_rom(instance: RomInstance, p: ParameterPoint,
              cfg: SqpConfig = SqpConfig(), *, x0=None, lam0=None,
              fom_state=None, fom_seconds: float = np.nan,
              compute_error: bool = True, label: str = ""):
    """Solve the ROM at ``p``; returns ``(RomSolution, BenchmarkRecord)``.

    The record's parallel time charges each iteration with the slowest
    block evaluation instead of the per-block sum, matching a
    one-subdomain-per-processor execution model.
    """
    part = instance.partition
    if compute_error and fom_state is None:
        t0 = time.perf_counter()
        fom_state, _ = solve_monolithic(part.grid, p)
        fom_seconds = time.perf_counter() - t0
    ops = assemble(part.grid, p)
    prob = build_problem(instance, ops)
    if x0 is None:
        x0, lam_ls = init_guess(instance, p, ops=ops, prob=prob)
        lam0 = lam_ls if lam0 is None else lam0
    elif lam0 is None:
        lam0 = multiplier_least_squares(prob, np.asarray(x0, dtype=float))

    t0 = time.perf_counter()
    res = iterate(prob, x0, lam0, cfg)
    rom_seconds = time.perf_counter() - t0
    parallel = (sum(res.timings["block_max"]) + sum(res.timings["kkt"]))

    states = instance.decode(res.x)
    error = np.nan
    if compute_error:
        error = relative_error(restrict_blocks(part, fom_state), states)
    record = BenchmarkRecord(
        label=label or instance.provenance.get("rom", "rom"),
        config=dict(instance.provenance), a=p.a, lam=p.lam, error=error,
        fom_seconds=fom_seconds, rom_seconds=rom_seconds,
        parallel_seconds=parallel,
        per_iter_seconds=parallel / max(res.n_iter, 1),
        speedup=fom_seconds / parallel if parallel > 0 else np.nan,
        n_iter=res.n_iter, converged=res.converged,
        final_merit=res.final_merit,
        status="ok" if res.failure_reason is None else res.failure_reason)
    return RomSolution(x_latent=res.x, lam=res.lam, states=states, sqp=res,
                       error=error), record


# -- residual-bound diagnostics ------------------------------------------


def inverse_lipschitz_estimate(func, points, pairs):
    """min and max ratios ||f(w1)-f(w2)|| / ||w1-w2|| over index pairs."""
    vals = [func(w) for w in points]
    lo, hi = np.inf, 0.0
    used = 0
    for a, b in pairs:
        dw = np.linalg.norm(points[a] - points[b])
        if dw == 0.0:
            continue
        ratio = np.linalg.norm(vals[a] - vals[b]) / dw
        lo, hi = min(lo, ratio), max(hi, ratio)
        used += 1
    if used == 0:
        raise ValueError("all sampled pairs were degenerate")
    return lo, hi


@dataclass(eq=False)
class BoundDiagnostics:
    kappa_lower: float
    kappa_upper: float
    p_hat: float
    residual_norm: float
    bound_rhs: float
    observed_lhs: float
    bound_holds: bool
    best_fit_lhs: float
    apriori_rhs: float
    n_samples: int
    seed: int

    def report(self) -> str:
        lines = [
            "sampled residual-bound diagnostics (estimates, not proofs)",
            f"  samples={self.n_samples} seed={self.seed}",
            f"  kappa_lower={self.kappa_lower:.6e}  "
            f"kappa_upper={self.kappa_upper:.6e}  p_hat={self.p_hat:.6e}",
            f"  weighted residual norm at solution="
            f"{self.residual_norm:.6e}",
            f"  observed ||x_fom - decoded|| = {self.observed_lhs:.6e}",
            f"  a posteriori rhs = {self.bound_rhs:.6e}  "
            f"holds={self.bound_holds}",
            f"  best-approximation lhs = {self.best_fit_lhs:.6e}  "
            f"a priori rhs = {self.apriori_rhs:.6e}",
        ]
        return "\n".join(lines)


def verify_bounds(instance: RomInstance, p: ParameterPoint,
                  n_samples: int = 100, seed: int = 0,
                  cfg: SqpConfig = SqpConfig(), *, solution=None,
                  fom_state=None, rel_scale: float = 0.05):
    """Sampled estimates of the inverse-Lipschitz residual bound.

    All constants come from random sampling around the solved state, so
    the verdict is a diagnostic consistency check, not a certificate.
    """
    part = instance.partition
    if fom_state is None:
        fom_state, _ = solve_monolithic(part.grid, p)
    if solution is None:
        solution, _ = solve_rom(instance, p, cfg, fom_state=fom_state)
    ops = assemble(part.grid, p)
    hrs = (instance.hr if instance.hr is not None
           else [hr_none(s.n_res) for s in part.subdomains])
    evs = [part.evaluator(ops, i) for i in range(len(part.subdomains))]
    sizes = [(s.n_interior, s.n_interface) for s in part.subdomains]

    def split_ambient(w):
        out, off = [], 0
        for ni, ng in sizes:
            out.append((w[off:off + ni], w[off + ni:off + ni + ng]))
            off += ni + ng
        return out

    def weighted_residual(w):
        return np.concatenate([
            hr.apply_B(ev.residual(xi, xg))
            for hr, ev, (xi, xg) in zip(hrs, evs, split_ambient(w))])

    def raw_residual(w):
        return np.concatenate([
            ev.residual(xi, xg)
            for ev, (xi, xg) in zip(evs, split_ambient(w))])

    w_star = np.concatenate([np.concatenate(b) for b in solution.states])
    rng = np.random.default_rng(seed)
    fom_blocks = restrict_blocks(part, fom_state)
    x_dd = np.concatenate([np.concatenate(b) for b in fom_blocks])

    # sample on the set the bound quantifies over: the FOM solution plus
    # decoded latent perturbations around the ROM solution
    lat_scale = rel_scale * max(np.linalg.norm(solution.x_latent), 1.0) \
        / np.sqrt(solution.x_latent.size)
    points = [x_dd]
    for _ in range(n_samples):
        xh = solution.x_latent + lat_scale * rng.standard_normal(
            solution.x_latent.size)
        points.append(np.concatenate(
            [np.concatenate(b) for b in instance.decode(xh)]))
    pairs = [(0, k) for k in range(1, len(points))]
    pairs += [(k, k + 1) for k in range(1, len(points) - 1)]
    kappa_lower, kappa_upper = inverse_lipschitz_estimate(
        weighted_residual, points, pairs)

    # P: weighted-vs-raw residual norm ratio over the decoded samples
    # (exactly 1 when B = I)
    p_hat = np.inf
    for w in points[1:]:
        denom = np.linalg.norm(raw_residual(w))
        if denom == 0.0:
            continue
        p_hat = min(p_hat, np.linalg.norm(weighted_residual(w)) / denom)
    if not np.isfinite(p_hat):
        raise ValueError("all sampled feasible points were degenerate")

    res_norm = float(np.linalg.norm(weighted_residual(w_star)))
    observed = float(np.linalg.norm(x_dd - w_star))
    rhs = res_norm / (p_hat * kappa_lower)

    # quasi-optimality proxy: distance to the decoded manifold estimated
    # by encode/decode of the FOM state
    best_lat = np.concatenate([
        np.concatenate([instance.interior_maps[i].encode(fi),
                        instance.interface_maps[i].encode(fg)])
        for i, (fi, fg) in enumerate(fom_blocks)])
    best_fit = np.concatenate(
        [np.concatenate(b) for b in instance.decode(best_lat)])
    best_lhs = float(np.linalg.norm(x_dd - best_fit))
    apriori = (1.0 + kappa_upper / (p_hat * kappa_lower)) * best_lhs

    return BoundDiagnostics(
        kappa_lower=float(kappa_lower), kappa_upper=float(kappa_upper),
        p_hat=float(p_hat), residual_norm=res_norm, bound_rhs=float(rhs),
        observed_lhs=observed, bound_holds=bool(observed <= rhs),
        best_fit_lhs=best_lhs, apriori_rhs=float(apriori),
        n_samples=n_samples, seed=seed)


# -- benchmark harness ---------------------------------------------------


def benchmark_sweep(instances: dict, params, out_dir,
                    cfg: SqpConfig = SqpConfig()):
    """Run every instance at every parameter; write records.csv and the
    per-instance summary pareto.csv.  ``None`` instances are recorded as
    absent cells."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    fom_cache = {}
    for label, instance in instances.items():
        if instance is None:
            records.append(BenchmarkRecord(
                label=label, config={}, a=np.nan, lam=np.nan,
                status="absent"))
            continue
        for p in params:
            key = (p.a, p.lam, instance.partition.grid.nx,
                   instance.partition.grid.ny)
            if key not in fom_cache:
                t0 = time.perf_counter()
                state, _ = solve_monolithic(instance.partition.grid, p)
                fom_cache[key] = (state, time.perf_counter() - t0)
            state, secs = fom_cache[key]
            try:
                _, rec = solve_rom(instance, p, cfg, fom_state=state,
                                   fom_seconds=secs, label=label)
            except ConvergenceError as exc:
                rec = BenchmarkRecord(label=label,
                                      config=dict(instance.provenance),
                                      a=p.a, lam=p.lam,
                                      status=f"failed: {exc}")
            records.append(rec)

    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BenchmarkRecord.HEADER)
        for rec in records:
            w.writerow(rec.row())

    with open(out / "pareto.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "rom", "constraint", "hr", "mean_error",
                    "mean_speedup", "mean_relative_time", "cells"])
        for label, instance in instances.items():
            ok = [r for r in records
                  if r.label == label and r.status == "ok"]
            if not ok:
                w.writerow([label, "", "", "", "", "", "", 0])
                continue
            c = ok[0].config
            errs = [r.error for r in ok]
            spd = [r.speedup for r in ok if np.isfinite(r.speedup)]
            rel = [r.parallel_seconds / r.fom_seconds for r in ok
                   if r.fom_seconds > 0]
            w.writerow([label, c.get("rom", ""), c.get("constraint", ""),
                        c.get("hr", ""), float(np.mean(errs)),
                        float(np.mean(spd)) if spd else "",
                        float(np.mean(rel)) if rel else "", len(ok)])
    return records
