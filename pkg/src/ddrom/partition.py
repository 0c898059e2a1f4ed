"""Algebraic domain decomposition: index sets, ports, constraints.

A partition assigns every residual row to exactly one subdomain (geometric
node ownership) and classifies every state column per subdomain as
*interior* (referenced only by that subdomain's rows) or *interface*
(referenced by at least one other subdomain as well).  Ports are the
equivalence classes of interface columns under "referenced by exactly the
same set of subdomains"; compatibility constraints chain the duplicated
port copies pairwise.

Everything is derived from the structural Jacobian sparsity pattern, so the
same machinery works for any square system -- the Burgers wrapper just
feeds it the 5-point-stencil pattern and the grid-block row ownership.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .burgers import FomOperators, Grid2D, structural_pattern


@dataclass(frozen=True, eq=False)
class Subdomain:
    """Index sets of one subdomain (all global, sorted ascending)."""

    index: int
    res_rows: np.ndarray
    interior_cols: np.ndarray
    interface_cols: np.ndarray

    @property
    def n_res(self) -> int:
        return self.res_rows.size

    @property
    def n_interior(self) -> int:
        return self.interior_cols.size

    @property
    def n_interface(self) -> int:
        return self.interface_cols.size


@dataclass(frozen=True, eq=False)
class Port:
    """A maximal set of interface columns shared by one subdomain set."""

    index: int
    cols: np.ndarray          # sorted global column indices
    members: tuple            # sorted subdomain indices, len >= 2

    @property
    def size(self) -> int:
        return self.cols.size


class PortTable:
    """All ports plus the member-local position maps realizing P_i^j."""

    def __init__(self, ports, subdomains):
        self.ports = list(ports)
        self._n_interface = {s.index: s.n_interface for s in subdomains}
        # positions[(j, i)][t] = position of port j's t-th column inside
        # subdomain i's sorted interface column list
        self.positions = {}
        by_index = {s.index: s for s in subdomains}
        for port in self.ports:
            for i in port.members:
                gam = by_index[i].interface_cols
                pos = np.searchsorted(gam, port.cols)
                if np.any(pos >= gam.size) or np.any(gam[pos] != port.cols):
                    raise ValueError(
                        f"port {port.index} columns missing from subdomain "
                        f"{i} interface")
                self.positions[(port.index, i)] = pos
        self._q = {}
        for port in self.ports:
            for i in port.members:
                self._q.setdefault(i, []).append(port.index)
        for i in self._q:
            self._q[i].sort()

    @property
    def n_ports(self) -> int:
        return len(self.ports)

    def ports_of(self, i):
        """Q(i): indices of the ports subdomain ``i`` participates in."""
        return list(self._q.get(i, []))

    def interface_size(self, i) -> int:
        return self._n_interface[i]

    def member_positions(self, j, i) -> np.ndarray:
        """Local positions of port ``j`` inside subdomain ``i``'s interface."""
        return self.positions[(j, i)]

    def validate(self):
        """Exact partition laws: disjointness and per-subdomain coverage."""
        seen = set()
        for port in self.ports:
            cols = set(port.cols.tolist())
            if cols & seen:
                raise AssertionError("ports overlap")
            seen |= cols
        for i, n_gam in self._n_interface.items():
            total = sum(self.ports[j].size for j in self.ports_of(i))
            if total != n_gam:
                raise AssertionError(
                    f"subdomain {i}: port sizes sum to {total}, interface "
                    f"has {n_gam}")


def partition_from_pattern(pattern: sp.spmatrix, row_owner: np.ndarray):
    """Decompose an arbitrary square structural pattern.

    Parameters
    ----------
    pattern : sparse boolean matrix, square
        Structural Jacobian support (row r references column c iff nonzero).
    row_owner : integer array, one entry per row
        Owning subdomain of each residual row; ids must be 0..nsub-1 with
        every id present.

    Returns
    -------
    (subdomains, port_table)
    """
    pattern = sp.csr_matrix(pattern)
    n = pattern.shape[0]
    if pattern.shape[1] != n:
        raise ValueError("pattern must be square")
    row_owner = np.asarray(row_owner)
    if row_owner.shape != (n,):
        raise ValueError("row_owner must have one entry per row")
    nsub = int(row_owner.max()) + 1
    counts = np.bincount(row_owner, minlength=nsub)
    if np.any(counts == 0):
        raise ValueError("degenerate subdomain with zero residual rows")

    # sharing set of every column: owners of the rows that reference it
    csc = pattern.tocsc()
    sharing = [None] * n
    for c in range(n):
        rows = csc.indices[csc.indptr[c]:csc.indptr[c + 1]]
        sharing[c] = tuple(sorted(set(row_owner[rows].tolist())))
        if not sharing[c]:
            raise ValueError(f"column {c} referenced by no residual row")

    subdomains = []
    for i in range(nsub):
        interior = np.array([c for c in range(n) if sharing[c] == (i,)],
                            dtype=np.int64)
        interface = np.array(
            [c for c in range(n) if len(sharing[c]) > 1 and i in sharing[c]],
            dtype=np.int64)
        subdomains.append(Subdomain(
            index=i,
            res_rows=np.flatnonzero(row_owner == i).astype(np.int64),
            interior_cols=interior,
            interface_cols=interface,
        ))

    # ports: group shared columns by their exact sharing set; ids ordered by
    # each group's smallest column so the numbering is deterministic
    groups = {}
    for c in range(n):
        if len(sharing[c]) > 1:
            groups.setdefault(sharing[c], []).append(c)
    ordered = sorted(groups.items(), key=lambda kv: kv[1][0])
    ports = [Port(index=j, cols=np.array(cols, dtype=np.int64), members=mem)
             for j, (mem, cols) in enumerate(ordered)]

    table = PortTable(ports, subdomains)
    table.validate()
    return subdomains, table


class Partition:
    """A built decomposition of the Burgers FOM on a given grid."""

    def __init__(self, grid: Grid2D, nsub_x: int, nsub_y: int):
        if nsub_x < 1 or nsub_y < 1:
            raise ValueError("need at least one subdomain per direction")
        if nsub_x > grid.nx or nsub_y > grid.ny:
            raise ValueError("more subdomains than grid nodes per direction")
        self.grid = grid
        self.nsub_x = nsub_x
        self.nsub_y = nsub_y
        self.pattern = structural_pattern(grid).tocsr()
        self.row_owner = self._node_ownership()
        self.subdomains, self.ports = partition_from_pattern(
            self.pattern, self.row_owner)

    def _node_ownership(self) -> np.ndarray:
        nx, ny = self.grid.nx, self.grid.ny
        wx = nx // self.nsub_x
        wy = ny // self.nsub_y
        ii = np.arange(nx)
        jj = np.arange(ny)
        si = np.minimum(ii // wx, self.nsub_x - 1)
        sj = np.minimum(jj // wy, self.nsub_y - 1)
        node_owner = (sj[:, None] * self.nsub_x + si[None, :]).ravel()
        return np.concatenate([node_owner, node_owner])

    @property
    def n_sub(self) -> int:
        return self.nsub_x * self.nsub_y

    def referenced_cols(self, rows) -> np.ndarray:
        """Sorted global columns structurally referenced by these rows."""
        rows = np.asarray(rows)
        cols = np.unique(np.concatenate(
            [self.pattern.indices[self.pattern.indptr[r]:
                                  self.pattern.indptr[r + 1]] for r in rows]))
        return cols.astype(np.int64)

    def evaluator(self, ops: FomOperators, i: int) -> "SubdomainEvaluator":
        """Residual/Jacobian evaluator for subdomain ``i`` under ``ops``."""
        return SubdomainEvaluator(ops, self.subdomains[i])

    def subdomain_residual(self, ops, i, x_int, x_gam):
        return self.evaluator(ops, i).residual(x_int, x_gam)

    def subdomain_jacobians(self, ops, i, x_int, x_gam):
        return self.evaluator(ops, i).jacobians(x_int, x_gam)

    def restrict(self, i: int, x: np.ndarray):
        """Restrict a global state to ``(x_i_interior, x_i_interface)``."""
        sub = self.subdomains[i]
        return x[sub.interior_cols], x[sub.interface_cols]

    def summary(self) -> dict:
        out = {
            "nx": self.grid.nx, "ny": self.grid.ny,
            "nsub_x": self.nsub_x, "nsub_y": self.nsub_y,
            "n_ports": self.ports.n_ports,
        }
        for s in self.subdomains:
            out[f"sub{s.index}.n_res"] = s.n_res
            out[f"sub{s.index}.n_interior"] = s.n_interior
            out[f"sub{s.index}.n_interface"] = s.n_interface
        for p in self.ports.ports:
            out[f"port{p.index}.size"] = p.size
            out[f"port{p.index}.members"] = ",".join(map(str, p.members))
        return out

    def report(self) -> str:
        lines = [f"partition {self.nsub_x}x{self.nsub_y} on grid "
                 f"{self.grid.nx}x{self.grid.ny} (N = {self.grid.ndof})"]
        for s in self.subdomains:
            lines.append(f"  subdomain {s.index}: rows {s.n_res}, "
                         f"interior {s.n_interior}, interface {s.n_interface}")
        for p in self.ports.ports:
            lines.append(f"  port {p.index}: {p.size} columns, "
                         f"members {p.members}")
        return "\n".join(lines)


@dataclass(eq=False)
class ConstraintMatrix:
    """Signed-incidence compatibility constraints (one +1, one -1 per row)."""

    matrix: sp.csr_matrix
    blocks: list                      # per-subdomain column slices A_i
    block_offsets: np.ndarray
    port_dims: dict | None = None     # latent dims per port (ROM variant)
    sub_layout: dict | None = None    # i -> [(port, offset, dim), ...]

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]


def _chain_rows(pt: PortTable, nsub, block_sizes, position_of):
    """Shared chained-row construction used by both constraint variants."""
    offsets = np.concatenate([[0], np.cumsum(block_sizes)])
    rows, cols, vals = [], [], []
    r = 0
    for port in pt.ports:
        for i_a, i_b in zip(port.members[:-1], port.members[1:]):
            pos_a = position_of(port, i_a)
            pos_b = position_of(port, i_b)
            for t in range(pos_a.size):
                rows += [r, r]
                cols += [offsets[i_a] + pos_a[t], offsets[i_b] + pos_b[t]]
                vals += [1.0, -1.0]
                r += 1
    mat = sp.csr_matrix((vals, (rows, cols)),
                        shape=(r, int(offsets[-1])))
    blocks = [mat[:, offsets[i]:offsets[i + 1]].tocsr() for i in range(nsub)]
    return mat, blocks, offsets


def assemble_fom_constraints(pt: PortTable) -> ConstraintMatrix:
    """FOM-level constraint matrix ``A`` on stacked interface states.

    For each port with members ``i_1 < ... < i_m`` the port columns are
    chained pairwise, giving ``(m - 1) * N_j^p`` rows of exactly one +1 and
    one -1; the full matrix has row count ``N_A = sum_j (|P(j)|-1) N_j^p``
    and full row rank.
    """
    nsub = len(pt._n_interface)
    sizes = [pt.interface_size(i) for i in range(nsub)]
    mat, blocks, offsets = _chain_rows(
        pt, nsub, sizes, lambda port, i: pt.member_positions(port.index, i))
    return ConstraintMatrix(matrix=mat, blocks=blocks, block_offsets=offsets)


def assemble_rom_constraints(pt: PortTable, latent_port_dims) -> ConstraintMatrix:
    """ROM-level constraints on stacked port-latent coordinates.

    ``latent_port_dims`` maps port index -> n_j^p (list or dict).  Each
    subdomain's reduced interface vector is the concatenation of its ports'
    latent blocks in ascending port order.
    """
    dims = {j: int(latent_port_dims[j]) for j in range(pt.n_ports)}
    for j, port in enumerate(pt.ports):
        if not 1 <= dims[j] <= port.size:
            raise ValueError(
                f"port {j}: latent dim {dims[j]} outside [1, {port.size}]")

    nsub = len(pt._n_interface)
    layout = {}
    sizes = []
    for i in range(nsub):
        off = 0
        entries = []
        for j in pt.ports_of(i):
            entries.append((j, off, dims[j]))
            off += dims[j]
        layout[i] = entries
        sizes.append(off)

    def position_of(port, i):
        for j, off, d in layout[i]:
            if j == port.index:
                return np.arange(off, off + d)
        raise KeyError((port.index, i))

    mat, blocks, offsets = _chain_rows(pt, nsub, sizes, position_of)
    return ConstraintMatrix(matrix=mat, blocks=blocks, block_offsets=offsets,
                            port_dims=dims, sub_layout=layout)


class RestrictedResidual:
    """Evaluates selected Burgers residual rows from a local column vector.

    ``rows`` are global residual row indices; ``cols`` are global state
    columns in the caller's chosen order (the local vector is indexed the
    same way).  Every column structurally referenced by the rows must be
    present.  Evaluation touches only the selected rows -- the instance
    counts evaluated rows so hyper-reduction tests can assert nothing else
    was computed.
    """

    def __init__(self, ops: FomOperators, rows, cols):
        grid = ops.grid
        n = grid.nnode
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self.rows = rows
        self.cols = cols
        self.n_rows = rows.size
        self.n_cols = cols.size
        self.rows_evaluated = 0

        lookup = np.full(2 * n, -1, dtype=np.int64)
        lookup[cols] = np.arange(cols.size)

        u_mask = rows < n
        self._u_pos = np.flatnonzero(u_mask)
        self._v_pos = np.flatnonzero(~u_mask)
        pu = rows[u_mask]
        pv = rows[~u_mask] - n

        def remap(mat, node_rows, col_offset):
            sub = mat[node_rows, :].tocoo()
            local = lookup[sub.col + col_offset]
            if np.any(local < 0):
                raise ValueError("restricted rows reference columns outside "
                                 "the provided column set")
            return sp.csr_matrix((sub.data, (sub.row, local)),
                                 shape=(node_rows.size, cols.size))

        def gather_idx(node_rows, col_offset):
            local = lookup[node_rows + col_offset]
            if np.any(local < 0):
                raise ValueError("diagonal coupling column missing from the "
                                 "provided column set")
            return local

        # u-rows act on u columns; their Hadamard factors live on the
        # diagonal (same node, both components)
        self._Bx_u = remap(ops.Bx, pu, 0)
        self._By_u = remap(ops.By, pu, 0)
        self._Cd_u = remap(ops.Cdiff, pu, 0)
        self._gu_u = gather_idx(pu, 0)
        self._gv_u = gather_idx(pu, n)
        self._bux = ops.bux[pu]
        self._buy = ops.buy[pu]
        self._cu = ops.cu[pu]

        self._Bx_v = remap(ops.Bx, pv, n)
        self._By_v = remap(ops.By, pv, n)
        self._Cd_v = remap(ops.Cdiff, pv, n)
        self._gu_v = gather_idx(pv, 0)
        self._gv_v = gather_idx(pv, n)
        self._bvx = ops.bvx[pv]
        self._bvy = ops.bvy[pv]
        self._cv = ops.cv[pv]

        def one_hot(idx):
            return sp.csr_matrix(
                (np.ones(idx.size), (np.arange(idx.size), idx)),
                shape=(idx.size, cols.size))

        self._Eu_u = one_hot(self._gu_u)
        self._Ev_u = one_hot(self._gv_u)
        self._Eu_v = one_hot(self._gu_v)
        self._Ev_v = one_hot(self._gv_v)

    def residual(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.n_cols,):
            raise ValueError("local state has wrong length")
        self.rows_evaluated += self.n_rows
        out = np.empty(self.n_rows)
        xu = x[self._gu_u]
        xv = x[self._gv_u]
        out[self._u_pos] = (xu * (self._Bx_u @ x - self._bux)
                            + xv * (self._By_u @ x - self._buy)
                            + self._Cd_u @ x + self._cu)
        xu = x[self._gu_v]
        xv = x[self._gv_v]
        out[self._v_pos] = (xu * (self._Bx_v @ x - self._bvx)
                            + xv * (self._By_v @ x - self._bvy)
                            + self._Cd_v @ x + self._cv)
        return out

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        if x.shape != (self.n_cols,):
            raise ValueError("local state has wrong length")
        du = sp.diags(x[self._gu_u])
        dv = sp.diags(x[self._gv_u])
        Ju = (sp.diags(self._Bx_u @ x - self._bux) @ self._Eu_u
              + du @ self._Bx_u + dv @ self._By_u
              + sp.diags(self._By_u @ x - self._buy) @ self._Ev_u
              + self._Cd_u)
        du = sp.diags(x[self._gu_v])
        dv = sp.diags(x[self._gv_v])
        Jv = (du @ self._Bx_v
              + sp.diags(self._Bx_v @ x - self._bvx) @ self._Eu_v
              + dv @ self._By_v
              + sp.diags(self._By_v @ x - self._bvy) @ self._Ev_v
              + self._Cd_v)
        stacked = sp.vstack([Ju, Jv]).tocsr()
        order = np.empty(self.n_rows, dtype=np.int64)
        order[self._u_pos] = np.arange(self._u_pos.size)
        order[self._v_pos] = self._u_pos.size + np.arange(self._v_pos.size)
        return stacked[order, :]


class SubdomainEvaluator:
    """Subdomain residual ``r_i(x_i_interior, x_i_interface)`` and Jacobians."""

    def __init__(self, ops: FomOperators, sub: Subdomain):
        self.sub = sub
        self.n_interior = sub.n_interior
        self.n_interface = sub.n_interface
        cols = np.concatenate([sub.interior_cols, sub.interface_cols])
        self._rr = RestrictedResidual(ops, sub.res_rows, cols)

    @property
    def rows_evaluated(self) -> int:
        return self._rr.rows_evaluated

    def _pack(self, x_int, x_gam):
        x_int = np.asarray(x_int, dtype=float)
        x_gam = np.asarray(x_gam, dtype=float)
        if x_int.shape != (self.n_interior,) or x_gam.shape != (self.n_interface,):
            raise ValueError("interior/interface vectors have wrong lengths")
        return np.concatenate([x_int, x_gam])

    def residual(self, x_int, x_gam) -> np.ndarray:
        return self._rr.residual(self._pack(x_int, x_gam))

    def jacobians(self, x_int, x_gam):
        J = self._rr.jacobian(self._pack(x_int, x_gam))
        return (J[:, :self.n_interior].tocsr(),
                J[:, self.n_interior:].tocsr())


def build_partition(grid: Grid2D, nsub_x: int, nsub_y: int) -> Partition:
    """Decompose the Burgers FOM grid into ``nsub_x x nsub_y`` subdomains."""
    return Partition(grid, nsub_x, nsub_y)
