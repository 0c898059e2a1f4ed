"""Hyper-reduction: residual row sampling, weighting operators, subnets.

Three weighting modes for a subdomain residual of length ``n_ambient``:

* ``none``         -- B = I, every row evaluated;
* ``collocation``  -- B = Z, only sampled rows evaluated;
* ``gappy``        -- B = pinv(Z @ Phi_r) @ Z, sampled rows recombined
                      through a residual POD basis.

Row sets come from a deterministic greedy sampler.  Decoder subnets
restrict a sparse autoencoder to the output rows hyper-reduction actually
needs; by construction they reproduce those rows bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .autoencoder import Autoencoder, _act, _act_deriv


def greedy_sample(basis: np.ndarray, n_samples: int) -> np.ndarray:
    """Greedy residual-row selection.

    Columns of ``basis`` are processed cyclically; each step reconstructs
    the current column from the *other* columns using only the rows chosen
    so far (gappy least squares) and selects the unchosen row where the
    reconstruction error is largest in magnitude, lowest index on ties.
    Returns ``n_samples`` sorted unique row indices.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    n_rows, n_cols = basis.shape
    if n_cols < 1:
        raise ValueError("basis must have at least one column")
    if n_samples < n_cols:
        raise ValueError("need at least one sample per basis column")
    if n_samples > n_rows:
        raise ValueError("cannot sample more rows than the basis has")

    chosen: list[int] = []
    taken = np.zeros(n_rows, dtype=bool)
    for step in range(n_samples):
        c = step % n_cols
        others = np.delete(np.arange(n_cols), c)
        if chosen and others.size:
            sel = np.asarray(chosen)
            coef, *_ = np.linalg.lstsq(basis[sel][:, others],
                                       basis[sel, c], rcond=None)
            err = basis[:, c] - basis[:, others] @ coef
        else:
            err = basis[:, c]
        score = np.abs(err)
        score[taken] = -1.0
        pick = int(np.argmax(score))    # argmax takes the first max: lowest
        chosen.append(pick)             # index wins ties
        taken[pick] = True
    return np.sort(np.asarray(chosen, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class HrOperator:
    """Residual weighting operator B for one subdomain."""

    mode: str
    n_ambient: int
    rows: np.ndarray = field(repr=False)          # sorted sample indices
    basis: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def out_dim(self) -> int:
        if self.mode == "none":
            return self.n_ambient
        if self.mode == "collocation":
            return self.rows.size
        return self.basis.shape[1]

    def apply_B(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n_ambient:
            raise ValueError("residual vector has wrong length")
        if self.mode == "none":
            return v
        if self.mode == "collocation":
            return v[self.rows]
        return self.weights @ v[self.rows]

    def apply_B_matrix(self, M):
        """Apply B to a matrix (rows = residual entries), dense result."""
        if self.mode == "none":
            return M.toarray() if sp.issparse(M) else np.asarray(M)
        sampled = M[self.rows]
        sampled = sampled.toarray() if sp.issparse(sampled) else sampled
        if self.mode == "collocation":
            return sampled
        return self.weights @ sampled

    def apply_B_rows(self) -> np.ndarray:
        """Which residual rows the weighted evaluation actually needs."""
        if self.mode == "none":
            return np.arange(self.n_ambient, dtype=np.int64)
        return self.rows

    def apply_sampled(self, v_sampled: np.ndarray) -> np.ndarray:
        """Weight a vector that holds only the ``apply_B_rows()`` entries."""
        if self.mode == "gappy":
            return self.weights @ v_sampled
        return v_sampled

    def apply_sampled_matrix(self, M):
        """Same as :meth:`apply_sampled` for row-subset Jacobian blocks."""
        M = M.toarray() if sp.issparse(M) else np.asarray(M)
        if self.mode == "gappy":
            return self.weights @ M
        return M

    def matrix(self) -> np.ndarray:
        """Dense B, for small instances and tests."""
        B = np.zeros((self.out_dim, self.n_ambient))
        if self.mode == "none":
            np.fill_diagonal(B, 1.0)
        elif self.mode == "collocation":
            B[np.arange(self.rows.size), self.rows] = 1.0
        else:
            B[:, self.rows] = self.weights
        return B


def _check_rows(rows, n_ambient):
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("sample row set is empty")
    if np.any(np.diff(rows) <= 0):
        raise ValueError("sample rows must be strictly increasing")
    if rows[0] < 0 or rows[-1] >= n_ambient:
        raise ValueError("sample rows out of range")
    return rows


def hr_none(n_ambient: int) -> HrOperator:
    return HrOperator(mode="none", n_ambient=n_ambient,
                      rows=np.arange(n_ambient, dtype=np.int64))


def hr_collocation(rows, n_ambient: int) -> HrOperator:
    return HrOperator(mode="collocation", n_ambient=n_ambient,
                      rows=_check_rows(rows, n_ambient))


def hr_gappy(rows, basis: np.ndarray) -> HrOperator:
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    rows = _check_rows(rows, basis.shape[0])
    sampled = basis[rows]
    if np.linalg.matrix_rank(sampled) < basis.shape[1]:
        raise ValueError("sampled residual basis is rank deficient")
    return HrOperator(mode="gappy", n_ambient=basis.shape[0], rows=rows,
                      basis=basis, weights=np.linalg.pinv(sampled))


@dataclass(frozen=True, eq=False)
class Subnet:
    """Decoder restricted to output rows ``out_idx``; exact on those rows."""

    out_idx: np.ndarray = field(repr=False)
    hidden_idx: np.ndarray = field(repr=False)
    W2: sp.csr_matrix = field(repr=False)
    W1: np.ndarray = field(repr=False)
    b1: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    activation: str = "swish"

    @property
    def latent_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.out_idx.size

    def _hidden(self, xhat):
        z = self.b1.copy()
        for d in range(self.W1.shape[1]):
            z += self.W1[:, d] * xhat[d]
        return z

    def decode(self, xhat: np.ndarray) -> np.ndarray:
        a = _act(self.activation, self._hidden(np.asarray(xhat, dtype=float)))
        return (self.W2 @ a) * self.scale + self.shift

    def jacobian(self, xhat: np.ndarray) -> np.ndarray:
        zp = _act_deriv(self.activation,
                        self._hidden(np.asarray(xhat, dtype=float)))
        return (self.W2 @ (zp[:, None] * self.W1)) * self.scale[:, None]


def extract_subnet(ae: Autoencoder, out_idx) -> Subnet:
    """Restrict ``ae``'s decoder to output rows ``out_idx``.

    The kept hidden units are exactly those with a mask entry in some kept
    row, and both layers keep their per-element summation order, so the
    subnet output equals the corresponding full-decoder rows bitwise.
    """
    out_idx = np.asarray(out_idx, dtype=np.int64)
    if out_idx.size == 0:
        raise ValueError("output index set is empty")
    if np.any(np.diff(out_idx) <= 0):
        raise ValueError("output indices must be strictly increasing")
    rows = ae.W2g[out_idx, :].tocsr()
    hidden_idx = np.unique(rows.indices)
    # remap column indices in place: storage order (and therefore the
    # floating-point accumulation order of each row) is unchanged
    W2 = sp.csr_matrix(
        (rows.data, np.searchsorted(hidden_idx, rows.indices), rows.indptr),
        shape=(out_idx.size, hidden_idx.size))
    return Subnet(out_idx=out_idx, hidden_idx=hidden_idx, W2=W2,
                  W1=ae.W1g[hidden_idx, :], b1=ae.b1g[hidden_idx],
                  shift=ae.norm.shift[out_idx], scale=ae.norm.scale[out_idx],
                  activation=ae.activation)


def hr_rows_for_subdomain(partition, i: int, sample_rows):
    """Decoder outputs feeding the sampled residual rows of subdomain ``i``.

    ``sample_rows`` indexes the subdomain's local residual rows.  Returns
    ``(interior_out, interface_out)``: sorted local positions into the
    subdomain's interior and interface column orderings, read off the
    structural Jacobian pattern.
    """
    sub = partition.subdomains[i]
    sample_rows = np.asarray(sample_rows, dtype=np.int64)
    if sample_rows.size and (sample_rows.min() < 0
                             or sample_rows.max() >= sub.n_res):
        raise ValueError("sample rows out of range for subdomain")
    cols = partition.referenced_cols(sub.res_rows[sample_rows])
    interior_out = np.searchsorted(
        sub.interior_cols, np.intersect1d(cols, sub.interior_cols))
    interface_out = np.searchsorted(
        sub.interface_cols, np.intersect1d(cols, sub.interface_cols))
    return interior_out, interface_out
