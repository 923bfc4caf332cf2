"""Observed and expected Fisher information of the Poisson CP model.

Row/column index of the assembled matrix follows ``theta``: mode ``k``,
then component ``r``, then row ``j`` of ``A_k`` (position
``offset_k + r * N_k + j``).
"""

from dataclasses import dataclass, field
import csv
import io
import json

import numpy as np

from .kruskal import full_tensor
from .tensor_core import (
    khatri_rao,
    matricize,
    matricize_pair,
    tvc_all_but_one,
    tvc_all_but_two,
)

__all__ = [
    "MAX_ORDER",
    "FisherMatrix",
    "RankVerdict",
    "FimTooLarge",
    "d_block",
    "f_block",
    "fim",
    "conjectured_rank",
    "nullity_conjecture",
    "numerical_rank",
]

MAX_ORDER = 4000
SQRT_EPS = 2.0**-26


class FimTooLarge(MemoryError):
    def __init__(self, order, cap):
        self.order, self.cap = order, cap
        self.bytes_needed = 8 * order * order
        super().__init__(
            f"FIM order {order} exceeds cap {cap} "
            f"(dense matrix needs {self.bytes_needed} bytes, {self.bytes_needed / 2**20:.1f} MiB)"
        )


@dataclass(frozen=True)
class FisherMatrix:
    matrix: np.ndarray
    dims: tuple
    rank: int
    kind: str

    @property
    def offsets(self):
        return np.cumsum([0] + [self.rank * n for n in self.dims])

    def block(self, k, l, r, s):
        """``N_k x N_l`` sub-block for modes ``(k, l)`` and components ``(r, s)``."""
        o = self.offsets
        rows = o[k] + r * self.dims[k]
        cols = o[l] + s * self.dims[l]
        return self.matrix[rows:rows + self.dims[k], cols:cols + self.dims[l]]

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "dims": list(self.dims),
                "rank": self.rank,
                "order": int(self.matrix.shape[0]),
                "matrix": self.matrix.tolist(),
            }
        )


@dataclass(frozen=True)
class RankVerdict:
    numerical_rank: int
    conjectured_rank: int
    nullity_L: int
    threshold: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def matches(self):
        return self.numerical_rank == self.conjectured_rank

    @property
    def ratio(self):
        return self.numerical_rank / self.conjectured_rank

    def to_json(self):
        return json.dumps(
            {
                "numerical_rank": self.numerical_rank,
                "conjectured_rank": self.conjectured_rank,
                "nullity_L": self.nullity_L,
                "threshold": self.threshold,
                "lambda_max": float(self.eigenvalues[-1]) if self.eigenvalues.size else 0.0,
                "matches": self.matches,
            }
        )

    def eigenvalues_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "above_threshold"])
        for i, ev in enumerate(self.eigenvalues):
            w.writerow([i, repr(float(ev)), int(ev > self.threshold)])
        return buf.getvalue()


def _check_block_args(model, k, l, r, s):
    P, R = model.ndim, model.rank
    if not (0 <= k < P and 0 <= l < P):
        raise ValueError(f"mode indices ({k}, {l}) out of range for P={P}")
    if not (0 <= r < R and 0 <= s < R):
        raise ValueError(f"component indices ({r}, {s}) out of range for R={R}")


def d_block(y, model, k, l, r, s):
    """Information block ``D_{k,l}^{r,s}(Y)`` of size ``N_k x N_l``."""
    _check_block_args(model, k, l, r, s)
    y = np.asarray(y, dtype=float)
    if y.shape != model.dims:
        raise ValueError(f"Y dims {y.shape} do not match model dims {model.dims}")
    A = model.factors
    P = model.ndim
    if k > l:
        return d_block(y, model, l, k, s, r).T
    w = [A[q][:, r] * A[q][:, s] for q in range(P)]
    if k == l:
        return np.diag(tvc_all_but_one(y, w, k))
    outer = np.outer(A[k][:, s], A[l][:, r])
    if P == 2:
        return outer * matricize(y, k)
    return outer * tvc_all_but_two(y, w, k, l)


def f_block(x, model, k, l, r, s, m=None):
    """Correction block ``F_{k,l}^{r,s}`` of the observed information."""
    _check_block_args(model, k, l, r, s)
    x = np.asarray(x, dtype=float)
    if x.shape != model.dims:
        raise ValueError(f"data dims {x.shape} do not match model dims {model.dims}")
    dims, P = model.dims, model.ndim
    if k == l or r != s:
        return np.zeros((dims[k], dims[l]))
    if k > l:
        return f_block(x, model, l, k, r, s, m).T
    m = full_tensor(model) if m is None else m
    ratio = x / m
    if P == 2:
        return 1.0 - matricize(ratio, k)
    A = model.factors
    lam = np.prod([A[q][:, r].sum() for q in range(P) if q not in (k, l)])
    return lam - tvc_all_but_two(ratio, [A[q][:, r] for q in range(P)], k, l)


def _pair_products(kr):
    """Row-wise products ``kr[:, r] * kr[:, s]`` for all ``(r, s)``; shape ``(n, R, R)``."""
    return kr[:, :, None] * kr[:, None, :]


def _d_all(y, A, k, l):
    """All ``(r, s)`` sub-blocks of ``D_{k,l}(Y)`` as an ``(R, R, N_k, N_l)`` array."""
    R = A[0].shape[1]
    P = len(A)
    if k == l:
        kr = khatri_rao(A, skip={k})
        v = matricize(y, k) @ _pair_products(kr).reshape(-1, R * R)
        out = np.zeros((R, R, A[k].shape[0], A[k].shape[0]))
        idx = np.arange(A[k].shape[0])
        out[:, :, idx, idx] = v.T.reshape(R, R, -1)
        return out
    if P == 2:
        core = np.broadcast_to(matricize(y, k), (R, R) + (A[k].shape[0], A[l].shape[0]))
    else:
        kr = khatri_rao(A, skip={k, l})
        v = matricize_pair(y, k, l) @ _pair_products(kr).reshape(-1, R * R)
        # rows of matricize_pair run i_k fastest
        core = v.reshape(A[l].shape[0], A[k].shape[0], R, R).transpose(2, 3, 1, 0)
    # entry (r, s, j, j') scaled by A_k[j, s] * A_l[j', r]
    scale = A[k].T[None, :, :, None] * A[l].T[:, None, None, :]
    return core * scale


def _f_all(x, m, A, k, l):
    """Diagonal ``(r, r)`` sub-blocks of ``F_{k,l}`` as an ``(R, N_k, N_l)`` array."""
    R = A[0].shape[1]
    P = len(A)
    ratio = x / m
    if P == 2:
        return np.broadcast_to(1.0 - matricize(ratio, k), (R,) + (A[k].shape[0], A[l].shape[0]))
    kr = khatri_rao(A, skip={k, l})
    lam = np.prod([A[q].sum(axis=0) for q in range(P) if q not in (k, l)], axis=0)
    c = matricize_pair(ratio, k, l) @ kr
    c = c.reshape(A[l].shape[0], A[k].shape[0], R).transpose(2, 1, 0)
    return lam[:, None, None] - c


def fim(model, x=None, max_order=MAX_ORDER, batched=True):
    """Assemble the observed (``x`` given) or expected information matrix.

    ``batched=False`` builds every sub-block with :func:`d_block` /
    :func:`f_block` instead of the vectorized per-mode-pair kernels.
    """
    dims, R, P = model.dims, model.rank, model.ndim
    order = R * sum(dims)
    if order > max_order:
        raise FimTooLarge(order, max_order)
    m = full_tensor(model)
    if x is None:
        kind = "expected"
        y = 1.0 / m
    else:
        kind = "observed"
        x = np.asarray(x, dtype=float)
        if x.shape != dims:
            raise ValueError(f"data dims {x.shape} do not match model dims {dims}")
        y = x / m**2
    A = model.factors
    off = np.cumsum([0] + [R * n for n in dims])
    out = np.zeros((order, order))
    for k in range(P):
        for l in range(k, P):
            if batched:
                blk = _d_all(y, A, k, l)
                if kind == "observed" and k != l:
                    f = _f_all(x, m, A, k, l)
                    blk = blk.copy()
                    blk[np.arange(R), np.arange(R)] += f
            else:
                blk = np.empty((R, R, dims[k], dims[l]))
                for r in range(R):
                    for s in range(R):
                        blk[r, s] = d_block(y, model, k, l, r, s)
                        if kind == "observed":
                            blk[r, s] += f_block(x, model, k, l, r, s, m)
            dense = blk.transpose(0, 2, 1, 3).reshape(R * dims[k], R * dims[l])
            out[off[k]:off[k + 1], off[l]:off[l + 1]] = dense
            if k != l:
                out[off[l]:off[l + 1], off[k]:off[k + 1]] = dense.T
    out = 0.5 * (out + out.T)
    return FisherMatrix(out, dims, R, kind)


def nullity_conjecture(dims, rank):
    """Conjectured null-space dimension ``L`` in the overdetermined regime."""
    dims = tuple(dims)
    P = len(dims)
    if P < 2:
        raise ValueError("need at least two modes")
    if P == 2:
        return min(rank, dims[0], dims[1]) ** 2
    return rank * (P - 1)


def conjectured_rank(dims, rank):
    """``min(R * sum(N) - L, prod(N))``."""
    L = nullity_conjecture(dims, rank)
    return min(rank * sum(dims) - L, int(np.prod(dims)))


def numerical_rank(fim_or_matrix, dims=None, rank=None):
    """Count eigenvalues above ``lambda_max * sqrt(2**-52)`` and compare with the conjecture."""
    if isinstance(fim_or_matrix, FisherMatrix):
        mat = fim_or_matrix.matrix
        dims = fim_or_matrix.dims if dims is None else dims
        rank = fim_or_matrix.rank if rank is None else rank
    else:
        mat = np.asarray(fim_or_matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("numerical_rank needs a square matrix")
    try:
        ev = np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"symmetric eigensolver did not converge: {exc}") from exc
    threshold = float(ev[-1]) * SQRT_EPS if ev.size else 0.0
    nrank = int(np.count_nonzero(ev > threshold))
    if dims is None or rank is None:
        conj, L = -1, -1
    else:
        conj, L = conjectured_rank(dims, rank), nullity_conjecture(dims, rank)
    return RankVerdict(nrank, conj, L, threshold, ev)
