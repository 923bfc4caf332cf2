"""Closed-form inference for the rank-one Poisson CP model.

A rank-one model is a list of positive vectors ``a_1, ..., a_P`` with
mean ``m_i = prod_p a_p[i_p]``. Parameter vectors stack the ``a_p`` in
mode order, the same layout the general model uses at ``R = 1``.
"""

from dataclasses import dataclass, field
import json

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .fisher import FisherMatrix, numerical_rank
from .kruskal import KruskalModel
from .tensor_core import tvc_all_but_one

__all__ = [
    "RankOneModel",
    "IdentifiabilityReport",
    "marginals",
    "mle_rank1",
    "rank1_loglik",
    "rank1_gradient",
    "rank1_hessian",
    "rank1_fim",
    "equal_split",
    "simplex_form",
    "gamma_equal_split",
    "rescale_fim",
    "reduced_info_inverse",
    "identifiability",
]


@dataclass(frozen=True, eq=False)
class RankOneModel:
    """Positive factor vectors of a rank-one mean tensor."""

    vectors: tuple

    def __post_init__(self):
        vs = []
        for p, a in enumerate(self.vectors):
            a = np.array(a, dtype=float, copy=True).ravel()
            if a.size == 0 or not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"vector {p} must be non-empty, finite and positive")
            a.setflags(write=False)
            vs.append(a)
        if not vs:
            raise ValueError("need at least one mode")
        object.__setattr__(self, "vectors", tuple(vs))

    @property
    def dims(self):
        return tuple(a.size for a in self.vectors)

    @property
    def ndim(self):
        return len(self.vectors)

    @property
    def lambdas(self):
        """Per-mode sums ``lambda_p = 1^T a_p``."""
        return np.array([a.sum() for a in self.vectors])

    @property
    def lam(self):
        return float(np.prod(self.lambdas))

    def pack(self):
        return np.concatenate(self.vectors)

    def full(self):
        out = self.vectors[0]
        for a in self.vectors[1:]:
            out = np.multiply.outer(out, a)
        return np.array(out)

    def to_kruskal(self):
        return KruskalModel(tuple(a[:, None] for a in self.vectors))

    @classmethod
    def from_kruskal(cls, model):
        if model.rank != 1:
            raise ValueError(f"expected a rank-one model, got rank {model.rank}")
        return cls(tuple(a[:, 0] for a in model.factors))

    @classmethod
    def unpack(cls, theta, dims):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (sum(dims),):
            raise ValueError(f"theta has length {theta.size}, expected {sum(dims)}")
        return cls(tuple(np.split(theta, np.cumsum(dims)[:-1])))


def _check_x(x, model=None):
    x = np.asarray(x, dtype=float)
    if model is not None and x.shape != model.dims:
        raise ValueError(f"data dims {x.shape} do not match model dims {model.dims}")
    return x


def marginals(x):
    """Mode sums ``x_p`` (all other indices summed out)."""
    x = np.asarray(x, dtype=float)
    return [tvc_all_but_one(x, [np.ones(n) for n in x.shape], p) for p in range(x.ndim)]


def mle_rank1(x):
    """Maximum-likelihood rank-one fit in simplex form.

    Returns ``(model, m_hat)`` with ``a_1 = x_1`` and ``a_p = x_p / sum(x)``
    for ``p >= 2``, so ``m_hat = sum(x)^-(P-1) * x_1 o ... o x_P``.
    """
    x = _check_x(x)
    if x.ndim < 1:
        raise ValueError("data must have at least one mode")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("counts must be finite and non-negative")
    xs = marginals(x)
    for p, xp in enumerate(xs):
        bad = np.flatnonzero(xp <= 0)
        if bad.size:
            raise ValueError(f"mode {p} marginal is zero at index {int(bad[0])}")
    total = float(x.sum())
    model = RankOneModel((xs[0],) + tuple(xp / total for xp in xs[1:]))
    return model, model.full()


def rank1_loglik(x, model):
    """Loglikelihood up to the constant ``-sum(log x_i!)``."""
    x = _check_x(x, model)
    xs = marginals(x)
    return float(sum(xp @ np.log(a) for xp, a in zip(xs, model.vectors)) - model.lam)


def rank1_gradient(x, model):
    x = _check_x(x, model)
    lp, lam = model.lambdas, model.lam
    return np.concatenate(
        [xp / a - lam / lp[p] for p, (xp, a) in enumerate(zip(marginals(x), model.vectors))]
    )


def _blocks(model, diag):
    dims, lp, lam = model.dims, model.lambdas, model.lam
    off = np.cumsum((0,) + dims)
    out = np.empty((off[-1], off[-1]))
    for p in range(model.ndim):
        for q in range(model.ndim):
            sl = (slice(off[p], off[p + 1]), slice(off[q], off[q + 1]))
            out[sl] = np.diag(diag[p]) if p == q else lam / (lp[p] * lp[q])
    return out


def rank1_hessian(x, model):
    x = _check_x(x, model)
    return -_blocks(model, [xp / a**2 for xp, a in zip(marginals(x), model.vectors)])


def rank1_fim(model, x=None):
    """Observed (``x`` given) or expected information as a :class:`FisherMatrix`."""
    if x is None:
        lp, lam = model.lambdas, model.lam
        mat = _blocks(model, [lam / (lp[p] * a) for p, a in enumerate(model.vectors)])
        kind = "expected"
    else:
        mat = -rank1_hessian(x, model)
        kind = "observed"
    return FisherMatrix(mat, model.dims, 1, kind)


def equal_split(model):
    """Same mean tensor with every ``lambda_p = lambda ** (1/P)``."""
    target = model.lam ** (1.0 / model.ndim)
    return RankOneModel(tuple(a * (target / a.sum()) for a in model.vectors))


def simplex_form(model):
    """Same mean tensor with ``lambda_1 = lambda`` and ``lambda_p = 1`` otherwise."""
    lp, lam = model.lambdas, model.lam
    first = model.vectors[0] * (lam / lp[0])
    return RankOneModel((first,) + tuple(a / a.sum() for a in model.vectors[1:]))


def gamma_equal_split(model):
    """Diagonal of the scaling taking ``model`` to its equal-split form.

    Block ``p`` is ``lambda ** (1/P) / lambda_p``.
    """
    lp = model.lambdas
    s = model.lam ** (1.0 / model.ndim) / lp
    return np.concatenate([np.full(n, s[p]) for p, n in enumerate(model.dims)])


def rescale_fim(fim, gamma):
    """Congruence ``Gamma I Gamma^T`` with a positive diagonal ``Gamma``.

    ``gamma`` may be the diagonal as a vector or a diagonal matrix.
    """
    mat = fim.matrix if isinstance(fim, FisherMatrix) else np.asarray(fim, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 2:
        if np.any(g - np.diag(np.diag(g))):
            raise ValueError("gamma must be diagonal")
        g = np.diag(g)
    if g.shape != (mat.shape[0],):
        raise ValueError(f"gamma has length {g.size}, expected {mat.shape[0]}")
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise ValueError("gamma must have a positive diagonal")
    out = g[:, None] * mat * g[None, :]
    if isinstance(fim, FisherMatrix):
        return FisherMatrix(out, fim.dims, fim.rank, fim.kind)
    return out


def reduced_info_inverse(model):
    """Closed-form inverse of the reduced expected information.

    The reduced parameter drops the first entry of every ``a_p`` with
    ``p >= 2``; the inverse follows from Sherman-Morrison applied to the
    diagonal-plus-low-rank structure.
    """
    lp, lam, P = model.lambdas, model.lam, model.ndim
    a1 = model.vectors[0]
    rest = [a[1:] for a in model.vectors[1:]]
    head = [a[0] for a in model.vectors[1:]]
    sizes = [a1.size] + [b.size for b in rest]
    off = np.cumsum([0] + sizes)
    out = np.zeros((off[-1], off[-1]))
    coef = sum(lp[p] / head[p - 1] - 1.0 for p in range(1, P))
    out[:off[1], :off[1]] = lp[0] * np.diag(a1) + coef * np.outer(a1, a1)
    for p in range(1, P):
        b, c = rest[p - 1], lp[p] / head[p - 1]
        sl = slice(off[p], off[p + 1])
        out[sl, sl] = lp[p] * np.diag(b) + c * np.outer(b, b)
        out[:off[1], sl] = -c * np.outer(a1, b)
        out[sl, :off[1]] = out[:off[1], sl].T
    return out / lam


@dataclass(frozen=True)
class IdentifiabilityReport:
    r: int
    numerical_rank: int
    fim: np.ndarray = field(repr=False)
    free_index: np.ndarray = field(repr=False)
    null_index: np.ndarray = field(repr=False)
    info_free: np.ndarray = field(repr=False)
    info_cross: np.ndarray = field(repr=False)
    info_null: np.ndarray = field(repr=False)
    schur_residual: float
    H: np.ndarray = field(repr=False)
    projector: np.ndarray = field(repr=False)
    null_residual: float

    @property
    def rank_ok(self):
        return self.numerical_rank == self.r

    def to_json(self):
        return json.dumps(
            {
                "r": self.r,
                "numerical_rank": self.numerical_rank,
                "order": int(self.fim.shape[0]),
                "schur_residual": self.schur_residual,
                "schur_residual_rel": self.schur_residual
                / max(np.linalg.norm(self.info_null), np.finfo(float).tiny),
                "null_residual": self.null_residual,
                "null_residual_rel": self.null_residual / np.linalg.norm(self.fim),
                "null_index": self.null_index.tolist(),
            }
        )


def _spd_solve(mat, rhs, what):
    try:
        c = cho_factor(mat)
    except LinAlgError:
        raise np.linalg.LinAlgError(f"{what} is not numerically positive definite") from None
    return cho_solve(c, rhs)


def identifiability(model, x=None, drop_entry=0, keep_mode=0):
    """Partition the information, build the null-space basis and range projector.

    One entry (``drop_entry``) of every vector except ``keep_mode`` moves
    to the null block. ``H`` and the projector are returned in the
    original parameter order.
    """
    dims, P = model.dims, model.ndim
    if not 0 <= keep_mode < P:
        raise ValueError(f"keep_mode {keep_mode} out of range")
    if any(not 0 <= drop_entry < n for p, n in enumerate(dims) if p != keep_mode):
        raise ValueError(f"drop_entry {drop_entry} out of range")
    mat = rank1_fim(model, x).matrix
    off = np.cumsum((0,) + dims)
    null_idx = np.array([off[p] + drop_entry for p in range(P) if p != keep_mode], dtype=int)
    free_idx = np.setdiff1d(np.arange(off[-1]), null_idx)
    i_f = mat[np.ix_(free_idx, free_idx)]
    i_fn = mat[np.ix_(null_idx, free_idx)]
    i_n = mat[np.ix_(null_idx, null_idx)]
    sol = _spd_solve(i_f, i_fn.T, "reduced information")
    schur = i_n - i_fn @ sol
    h = np.zeros((off[-1], P - 1))
    h[free_idx] = -sol
    h[null_idx] = np.eye(P - 1)
    if P > 1:
        proj = np.eye(off[-1]) - h @ _spd_solve(h.T @ h, h.T, "H^T H")
        null_res = float(np.linalg.norm(mat @ h, axis=0).max())
    else:
        proj, null_res = np.eye(off[-1]), 0.0
    return IdentifiabilityReport(
        r=sum(dims) - P + 1,
        numerical_rank=numerical_rank(mat).numerical_rank,
        fim=mat,
        free_index=free_idx,
        null_index=null_idx,
        info_free=i_f,
        info_cross=i_fn,
        info_null=i_n,
        schur_residual=float(np.linalg.norm(schur)),
        H=h,
        projector=proj,
        null_residual=null_res,
    )
