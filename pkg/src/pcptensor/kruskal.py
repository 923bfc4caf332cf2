"""Kruskal (CP) parameter object for the Poisson CP model."""

from dataclasses import dataclass
import json

import numpy as np

from .tensor_core import khatri_rao, unmatricize

__all__ = [
    "EPS_POS",
    "KruskalModel",
    "full_tensor",
    "pack",
    "unpack",
    "column_weights",
    "normalize",
    "model_to_json",
    "model_from_json",
]

EPS_POS = 1e-10


@dataclass(frozen=True, eq=False)
class KruskalModel:
    """Positive factor matrices ``A_1, ..., A_P`` (each ``N_p x R``).

    The mean tensor is ``m_i = sum_r prod_p A_p[i_p, r]``. Factors are
    copied and made read-only on construction.
    """

    factors: tuple

    def __post_init__(self):
        facs = []
        for p, a in enumerate(self.factors):
            a = np.array(a, dtype=float, copy=True)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2:
                raise ValueError(f"factor {p} must be a matrix, got ndim={a.ndim}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"factor {p} has non-finite entries")
            if np.any(a <= 0):
                i, r = np.argwhere(a <= 0)[0]
                raise ValueError(
                    f"factor {p} has non-positive entry {a[i, r]} at ({i}, {r})"
                )
            a.setflags(write=False)
            facs.append(a)
        if not facs:
            raise ValueError("a Kruskal model needs at least one factor")
        ranks = {a.shape[1] for a in facs}
        if len(ranks) != 1:
            raise ValueError(f"factors disagree on rank: {sorted(ranks)}")
        object.__setattr__(self, "factors", tuple(facs))

    @property
    def dims(self):
        return tuple(a.shape[0] for a in self.factors)

    @property
    def rank(self):
        return self.factors[0].shape[1]

    @property
    def ndim(self):
        return len(self.factors)

    @property
    def nparams(self):
        return self.rank * sum(self.dims)

    def full(self):
        return full_tensor(self)

    def pack(self):
        return pack(self)

    def weights(self):
        """Column sums ``lambda_q = A_q^T 1`` for every mode, shape ``(P, R)``."""
        return np.stack([a.sum(axis=0) for a in self.factors])

    def __eq__(self, other):
        if not isinstance(other, KruskalModel):
            return NotImplemented
        return self.dims == other.dims and self.rank == other.rank and all(
            np.array_equal(a, b) for a, b in zip(self.factors, other.factors)
        )

    __hash__ = None

    def __repr__(self):
        return f"KruskalModel(dims={self.dims}, rank={self.rank})"


def full_tensor(model):
    """Dense mean tensor of ``model``."""
    a0 = model.factors[0]
    if model.ndim == 1:
        return a0.sum(axis=1)
    return unmatricize(a0 @ khatri_rao(model.factors, skip={0}).T, 0, model.dims)


def pack(model):
    """``theta = [vec(A_1); ...; vec(A_P)]`` with column-major ``vec``."""
    return np.concatenate([a.ravel(order="F") for a in model.factors])


def unpack(theta, dims, rank):
    theta = np.asarray(theta, dtype=float)
    dims = tuple(int(d) for d in dims)
    expected = rank * sum(dims)
    if theta.shape != (expected,):
        raise ValueError(
            f"theta has length {theta.size}, expected R*sum(N) = {expected}"
        )
    bounds = np.cumsum([0] + [rank * n for n in dims])
    return KruskalModel(
        tuple(
            theta[bounds[p]:bounds[p + 1]].reshape(n, rank, order="F")
            for p, n in enumerate(dims)
        )
    )


def column_weights(model, p=None):
    """Per-mode column sums and their product over all modes except ``p``.

    Returns ``(lambdas, prod_except_p)`` where ``lambdas`` has shape
    ``(P, R)``. With ``p=None`` the product runs over all modes.
    """
    lam = model.weights()
    keep = [q for q in range(model.ndim) if q != p]
    prod = np.prod(lam[keep], axis=0) if keep else np.ones(model.rank)
    return lam, prod


def normalize(model, scheme="absorb", mode=0):
    """Rescale factor columns without changing the mean tensor.

    ``scheme="absorb"`` makes every other mode's columns sum to one so all
    weight sits in ``A_mode``. ``scheme="equal"`` gives every mode column
    sums equal to ``(total weight of component r) ** (1/P)``.
    """
    lam = model.weights()
    total = np.prod(lam, axis=0)
    if scheme == "absorb":
        if not 0 <= mode < model.ndim:
            raise ValueError(f"mode {mode} out of range")
        scale = 1.0 / lam
        scale[mode] = total / lam[mode]
    elif scheme == "equal":
        scale = total ** (1.0 / model.ndim) / lam
    else:
        raise ValueError(f"unknown normalization scheme {scheme!r}")
    return KruskalModel(tuple(a * s for a, s in zip(model.factors, scale)))


def model_to_json(model):
    return json.dumps(
        {
            "dims": list(model.dims),
            "rank": model.rank,
            "factors": [a.ravel(order="F").tolist() for a in model.factors],
        }
    )


def model_from_json(text):
    """Parse the model JSON format; raises ``ValueError`` naming the bad field."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ValueError("model file must hold a JSON object")
    for key in ("dims", "rank", "factors"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    dims, rank, factors = obj["dims"], obj["rank"], obj["factors"]
    if not isinstance(rank, int) or isinstance(rank, bool) or rank < 1:
        raise ValueError(f"field 'rank' must be a positive integer, got {rank!r}")
    if not isinstance(dims, list) or not all(
        isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in dims
    ):
        raise ValueError("field 'dims' must be a list of positive integers")
    if not isinstance(factors, list) or len(factors) != len(dims):
        raise ValueError("field 'factors' must hold one entry per mode")
    mats = []
    for p, (n, f) in enumerate(zip(dims, factors)):
        try:
            arr = np.asarray(f, dtype=float)
        except (TypeError, ValueError):
            raise ValueError(f"factors[{p}] must be a list of numbers") from None
        if arr.shape != (n * rank,):
            raise ValueError(f"factors[{p}] has {arr.size} values, expected {n * rank}")
        mats.append(arr.reshape(n, rank, order="F"))
    try:
        return KruskalModel(tuple(mats))
    except ValueError as exc:
        raise ValueError(f"field 'factors': {exc}") from None
