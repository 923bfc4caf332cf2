"""Dense multilinear kernels.

Tensors are plain ``numpy.ndarray`` objects indexed ``t[i_1, ..., i_P]``.
Vectorization uses the natural ordering (first index fastest), i.e.
``t.ravel(order="F")``, and every unfolding below is consistent with it so
that ``matricize(full, p) == A_p @ khatri_rao(A, skip={p}).T``.

Modes are 0-based throughout.
"""

import string

import numpy as np

__all__ = [
    "vec",
    "unvec",
    "matricize",
    "unmatricize",
    "matricize_pair",
    "khatri_rao",
    "tvc_all_but_one",
    "tvc_all_but_two",
    "hadamard",
    "hdivide",
    "hpower",
]


def _check_mode(ndim, mode):
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for a {ndim}-way tensor")


def vec(t):
    """Flatten ``t`` in natural (first-index-fastest) order."""
    return np.asarray(t).ravel(order="F")


def unvec(data, dims):
    """Inverse of :func:`vec`; checks that ``len(data) == prod(dims)``."""
    data = np.asarray(data)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    if data.size != int(np.prod(dims)):
        raise ValueError(
            f"data length {data.size} does not match prod(dims) = {int(np.prod(dims))}"
        )
    return data.reshape(dims, order="F")


def matricize(t, mode):
    """Mode-``mode`` unfolding, shape ``(N_mode, N / N_mode)``.

    Columns run over the remaining indices in natural order, so the
    unfolding of a Kruskal tensor equals ``A_p (A_P ⊙ ... ⊙ A_1)^T`` with
    mode ``p`` skipped.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1, order="F")


def unmatricize(mat, mode, dims):
    """Fold a mode-``mode`` unfolding back into a tensor of shape ``dims``."""
    dims = tuple(dims)
    _check_mode(len(dims), mode)
    rest = dims[:mode] + dims[mode + 1:]
    t = np.asarray(mat).reshape((dims[mode],) + rest, order="F")
    return np.moveaxis(t, 0, mode)


def matricize_pair(t, k, l):
    """Unfolding with modes ``(k, l)`` on the rows (``i_k`` fastest).

    Requires ``k < l`` and at least three modes.
    """
    t = np.asarray(t)
    if t.ndim <= 2:
        raise ValueError("matricize_pair needs a tensor with more than two modes")
    _check_mode(t.ndim, k)
    _check_mode(t.ndim, l)
    if k >= l:
        raise ValueError(f"need k < l, got k={k}, l={l}")
    moved = np.moveaxis(t, (k, l), (0, 1))
    return moved.reshape(t.shape[k] * t.shape[l], -1, order="F")


def khatri_rao(mats, skip=()):
    """Column-wise Kronecker product in decreasing mode order.

    Returns ``A_P ⊙ ... ⊙ A_1`` over the modes not in ``skip``. Row index
    of the result runs with the lowest remaining mode fastest.
    """
    skip = set(skip)
    chosen = [np.asarray(m, dtype=float) for p, m in enumerate(mats) if p not in skip]
    if not chosen:
        raise ValueError("Khatri-Rao product of an empty list")
    ncols = {m.shape[1] for m in chosen}
    if len(ncols) != 1:
        raise ValueError(f"matrices must share a column count, got {sorted(ncols)}")
    (R,) = ncols
    out = chosen[0]
    for m in chosen[1:]:
        # new (higher) mode becomes the slow index
        out = (m[:, None, :] * out[None, :, :]).reshape(-1, R)
    return out


def _letters(n):
    if n > len(string.ascii_letters) - 1:
        raise ValueError("too many modes for einsum contraction")
    return string.ascii_letters[:n]


def _contract(t, vecs, keep):
    t = np.asarray(t)
    idx = _letters(t.ndim)
    operands, subs = [t], [idx]
    for q in range(t.ndim):
        if q in keep:
            continue
        v = np.asarray(vecs[q], dtype=float)
        if v.shape != (t.shape[q],):
            raise ValueError(
                f"vector for mode {q} has shape {v.shape}, expected ({t.shape[q]},)"
            )
        operands.append(v)
        subs.append(idx[q])
    out = "".join(idx[q] for q in sorted(keep))
    return np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)


def _vec_map(ndim, vecs, exclude):
    """Accept either a full per-mode list or one listing only contracted modes."""
    if isinstance(vecs, dict):
        return vecs
    vecs = list(vecs)
    if len(vecs) == ndim:
        return {q: v for q, v in enumerate(vecs) if q not in exclude}
    others = [q for q in range(ndim) if q not in exclude]
    if len(vecs) != len(others):
        raise ValueError(
            f"expected {len(others)} contraction vectors (or {ndim}), got {len(vecs)}"
        )
    return dict(zip(others, vecs))


def tvc_all_but_one(t, vecs, k):
    """Contract every mode except ``k``; result has length ``N_k``.

    ``vecs`` is either one vector per mode (entry ``k`` ignored) or a list of
    the ``P - 1`` vectors for the other modes in increasing mode order.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, k)
    return _contract(t, _vec_map(t.ndim, vecs, {k}), {k})


def tvc_all_but_two(t, vecs, k, l):
    """Contract every mode except ``k`` and ``l``; result is ``N_k x N_l``.

    Calling with ``k > l`` returns the transpose of the ``(l, k)`` result.
    """
    t = np.asarray(t)
    if t.ndim <= 2:
        raise ValueError("tvc_all_but_two needs a tensor with more than two modes")
    _check_mode(t.ndim, k)
    _check_mode(t.ndim, l)
    if k == l:
        raise ValueError("k and l must differ")
    lo, hi = min(k, l), max(k, l)
    res = _contract(t, _vec_map(t.ndim, vecs, {k, l}), {lo, hi})
    return res if k < l else res.T


def _same_shape(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def hadamard(a, b):
    a, b = _same_shape(a, b)
    return a * b


def hdivide(a, b):
    """Elementwise ``a / b``; zero denominators raise with the flat (natural) index."""
    a, b = _same_shape(a, b)
    zeros = np.flatnonzero(vec(b) == 0)
    if zeros.size:
        raise ZeroDivisionError(f"zero denominator at flat index {int(zeros[0])}")
    return a / b


def hpower(a, k):
    return np.asarray(a, dtype=float) ** k
