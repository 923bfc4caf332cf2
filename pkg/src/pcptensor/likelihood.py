"""Poisson CP loglikelihood, score, and the EM surrogate ``Q``.

Additive constants that do not depend on the free parameters are dropped
from ``Q``; :func:`loglik` keeps the ``-log(x!)`` term so its absolute
value is comparable with other Poisson tools.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .kruskal import KruskalModel, column_weights, full_tensor
from .tensor_core import khatri_rao, matricize

__all__ = [
    "CondExpectation",
    "loglik",
    "score",
    "batch_scores",
    "cond_expectation",
    "q_value",
    "q_value_mode",
    "q_gradient",
    "q_hessian",
]


def _check_dims(x, model):
    x = np.asarray(x, dtype=float)
    if x.shape != model.dims:
        raise ValueError(f"data dims {x.shape} do not match model dims {model.dims}")
    return x


def loglik(x, model):
    """``sum_i x_i log m_i - m_i - log(x_i!)``."""
    x = _check_dims(x, model)
    m = full_tensor(model)
    return float(np.sum(xlogy(x, m) - m - gammaln(x + 1.0)))


def _vec_blocks(blocks):
    return np.concatenate([b.ravel(order="F") for b in blocks])


def score(x, model):
    """Gradient of :func:`loglik` in ``theta`` order."""
    x = _check_dims(x, model)
    ratio = x / full_tensor(model) - 1.0
    return _vec_blocks(
        matricize(ratio, p) @ khatri_rao(model.factors, skip={p})
        for p in range(model.ndim)
    )


def batch_scores(xs, model):
    """Scores for a stack of samples ``xs`` of shape ``(K, *dims)``.

    Returns a ``(K, R * sum(N))`` array, row ``k`` equal to
    ``score(xs[k], model)``.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.shape[1:] != model.dims:
        raise ValueError(f"sample dims {xs.shape[1:]} do not match {model.dims}")
    K = xs.shape[0]
    ratio = xs / full_tensor(model)[None] - 1.0
    out = []
    for p, n in enumerate(model.dims):
        unf = np.moveaxis(ratio, p + 1, 1).reshape(K, n, -1, order="F")
        g = unf @ khatri_rao(model.factors, skip={p})
        out.append(g.transpose(0, 2, 1).reshape(K, -1))
    return np.concatenate(out, axis=1)


@dataclass(frozen=True)
class CondExpectation:
    """Mode summaries ``Zbar_p`` (``N_p x R``) of ``E[Z | x, model_bar]``."""

    zbar: tuple
    model_bar: KruskalModel

    def __getitem__(self, p):
        return self.zbar[p]

    def __len__(self):
        return len(self.zbar)


def _zbar_mode(x, factors, p):
    kr = khatri_rao(factors, skip={p})
    a = factors[p]
    return a * ((matricize(x, p) / (a @ kr.T)) @ kr)


def cond_expectation(x, model_bar):
    """E-step: ``Zbar_p = Abar_p * ([X_(p) / (Abar_p B^T)] B)`` for every mode."""
    x = _check_dims(x, model_bar)
    return CondExpectation(
        tuple(_zbar_mode(x, model_bar.factors, p) for p in range(model_bar.ndim)),
        model_bar,
    )


def _as_zbar(x, model, model_bar, zbar):
    if zbar is None:
        zbar = cond_expectation(x, model_bar)
    if model_bar.dims != model.dims or model_bar.rank != model.rank:
        raise ValueError("model and model_bar must share dims and rank")
    return zbar


def q_value(model, model_bar, x, zbar=None):
    """Expected complete loglikelihood ``Q(theta, theta_bar)`` up to a constant.

    ``sum_p 1^T (Zbar_p * log A_p) 1 - sum_r prod_p lambda_p[r]``.
    """
    x = _check_dims(x, model)
    zbar = _as_zbar(x, model, model_bar, zbar)
    lam = model.weights()
    logterm = sum(float(np.sum(xlogy(z, a))) for z, a in zip(zbar, model.factors))
    return logterm - float(np.sum(np.prod(lam, axis=0)))


def q_value_mode(model, model_bar, x, p, zbar=None):
    """The part of ``Q`` that depends on ``A_p``.

    ``1^T [Zbar_p * log A_p - A_p diag(lambda_{-p})] 1``; adding the other
    modes' ``Zbar_q * log A_q`` sums recovers :func:`q_value`.
    """
    x = _check_dims(x, model)
    zbar = _as_zbar(x, model, model_bar, zbar)
    _, lam_rest = column_weights(model, p)
    a = model.factors[p]
    return float(np.sum(xlogy(zbar[p], a)) - np.sum(a * lam_rest[None, :]))


def q_gradient(model, model_bar, x, zbar=None):
    """Gradient of ``Q`` in ``theta``: block ``p`` is ``vec(Zbar_p / A_p) - lambda_{-p} kron 1``."""
    x = _check_dims(x, model)
    zbar = _as_zbar(x, model, model_bar, zbar)
    blocks = []
    for p, a in enumerate(model.factors):
        _, lam_rest = column_weights(model, p)
        blocks.append(zbar[p] / a - lam_rest[None, :])
    return _vec_blocks(blocks)


def q_hessian(model, model_bar, x, zbar=None):
    """Hessian of ``Q`` in ``theta`` (``theta_bar`` held fixed)."""
    x = _check_dims(x, model)
    zbar = _as_zbar(x, model, model_bar, zbar)
    dims, R, P = model.dims, model.rank, model.ndim
    lam = model.weights()
    offs = np.cumsum([0] + [R * n for n in dims])
    H = np.zeros((offs[-1], offs[-1]))
    for k in range(P):
        a = model.factors[k]
        H[offs[k]:offs[k + 1], offs[k]:offs[k + 1]] = -np.diag(
            (zbar[k] / a**2).ravel(order="F")
        )
        for l in range(P):
            if l == k:
                continue
            rest = [q for q in range(P) if q not in (k, l)]
            lam_kl = np.prod(lam[rest], axis=0) if rest else np.ones(R)
            H[offs[k]:offs[k + 1], offs[l]:offs[l + 1]] = -np.kron(
                np.diag(lam_kl), np.ones((dims[k], dims[l]))
            )
    return H
