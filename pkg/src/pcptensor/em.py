"""ECM and multi-cycle ECM fitting of the Poisson CP model.

``schedule="ecm"`` runs one E-step per outer iteration followed by ``P``
conditional maximizations, each using the latest values of the other
factors. ``schedule="mcecm"`` refreshes the E-step before every
multiplicative pass; with ``inner_iters=1`` and two modes this is the
Lee-Seung KL update, with ``inner_iters=k`` it is the CP-APR ordering.
"""

from dataclasses import dataclass, field
import csv
import io
import time
import warnings

import numpy as np

from .kruskal import EPS_POS, KruskalModel, column_weights, normalize
from .likelihood import _zbar_mode, loglik
from .tensor_core import khatri_rao, matricize

__all__ = [
    "FitConfig",
    "FitTrace",
    "FitError",
    "cm_step",
    "mcecm_update",
    "random_init",
    "iterate",
    "fit",
]


@dataclass(frozen=True)
class FitConfig:
    schedule: str = "mcecm"
    inner_iters: int = 10
    max_outer: int = 500
    tol: float = 1e-8
    seed: int = 0
    eps_pos: float = EPS_POS

    def __post_init__(self):
        if self.schedule not in ("ecm", "mcecm"):
            raise ValueError(f"schedule must be 'ecm' or 'mcecm', got {self.schedule!r}")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be at least 1")
        if self.max_outer < 0:
            raise ValueError("max_outer must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.eps_pos > 0:
            raise ValueError("eps_pos must be positive")


@dataclass
class FitTrace:
    """Per-outer-iteration record; entry 0 is the initial model."""

    loglik: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    converged: bool = False

    @property
    def n_iter(self):
        return max(len(self.loglik) - 1, 0)

    def append(self, ll, delta, seconds):
        self.loglik.append(ll)
        self.delta.append(delta)
        self.seconds.append(seconds)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "loglik", "delta", "seconds"])
        for it, row in enumerate(zip(self.loglik, self.delta, self.seconds)):
            w.writerow([it, *(repr(float(v)) for v in row)])
        return buf.getvalue()


class FitError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


def _replace(model, p, a_new):
    facs = list(model.factors)
    facs[p] = a_new
    return KruskalModel(tuple(facs))


def cm_step(x, model, p, model_bar=None, eps_pos=EPS_POS):
    """Maximize ``Q(., model_bar)`` over ``A_p`` with the other factors of ``model`` fixed.

    Returns the new ``A_p = Zbar_p diag(lambda_{-p})^{-1}`` clamped at
    ``eps_pos``. ``model_bar`` defaults to ``model``.
    """
    x = np.asarray(x, dtype=float)
    model_bar = model if model_bar is None else model_bar
    z = _zbar_mode(x, model_bar.factors, p)
    _, lam_rest = column_weights(model, p)
    return np.maximum(z / lam_rest[None, :], eps_pos)


def mcecm_update(x, model, p, kr=None, lam_rest=None, eps_pos=EPS_POS):
    """One multiplicative pass on ``A_p``.

    ``kr`` and ``lam_rest`` are the Khatri-Rao product and weight product
    of the other modes at the half-step state; they are computed from
    ``model`` when omitted and can be passed in to reuse them across inner
    iterations.
    """
    x = np.asarray(x, dtype=float)
    if kr is None:
        kr = khatri_rao(model.factors, skip={p})
    if lam_rest is None:
        lam_rest = np.prod(np.delete(model.weights(), p, axis=0), axis=0)
    a = model.factors[p]
    xp = matricize(x, p)
    new = a * ((xp / (a @ kr.T)) @ kr) / lam_rest[None, :]
    return np.maximum(new, eps_pos)


def random_init(x, rank, seed=0):
    """Uniform(0.1, 1.1) factors rescaled so the model mass equals ``sum(x)``."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    facs = [rng.uniform(0.1, 1.1, size=(n, rank)) for n in x.shape]
    mass = np.sum(np.prod([f.sum(axis=0) for f in facs], axis=0))
    total = x.sum()
    if total > 0:
        s = (total / mass) ** (1.0 / len(facs))
        facs = [f * s for f in facs]
    return KruskalModel(tuple(facs))


def _check_marginals(x):
    for p in range(x.ndim):
        marg = matricize(x, p).sum(axis=1)
        if np.any(marg == 0):
            warnings.warn(
                f"mode-{p} marginal has zero entries at {np.flatnonzero(marg == 0).tolist()}; "
                "factors will be held at the positivity floor",
                stacklevel=3,
            )


def _ecm_iteration(x, model, cfg):
    factors = list(model.factors)
    zbar = [_zbar_mode(x, model.factors, p) for p in range(model.ndim)]
    for p in range(model.ndim):
        lam_rest = np.prod([f.sum(axis=0) for q, f in enumerate(factors) if q != p], axis=0)
        factors[p] = np.maximum(zbar[p] / lam_rest[None, :], cfg.eps_pos)
    return KruskalModel(tuple(factors))


def _mcecm_iteration(x, model, cfg):
    for p in range(model.ndim):
        kr = khatri_rao(model.factors, skip={p})
        lam_rest = np.prod(np.delete(model.weights(), p, axis=0), axis=0)
        a = model.factors[p]
        for _ in range(cfg.inner_iters):
            a = mcecm_update(x, _replace(model, p, a), p, kr, lam_rest, cfg.eps_pos)
        model = _replace(model, p, a)
    return model


def iterate(x, model, cfg=None):
    """One outer iteration of the configured schedule (no normalization)."""
    cfg = FitConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=float)
    step = _ecm_iteration if cfg.schedule == "ecm" else _mcecm_iteration
    return step(x, model, cfg)


def fit(x, init, cfg=None):
    """Fit a Poisson CP model to count tensor ``x`` starting from ``init``.

    Stops when ``|delta loglik| / (1 + |loglik|) < cfg.tol`` or after
    ``cfg.max_outer`` iterations. Returns ``(model, trace)`` with the model
    normalized so that all weight sits in the first factor.
    """
    cfg = FitConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=float)
    if x.shape != init.dims:
        raise ValueError(f"data dims {x.shape} do not match init dims {init.dims}")
    _check_marginals(x)
    step = _ecm_iteration if cfg.schedule == "ecm" else _mcecm_iteration

    trace = FitTrace()
    model = init
    t0 = time.perf_counter()
    ll = loglik(x, model)
    trace.append(ll, 0.0, 0.0)
    if not np.isfinite(ll):
        raise FitError("non-finite loglikelihood at the initial model", trace)
    for _ in range(cfg.max_outer):
        new = step(x, model, cfg)
        ll_new = loglik(x, new)
        if not np.isfinite(ll_new):
            raise FitError("non-finite loglikelihood during fitting", trace)
        theta_old, theta_new = model.pack(), new.pack()
        delta = float(np.max(np.abs(theta_new - theta_old) / np.abs(theta_old)))
        trace.append(ll_new, delta, time.perf_counter() - t0)
        rel = abs(ll_new - ll) / (1.0 + abs(ll_new))
        model, ll = new, ll_new
        if rel < cfg.tol:
            trace.converged = True
            break
    return normalize(model, "absorb", 0), trace
