"""Fixed-k expectation maximisation, the baseline without model selection."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .byy import init_model
from .errors import ValidationError
from .mixture import MixtureModel, apply_covariance_floor


def e_step(X, model):
    """Responsibilities and average log-likelihood under *model*."""
    logp = np.column_stack([
        np.log(w) + multivariate_normal.logpdf(X, mean=m, cov=c, allow_singular=False)
        if w > 0 else np.full(len(X), -np.inf)
        for w, m, c in zip(model.weights, model.means, model.covs)
    ])
    norm = logsumexp(logp, axis=1)
    return np.exp(logp - norm[:, None]), float(norm.mean())


def m_step(X, resp, previous):
    n = len(X)
    weights, means, covs = [], [], []
    for j in range(resp.shape[1]):
        r = resp[:, j]
        total = r.sum()
        weights.append(total / n)
        if total > 0:
            mean = np.average(X, axis=0, weights=r)
            cov = np.atleast_2d(np.cov(X, rowvar=False, aweights=r, bias=True))
        else:
            mean, cov = previous.means[j], previous.covs[j]
        means.append(mean)
        covs.append(apply_covariance_floor(cov))
    return MixtureModel(weights, means, covs)


def em_fit(data, k, seed=0, tol=1e-6, max_iters=200, init=None, callback=None):
    """Fit a *k*-component mixture by EM.

    Starts from the same farthest-point initialisation as the annealed
    learner and stops once the average log-likelihood changes by less than
    *tol*.

    Returns
    -------
    model : MixtureModel
    loglik : list of float
        Average log-likelihood of the initial model and after every step.
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    if len(X) <= k:
        raise ValidationError(f"need more data points ({len(X)}) than components ({k})")
    model = init if init is not None else init_model(X, k, seed)
    resp, ll = e_step(X, model)
    trace = [ll]
    for _ in range(max_iters):
        model = m_step(X, resp, model)
        if callback is not None:
            callback(model)
        resp, ll = e_step(X, model)
        trace.append(ll)
        if abs(trace[-1] - trace[-2]) < tol:
            break
    return model, trace
