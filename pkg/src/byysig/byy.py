"""Annealed Bayesian Ying-Yang harmony learning for Gaussian mixtures.

The learner maximises the harmony objective

    L = 1/N sum_t sum_j p(j|x_t) ln[a_j G(x_t | m_j, S_j)]

plus a posterior-entropy term weighted by a temperature ``lam``.  At
``lam = 1`` the alternating updates are ordinary EM; as ``lam`` decays the
posteriors harden and redundant components lose their weight.  Components
whose weight falls below ``prune_threshold`` are removed, so the number of
surviving components is selected by the fit itself.

Weight collapse alone leaves two kinds of redundancy behind once the
posteriors are hard: a true cluster split between two components, and
small clumps of a few points held by near-singular covariances.  The first
is handled by a discard search at the final temperature (drop a component,
re-converge, keep the change if the objective did not fall); the second by
a pruning threshold of a few percent rather than a fraction of one sample.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FitError, ValidationError
from .mixture import MixtureModel, apply_covariance_floor


@dataclass(frozen=True)
class AnnealConfig:
    k_init: int = 32
    lambda_init: float = 1.0
    lambda_decay: float = 0.9
    lambda_min: float = 0.01
    prune_threshold: float = 0.02
    max_outer_iters: int | None = None
    max_inner_iters: int = 200
    tol: float = 1e-6
    seed: int = 0
    prune: bool = True
    discard_search: bool = True

    def __post_init__(self):
        if self.k_init < 1:
            raise ValidationError("k_init must be positive")
        if not 0 < self.lambda_min < self.lambda_init <= 1:
            raise ValidationError("need 0 < lambda_min < lambda_init <= 1")
        if not 0 < self.lambda_decay < 1:
            raise ValidationError("lambda_decay must lie in (0, 1)")
        if not 0 < self.prune_threshold < 1.0 / self.k_init:
            raise ValidationError("prune_threshold must lie in (0, 1/k_init)")
        if self.max_inner_iters < 1:
            raise ValidationError("max_inner_iters must be positive")
        if self.max_outer_iters is not None and self.max_outer_iters < 1:
            raise ValidationError("max_outer_iters must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    def schedule(self):
        """Temperatures visited by the outer loop."""
        lams = [self.lambda_init]
        while lams[-1] > self.lambda_min:
            lams.append(max(self.lambda_min, self.lambda_decay * lams[-1]))
        if self.max_outer_iters is not None:
            lams = lams[:self.max_outer_iters]
        return lams


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    lam: float
    k: int
    harmony: float
    annealed: float
    inner_iters: int


@dataclass
class FitTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def lambdas(self):
        return [r.lam for r in self.records]

    @property
    def ks(self):
        return [r.k for r in self.records]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "lambda", "k", "L", "L_lambda", "inner_iters"])
            for r in self.records:
                writer.writerow([r.iteration, repr(r.lam), r.k, repr(r.harmony),
                                 repr(r.annealed), r.inner_iters])


# -- building blocks ---------------------------------------------------------

def _check_data(data):
    X = np.atleast_2d(np.asarray(data, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValidationError("data contains non-finite values")
    return X


def _logsumexp_rows(a):
    top = a.max(axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return top + np.log(np.exp(a - top).sum(axis=1, keepdims=True))


def _log_posterior_from(wld, lam):
    logits = wld / lam
    return logits - _logsumexp_rows(logits)


def _posterior_from(wld, lam):
    return np.exp(_log_posterior_from(wld, lam))


def _expected(p, wld):
    """``1/N sum_t sum_j p_tj * wld_tj`` with ``0 * (-inf)`` read as 0."""
    terms = np.where(p > 0, p * np.where(np.isfinite(wld), wld, 0.0), 0.0)
    return terms.sum() / len(p)


def _tempered(wld, lam):
    """Tempered posterior together with the annealed objective it attains."""
    logp = _log_posterior_from(wld, lam)
    p = np.exp(logp)
    entropy = -np.where(p > 0, p * np.where(p > 0, logp, 0.0), 0.0).sum() / len(p)
    return p, _expected(p, wld) + lam * entropy


def _annealed_from(wld, lam):
    if lam == 0:
        p = np.zeros_like(wld)
        p[np.arange(len(wld)), np.argmax(wld, axis=1)] = 1.0
        return _expected(p, wld)
    return _tempered(wld, lam)[1]


def posterior(data, model, lam):
    """Tempered responsibilities ``p(j|x_t) ~ [a_j G(x_t|m_j,S_j)]**(1/lam)``.

    Returns an ``(N, k)`` array whose rows sum to one.
    """
    if not lam > 0:
        raise ValidationError(f"temperature must be positive, got {lam!r}")
    return _posterior_from(model.weighted_log_densities(_check_data(data)), lam)


def update_parameters(data, resp, previous=None):
    """Maximise the harmony objective over the mixture given responsibilities.

    Weights are the mean responsibilities, means the responsibility-weighted
    averages, covariances the weighted scatter about the new means; the
    covariance floor is applied afterwards.  A component that receives no
    responsibility gets weight 0 and keeps its mean and covariance from
    *previous* (or the pooled data moments if *previous* is None).
    """
    X = _check_data(data)
    resp = np.asarray(resp, dtype=float)
    n, d = X.shape
    if resp.shape[0] != n or n < 1:
        raise ValidationError("responsibilities do not match the data")
    k = resp.shape[1]

    nk = resp.sum(axis=0)
    weights = nk / n
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        if nk[j] > 0:
            means[j] = resp[:, j] @ X / nk[j]
            diff = X - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
        elif previous is not None:
            means[j] = previous.means[j]
            covs[j] = previous.covs[j]
        else:
            means[j] = X.mean(axis=0)
            diff = X - means[j]
            covs[j] = diff.T @ diff / n
        covs[j] = apply_covariance_floor(covs[j])
    return MixtureModel(weights, means, covs)


def harmony(data, model):
    """Harmony objective ``L`` under the untempered (``lam = 1``) posterior."""
    wld = model.weighted_log_densities(_check_data(data))
    return _expected(_posterior_from(wld, 1.0), wld)


def annealed_objective(data, model, lam):
    """Harmony form under the tempered posterior plus ``lam`` times its entropy.

    ``lam = 0`` uses winner-take-all posteriors and has no entropy term.
    """
    if lam < 0:
        raise ValidationError("temperature must be non-negative")
    return _annealed_from(model.weighted_log_densities(_check_data(data)), lam)


def init_model(data, k, seed=0):
    """Starting mixture for both BYY and EM fits.

    Means are *k* data points picked by a farthest-point sweep from a random
    start, every covariance is the pooled data covariance, weights are equal.
    """
    X = _check_data(data)
    n = len(X)
    if n <= k:
        raise ValidationError(f"need more data points ({n}) than components ({k})")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    dist = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum((X - X[nxt]) ** 2, axis=1))
    diff = X - X.mean(axis=0)
    cov = apply_covariance_floor(diff.T @ diff / n)
    return MixtureModel(np.full(k, 1.0 / k), X[chosen], np.repeat(cov[None], k, axis=0))


# -- the annealing loop ------------------------------------------------------

def anneal_fit(data, cfg=None, init=None, callback=None):
    """Fit a mixture by annealed harmony learning with component pruning.

    Parameters
    ----------
    data : array_like, shape (N, d)
    cfg : AnnealConfig, optional
    init : MixtureModel, optional
        Starting point; by default :func:`init_model` with ``cfg.k_init``
        components and ``cfg.seed``.
    callback : callable, optional
        Called as ``callback(model, lam)`` after every parameter update.

    Returns
    -------
    model : MixtureModel
        Surviving components only.
    trace : FitTrace
        One record per temperature.
    """
    cfg = cfg or AnnealConfig()
    X = _check_data(data)
    if len(X) <= cfg.k_init:
        raise ValidationError(f"need more data points ({len(X)}) than k_init ({cfg.k_init})")
    model = init if init is not None else init_model(X, cfg.k_init, cfg.seed)
    trace = FitTrace()

    schedule = cfg.schedule()
    for outer, lam in enumerate(schedule):
        model, obj, inner = _converge(X, model, lam, cfg, callback)
        if cfg.prune:
            model, obj = _prune(X, model, lam, cfg.prune_threshold, obj)
            if cfg.discard_search and outer == len(schedule) - 1:
                model, obj = _discard_search(X, model, lam, cfg)

        wld = model.weighted_log_densities(X)
        trace.records.append(TraceRecord(
            iteration=outer, lam=lam, k=model.k,
            harmony=_expected(_posterior_from(wld, 1.0), wld),
            annealed=obj, inner_iters=inner,
        ))
        if not math.isfinite(obj):
            raise FitError(f"objective became non-finite at lambda={lam}")
    return model, trace


def _converge(X, model, lam, cfg, callback=None):
    """Alternate posterior and parameter updates at a fixed temperature."""
    resp, obj = _tempered(model.weighted_log_densities(X), lam)
    inner = 0
    while inner < cfg.max_inner_iters:
        inner += 1
        model = update_parameters(X, resp, previous=model)
        resp, new = _tempered(model.weighted_log_densities(X), lam)
        if callback is not None:
            callback(model, lam)
        converged = abs(new - obj) < cfg.tol
        obj = new
        if converged:
            break
    return model, obj, inner


def _prune(X, model, lam, threshold, obj):
    keep = model.weights >= threshold
    if not keep.any():
        raise FitError("every component was pruned")
    if keep.all():
        return model, obj
    model = model.prune(threshold)
    return model, _annealed_from(model.weighted_log_densities(X), lam)


def _discard_search(X, model, lam, cfg):
    """Greedily drop components while doing so does not lower the objective.

    Candidates are tried from the lightest component up; after an accepted
    discard the search restarts on the smaller model.
    """
    model, obj, _ = _converge(X, model, lam, cfg)
    while model.k > 1:
        for j in np.argsort(model.weights, kind="stable"):
            keep = np.arange(model.k) != j
            w = model.weights[keep]
            cand = MixtureModel(w / w.sum(), model.means[keep], model.covs[keep])
            cand, cand_obj, _ = _converge(X, cand, lam, cfg)
            if cand_obj >= obj:
                model, obj = _prune(X, cand, lam, cfg.prune_threshold, cand_obj)
                break
        else:
            break
    return model, obj
