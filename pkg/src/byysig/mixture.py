"""Gaussian mixture models with full covariances, evaluated in log space."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import NumericError, ValidationError

LOG_2PI = np.log(2.0 * np.pi)

COV_FLOOR = 1e-6


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self):
        return len(self.mean)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class MixtureModel:
    """Weighted sum of ``k`` Gaussians in ``d`` dimensions.

    Parameters are stored stacked: ``weights`` (k,), ``means`` (k, d) and
    ``covs`` (k, d, d).  Instances are immutable.
    """

    def __init__(self, weights, means, covs, check=True):
        self.weights = _frozen(weights).reshape(-1)
        self.means = _frozen(np.atleast_2d(means))
        self.covs = _frozen(covs).reshape(len(self.weights), self.means.shape[1],
                                           self.means.shape[1])
        if check:
            self._validate()

    def _validate(self):
        k = len(self.weights)
        if k < 1:
            raise ValidationError("a mixture needs at least one component")
        if self.means.shape[0] != k:
            raise ValidationError("weights and means disagree on k")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValidationError("weights must be finite and non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValidationError(f"weights sum to {self.weights.sum()!r}, not 1")
        if not np.allclose(self.covs, np.swapaxes(self.covs, 1, 2), rtol=0, atol=1e-9):
            raise ValidationError("covariances must be symmetric")

    @classmethod
    def from_components(cls, components):
        comps = list(components)
        return cls([c.weight for c in comps], [c.mean for c in comps], [c.cov for c in comps])

    @property
    def k(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def components(self):
        return [GaussianComponent(float(w), m, c)
                for w, m, c in zip(self.weights, self.means, self.covs)]

    @cached_property
    def _factors(self):
        chols = np.empty_like(self.covs)
        for j, cov in enumerate(self.covs):
            try:
                chols[j] = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise NumericError("covariance is not positive definite", component=j) from None
        logdets = 2.0 * np.log(np.diagonal(chols, axis1=1, axis2=2)).sum(axis=1)
        return chols, logdets

    def component_log_densities(self, X):
        """``ln G(x_t | m_j, cov_j)`` for every row of *X*, shape ``(N, k)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValidationError(f"data has dimension {X.shape[1]}, model has {self.dim}")
        chol_inv, logdets = self._whiteners
        z = np.matmul(X[None, :, :] - self.means[:, None, :], np.swapaxes(chol_inv, 1, 2))
        return -0.5 * (self.dim * LOG_2PI + logdets + (z * z).sum(axis=2).T)

    @cached_property
    def _whiteners(self):
        chols, logdets = self._factors
        eye = np.eye(self.dim)
        inv = np.array([solve_triangular(c, eye, lower=True) for c in chols])
        return inv, logdets

    def weighted_log_densities(self, X):
        """``ln a_j + ln G(x_t | m_j, cov_j)``; ``-inf`` for zero-weight components."""
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        out = self.component_log_densities(X) + logw
        out[:, self.weights == 0] = -np.inf
        return out

    def log_density(self, X):
        """Mixture log density of each row of *X*."""
        if not np.any(self.weights > 0):
            raise ValidationError("all mixture weights are zero")
        return logsumexp(self.weighted_log_densities(X), axis=1)

    def prune(self, threshold):
        """Drop components with weight below *threshold* and renormalize."""
        keep = self.weights >= threshold
        if not keep.any():
            raise ValidationError("pruning would remove every component")
        w = self.weights[keep]
        return MixtureModel(w / w.sum(), self.means[keep], self.covs[keep])

    def to_dict(self):
        return {
            "dim": int(self.dim),
            "components": [
                {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covs)
            ],
        }

    @classmethod
    def from_dict(cls, obj):
        comps = obj["components"]
        d = int(obj["dim"])
        model = cls([c["weight"] for c in comps],
                    np.reshape([c["mean"] for c in comps], (len(comps), d)),
                    [c["cov"] for c in comps])
        return model

    def __eq__(self, other):
        if not isinstance(other, MixtureModel):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.covs, other.covs))

    __hash__ = None

    def __repr__(self):
        return f"MixtureModel(k={self.k}, dim={self.dim})"


def component_log_density(u, comp):
    """Log density of the Gaussian *comp* at the point *u*."""
    model = MixtureModel([1.0], [comp.mean], [comp.cov])
    return float(model.component_log_densities(np.asarray(u, dtype=float).reshape(1, -1))[0, 0])


def mixture_log_density(u, model):
    """``ln sum_j a_j G(u | m_j, cov_j)`` at a single point *u*."""
    return float(model.log_density(np.asarray(u, dtype=float).reshape(1, -1))[0])


def sequence_avg_log_density(seq, model):
    """Mean per-frame mixture log density of a feature sequence.

    *seq* may be a normalized :class:`~byysig.features.FeatureSequence` or a
    plain ``(N, d)`` array.
    """
    frames = _frames(seq)
    return float(model.log_density(frames).mean())


def sequence_sum_log_density(seq, model):
    frames = _frames(seq)
    return float(model.log_density(frames).sum())


def _frames(seq):
    if hasattr(seq, "frames"):
        if not seq.normalized:
            raise ValidationError("feature sequence must be normalized before scoring")
        frames = seq.frames
    else:
        frames = np.atleast_2d(np.asarray(seq, dtype=float))
    if frames.size == 0 or len(frames) == 0:
        raise ValidationError("cannot score an empty sequence")
    return frames


def apply_covariance_floor(cov, floor=COV_FLOOR):
    """Lift a near-singular covariance.

    When the smallest eigenvalue is below ``floor * trace / d``, that same
    amount is added to the diagonal.  A zero-trace matrix gets ``floor``
    added in absolute terms.
    """
    cov = 0.5 * (cov + cov.T)
    d = cov.shape[0]
    level = floor * np.trace(cov) / d
    if not level > 0:
        level = floor
    if np.linalg.eigvalsh(cov)[0] < level:
        cov = cov + level * np.eye(d)
    return cov


def save_model(model, path):
    Path(path).write_text(dumps_model(model))


def load_model(path):
    return MixtureModel.from_dict(json.loads(Path(path).read_text()))


def dumps_model(model):
    # json writes floats with repr(), the shortest string that round-trips exactly
    return json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n"
