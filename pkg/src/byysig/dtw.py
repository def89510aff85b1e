"""Dynamic time warping baseline with min/max template enrollment.

Each signature is summarised by a fixed list of global features.  The
enrollment set yields a per-feature minimum vector (the template) and a
maximum vector; the DTW distance between the two is the acceptance
threshold.  A questioned signature is accepted when the DTW distance from
its feature vector to the template does not exceed that threshold.

Feature vectors are compared as scalar sequences, element by element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import compute_dynamics

FEATURE_NAMES = (
    "duration",
    "height_width_ratio",
    "std_x",
    "std_y",
    "std_pressure",
    "std_azimuth",
    "mean_abs_vx",
    "mean_abs_vy",
    "mean_pressure",
    "mean_azimuth",
    "max_speed",
    "pen_up_fraction",
    "path_length",
    "pen_up_transitions",
    "mean_theta",
    "std_theta",
)

_DENOM_FLOOR = 1e-9


def global_features(raw):
    """Summarise *raw* as the 16 values named in :data:`FEATURE_NAMES`."""
    if len(raw) < 2:
        raise ValidationError("global features need at least 2 samples")
    x, y, t, p, az, up = raw.x, raw.y, raw.t, raw.pressure, raw.azimuth, raw.pen_up
    dt = np.diff(t)
    if np.any(dt == 0):
        raise ValidationError("zero time step")
    vx = np.diff(x) / dt
    vy = np.diff(y) / dt
    speed, theta = compute_dynamics(raw)
    width = x.max() - x.min()
    height = y.max() - y.min()
    feats = np.array([
        t[-1] - t[0],
        height / max(width, _DENOM_FLOOR),
        x.std(),
        y.std(),
        p.std(),
        az.std(),
        np.abs(vx).mean(),
        np.abs(vy).mean(),
        p.mean(),
        az.mean(),
        speed.max(),
        up.mean(),
        np.hypot(np.diff(x), np.diff(y)).sum(),
        np.count_nonzero(~up[:-1] & up[1:]),
        theta.mean(),
        theta.std(),
    ], dtype=float)
    if not np.all(np.isfinite(feats)):
        raise ValidationError("non-finite global feature")
    return feats


def _as_frames(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or len(a) == 0:
        raise ValidationError("DTW inputs must be non-empty sequences")
    return a


def dtw_distance(a, b):
    """Total cost of the cheapest monotone alignment of *a* and *b*.

    Steps are (1, 0), (0, 1) and (1, 1); the local cost is the Euclidean
    distance between elements.  Elements may be scalars or vectors.
    """
    a, b = _as_frames(a), _as_frames(b)
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"element dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return float(acc[n, m])


@dataclass(frozen=True)
class DtwEnrollment:
    v_small: np.ndarray
    v_big: np.ndarray
    threshold: float

    def to_dict(self):
        return {"v_small": self.v_small.tolist(), "v_big": self.v_big.tolist(),
                "threshold": self.threshold, "features": list(FEATURE_NAMES)}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["v_small"], dtype=float),
                   np.asarray(obj["v_big"], dtype=float), float(obj["threshold"]))


def dtw_enroll(genuine):
    """Build the min/max template pair from at least two genuine signatures."""
    genuine = list(genuine)
    if len(genuine) < 2:
        raise ValidationError("DTW enrollment needs at least 2 signatures")
    feats = np.array([global_features(sig) for sig in genuine])
    v_small = feats.min(axis=0)
    v_big = feats.max(axis=0)
    return DtwEnrollment(v_small, v_big, dtw_distance(v_small, v_big))


def dtw_verify(sig, enrollment):
    """Return ``(accepted, distance)`` for a questioned signature."""
    dist = dtw_distance(global_features(sig), enrollment.v_small)
    return dist <= enrollment.threshold, dist
