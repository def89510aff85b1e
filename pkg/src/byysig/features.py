"""Per-frame feature extraction: position, pressure, speed and direction.

Each frame of a signature becomes ``[x, y, p, v, theta]`` where ``v`` is
the pen speed and ``theta`` the direction of motion.  Columns are then
z-scored per signature.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

COLUMNS = ("x", "y", "p", "v", "theta")

# relative spread below which a column counts as constant
_CONSTANT_RTOL = 1e-12


@dataclass(frozen=True)
class FeatureSequence:
    """Frames of one signature, one row per tablet sample.

    ``stats`` holds ``(mean, std)`` per column when ``normalized`` is set;
    a recorded std of 0 marks a constant column that was mapped to zeros.
    """

    frames: np.ndarray
    normalized: bool = False
    stats: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2 or frames.shape[1] != len(COLUMNS):
            raise ValidationError(f"frames must be N x {len(COLUMNS)}, got {frames.shape}")
        if len(frames) < 2:
            raise ValidationError("a feature sequence needs at least 2 frames")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)


def _derivative(values, t):
    """Central differences inside, one-sided at both ends."""
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (t[2:] - t[:-2])
    d[0] = (values[1] - values[0]) / (t[1] - t[0])
    d[-1] = (values[-1] - values[-2]) / (t[-1] - t[-2])
    return d


def compute_dynamics(raw):
    """Return pen speed ``v`` and direction ``theta`` for every sample.

    ``theta`` is the four-quadrant angle of the velocity vector in
    ``(-pi, pi]``.  Where the pen is stationary the previous angle is
    carried forward (0 before the first movement).
    """
    if len(raw) < 2:
        raise ValidationError("dynamics need at least 2 samples")
    t = raw.t
    dt = np.diff(t)
    if np.any(dt == 0):
        i = int(np.flatnonzero(dt == 0)[0])
        raise ValidationError(f"zero time step between samples {i} and {i + 1}")
    if np.any(dt < 0):
        raise ValidationError("timestamps decrease")

    dx = _derivative(raw.x, t)
    dy = _derivative(raw.y, t)
    v = np.hypot(dx, dy)

    theta = np.arctan2(dy, dx)
    theta[theta == -np.pi] = np.pi
    moving = v > 0
    if not moving.all():
        # forward-fill the angle over stationary frames
        idx = np.where(moving, np.arange(len(v)), -1)
        np.maximum.accumulate(idx, out=idx)
        theta = np.where(idx >= 0, theta[np.maximum(idx, 0)], 0.0)
    return v, theta


def build_feature_sequence(raw):
    """Assemble the unnormalized ``[x, y, p, v, theta]`` frames of *raw*.

    Pen-up frames are kept; azimuth and altitude are ignored.
    """
    v, theta = compute_dynamics(raw)
    frames = np.column_stack([raw.x, raw.y, raw.pressure, v, theta])
    return FeatureSequence(frames, normalized=False, name=raw.name)


def column_stats(frames):
    """Per-column mean and population standard deviation, shape ``(5, 2)``."""
    frames = np.asarray(frames, dtype=float)
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    scale = np.maximum(np.abs(mean), np.abs(frames).max(axis=0))
    std = np.where(std <= _CONSTANT_RTOL * np.maximum(scale, 1.0), 0.0, std)
    return np.column_stack([mean, std])


def normalize(seq, stats=None):
    """Z-score every column of *seq*.

    By default the mean and population std come from *seq* itself.  Passing
    *stats* (as returned by :func:`column_stats`) applies shared statistics
    instead, e.g. pooled over a user's enrollment set.  Columns whose std is
    0 become all zeros.
    """
    if seq.normalized:
        raise ValidationError("sequence is already normalized")
    frames = seq.frames
    stats = column_stats(frames) if stats is None else np.asarray(stats, dtype=float)
    mean, std = stats[:, 0], stats[:, 1]
    safe = np.where(std > 0, std, 1.0)
    out = np.where(std > 0, (frames - mean) / safe, 0.0)
    return FeatureSequence(out, normalized=True, stats=stats, name=seq.name)


def signature_features(raw, stats=None):
    """Shortcut for ``normalize(build_feature_sequence(raw), stats)``."""
    return normalize(build_feature_sequence(raw), stats)


def write_feature_csv(seq, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in seq.frames:
            writer.writerow([repr(float(v)) for v in row])
    return path
