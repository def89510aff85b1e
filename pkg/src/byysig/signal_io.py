"""Reading pen-tablet signature files and drawing synthetic mixture data.

Signature files follow the SVC2004 layout: the first line holds the number
of points, every following line holds seven integers::

    X  Y  TIMESTAMP  BUTTON  AZIMUTH  ALTITUDE  PRESSURE

A button value of 0 marks a pen-up sample.  Other tablets can be read by
passing a different column map to :func:`parse_svc2004`.

Synthetic data is drawn with :func:`numpy.random.default_rng` (PCG64), so a
given seed reproduces the same samples on every platform numpy supports.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

GENUINE = "genuine"
FORGERY = "forgery"
UNKNOWN = "unknown"
LABELS = (GENUINE, FORGERY, UNKNOWN)

SVC2004_COLUMNS = {
    "x": 0,
    "y": 1,
    "t": 2,
    "button": 3,
    "azimuth": 4,
    "altitude": 5,
    "pressure": 6,
}

_FILENAME_RE = re.compile(r"U(\d+)S(\d+)", re.IGNORECASE)


@dataclass(frozen=True)
class RawSample:
    x: float
    y: float
    t: float
    pen_up: bool
    azimuth: int
    altitude: int
    pressure: float


@dataclass(frozen=True)
class RawSignature:
    """One signing act: time-ordered tablet samples plus its labels."""

    samples: tuple[RawSample, ...]
    user_id: str = ""
    genuineness: str = UNKNOWN
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise ValidationError("signature has no samples")
        if self.genuineness not in LABELS:
            raise ValidationError(f"unknown genuineness label {self.genuineness!r}")
        t = self.t
        if np.any(np.diff(t) < 0):
            raise ValidationError("timestamps decrease")

    def __len__(self):
        return len(self.samples)

    def _column(self, name, dtype=float):
        return np.array([getattr(s, name) for s in self.samples], dtype=dtype)

    @property
    def x(self):
        return self._column("x")

    @property
    def y(self):
        return self._column("y")

    @property
    def t(self):
        return self._column("t")

    @property
    def pressure(self):
        return self._column("pressure")

    @property
    def azimuth(self):
        return self._column("azimuth")

    @property
    def altitude(self):
        return self._column("altitude")

    @property
    def pen_up(self):
        return self._column("pen_up", dtype=bool)


def parse_svc2004(text, user_id="", genuineness=UNKNOWN, name="", columns=None):
    """Parse the contents of one SVC2004-style signature file.

    Parameters
    ----------
    text : str or iterable of str
        File contents, or an iterable of its lines.
    columns : dict, optional
        Maps ``x, y, t, button, azimuth, altitude, pressure`` to 0-based
        column positions.  Defaults to :data:`SVC2004_COLUMNS`.

    Returns
    -------
    RawSignature
    """
    cols = dict(SVC2004_COLUMNS)
    if columns:
        cols.update(columns)
    width = max(cols.values()) + 1

    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]
    # tolerate trailing blank lines, nothing else
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty file", line=1)
    try:
        count = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise ParseError(f"expected point count, got {lines[0]!r}", line=1) from None
    if count <= 0:
        raise ParseError("declared zero points" if count == 0 else "negative point count", line=1)

    body = lines[1:]
    if len(body) < count:
        raise ParseError(f"point count mismatch: header declares {count}, file ends after "
                         f"{len(body)}", line=len(lines) + 1)
    if len(body) > count:
        raise ParseError(f"point count mismatch: header declares {count}, found {len(body)}",
                         line=count + 2)

    samples = []
    mismatched = 0
    for lineno, line in enumerate(body, start=2):
        parts = line.split()
        if len(parts) < width:
            raise ParseError(f"expected {width} columns, got {len(parts)}: {line!r}", line=lineno)
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", line=lineno) from None
        pressure = values[cols["pressure"]]
        if pressure < 0:
            raise ParseError(f"negative pressure {pressure}", line=lineno)
        pen_up = values[cols["button"]] == 0
        if pen_up != (pressure == 0):
            mismatched += 1
        samples.append(RawSample(
            x=values[cols["x"]],
            y=values[cols["y"]],
            t=values[cols["t"]],
            pen_up=pen_up,
            azimuth=values[cols["azimuth"]],
            altitude=values[cols["altitude"]],
            pressure=pressure,
        ))
    if mismatched:
        warnings.warn(f"{name or 'signature'}: button status disagrees with pressure==0 "
                      f"on {mismatched} sample(s); using button status", stacklevel=2)

    try:
        return RawSignature(tuple(samples), user_id=user_id, genuineness=genuineness, name=name)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


def serialize_svc2004(sig):
    """Inverse of :func:`parse_svc2004` for the default column layout."""
    out = [str(len(sig))]
    for s in sig.samples:
        out.append(" ".join(str(int(v)) for v in (
            s.x, s.y, s.t, 0 if s.pen_up else 1, s.azimuth, s.altitude, s.pressure)))
    return "\n".join(out) + "\n"


def parse_signature_filename(path):
    """Return ``(user number, signature number)`` from a ``UxxSyy.TXT`` name, or None."""
    m = _FILENAME_RE.search(Path(path).name)
    if m is None:
        return None
    return int(m.group(1)), int(m.group(2))


def read_signature(path, genuine_count=20, columns=None):
    """Read one signature file, labelling it from its ``UxxSyy`` file name.

    Signatures numbered ``1..genuine_count`` are genuine, later ones forgeries.
    """
    path = Path(path)
    ids = parse_signature_filename(path)
    if ids is None:
        user_id, label = "", UNKNOWN
    else:
        user_id = f"U{ids[0]:02d}"
        label = GENUINE if ids[1] <= genuine_count else FORGERY
    return parse_svc2004(path.read_text(), user_id=user_id, genuineness=label,
                         name=path.stem, columns=columns)


def read_corpus(root, genuine_count=20, columns=None):
    """Read every ``UxxSyy`` file below *root*.

    Returns
    -------
    dict
        ``user_id -> list of RawSignature`` ordered by signature number.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    found = []
    for path in root.rglob("*"):
        if path.is_file() and path.suffix.lower() == ".txt":
            ids = parse_signature_filename(path)
            if ids is not None:
                found.append((ids, path))
    corpus: dict[str, list[RawSignature]] = {}
    for _, path in sorted(found):
        sig = read_signature(path, genuine_count=genuine_count, columns=columns)
        corpus.setdefault(sig.user_id, []).append(sig)
    return corpus


# --------------------------------------------------------------------------
# synthetic mixtures

@dataclass
class SyntheticSpec:
    """Ground-truth Gaussian mixture used to generate test data."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    sample_count: int
    seed: int = 0
    _chols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covs = np.asarray(self.covs, dtype=float)
        k, d = self.means.shape
        if self.covs.shape != (k, d, d) or self.weights.shape != (k,):
            raise ValidationError("weights, means and covs disagree in shape")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValidationError("weights must be positive and sum to 1")
        if int(self.sample_count) <= 0:
            raise ValidationError("sample_count must be positive")
        if int(self.seed) < 0:
            raise ValidationError("seed must be non-negative")
        chols = []
        for j, cov in enumerate(self.covs):
            if not np.allclose(cov, cov.T, atol=1e-9, rtol=0):
                raise ValidationError(f"covariance {j} is not symmetric")
            try:
                chols.append(np.linalg.cholesky(cov))
            except np.linalg.LinAlgError:
                raise ValidationError(f"covariance {j} is not positive definite") from None
        self._chols = np.array(chols)

    @property
    def k(self):
        return len(self.weights)

    @classmethod
    def from_dict(cls, obj):
        comps = obj["components"]
        return cls(
            weights=[c["weight"] for c in comps],
            means=[c["mean"] for c in comps],
            covs=[c["cov"] for c in comps],
            sample_count=obj.get("sample_count", 1000),
            seed=obj.get("seed", 0),
        )

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return {
            "components": [
                {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covs)
            ],
            "sample_count": int(self.sample_count),
            "seed": int(self.seed),
        }


def generate_mixture_samples(spec, seed=None):
    """Draw ``spec.sample_count`` points from the mixture in *spec*.

    Returns ``(X, labels)`` where ``labels[i]`` is the index of the component
    that produced ``X[i]``.  *seed* overrides ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    n = int(spec.sample_count)
    d = spec.means.shape[1]
    labels = rng.choice(spec.k, size=n, p=spec.weights)
    z = rng.standard_normal((n, d))
    X = spec.means[labels] + np.einsum("nij,nj->ni", spec._chols[labels], z)
    return X, labels


def make_signature(x, y, t, pressure, azimuth=None, altitude=None, pen_up=None,
                   user_id="", genuineness=UNKNOWN, name=""):
    """Build a :class:`RawSignature` from parallel arrays."""
    n = len(x)
    azimuth = np.zeros(n, dtype=int) if azimuth is None else azimuth
    altitude = np.zeros(n, dtype=int) if altitude is None else altitude
    if pen_up is None:
        pen_up = np.asarray(pressure) == 0
    samples = tuple(
        RawSample(x=xi, y=yi, t=ti, pen_up=bool(ui), azimuth=int(ai), altitude=int(li),
                  pressure=pi)
        for xi, yi, ti, pi, ai, li, ui in zip(x, y, t, pressure, azimuth, altitude, pen_up)
    )
    return RawSignature(samples, user_id=user_id, genuineness=genuineness, name=name)

