import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from byysig.signal_io import make_signature, serialize_svc2004  # noqa: E402

DATA = Path(__file__).parent / "data"


def synthetic_signature(user, index, forged, n=160, rng=None):
    """A pen trajectory built from a few user-specific harmonics.

    Genuine samples jitter the user's harmonics slightly; forgeries distort
    amplitudes, phases and pressure more strongly and write more slowly.
    """
    base = np.random.default_rng(1000 + user)
    amps = base.uniform(200, 900, size=(2, 3))
    freqs = base.uniform(0.5, 3.0, size=(2, 3))
    phases = base.uniform(0, 2 * np.pi, size=(2, 3))
    rng = rng or np.random.default_rng(user * 100 + index)
    jitter = 0.25 if forged else 0.03
    a = amps * (1 + jitter * rng.standard_normal(amps.shape))
    ph = phases + (0.8 if forged else 0.05) * rng.standard_normal(phases.shape)
    s = np.linspace(0, 2 * np.pi, n)
    x = 5000 + (a[0, :, None] * np.sin(freqs[0, :, None] * s + ph[0, :, None])).sum(0)
    y = 5000 + (a[1, :, None] * np.cos(freqs[1, :, None] * s + ph[1, :, None])).sum(0)
    pressure = 400 + (150 if forged else 250) * np.sin(3 * s + (1.5 if forged else 0.2)) ** 2
    pressure += rng.normal(0, 10, n)
    lifts = [n // 3, 2 * n // 3]
    for lift in lifts:
        pressure[lift:lift + 4] = 0
    pressure = np.clip(np.rint(pressure), 0, None).astype(int)
    step = 14 if forged else 10
    t = 31275775 + step * np.arange(n) + np.cumsum(rng.integers(0, 2, n))
    az = (1500 + 50 * np.sin(s + user)).astype(int)
    alt = (700 + 20 * np.cos(s)).astype(int)
    return make_signature(np.rint(x).astype(int), np.rint(y).astype(int), t, pressure,
                          azimuth=az, altitude=alt,
                          user_id=f"U{user:02d}", genuineness="forgery" if forged else "genuine",
                          name=f"U{user}S{index}")


def write_corpus(root, users=(1, 2), per_class=20):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for user in users:
        for idx in range(1, 2 * per_class + 1):
            sig = synthetic_signature(user, idx, forged=idx > per_class)
            (root / f"U{user}S{idx}.TXT").write_text(serialize_svc2004(sig))
    return root


@pytest.fixture
def corpus_dir(tmp_path):
    return write_corpus(tmp_path / "corpus")


@pytest.fixture
def fixture_file():
    return DATA / "U01S01.TXT"


# three well-separated 2-D Gaussians: pairwise mean distance >= 6, unit std
THREE_GAUSS_PATH = Path(__file__).resolve().parents[1] / "specs" / "three_gauss.json"
THREE_GAUSS = json.loads(THREE_GAUSS_PATH.read_text())


def mean_errors(found, truth):
    """Distance from every true mean to its nearest recovered mean."""
    found = np.asarray(found)
    return np.array([np.min(np.linalg.norm(found - m, axis=1)) for m in np.asarray(truth)])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
