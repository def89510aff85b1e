"""Likelihood-ratio scoring, threshold decisions and error-rate accounting.

Rates follow the per-user convention in which false accepts and false
rejects are both counted against the user's total number of test
signatures, so that ``rate = 100 - FAR - FRR``.  Conventional per-class
rates (false accepts over forgeries, false rejects over genuines) are
reported alongside.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .mixture import MixtureModel, sequence_avg_log_density, sequence_sum_log_density
from .signal_io import FORGERY, GENUINE

ACCEPT = "accept"
REJECT = "reject"

DEFAULT_THRESHOLD = 2.0
DEFAULT_P_FORGERY = 0.5


@dataclass(frozen=True)
class UserModelPair:
    """Genuine model and forgery model for one user."""

    user_id: str
    theta_c: MixtureModel
    theta_bar: MixtureModel
    p_f: float = DEFAULT_P_FORGERY

    def __post_init__(self):
        if not 0 < self.p_f < 1:
            raise ValidationError("p_f must lie strictly between 0 and 1")
        if self.theta_c.dim != self.theta_bar.dim:
            raise ValidationError("genuine and forgery models differ in dimension")

    def to_dict(self):
        return {"user": self.user_id, "p_f": self.p_f,
                "theta_c": self.theta_c.to_dict(), "theta_bar": self.theta_bar.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["user"], MixtureModel.from_dict(obj["theta_c"]),
                   MixtureModel.from_dict(obj["theta_bar"]), float(obj["p_f"]))


def signature_score(seq, pair, aggregate="mean"):
    """Log of the posterior ratio genuine/forgery for a feature sequence.

    With ``aggregate="mean"`` each model's likelihood is the per-frame
    average log density; ``"sum"`` uses the total over frames instead.
    """
    if aggregate == "mean":
        loglik = sequence_avg_log_density
    elif aggregate == "sum":
        loglik = sequence_sum_log_density
    else:
        raise ValidationError(f"unknown aggregate {aggregate!r}")
    dim = seq.frames.shape[1] if hasattr(seq, "frames") else len(seq[0])
    if dim != pair.theta_c.dim:
        raise ValidationError(f"sequence dimension {dim} != model dimension {pair.theta_c.dim}")
    prior = math.log((1.0 - pair.p_f) / pair.p_f)
    return loglik(seq, pair.theta_c) - loglik(seq, pair.theta_bar) + prior


def decide(log_score, threshold=DEFAULT_THRESHOLD):
    """Accept when the score is at least *threshold* (compared in log space)."""
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    return ACCEPT if log_score >= math.log(threshold) else REJECT


@dataclass(frozen=True)
class Decision:
    user_id: str
    decision: str
    label: str
    signature: str = ""
    score: float = math.nan


@dataclass(frozen=True)
class UserRates:
    user_id: str
    false_accepts: int
    false_rejects: int
    total: int
    genuine: int
    forgeries: int

    @property
    def far(self):
        return 100.0 * self.false_accepts / self.total

    @property
    def frr(self):
        return 100.0 * self.false_rejects / self.total

    @property
    def rate(self):
        return 100.0 - self.far - self.frr

    @property
    def far_per_class(self):
        return 100.0 * self.false_accepts / self.forgeries if self.forgeries else math.nan

    @property
    def frr_per_class(self):
        return 100.0 * self.false_rejects / self.genuine if self.genuine else math.nan


@dataclass
class RatesReport:
    users: list[UserRates] = field(default_factory=list)

    def _mean(self, attr):
        vals = [getattr(u, attr) for u in self.users]
        return sum(vals) / len(vals) if vals else math.nan

    @property
    def far(self):
        return self._mean("far")

    @property
    def frr(self):
        return self._mean("frr")

    @property
    def rate(self):
        return 100.0 - self.far - self.frr

    @property
    def far_per_class(self):
        return self._mean("far_per_class")

    @property
    def frr_per_class(self):
        return self._mean("frr_per_class")

    def rows(self):
        header = ["user", "FA", "FR", "total", "FAR", "FRR", "rate",
                  "FAR_per_class", "FRR_per_class"]
        out = [header]
        for u in self.users:
            out.append([u.user_id, u.false_accepts, u.false_rejects, u.total,
                        f"{u.far:.4f}", f"{u.frr:.4f}", f"{u.rate:.4f}",
                        f"{u.far_per_class:.4f}", f"{u.frr_per_class:.4f}"])
        out.append(["AVERAGE",
                    sum(u.false_accepts for u in self.users),
                    sum(u.false_rejects for u in self.users),
                    sum(u.total for u in self.users),
                    f"{self.far:.4f}", f"{self.frr:.4f}", f"{self.rate:.4f}",
                    f"{self.far_per_class:.4f}", f"{self.frr_per_class:.4f}"])
        return out

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            csv.writer(fh).writerows(self.rows())

    def format_table(self):
        rows = [[str(c) for c in r] for r in self.rows()]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.insert(len(lines) - 1, lines[1])
        return "\n".join(lines)


def evaluate(decisions, users=None):
    """Tally decisions into per-user and averaged error rates.

    *decisions* is an iterable of :class:`Decision` (or ``(user_id,
    decision, label)`` tuples).  Users are reported in sorted order and the
    averages are unweighted means over users.  Any id in *users* without a
    single decision is left out of the report with a warning.
    """
    tallies: dict[str, list[int]] = {}
    for d in decisions:
        if not isinstance(d, Decision):
            d = Decision(*d)
        if d.label not in (GENUINE, FORGERY):
            raise ValidationError(f"decision for {d.user_id} has label {d.label!r}")
        if d.decision not in (ACCEPT, REJECT):
            raise ValidationError(f"unknown decision {d.decision!r}")
        fa, fr, gen, forg = tallies.setdefault(d.user_id, [0, 0, 0, 0])
        if d.label == GENUINE:
            gen += 1
            fr += d.decision == REJECT
        else:
            forg += 1
            fa += d.decision == ACCEPT
        tallies[d.user_id] = [fa, fr, gen, forg]

    for user in sorted(set(users or ()) - set(tallies)):
        warnings.warn(f"user {user} has no test signatures; excluded", stacklevel=2)
    report = RatesReport()
    for user in sorted(tallies):
        fa, fr, gen, forg = tallies[user]
        report.users.append(UserRates(user, fa, fr, gen + forg, gen, forg))
    return report
