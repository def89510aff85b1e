"""Per-user enrollment and scoring over a labelled signature corpus.

Each user's first ``train_genuine`` genuine signatures train the genuine
model and the first ``train_forgery`` forgeries train the forgery model.
Every signature of the user (optionally only the held-out ones) is then
scored and thresholded, and the decisions are tallied into a
:class:`~byysig.verify.RatesReport`.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .byy import AnnealConfig, anneal_fit
from .dtw import DtwEnrollment, dtw_enroll, dtw_verify
from .em import em_fit
from .errors import ValidationError
from .features import build_feature_sequence, column_stats, normalize
from .signal_io import FORGERY, GENUINE
from .verify import (ACCEPT, REJECT, Decision, UserModelPair, decide, evaluate,
                     signature_score)

log = logging.getLogger(__name__)

METHODS = ("byy", "em", "dtw")


@dataclass(frozen=True)
class ProtocolConfig:
    method: str = "byy"
    train_genuine: int = 5
    train_forgery: int = 5
    threshold: float = 2.0
    p_f: float = 0.5
    aggregate: str = "mean"
    norm_scope: str = "signature"
    include_training: bool = True
    em_k: int = 16
    em_tol: float = 1e-6
    em_max_iters: int = 200
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; pick one of {METHODS}")
        if self.norm_scope not in ("signature", "user"):
            raise ValidationError("norm_scope must be 'signature' or 'user'")
        if self.aggregate not in ("mean", "sum"):
            raise ValidationError("aggregate must be 'mean' or 'sum'")
        if self.train_genuine < 1 or self.train_forgery < 0:
            raise ValidationError("training split counts must be positive")
        if not 0 < self.p_f < 1:
            raise ValidationError("p_f must lie in (0, 1)")
        if not self.threshold > 0:
            raise ValidationError("threshold must be positive")


@dataclass
class UserModel:
    """Everything stored for one enrolled user."""

    user_id: str
    method: str
    pair: UserModelPair | None = None
    enrollment: DtwEnrollment | None = None
    norm_stats: np.ndarray | None = None
    traces: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"user": self.user_id, "method": self.method}
        if self.pair is not None:
            out["pair"] = self.pair.to_dict()
        if self.enrollment is not None:
            out["enrollment"] = self.enrollment.to_dict()
        if self.norm_stats is not None:
            out["norm_stats"] = self.norm_stats.tolist()
        return out

    @classmethod
    def from_dict(cls, obj):
        return cls(
            user_id=obj["user"],
            method=obj["method"],
            pair=UserModelPair.from_dict(obj["pair"]) if "pair" in obj else None,
            enrollment=DtwEnrollment.from_dict(obj["enrollment"]) if "enrollment" in obj else None,
            norm_stats=np.asarray(obj["norm_stats"]) if "norm_stats" in obj else None,
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def split_user(sigs, cfg):
    genuine = [s for s in sigs if s.genuineness == GENUINE]
    forged = [s for s in sigs if s.genuineness == FORGERY]
    if len(genuine) < cfg.train_genuine:
        raise ValidationError(f"user has {len(genuine)} genuine signatures, "
                              f"need {cfg.train_genuine} for training")
    if cfg.method != "dtw" and len(forged) < max(cfg.train_forgery, 1):
        raise ValidationError(f"user has {len(forged)} forgeries, "
                              f"need {max(cfg.train_forgery, 1)} for training")
    return genuine[:cfg.train_genuine], forged[:cfg.train_forgery]


def _sequences(sigs, stats):
    return [normalize(build_feature_sequence(s), stats) for s in sigs]


def _fit(frames, cfg):
    if cfg.method == "byy":
        anneal = replace(cfg.anneal, seed=cfg.seed)
        return anneal_fit(frames, anneal)
    model, loglik = em_fit(frames, cfg.em_k, seed=cfg.seed, tol=cfg.em_tol,
                           max_iters=cfg.em_max_iters)
    return model, loglik


def train_user(user_id, sigs, cfg):
    """Enroll one user from their labelled signatures."""
    train_gen, train_forg = split_user(sigs, cfg)
    if cfg.method == "dtw":
        return UserModel(user_id, "dtw", enrollment=dtw_enroll(train_gen))

    stats = None
    if cfg.norm_scope == "user":
        stats = column_stats(np.vstack([build_feature_sequence(s).frames for s in train_gen]))
    gen_frames = np.vstack([q.frames for q in _sequences(train_gen, stats)])
    forg_frames = np.vstack([q.frames for q in _sequences(train_forg, stats)])
    theta_c, trace_c = _fit(gen_frames, cfg)
    theta_bar, trace_bar = _fit(forg_frames, cfg)
    log.info("%s: k(genuine)=%d k(forgery)=%d", user_id, theta_c.k, theta_bar.k)
    return UserModel(user_id, cfg.method,
                     pair=UserModelPair(user_id, theta_c, theta_bar, cfg.p_f),
                     norm_stats=stats, traces={"genuine": trace_c, "forgery": trace_bar})


def score_signature(sig, model, cfg):
    """Return ``(decision, score)``; DTW scores are negated distances."""
    if model.method == "dtw":
        accepted, dist = dtw_verify(sig, model.enrollment)
        return (ACCEPT if accepted else REJECT), -dist
    seq = normalize(build_feature_sequence(sig), model.norm_stats)
    score = signature_score(seq, model.pair, aggregate=cfg.aggregate)
    return decide(score, cfg.threshold), score


def scored_signatures(sigs, cfg):
    if cfg.include_training:
        return list(sigs)
    train_gen, train_forg = split_user(sigs, cfg)
    used = {id(s) for s in train_gen + train_forg}
    return [s for s in sigs if id(s) not in used]


def run_user(user_id, sigs, cfg):
    model = train_user(user_id, sigs, cfg)
    decisions = []
    for sig in scored_signatures(sigs, cfg):
        decision, score = score_signature(sig, model, cfg)
        decisions.append(Decision(user_id, decision, sig.genuineness, sig.name, score))
    return model, decisions


def _run_user_args(args):
    return run_user(*args)


def run_protocol(corpus, cfg, jobs=1):
    """Enroll and test every user in *corpus*.

    Returns
    -------
    report : RatesReport
    decisions : list of Decision
    models : dict of user id -> UserModel
    """
    users = sorted(corpus)
    tasks = [(u, corpus[u], cfg) for u in users]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_run_user_args, tasks))
    else:
        results = [run_user(*t) for t in tasks]
    models = {}
    decisions = []
    for user, (model, decs) in zip(users, results):
        models[user] = model
        decisions.extend(decs)
    return evaluate(decisions, users), decisions, models


def config_dict(cfg):
    out = asdict(cfg)
    out["anneal"] = asdict(cfg.anneal)
    return out
