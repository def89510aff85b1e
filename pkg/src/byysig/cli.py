"""Command-line entry point: ``byysig <command> [options]``.

Commands
--------
train      enroll every user of a corpus and write one model file per user
verify     score signature files against a stored user model
evaluate   run the enroll/test protocol over a corpus and write rate reports
synth      check component-count recovery on a synthetic mixture
features   dump per-frame feature matrices as CSV

Settings are resolved as built-in defaults < ``--config`` file < flags.  The
config file holds ``key = value`` lines; ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .byy import AnnealConfig, anneal_fit
from .errors import ByySigError, FitError, NumericError
from .features import build_feature_sequence, normalize, write_feature_csv
from .protocol import METHODS, ProtocolConfig, UserModel, run_protocol, score_signature, train_user
from .signal_io import SyntheticSpec, generate_mixture_samples, read_corpus, read_signature

log = logging.getLogger("byysig")

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 1, 2


class UsageError(ByySigError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for numeric failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


# name -> (default, parser, help).  Every tunable lives here.
DEFAULTS = {
    "data": (None, str, "dataset root holding UxxSyy.TXT files"),
    "method": ("byy", str, "training method: byy, em or dtw"),
    "threshold": (2.0, float, "decision threshold T on the score ratio"),
    "p_f": (0.5, float, "prior probability of a forgery"),
    "genuine_count": (20, int, "signatures 1..n of each user are genuine, the rest forgeries"),
    "train_genuine": (5, int, "genuine signatures used to train the genuine model"),
    "train_forgery": (5, int, "forgeries used to train the forgery model"),
    "include_training": (True, _bool, "also score the training signatures"),
    "aggregate": ("mean", str, "sequence likelihood: per-frame mean or sum"),
    "norm_scope": ("signature", str, "z-score statistics per signature or per user"),
    "k_init": (32, int, "initial component count for BYY learning"),
    "lambda_init": (1.0, float, "starting temperature"),
    "lambda_decay": (0.9, float, "temperature multiplier per outer step"),
    "lambda_min": (0.01, float, "final temperature"),
    "prune_threshold": (0.02, float, "components below this weight are discarded"),
    "discard_search": (True, _bool, "try discarding components at the final temperature"),
    "max_inner_iters": (200, int, "update cycles per temperature (and EM iteration cap)"),
    "tol": (1e-6, float, "convergence tolerance on the objective"),
    "em_k": ([8, 16, 24, 32], _int_list, "component counts swept by the EM baseline"),
    "seed": (0, int, "random seed"),
    "jobs": (1, int, "worker processes for per-user training"),
    "out": ("out", str, "output directory"),
}


def show_defaults():
    width = max(map(len, DEFAULTS))
    lines = []
    for key, (value, _, text) in DEFAULTS.items():
        if isinstance(value, list):
            value = ",".join(map(str, value))
        lines.append(f"{key.ljust(width)}  {str(value):<12}  {text}")
    return "\n".join(lines)


def read_config(path):
    settings = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        settings[key] = value
    return settings


def resolve(args):
    """Merge defaults, config file and command-line flags into one dict."""
    raw = {}
    if getattr(args, "config", None):
        raw.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    settings = {}
    for key, (default, parse, _) in DEFAULTS.items():
        if key not in raw:
            settings[key] = default
            continue
        try:
            settings[key] = parse(raw[key])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {exc}") from None
    if settings["method"] not in METHODS:
        raise UsageError(f"unknown method {settings['method']!r}; choose from {', '.join(METHODS)}")
    return settings


def anneal_config(s):
    return AnnealConfig(
        k_init=s["k_init"], lambda_init=s["lambda_init"], lambda_decay=s["lambda_decay"],
        lambda_min=s["lambda_min"], prune_threshold=s["prune_threshold"],
        max_inner_iters=s["max_inner_iters"], tol=s["tol"], seed=s["seed"],
        discard_search=s["discard_search"],
    )


def protocol_config(s, em_k=None):
    return ProtocolConfig(
        method=s["method"], train_genuine=s["train_genuine"], train_forgery=s["train_forgery"],
        threshold=s["threshold"], p_f=s["p_f"], aggregate=s["aggregate"],
        norm_scope=s["norm_scope"], include_training=s["include_training"],
        em_k=em_k if em_k is not None else s["em_k"][0], em_tol=s["tol"],
        em_max_iters=s["max_inner_iters"], anneal=anneal_config(s), seed=s["seed"],
    )


def _load_corpus(s):
    if not s["data"]:
        raise UsageError("no dataset given (use --data or 'data =' in the config)")
    root = Path(s["data"])
    if not root.is_dir():
        raise UsageError(f"dataset root {root} does not exist")
    corpus = read_corpus(root, genuine_count=s["genuine_count"])
    if not corpus:
        raise UsageError(f"no UxxSyy.TXT signature files found under {root}")
    return corpus


# -- commands -----------------------------------------------------------------

def cmd_train(args, s):
    corpus = _load_corpus(s)
    if args.users:
        missing = sorted(set(args.users) - set(corpus))
        if missing:
            raise UsageError(f"unknown user(s): {', '.join(missing)}")
        corpus = {u: corpus[u] for u in args.users}
    cfg = protocol_config(s)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    users = sorted(corpus)
    if s["jobs"] > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(s["jobs"]) as ex:
            models = list(ex.map(train_user, users, [corpus[u] for u in users],
                                 [cfg] * len(users)))
    else:
        models = [train_user(u, corpus[u], cfg) for u in users]
    for model in models:
        model.save(out / f"{model.user_id}.json")
        _write_traces(args, model)
        if model.pair is not None:
            print(f"{model.user_id}: k_genuine={model.pair.theta_c.k} "
                  f"k_forgery={model.pair.theta_bar.k}")
        else:
            print(f"{model.user_id}: dtw threshold={model.enrollment.threshold:.6g}")
    print(f"wrote {len(models)} model(s) to {out}")
    return EXIT_OK


def _write_traces(args, model):
    if not getattr(args, "trace_dir", None) or model.method != "byy":
        return
    tdir = Path(args.trace_dir)
    tdir.mkdir(parents=True, exist_ok=True)
    for which, trace in model.traces.items():
        trace.to_csv(tdir / f"{model.user_id}_{which}.csv")


def cmd_verify(args, s):
    path = Path(args.models)
    path = path / f"{args.user}.json" if path.is_dir() else path
    if not path.is_file():
        raise UsageError(f"no stored model at {path}")
    try:
        model = UserModel.load(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path} is not a model file: {exc}") from None
    if args.method is not None and args.method != model.method:
        raise UsageError(f"model {path} was trained with {model.method!r}, not {args.method!r}")
    cfg = protocol_config({**s, "method": model.method})
    for name in args.signatures:
        sig = read_signature(name, genuine_count=s["genuine_count"])
        decision, score = score_signature(sig, model, cfg)
        print(f"{Path(name).name}\t{score:.6f}\t{decision}")
    return EXIT_OK


def cmd_evaluate(args, s):
    corpus = _load_corpus(s)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    runs = [(f"em_k{k}", k) for k in s["em_k"]] if s["method"] == "em" else [(s["method"], None)]
    for tag, k in runs:
        cfg = protocol_config(s, em_k=k)
        report, decisions, models = run_protocol(corpus, cfg, jobs=s["jobs"])
        report.to_csv(out / f"report_{tag}.csv")
        if args.scores:
            with (out / f"scores_{tag}.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["user", "signature", "label", "log_score", "decision"])
                for d in decisions:
                    w.writerow([d.user_id, d.signature, d.label, repr(d.score), d.decision])
        for model in models.values():
            _write_traces(args, model)
        print(f"== {tag}")
        print(report.format_table())
        if s["method"] == "dtw":
            print("note: DTW uses a simplified 16-feature global set; its rates are not "
                  "comparable to results obtained with the original 36 features")
        print(f"average verification rate {report.rate:.4f}% "
              f"(FAR {report.far:.4f}%, FRR {report.frr:.4f}%)")
    return EXIT_OK


def cmd_synth(args, s):
    try:
        spec = SyntheticSpec.from_json(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read spec {args.spec}: {exc.strerror}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad synthetic spec {args.spec}: {exc}") from None
    k_init = s["k_init"]
    hits = 0
    for i in range(args.seeds):
        X, _ = generate_mixture_samples(spec, seed=spec.seed + i)
        if len(X) <= k_init:
            raise UsageError(f"sample_count {len(X)} must exceed k_init {k_init}")
        cfg = anneal_config({**s, "seed": i})
        model, _ = anneal_fit(X, cfg)
        dist = np.linalg.norm(model.means[:, None, :] - spec.means[None, :, :], axis=2)
        err = dist.min(axis=0).max() if model.k == spec.k else float("nan")
        hits += model.k == spec.k
        print(f"seed {i}: k={model.k} max mean error={err:.4f}")
    print(f"recovered k={spec.k} in {hits}/{args.seeds} runs")
    return EXIT_OK


def cmd_features(args, s):
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name in args.signatures:
        sig = read_signature(name, genuine_count=s["genuine_count"])
        seq = build_feature_sequence(sig)
        if not args.raw:
            seq = normalize(seq)
        target = out / f"{Path(name).stem}.csv"
        write_feature_csv(seq, target)
        print(target)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_settings(p, keys):
    for key in keys:
        default, parse, text = DEFAULTS[key]
        flag = "--" + key.replace("_", "-")
        if parse is _bool:
            p.add_argument(flag, dest=key, default=None, metavar="BOOL", help=text)
        elif key == "method":
            p.add_argument(flag, dest=key, default=None, choices=METHODS, help=text)
        else:
            p.add_argument(flag, dest=key, default=None, help=text)


def build_parser():
    parser = _Parser(
        prog="byysig", description="Signature verification with annealed BYY mixtures.")
    parser.add_argument("--show-defaults", action="store_true",
                        help="print every default setting and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")

    model_keys = ["threshold", "p_f", "train_genuine", "train_forgery", "include_training",
                  "aggregate", "norm_scope", "k_init", "lambda_init", "lambda_decay",
                  "lambda_min", "prune_threshold", "discard_search", "max_inner_iters", "tol",
                  "em_k", "seed", "jobs", "genuine_count"]

    p = sub.add_parser("train", parents=[common], help="enroll users and save their models")
    _add_settings(p, ["data", "method", "out"] + model_keys)
    p.add_argument("--users", nargs="+", help="only these user ids (e.g. U01)")
    p.add_argument("--trace-dir", help="write BYY fit traces as CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", parents=[common], help="score signatures against a stored model")
    p.add_argument("--models", required=True, help="model directory or model file")
    p.add_argument("--user", default="", help="user id when --models is a directory")
    p.add_argument("--method", choices=METHODS, default=None,
                   help="fail unless the stored model used this method")
    _add_settings(p, ["threshold", "aggregate", "genuine_count"])
    p.add_argument("signatures", nargs="+")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", parents=[common], help="run the full protocol and report rates")
    _add_settings(p, ["data", "method", "out"] + model_keys)
    p.add_argument("--scores", action="store_true", help="also dump per-signature scores")
    p.add_argument("--trace-dir", help="write BYY fit traces as CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[common], help="component recovery on synthetic data")
    p.add_argument("--spec", required=True, help="JSON mixture spec")
    p.add_argument("--seeds", type=int, default=10)
    _add_settings(p, ["k_init", "lambda_init", "lambda_decay", "lambda_min", "prune_threshold", "discard_search",
                      "max_inner_iters", "tol"])
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", parents=[common], help="dump feature matrices as CSV")
    p.add_argument("signatures", nargs="+")
    p.add_argument("--raw", action="store_true", help="skip z-score normalization")
    _add_settings(p, ["out", "genuine_count"])
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.show_defaults:
        print(show_defaults())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USER
    try:
        settings = resolve(args)
        return args.func(args, settings)
    except (NumericError, FitError) as exc:
        print(f"byysig: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ByySigError, OSError) as exc:
        print(f"byysig: error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
