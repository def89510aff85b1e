"""Gaussian mixtures learned by annealed Bayesian Ying-Yang harmony learning,
applied to on-line signature verification."""

from .byy import AnnealConfig, FitTrace, anneal_fit, annealed_objective, harmony, posterior, update_parameters
from .dtw import DtwEnrollment, dtw_distance, dtw_enroll, dtw_verify, global_features
from .em import em_fit
from .errors import ByySigError, FitError, NumericError, ParseError, ValidationError
from .features import FeatureSequence, build_feature_sequence, compute_dynamics, normalize
from .mixture import (GaussianComponent, MixtureModel, component_log_density, mixture_log_density,
                      sequence_avg_log_density)
from .signal_io import (RawSample, RawSignature, SyntheticSpec, generate_mixture_samples,
                        parse_svc2004, read_corpus, serialize_svc2004)
from .verify import RatesReport, UserModelPair, decide, evaluate, signature_score

__version__ = "0.1.0"
