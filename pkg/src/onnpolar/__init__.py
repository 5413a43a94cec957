"""Bitwise over-parameterized two-layer ReLU decoding of short polar codes.

Submodules
----------
polar       encoder, GA reliability construction
channel     BPSK/AWGN, SNR mapping, seeded streams
posterior   exact bitwise posteriors and labeled datasets
onn         per-bit two-layer ReLU regressor and trainer
theory      Gram spectra, convergence and error-bound quantities
decoder     oracle / sequential decoding, BER/BLER Monte Carlo
experiments configuration, pipelines and acceptance checks
cli         command-line entry point
"""

from .errors import InvalidState, NumericFailure, TrainingDiverged
from .polar import CodeConfig, ReliabilityProfile, construct_code, encode, embed_message
from .channel import ChannelParams, ebn0_to_sigma2, make_rng
from .posterior import Dataset, exact_posterior, generate_dataset, posterior_llr
from .onn import OnnModel, TrainConfig, TrainTrace, init_model, train
from .decoder import DecoderBank, EvalResult, evaluate

__version__ = "0.1.0"

__all__ = [
    "InvalidState", "NumericFailure", "TrainingDiverged",
    "CodeConfig", "ReliabilityProfile", "construct_code", "encode", "embed_message",
    "ChannelParams", "ebn0_to_sigma2", "make_rng",
    "Dataset", "exact_posterior", "generate_dataset", "posterior_llr",
    "OnnModel", "TrainConfig", "TrainTrace", "init_model", "train",
    "DecoderBank", "EvalResult", "evaluate",
]
