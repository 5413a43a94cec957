"""Bitwise successive decoding with per-bit regressors, and BER/BLER Monte Carlo."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import ebn0_to_sigma2, make_rng
from .errors import InvalidState
from .polar import CodeConfig
from .posterior import bit_channel_inputs, posterior_batch, sample_transmissions

MODES = ("oracle", "sequential", "map_oracle", "map_sequential")
EVAL_CHUNK = 8192


class PosteriorModel:
    """Exact posterior r*_i exposed through the regressor ``predict`` interface."""

    def __init__(self, config: CodeConfig, bit_index: int, sigma2: float, mode: str = "literal"):
        self.config = config
        self.bit_index = bit_index
        self.sigma2 = sigma2
        self.mode = mode

    @property
    def d(self) -> int:
        return self.config.N + self.bit_index - 1

    def predict(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        N = self.config.N
        feats = Z[:, N:]
        bits = feats if self.mode == "literal" else (1.0 - feats) / 2.0
        r, _ = posterior_batch(Z[:, :N], np.rint(bits).astype(np.uint8), self.bit_index,
                               self.config, self.sigma2)
        return r


@dataclass
class DecoderBank:
    """One trained regressor per message bit."""

    config: CodeConfig
    models: dict
    sigma2_trained: float
    mode: str = "literal"

    def __post_init__(self):
        missing = set(self.config.message_set) - set(self.models)
        extra = set(self.models) - set(self.config.message_set)
        if missing or extra:
            raise InvalidState(f"bank models do not match the message set "
                               f"(missing {sorted(missing)}, extra {sorted(extra)})")
        for i, m in self.models.items():
            if getattr(m, "d", self.config.N + i - 1) != self.config.N + i - 1:
                raise InvalidState(f"model for bit {i} has the wrong input dimension")

    @classmethod
    def exact(cls, config: CodeConfig, sigma2: float, mode: str = "literal") -> "DecoderBank":
        models = {i: PosteriorModel(config, i, sigma2, mode) for i in config.message_set}
        return cls(config, models, sigma2, mode)

    @property
    def width(self) -> int | None:
        Bs = {getattr(m, "B", None) for m in self.models.values()}
        return Bs.pop() if len(Bs) == 1 else None


def _decode(Y, bank: DecoderBank, U_true=None) -> np.ndarray:
    """Shared oracle/sequential loop; oracle when ``U_true`` is given."""
    cfg = bank.config
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != cfg.N:
        raise ValueError(f"observation length {Y.shape[1]} != N={cfg.N}")
    U_hat = np.full(Y.shape, cfg.frozen_value, dtype=np.uint8)
    src = U_hat if U_true is None else np.atleast_2d(np.asarray(U_true, dtype=np.uint8))
    for i in cfg.message_set:
        model = bank.models.get(i)
        if model is None:
            raise InvalidState(f"no model for bit {i}")
        Z = bit_channel_inputs(Y, src[:, : i - 1], bank.mode)
        U_hat[:, i - 1] = np.asarray(model.predict(Z)) >= 0
    return U_hat


def decode_oracle(y, true_u, bank: DecoderBank) -> np.ndarray:
    """Each bit's regressor sees the true preceding bits.  Batched over rows."""
    y = np.asarray(y)
    out = _decode(y, bank, true_u)
    return out[0] if y.ndim == 1 else out


def decode_sequential(y, bank: DecoderBank) -> np.ndarray:
    """Each bit's regressor sees the previously decided bits.  Batched over rows."""
    y = np.asarray(y)
    out = _decode(y, bank)
    return out[0] if y.ndim == 1 else out


def decode_map(y, mode: str, config: CodeConfig, sigma2: float, true_u=None) -> np.ndarray:
    """Bitwise MAP with oracle (needs ``true_u``) or sequential prefixes."""
    bank = DecoderBank.exact(config, sigma2)
    if mode == "oracle":
        if true_u is None:
            raise ValueError("oracle mode needs the true source word")
        return decode_oracle(y, true_u, bank)
    if mode == "sequential":
        return decode_sequential(y, bank)
    raise ValueError(f"unknown MAP mode {mode!r}")


@dataclass
class EvalResult:
    mode: str
    ebn0_db: float
    trials: int
    ber: float
    bler: float
    per_bit_error: np.ndarray = field(repr=False)
    per_bit_se: np.ndarray = field(repr=False)
    ber_se: float
    bler_se: float
    seed: int
    width: int | None = None
    bit_indices: tuple = ()

    def row(self) -> list:
        return ([self.mode, repr(float(self.ebn0_db)), "" if self.width is None else self.width,
                 self.trials, repr(float(self.ber)), repr(float(self.bler))]
                + [repr(float(p)) for p in self.per_bit_error]
                + [repr(float(self.ber_se)), repr(float(self.bler_se)), self.seed])


def eval_csv_header(config: CodeConfig) -> list:
    return (["mode", "ebn0_db", "B", "trials", "ber", "bler"]
            + [f"pe_bit{i}" for i in config.message_set] + ["ber_se", "bler_se", "seed"])


def append_eval_csv(path, results, config: CodeConfig) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(eval_csv_header(config))
        for r in results:
            w.writerow(r.row())


def evaluate(decoder, mode: str, ebn0_db: float, trials: int, seed: int,
             stream: int = 0) -> EvalResult:
    """Monte Carlo BER/BLER over uniform messages.

    ``decoder`` is a DecoderBank for the regressor modes, or a CodeConfig /
    DecoderBank for the ``map_*`` modes.  Trials run in fixed chunks with
    streams ``(seed, stream, chunk)``, so equal (seed, stream, ebn0)
    arguments reuse the same transmissions across decoders.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = decoder if isinstance(decoder, CodeConfig) else decoder.config
    sigma2 = ebn0_to_sigma2(ebn0_db, config.rate)
    if mode.startswith("map_"):
        mode_bank = DecoderBank.exact(config, sigma2)
    elif isinstance(decoder, DecoderBank):
        mode_bank = decoder
    else:
        raise InvalidState(f"mode {mode!r} needs a trained DecoderBank")
    oracle = mode in ("oracle", "map_oracle")

    idx = np.asarray(config.message_set, dtype=int) - 1
    bit_errors = np.zeros(config.K, dtype=np.int64)
    block_errors = 0
    frac_sum = 0.0
    frac_sq = 0.0
    for c, start in enumerate(range(0, trials, EVAL_CHUNK)):
        U, Y = sample_transmissions(config, sigma2, min(EVAL_CHUNK, trials - start),
                                    make_rng(seed, stream, c))
        U_hat = _decode(Y, mode_bank, U if oracle else None)
        err = U_hat[:, idx] != U[:, idx]
        bit_errors += err.sum(axis=0)
        block_errors += int(err.any(axis=1).sum())
        frac = err.mean(axis=1) if config.K else np.zeros(len(U))
        frac_sum += float(frac.sum())
        frac_sq += float((frac ** 2).sum())

    per_bit = bit_errors / trials
    bler = block_errors / trials
    ber = float(per_bit.mean()) if config.K else 0.0
    var = max(frac_sq / trials - (frac_sum / trials) ** 2, 0.0)
    return EvalResult(
        mode=mode, ebn0_db=float(ebn0_db), trials=trials, ber=ber, bler=bler,
        per_bit_error=per_bit, per_bit_se=np.sqrt(per_bit * (1 - per_bit) / trials),
        ber_se=math.sqrt(var / trials), bler_se=math.sqrt(bler * (1 - bler) / trials),
        seed=seed, width=None if mode.startswith("map_") else mode_bank.width,
        bit_indices=config.message_set,
    )
