"""Two-layer ReLU regressor of one bit-channel and its gradient-descent trainer.

The network is ``F(z) = B**-0.5 * sum_j a_j relu(w_j . z)`` with the signs
``a`` drawn once and frozen.  Only the first layer ``W`` is trained, on the
loss ``(1 / 2D) sum (F(z) - t)**2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import TrainingDiverged

DIVERGENCE_MSE = 1e6
# rows per matmul chunk scale as this / B (keeps the B x n activation block cache-sized)
_CHUNK_ELEMS = 1 << 21


@numba.njit(cache=True)
def _accumulate_relu(P, a, F):
    B, n = P.shape
    for j in range(B):
        aj = a[j]
        for k in range(n):
            p = P[j, k]
            if p > 0:
                F[k] += aj * p


@numba.njit(cache=True)
def _accumulate_relu_mask(P, a, F):
    # overwrites P with the activation indicator I(p >= 0)
    B, n = P.shape
    for j in range(B):
        aj = a[j]
        for k in range(n):
            p = P[j, k]
            if p >= 0:
                F[k] += aj * p
                P[j, k] = 1.0
            else:
                P[j, k] = 0.0


@dataclass
class OnnModel:
    W: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    W0: np.ndarray = field(repr=False)
    bit_index: int | None = None

    def __post_init__(self):
        if self.W.shape != self.W0.shape or self.a.shape != (self.W.shape[0],):
            raise ValueError("inconsistent parameter shapes")
        if not np.all(np.abs(self.a) == 1):
            raise ValueError("second-layer weights must be +-1")
        self.W0.setflags(write=False)
        self.a.setflags(write=False)

    @property
    def B(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def dtype(self):
        return self.W.dtype

    def predict(self, Z) -> np.ndarray:
        return forward(self, np.atleast_2d(Z))

    def copy(self) -> "OnnModel":
        return OnnModel(self.W.copy(), self.a.copy(), self.W0.copy(), self.bit_index)


def init_model(B: int, d: int, rng: np.random.Generator, bit_index: int | None = None,
               dtype=np.float64) -> OnnModel:
    """W ~ N(0, 1) entrywise, a ~ Rademacher, both in ``dtype``."""
    if B < 1 or d < 1:
        raise ValueError("B and d must be positive")
    W = rng.standard_normal((B, d)).astype(dtype)
    a = np.where(rng.integers(0, 2, size=B) == 1, 1.0, -1.0).astype(dtype)
    return OnnModel(W=W, a=a, W0=W.copy(), bit_index=bit_index)


def _chunk_rows(B: int) -> int:
    return max(1, _CHUNK_ELEMS // B)


def _as_inputs(model: OnnModel, Z) -> np.ndarray:
    Z = np.asarray(Z)
    if Z.shape[-1] != model.d:
        raise ValueError(f"input dimension {Z.shape[-1]} != model dimension {model.d}")
    return np.ascontiguousarray(Z, dtype=model.dtype)


def forward(model: OnnModel, z):
    """Network output for one input (d,) or a batch (n, d)."""
    Z = _as_inputs(model, z)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    out = np.zeros(Z.shape[0])
    step = _chunk_rows(model.B)
    for s in range(0, Z.shape[0], step):
        P = model.W @ Z[s:s + step].T
        F = np.zeros(P.shape[1])
        _accumulate_relu(P, model.a, F)
        out[s:s + step] = F
    out /= math.sqrt(model.B)
    return float(out[0]) if single else out


def _residual_gradient(W, a, Z, t):
    """Residuals F(Z) - t and the unnormalized sum_l r_l I(w_j.z_l >= 0) z_l."""
    B = W.shape[0]
    rootB = math.sqrt(B)
    r = np.empty(Z.shape[0])
    G = np.zeros_like(W)
    step = _chunk_rows(B)
    for s in range(0, Z.shape[0], step):
        Zc = Z[s:s + step]
        P = W @ Zc.T
        F = np.zeros(P.shape[1])
        _accumulate_relu_mask(P, a, F)
        rc = F / rootB - t[s:s + step]
        r[s:s + step] = rc
        G += P @ (rc[:, None] * Zc).astype(W.dtype)
    return r, G


def _data(data):
    if isinstance(data, tuple):
        Z, t = data
        return np.asarray(Z), np.asarray(t, dtype=float)
    return data.inputs(), np.asarray(data.targets, dtype=float)


def gradient(model: OnnModel, data) -> np.ndarray:
    """dL/dW for the (1/2n) squared loss over the batch; I(0) counts as active."""
    Z, t = _data(data)
    if len(t) == 0:
        raise ValueError("empty batch")
    Z = _as_inputs(model, Z)
    _, G = _residual_gradient(model.W, model.a, Z, t)
    return G * (model.a[:, None] / (len(t) * math.sqrt(model.B)))


def empirical_loss(model: OnnModel, data) -> float:
    """(1 / 2D) sum (F - t)^2."""
    Z, t = _data(data)
    r = forward(model, _as_inputs(model, Z).reshape(len(t), -1)) - t
    return 0.5 * float(np.mean(r ** 2))


def empirical_mse(model: OnnModel, data) -> float:
    return 2.0 * empirical_loss(model, data)


def weight_drift(model: OnnModel) -> float:
    """max_j ||w_j - w_j(0)||_2."""
    diff = model.W.astype(float) - model.W0.astype(float)
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", diff, diff))))


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings.

    ``batch_size = 0`` means full-batch GD.  ``eta`` overrides the
    width-scaled learning rate when set.
    """

    eta0: float = 1e-2
    b_ref: int = 1024
    epochs: int = 100
    batch_size: int = 0
    seed: int = 0
    eta: float | None = None
    dtype: str = "float64"

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.b_ref < 1:
            raise ValueError("b_ref must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eta is not None and self.eta < 0:
            raise ValueError("eta must be nonnegative")


def lr_schedule(B: int, config: TrainConfig) -> float:
    """eta(B) = eta0 * sqrt(B / B_ref)."""
    if B < 1:
        raise ValueError("B must be >= 1")
    return config.eta0 * math.sqrt(B / config.b_ref)


@dataclass
class TrainTrace:
    """Per-epoch statistics; entry k describes the weights after k epochs.

    In minibatch mode ``mse[k]`` for k >= 1 is the mean of the squared
    residuals seen during epoch k (each at the weights in force for its
    batch); ``mse[0]`` and all full-batch entries are exact.
    """

    mse: list[float]
    val_mse: list[float]
    drift: list[float]
    eta: float
    model: OnnModel = field(repr=False)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "mse", "val_mse", "drift"])
            for k, row in enumerate(zip(self.mse, self.val_mse, self.drift)):
                w.writerow([k] + [repr(float(v)) for v in row])


def train(model: OnnModel, data, config: TrainConfig, val=None) -> TrainTrace:
    """Train the first layer of ``model`` in place and return its trace.

    ``val`` is an optional held-out Dataset or ``(Z, t)`` pair; its mse is
    recorded per epoch (NaN when absent).
    """
    Z, t = _data(data)
    Z = _as_inputs(model, Z)
    D = len(t)
    if D == 0:
        raise ValueError("empty training set")
    if val is not None:
        Zv, tv = _data(val)
        Zv = _as_inputs(model, Zv)
    eta = lr_schedule(model.B, config) if config.eta is None else config.eta
    a = model.a
    scale = (a[:, None] / math.sqrt(model.B)).astype(model.dtype)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    full = config.batch_size <= 0 or config.batch_size >= D

    trace = TrainTrace([], [], [], eta, model)

    def record(epoch, mse):
        if not np.isfinite(mse) or mse > DIVERGENCE_MSE:
            raise TrainingDiverged(epoch, mse)
        trace.mse.append(float(mse))
        vm = float(np.mean((forward(model, Zv) - tv) ** 2)) if val is not None else math.nan
        trace.val_mse.append(vm)
        trace.drift.append(weight_drift(model))

    if full:
        for epoch in range(config.epochs):
            r, G = _residual_gradient(model.W, a, Z, t)
            record(epoch, np.mean(r ** 2))
            if eta:
                model.W -= (eta / D) * G * scale
        record(config.epochs, np.mean((forward(model, Z) - t) ** 2))
        return trace

    record(0, np.mean((forward(model, Z) - t) ** 2))
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(D)
        sq = 0.0
        for s in range(0, D, bs):
            idx = perm[s:s + bs]
            r, G = _residual_gradient(model.W, a, Z[idx], t[idx])
            sq += float(r @ r)
            if eta:
                model.W -= (eta / len(idx)) * G * scale
        record(epoch, sq / D)
    return trace


def population_mse_estimate(model, fresh) -> tuple[float, float]:
    """Held-out mean squared residual and its standard error.

    ``model`` is anything with ``predict(Z)``; ``fresh`` a Dataset drawn
    with a seed disjoint from training.
    """
    Z, t = _data(fresh)
    if len(t) == 0:
        raise ValueError("empty held-out set")
    sq = (np.asarray(model.predict(Z), dtype=float) - t) ** 2
    se = float(np.std(sq, ddof=1) / math.sqrt(len(sq))) if len(sq) > 1 else math.inf
    return float(np.mean(sq)), se


def save_checkpoint(path, model: OnnModel, seed: int) -> None:
    """npz with header scalars (bit_index, B, d, seed) and arrays W0, W, a."""
    np.savez(path, bit_index=-1 if model.bit_index is None else model.bit_index,
             B=model.B, d=model.d, seed=seed, W0=model.W0, W=model.W, a=model.a)


def load_checkpoint(path) -> tuple[OnnModel, int]:
    with np.load(path) as f:
        bit = int(f["bit_index"])
        model = OnnModel(W=f["W"].copy(), a=f["a"].copy(), W0=f["W0"].copy(),
                         bit_index=None if bit < 0 else bit)
        return model, int(f["seed"])
