"""Polar code definition, encoding and Gaussian-approximation construction.

Bit indices in the public API are 1-based (``1..N``), so the decoding prefix
of bit ``i`` is ``u[:i - 1]``.  Codewords are ``x = u F^{(x)n}`` over GF(2)
with no bit-reversal permutation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .errors import NumericFailure

KERNEL = np.array([[1, 0], [1, 1]], dtype=np.uint8)

# GA check-node approximation constants
_PHI_A = 0.4527
_PHI_B = 0.86
_PHI_C = 0.0218
_PHI_SWITCH = 10.0
# phi(0+) = exp(0.0218) > 1; the approximation bumps above 1 near zero
PHI_SUP = math.exp(_PHI_C)

_BISECT_HI = 200.0
_BISECT_MAX_ITER = 200
_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class CodeConfig:
    """An (N, K) polar code: block exponent, message positions, frozen value."""

    n: int
    K: int
    message_set: tuple[int, ...]
    frozen_value: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        ms = tuple(int(i) for i in self.message_set)
        object.__setattr__(self, "message_set", ms)
        if len(ms) != self.K:
            raise ValueError(f"|message_set|={len(ms)} does not match K={self.K}")
        if self.K > self.N:
            raise ValueError(f"K={self.K} exceeds N={self.N}")
        if len(set(ms)) != len(ms):
            raise ValueError("message_set has repeated indices")
        if list(ms) != sorted(ms):
            raise ValueError("message_set must be sorted")
        if ms and (ms[0] < 1 or ms[-1] > self.N):
            raise ValueError(f"message_set indices must lie in [1, {self.N}]")
        if self.frozen_value not in (0, 1):
            raise ValueError("frozen_value must be 0 or 1")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def frozen_set(self) -> tuple[int, ...]:
        ms = set(self.message_set)
        return tuple(i for i in range(1, self.N + 1) if i not in ms)

    def is_message(self, i: int) -> bool:
        return i in self.message_set

    def message_mask(self) -> np.ndarray:
        """Boolean mask of length N (0-based) marking message positions."""
        mask = np.zeros(self.N, dtype=bool)
        mask[np.asarray(self.message_set, dtype=int) - 1] = True
        return mask


@dataclass(frozen=True)
class ReliabilityProfile:
    """GA mean LLRs of the N synthesized channels at noise variance ``sigma2``.

    ``mu[i - 1]`` is the mean LLR of bit-channel ``i``.
    """

    sigma2: float
    mu: np.ndarray = field(repr=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise ValueError("mean LLRs must be finite and nonnegative")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def N(self) -> int:
        return self.mu.size

    def bit_error(self) -> np.ndarray:
        return ga_bit_error(self.mu)


def kronecker_generator(n: int) -> np.ndarray:
    """Return the n-fold Kronecker power of F = [[1, 0], [1, 1]] as uint8."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    G = KERNEL
    for _ in range(n - 1):
        G = np.kron(G, KERNEL)
    return G.astype(np.uint8)


def embed_message(m, config: CodeConfig) -> np.ndarray:
    """Place the K message bits on the message set; frozen elsewhere.

    Accepts a single message of shape (K,) or a batch of shape (..., K).
    """
    m = np.asarray(m, dtype=np.uint8)
    if m.shape[-1:] != (config.K,):
        raise ValueError(f"message length {m.shape[-1:]} does not match K={config.K}")
    u = np.full(m.shape[:-1] + (config.N,), config.frozen_value, dtype=np.uint8)
    u[..., np.asarray(config.message_set, dtype=int) - 1] = m
    return u


def encode(u, config: CodeConfig | None = None) -> np.ndarray:
    """Polar-encode ``u`` (shape (N,) or (..., N)) with the butterfly transform.

    Runs in O(N log N) per word.  ``config`` is only used to check the length.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    if config is not None and N != config.N:
        raise ValueError(f"word length {N} does not match N={config.N}")
    if N < 2 or N & (N - 1):
        raise ValueError(f"word length must be a power of two >= 2, got {N}")
    lead = x.shape[:-1]
    half = 1
    while half < N:
        # x = u (F (x) G): first half of each block absorbs the second half
        v = x.reshape(lead + (N // (2 * half), 2, half))
        v[..., 0, :] ^= v[..., 1, :]
        half *= 2
    return x


def q_function(x):
    """Gaussian tail probability Q(x) = P(G > x), G ~ N(0, 1)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _phi_left(x):
    return np.exp(-_PHI_A * np.power(x, _PHI_B) + _PHI_C)


def _phi_right(x):
    return np.sqrt(np.pi / x) * (1.0 - 10.0 / (7.0 * x)) * np.exp(-x / 4.0)


def ga_phi(x):
    """Piecewise GA check-node function phi(x), x >= 0.

    Kept verbatim from the standard approximation, including the jump at
    x = 10 and the slight excursion above 1 just right of zero.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise ValueError("ga_phi requires x >= 0")
    safe = np.where(xa > 0, xa, 1.0)
    out = np.where(
        xa == 0,
        1.0,
        np.where(xa < _PHI_SWITCH, _phi_left(safe), _phi_right(np.maximum(safe, _PHI_SWITCH))),
    )
    return out if out.ndim else float(out)


# value of the left branch as x -> 10 from below
_PHI_LEFT_AT_SWITCH = float(_phi_left(_PHI_SWITCH))


def ga_phi_inv(y):
    """Invert :func:`ga_phi` by bracketing bisection.

    ``y = 1`` maps to 0.  Values in ``(1, exp(0.0218)]`` come from the
    excursion right of zero and are inverted there.  Where the two branches
    overlap around x = 10 the left-branch (x < 10) preimage is returned.
    """
    ya = np.asarray(y, dtype=float)
    if np.any(~(ya > 0)) or np.any(ya > PHI_SUP):
        raise ValueError(f"ga_phi_inv requires 0 < y <= {PHI_SUP:.6f}")
    flat = ya.ravel()
    left = flat > _PHI_LEFT_AT_SWITCH
    lo = np.where(left, 0.0, _PHI_SWITCH)
    hi = np.where(left, _PHI_SWITCH, _BISECT_HI)
    # widen the right bracket for very reliable channels
    for _ in range(64):
        short = ~left & (_phi_right(hi) > flat)
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise NumericFailure("could not bracket ga_phi_inv root")

    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        done = (mid == lo) | (mid == hi)
        if done.all():
            break
        above = ga_phi(mid) > flat
        lo = np.where(above & ~done, mid, lo)
        hi = np.where(~above & ~done, mid, hi)
    x = 0.5 * (lo + hi)
    x = np.where(flat == 1.0, 0.0, x)
    resid = np.abs(ga_phi(x) - flat)
    unconverged = (hi - lo > 1e-9 * np.maximum(1.0, x)) & (resid > _BISECT_TOL)
    if unconverged.any():
        raise NumericFailure("ga_phi_inv bisection did not converge")
    x = x.reshape(ya.shape)
    return x if x.ndim else float(x)


def _check_node_mean(mu):
    # phi overshoots 1 for mu < 0.0294; a check node cannot gain reliability
    p = np.minimum(np.atleast_1d(ga_phi(mu)), 1.0)
    if np.any(p == 0):
        raise NumericFailure("phi underflowed; noise variance too small for GA")
    # 1 - (1 - p)^2 written without cancellation
    return ga_phi_inv(p * (2.0 - p))


def ga_construct(n: int, sigma2: float) -> ReliabilityProfile:
    """Mean LLRs of all 2**n synthesized channels under GA at noise variance sigma2."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    mu = np.array([2.0 / sigma2])
    for _ in range(n):
        nxt = np.empty(2 * mu.size)
        nxt[0::2] = _check_node_mean(mu)
        nxt[1::2] = 2.0 * mu
        mu = nxt
    return ReliabilityProfile(sigma2=float(sigma2), mu=mu)


def select_message_set(profile: ReliabilityProfile, K: int) -> tuple[int, ...]:
    """K indices with the largest mean LLR; ties go to the smaller index."""
    mu = profile.mu if isinstance(profile, ReliabilityProfile) else np.asarray(profile, float)
    N = mu.size
    if not 0 <= K <= N:
        raise ValueError(f"K={K} must lie in [0, {N}]")
    order = np.lexsort((np.arange(N), -mu))
    return tuple(sorted(int(i) + 1 for i in order[:K]))


def ga_bit_error(mu_i):
    """GA bit-channel error estimate Q(sqrt(mu / 2))."""
    mu = np.asarray(mu_i, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mean LLR must be nonnegative")
    out = q_function(np.sqrt(mu / 2.0))
    return out if out.ndim else float(out)


def construct_code(n: int, K: int, sigma2: float, frozen_value: int = 0):
    """GA construction: returns ``(CodeConfig, ReliabilityProfile)``."""
    profile = ga_construct(n, sigma2)
    config = CodeConfig(n=n, K=K, message_set=select_message_set(profile, K),
                        frozen_value=frozen_value)
    return config, profile


def write_construction_csv(path, profile: ReliabilityProfile, config: CodeConfig) -> None:
    """Columns: index, mu, ga_bit_error, is_message."""
    pe = np.atleast_1d(ga_bit_error(profile.mu))
    mask = config.message_mask()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "mu", "ga_bit_error", "is_message"])
        for i in range(profile.N):
            w.writerow([i + 1, repr(float(profile.mu[i])), repr(float(pe[i])), int(mask[i])])
