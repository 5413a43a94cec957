"""Computable quantities from the convergence and error-bound analysis.

Quantities whose absolute constants are unknown (the generalization gap
terms and the width requirement) are evaluated with unit constants and are
marked ``shape-only`` wherever they are reported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .polar import q_function

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class GramSpectrum:
    H: np.ndarray = field(repr=False)
    lambda0: float
    kind: str  # "limiting" | "empirical"


def _unit_rows(Z):
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def limiting_gram(Z, normalize: bool = False) -> GramSpectrum:
    """Infinite-width ReLU co-activation Gram matrix in closed form.

    ``H[l, l'] = <z_l, z_l'> (pi - theta) / (2 pi)`` with theta the angle
    between the two inputs.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm input")
    if normalize:
        Z = Z / norms[:, None]
        norms = np.ones_like(norms)
    G = Z @ Z.T
    cos = np.clip(G / np.outer(norms, norms), -1.0, 1.0)
    H = G * (np.pi - np.arccos(cos)) / (2.0 * np.pi)
    np.fill_diagonal(H, norms ** 2 / 2.0)
    H = 0.5 * (H + H.T)
    return GramSpectrum(H, min_eigenvalue(H), "limiting")


def limiting_gram_mc(z1, z2, draws: int, rng: np.random.Generator,
                     chunk: int = 1 << 16) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of one limiting Gram entry."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    dot = float(z1 @ z2)
    hits = 0
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        w = rng.standard_normal((m, z1.size))
        hits += int(np.count_nonzero((w @ z1 >= 0) & (w @ z2 >= 0)))
        done += m
    p = hits / draws
    return dot * p, abs(dot) * math.sqrt(p * (1 - p) / draws)


def empirical_gram(model, Z) -> GramSpectrum:
    """Finite-width Gram matrix of ``model``'s initial first layer W0."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    W0 = np.asarray(model.W0, dtype=float)
    if Z.shape[1] != W0.shape[1]:
        raise ValueError("input dimension does not match the model")
    A = (Z @ W0.T >= 0).astype(float)
    H = (Z @ Z.T) * (A @ A.T) / W0.shape[0]
    return GramSpectrum(H, min_eigenvalue(H), "empirical")


def min_eigenvalue(H) -> float:
    """Smallest eigenvalue via LAPACK's symmetric solver (numpy.linalg.eigvalsh)."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if np.max(np.abs(H - H.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("H is not symmetric")
    return float(np.linalg.eigvalsh(H)[0])


def parallel_pairs(Z, tol: float = 1e-12) -> int:
    """Number of input pairs that are parallel up to ``tol`` in |cos|."""
    U = _unit_rows(np.atleast_2d(np.asarray(Z, dtype=float)))
    C = np.abs(U @ U.T)
    iu = np.triu_indices(len(U), k=1)
    return int(np.count_nonzero(C[iu] >= 1.0 - tol))


def _contraction(eta, lambda0, D):
    c = eta * lambda0 / (2.0 * D)
    if not 0 <= c < 1:
        raise ValueError(f"eta*lambda0/(2D) = {c} must lie in [0, 1)")
    return c


def training_gain_db(eta: float, lambda0: float, D: int) -> float:
    """Guaranteed per-iteration mse reduction -10 log10(1 - eta lambda0 / 2D)."""
    return -10.0 * math.log10(1.0 - _contraction(eta, lambda0, D))


def convergence_envelope(k, mse0: float, eta: float, lambda0: float, D: int):
    """(1 - eta lambda0 / 2D)^k mse0; ``k`` may be an array of iterations."""
    c = _contraction(eta, lambda0, D)
    return mse0 * (1.0 - c) ** np.asarray(k, dtype=float)


def convergence_envelope_db(k, mse0: float, eta: float, lambda0: float, D: int):
    """Same envelope in dB: 10 log10 mse0 - k G."""
    return 10.0 * math.log10(mse0) - np.asarray(k, dtype=float) * training_gain_db(eta, lambda0, D)


def drift_radius_tau(D: int, init_residual_norm: float, B: int, lambda0: float) -> float:
    """Per-neuron drift radius 4 sqrt(D) ||t - u(0)|| / (sqrt(B) lambda0)."""
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    if B < 1:
        raise ValueError("B must be >= 1")
    return 4.0 * math.sqrt(D) * init_residual_norm / (math.sqrt(B) * lambda0)


def gamma_shape(D: int, B: int, tau: float, delta: float) -> tuple[float, float, float]:
    """Generalization-gap terms with unit constants (shape-only).

    Returns (local complexity, linearization remainder, concentration).
    """
    return (
        tau * math.sqrt(B / D),
        math.sqrt(B * math.log(B)) * tau ** (4.0 / 3.0),
        math.sqrt(math.log(1.0 / delta) / D),
    )


def llr_threshold(rho):
    """LLR magnitude matching posterior margin rho: 2 artanh(rho)."""
    return 2.0 * np.arctanh(rho)


def ga_low_margin(mu, rho):
    """GA probability that the posterior margin is at most rho.

    The synthesized-channel LLR is modeled as N(mu, 2 mu); the result is
    its mass on [-2 artanh(rho), 2 artanh(rho)].
    """
    rho_a = np.asarray(rho, dtype=float)
    if np.any((rho_a <= 0) | (rho_a >= 1)):
        raise ValueError("rho must lie in (0, 1)")
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mu must be nonnegative")
    tr = llr_threshold(rho_a)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(2.0 * mu)
        val = q_function((mu - tr) / s) - q_function((mu + tr) / s)
    val = np.where(mu == 0, 1.0, val)
    out = np.clip(val, 0.0, 1.0)
    return out if out.ndim else float(out)


def bit_error_bound(p_map: float, alpha: float, mse: float, rho: float) -> float:
    """min(1, P_MAP + alpha + mse / rho^2)."""
    if min(p_map, alpha, mse) < 0:
        raise ValueError("inputs must be nonnegative")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    return min(1.0, p_map + alpha + mse / rho ** 2)


def ber_bound(per_bit) -> float:
    p = np.asarray(per_bit, dtype=float)
    if p.size == 0:
        raise ValueError("no per-bit bounds")
    return float(np.clip(p.mean(), 0.0, 1.0))


def bler_bound(per_bit) -> float:
    p = np.asarray(per_bit, dtype=float)
    if p.size == 0:
        raise ValueError("no per-bit bounds")
    return float(min(1.0, p.sum()))


def width_requirement_shape(D: int, lambda0: float, delta: float) -> float:
    """D^6 / (lambda0^4 delta^3) with unit constant (shape-only)."""
    return D ** 6 / (lambda0 ** 4 * delta ** 3)


@dataclass
class BoundReport:
    """Theory next to measurement for one message bit at one rho.

    ``gamma*`` and ``bound_ga_shape`` use unit constants (shape-only).
    ``bound_measured`` assembles the bound from measured terms.
    """

    bit_index: int
    rho: float
    B: int
    D: int
    eta: float
    epochs: int
    lambda0: float
    lambda0_normalized: float
    lambda0_empirical: float
    G_train_db: float
    tau: float
    drift_measured: float
    envelope_term: float
    mse_train_final: float
    gamma1: float
    gamma2: float
    gamma3: float
    alpha_ga: float
    alpha_hat: float
    p_map_hat: float
    p_map_se: float
    mse_hat: float
    mse_se: float
    bound_measured: float
    bound_ga_shape: float
    measured_pe: float
    measured_pe_se: float

    def as_row(self) -> list:
        return [v if isinstance(v, int) else repr(float(v)) for v in asdict(self).values()]


def write_bound_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(BoundReport)])
        for r in reports:
            w.writerow(r.as_row())
