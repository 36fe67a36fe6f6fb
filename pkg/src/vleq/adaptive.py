"""LMS, NLMS, VSLMS and RLS engines on an abstract regressor.

Each update is a pure function ``(state, u, d) -> (new_state, error)``.  The
states are small immutable records, so a caller can keep any past state
around (handy for comparing trajectories).  The per-sample simulation loops
in :mod:`vleq.kernels` inline the same arithmetic for speed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

DIVERGENCE_LIMIT = 1e6


class DivergenceError(RuntimeError):
    """Raised when an adaptive filter's state becomes unusable."""


@dataclass(frozen=True)
class LmsState:
    weights: np.ndarray
    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be non-negative")


@dataclass(frozen=True)
class NlmsState:
    weights: np.ndarray
    mu: float
    a: float = 1e-6


@dataclass(frozen=True)
class VslmsState:
    """Variable step-size LMS.

    ``power`` is the exponentially smoothed ``||u||^2 / M`` that feeds the
    stability bound; ``mu_max=None`` means "use :func:`max_stable_mu` only".
    """

    weights: np.ndarray
    mu: float
    a: float = 0.99
    rho: float = 1e-4
    mu_min: float = 1e-6
    mu_max: float | None = None
    power: float = 1.0
    power_beta: float = 0.99


@dataclass(frozen=True)
class RlsState:
    weights: np.ndarray
    P: np.ndarray
    lam: float = 1.0
    delta: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")


def max_stable_mu(m: int, input_power: float) -> float:
    """Conservative LMS step-size bound 2 / (3 M P_in)."""
    if m < 1:
        raise ValueError("M must be at least 1")
    if input_power <= 0:
        raise ValueError("input_power must be positive")
    return 2.0 / (3.0 * m * input_power)


def _check(weights: np.ndarray, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != weights.shape:
        raise ValueError(f"regressor length {u.shape} does not match weights {weights.shape}")
    return u


def _guard(w: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(w)) or np.any(np.abs(w) > DIVERGENCE_LIMIT):
        raise DivergenceError(f"{name} divergence")


def lms_update(s: LmsState, u, d: float) -> tuple[LmsState, float]:
    u = _check(s.weights, u)
    e = float(d - s.weights @ u)
    w = s.weights + s.mu * e * u
    _guard(w, "LMS")
    return replace(s, weights=w), e


def nlms_update(s: NlmsState, u, d: float) -> tuple[NlmsState, float]:
    u = _check(s.weights, u)
    e = float(d - s.weights @ u)
    norm = float(u @ u)
    if norm == 0.0:
        return s, e
    w = s.weights + (s.mu / (s.a + norm)) * e * u
    _guard(w, "NLMS")
    return replace(s, weights=w), e


def vslms_update(s: VslmsState, u, d: float) -> tuple[VslmsState, float]:
    u = _check(s.weights, u)
    e = float(d - s.weights @ u)
    w = s.weights + s.mu * e * u
    _guard(w, "VSLMS")
    m = w.size
    power = s.power_beta * s.power + (1.0 - s.power_beta) * float(u @ u) / m
    upper = max_stable_mu(m, power) if power > 0 else np.inf
    if s.mu_max is not None:
        upper = min(upper, s.mu_max)
    mu = min(max(s.a * s.mu + s.rho * e * e, s.mu_min), upper)
    return replace(s, weights=w, mu=mu, power=power), e


def rls_init(m: int, delta: float = 0.01, lam: float = 1.0) -> RlsState:
    """Zero weights, ``P = I / delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return RlsState(np.zeros(m), np.eye(m) / delta, lam, delta)


def rls_update(s: RlsState, u, d: float) -> tuple[RlsState, float]:
    """Exponentially weighted RLS step; returns the a-priori error."""
    u = _check(s.weights, u)
    pu = s.P @ u
    k = pu / (s.lam + float(u @ pu))
    zeta = float(d - s.weights @ u)
    w = s.weights + k * zeta
    P = (s.P - np.outer(k, pu)) / s.lam
    P = 0.5 * (P + P.T)
    if not np.all(np.isfinite(P)):
        raise DivergenceError("RLS divergence")
    _guard(w, "RLS")
    return replace(s, weights=w, P=P), zeta
