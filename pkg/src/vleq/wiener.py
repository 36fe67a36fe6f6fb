"""Closed-form analysis: Wiener solutions and steady-state MSE predictions.

Notation follows the rest of the package: ``c`` is the channel, ``sv2`` the
noise variance, ``sd2`` the symbol power, ``sq2`` the per-tap variance of the
random-walk channel increments, ``M`` the LE length and ``(nf, nb)`` the DFE
feed-forward / feedback lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .channels import ChannelProfile

MAX_CONDITION = 1e12
SNR_INFINITE = math.inf


class IllConditionedError(np.linalg.LinAlgError):
    def __init__(self, condition: float):
        super().__init__(f"correlation matrix is ill-conditioned (condition {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class CorrelationSystem:
    R: np.ndarray
    p: np.ndarray
    delay: int
    layout: str = "le"
    nf: int = 0
    nb: int = 0
    sd2: float = 1.0


def _taps(c) -> np.ndarray:
    return c.taps if isinstance(c, ChannelProfile) else np.asarray(c, dtype=float)


def channel_autocorrelation(c) -> np.ndarray:
    """gamma_k = sum_j c_j c_{j+k} for k = 0..N-1."""
    c = _taps(c)
    return np.correlate(c, c, mode="full")[c.size - 1:]


def _tap(c: np.ndarray, i: int) -> float:
    return float(c[i]) if 0 <= i < c.size else 0.0


def _le_block(c: np.ndarray, sv2: float, m: int, sd2: float) -> np.ndarray:
    gamma = np.zeros(m)
    g = channel_autocorrelation(c)
    k = min(m, g.size)
    gamma[:k] = g[:k]
    return sd2 * linalg.toeplitz(gamma) + sv2 * np.eye(m)


def build_le_correlations(c, sv2: float, m: int, delay: int, sd2: float = 1.0) -> CorrelationSystem:
    c = _taps(c)
    if not 0 <= delay <= m + c.size - 2:
        raise ValueError("delay outside the combined response support")
    R = _le_block(c, sv2, m, sd2)
    p = sd2 * np.array([_tap(c, delay - i) for i in range(m)])
    return CorrelationSystem(R, p, delay, "le", m, 0, sd2)


def build_dfe_correlations(c, sv2: float, nf: int, nb: int, delay: int,
                           sd2: float = 1.0) -> CorrelationSystem:
    """Correlations of ``[r-window, past-symbol window]`` assuming correct decisions.

    The feedback window holds s(n-D-1) ... s(n-D-nb).
    """
    c = _taps(c)
    m = nf + nb
    R = np.zeros((m, m))
    R[:nf, :nf] = _le_block(c, sv2, nf, sd2)
    # E[r(n-i) s(n-D-1-j)] = sd2 * c_{D+1+j-i}
    V = sd2 * np.array([[_tap(c, delay + 1 + j - i) for j in range(nb)] for i in range(nf)])
    if nb:
        R[:nf, nf:] = V
        R[nf:, :nf] = V.T
        R[nf:, nf:] = sd2 * np.eye(nb)
    p = np.zeros(m)
    p[:nf] = sd2 * np.array([_tap(c, delay - i) for i in range(nf)])
    return CorrelationSystem(R, p, delay, "dfe", nf, nb, sd2)


def wiener_solve(sys: CorrelationSystem) -> tuple[np.ndarray, float]:
    """Optimum weights and MMSE = sd2 - p^T w (clamped at zero)."""
    R = sys.R
    cond = float(np.linalg.cond(R))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(cond)
    w = linalg.cho_solve(linalg.cho_factor(R), sys.p)
    mmse = sys.sd2 - float(sys.p @ w)
    return w, max(mmse, 0.0)


def eigenvalue_spread(R: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(np.asarray(R, dtype=float))
    if ev[0] <= 0:
        raise ValueError("matrix is not positive definite")
    return float(ev[-1] / ev[0])


@dataclass(frozen=True)
class PredictionInputs:
    """Parameters shared by the steady-state MSE predictions.

    ``m`` is the LE length; DFE formulas use ``nf`` and ``nb`` instead.
    """

    mmse: float
    n: int
    sq2: float
    sv2: float
    sd2: float = 1.0
    m: int = 1
    nf: int = 0
    nb: int = 0
    mu: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if min(self.mmse, self.sq2, self.sv2, self.sd2) < 0:
            raise ValueError("variances must be non-negative")
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")


def predict_mse_lms_le(x: PredictionInputs) -> float:
    if x.mu <= 0:
        raise ValueError("mu must be positive")
    power = x.sd2 + x.sv2
    return x.mmse * (1 + x.m * power * x.mu / 2) + x.n * x.sq2 / (2 * x.mu)


def optimum_mu(x: PredictionInputs) -> float:
    if x.sq2 == 0:
        return 0.0
    return math.sqrt(x.n * x.sq2 / (x.m * (x.sd2 + x.sv2) * x.mmse))


def predict_mse_rls_le(x: PredictionInputs) -> float:
    power = x.sd2 + x.sv2
    if x.lam == 1.0:
        if x.sq2 > 0:
            raise ValueError("infinite tracking term: lambda = 1 with a moving channel")
        return x.mmse
    one_l = 1 - x.lam
    return x.mmse * (1 + x.m * one_l / 2) + x.n * x.sq2 * power / (2 * one_l)


def optimum_lambda(x: PredictionInputs) -> float:
    if x.sq2 == 0:
        return 1.0
    lam = 1 - math.sqrt(x.n * x.sq2 * (x.sd2 + x.sv2) / (x.m * x.mmse))
    return min(max(lam, np.finfo(float).tiny), 1 - np.finfo(float).eps)


def predict_mse_lms_dfe(x: PredictionInputs) -> float:
    if x.mu <= 0:
        raise ValueError("mu must be positive")
    misadj = x.mu * x.nf * (1 + x.sv2) / 2 + x.mu * x.nb / 2
    return x.mmse * (1 + misadj) + x.n * x.sq2 / (2 * x.mu)


def predict_mse_rls_dfe(x: PredictionInputs) -> float:
    if x.lam == 1.0:
        if x.sq2 > 0:
            raise ValueError("infinite tracking term: lambda = 1 with a moving channel")
        return x.mmse
    one_l = 1 - x.lam
    m = x.nf + x.nb
    lag_ff = x.n * x.nf * x.sq2 * (1 + x.sv2) / (2 * one_l * m)
    lag_fb = x.n * x.nb * x.sq2 / (2 * one_l * m)
    return x.mmse * (1 + one_l * m / 2) + lag_ff + lag_fb


def combined_response(c, w_f) -> np.ndarray:
    """Channel convolved with the feed-forward filter."""
    return np.convolve(_taps(c), np.asarray(w_f, dtype=float))


@dataclass(frozen=True)
class IsiBreakdown:
    snr_out: float
    isi_pre: float
    isi_post: float
    isi_excess: float


def isi_decomposition(z, delay: int, sv2: float, w_f, w_b, n: int) -> IsiBreakdown:
    """Split a DFE's combined response into signal, pre- and postcursor ISI.

    The feedback filter (sign convention ``y = w_f r + w_b s``) cancels the
    postcursors it covers; what it leaves behind counts against the SNR.
    ``isi_excess`` is the energy in feedback taps beyond the channel memory
    (0-based index ``>= n - 1``).  A zero denominator gives ``snr_out = inf``.
    """
    z = np.asarray(z, dtype=float)
    w_f = np.asarray(w_f, dtype=float)
    w_b = np.asarray(w_b, dtype=float)
    if not 0 <= delay < z.size:
        raise ValueError("delay outside the combined response")
    pre = float(np.sum(z[:delay] ** 2))
    post = z[delay + 1:]
    isi_post = float(np.sum(post ** 2))
    k = max(post.size, w_b.size)
    residual = np.zeros(k)
    residual[: post.size] += post
    residual[: w_b.size] += w_b
    denom = sv2 * float(w_f @ w_f) + pre + float(residual @ residual)
    snr = SNR_INFINITE if denom == 0 else float(z[delay] ** 2 / denom)
    excess = float(np.sum(w_b[max(n - 1, 0):] ** 2))
    return IsiBreakdown(snr, pre, isi_post, excess)


def lms_transient_bound(m: int, mu: float, mmse: float, sd2: float, sv2: float,
                        lam_av: float, lam_max: float, mse_now: float) -> float:
    """One step of the LMS transient-MSE recursion.

    The transient coefficient multiplies the excess over the MMSE; the
    step-size-squared misadjustment term carries the factor M.
    """
    power = sd2 + sv2
    coef = 1 - 2 * mu * lam_av + mu * mu * m * lam_max * power
    return coef * (mse_now - mmse) + lam_max * power * mu * mu * mmse + mmse


def rls_transient_mse(m: int, n: int, mmse: float) -> float:
    """A-priori MSE of growing-window RLS after ``n > m + 1`` updates."""
    if n <= m + 1:
        raise ValueError("needs n > M + 1")
    return mmse * (1 + m / (n - m - 1))


def mmse_trace(taps: np.ndarray, noise_var: np.ndarray, m: int, delay: int,
               decimation: int = 50, sd2: float = 1.0) -> np.ndarray:
    """LE MMSE of each channel snapshot, held constant between evaluations."""
    t = taps.shape[0]
    out = np.empty(t)
    for a in range(0, t, decimation):
        _, mm = wiener_solve(build_le_correlations(taps[a], noise_var[a], m, delay, sd2))
        out[a:a + decimation] = mm
    return out


def le_mmse_table(c, sv2: float, lengths, delay_of=None) -> list[tuple[int, int, float]]:
    """(M, D, MMSE) rows; the default delay is the best one for each M."""
    rows = []
    c = _taps(c)
    for m in lengths:
        delays = [delay_of(m)] if delay_of else range(m + c.size - 1)
        best = None
        for d in delays:
            try:
                _, mm = wiener_solve(build_le_correlations(c, sv2, m, d))
            except IllConditionedError:
                continue
            if best is None or mm < best[1]:
                best = (d, mm)
        if best is not None:
            rows.append((int(m), best[0], best[1]))
    return rows
