"""Equalizer topologies and their online length controllers.

These classes are the step-by-step reference implementation: readable,
sample-at-a-time, and built on the pure updates in :mod:`vleq.adaptive`.
Long simulations go through the compiled loops in :mod:`vleq.kernels`, and
the test-suite checks that both routes agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .adaptive import (
    LmsState,
    NlmsState,
    RlsState,
    VslmsState,
    lms_update,
    max_stable_mu,
    nlms_update,
    rls_init,
    rls_update,
    vslms_update,
)
from .channels import ChannelProfile

_UPDATES = {
    LmsState: lms_update,
    NlmsState: nlms_update,
    VslmsState: vslms_update,
    RlsState: rls_update,
}

AlgState = LmsState | NlmsState | VslmsState | RlsState


class Decision(str, Enum):
    EXPAND = "expand"
    CONTRACT = "contract"
    HOLD = "hold"


def detect(y: float) -> float:
    """Binary slicer with sign(0) = +1."""
    return 1.0 if y >= 0.0 else -1.0


def adapt(state: AlgState, u: np.ndarray, d: float) -> tuple[AlgState, float]:
    return _UPDATES[type(state)](state, u, d)


def resize_weights(state: AlgState, new_m: int, input_power: float = 1.0,
                   mu_cap: float | None = None, delta: float = 0.01) -> AlgState:
    """Change the number of active taps at the tail.

    LMS-family states are zero-extended or truncated and their step size is
    re-checked against :func:`max_stable_mu` for the new length.  RLS states
    grow with a ``1/delta`` diagonal block and shrink by truncation (use
    :func:`rls_resize_le` for the restart policy of the linear equalizer).
    """
    old_m = state.weights.size
    w = np.zeros(new_m)
    k = min(old_m, new_m)
    w[:k] = state.weights[:k]
    if isinstance(state, RlsState):
        P = np.zeros((new_m, new_m))
        P[:k, :k] = state.P[:k, :k]
        for i in range(k, new_m):
            P[i, i] = 1.0 / delta
        return replace(state, weights=w, P=P)
    if isinstance(state, LmsState):
        cap = mu_cap if mu_cap is not None else state.mu
        return replace(state, weights=w, mu=min(cap, max_stable_mu(new_m, input_power)))
    if isinstance(state, VslmsState):
        return replace(state, weights=w,
                       mu=min(state.mu, max_stable_mu(new_m, state.power)))
    return replace(state, weights=w)


class SegmentedLe:
    """Linear equalizer made of ``max_segs`` segments of ``seg_len`` taps.

    The tap-delay line always spans all ``seg_len * max_segs`` positions;
    only the first ``active`` segments carry (non-zero) weights.
    """

    def __init__(self, seg_len: int = 3, max_segs: int = 10, active: int = 1,
                 delay: int = 0, alg: AlgState | None = None):
        if seg_len < 1 or max_segs < 1:
            raise ValueError("segment length and count must be positive")
        if not 1 <= active <= max_segs:
            raise ValueError("active segments must lie in [1, max_segs]")
        if active * seg_len < delay + 1:
            raise ValueError("equalizer must be longer than the decision delay")
        self.seg_len = seg_len
        self.max_segs = max_segs
        self.active = active
        self.delay = delay
        self.line = np.zeros(seg_len * max_segs)
        m = active * seg_len
        self.alg = alg if alg is not None else LmsState(np.zeros(m), 0.01)
        if self.alg.weights.size != m:
            raise ValueError("algorithm state length does not match active taps")
        self._mu_cap = getattr(self.alg, "mu", None)

    @property
    def n_active(self) -> int:
        return self.active * self.seg_len

    @property
    def min_segments(self) -> int:
        return max(1, math.ceil((self.delay + 1) / self.seg_len))

    @property
    def weights(self) -> np.ndarray:
        w = np.zeros_like(self.line)
        w[: self.n_active] = self.alg.weights
        return w

    def push(self, sample: float) -> None:
        self.line[1:] = self.line[:-1]
        self.line[0] = sample

    def partial_outputs(self) -> np.ndarray:
        """Cumulative outputs after each active segment."""
        w = self.alg.weights
        p = self.seg_len
        seg = [w[i * p:(i + 1) * p] @ self.line[i * p:(i + 1) * p] for i in range(self.active)]
        return np.cumsum(seg)

    def set_segments(self, new_active: int, input_power: float = 1.0, delta: float = 0.01) -> None:
        if not self.min_segments <= new_active <= self.max_segs:
            raise ValueError("segment count out of range")
        new_m = new_active * self.seg_len
        if isinstance(self.alg, RlsState):
            resized = rls_resize_le(self.alg, self.n_active, new_m, delta)
            self.alg = resized if resized is not None else rls_init(new_m, delta, self.alg.lam)
        else:
            self.alg = resize_weights(self.alg, new_m, input_power, self._mu_cap)
        self.active = new_active


def le_step(eq: SegmentedLe, sample: float, reference: float | None = None):
    """Filter one sample, slice and adapt.

    ``reference=None`` means decision-directed.  Returns
    ``(y, d_hat, e, partials)`` with cumulative per-segment partial outputs.
    """
    eq.push(sample)
    partials = eq.partial_outputs()
    y = float(partials[-1])
    d_hat = detect(y)
    ref = d_hat if reference is None else float(reference)
    eq.alg, e = adapt(eq.alg, eq.line[: eq.n_active].copy(), ref)
    return y, d_hat, e, partials


@dataclass
class LeLengthController:
    """Accumulated-squared-error length control for the segmented LE.

    ``n_tau > 0`` enables the expansion floor: no expansion while the
    exponentially weighted mean of the last-segment error is below it.
    """

    alpha_up: float = 0.8
    alpha_dw: float = 0.99
    beta: float = 0.999
    t_hold: int = 1000
    n_tau: float = 0.0
    ase_last: float = 0.0
    ase_prev: float = 0.0
    n_eff: float = 0.0
    hold: int = -1

    def __post_init__(self):
        if not (0 < self.alpha_up <= 1 and 0 < self.alpha_dw <= 1):
            raise ValueError("alpha values must lie in (0, 1]")
        if self.alpha_up > self.alpha_dw:
            raise ValueError("alpha_up must not exceed alpha_dw")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.hold < 0:
            self.hold = self.t_hold

    def reset(self) -> None:
        self.ase_last = self.ase_prev = self.n_eff = 0.0
        self.hold = self.t_hold


def le_length_update(ctl: LeLengthController, eq: SegmentedLe,
                     e_prev: float, e_last: float) -> Decision:
    """Decide whether to add or drop a segment; applies nothing to ``eq``.

    ``e_last`` is the error of the full output, ``e_prev`` the error of the
    output truncated one segment earlier.
    """
    ctl.ase_last = ctl.beta * ctl.ase_last + e_last * e_last
    ctl.ase_prev = ctl.beta * ctl.ase_prev + e_prev * e_prev
    ctl.n_eff = ctl.beta * ctl.n_eff + 1.0
    if ctl.hold > 0:
        ctl.hold -= 1
        return Decision.HOLD
    floor_ok = ctl.n_tau <= 0 or ctl.ase_last > ctl.n_eff * ctl.n_tau
    if ctl.ase_last <= ctl.alpha_up * ctl.ase_prev and eq.active < eq.max_segs and floor_ok:
        return Decision.EXPAND
    if ctl.ase_last >= ctl.alpha_dw * ctl.ase_prev and eq.active > eq.min_segments:
        return Decision.CONTRACT
    return Decision.HOLD


def apply_le_decision(ctl: LeLengthController, eq: SegmentedLe, decision: Decision,
                      input_power: float = 1.0, delta: float = 0.01) -> None:
    if decision is Decision.HOLD:
        return
    step = 1 if decision is Decision.EXPAND else -1
    eq.set_segments(eq.active + step, input_power, delta)
    ctl.reset()


def rls_resize_le(s: RlsState, old_m: int, new_m: int, delta: float = 0.01) -> RlsState | None:
    """Grow an RLS state by zero-padding; ``None`` on shrink (restart needed)."""
    if s.weights.size != old_m:
        raise ValueError("state size does not match old_m")
    if new_m < old_m:
        return None
    return resize_weights(s, new_m, delta=delta)


def rls_resize_dfe_fbf(s: RlsState, direction: int, delta: float = 0.01) -> RlsState:
    """Add (``+1``) or drop (``-1``) the last feedback tap without restarting."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    return resize_weights(s, s.weights.size + direction, delta=delta)


class DfeState:
    """Feed-forward filter on r(n) plus feedback filter on past references."""

    def __init__(self, n_ff: int, nb: int, delay: int, nb_min: int = 2, nb_max: int = 25,
                 alg: AlgState | None = None):
        if n_ff < 1:
            raise ValueError("n_ff must be positive")
        if not 0 <= nb_min <= nb <= nb_max:
            raise ValueError("need nb_min <= nb <= nb_max")
        self.n_ff = n_ff
        self.nb = nb
        self.nb_min = nb_min
        self.nb_max = nb_max
        self.delay = delay
        self.ff_line = np.zeros(n_ff)
        self.fb_line = np.zeros(nb_max)
        m = n_ff + nb
        self.alg = alg if alg is not None else LmsState(np.zeros(m), 0.01)
        if self.alg.weights.size != m:
            raise ValueError("algorithm state length does not match n_ff + nb")
        self._mu_cap = getattr(self.alg, "mu", None)

    @property
    def w_f(self) -> np.ndarray:
        return self.alg.weights[: self.n_ff]

    @property
    def w_b(self) -> np.ndarray:
        return self.alg.weights[self.n_ff:]

    def regressor(self) -> np.ndarray:
        return np.concatenate([self.ff_line, self.fb_line[: self.nb]])

    def set_feedback_length(self, nb: int, input_power: float = 1.0, delta: float = 0.01) -> None:
        if not self.nb_min <= nb <= self.nb_max:
            raise ValueError("feedback length out of range")
        state = self.alg
        if isinstance(state, RlsState):
            while state.weights.size < self.n_ff + nb:
                state = rls_resize_dfe_fbf(state, +1, delta)
            while state.weights.size > self.n_ff + nb:
                state = rls_resize_dfe_fbf(state, -1, delta)
        else:
            state = resize_weights(state, self.n_ff + nb, input_power, self._mu_cap)
        self.alg = state
        self.nb = nb


def dfe_step(eq: DfeState, sample: float, training: float | None = None):
    """One DFE iteration; ``training=None`` runs decision-directed.

    Returns ``(y, d_hat, e)``.  The reference actually used enters the
    feedback line afterwards.
    """
    eq.ff_line[1:] = eq.ff_line[:-1]
    eq.ff_line[0] = sample
    u = eq.regressor()
    y = float(eq.alg.weights @ u)
    d_hat = detect(y)
    ref = d_hat if training is None else float(training)
    eq.alg, e = adapt(eq.alg, u, ref)
    if eq.nb_max:
        eq.fb_line[1:] = eq.fb_line[:-1]
        eq.fb_line[0] = ref
    return y, d_hat, e


@dataclass
class FbfLengthController:
    """Tail-tap significance test for the feedback filter length."""

    chi: float = 0.001
    window: int = 150
    probe: int = 0
    tp_last: float = 0.0
    tp_prev: float = 0.0
    sse: float = 0.0
    count: int = 0
    since_probe: int = 0

    def __post_init__(self):
        if self.chi <= 0:
            raise ValueError("chi must be positive")
        if self.window < 1:
            raise ValueError("window must be positive")


def fbf_length_update(ctl: FbfLengthController, eq: DfeState, e: float) -> Decision:
    """Accumulate one symbol; decide only at window boundaries.

    With a probe period set, an elapsed period makes the filter jump straight
    to ``nb_max`` (applied here, reported as ``HOLD``); the regular test then
    trims it back one tap per window.
    """
    w_b = eq.w_b
    nb = eq.nb
    if nb >= 1:
        ctl.tp_last += w_b[nb - 1] ** 2
    if nb >= 2:
        ctl.tp_prev += w_b[nb - 2] ** 2
    ctl.sse += e * e
    ctl.count += 1
    ctl.since_probe += 1
    if ctl.count < ctl.window:
        return Decision.HOLD
    thr = ctl.chi * ctl.sse
    decision = Decision.HOLD
    if ctl.tp_last > thr and nb < eq.nb_max:
        decision = Decision.EXPAND
    elif ctl.tp_last < thr and ctl.tp_prev < thr and nb > eq.nb_min:
        decision = Decision.CONTRACT
    if ctl.probe > 0 and ctl.since_probe >= ctl.probe:
        # watchdog for sparse channels: open the whole feedback filter now
        ctl.since_probe = 0
        if nb < eq.nb_max:
            eq.set_feedback_length(eq.nb_max)
        decision = Decision.HOLD
    ctl.tp_last = ctl.tp_prev = ctl.sse = 0.0
    ctl.count = 0
    return decision


def apply_fbf_decision(eq: DfeState, decision: Decision, input_power: float = 1.0,
                       delta: float = 0.01) -> None:
    if decision is Decision.EXPAND and eq.nb < eq.nb_max:
        eq.set_feedback_length(eq.nb + 1, input_power, delta)
    elif decision is Decision.CONTRACT:
        eq.set_feedback_length(eq.nb - 1, input_power, delta)


def optimal_dfe_delay(channel: ChannelProfile | np.ndarray, n_ff: int) -> int:
    """Delay rule: main-peak position plus ``n_ff - 1``."""
    if n_ff < 1:
        raise ValueError("n_ff must be positive")
    c = channel.taps if isinstance(channel, ChannelProfile) else np.asarray(channel, dtype=float)
    return int(np.argmax(np.abs(c))) + n_ff - 1
