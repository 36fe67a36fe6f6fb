"""Channel models: static, Markov random walk, Rayleigh-faded profiles, scripts.

Every time-varying source is a single-consumer provider.  ``generate(count)``
returns the next ``count`` tap vectors as a ``(count, N)`` array and advances
its internal clock, so consecutive calls continue the same realisation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .kernels import markov_walk
from .signals import SeededRng, noise_variance_from_ebno

PROFILE_SCHEMA = "vleq-channel/1"
COST207_FS = 3.84e6


@dataclass(frozen=True)
class ChannelProfile:
    """Fixed tap vector plus optional fading metadata."""

    taps: np.ndarray
    label: str = ""
    mean_powers: np.ndarray | None = None
    doppler: float | None = None

    @property
    def n_taps(self) -> int:
        return int(self.taps.shape[0])


def normalize_power(taps: Sequence[float] | np.ndarray, label: str = "") -> ChannelProfile:
    """Scale ``taps`` to unit energy."""
    c = np.asarray(taps, dtype=float).ravel()
    if c.size == 0:
        raise ValueError("degenerate channel: no taps")
    energy = float(np.dot(c, c))
    if energy == 0.0 or not np.isfinite(energy):
        raise ValueError("degenerate channel: taps are all zero")
    return ChannelProfile(taps=c / np.sqrt(energy), label=label)


class ChannelProvider(Protocol):
    n_taps: int

    def generate(self, count: int) -> np.ndarray: ...


class StaticChannel:
    """Time-invariant channel."""

    def __init__(self, profile: ChannelProfile):
        self.profile = profile
        self.n_taps = profile.n_taps

    def generate(self, count: int) -> np.ndarray:
        return np.tile(self.profile.taps, (count, 1))


class MarkovChannel:
    """First-order random walk c(n) = c(n-1) + q(n).

    ``q`` is uniform with zero mean and per-tap variance ``sigma_q2``.  With
    ``renormalize`` set the walk is projected back to unit energy after every
    step.
    """

    def __init__(self, profile: ChannelProfile, sigma_q2: float,
                 renormalize: bool = True, rng: SeededRng | None = None):
        if sigma_q2 < 0:
            raise ValueError("sigma_q2 must be non-negative")
        self.current = profile
        self.sigma_q2 = float(sigma_q2)
        self.renormalize = bool(renormalize)
        self.rng = rng if rng is not None else SeededRng()
        self.n_taps = profile.n_taps
        self._started = False

    def _increments(self, count: int) -> np.ndarray:
        half_width = np.sqrt(3.0 * self.sigma_q2)
        return self.rng.generator.uniform(-half_width, half_width, size=(count, self.n_taps))

    def generate(self, count: int) -> np.ndarray:
        if count <= 0:
            return np.zeros((0, self.n_taps))
        # the very first emitted sample is the starting profile itself
        lead = 1 if self._started else 0
        self._started = True
        q = np.zeros((count + lead, self.n_taps))
        q[1:] = self._increments(count + lead - 1)
        full = np.empty_like(q)
        markov_walk(self.current.taps, q, self.renormalize, full)
        out = full[lead:]
        self.current = ChannelProfile(out[-1].copy(), self.current.label)
        return out


def markov_step(ch: MarkovChannel, rng: SeededRng) -> MarkovChannel:
    """Return a new channel advanced by one random-walk step."""
    half_width = np.sqrt(3.0 * ch.sigma_q2)
    c = ch.current.taps + rng.generator.uniform(-half_width, half_width, size=ch.n_taps)
    if ch.renormalize:
        c = c / np.sqrt(np.dot(c, c))
    return MarkovChannel(ChannelProfile(c, ch.current.label), ch.sigma_q2,
                         ch.renormalize, ch.rng)


@dataclass
class JakesTapGenerator:
    """Sum-of-sinusoids Rayleigh tap (method of exact Doppler spread).

    The in-phase branch uses ``n_sines`` sinusoids and the quadrature branch
    ``n_sines + 1`` so the two branches share no frequency and stay
    uncorrelated.  Frequencies are ``fd * sin(pi * (k - 1/2) / (2 * n))`` and
    the phases are random.  With ``signed`` the real gain is
    ``sign(I) * sqrt(I**2 + Q**2)``; otherwise only the envelope is returned.
    """

    fd: float
    fs: float
    n_sines: int = 8
    mean_power: float = 1.0
    signed: bool = True
    phases_i: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phases_q: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.fd < 0:
            raise ValueError("fd must be non-negative")
        if self.n_sines < 1:
            raise ValueError("n_sines must be at least 1")
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        if self.phases_i.size != self.n_sines:
            self.phases_i = np.zeros(self.n_sines)
        if self.phases_q.size != self.n_sines + 1:
            self.phases_q = np.zeros(self.n_sines + 1)

    @classmethod
    def random(cls, fd: float, fs: float, rng: SeededRng, n_sines: int = 8,
               mean_power: float = 1.0, signed: bool = True) -> "JakesTapGenerator":
        phases = rng.generator.uniform(0.0, 2.0 * np.pi, size=2 * n_sines + 1)
        return cls(fd, fs, n_sines, mean_power, signed,
                   phases[:n_sines], phases[n_sines:])

    @staticmethod
    def _branch(t_sec, fd, phases):
        n = phases.size
        k = np.arange(1, n + 1)
        freqs = fd * np.sin(np.pi * (k - 0.5) / (2 * n))
        arg = 2.0 * np.pi * np.multiply.outer(t_sec, freqs) + phases
        return np.sqrt(2.0 / n) * np.cos(arg).sum(axis=-1)

    def quadratures(self, t) -> tuple[np.ndarray, np.ndarray]:
        """In-phase and quadrature components at sample indices ``t``.

        Each has variance ``mean_power / 2``.
        """
        t_sec = np.asarray(t, dtype=float) / self.fs
        scale = np.sqrt(self.mean_power / 2.0)
        return (scale * self._branch(t_sec, self.fd, self.phases_i),
                scale * self._branch(t_sec, self.fd, self.phases_q))

    def gain(self, t) -> np.ndarray:
        i, q = self.quadratures(t)
        env = np.hypot(i, q)
        if not self.signed:
            return env
        return np.where(i < 0.0, -env, env)


def jakes_gain(gen: JakesTapGenerator, t):
    """Faded tap value at sample index ``t`` (scalar or array)."""
    g = gen.gain(t)
    return float(g) if np.ndim(g) == 0 else g


class FadedProfileChannel:
    """Independently Rayleigh-faded taps with given mean powers.

    ``fd == 0`` freezes the channel at ``sqrt(mean_powers)``.
    """

    def __init__(self, mean_powers: Sequence[float], fd: float, fs: float = COST207_FS,
                 rng: SeededRng | None = None, n_sines: int = 8, signed: bool = True,
                 label: str = ""):
        p = np.asarray(mean_powers, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or p.sum() <= 0:
            raise ValueError("mean_powers must be a non-empty non-negative vector")
        if fd < 0:
            raise ValueError("fd must be non-negative")
        self.mean_powers = p / p.sum()
        self.fd = float(fd)
        self.fs = float(fs)
        self.label = label
        self.n_taps = p.size
        rng = rng if rng is not None else SeededRng()
        self.generators = [
            JakesTapGenerator.random(self.fd, self.fs, rng.child(j), n_sines,
                                     float(self.mean_powers[j]), signed)
            for j in range(self.n_taps)
        ]
        self._t = 0

    def generate(self, count: int) -> np.ndarray:
        if self.fd == 0.0:
            return np.tile(np.sqrt(self.mean_powers), (count, 1))
        t = np.arange(self._t, self._t + count)
        self._t += count
        out = np.empty((count, self.n_taps))
        for j, gen in enumerate(self.generators):
            out[:, j] = gen.gain(t)
        return out


def cost207_tu_reduced(fd: float, rng: SeededRng | None = None, **kwargs) -> FadedProfileChannel:
    """11-tap reduced typical-urban channel at 3.84 Msample/s."""
    prof = load_profile("cost207_tu_reduced")
    return FadedProfileChannel(prof.mean_powers, fd, COST207_FS, rng,
                               label=prof.label, **kwargs)


@dataclass
class ScenarioSegment:
    duration: int
    provider: ChannelProvider
    ebno_db: float


class ScenarioScript:
    """Ordered segments of (duration, provider, E/No)."""

    def __init__(self, segments: Sequence[ScenarioSegment | tuple]):
        segs = [s if isinstance(s, ScenarioSegment) else ScenarioSegment(*s) for s in segments]
        if not segs:
            raise ValueError("scenario needs at least one segment")
        for s in segs:
            if int(s.duration) <= 0:
                raise ValueError("segment durations must be positive")
        self.segments = segs
        self.boundaries = np.cumsum([0] + [int(s.duration) for s in segs])
        self.max_taps = max(s.provider.n_taps for s in segs)
        self._taps: np.ndarray | None = None
        self._noise: np.ndarray | None = None

    @property
    def total_duration(self) -> int:
        return int(self.boundaries[-1])

    def render(self) -> tuple[np.ndarray, np.ndarray]:
        """Zero-padded taps ``(T, max_taps)`` and noise variance ``(T,)``."""
        if self._taps is None:
            taps = np.zeros((self.total_duration, self.max_taps))
            noise = np.empty(self.total_duration)
            for k, seg in enumerate(self.segments):
                a, b = self.boundaries[k], self.boundaries[k + 1]
                block = seg.provider.generate(int(seg.duration))
                taps[a:b, : block.shape[1]] = block
                noise[a:b] = noise_variance_from_ebno(seg.ebno_db)
            self._taps, self._noise = taps, noise
        return self._taps, self._noise

    def segment_index(self, n: int) -> int:
        if n < 0 or n >= self.total_duration:
            raise IndexError(f"sample {n} outside scenario of length {self.total_duration}")
        return int(np.searchsorted(self.boundaries, n, side="right") - 1)


def scenario_at(script: ScenarioScript, n: int) -> tuple[np.ndarray, float]:
    """Active taps (at the segment's own length) and noise variance at ``n``."""
    k = script.segment_index(n)
    taps, noise = script.render()
    return taps[n, : script.segments[k].provider.n_taps].copy(), float(noise[n])


def _profile_table(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("vleq").joinpath("data/channels.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    if doc.get("schema") != PROFILE_SCHEMA:
        raise ValueError(f"unsupported channel file schema {doc.get('schema')!r}")
    return doc["profiles"]


def available_profiles(path: str | Path | None = None) -> list[str]:
    return sorted(_profile_table(path))


def load_profile(name: str, path: str | Path | None = None) -> ChannelProfile:
    """Load a named profile from the bundled table or from ``path``.

    Taps are normalized to unit energy.  Entries that only list
    ``mean_powers`` get static taps ``sqrt(p)``.
    """
    table = _profile_table(path)
    if name not in table:
        raise KeyError(f"unknown channel profile {name!r}; have {sorted(table)}")
    entry = table[name]
    label = entry.get("label", name)
    powers = entry.get("mean_powers")
    if "taps" in entry:
        prof = normalize_power(entry["taps"], label)
    elif powers is not None:
        prof = normalize_power(np.sqrt(np.asarray(powers, dtype=float)), label)
    else:
        raise ValueError(f"profile {name!r} has neither taps nor mean_powers")
    if powers is not None:
        p = np.asarray(powers, dtype=float)
        powers = p / p.sum()
    return ChannelProfile(prof.taps, label, powers, entry.get("doppler"))
