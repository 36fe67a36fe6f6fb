"""Random sources: BPSK symbols, AWGN and E/No bookkeeping."""

from __future__ import annotations

import numpy as np


class SeededRng:
    """Reproducible random stream identified by ``(seed, stream)``.

    ``stream`` is the ensemble-run index.  Streams are derived with
    :class:`numpy.random.SeedSequence` spawn keys, so distinct stream ids give
    statistically independent generators while identical pairs reproduce
    bit-identical draws (given the same call order).
    """

    def __init__(self, seed: int = 0, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: int) -> "SeededRng":
        """Independent sub-stream, e.g. one per channel tap or per provider."""
        sub = SeededRng.__new__(SeededRng)
        sub.seed = self.seed
        sub.stream = self.stream
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, int(label) + 1))
        sub.generator = np.random.Generator(np.random.PCG64(ss))
        return sub

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def generate_symbols(count: int, rng: SeededRng) -> np.ndarray:
    """Equiprobable antipodal symbols in {-1, +1} (float64)."""
    if count < 0:
        raise ValueError("count must be non-negative")
    bits = rng.generator.integers(0, 2, size=count)
    return 2.0 * bits - 1.0


def noise_variance_from_ebno(ebno_db: float, symbol_power: float = 1.0) -> float:
    """Noise variance for a given E/No (dB), unit-power channel assumed.

    E/No is taken as ``10*log10(symbol_power / noise_variance)`` measured at
    the equalizer input.
    """
    if symbol_power <= 0:
        raise ValueError("symbol_power must be positive")
    return symbol_power * 10.0 ** (-ebno_db / 10.0)


def generate_noise(count: int, variance: float, rng: SeededRng) -> np.ndarray:
    """Zero-mean white Gaussian noise.

    Uses numpy's ziggurat normal sampler; only moments are meant to be
    portable, not bit patterns.
    """
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if count < 0:
        raise ValueError("count must be non-negative")
    z = rng.generator.standard_normal(count)
    if variance == 0:
        return np.zeros(count)
    return np.sqrt(variance) * z
