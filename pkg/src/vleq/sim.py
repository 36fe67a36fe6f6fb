"""Experiment orchestration: configuration, ensemble runs, metrics and output."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import kernels
from .channels import (
    FadedProfileChannel,
    MarkovChannel,
    ScenarioScript,
    ScenarioSegment,
    StaticChannel,
    load_profile,
    normalize_power,
)
from .signals import SeededRng, generate_noise, generate_symbols
from .wiener import build_dfe_correlations, build_le_correlations, wiener_solve

log = logging.getLogger(__name__)

EQUALIZERS = ("le", "vl_le", "dfe", "vl_dfe")

# per-iteration filter cost (products, additions) as a function of M
FILTER_COST = {
    "lms": (lambda m: 2 * m, lambda m: 2 * m),
    "nlms": (lambda m: 3 * m, lambda m: 3 * m),
    "vslms": (lambda m: 2 * m + 3, lambda m: 2 * m + 1),
    "rls": (lambda m: 2 * m * m, lambda m: 2 * m * m),
}

# per-iteration length-controller overhead (products, additions)
CONTROLLER_COST = {
    "le": (0, 0),
    "dfe": (0, 0),
    "vl_le_basic": (4, 4),
    "vl_le": (6, 4),
    "vl_dfe": (2, 3),
}

CSV_COLUMNS = ("sample", "windowed_mse_db", "length", "cum_products", "cum_additions")


def _default_scenario() -> list[dict]:
    return [{"duration": 20000, "ebno_db": 15.0, "channel": {"kind": "static", "profile": "model2"}}]


@dataclass
class SimulationConfig:
    """Everything needed to reproduce one experiment.

    ``scenario`` is a list of segments ``{"duration", "ebno_db", "channel"}``
    where ``channel`` is a dict with ``kind`` in ``static | markov | faded``
    (see :func:`build_channel`).  ``train_len = None`` trains continuously;
    otherwise the first ``train_len`` samples of every ``frame_len`` use the
    true symbol and the rest run decision-directed.
    """

    scenario: list = field(default_factory=_default_scenario)
    equalizer: str = "le"
    delay: int = 5
    # fixed LE
    le_taps: int = 11
    # variable-length LE
    seg_len: int = 3
    max_segs: int = 10
    init_segs: int = 3
    alpha_up: float = 0.8
    alpha_dw: float = 0.99
    beta: float = 0.999
    t_hold: int = 1000
    n_tau: float = 0.0
    # DFE
    n_ff: int = 6
    nb: int = 2
    nb_min: int = 2
    nb_max: int = 25
    chi: float = 0.001
    fbf_window: int = 150
    probe: int = 0
    # adaptive algorithm
    algorithm: str = "lms"
    mu: float = 0.01
    nlms_reg: float = 1e-6
    vs_a: float = 0.99
    vs_rho: float = 1e-4
    vs_mu0: float | None = None
    vs_mu_min: float = 1e-6
    power_beta: float = 0.99
    lam: float = 1.0
    delta: float = 0.01
    # schedule and ensemble
    train_len: int | None = None
    frame_len: int = 2000
    ensemble: int = 1
    seed: int = 0
    workers: int = 1
    # metrics
    mse_window: int = 2000
    ber_warmup: int = 0
    steady_fraction: float = 0.2
    mmse_decimation: int = 0
    csv_stride: int = 1

    @property
    def n_samples(self) -> int:
        return int(sum(int(s["duration"]) for s in self.scenario))

    @property
    def controller(self) -> str:
        if self.equalizer == "vl_le" and self.beta == 1.0:
            return "vl_le_basic"
        return self.equalizer

    def initial_taps(self) -> int:
        if self.equalizer == "le":
            return self.le_taps
        if self.equalizer == "vl_le":
            return self.init_segs * self.seg_len
        return self.n_ff + self.nb

    def validate(self) -> None:
        if self.equalizer not in EQUALIZERS:
            raise ValueError(f"equalizer must be one of {EQUALIZERS}")
        if self.algorithm not in kernels.ALGORITHMS:
            raise ValueError(f"algorithm must be one of {sorted(kernels.ALGORITHMS)}")
        if not self.scenario:
            raise ValueError("scenario is empty")
        if self.n_samples <= 0:
            raise ValueError("run length must be positive")
        if self.ensemble < 1:
            raise ValueError("ensemble must be at least 1")
        if self.train_len is not None and not 0 <= self.train_len <= self.frame_len:
            raise ValueError("need 0 <= train_len <= frame_len")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if not 0 < self.lam <= 1:
            raise ValueError("lam must lie in (0, 1]")
        if self.equalizer == "le" and self.le_taps < 1:
            raise ValueError("le_taps must be positive")
        if self.equalizer == "vl_le":
            if not 1 <= self.init_segs <= self.max_segs:
                raise ValueError("init_segs must lie in [1, max_segs]")
            if self.init_segs * self.seg_len < self.delay + 1:
                raise ValueError("initial VL LE must be longer than the decision delay")
            if self.alpha_up > self.alpha_dw:
                raise ValueError("alpha_up must not exceed alpha_dw")
        if self.equalizer in ("dfe", "vl_dfe"):
            if self.n_ff < 1:
                raise ValueError("n_ff must be positive")
            lo = self.nb_min if self.equalizer == "vl_dfe" else 0
            hi = self.nb_max if self.equalizer == "vl_dfe" else self.nb
            if not lo <= self.nb <= hi:
                raise ValueError("initial nb outside [nb_min, nb_max]")
        if not 0 < self.steady_fraction <= 1:
            raise ValueError("steady_fraction must lie in (0, 1]")
        if self.mse_window < 1 or self.csv_stride < 1:
            raise ValueError("mse_window and csv_stride must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def build_channel(spec: dict, rng: SeededRng):
    """Provider from a channel spec dict.

    Keys: ``kind`` (static | markov | faded), and either ``profile`` (a named
    entry, optionally from ``profile_file``) or explicit ``taps`` /
    ``mean_powers``.  Markov: ``sigma_q2``, ``renormalize``.  Faded: ``fd``,
    ``fs``, ``n_sines``, ``signed``.
    """
    kind = spec.get("kind", "static")
    prof = None
    if "profile" in spec:
        prof = load_profile(spec["profile"], spec.get("profile_file"))
    elif "taps" in spec:
        prof = normalize_power(spec["taps"], spec.get("label", "custom"))
    if kind == "static":
        return StaticChannel(_need(prof))
    if kind == "markov":
        return MarkovChannel(_need(prof), float(spec.get("sigma_q2", 0.0)),
                             bool(spec.get("renormalize", True)), rng)
    if kind == "faded":
        powers = spec.get("mean_powers")
        if powers is None:
            prof = _need(prof)
            powers = prof.mean_powers if prof.mean_powers is not None else prof.taps ** 2
        fd = spec.get("fd", prof.doppler if prof is not None and prof.doppler else 0.0)
        return FadedProfileChannel(powers, float(fd), float(spec.get("fs", 3.84e6)), rng,
                                   int(spec.get("n_sines", 8)), bool(spec.get("signed", True)))
    raise ValueError(f"unknown channel kind {kind!r}")


def _need(prof):
    if prof is None:
        raise ValueError("channel spec needs 'profile' or 'taps'")
    return prof


def build_scenario(cfg: SimulationConfig, rng: SeededRng) -> ScenarioScript:
    segs = []
    for k, seg in enumerate(cfg.scenario):
        provider = build_channel(seg["channel"], rng.child(100 + k))
        segs.append(ScenarioSegment(int(seg["duration"]), provider, float(seg["ebno_db"])))
    return ScenarioScript(segs)


def training_mask(n_samples: int, train_len: int | None, frame_len: int) -> np.ndarray:
    if train_len is None:
        return np.ones(n_samples, dtype=np.bool_)
    return (np.arange(n_samples) % frame_len) < train_len


@dataclass
class RunResult:
    """One ensemble member."""

    e2: np.ndarray
    decisions: np.ndarray
    truth: np.ndarray
    length: np.ndarray
    steps: np.ndarray
    n_changes: int
    n_restarts: int
    diverged_at: int
    mmse: np.ndarray | None = None


def simulate_run(cfg: SimulationConfig, stream: int) -> RunResult:
    """Generate one realisation and run the equalizer over it."""
    rng = SeededRng(cfg.seed, stream)
    script = build_scenario(cfg, rng)
    taps, noise_var = script.render()
    t = taps.shape[0]
    lead = max(cfg.delay, taps.shape[1] - 1)
    symbols = generate_symbols(t + lead, rng.child(1))
    noise = generate_noise(t, 1.0, rng.child(2)) * np.sqrt(noise_var)
    r = np.empty(t)
    kernels.received_signal(taps, symbols, lead, noise, r)
    truth = symbols[lead - cfg.delay: lead - cfg.delay + t].copy()
    train = training_mask(t, cfg.train_len, cfg.frame_len)

    e2 = np.empty(t)
    dec = np.empty(t)
    length = np.empty(t, dtype=np.int64)
    steps = np.empty(t)
    alg = kernels.ALGORITHMS[cfg.algorithm]
    m0 = cfg.initial_taps()
    vs_mu0 = cfg.vs_mu0 if cfg.vs_mu0 is not None else 0.5 * 2.0 / (3.0 * m0)
    common = (alg, cfg.mu, cfg.nlms_reg, cfg.vs_a, cfg.vs_rho, vs_mu0, cfg.vs_mu_min,
              cfg.power_beta, cfg.lam, cfg.delta, e2, dec, length, steps)
    if cfg.equalizer in ("le", "vl_le"):
        if cfg.equalizer == "le":
            seg_len, max_segs, segs0, variable = cfg.le_taps, 1, 1, False
        else:
            seg_len, max_segs, segs0, variable = cfg.seg_len, cfg.max_segs, cfg.init_segs, True
        out = kernels.le_run(r, truth, train, cfg.delay, seg_len, max_segs, segs0, variable,
                             cfg.alpha_up, cfg.alpha_dw, cfg.beta, cfg.t_hold, cfg.n_tau,
                             *common)
    else:
        variable = cfg.equalizer == "vl_dfe"
        nb_max = cfg.nb_max if variable else cfg.nb
        nb_min = cfg.nb_min if variable else cfg.nb
        out = kernels.dfe_run(r, truth, train, cfg.n_ff, cfg.nb, nb_min, nb_max, variable,
                              cfg.chi, cfg.fbf_window, cfg.probe, *common)
        length = length + cfg.n_ff
    n_changes, n_restarts, diverged_at = (int(v) for v in out)
    if n_restarts and cfg.algorithm == "rls":
        log.info("stream %d: RLS restarted %d time(s)", stream, n_restarts)
    if diverged_at >= 0:
        log.warning("stream %d: %s diverged at sample %d", stream, cfg.algorithm, diverged_at)
    mmse = None
    if cfg.mmse_decimation > 0 and cfg.equalizer in ("le", "dfe"):
        mmse = _mmse_trace(cfg, taps, noise_var)
    return RunResult(e2, dec, truth, length, steps, n_changes, n_restarts, diverged_at, mmse)


def _mmse_trace(cfg: SimulationConfig, taps: np.ndarray, noise_var: np.ndarray) -> np.ndarray:
    t = taps.shape[0]
    out = np.empty(t)
    for a in range(0, t, cfg.mmse_decimation):
        if cfg.equalizer == "le":
            sys = build_le_correlations(taps[a], noise_var[a], cfg.le_taps, cfg.delay)
        else:
            sys = build_dfe_correlations(taps[a], noise_var[a], cfg.n_ff, cfg.nb, cfg.delay)
        out[a:a + cfg.mmse_decimation] = wiener_solve(sys)[1]
    return out


def windowed_mse(errors: np.ndarray, window: int = 2000) -> np.ndarray:
    """Trailing-window mean of squared errors in dB.

    Element ``k`` covers samples ``k .. k + window - 1``; the series starts
    once a full window is available.
    """
    e2 = np.asarray(errors, dtype=float)
    if window < 1:
        raise ValueError("window must be positive")
    if e2.size < window:
        return np.zeros(0)
    c = np.concatenate([[0.0], np.cumsum(e2)])
    mean = (c[window:] - c[:-window]) / window
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.maximum(mean, 0.0))


def steady_mse(e2: np.ndarray, fraction: float = 0.2) -> float:
    """Mean squared error over the final ``fraction`` of the run (linear)."""
    e2 = np.asarray(e2, dtype=float)
    k = max(1, int(round(fraction * e2.size)))
    return float(np.mean(e2[-k:]))


def to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def ber(decisions: np.ndarray, truth: np.ndarray, warm_up: int = 0) -> tuple[int, int, float]:
    """(bit errors, bits counted, error rate) after skipping ``warm_up``."""
    d = np.asarray(decisions)[warm_up:]
    s = np.asarray(truth)[warm_up:]
    if d.size == 0:
        raise ValueError("no bits counted")
    errors = int(np.count_nonzero(d != s))
    return errors, int(d.size), errors / d.size


def count_operations(algorithm: str, topology: str, lengths: Sequence[int] | np.ndarray,
                     cumulative: bool = False):
    """Products and additions for a trace of active filter lengths M(n).

    ``topology`` picks the per-iteration controller overhead (see
    ``CONTROLLER_COST``).  Returns integer totals, or cumulative arrays.
    """
    if algorithm not in FILTER_COST:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if topology not in CONTROLLER_COST:
        raise ValueError(f"unknown topology {topology!r}")
    m = np.asarray(lengths, dtype=np.int64)
    prod_fn, add_fn = FILTER_COST[algorithm]
    over_p, over_a = CONTROLLER_COST[topology]
    prods = prod_fn(m) + over_p
    adds = add_fn(m) + over_a
    if cumulative:
        return np.cumsum(prods), np.cumsum(adds)
    return int(prods.sum()), int(adds.sum())


def average_length_from_products(products: int, iterations: int, overhead: int = 0) -> float:
    """Invert the LMS product count: (products - overhead*T) / (2T)."""
    if iterations <= 0:
        raise ValueError("iterations must be positive")
    return (products - overhead * iterations) / (2.0 * iterations)


@dataclass
class MetricsRecord:
    """Ensemble-averaged metrics of one experiment."""

    config: SimulationConfig
    mse: np.ndarray                  # mean e^2 per sample
    length: np.ndarray               # mean active taps per sample
    cum_products: np.ndarray         # summed over the ensemble
    cum_additions: np.ndarray
    bit_errors: int
    bits: int
    runs: list = field(default_factory=list)
    mmse: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return int(self.mse.size)

    @property
    def steady_mse(self) -> float:
        return steady_mse(self.mse, self.config.steady_fraction)

    @property
    def steady_mse_db(self) -> float:
        return to_db(self.steady_mse)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    def steady_length(self) -> float:
        k = max(1, int(round(self.config.steady_fraction * self.length.size)))
        return float(np.mean(self.length[-k:]))

    def windowed_mse_db(self) -> np.ndarray:
        return windowed_mse(self.mse, self.config.mse_window)

    def summary(self) -> dict:
        return {
            "samples": self.n_samples,
            "ensemble": self.config.ensemble,
            "seed": self.config.seed,
            "steady_mse": self.steady_mse,
            "steady_mse_db": self.steady_mse_db,
            "ber": self.ber,
            "bit_errors": self.bit_errors,
            "bits": self.bits,
            "average_length": float(np.mean(self.length)),
            "steady_length": self.steady_length(),
            "total_products": int(self.cum_products[-1]) if self.cum_products.size else 0,
            "total_additions": int(self.cum_additions[-1]) if self.cum_additions.size else 0,
            "length_changes": [r["n_changes"] for r in self.runs],
            "rls_restarts": [r["n_restarts"] for r in self.runs],
            "diverged_at": [r["diverged_at"] for r in self.runs],
        }


def run_experiment(cfg: SimulationConfig) -> MetricsRecord:
    """Run ``cfg.ensemble`` independent realisations and average them.

    Run ``k`` uses random stream ``k`` of ``cfg.seed``; results are reduced
    in stream order, so the output does not depend on ``cfg.workers``.
    """
    cfg.validate()
    t = cfg.n_samples
    streams = range(cfg.ensemble)
    if cfg.workers > 1 and cfg.ensemble > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results: Iterable[RunResult] = list(pool.map(lambda k: simulate_run(cfg, k), streams))
    else:
        results = (simulate_run(cfg, k) for k in streams)

    mse = np.zeros(t)
    length = np.zeros(t)
    cum_p = np.zeros(t, dtype=np.int64)
    cum_a = np.zeros(t, dtype=np.int64)
    mmse = np.zeros(t) if cfg.mmse_decimation > 0 and cfg.equalizer in ("le", "dfe") else None
    errors = bits = 0
    runs = []
    for res in results:
        mse += res.e2
        length += res.length
        p, a = count_operations(cfg.algorithm, cfg.controller, res.length, cumulative=True)
        cum_p += p
        cum_a += a
        if mmse is not None:
            mmse += res.mmse
        if cfg.ber_warmup < t:
            e, b, _ = ber(res.decisions, res.truth, cfg.ber_warmup)
            errors += e
            bits += b
        runs.append({
            "steady_mse": steady_mse(res.e2, cfg.steady_fraction),
            "n_changes": res.n_changes,
            "n_restarts": res.n_restarts,
            "diverged_at": res.diverged_at,
        })
    n = cfg.ensemble
    return MetricsRecord(cfg, mse / n, length / n, cum_p, cum_a, errors, bits, runs,
                         None if mmse is None else mmse / n)


def sweep_fixed_lengths(cfg: SimulationConfig, lengths: Iterable[int]) -> list[tuple[int, float]]:
    """Steady MSE (dB) of fixed-length equalizers.

    LE-type configs sweep the LE length; DFE-type configs sweep ``nb``.
    """
    rows = []
    for m in lengths:
        if cfg.equalizer in ("le", "vl_le"):
            sub = replace(cfg, equalizer="le", le_taps=int(m))
        else:
            sub = replace(cfg, equalizer="dfe", nb=int(m))
        rows.append((int(m), run_experiment(sub).steady_mse_db))
    return rows


def metrics_csv(rec: MetricsRecord) -> str:
    """CSV text: one row per sample once the MSE window is full."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    wmse = rec.windowed_mse_db()
    start = rec.config.mse_window - 1
    for k in range(0, wmse.size, rec.config.csv_stride):
        n = start + k
        writer.writerow((n, f"{wmse[k]:.6f}", f"{rec.length[n]:.4f}",
                         int(rec.cum_products[n]), int(rec.cum_additions[n])))
    return buf.getvalue()


def write_outputs(rec: MetricsRecord, out: str | Path) -> tuple[Path, Path]:
    """Write ``<out>.csv`` and ``<out>.json``; returns both paths."""
    base = Path(out)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    csv_path.write_text(metrics_csv(rec))
    json_path.write_text(json.dumps(_jsonable(rec.summary()), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj
