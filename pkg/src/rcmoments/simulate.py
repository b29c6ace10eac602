"""Monte Carlo of the Poisson random-connection model.

Each run draws a Poisson configuration in a truncated window, joins every
pair (terminals included) independently with probability
``exp(-beta |x - y|^2)`` and counts k-hop source-to-sink paths through
pairwise-distinct points. Edge draws come from a counter-based hash of
``(seed, run, pair)``, so a run's graph does not depend on the order in
which pairs are examined, and runs do not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _backend, _fallback

MAX_HOPS = 5
DEFAULT_EPSILON = 1e-6
WORKERS_ENV = "RCMOMENTS_WORKERS"


def truncation_margin(beta: float, k: int = 1, epsilon: float = DEFAULT_EPSILON) -> float:
    """Margin ``m`` with ``exp(-beta m^2) = epsilon``.

    ``k`` only enters the neglected-mass diagnostic (see
    :func:`truncation_diagnostic`).
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if beta <= 0:
        raise ValueError("beta must be positive")
    return math.sqrt(math.log(1.0 / epsilon) / beta)


def truncation_diagnostic(beta: float, k: int, margin: float, lam: float, volume: float) -> float:
    """Crude neglected-path-mass indicator ``k * exp(-beta m^2) * lam * |W|``."""
    return k * math.exp(-beta * margin * margin) * lam * volume


@dataclass(frozen=True)
class SimConfig:
    lam: float = 1.0
    beta: float = 1.0
    source: tuple[float, ...] = (0.0, 0.0)
    sink: tuple[float, ...] = (1.0, 0.0)
    runs: int = 10_000
    seed: int = 42
    k_list: tuple[int, ...] = (2, 3)
    moment_orders: tuple[int, ...] = (1, 2)
    epsilon: float = DEFAULT_EPSILON
    window: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if len(self.source) != len(self.sink) or not self.source:
            raise ValueError("source and sink must have the same positive dimension")
        if self.lam < 0 or self.beta <= 0:
            raise ValueError("need lam >= 0 and beta > 0")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.k_list or any(not 1 <= k <= MAX_HOPS for k in self.k_list):
            raise ValueError(f"hop counts must lie in 1..{MAX_HOPS}")
        if not self.moment_orders or any(o < 1 for o in self.moment_orders):
            raise ValueError("moment orders must be >= 1")
        if self.window is not None:
            lo, hi = (np.asarray(w, dtype=float) for w in self.window)
            for pt in (self.source, self.sink):
                if not np.all((np.asarray(pt) > lo) & (np.asarray(pt) < hi)):
                    raise ValueError("window must contain source and sink with a positive margin")

    @property
    def d(self) -> int:
        return len(self.source)

    @property
    def dist(self) -> float:
        return math.dist(self.source, self.sink)

    @property
    def margin(self) -> float:
        return truncation_margin(self.beta, max(self.k_list), self.epsilon)

    def resolved_window(self) -> tuple[np.ndarray, np.ndarray]:
        if self.window is not None:
            return tuple(np.asarray(w, dtype=float) for w in self.window)
        pts = np.array([self.source, self.sink], dtype=float)
        m = self.margin
        return pts.min(axis=0) - m, pts.max(axis=0) + m


def sample_configuration(window: tuple[np.ndarray, np.ndarray], lam: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Poisson(lam * |W|) points, independent uniform in the box ``W``."""
    lo, hi = (np.asarray(w, dtype=float) for w in window)
    volume = float(np.prod(hi - lo))
    if volume <= 0:
        raise ValueError("window must have positive volume")
    count = rng.poisson(lam * volume) if lam > 0 else 0
    return lo + (hi - lo) * rng.random((count, len(lo)))


def sample_rcm_edges(nodes: np.ndarray, beta: float, key: int) -> np.ndarray:
    """Boolean adjacency with one Bernoulli(H_beta) draw per unordered pair."""
    return _fallback.adjacency_matrix(np.asarray(nodes, dtype=float), beta, key)


def count_khop_paths(adjacency: np.ndarray, k: int) -> int:
    """Number of k-hop paths between the last two nodes (source, sink) of ``adjacency``."""
    if not 1 <= k <= MAX_HOPS:
        raise ValueError(f"path counting is limited to 1 <= k <= {MAX_HOPS}")
    return int(_fallback.count_paths_adjacency(np.asarray(adjacency, dtype=bool), k)[k])


def run_rng(seed: int, run: int) -> np.random.Generator:
    """Point-sampling stream for one run (Philox keyed by ``(seed, run)``)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run])))


def _simulate_block(args) -> np.ndarray:
    cfg, start, stop, backend = args
    kern = _backend.get(backend)
    window = cfg.resolved_window()
    source = np.asarray(cfg.source, dtype=float)
    sink = np.asarray(cfg.sink, dtype=float)
    kmax = max(cfg.k_list)
    out = np.empty((stop - start, kmax + 1), dtype=np.int64)
    for i, run in enumerate(range(start, stop)):
        pts = sample_configuration(window, cfg.lam, run_rng(cfg.seed, run))
        out[i] = kern.count_paths(pts, source, sink, cfg.beta, _backend.run_key(cfg.seed, run), kmax)
    return out


def simulate_counts(cfg: SimConfig, workers: int | None = None,
                    backend: str | None = None) -> np.ndarray:
    """``(runs, kmax + 1)`` array of per-run path counts, ordered by run index."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    backend = backend or _backend.ACTIVE.name
    workers = max(1, min(workers, cfg.runs))
    if workers == 1:
        return _simulate_block((cfg, 0, cfg.runs, backend))
    edges = np.linspace(0, cfg.runs, 4 * workers + 1).astype(int)
    jobs = [(cfg, a, b, backend) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(_simulate_block, jobs)))


@dataclass(frozen=True)
class MomentEstimate:
    k: int
    order: int
    estimate: float
    stderr: float | None
    runs: int


@dataclass
class SimResult:
    config: SimConfig
    moments: list[MomentEstimate]
    variances: dict[int, tuple[float, float | None]]
    histograms: dict[int, dict[int, int]]
    margin: float
    window: tuple[tuple[float, ...], tuple[float, ...]]
    truncation: float
    counts: np.ndarray = field(repr=False, default=None)

    def moment(self, k: int, order: int) -> MomentEstimate:
        for m in self.moments:
            if m.k == k and m.order == order:
                return m
        raise KeyError((k, order))

    def to_json(self) -> dict:
        return {
            "seed": self.config.seed,
            "runs": self.config.runs,
            "margin": self.margin,
            "window": [list(self.window[0]), list(self.window[1])],
            "truncation_diagnostic": self.truncation,
            "moments": [
                {"k": m.k, "order": m.order, "estimate": m.estimate,
                 "stderr": m.stderr, "runs": m.runs}
                for m in self.moments
            ],
            "variances": [
                {"k": k, "estimate": v, "stderr": se} for k, (v, se) in sorted(self.variances.items())
            ],
            "histograms": {str(k): {str(c): n for c, n in sorted(h.items())}
                           for k, h in sorted(self.histograms.items())},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "order", "estimate", "stderr", "runs", "seed", "margin"])
        for m in self.moments:
            w.writerow([m.k, m.order, repr(m.estimate), "" if m.stderr is None else repr(m.stderr),
                        m.runs, self.config.seed, repr(self.margin)])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


def _num_batches(runs: int) -> int:
    return min(100, runs // 2)


def batch_mean_stderr(values: np.ndarray) -> float | None:
    """Standard error of the mean from contiguous batch means."""
    b = _num_batches(len(values))
    if b < 2:
        return None
    means = np.array([c.mean() for c in np.array_split(values, b)])
    return float(means.std(ddof=1) / math.sqrt(b))


def batch_variance_stderr(values: np.ndarray) -> float | None:
    """Standard error of the sample variance from per-batch variances."""
    b = _num_batches(len(values))
    if b < 2:
        return None
    var = np.array([c.var(ddof=1) for c in np.array_split(values, b)])
    return float(var.std(ddof=1) / math.sqrt(b))


def summarize(cfg: SimConfig, counts: np.ndarray) -> SimResult:
    lo, hi = cfg.resolved_window()
    margin = cfg.margin
    volume = float(np.prod(hi - lo))
    moments = []
    variances = {}
    histograms = {}
    for k in cfg.k_list:
        col = counts[:, k].astype(np.float64)
        for order in cfg.moment_orders:
            powered = col ** order
            moments.append(MomentEstimate(k, order, float(powered.mean()),
                                          batch_mean_stderr(powered), len(col)))
        var = float(col.var(ddof=1)) if len(col) > 1 else 0.0
        variances[k] = (var, batch_variance_stderr(col))
        values, freq = np.unique(counts[:, k], return_counts=True)
        histograms[k] = {int(v): int(f) for v, f in zip(values, freq)}
    return SimResult(
        config=cfg,
        moments=moments,
        variances=variances,
        histograms=histograms,
        margin=margin,
        window=(tuple(float(x) for x in lo), tuple(float(x) for x in hi)),
        truncation=truncation_diagnostic(cfg.beta, max(cfg.k_list), margin, cfg.lam, volume),
        counts=counts,
    )


def run_simulation(cfg: SimConfig, workers: int | None = None,
                   backend: str | None = None) -> SimResult:
    """Simulate ``cfg.runs`` independent configurations and estimate moments."""
    return summarize(cfg, simulate_counts(cfg, workers, backend))


def poisson_gof(sample: np.ndarray, mean: float, min_expected: float = 5.0):
    """Chi-square goodness of fit of integer ``sample`` against Poisson(``mean``).

    Cells are ``0, 1, ...`` with the upper tail pooled until every expected
    count is at least ``min_expected``. Returns ``(statistic, dof, p_value)``.
    """
    sample = np.asarray(sample)
    size = len(sample)
    top = 0
    while size * stats.poisson.sf(top, mean) >= min_expected:
        top += 1
    # cells 0..top-1 individually, then [top, inf)
    observed = [np.count_nonzero(sample == c) for c in range(top)]
    observed.append(np.count_nonzero(sample >= top))
    expected = [size * stats.poisson.pmf(c, mean) for c in range(top)]
    expected.append(size * stats.poisson.sf(top - 1, mean))
    observed = np.array(observed, dtype=float)
    expected = np.array(expected)
    # pool leading cells with small expectation into their neighbour
    while len(expected) > 2 and expected[0] < min_expected:
        expected[1] += expected[0]
        observed[1] += observed[0]
        expected, observed = expected[1:], observed[1:]
    res = stats.chisquare(observed, expected)
    return float(res.statistic), len(expected) - 1, float(res.pvalue)
