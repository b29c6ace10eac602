"""Exact moments of k-hop path counts in the Poisson random-connection model.

The n-th moment of the k-hop count is a sum over the non-flat partitions of
the ``n x (k-1)`` grid; each partition contributes the Gaussian integral of
its hop graph with coefficient one.
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

from .gaussian import (ClosedForm, ClosedFormTerm, ModelParams, chain_kernel, hop_key,
                       integrate_key)
from .partitions import DEFAULT_LIMIT, iter_nonflat_labels, split_prefixes, stirling2

WORKERS_ENV = "RCMOMENTS_WORKERS"


@dataclass(frozen=True)
class MomentQuery:
    k: int
    n: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"hop count k must be >= 1, got {self.k}")
        if self.n < 1:
            raise ValueError(f"moment order n must be >= 1, got {self.n}")

    @property
    def r(self) -> int:
        return self.k - 1


def _one_hop() -> ClosedForm:
    # 1{x<->y}^n = 1{x<->y}: every moment is H_beta(x, y).
    return ClosedForm.of([ClosedFormTerm(Fraction(1), 0, 1, Fraction(1))])


def khop_mean(k: int) -> ClosedForm:
    """First moment of the k-hop count: the k-fold chain kernel."""
    if k < 1:
        raise ValueError(f"hop count k must be >= 1, got {k}")
    return ClosedForm.of([chain_kernel(k)])


def khop_moment_terms(k: int, n: int, limit: int = DEFAULT_LIMIT,
                      prefix: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], ClosedFormTerm]]:
    """Raw per-partition contributions ``(0-based labels, term)`` of the n-th moment."""
    q = MomentQuery(k, n)
    if q.r == 0:
        yield (), _one_hop().terms[0]
        return
    for labels in iter_nonflat_labels(n, q.r, limit, prefix):
        yield labels, integrate_key(*hop_key(n, q.r, labels))


def _fold(args) -> dict:
    k, n, limit, prefix = args
    acc: Counter = Counter()
    for _, t in khop_moment_terms(k, n, limit, prefix):
        acc[t.key] += 1
    return acc


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


@lru_cache(maxsize=None)
def _khop_moment(k: int, n: int, limit: int, workers: int) -> ClosedForm:
    q = MomentQuery(k, n)
    if q.r == 0:
        return _one_hop()
    if workers == 1:
        acc = _fold((k, n, limit, ()))
    else:
        # Disjoint slices of the stream, keyed by the labels of the first two
        # rows; integer counts make the merge order irrelevant.
        iter_nonflat_labels(n, q.r, limit)  # limit check before forking
        prefixes = split_prefixes(n, q.r, min(n, 2) * q.r)
        acc = Counter()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_fold, [(k, n, limit, p) for p in prefixes]):
                acc.update(part)
    return ClosedForm.of(ClosedFormTerm(Fraction(c), *key) for key, c in acc.items())


def khop_moment(q: MomentQuery | tuple[int, int], limit: int = DEFAULT_LIMIT,
                workers: int | None = None) -> ClosedForm:
    """n-th moment of the k-hop count as a canonical ClosedForm (memoized)."""
    if not isinstance(q, MomentQuery):
        q = MomentQuery(*q)
    return _khop_moment(q.k, q.n, limit, _worker_count(workers))


def twohop_moment_stirling(n: int) -> ClosedForm:
    """Poisson moment of the 2-hop count: sum_j S(n, j) * (H2)^j."""
    if n < 1:
        raise ValueError(f"moment order n must be >= 1, got {n}")
    h2 = khop_mean(2)
    out = ClosedForm()
    power = ClosedForm.of([ClosedFormTerm(Fraction(1), 0, 1, Fraction(0))])
    for j in range(1, n + 1):
        power = power * h2
        out = out + power.scale(stirling2(n, j))
    return out


def khop_variance(k: int, limit: int = DEFAULT_LIMIT, workers: int | None = None) -> ClosedForm:
    """Second moment minus squared mean, cancelled symbolically."""
    mean = khop_mean(k)
    return khop_moment(MomentQuery(k, 2), limit, workers) - mean * mean


def variance_raw_term_count(k: int, limit: int = DEFAULT_LIMIT) -> int:
    """Number of partition terms left in the variance after the squared mean cancels."""
    q = MomentQuery(k, 2)
    if q.r == 0:
        return 1
    from .partitions import nonflat_count
    return nonflat_count(2, q.r, limit) - 1


@dataclass(frozen=True)
class Evaluation:
    value: float
    form: ClosedForm
    contributions: tuple[tuple[ClosedFormTerm, float], ...]


def evaluate_form(form: ClosedForm, params: ModelParams) -> Evaluation:
    contribs = tuple((t, t.value(params)) for t in form.terms)
    return Evaluation(form.evaluate(params), form, contribs)


def evaluate_query(q: MomentQuery, params: ModelParams, limit: int = DEFAULT_LIMIT) -> Evaluation:
    """Numeric value of the n-th moment with its per-term breakdown."""
    return evaluate_form(khop_moment(q, limit), params)
