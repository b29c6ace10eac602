"""Quick invariant suite behind ``rcmoments selftest``."""

from __future__ import annotations

import json
import math
import sys
import time
from fractions import Fraction
from itertools import combinations

from . import _backend
from .gaussian import (HopGraph, ModelParams, chain_kernel, eliminate_by_merges,
                       effective_conductance_ratio, hop_graph_of_partition,
                       integrate_gaussian_graph)
from .moments import MomentQuery, khop_mean, khop_moment, khop_variance, twohop_moment_stirling
from .partitions import enumerate_nonflat, is_nonflat, nonflat_count, validate_partition


def _set_partitions(size):
    def rec(pos, labels, nb):
        if pos == size:
            yield tuple(labels)
            return
        for b in range(nb + 1):
            labels.append(b)
            yield from rec(pos + 1, labels, max(nb, b + 1))
            labels.pop()
    yield from rec(0, [], 0)


def check_variance3():
    got = [(t.coeff, *t.key) for t in khop_variance(3)]
    want = sorted([(Fraction(2), 3, 8, Fraction(1, 2)), (Fraction(1), 2, 3, Fraction(1, 3)),
                   (Fraction(2), 3, 12, Fraction(3, 4)), (Fraction(1), 2, 8, Fraction(1))],
                  key=lambda t: t[1:])
    return got == want


def check_means():
    return all(khop_mean(k).terms == (chain_kernel(k),) and chain_kernel(k).key == (k - 1, k, Fraction(1, k))
               for k in range(2, 7))


def check_stirling():
    return all(khop_moment(MomentQuery(2, n)) == twohop_moment_stirling(n) for n in range(1, 6))


def check_counts():
    for size in range(1, 9):
        for n in range(1, size + 1):
            if size % n:
                continue
            r = size // n
            brute = sum(1 for lab in _set_partitions(size) if is_nonflat(n, r, lab))
            if nonflat_count(n, r) != brute:
                return False
    return all(nonflat_count(2, r) == sum(math.comb(r, j) ** 2 * math.factorial(j)
                                          for j in range(r + 1)) for r in range(1, 7))


def check_stream_valid():
    for n, r in ((2, 3), (3, 2), (2, 4)):
        for p in enumerate_nonflat(n, r):
            validate_partition(p)
    return True


def check_elimination_routes():
    for p in enumerate_nonflat(2, 3):
        g = hop_graph_of_partition(p)
        t = integrate_gaussian_graph(g)
        det, c = eliminate_by_merges(g)
        if (det, c) != (t.det, t.c_eff) or effective_conductance_ratio(g) != t.c_eff:
            return False
    return True


def check_rayleigh():
    base = HopGraph.path(4)
    c0 = integrate_gaussian_graph(base).c_eff
    for a, b in combinations(range(5), 2):
        if (a, b) in base.edges:
            continue
        g = HopGraph(3, base.edges | {(a, b)})
        if integrate_gaussian_graph(g).c_eff < c0:
            return False
    return True


def check_variance_nonneg():
    for k in (2, 3, 4):
        v = khop_variance(k)
        for lam in (0.1, 1.0, 5.0):
            for d in (1, 2, 3):
                for dist in (0.0, 1.0, 3.0):
                    if v.evaluate(ModelParams.from_distance(lam, 1.0, d, dist)) < 0:
                        return False
    return True


CHECKS = [
    ("3-hop variance closed form", check_variance3),
    ("k-hop mean = chain kernel, k=2..6", check_means),
    ("2-hop moments = Stirling/Poisson, n=1..5", check_stirling),
    ("non-flat counts vs brute force", check_counts),
    ("enumerated partitions satisfy invariants", check_stream_valid),
    ("Laplacian solve = merge elimination = det ratio", check_elimination_routes),
    ("adding an edge never lowers c_eff", check_rayleigh),
    ("variance >= 0 on a parameter grid", check_variance_nonneg),
]


def run_selftest(fmt: str = "text", out=None) -> int:
    out = out or sys.stdout
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok = bool(fn())
            err = None
        except Exception as exc:  # report, keep going
            ok, err = False, f"{type(exc).__name__}: {exc}"
        results.append({"check": name, "passed": ok, "seconds": round(time.perf_counter() - t0, 3),
                        **({"error": err} if err else {})})
    failed = sum(not r["passed"] for r in results)
    if fmt == "json":
        out.write(json.dumps({"backend": _backend.ACTIVE.name, "results": results,
                              "failed": failed}, indent=2) + "\n")
    else:
        for r in results:
            out.write(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']}"
                      f"{'  (' + r['error'] + ')' if 'error' in r else ''}\n")
        out.write(f"{len(results) - failed}/{len(results)} checks passed "
                  f"(kernels: {_backend.ACTIVE.name})\n")
    return 1 if failed else 0
