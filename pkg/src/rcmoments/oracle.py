"""Brute-force numerical values of Gaussian graph integrals.

Test-only cross-checks for :mod:`rcmoments.gaussian`: nothing here uses the
Laplacian algebra. Integrals are of ``exp(-beta * sum_edges |z_a - z_b|^2)``
over the free nodes, with the source at the origin and the sink at distance
``sqrt(s)`` along the first axis (no intensity factor).
"""

from __future__ import annotations

import ctypes
import math

import numpy as np
from scipy import LowLevelCallable, integrate

from .gaussian import SOURCE, HopGraph
from .simulate import truncation_margin

MAX_QUAD_FREE = 3
MAX_MC_FREE = 6


def _energy_terms(g: HopGraph):
    return sorted(g.edges)


def _compiled_integrand():
    """C-callable integrand for nquad; ``None`` when numba is unavailable.

    user_data layout (float64): beta, sqrt(s), p, #edges, a0, b0, a1, b1, ...
    """
    try:
        from numba import carray, cfunc, types
    except ImportError:
        return None

    @cfunc(types.double(types.intc, types.CPointer(types.double), types.voidptr))
    def integrand(n, xx, user):
        hdr = carray(user, 4, dtype=np.float64)
        beta, y, p, ne = hdr[0], hdr[1], int(hdr[2]), int(hdr[3])
        data = carray(user, 4 + 2 * ne, dtype=np.float64)
        e = 0.0
        for i in range(ne):
            a = int(data[4 + 2 * i])
            b = int(data[5 + 2 * i])
            za = 0.0 if a == 0 else (y if a == p + 1 else xx[a - 1])
            zb = 0.0 if b == 0 else (y if b == p + 1 else xx[b - 1])
            e += (za - zb) * (za - zb)
        return math.exp(-beta * e)

    return integrand


_INTEGRAND = None
_INTEGRAND_READY = False


def _integrand_for(g: HopGraph, beta: float, y: float, edges):
    global _INTEGRAND, _INTEGRAND_READY
    if not _INTEGRAND_READY:
        _INTEGRAND = _compiled_integrand()
        _INTEGRAND_READY = True
    if _INTEGRAND is None:
        def f(*z):
            pos = (0.0,) + z + (y,)
            return math.exp(-beta * sum((pos[a] - pos[b]) ** 2 for a, b in edges))
        return f, None
    buf = np.array([beta, y, g.num_free, len(edges)] + [v for e in edges for v in e],
                   dtype=np.float64)
    llc = LowLevelCallable(_INTEGRAND.ctypes, ctypes.cast(buf.ctypes.data, ctypes.c_void_p))
    return llc, buf


def quadrature_graph_integral(g: HopGraph, beta: float, s: float,
                              epsrel: float = 1e-10) -> float:
    """Nested adaptive quadrature of the 1-D integral (``p <= 3``)."""
    p = g.num_free
    if p > MAX_QUAD_FREE:
        raise ValueError(f"quadrature oracle supports at most {MAX_QUAD_FREE} free nodes")
    y = math.sqrt(s)
    edges = _energy_terms(g)

    if p == 0:
        return math.exp(-beta * len(edges) * s)
    # Every free node is within p hops of a terminal, so its marginal decays at
    # least like exp(-beta z^2 / p) away from [0, sqrt(s)].
    L = truncation_margin(beta / p, 1, 1e-12)
    lo, hi = -L, y + L
    func, keepalive = _integrand_for(g, beta, y, edges)
    val, _ = integrate.nquad(
        func, [(lo, hi)] * p,
        opts={"epsrel": epsrel, "epsabs": 0.0, "limit": 200},
    )
    del keepalive
    return val


def mc_graph_integral(g: HopGraph, beta: float, s: float, samples: int = 100_000,
                      seed: int = 0, d: int = 1, chunk: int = 100_000) -> tuple[float, float]:
    """Importance-sampled Monte Carlo estimate and standard error (``p <= 6``).

    Proposal: independent Gaussians centred on the midpoint of the terminal
    segment, scale ``1/sqrt(2 beta)`` widened when the integrand is flatter
    than that along some direction (which would make the weights' variance
    infinite).
    """
    p = g.num_free
    if p > MAX_MC_FREE:
        raise ValueError(f"Monte Carlo oracle supports at most {MAX_MC_FREE} free nodes")
    y = np.zeros(d)
    y[0] = math.sqrt(s)
    x = np.zeros(d)
    edges = _energy_terms(g)
    if p == 0:
        e = sum(float(np.sum((x - y) ** 2)) for _ in edges)
        return math.exp(-beta * e), 0.0

    # Curvature of the energy along its flattest direction.
    curv = np.zeros((p, p))
    for a, b in edges:
        for u in (a, b):
            if 1 <= u <= p:
                curv[u - 1, u - 1] += 1
        if 1 <= a <= p and 1 <= b <= p:
            curv[a - 1, b - 1] -= 1
            curv[b - 1, a - 1] -= 1
    flattest = float(np.linalg.eigvalsh(curv)[0])
    precision = 2 * beta * min(1.0, flattest)
    sigma = 1.0 / math.sqrt(precision)
    center = (x + y) / 2

    sink = g.sink
    total = 0.0
    total_sq = 0.0
    drawn = 0
    block = 0
    while drawn < samples:
        size = min(chunk, samples - drawn)
        rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
        z = center + sigma * rng.standard_normal((size, p, d))
        pos = {SOURCE: np.broadcast_to(x, (size, d)), sink: np.broadcast_to(y, (size, d))}
        for v in range(1, p + 1):
            pos[v] = z[:, v - 1, :]
        energy = np.zeros(size)
        for a, b in edges:
            energy += np.sum((pos[a] - pos[b]) ** 2, axis=1)
        log_q = (-0.5 * np.sum((z - center) ** 2, axis=(1, 2)) / sigma**2
                 - p * d * math.log(sigma * math.sqrt(2 * math.pi)))
        w = np.exp(-beta * energy - log_q)
        total += float(w.sum())
        total_sq += float((w * w).sum())
        drawn += size
        block += 1
    mean = total / drawn
    var = max(total_sq / drawn - mean * mean, 0.0) * drawn / max(drawn - 1, 1)
    return mean, math.sqrt(var / drawn)
