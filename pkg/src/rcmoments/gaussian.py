"""Exact integration of products of Gaussian connection kernels.

Every integral handled here has the form

    lambda^p * int exp(-beta * sum_{edges} |z_a - z_b|^2) dz_1 ... dz_p

over the free nodes of a unit-weight graph with two fixed terminals
(source ``x`` and sink ``y``). Completing the square gives

    lambda^p * (pi / beta)^(p d / 2) * det^(-d / 2) * exp(-beta * c_eff * s)

where ``det`` is the determinant of the graph Laplacian restricted to the
free nodes, ``c_eff`` the source-to-sink effective conductance and
``s = |x - y|^2``. Both are computed in exact rational arithmetic; floats
only appear in :func:`cf_eval`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple

from .partitions import Partition

SOURCE = 0


class DivergentIntegralError(ValueError):
    """A free node is not connected to either terminal."""


@dataclass(frozen=True)
class ModelParams:
    """Evaluation point: intensity, fading exponent, dimension, squared distance."""

    lam: float
    beta: float
    d: int
    s: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"intensity must be >= 0, got {self.lam}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not self.s >= 0:
            raise ValueError(f"squared distance must be >= 0, got {self.s}")

    @classmethod
    def from_distance(cls, lam: float, beta: float, d: int, dist: float) -> "ModelParams":
        return cls(lam, beta, d, float(dist) ** 2)


@dataclass(frozen=True)
class HopGraph:
    """Undirected simple graph on SOURCE (0), free nodes 1..p and SINK (p + 1)."""

    num_free: int
    edges: frozenset

    def __post_init__(self):
        p = self.num_free
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a <= p + 1 and 0 <= b <= p + 1):
                raise ValueError(f"edge ({a}, {b}) outside node range 0..{p + 1}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def sink(self) -> int:
        return self.num_free + 1

    @classmethod
    def from_edges(cls, num_free: int, edges: Iterable[tuple[int, int]]) -> "HopGraph":
        return cls(num_free, frozenset(edges))

    @classmethod
    def path(cls, hops: int) -> "HopGraph":
        """The chain SOURCE - 1 - ... - (hops-1) - SINK."""
        return cls(hops - 1, frozenset((i, i + 1) for i in range(hops)))

    def relabel(self, perm: dict[int, int]) -> "HopGraph":
        """Apply ``perm`` (a permutation of the free nodes) to the node ids."""
        f = {SOURCE: SOURCE, self.sink: self.sink, **perm}
        return HopGraph(self.num_free, frozenset((f[a], f[b]) for a, b in self.edges))

    def key(self) -> tuple:
        return self.num_free, tuple(sorted(self.edges))

    def check_integrable(self) -> None:
        """Raise :class:`DivergentIntegralError` if a free node is cut off from both terminals."""
        adj: dict[int, list[int]] = {v: [] for v in range(self.num_free + 2)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {SOURCE, self.sink}
        stack = [SOURCE, self.sink]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        missing = set(range(1, self.num_free + 1)) - seen
        if missing:
            raise DivergentIntegralError(
                f"free nodes {sorted(missing)} touch no terminal; the integral diverges"
            )


def hop_key(n: int, r: int, labels0) -> tuple[int, tuple]:
    """``(num_free, sorted edges)`` of the hop graph for 0-based labels.

    Block ``b`` becomes free node ``b + 1``.
    """
    p = max(labels0) + 1
    sink = p + 1
    edges = set()
    for row in range(n):
        prev = SOURCE
        for col in range(r):
            v = labels0[row * r + col] + 1
            edges.add((prev, v) if prev < v else (v, prev))
            prev = v
        edges.add((prev, sink))
    return p, tuple(sorted(edges))


def hop_graph_of_labels(n: int, r: int, labels0) -> HopGraph:
    p, edges = hop_key(n, r, labels0)
    return HopGraph(p, frozenset(edges))


def hop_graph_of_partition(p: Partition) -> HopGraph:
    """Deduplicated union of the ``n`` hop chains ``x - z.. - y`` of ``p``.

    A variable pair realized as a hop edge by several chains contributes a
    single kernel factor (indicator powers collapse), hence the edge set.
    """
    return hop_graph_of_labels(p.n, p.r, tuple(b - 1 for b in p.labels))


def _bareiss_det(m: list[list[int]]) -> int:
    """Determinant of an integer matrix by fraction-free elimination."""
    a = [row[:] for row in m]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _solve_fraction(m: list[list[int]], rhs: list[int]) -> list[Fraction]:
    """Solve ``m v = rhs`` exactly (m symmetric positive definite)."""
    n = len(m)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(m, rhs)]
    for k in range(n):
        piv = a[k][k]
        for i in range(k + 1, n):
            f = a[i][k] / piv
            if f:
                for j in range(k, n + 1):
                    a[i][j] -= f * a[k][j]
    v = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = a[i][n] - sum(a[i][j] * v[j] for j in range(i + 1, n))
        v[i] = acc / a[i][i]
    return v


def grounded_laplacian(g: HopGraph) -> list[list[int]]:
    """Laplacian rows/cols of the free nodes, terminals grounded."""
    p = g.num_free
    lap = [[0] * p for _ in range(p)]
    for a, b in g.edges:
        for u in (a, b):
            if 1 <= u <= p:
                lap[u - 1][u - 1] += 1
        if 1 <= a <= p and 1 <= b <= p:
            lap[a - 1][b - 1] -= 1
            lap[b - 1][a - 1] -= 1
    return lap


@lru_cache(maxsize=200_000)
def _integrate_cached(num_free: int, edges: tuple) -> tuple[int, Fraction]:
    g = HopGraph(num_free, frozenset(edges))
    g.check_integrable()
    lap = grounded_laplacian(g)
    det = _bareiss_det(lap)
    # Unit potential at the source, zero at the sink; c_eff is the current
    # leaving the source.
    inject = [0] * num_free
    direct = 0
    src_nbrs = []
    for a, b in g.edges:
        if {a, b} == {SOURCE, g.sink}:
            direct += 1
        elif SOURCE in (a, b):
            v = b if a == SOURCE else a
            inject[v - 1] += 1
            src_nbrs.append(v)
    volt = _solve_fraction(lap, inject) if num_free else []
    c_eff = Fraction(direct) + sum((1 - volt[v - 1] for v in src_nbrs), Fraction(0))
    return det, c_eff


def integrate_gaussian_graph(g: HopGraph) -> "ClosedFormTerm":
    """Closed form of ``lambda^p * int prod_{edges} H_beta`` over the free nodes."""
    return integrate_key(*g.key())


def integrate_key(num_free: int, edges: tuple) -> "ClosedFormTerm":
    """As :func:`integrate_gaussian_graph`, from a :func:`hop_key` tuple."""
    det, c_eff = _integrate_cached(num_free, edges)
    return ClosedFormTerm(Fraction(1), num_free, det, c_eff)


def effective_conductance_ratio(g: HopGraph) -> Fraction:
    """c_eff as det(Laplacian grounded at the sink only) / det(grounded Laplacian).

    Independent route used to cross-check the linear solve.
    """
    g.check_integrable()
    p = g.num_free
    # Source joins the free nodes as row 0; only the sink stays grounded.
    lap = [[0] * (p + 1) for _ in range(p + 1)]
    for a, b in g.edges:
        for u in (a, b):
            if u <= p:
                lap[u][u] += 1
        if a <= p and b <= p:
            lap[a][b] -= 1
            lap[b][a] -= 1
    return Fraction(_bareiss_det(lap), _bareiss_det(grounded_laplacian(g)))


# --- sequential elimination via the two-kernel product rule -----------------

class PointSymbol:
    """Formal linear combination of graph nodes, used as a kernel argument."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        self.coeffs = {k: Fraction(v) for k, v in (coeffs or {}).items() if v}

    @classmethod
    def node(cls, v) -> "PointSymbol":
        return cls({v: 1})

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return PointSymbol(out)

    def __neg__(self):
        return PointSymbol({k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return PointSymbol({k: v * c for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return PointSymbol({k: v / c for k, v in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, PointSymbol) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"PointSymbol({self.coeffs})"


class Merge(NamedTuple):
    exponent: object
    center: object
    coupling: object


def pairwise_gaussian_merge(beta1, y1, beta2, y2) -> Merge:
    """Combine ``H_{beta1}(x, y1) * H_{beta2}(x, y2)`` into one kernel in ``x``.

    Returns the merged exponent ``beta1 + beta2``, the weighted center
    ``(beta1 y1 + beta2 y2) / (beta1 + beta2)`` and the exponent
    ``beta1 beta2 / (beta1 + beta2)`` of the leftover kernel ``H(y1, y2)``.
    Points may be numbers, arrays or :class:`PointSymbol`.
    """
    total = beta1 + beta2
    if total <= 0:
        raise ValueError("merged exponent must be positive")
    center = (y1 * beta1 + y2 * beta2) / total
    return Merge(total, center, beta1 * beta2 / total)


def eliminate_by_merges(g: HopGraph, order: Iterable[int] | None = None) -> tuple[Fraction, Fraction]:
    """``(det, c_eff)`` by integrating free nodes out one at a time.

    Each factor is ``exp(-beta * w * |L|^2)`` with ``L`` a PointSymbol. For the
    node being integrated, the factors containing it are folded pairwise with
    :func:`pairwise_gaussian_merge`; the integral of the merged kernel
    contributes its exponent to ``det`` and the couplings stay behind.
    """
    g.check_integrable()
    factors = [(Fraction(1), PointSymbol.node(a) - PointSymbol.node(b)) for a, b in g.edges]
    det = Fraction(1)
    for z in (order if order is not None else range(1, g.num_free + 1)):
        involved, rest = [], []
        for w, diff in factors:
            alpha = diff.coeffs.get(z, 0)
            if alpha:
                # w |alpha z + R|^2 = (w alpha^2) |z - (-R / alpha)|^2
                others = PointSymbol({k: v for k, v in diff.coeffs.items() if k != z})
                involved.append((w * alpha * alpha, -others / alpha))
            else:
                rest.append((w, diff))
        weight, center = involved[0]
        for w2, c2 in involved[1:]:
            merged = pairwise_gaussian_merge(weight, center, w2, c2)
            if merged.coupling:
                rest.append((merged.coupling, center - c2))
            weight, center = merged.exponent, merged.center
        det *= weight
        factors = rest
    c_eff = Fraction(0)
    for w, diff in factors:
        extra = set(diff.coeffs) - {SOURCE, g.sink}
        if extra:
            raise AssertionError(f"uneliminated nodes {extra}")
        c_eff += w * diff.coeffs.get(SOURCE, 0) ** 2
    return det, c_eff


# --- closed-form term algebra -------------------------------------------------

@dataclass(frozen=True, order=True)
class ClosedFormTerm:
    """``coeff * lambda^p * (pi/beta)^(p d/2) * det^(-d/2) * exp(-beta c_eff s)``."""

    coeff: Fraction
    lambda_pow: int
    det: int
    c_eff: Fraction

    def __post_init__(self):
        if self.det < 1:
            raise ValueError(f"det must be >= 1, got {self.det}")
        if self.c_eff < 0:
            raise ValueError(f"c_eff must be >= 0, got {self.c_eff}")
        object.__setattr__(self, "coeff", Fraction(self.coeff))
        object.__setattr__(self, "c_eff", Fraction(self.c_eff))

    @property
    def key(self) -> tuple[int, int, Fraction]:
        return self.lambda_pow, self.det, self.c_eff

    def value(self, params: ModelParams) -> float:
        d = params.d
        p = self.lambda_pow
        return (
            float(self.coeff)
            * params.lam ** p
            * (math.pi / params.beta) ** (p * d / 2)
            * self.det ** (-d / 2)
            * math.exp(-params.beta * float(self.c_eff) * params.s)
        )

    def __mul__(self, other: "ClosedFormTerm") -> "ClosedFormTerm":
        return ClosedFormTerm(self.coeff * other.coeff, self.lambda_pow + other.lambda_pow,
                              self.det * other.det, self.c_eff + other.c_eff)

    def describe(self) -> str:
        c = "" if self.coeff == 1 else f"{self.coeff}*"
        lam = "" if self.lambda_pow == 0 else f"lambda^{self.lambda_pow}*"
        return (f"{c}{lam}(pi/beta)^({self.lambda_pow}d/2)*{self.det}^(-d/2)"
                f"*exp(-{self.c_eff}*beta*s)")


@dataclass(frozen=True)
class ClosedForm:
    """Canonical sum of :class:`ClosedFormTerm`: sorted by key, combined, no zeros."""

    terms: tuple[ClosedFormTerm, ...] = ()

    @classmethod
    def of(cls, terms: Iterable[ClosedFormTerm]) -> "ClosedForm":
        acc: dict[tuple, Fraction] = {}
        for t in terms:
            acc[t.key] = acc.get(t.key, Fraction(0)) + t.coeff
        return cls(tuple(ClosedFormTerm(c, *k) for k, c in sorted(acc.items()) if c != 0))

    @classmethod
    def coerce(cls, x) -> "ClosedForm":
        if isinstance(x, ClosedForm):
            return x
        if isinstance(x, ClosedFormTerm):
            return cls.of([x])
        raise TypeError(f"cannot make a ClosedForm from {type(x).__name__}")

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other):
        return ClosedForm.of(self.terms + ClosedForm.coerce(other).terms)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-ClosedForm.coerce(other))

    def __mul__(self, other):
        other = ClosedForm.coerce(other)
        return ClosedForm.of(a * b for a in self.terms for b in other.terms)

    def scale(self, c) -> "ClosedForm":
        return ClosedForm.of(ClosedFormTerm(t.coeff * c, *t.key) for t in self.terms)

    def evaluate(self, params: ModelParams) -> float:
        return math.fsum(t.value(params) for t in self.terms)

    def to_json(self) -> dict:
        return {"terms": [
            {
                "coeff": f"{t.coeff.numerator}/{t.coeff.denominator}",
                "lambda_pow": t.lambda_pow,
                "det": str(t.det),
                "c_eff": f"{t.c_eff.numerator}/{t.c_eff.denominator}",
            }
            for t in self.terms
        ]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data) -> "ClosedForm":
        if isinstance(data, str):
            data = json.loads(data)
        terms = [
            ClosedFormTerm(Fraction(t["coeff"]), int(t["lambda_pow"]), int(t["det"]),
                           Fraction(t["c_eff"]))
            for t in data["terms"]
        ]
        return cls.of(terms)


ZERO = ClosedForm()


def chain_kernel(r: int) -> ClosedFormTerm:
    """Closed form of the r-fold chain convolution of the kernel (lambda-weighted)."""
    if r < 1:
        raise ValueError("chain length must be >= 1")
    return ClosedFormTerm(Fraction(1), r - 1, r, Fraction(1, r))


def cf_add(a, b) -> ClosedForm:
    return ClosedForm.coerce(a) + b


def cf_mul(a, b) -> ClosedForm:
    return ClosedForm.coerce(a) * b


def cf_eval(a, params: ModelParams) -> float:
    return ClosedForm.coerce(a).evaluate(params)
