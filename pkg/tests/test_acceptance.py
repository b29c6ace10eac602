"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import io
import json
import math
import time
import warnings
from contextlib import redirect_stdout
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import IntegrationWarning

from oracles import (VAR4_DISPLAY, evaluate_display, nonflat_by_filter, param_grid,
                     random_hop_graphs, two_row_count)
from rcmoments import (ClosedFormTerm, ModelParams, MomentQuery, SimConfig, cf_eval,
                       enumerate_nonflat, integrate_gaussian_graph, khop_mean, khop_moment,
                       khop_variance, run_simulation, twohop_moment_stirling)
from rcmoments.cli import main as cli_main
from rcmoments.moments import _khop_moment
from rcmoments.oracle import mc_graph_integral, quadrature_graph_integral
from rcmoments.simulate import poisson_gof


def _cold():
    _khop_moment.cache_clear()


def test_1_three_hop_variance_closed_form(acceptance_report):
    _cold()
    t0 = time.perf_counter()
    form = khop_variance(3)
    elapsed = time.perf_counter() - t0
    got = {(t.coeff, t.lambda_pow, t.det, t.c_eff) for t in form.terms}
    want = {(2, 3, 8, Fraction(1, 2)), (1, 2, 3, Fraction(1, 3)),
            (2, 3, 12, Fraction(3, 4)), (1, 2, 8, Fraction(1))}
    ok = len(form.terms) == 4 and got == want and elapsed < 1.0
    acceptance_report("1 three-hop variance closed form", ok, f"{len(form.terms)} terms, {elapsed:.3f}s")
    assert got == want and len(form.terms) == 4
    assert elapsed < 1.0


def test_2_mean_formula(acceptance_report):
    t0 = time.perf_counter()
    ok = True
    for k in range(2, 7):
        direct = khop_moment(MomentQuery(k, 1))
        want = ClosedFormTerm(Fraction(1), k - 1, k, Fraction(1, k))
        ok &= direct.terms == (want,) and khop_mean(k).terms == (want,)
    elapsed = time.perf_counter() - t0
    acceptance_report("2 mean formula k=2..6", ok and elapsed < 1.0, f"{elapsed:.3f}s")
    assert ok
    assert elapsed < 1.0


def test_3_stirling_consistency(acceptance_report):
    _cold()
    t0 = time.perf_counter()
    ok = all(khop_moment(MomentQuery(2, n)) == twohop_moment_stirling(n) for n in range(1, 6))
    elapsed = time.perf_counter() - t0
    acceptance_report("3 Stirling consistency n=1..5", ok and elapsed < 5.0, f"{elapsed:.3f}s")
    assert ok
    assert elapsed < 5.0


def test_4_partition_counts(acceptance_report):
    t0 = time.perf_counter()
    mismatches = []
    for n in range(1, 9):
        for r in range(1, 9 // n + 1):
            if n * r > 8:
                continue
            got = [p.labels for p in enumerate_nonflat(n, r)]
            want = [tuple(b + 1 for b in lab) for lab in nonflat_by_filter(n, r)]
            if sorted(got) != sorted(want) or len(set(got)) != len(got):
                mismatches.append((n, r))
    for r in range(1, 7):
        if sum(1 for _ in enumerate_nonflat(2, r)) != two_row_count(r):
            mismatches.append((2, r))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and [two_row_count(r) for r in (2, 3, 4, 5)] == [7, 34, 209, 1546]
    acceptance_report("4 partition counts", ok and elapsed < 30.0, f"{elapsed:.1f}s")
    assert ok, mismatches
    assert elapsed < 30.0


def test_5_oracle_certification(acceptance_report):
    t0 = time.perf_counter()
    params = ModelParams(lam=1.0, beta=1.0, d=1, s=1.0)
    quad_worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for g in random_hop_graphs(50, 3, seed=2024):
            exact = integrate_gaussian_graph(g).value(params)
            approx = quadrature_graph_integral(g, params.beta, params.s)
            quad_worst = max(quad_worst, abs(approx - exact) / exact)
    mc_worst = 0.0
    for i, g in enumerate(random_hop_graphs(20, 6, seed=7, min_free=1)):
        exact = integrate_gaussian_graph(g).value(params)
        mean, se = mc_graph_integral(g, params.beta, params.s, samples=200_000, seed=i)
        mc_worst = max(mc_worst, abs(mean - exact) / se)
    elapsed = time.perf_counter() - t0
    ok = quad_worst <= 1e-6 and mc_worst <= 4 and elapsed < 300
    acceptance_report("5 oracle certification", ok,
                      f"quad rel {quad_worst:.1e}, MC max |z| {mc_worst:.2f}, {elapsed:.0f}s")
    assert quad_worst <= 1e-6
    assert mc_worst <= 4
    assert elapsed < 300


def test_6_four_hop_grouping(acceptance_report):
    _cold()
    t0 = time.perf_counter()
    form = khop_variance(4)
    worst = 0.0
    for lam, beta, d, dist in param_grid(20):
        params = ModelParams.from_distance(lam, beta, d, dist)
        ours = cf_eval(form, params)
        theirs = evaluate_display(VAR4_DISPLAY, lam, beta, d, dist * dist)
        worst = max(worst, abs(ours - theirs) / abs(theirs))
    elapsed = time.perf_counter() - t0
    ok = len(VAR4_DISPLAY) == 33 and worst <= 1e-12 and elapsed < 60
    acceptance_report("6 four-hop grouping equivalence", ok, f"max rel {worst:.1e}, {elapsed:.2f}s")
    assert len(VAR4_DISPLAY) == 33
    assert worst <= 1e-12
    assert elapsed < 60


@pytest.fixture(scope="module")
def seed42_run():
    cfg = SimConfig(lam=1.0, beta=1.0, source=(0.0, 0.0), sink=(1.0, 0.0), runs=10_000,
                    seed=42, k_list=(2, 3, 4), moment_orders=(1,))
    t0 = time.perf_counter()
    res = run_simulation(cfg)
    return res, time.perf_counter() - t0


def _params2d():
    return ModelParams.from_distance(1.0, 1.0, 2, 1.0)


def test_7a_two_hop_poisson(acceptance_report, seed42_run):
    res, elapsed = seed42_run
    mean = cf_eval(khop_mean(2), _params2d())
    stat, dof, p = poisson_gof(res.counts[:, 2], mean)
    ok = p >= 1e-3 and elapsed < 600
    acceptance_report("7a two-hop chi-square Poisson fit", ok, f"chi2={stat:.2f} dof={dof} p={p:.3f}")
    assert p >= 1e-3
    assert elapsed < 600


def test_7b_three_hop_mean_and_variance(acceptance_report, seed42_run):
    res, _ = seed42_run
    params = _params2d()
    est = res.moment(3, 1)
    z_mean = (est.estimate - cf_eval(khop_mean(3), params)) / est.stderr
    var, se = res.variances[3]
    z_var = (var - cf_eval(khop_variance(3), params)) / se
    ok = abs(z_mean) <= 3 and abs(z_var) <= 3
    acceptance_report("7b three-hop mean and variance within 3 SE", ok,
                      f"z_mean={z_mean:+.2f} z_var={z_var:+.2f}")
    assert abs(z_mean) <= 3
    assert abs(z_var) <= 3


def test_7c_four_hop_mean(acceptance_report, seed42_run):
    res, _ = seed42_run
    est = res.moment(4, 1)
    z = (est.estimate - cf_eval(khop_mean(4), _params2d())) / est.stderr
    ok = abs(z) <= 3
    acceptance_report("7c four-hop mean within 3 SE", ok, f"z={z:+.2f}")
    assert abs(z) <= 3


def test_8_compare_determinism(acceptance_report, tmp_path):
    man = tmp_path / "run.manifest.json"
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    with redirect_stdout(io.StringIO()):
        code0 = cli_main(["compare", "--k", "2,3", "--runs", "500", "--seed", "42",
                          "--format", "json", "--out", str(first), "--manifest", str(man)])
        code1 = cli_main(["compare", "--config", str(man), "--out", str(second),
                          "--manifest", str(tmp_path / "replay.manifest.json")])
    a, b = first.read_bytes(), second.read_bytes()
    ok = code0 in (0, 1) and code0 == code1 and a == b and json.loads(a)["command"] == "compare"
    acceptance_report("8 compare determinism", ok, f"{len(a)} bytes")
    assert a == b
    assert code0 == code1
