"""Acceptance criteria 1-11.

Each test is tagged with its criterion number; conftest prints one
pass/fail line per criterion at the end of the run.  Criterion 10 is a
soft report (pass/warn) and never fails.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from statgames import bayes, iso, limits
from statgames.bayes import SolverConfig, solve_bayes, solve_distributions
from statgames.dist import GameClass, GameSpec, Kind, binom_pmfs, classify, hypergeom_pmfs
from statgames.fisher import binomial_fisher, solve_fisher
from statgames.iso import solve_iso
from statgames.oracle import game_value_lp_free, verify_fisher

from test_fisher import TABLE_RATES
from test_limits import POLICY_TABLE, PRIOR_TABLE, cells

SQRT5 = math.sqrt(5)


def best_time(fn, repeat=20):
    """Smallest wall time of ``repeat`` calls (seconds); also returns the last result."""
    best, out = math.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def equal_support_games(rng, n):
    """Random games whose two count supports coincide (N <= K, M-K for both)."""
    games = []
    while len(games) < n:
        M = int(rng.integers(6, 31))
        KA, KB = rng.choice(np.arange(1, M), size=2, replace=False)
        top = min(KA, KB, M - KA, M - KB)
        if top < 1:
            continue
        N = int(rng.integers(1, top + 1))
        games.append(GameSpec(N, int(KA), int(KB), M))
    return games


@pytest.mark.acceptance(1, "Fisher closed form on G(1,0,1,2), oracle-certified, < 1 ms")
def test_01_fisher_closed_form():
    spec = GameSpec(1, 0, 1, 2)
    t, eq = best_time(lambda: solve_fisher(spec))
    assert (eq.k_star, eq.nu_star, eq.P_star, eq.v_star) == (0, Fraction(2, 3), Fraction(1, 3), Fraction(2, 3))
    assert all(isinstance(x, Fraction) for x in (eq.nu_star, eq.P_star, eq.v_star))
    assert verify_fisher(spec, eq).nash_ok
    assert t < 1e-3


@pytest.mark.acceptance(2, "M<=2 enumeration table: closed form and oracle value exact, < 1 s")
def test_02_small_table():
    def run():
        for params, rate in TABLE_RATES.items():
            spec = GameSpec(*params)
            assert solve_fisher(spec).v_star == rate
            assert game_value_lp_free(spec) == rate
    t, _ = best_time(run, repeat=3)
    assert t < 1.0


@pytest.mark.acceptance(3, "golden-ratio Bayesian game by bisection, restricted and Newton, < 10 ms")
def test_03_golden_ratio():
    spec = GameSpec(1, 0, 1, 2, Kind.BAYESIAN)
    for method in ("bisection", "restricted", "newton"):
        cfg = SolverConfig(tol=1e-12, method=method)
        t, eq = best_time(lambda: solve_bayes(spec, cfg), repeat=5)
        assert eq.P_star == pytest.approx(1 / SQRT5, abs=1e-10)
        assert eq.splits[0] == pytest.approx((SQRT5 - 1) / 2, abs=1e-10)
        assert eq.G_over_log2 == pytest.approx(0.3058, abs=5e-5)
        assert t < 10e-3, method


@pytest.mark.acceptance(4, "BG(17,10,16,27): P*=0.4953 with certified bound <= 1e-10, < 50 ms")
def test_04_large_bayes():
    spec = GameSpec(17, 10, 16, 27, Kind.BAYESIAN)
    t, eq = best_time(lambda: solve_bayes(spec), repeat=5)
    assert eq.P_star == pytest.approx(0.4953, abs=5e-5)
    assert eq.err_bound <= 1e-10
    assert t < 50e-3


@pytest.mark.acceptance(5, "isoelastic closed forms on SG(1,0,1,2,gamma) and gamma limits")
def test_05_iso_closed_forms():
    spec = GameSpec(1, 0, 1, 2)
    expected = {0.5: 0.4, 2.0: 0.5, 3.0: (3 + 12**0.25 - math.sqrt(3)) / 6}
    for g, P in expected.items():
        assert solve_iso(spec, g, tol=1e-12).P_star == pytest.approx(P, abs=1e-9)
    assert solve_iso(spec, 1e-3, tol=1e-12).P_star == pytest.approx(1 / 3, abs=1e-3)
    assert solve_iso(spec, 1e3, tol=1e-12).P_star == pytest.approx(1 / 2, abs=1e-3)


@pytest.mark.acceptance(6, "gamma -> 0 unification on SG(1,0,1,2,.)")
def test_06_unification():
    eq = solve_iso(GameSpec(1, 0, 1, 2), 1e-3, tol=1e-12)
    assert abs(eq.P_star - 1 / 3) < 1e-3
    assert abs(eq.splits[0] - 2 / 3) < 1e-3


@pytest.mark.acceptance(7, "36 + 36 reference N -> infinity table cells to 4 decimals, < 1 s")
def test_07_tables():
    def run():
        bad = []
        for xa, xb, v in cells(POLICY_TABLE):
            if round(limits.fisher_policy_limit(xa, xb), 4) != pytest.approx(v, abs=1e-12):
                bad.append(("policy", xa, xb))
        for xa, xb, v in cells(PRIOR_TABLE):
            if round(limits.bayes_prior_approx(xa, xb), 4) != pytest.approx(v, abs=1e-12):
                bad.append(("prior", xa, xb))
        return bad
    t, bad = best_time(run, repeat=3)
    assert len(list(cells(POLICY_TABLE))) == len(list(cells(PRIOR_TABLE))) == 36
    assert bad == []
    assert t < 1.0


@pytest.mark.acceptance(8, "measured Lipschitz ratios of F and Phi within q and the tanh bound")
def test_08_contraction():
    rng = np.random.default_rng(20240611)
    worst_F = worst_Phi = 0.0
    for spec in equal_support_games(rng, 20):
        d = hypergeom_pmfs(spec)
        q = bayes.tv_constant(d)
        g = float(rng.choice([0.5, 2.0, 3.0, 10.0]))
        L = iso.contraction_bound(d, g)
        assert L is not None
        for _ in range(50):
            a, b = rng.uniform(-10, 10, size=2)
            if abs(a - b) < 1e-6:
                continue
            rF = abs(bayes.F(a, d) - bayes.F(b, d)) / abs(a - b)
            rP = abs(iso.Phi(a, d, g) - iso.Phi(b, d, g)) / abs(a - b)
            worst_F = max(worst_F, rF / q)
            worst_Phi = max(worst_Phi, rP / L)
    assert worst_F <= 1 + 1e-9
    assert worst_Phi <= 1 + 1e-9


@pytest.mark.acceptance(9, "Delta G', Delta G'', I', I'' against central differences")
def test_09_derivatives():
    rng = np.random.default_rng(7)
    games = [GameSpec(3, 2, 4, 8), GameSpec(4, 4, 6, 10), GameSpec(2, 1, 3, 4), GameSpec(5, 3, 6, 11)]
    for i in range(100):
        d = hypergeom_pmfs(games[i % len(games)])
        P = rng.uniform(0.05, 0.95)
        first, second = bayes.delta_G_derivs(P, d)
        h1, h2 = 1e-5, 1e-4
        fd1 = (bayes.delta_G(P + h1, d) - bayes.delta_G(P - h1, d)) / (2 * h1)
        fd2 = (bayes.delta_G(P + h2, d) - 2 * bayes.delta_G(P, d) + bayes.delta_G(P - h2, d)) / h2**2
        assert fd1 == pytest.approx(first, abs=1e-6 * max(1, abs(first)))
        assert fd2 == pytest.approx(second, abs=1e-6 * max(1, abs(second)))
    for _ in range(100):
        x, t = rng.uniform(0.05, 0.95, size=2)
        _, I1, I2 = limits.rate_function(x, t)
        h1, h2 = 1e-6, 1e-4
        fd1 = (limits.rate_function(x + h1, t)[0] - limits.rate_function(x - h1, t)[0]) / (2 * h1)
        I = lambda y: limits.rate_function(y, t)[0]
        fd2 = (I(x + h2) - 2 * I(x) + I(x - h2)) / h2**2
        assert fd1 == pytest.approx(I1, abs=1e-6 * max(1, abs(I1)))
        assert fd2 == pytest.approx(I2, abs=1e-6 * max(1, abs(I2)))


PAIRS = [(0.1, 0.8), (0.2, 0.5), (0.2, 0.7), (0.1, 0.4), (0.4, 0.9)]


@pytest.mark.acceptance(10, "asymptotic conjectures (soft: pass/warn)")
def test_10_conjectures(record_property):
    notes = []
    for xa, xb in PAIRS:
        lo, hi = limits.fisher_prior_limit_bounds(xa, xb)
        x0 = limits.fisher_policy_limit(xa, xb)
        for N in (50, 100, 200, 400):
            P = binomial_fisher(N, xa, xb).P_star
            if not (lo <= P <= hi):
                notes.append(f"Fisher P*_{N}({xa},{xb})={P:.4f} outside [{lo:.4f},{hi:.4f}]")
        gaps = [abs(binomial_fisher(N, xa, xb).s_star - x0) for N in (25, 100, 400, 1600)]
        if not gaps[-1] <= gaps[0] + 1e-12:
            notes.append(f"s*_N({xa},{xb}) not approaching x0*: {gaps}")
        r = limits.asymptotics(xa, xb)
        for N in (20, 40, 80):
            P = solve_distributions(binom_pmfs(N, xa, xb), SolverConfig(tol=1e-12)).P_star
            first = limits.asymptotics(xa, xb, N).P_first_order
            if abs(first - P) > abs(r.P_approx - P) + 1e-12:
                notes.append(f"sampi no better at N={N} ({xa},{xb}): "
                             f"{abs(first - P):.4f} vs {abs(r.P_approx - P):.4f}")
    status = "warn" if notes else "pass"
    record_property("acceptance_status", status)
    record_property("acceptance_detail", "; ".join(notes))
    print(f"criterion 10: {status}")
    for n in notes:
        print("  ", n)


@pytest.mark.acceptance(11, "all Nontrivial games with M <= 4 certified exactly, < 30 s")
def test_11_oracle_exhaustive():
    t = time.perf_counter()
    n = 0
    for M in range(5):
        for N in range(M + 1):
            for KA in range(M + 1):
                for KB in range(M + 1):
                    spec = GameSpec(N, KA, KB, M)
                    if classify(spec) is not GameClass.NONTRIVIAL:
                        continue
                    eq = solve_fisher(spec)
                    cert = verify_fisher(spec, eq)
                    assert cert.nash_ok and isinstance(cert.value, Fraction)
                    assert cert.worst_row_gap == 0 and cert.worst_col_gap == 0
                    n += 1
    assert n > 0
    assert time.perf_counter() - t < 30
