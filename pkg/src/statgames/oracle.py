"""Brute-force enumeration of small games and Nash certification.

The closed-form solvers are trusted only after their equilibrium profile
survives an exhaustive check on the explicit utility matrix: every pure
action of either player is tried against the opponent's mixed strategy.
Fisher games are checked in exact rationals; betting games (continuous
splits) are checked through their optimality conditions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import bayes, iso
from .dist import GameClass, GameSpec, Kind, classify, hypergeom_pmfs, hyper_support
from .errors import Degenerate, Refuted, TooLarge

GUARD = 10**6
SPLIT_GRID = 64
POLICY_SETS = ("reduced", "invariant", "full")


@dataclass
class UtilityMatrix:
    """PI rows (sample, policy) against PII columns (scenario, sequence).

    Policies are tuples indexed by k for the reduced/invariant sets and by
    bit pattern (as an integer, first sampled position = lowest bit) for the
    full set; betting rows hold a split per k of the union support.
    """

    spec: GameSpec
    policies: str
    rows: list
    cols: list
    U: np.ndarray
    keys: list = field(default_factory=list, repr=False)

    @property
    def shape(self):
        return self.U.shape


@dataclass(frozen=True)
class Certificate:
    """Outcome of a certification.

    Gaps are excesses: for Fisher games the largest exact violation of the
    equilibrium (in)equalities, for betting games the largest violation
    beyond the numerical tolerance.  ``nash_ok`` iff both are <= 0.
    """

    value: object
    nash_ok: bool
    worst_row_gap: object
    worst_col_gap: object
    value_bound: float = 0.0
    failures: tuple = ()


# --- enumeration --------------------------------------------------------------

def _columns(spec: GameSpec):
    M = spec.M
    cols, bits = [], []
    for theta, K in (("A", spec.K_A), ("B", spec.K_B)):
        for ones in itertools.combinations(range(M), K):
            cols.append((theta, ones))
            row = np.zeros(M, dtype=np.int64)
            row[list(ones)] = 1
            bits.append(row)
    return cols, np.array(bits, dtype=np.int64).reshape(len(cols), M)


def _supports(spec: GameSpec):
    sA = hyper_support(spec.N, spec.K_A, spec.M)
    sB = hyper_support(spec.N, spec.K_B, spec.M)
    return sA, sB


def _forced_fill(spec: GameSpec, sA, sB):
    """Guess per k outside the common support (A-only -> A, B-only -> B)."""
    low, high = ("A", "B") if spec.K_A <= spec.K_B else ("B", "A")
    common = set(sA) & set(sB)
    out = {}
    for k in range(spec.N + 1):
        if k in common:
            continue
        if k in sA:
            out[k] = "A"
        elif k in sB:
            out[k] = "B"
        else:
            ref = min(common) if common else (spec.N + 1) / 2
            out[k] = low if k < ref else high
    return out


def _policy_list(spec: GameSpec, policies: str):
    N = spec.N
    sA, sB = _supports(spec)
    if policies == "invariant":
        return [tuple(p) for p in itertools.product("AB", repeat=N + 1)]
    if policies == "reduced":
        fill = _forced_fill(spec, sA, sB)
        free = [k for k in range(N + 1) if k not in fill]
        out = []
        for choice in itertools.product("AB", repeat=len(free)):
            pol = dict(fill)
            pol.update(zip(free, choice))
            out.append(tuple(pol[k] for k in range(N + 1)))
        return out
    return [tuple(p) for p in itertools.product("AB", repeat=2 ** N)]


def _key(spec: GameSpec, policies: str, pol: tuple):
    """The policy as a function of k on the reachable counts, or None."""
    sA, sB = _supports(spec)
    reach = sorted(set(sA) | set(sB))
    if policies != "full":
        return tuple(pol[k] for k in reach)
    by_k = {}
    for pattern, guess in enumerate(pol):
        k = bin(pattern).count("1")
        if k in by_k and by_k[k] != guess:
            by_k[k] = None
        else:
            by_k.setdefault(k, guess)
    key = tuple(by_k[k] for k in reach)
    return None if None in key else key


def _check_size(spec: GameSpec, policies: str, split_grid: int):
    M, N = spec.M, spec.N
    ncols = math.comb(M, spec.K_A) + math.comb(M, spec.K_B)
    sA, sB = _supports(spec)
    nAB = len(set(sA) & set(sB))
    if spec.kind is Kind.FISHER:
        per = {"reduced": 2 ** nAB, "invariant": 2 ** (N + 1), "full": 2 ** (2 ** N)}[policies]
        if policies == "full" and M > 3:
            raise TooLarge("full policy sets are only enumerated for M <= 3")
    else:
        per = (split_grid + 1) ** nAB
    nrows = math.comb(M, N) * per
    if ncols > GUARD or math.comb(M, N) * 2 ** nAB > GUARD or nrows > GUARD:
        raise TooLarge(f"{spec.astuple()}: {nrows} x {ncols} exceeds the enumeration guard")


def enumerate_game(spec: GameSpec, policies: str = "reduced",
                   split_grid: int = SPLIT_GRID) -> UtilityMatrix:
    if policies not in POLICY_SETS:
        raise ValueError(f"policies must be one of {POLICY_SETS}, got {policies!r}")
    _check_size(spec, policies, split_grid)
    if spec.kind is not Kind.FISHER:
        return _enumerate_betting(spec, split_grid)
    N = spec.N
    cols, bits = _columns(spec)
    theta = np.array([c[0] == "B" for c in cols], dtype=np.int64)
    subsets = list(itertools.combinations(range(spec.M), N))
    # (n_subsets, n_cols) observation index: count k, or bit pattern for the full set
    obs = np.empty((len(subsets), len(cols)), dtype=np.int64)
    weights = 1 << np.arange(N, dtype=np.int64)
    for i, S in enumerate(subsets):
        seen = bits[:, list(S)]
        obs[i] = seen @ weights if policies == "full" else seen.sum(axis=1)
    pols = _policy_list(spec, policies)
    table = np.array([[g == "B" for g in p] for p in pols], dtype=np.int64)
    table = table.reshape(len(pols), -1)
    # U[s, p, c] = 1 iff policy p maps the observation to the true scenario
    U = (table[:, obs] == theta[None, None, :]).transpose(1, 0, 2)
    U = U.reshape(len(subsets) * len(pols), len(cols)).astype(np.int64)
    rows = [(S, p) for S in subsets for p in pols]
    keys = [_key(spec, policies, p) for p in pols] * len(subsets)
    return UtilityMatrix(spec, policies, rows, cols, U, keys)


def _enumerate_betting(spec: GameSpec, n: int) -> UtilityMatrix:
    """Rows: a split on each common-support k from {0, 1/n, ..., 1}; all-in elsewhere."""
    cols, bits = _columns(spec)
    is_A = np.array([c[0] == "A" for c in cols])
    sA, sB = _supports(spec)
    union = sorted(set(sA) | set(sB))
    common = [k for k in union if k in sA and k in sB]
    grid = [Fraction(j, n) for j in range(n + 1)]
    splits = []
    for choice in itertools.product(grid, repeat=len(common)):
        s = {k: Fraction(1) if k in sA else Fraction(0) for k in union}
        s.update(zip(common, choice))
        splits.append(s)
    if spec.kind is Kind.STATISTICAL:
        def u(c):
            return iso.utility(c, spec.gamma)
    else:
        def u(c):
            return math.log(c) if c > 0 else -math.inf
    subsets = list(itertools.combinations(range(spec.M), spec.N))
    rows, data = [], []
    for S in subsets:
        ks = bits[:, list(S)].sum(axis=1)
        for s in splits:
            rows.append((S, tuple(s[k] for k in union)))
            data.append([u(s[k]) if a else u(1 - s[k]) for k, a in zip(ks, is_A)])
    return UtilityMatrix(spec, "split-grid", rows, cols, np.array(data, dtype=float))


# --- Fisher certification -----------------------------------------------------

def _threshold_keys(spec: GameSpec, cls: GameClass, eq):
    """(phi_hat, phi_check, nu): PI's two pure policies and the weight on phi_hat."""
    sA, sB = _supports(spec)
    reach = sorted(set(sA) | set(sB))
    if cls is GameClass.BLIND:
        return tuple("A" for _ in reach), tuple("B" for _ in reach), Fraction(1, 2)
    if cls is GameClass.SURE:
        key = tuple("A" if k in sA else "B" for k in reach)
        return key, key, Fraction(1)
    k_star = eq.k_star
    hat = tuple("A" if k <= k_star else "B" for k in reach)
    chk = tuple("A" if k < k_star else "B" for k in reach)
    return hat, chk, eq.nu_star


def _profile_sums(um: UtilityMatrix, hat, chk):
    """Per-column wins of phi_hat / phi_check summed over samples."""
    by_S = {}
    for i, (S, _) in enumerate(um.rows):
        slot = by_S.setdefault(S, [None, None])
        if slot[0] is None and um.keys[i] == hat:
            slot[0] = i
        if slot[1] is None and um.keys[i] == chk:
            slot[1] = i
    if any(a is None or b is None for a, b in by_S.values()):
        raise Degenerate("equilibrium policies missing from the enumerated set")
    hat_rows = [a for a, _ in by_S.values()]
    chk_rows = [b for _, b in by_S.values()]
    return hat_rows, chk_rows


def _fisher_gaps(spec: GameSpec, eq, policies: str = "reduced"):
    cls = classify(spec)
    canon = spec.canonical()
    um = enumerate_game(GameSpec(*canon.astuple()), policies)
    hat, chk, nu = _threshold_keys(canon, cls, eq)
    P = Fraction(eq.P_star) if eq.P_star is not None else Fraction(1, 2)
    nu = Fraction(nu)
    U = um.U
    is_A = np.array([c[0] == "A" for c in um.cols])
    cA, cB = math.comb(canon.M, canon.K_A), math.comb(canon.M, canon.K_B)
    nS = math.comb(canon.M, canon.N)

    wins_A, wins_B = U[:, is_A].sum(axis=1), U[:, ~is_A].sum(axis=1)
    row_pay = [P * Fraction(int(a), cA) + (1 - P) * Fraction(int(b), cB)
               for a, b in zip(wins_A, wins_B)]
    hat_rows, chk_rows = _profile_sums(um, hat, chk)
    hat_w, chk_w = U[hat_rows].sum(axis=0), U[chk_rows].sum(axis=0)
    col_pay = [(nu * int(h) + (1 - nu) * int(c)) / nS for h, c in zip(hat_w, chk_w)]

    support = set()
    if nu > 0:
        support.update(hat_rows)
    if nu < 1:
        support.update(chk_rows)
    col_weight = [P if a else 1 - P for a in is_A]
    return row_pay, col_pay, support, col_weight


def _certify_fisher(spec, eq, policies):
    row_pay, col_pay, support, col_weight = _fisher_gaps(spec, eq, policies)
    v = Fraction(eq.v_star)
    failures = []
    equal_gap = max((abs(row_pay[i] - v) for i in support), default=Fraction(0))
    dom_gap = max(row_pay) - v
    if equal_gap > 0:
        failures.append(f"1equal: support row off v* by {equal_gap}")
    if dom_gap > 0:
        failures.append(f"dominated: a pure row beats v* by {dom_gap}")
    col_gap = Fraction(0)
    for c, w in zip(col_pay, col_weight):
        gap = abs(c - v) if w > 0 else v - c
        col_gap = max(col_gap, gap)
    if col_gap > 0:
        failures.append(f"2equal: column payoff off v* by {col_gap}")
    cert = Certificate(v, not failures, max(equal_gap, dom_gap), col_gap,
                       failures=tuple(failures))
    return cert, row_pay, col_pay


def verify_fisher(spec: GameSpec, eq, strict: bool = True,
                  policies: str = "reduced") -> Certificate:
    cert, _, _ = _certify_fisher(spec, eq, policies)
    if strict and not cert.nash_ok:
        raise Refuted(f"{spec.astuple()} refuted: " + "; ".join(cert.failures), cert)
    return cert


def game_value_lp_free(spec: GameSpec, policies: str = "reduced") -> Fraction:
    """v* from max_rows(U y*) == min_cols(x* U); no LP involved."""
    from .fisher import solve_fisher

    eq = solve_fisher(spec)
    cert, row_pay, col_pay = _certify_fisher(spec, eq, policies)
    upper, lower = max(row_pay), min(col_pay)
    if upper != lower:
        raise Refuted(f"{spec.astuple()}: value bracket [{lower}, {upper}] not closed", cert)
    return upper


# --- betting certification ----------------------------------------------------

def _u(gamma: float):
    if gamma == 1.0:
        return lambda c: math.log(c) if c > 0 else -math.inf
    return lambda c: iso.utility(c, gamma)


def _expected(P: float, d, gamma: float) -> float:
    return bayes.delta_G(P, d) if gamma == 1.0 else iso.expected_utility(P, d, gamma)


def _curvature(P: float, d, gamma: float) -> float:
    if gamma == 1.0:
        return bayes.delta_G_derivs(P, d)[1]
    h = 1e-4 * min(P, 1 - P)
    f = [_expected(P + j * h, d, gamma) for j in (-1, 0, 1)]
    return (f[0] - 2 * f[1] + f[2]) / h**2


def _verify_betting(spec: GameSpec, eq, gamma: float, grid: int, strict: bool,
                    split_tol: float) -> Certificate:
    cls = classify(spec)
    d = hypergeom_pmfs(spec.canonical())
    failures = []
    if cls is GameClass.SURE:
        bad = [k for k, s in eq.splits.items()
               if s != (1.0 if k in d.support_A else 0.0)]
        if bad:
            failures.append(f"(a) sure game must bet all-in, not at k={bad}")
        cert = Certificate(0.0, not bad, 1.0 if bad else 0.0, 0.0, failures=tuple(failures))
        if strict and bad:
            raise Refuted("; ".join(failures), cert)
        return cert

    u = _u(gamma)
    P = float(eq.P_star)
    pa = [float(p) for p in d.pmf_A]
    pb = [float(p) for p in d.pmf_B]

    # (a) splits: p'_k = 1/(1 + ((1-P) pB / (P pA))^(1/γ)), plus a coarse grid floor
    split_dev, grid_excess = 0.0, 0.0
    UA = UB = 0.0
    for k in d.support:
        if pb[k] == 0:
            closed = 1.0
        elif pa[k] == 0:
            closed = 0.0
        else:
            closed = 1 / (1 + ((1 - P) * pb[k] / (P * pa[k])) ** (1 / gamma))
        s = eq.splits[k]
        split_dev = max(split_dev, abs(s - closed))

        def expected(x, k=k):
            ta = P * pa[k] * u(x) if pa[k] else 0.0
            tb = (1 - P) * pb[k] * u(1 - x) if pb[k] else 0.0
            return ta + tb

        if 0 < s < 1:
            best = max(expected(j / SPLIT_GRID) for j in range(1, SPLIT_GRID))
            grid_excess = max(grid_excess, best - expected(s) - 1e-12 * (1 + abs(best)))
        if pa[k]:
            UA += pa[k] * u(s)
        if pb[k]:
            UB += pb[k] * u(1 - s)
    if split_dev > split_tol:
        failures.append(f"(a) split off the closed form by {split_dev:.3g}")
    if grid_excess > 0:
        failures.append(f"(a) a 1/{SPLIT_GRID} split grid does better by {grid_excess:.3g}")

    # (b) P* minimises the expected utility over an interior grid
    value = _expected(P, d, gamma)
    second = _curvature(P, d, gamma)
    err = float(eq.err_bound or 0.0)
    slack = abs(second) * err**2 + 1e-12 * (1 + abs(value))
    Ps = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    lowest = min(_expected(float(p), d, gamma) for p in Ps)
    improvement = value - lowest
    if improvement > slack:
        failures.append(f"(b) grid point lower than the value at P* by {improvement:.3g}")

    # (c) both scenarios give PII the same expected utility
    indiff_tol = (1 + 1 / gamma) * err + 1e-10 * (1 + abs(UA))
    indiff = abs(UA - UB)
    if indiff > indiff_tol:
        failures.append(f"(c) scenario utilities differ by {indiff:.3g}")

    cert = Certificate(value, not failures,
                       max(split_dev - split_tol, grid_excess),
                       max(improvement - slack, indiff - indiff_tol),
                       value_bound=abs(second) * err**2, failures=tuple(failures))
    if strict and failures:
        raise Refuted(f"{spec.astuple()} refuted: " + "; ".join(failures), cert)
    return cert


def verify_bayes(spec: GameSpec, eq, grid: int = 1001, strict: bool = True,
                 split_tol: float = 1e-10) -> Certificate:
    """Certify a logarithmic-utility equilibrium through its optimality conditions."""
    return _verify_betting(spec, eq, 1.0, grid, strict, split_tol)


def verify_iso(spec: GameSpec, eq, grid: int = 1001, strict: bool = True,
               split_tol: float = 1e-10) -> Certificate:
    """Same conditions as :func:`verify_bayes` with isoelastic utility."""
    return _verify_betting(spec, eq, float(eq.gamma), grid, strict, split_tol)
