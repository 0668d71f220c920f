"""Exact combinatorics and per-scenario outcome distributions.

Every solver in the package consumes a :class:`ScenarioDistributions`: the
probability of observing ``k`` ones among ``N`` sampled positions, under the
two scenarios A and B.  Finite games use exact rationals; binomial limit
games use floats.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .errors import BoundViolation, InvalidFraction, InvalidSpec


class Kind(str, enum.Enum):
    FISHER = "fisher"
    BAYESIAN = "bayes"
    STATISTICAL = "iso"


class GameClass(str, enum.Enum):
    BLIND = "BlindGuessing"
    SURE = "SureWinning"
    NONTRIVIAL = "Nontrivial"


@dataclass(frozen=True)
class GameSpec:
    """Finite game G(N, K_A, K_B, M).

    ``kind`` selects the utility (win/lose, logarithmic, isoelastic);
    ``gamma`` is the relative risk aversion and is only meaningful for
    Statistical games.
    """

    N: int
    K_A: int
    K_B: int
    M: int
    kind: Kind = Kind.FISHER
    gamma: float | None = None

    def __post_init__(self):
        for name in ("N", "K_A", "K_B", "M"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise InvalidSpec(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        N, K_A, K_B, M = self.N, self.K_A, self.K_B, self.M
        if M < 0 or not (0 <= N <= M) or not (0 <= K_A <= M) or not (0 <= K_B <= M):
            raise InvalidSpec(f"need 0<=N,K_A,K_B<=M, got {(N, K_A, K_B, M)}")
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise InvalidSpec(f"unknown game kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        g = self.gamma
        if kind is Kind.STATISTICAL:
            if g is None or not (float(g) > 0) or not math.isfinite(float(g)):
                raise InvalidSpec(f"Statistical games need gamma > 0, got {g!r}")
            object.__setattr__(self, "gamma", float(g))
        elif g is not None:
            if kind is Kind.BAYESIAN and float(g) == 1.0:
                object.__setattr__(self, "gamma", 1.0)
            else:
                raise InvalidSpec(f"gamma is only valid for Statistical games")

    @property
    def swapped(self) -> bool:
        return self.K_A > self.K_B

    def canonical(self) -> GameSpec:
        """Relabel scenarios so that K_A <= K_B."""
        if not self.swapped:
            return self
        return GameSpec(self.N, self.K_B, self.K_A, self.M, self.kind, self.gamma)

    def astuple(self):
        return (self.N, self.K_A, self.K_B, self.M)


@dataclass(frozen=True)
class ScenarioDistributions:
    """Outcome pmfs of the sampled count k under A and B.

    pmfs are dense tuples over k = 0..N; supports are contiguous ``range``s.
    """

    N: int
    support_A: range
    support_B: range
    support_AB: range
    pmf_A: tuple
    pmf_B: tuple

    @property
    def exact(self) -> bool:
        return isinstance(self.pmf_A[0], Fraction)

    @property
    def same_support(self) -> bool:
        return self.support_A == self.support_B

    @property
    def support(self) -> range:
        """Union of the two supports (always an interval here)."""
        if not self.support_A:
            return self.support_B
        if not self.support_B:
            return self.support_A
        return range(min(self.support_A.start, self.support_B.start),
                     max(self.support_A.stop, self.support_B.stop))

    def pmf(self, theta: str) -> tuple:
        return self.pmf_A if theta == "A" else self.pmf_B

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([float(p) for p in self.pmf_A]),
                np.array([float(p) for p in self.pmf_B]))

    def as_float(self) -> ScenarioDistributions:
        if not self.exact:
            return self
        a, b = self.arrays()
        return ScenarioDistributions(self.N, self.support_A, self.support_B,
                                     self.support_AB, tuple(a.tolist()), tuple(b.tolist()))

    def swap(self) -> ScenarioDistributions:
        return ScenarioDistributions(self.N, self.support_B, self.support_A,
                                     self.support_AB, self.pmf_B, self.pmf_A)


@dataclass(frozen=True)
class ActionCountReport:
    A1: int          # PI: sampling subsets x all policies on bit patterns
    A2: int          # PII: scenario x sequence
    P_prime: int     # policies on patterns feasible in some scenario
    P_R: int         # permutation-invariant policies (functions of k)
    P_prime_R: int   # ... restricted to feasible k
    P_dprime: int    # policies on patterns feasible in both scenarios
    P_dprime_R: int  # permutation-invariant, on the common support only


def _intersect(a: range, b: range) -> range:
    lo, hi = max(a.start, b.start), min(a.stop, b.stop)
    return range(lo, max(lo, hi))


def hyper_support(N: int, K: int, M: int) -> range:
    return range(max(0, N - (M - K)), min(K, N) + 1)


def _hyper_pmf(N: int, K: int, M: int) -> tuple:
    total = math.comb(M, N)
    return tuple(Fraction(math.comb(K, k) * math.comb(M - K, N - k), total)
                 for k in range(N + 1))


def hypergeom_pmfs(spec: GameSpec) -> ScenarioDistributions:
    N, M = spec.N, spec.M
    sA, sB = hyper_support(N, spec.K_A, M), hyper_support(N, spec.K_B, M)
    return ScenarioDistributions(N, sA, sB, _intersect(sA, sB),
                                 _hyper_pmf(N, spec.K_A, M), _hyper_pmf(N, spec.K_B, M))


def _check_fraction(x) -> float:
    try:
        xf = float(x)
    except (TypeError, ValueError):
        raise InvalidFraction(f"not a number: {x!r}") from None
    if not (0.0 < xf < 1.0):
        raise InvalidFraction(f"fraction must lie in (0,1), got {x!r}")
    return xf


def binom_pmfs(N: int, x_A, x_B) -> ScenarioDistributions:
    xa, xb = _check_fraction(x_A), _check_fraction(x_B)
    if N < 0:
        raise InvalidSpec(f"N must be >= 0, got {N}")
    ks = np.arange(N + 1)
    full = range(0, N + 1)
    return ScenarioDistributions(N, full, full, full,
                                 tuple(binom.pmf(ks, N, xa).tolist()),
                                 tuple(binom.pmf(ks, N, xb).tolist()))


def classify(spec: GameSpec) -> GameClass:
    if spec.K_A == spec.K_B or spec.N == 0:
        return GameClass.BLIND
    sA = hyper_support(spec.N, spec.K_A, spec.M)
    sB = hyper_support(spec.N, spec.K_B, spec.M)
    if not _intersect(sA, sB):
        return GameClass.SURE
    return GameClass.NONTRIVIAL


def action_counts(spec: GameSpec) -> ActionCountReport:
    N, M = spec.N, spec.M
    sA, sB = hyper_support(N, spec.K_A, M), hyper_support(N, spec.K_B, M)
    sAB = _intersect(sA, sB)
    union = set(sA) | set(sB)
    return ActionCountReport(
        A1=math.comb(M, N) * 2 ** (2 ** N),
        A2=math.comb(M, spec.K_A) + math.comb(M, spec.K_B),
        P_prime=2 ** sum(math.comb(N, k) for k in union),
        P_R=2 ** (N + 1),
        P_prime_R=2 ** len(union),
        P_dprime=2 ** sum(math.comb(N, k) for k in sAB),
        P_dprime_R=2 ** len(sAB),
    )


def tv_distance(p: Sequence, q: Sequence) -> float:
    return 0.5 * math.fsum(abs(float(a) - float(b)) for a, b in zip(p, q))


def tv_distance_hyper_binom(spec: GameSpec, scenario: str = "A") -> float:
    """Total variation between Hypergeom(N,K,M) and Binom(N,K/M).

    Checks the bracket (N-1)/(28(M-1)) <= TV <= (N-1)/(M-1); the lower end is
    only meaningful for a non-degenerate urn (0 < K < M).
    """
    if scenario not in ("A", "B"):
        raise InvalidSpec(f"scenario must be 'A' or 'B', got {scenario!r}")
    if spec.M < 2:
        raise InvalidSpec("need M >= 2")
    N, M = spec.N, spec.M
    K = spec.K_A if scenario == "A" else spec.K_B
    hyp = _hyper_pmf(N, K, M)
    x = Fraction(K, M)
    bino = [math.comb(N, k) * x ** k * (1 - x) ** (N - k) for k in range(N + 1)]
    tv = float(sum(abs(h - b) for h, b in zip(hyp, bino)) / 2)
    upper = max(N - 1, 0) / (M - 1)
    lower = upper / 28
    if tv > upper * (1 + 1e-12):
        raise BoundViolation(f"TV {tv} above (N-1)/(M-1) = {upper}")
    if 0 < K < M and tv < lower * (1 - 1e-12):
        raise BoundViolation(f"TV {tv} below (N-1)/(28(M-1)) = {lower}")
    return tv
