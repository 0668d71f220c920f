"""Symmetric equilibrium of Fisher (win/lose) guessing games.

PI samples N of the M positions, counts the ones (k) and guesses the
scenario with a threshold rule: A below k*, B above, and A with probability
nu* exactly at k*.  PII picks scenario A with probability P* and a uniformly
random sequence of that scenario.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .dist import (
    GameClass,
    GameSpec,
    classify,
    hypergeom_pmfs,
    _check_fraction,
)
from .errors import BoundViolation, Degenerate

SCAR_TOL = 1e-12


@dataclass(frozen=True)
class FisherEquilibrium:
    game_class: GameClass
    N: int
    v_star: object
    k_star: int | None = None
    nu_star: object = None
    P_star: object = None
    s_star: object = None
    prior_interval: tuple | None = None
    swapped: bool = False

    @property
    def exact(self) -> bool:
        return isinstance(self.v_star, (Fraction, int))

    def as_dict(self) -> dict:
        return {
            "class": self.game_class.value,
            "k_star": self.k_star,
            "nu_star": self.nu_star,
            "P_star": self.P_star,
            "v_star": self.v_star,
            "s_star": self.s_star,
            "prior_interval": list(self.prior_interval) if self.prior_interval else None,
            "swapped": self.swapped,
        }


def _sum(xs):
    xs = list(xs)
    if xs and isinstance(xs[0], float):
        return math.fsum(xs)
    return sum(xs, Fraction(0))


def _threshold(pA: Sequence, pB: Sequence):
    """Smallest k with sum_{j<=k}(pA+pB) > 1."""
    acc = 0
    for k in range(len(pA)):
        acc += pA[k] + pB[k]
        if acc > 1:
            return k
    return len(pA) - 1


def _nu(pA, pB, k):
    return (_sum(pB[k:]) - _sum(pA[:k])) / (pA[k] + pB[k])


def _value_at(pA, pB, k):
    a, b = pA[k], pB[k]
    return (a * _sum(pB[k:]) + b * _sum(pA[:k])) / (a + b)


def _solve_core(pA, pB, N, game_class, swapped, exact) -> FisherEquilibrium:
    k = _threshold(pA, pB)
    nu = _nu(pA, pB, k)
    if not exact:
        # float rounding can land on either side of a scar
        if nu > 1 - SCAR_TOL and k + 1 <= N:
            k += 1
            nu = _nu(pA, pB, k)
        if abs(nu) < SCAR_TOL:
            nu = 0.0
    P = pB[k] / (pA[k] + pB[k])
    v = _value_at(pA, pB, k)
    interval = None
    if nu == 0 and k > 0 and (pA[k - 1] + pB[k - 1]) > 0:
        interval = (pB[k - 1] / (pA[k - 1] + pB[k - 1]), P)
    s = (k + nu) / (N + 1)
    return FisherEquilibrium(game_class, N, v, k, nu, P, s, interval, swapped)


def _shell(game_class, N, swapped, exact) -> FisherEquilibrium:
    one = Fraction(1) if exact else 1.0
    if game_class is GameClass.BLIND:
        return FisherEquilibrium(game_class, N, one / 2, P_star=one / 2, swapped=swapped)
    return FisherEquilibrium(game_class, N, one, swapped=swapped)


def solve_fisher(spec: GameSpec) -> FisherEquilibrium:
    cls = classify(spec)
    canon = spec.canonical()
    if cls is not GameClass.NONTRIVIAL:
        return _shell(cls, spec.N, spec.swapped, True)
    d = hypergeom_pmfs(canon)
    return _solve_core(d.pmf_A, d.pmf_B, spec.N, cls, spec.swapped, True)


def winning_rate_curve(spec: GameSpec) -> dict:
    """v(k) for every threshold k in the common support.

    v(k) is what PI wins with a best response when PII uses the prior that
    makes PI indifferent at k; PII therefore picks the smallest, and v* is
    the minimum of the curve (attained first at k*, or at k*-1 and k* when
    nu* = 0).
    """
    if classify(spec) is not GameClass.NONTRIVIAL:
        raise Degenerate(f"{spec.astuple()} is not a Nontrivial game")
    d = hypergeom_pmfs(spec.canonical())
    return {k: _value_at(d.pmf_A, d.pmf_B, k) for k in d.support_AB}


def _strong_medians(pmf) -> list[int]:
    out, below = [], Fraction(0)
    total = _sum(pmf)
    for c, p in enumerate(pmf):
        le = below + p
        if 2 * le >= total and 2 * (total - below) >= total:
            out.append(c)
        below = le
    return out


def median_bounds(spec: GameSpec) -> tuple[int, int]:
    """Strong medians (m_A, m_B) bracketing k*.

    Medians need not be unique; the lower strong median is reported for
    both scenarios.  At nu*=0 the comparison is made
    against k*-1, i.e. the nu in (0,1] convention that the median reading
    implies.
    """
    if classify(spec) is not GameClass.NONTRIVIAL:
        raise Degenerate(f"{spec.astuple()} is not a Nontrivial game")
    canon = spec.canonical()
    d = hypergeom_pmfs(canon)
    mA = min(_strong_medians(d.pmf_A))
    mB = min(_strong_medians(d.pmf_B))
    eq = solve_fisher(canon)
    k = eq.k_star - 1 if eq.nu_star == 0 else eq.k_star
    if not (mA <= k <= mB):
        raise BoundViolation(f"median bracket {mA} <= {k} <= {mB} fails")
    return mA, mB


def _solve_binomial(N: int, xa: float, xb: float, swapped: bool) -> FisherEquilibrium:
    """Float solve written in terms of tail probabilities.

    sum_{j<=k}(pA+pB) > 1 is evaluated as cdf_B(k) > sf_A(k): near k* both
    sides are small tails, which scipy computes to full relative precision,
    whereas the cumulative sum near 1 cannot resolve pmf values below eps.
    """
    ks = np.arange(N + 1)
    pA, pB = binom.pmf(ks, N, xa), binom.pmf(ks, N, xb)
    cdfA, cdfB = binom.cdf(ks, N, xa), binom.cdf(ks, N, xb)
    sfA, sfB = binom.sf(ks, N, xa), binom.sf(ks, N, xb)
    above = np.nonzero(cdfB > sfA)[0]
    k = int(above[0]) if len(above) else N

    def nu_at(k):
        # (sum_{j>=k} pB - sum_{j<k} pA)/(pA+pB) = (sf_A(k-1) - cdf_B(k-1))/(pA+pB)
        tailA = sfA[k] + pA[k]
        tailB = cdfB[k - 1] if k > 0 else 0.0
        return float((tailA - tailB) / (pA[k] + pB[k]))

    nu = nu_at(k)
    if nu > 1 - SCAR_TOL and k + 1 <= N:
        k += 1
        nu = nu_at(k)
    if abs(nu) < SCAR_TOL:
        nu = 0.0
    a, b = float(pA[k]), float(pB[k])
    P = b / (a + b)
    below_A = float(cdfA[k - 1]) if k > 0 else 0.0
    from_B = float(sfB[k - 1]) if k > 0 else 1.0
    v = (a * from_B + b * below_A) / (a + b)
    interval = None
    if nu == 0 and k > 0 and (pA[k - 1] + pB[k - 1]) > 0:
        interval = (float(pB[k - 1] / (pA[k - 1] + pB[k - 1])), P)
    return FisherEquilibrium(GameClass.NONTRIVIAL, N, v, k, nu, P, (k + nu) / (N + 1),
                             interval, swapped)


def binomial_fisher(N: int, x_A, x_B) -> FisherEquilibrium:
    xa, xb = _check_fraction(x_A), _check_fraction(x_B)
    swapped = xa > xb
    if xa == xb or N == 0:
        return _shell(GameClass.BLIND, N, swapped, False)
    if swapped:
        xa, xb = xb, xa
    return _solve_binomial(N, xa, xb, swapped)
