"""Equilibrium of Bayesian (logarithmic-utility) betting games.

PI splits its capital between the two scenarios after seeing k; with the
optimal splits p'_k the growth-rate difference ΔG(P) is a convex function of
PII's prior P, and the equilibrium prior P* is its unique minimiser.  All
solvers work in log-odds ϑ = log(P/(1-P)), where the stationarity condition
becomes the fixed-point equation ϑ = F(ϑ).

Every method returns a certified bound on |ϑ̂ - ϑ*|.  Float evaluation error
of F is accounted for with a small, deliberately pessimistic floor.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .dist import GameClass, GameSpec, ScenarioDistributions, classify, hypergeom_pmfs
from .errors import (
    Degenerate,
    DomainError,
    GuardNotMet,
    InvalidSpec,
    NoConvergence,
    NotContractive,
    SupportMismatch,
)

DEFAULT_TOL = 1e-10
LOG2 = math.log(2.0)
_EPS = np.finfo(float).eps


class Method(str, enum.Enum):
    BISECTION = "bisection"
    FIXED_POINT = "fixed_point"
    INTERVAL = "interval"
    NEWTON = "newton"
    RESTRICTED = "restricted"
    AUTO = "auto"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = 10_000
    method: Method = Method.AUTO

    def __post_init__(self):
        if not (self.tol > 0):
            raise InvalidSpec(f"tol must be > 0, got {self.tol!r}")
        if self.max_iter < 1:
            raise InvalidSpec("max_iter must be >= 1")
        object.__setattr__(self, "method", Method(self.method))


@dataclass(frozen=True)
class BettingEquilibrium:
    game_class: GameClass
    P_star: float | None
    theta_star: float | None
    splits: dict
    delta_G: float
    G_over_log2: float
    err_bound: float
    method: str | None
    iterations: int
    swapped: bool = False

    def as_dict(self) -> dict:
        return {
            "class": self.game_class.value,
            "P_star": self.P_star,
            "theta_star": self.theta_star,
            "delta_G": self.delta_G,
            "G_over_log2": self.G_over_log2,
            "err_bound": self.err_bound,
            "method": self.method,
            "iterations": self.iterations,
            "splits": {str(k): v for k, v in self.splits.items()},
            "swapped": self.swapped,
        }


# --- the function F and friends ---------------------------------------------

def _log_P(theta):
    return -np.logaddexp(0.0, -theta)


def _log_1mP(theta):
    return -np.logaddexp(0.0, theta)


class _Game:
    """Float view of a pair of pmfs restricted to the union support."""

    def __init__(self, d: ScenarioDistributions):
        pa, pb = d.arrays()
        ks = np.array(list(d.support), dtype=int)
        self.ks = ks
        self.pa, self.pb = pa[ks], pb[ks]
        with np.errstate(divide="ignore"):
            self.la, self.lb = np.log(self.pa), np.log(self.pb)
        self.dp = self.pa - self.pb
        self.half_lr = 0.5 * (self.la - self.lb)
        self.A_only = (self.pa > 0) & (self.pb == 0)
        self.B_only = (self.pb > 0) & (self.pa == 0)
        self.both = (self.pa > 0) & (self.pb > 0)
        self.same_support = bool(d.same_support)
        self.H_A = -math.fsum(self.pa[self.pa > 0] * self.la[self.pa > 0])
        self.H_B = -math.fsum(self.pb[self.pb > 0] * self.lb[self.pb > 0])
        self.dH = self.H_A - self.H_B
        self.q = 0.5 * math.fsum(np.abs(self.dp))
        self._scale = self.H_A + self.H_B + 1.0
        self._n = len(ks)

    def log_m(self, theta):
        return np.logaddexp(_log_P(theta) + self.la, _log_1mP(theta) + self.lb)

    def F(self, theta: float) -> float:
        t = 0.5 * theta
        return self.dH + float(np.dot(self.dp, np.logaddexp(t + self.la, -t + self.lb)))

    def F_prime(self, theta: float) -> float:
        return 0.5 * float(np.dot(self.dp, np.tanh(0.5 * theta + self.half_lr)))

    def _z(self, theta):
        with np.errstate(invalid="ignore"):
            return theta + self.la - self.lb

    def g_err(self, theta: float) -> tuple[float, float]:
        """ΔG' in log-odds, as ΔG_A - ΔG_B, with an evaluation-error bound.

        Written as Σ p_B softplus(z) - Σ p_A softplus(-z), z = ϑ + log(p_A/p_B):
        no cancellation even when the pmfs barely overlap (q rounds to 1).
        """
        z = self._z(theta)
        b, a = self.pb > 0, self.pa > 0
        tb = self.pb[b] * np.logaddexp(0.0, z[b])
        ta = self.pa[a] * np.logaddexp(0.0, -z[a])
        # z carries absolute error ~eps|z|, i.e. relative error ~eps|z| in each term
        zb, za = np.abs(z[b]), np.abs(z[a])
        zb[~np.isfinite(zb)] = 0.0
        za[~np.isfinite(za)] = 0.0
        err = 8 * _EPS * (1 + math.log2(self._n + 1)) * (
            float(np.dot(1 + zb, tb)) + float(np.dot(1 + za, ta)))
        return math.fsum(tb) - math.fsum(ta), err

    def g(self, theta: float) -> float:
        return self.g_err(theta)[0]

    def g_prime(self, theta: float) -> float:
        """1 - F'(ϑ), evaluated without cancellation."""
        z = self._z(theta)
        b, a = self.pb > 0, self.pa > 0
        return math.fsum(self.pb[b] * expit(z[b])) + math.fsum(self.pa[a] * expit(-z[a]))

    def floor(self, theta: float) -> float:
        """Pessimistic absolute error of one evaluation of F (or g)."""
        return 4 * _EPS * (self._scale + abs(theta)) * (1 + math.log2(self._n + 1))

    def kl(self):
        m = self.both
        ab = math.fsum(self.pa[m] * (self.la[m] - self.lb[m]))
        ba = math.fsum(self.pb[m] * (self.lb[m] - self.la[m]))
        return ab, ba


def _game(d) -> _Game:
    return d if isinstance(d, _Game) else _Game(d)


def _check_P(P) -> float:
    try:
        P = float(P)
    except (TypeError, ValueError):
        raise DomainError(f"P must be a number, got {P!r}") from None
    if not (0.0 < P < 1.0):
        raise DomainError(f"P must lie in (0,1), got {P}")
    return P


def _terms(P, G: _Game):
    lP, lQ = math.log(P), math.log1p(-P)
    lm = np.logaddexp(lP + G.la, lQ + G.lb)
    return lP, lQ, lm


def delta_G(P, d: ScenarioDistributions) -> float:
    """Growth-rate difference ΔG(P) with the optimal splits (= -H(Π|X))."""
    P = _check_P(P)
    G = _game(d)
    lP, lQ, lm = _terms(P, G)
    a, b = G.pa > 0, G.pb > 0
    ta = P * G.pa[a] * (lP + G.la[a] - lm[a])
    tb = (1 - P) * G.pb[b] * (lQ + G.lb[b] - lm[b])
    return math.fsum(np.concatenate([ta, tb]))


def delta_G_derivs(P, d: ScenarioDistributions) -> tuple[float, float]:
    P = _check_P(P)
    G = _game(d)
    lP, lQ, lm = _terms(P, G)
    first = G.g(lP - lQ)
    w = G.both
    second = math.fsum(np.exp(G.la[w] + G.lb[w] - lm[w])) / (P * (1 - P))
    if G.A_only.any() or G.B_only.any() or second == 0:
        # contributions of the support differences: they enter ΔG'' via 1/(P(1-P)) - Σ(Δp)^2/m
        second = max(second, 1 / (P * (1 - P)) - math.fsum(G.dp**2 * np.exp(-lm)))
    return first, second


def delta_G_scenarios(P, d: ScenarioDistributions) -> tuple[float, float]:
    """Per-scenario growth terms (ΔG_A, ΔG_B); equal at the equilibrium prior."""
    P = _check_P(P)
    G = _game(d)
    lP, lQ, lm = _terms(P, G)
    a, b = G.pa > 0, G.pb > 0
    gA = math.fsum(G.pa[a] * (lP + G.la[a] - lm[a]))
    gB = math.fsum(G.pb[b] * (lQ + G.lb[b] - lm[b]))
    return gA, gB


def F(theta: float, d) -> float:
    return _game(d).F(theta)


def F_prime(theta: float, d) -> float:
    return _game(d).F_prime(theta)


def tv_constant(d) -> float:
    """Contraction constant q of F: total variation between the pmfs."""
    return _game(d).q


# --- results ---------------------------------------------------------------

@dataclass(frozen=True)
class BisectionResult:
    theta: float
    err_bound: float
    iterations: int
    bracket: tuple


@dataclass(frozen=True)
class FixedPointResult:
    theta: float
    err_bound: float
    q: float
    iterations: int
    steps: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class IntervalResult:
    lower: float
    upper: float
    iterations: int
    history: list = field(default_factory=list, repr=False)

    @property
    def theta(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def err_bound(self) -> float:
        return 0.5 * (self.upper - self.lower)


@dataclass(frozen=True)
class NewtonResult:
    theta: float
    lower: float
    upper: float
    iterations: int
    residuals: list = field(default_factory=list, repr=False)

    @property
    def err_bound(self) -> float:
        return max(self.theta - self.lower, self.upper - self.theta)


@dataclass(frozen=True)
class RestrictedResult:
    chi: float
    theta: float
    err_bound: float
    iterations: int
    contraction: float
    fallback: bool = False


# --- methods -----------------------------------------------------------------

def _bracket(G: _Game, limit: float = 2.0**64):
    lo, hi = -1.0, 1.0
    while G.g(lo) > 0:
        hi, lo = lo, 2 * lo
        if lo < -limit:
            raise NoConvergence("no sign change of ΔG' found below")
    while G.g(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > limit:
            raise NoConvergence("no sign change of ΔG' found above")
    return lo, hi


def _reliable_bracket(G: _Game, lo: float, hi: float):
    """Widen [lo, hi] outward until both end signs exceed their rounding error."""
    width = max(hi - lo, 8 * _EPS * max(1.0, abs(lo), abs(hi)))
    step = width
    for _ in range(2100):
        g, e = G.g_err(lo)
        if g < -e:
            break
        lo -= step
        step *= 2
    else:
        raise NoConvergence("cannot certify the lower end of the bracket")
    step = width
    for _ in range(2100):
        g, e = G.g_err(hi)
        if g > e:
            break
        hi += step
        step *= 2
    else:
        raise NoConvergence("cannot certify the upper end of the bracket")
    return lo, hi


def method_bisection(d, tol: float = DEFAULT_TOL, max_iter: int = 400) -> BisectionResult:
    G = _game(d)
    lo, hi = _bracket(G)
    it = 0
    while True:
        it += 1
        mid = 0.5 * (lo + hi)
        gm = G.g(mid)
        if gm == 0:
            lo = hi = mid
        elif gm < 0:
            lo = mid
        else:
            hi = mid
        half = 0.5 * (hi - lo)
        stuck = not (lo < 0.5 * (lo + hi) < hi)
        if half <= tol or stuck:
            theta = 0.5 * (lo + hi)
            if half == 0 and G.g_err(theta)[1] == 0:
                return BisectionResult(theta, 0.0, it, (lo, hi))
            # signs within rounding error of zero prove nothing: widen until they do
            clo, chi = _reliable_bracket(G, lo, hi)
            return BisectionResult(theta, max(theta - clo, chi - theta), it, (clo, chi))
        if it >= max_iter:
            raise NoConvergence(f"bisection: half-width {half:g} > tol after {it} steps")


def method_fixed_point(d, tol: float = DEFAULT_TOL, max_iter: int = 10_000) -> FixedPointResult:
    G = _game(d)
    q = G.q
    if q >= 1:
        raise NotContractive(f"F is not a contraction (q = {q:g}); supports are disjoint")
    theta, steps = 0.0, []
    for it in range(1, max_iter + 1):
        nxt = G.F(theta)
        step = abs(nxt - theta)
        steps.append(step)
        theta = nxt
        err = (step + G.floor(theta)) / (1 - q)
        if err <= tol:
            return FixedPointResult(theta, err, q, it, steps)
    raise NoConvergence(f"fixed point: bound {err:g} > tol after {max_iter} steps")


def method_interval(d, tol: float = DEFAULT_TOL, max_iter: int = 10_000) -> IntervalResult:
    """Shrinking intervals F_{n+1} = F(F_n) ∩ F_n, starting from the KL pair."""
    G = _game(d)
    if not G.same_support:
        raise SupportMismatch("interval iteration needs identical supports")
    q, Q = G.q, 0.5 * G.q
    kl_ab, kl_ba = G.kl()
    lo, hi = -kl_ab, kl_ba
    history = [(lo, hi)]
    it = 1
    while 0.5 * (hi - lo) > tol:
        if it >= max_iter:
            raise NoConvergence(f"interval: width {hi - lo:g} after {it} steps")
        fa, fb = G.F_prime(lo), G.F_prime(hi)
        if fa * fb > 0 and abs(fa) + abs(fb) > Q * (hi - lo):
            # F' keeps one sign on [lo, hi] since |F''| <= q/2
            ya, yb = G.F(lo), G.F(hi)
            ilo, ihi = min(ya, yb), max(ya, yb)
        else:
            mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
            fm = G.F(mid)
            ilo, ihi = fm - q * rad, fm + q * rad
        fl = G.floor(max(abs(lo), abs(hi)))
        nlo, nhi = max(lo, ilo - fl), min(hi, ihi + fl)
        it += 1
        if nhi - nlo >= hi - lo:
            raise NoConvergence(f"interval stalled at width {hi - lo:g} (rounding floor)")
        lo, hi = nlo, nhi
        history.append((lo, hi))
    return IntervalResult(lo, hi, it, history)


def _newton_bounds(G: _Game, x: float, gx: float, a: float, Q: float):
    """Interval for ϑ* - x from |g''| <= Q, valid when 2Q|g(x)| <= a^2."""
    r = abs(gx)
    if r == 0:
        return 0.0, 0.0
    z = 2 * Q * r / (a * a)
    near = 2 * r / (a * (1 + math.sqrt(1 + z)))
    far = 2 * r / (a * (1 + math.sqrt(max(1 - z, 0.0))))
    return (-far, -near) if gx > 0 else (near, far)


def method_newton(d, tol: float = DEFAULT_TOL, max_iter: int = 500) -> NewtonResult:
    """Safeguarded Newton on g(ϑ) = ϑ - F(ϑ) with two-sided error bounds.

    Bisection steps are taken until the guard 2Q|g| <= (1 - F')^2 holds;
    the bracket is kept throughout so a wild Newton step falls back to a
    midpoint.
    """
    G = _game(d)
    Q = 0.5 * G.q
    lo, hi = _bracket(G)
    x = 0.5 * (lo + hi)
    residuals, guarded = [], False
    for it in range(1, max_iter + 1):
        gx, ex = G.g_err(x)
        a = G.g_prime(x)
        if gx < 0:
            lo = x
        elif gx > 0:
            hi = x
        if 2 * Q * abs(gx) <= a * a:
            guarded = True
            residuals.append(abs(gx))
            d_lo, d_hi = _newton_bounds(G, x, gx, a, Q)
            fl = ex / a
            lower, upper = x + d_lo - fl, x + d_hi + fl
            if max(x - lower, upper - x) <= tol:
                return NewtonResult(x, float(lower), float(upper), it, residuals)
            xn = x - gx / a
            if not (lo < xn < hi) or xn == x:
                xn = 0.5 * (lo + hi)
        else:
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
    if not guarded:
        raise GuardNotMet(f"Newton guard never held in {max_iter} steps")
    raise NoConvergence(f"Newton did not reach tol={tol:g}")


class _Restricted:
    def __init__(self, G: _Game):
        w = G.both
        self.G = G
        self.ZA = math.fsum(G.pa[w])
        self.ZB = math.fsum(G.pb[w])
        self.s = math.sqrt(self.ZA / self.ZB)
        self.norm = math.sqrt(self.ZA * self.ZB)
        hA = -math.fsum(G.pa[w] * G.la[w])
        hB = -math.fsum(G.pb[w] * G.lb[w])
        self.dH = hA - hB
        self.w = w

    def chi(self, theta: float) -> float:
        return float(self.s * _log_P(theta) - _log_1mP(theta) / self.s)

    def dchi(self, theta: float) -> float:
        P = float(expit(theta))
        return self.s * (1 - P) + P / self.s

    def theta(self, chi: float) -> float:
        lo, hi = -1.0, 1.0
        while self.chi(lo) > chi:
            lo *= 2
        while self.chi(hi) < chi:
            hi *= 2
        return brentq(lambda t: self.chi(t) - chi, lo, hi, xtol=1e-300, rtol=4 * _EPS, maxiter=500)

    def F(self, theta: float) -> float:
        G, w = self.G, self.w
        lm = G.log_m(theta)[w]
        return (self.dH + float(np.dot(G.dp[w], lm))) / self.norm


def _certify(G: _Game, theta: float, start: float, tol: float):
    """Smallest δ = start·2^j <= tol with a certified sign change of ΔG' on ϑ̂ ± δ."""
    delta = max(start, 8 * _EPS * max(1.0, abs(theta)))
    while delta <= tol:
        lo, elo = G.g_err(theta - delta)
        hi, ehi = G.g_err(theta + delta)
        if lo < -elo and hi > ehi:
            return delta
        delta *= 2
    return None


def method_restricted(d, tol: float = DEFAULT_TOL, max_iter: int = 10_000) -> RestrictedResult:
    """Fixed point of the restricted map F̆ in the variable χ.

    Contraction of F̆ is checked step by step, not assumed: an expanding step
    switches to bisection (reported through ``fallback``).  The final ϑ̂ is
    certified by a sign change of ΔG' on ϑ̂ ± err_bound.
    """
    G = _game(d)
    if not G.both.any():
        raise Degenerate("restricted iteration needs a common support")
    R = _Restricted(G)
    theta = 0.0
    chi = R.chi(theta)
    prev_step, rho = None, 0.0
    for it in range(1, max_iter + 1):
        nxt = R.F(theta)
        step = abs(nxt - chi)
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
            if ratio >= 1 and step > 1e3 * G.floor(theta):
                break
            rho = max(rho, min(ratio, 1.0))
        chi, prev_step = nxt, step
        theta = R.theta(chi)
        if it >= 2 and rho < 1:
            est = step * max(rho, 0.5) / (1 - rho) / R.dchi(theta)
            if est <= tol:
                delta = _certify(G, theta, est, tol)
                if delta is not None:
                    return RestrictedResult(chi, theta, delta, it, rho)
    b = method_bisection(G, tol)
    return RestrictedResult(R.chi(b.theta), b.theta, b.err_bound, b.iterations, rho, True)


# --- solver ------------------------------------------------------------------

def _run(G: _Game, cfg: SolverConfig):
    m, tol, n = cfg.method, cfg.tol, cfg.max_iter
    if m is Method.BISECTION:
        r = method_bisection(G, tol, min(n, 2000))
        return r.theta, r.err_bound, "bisection", r.iterations
    if m is Method.FIXED_POINT:
        r = method_fixed_point(G, tol, n)
        return r.theta, r.err_bound, "fixed_point", r.iterations
    if m is Method.INTERVAL:
        r = method_interval(G, tol, n)
        return r.theta, r.err_bound, "interval", r.iterations
    if m is Method.NEWTON:
        r = method_newton(G, tol, min(n, 2000))
        return r.theta, r.err_bound, "newton", r.iterations
    if m is Method.RESTRICTED:
        r = method_restricted(G, tol, n)
        return r.theta, r.err_bound, "bisection" if r.fallback else "restricted", r.iterations
    # Auto
    primary = Method.FIXED_POINT if G.same_support else Method.RESTRICTED
    for method in (primary, Method.NEWTON):
        try:
            return _run(G, SolverConfig(tol, n, method))
        except (NoConvergence, NotContractive):
            pass
    return _run(G, SolverConfig(tol, n, Method.BISECTION))


def solve_distributions(d: ScenarioDistributions, cfg: SolverConfig | None = None,
                        game_class: GameClass = GameClass.NONTRIVIAL,
                        swapped: bool = False) -> BettingEquilibrium:
    """Equilibrium for an arbitrary pair of pmfs with a common support."""
    cfg = cfg or SolverConfig()
    G = _game(d.as_float())
    if not G.both.any():
        raise Degenerate("pmfs have no common support")
    theta, err, method, iters = _run(G, cfg)
    if err > cfg.tol:
        raise NoConvergence(f"certified bound {err:g} exceeds tol={cfg.tol:g} (rounding floor)")
    P = float(expit(theta))
    lP, lQ = float(_log_P(theta)), float(_log_1mP(theta))
    lm = np.logaddexp(lP + G.la, lQ + G.lb)
    split = np.exp(lP + G.la - lm)
    split[G.A_only] = 1.0
    split[G.B_only] = 0.0
    splits = {int(k): float(s) for k, s in zip(G.ks, split)}
    dG = delta_G(P, G)
    return BettingEquilibrium(game_class, P, theta, splits, dG, (dG + LOG2) / LOG2,
                              err, method, iters, swapped)


def solve_bayes(spec: GameSpec, cfg: SolverConfig | None = None) -> BettingEquilibrium:
    cls = classify(spec)
    d = hypergeom_pmfs(spec.canonical())
    if cls is GameClass.BLIND:
        splits = {k: 0.5 for k in d.support}
        return BettingEquilibrium(cls, 0.5, 0.0, splits, -LOG2, 0.0, 0.0, None, 0, spec.swapped)
    if cls is GameClass.SURE:
        splits = {k: 1.0 for k in d.support_A}
        splits.update({k: 0.0 for k in d.support_B})
        return BettingEquilibrium(cls, None, None, dict(sorted(splits.items())), 0.0, 1.0,
                                  0.0, None, 0, spec.swapped)
    return solve_distributions(d, cfg, cls, spec.swapped)
