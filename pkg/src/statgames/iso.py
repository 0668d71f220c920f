"""Isoelastic (constant relative risk aversion) Statistical games.

PI maximises the expected isoelastic utility u_γ(c) = (c^{1-γ} - 1)/(1-γ)
of the capital fraction it keeps; γ -> 0 recovers the Fisher game, γ = 1
the Bayesian one.  Also home to the generalized entropies that the
equilibrium prior maximises.

Powers p^{1/γ} are always taken in log space so that γ = 1e-3 (or 1e3)
neither overflows nor underflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, logsumexp

from . import bayes
from .dist import GameClass, GameSpec, classify, hypergeom_pmfs
from .errors import Degenerate, DomainError, NoConvergence, NotNormalized, SupportViolation
from .fisher import solve_fisher

DEFAULT_TOL = 1e-10
NORM_TOL = 1e-12


def _check_gamma(gamma) -> float:
    g = float(gamma)
    if not (g > 0) or not math.isfinite(g):
        raise DomainError(f"gamma must be a finite positive number, got {gamma!r}")
    return g


def _u_log(logc, g):
    """u_γ evaluated from log c, stable near γ = 1."""
    if g == 1.0:
        return logc
    with np.errstate(over="ignore", invalid="ignore"):
        return np.expm1((1 - g) * logc) / (1 - g)


def utility(c, gamma) -> float:
    g = _check_gamma(gamma)
    c = float(c)
    if not (0.0 <= c <= 1.0):
        raise DomainError(f"capital fraction must lie in [0,1], got {c}")
    if c == 0.0:
        return -math.inf if g >= 1 else -1.0 / (1 - g)
    return float(_u_log(math.log(c), g))


# --- expected utility and equilibrium ----------------------------------------

class _Iso:
    def __init__(self, d, gamma):
        self.d = d
        self.g = gamma
        G = bayes._Game(d.as_float())
        self.G = G
        self.la, self.lb = G.la, G.lb
        self.pa, self.pb = G.pa, G.pb

    def log_splits(self, theta):
        """(log p'_k, log(1-p'_k)) with p'_k = expit((ϑ + log pA - log pB)/γ)."""
        with np.errstate(invalid="ignore"):
            z = (theta + self.la - self.lb) / self.g
        z = np.where(np.isnan(z), 0.0, z)
        return -np.logaddexp(0.0, -z), -np.logaddexp(0.0, z)

    def log_S(self, theta):
        ls, lt = self.log_splits(theta)
        a, b = self.pa > 0, self.pb > 0
        lSA = logsumexp(self.la[a] + (1 - self.g) * ls[a])
        lSB = logsumexp(self.lb[b] + (1 - self.g) * lt[b])
        return lSA, lSB

    def sign(self, theta) -> float:
        """Sign of dU/dP = U_A - U_B = (S_A - S_B)/(1-γ)."""
        lSA, lSB = self.log_S(theta)
        return math.copysign(1.0, 1 - self.g) * (lSA - lSB)

    def U(self, P) -> float:
        theta = math.log(P) - math.log1p(-P)
        ls, lt = self.log_splits(theta)
        a, b = self.pa > 0, self.pb > 0
        ua = self.pa[a] * _u_log(ls[a], self.g)
        ub = self.pb[b] * _u_log(lt[b], self.g)
        return P * math.fsum(ua) + (1 - P) * math.fsum(ub)

    def Phi(self, theta) -> float:
        g = self.g
        t = theta / (2 * g)
        with np.errstate(divide="ignore"):
            la_g, lb_g = self.la / g, self.lb / g
        log_a = np.logaddexp(t + la_g, -t + lb_g)
        a, b = self.pa > 0, self.pb > 0
        num = logsumexp(la_g[a] - (1 - g) * log_a[a])
        den = logsumexp(lb_g[b] - (1 - g) * log_a[b])
        return -g / (1 - g) * (num - den)


def _check_P(P) -> float:
    P = float(P)
    if not (0.0 < P < 1.0):
        raise DomainError(f"P must lie in (0,1), got {P}")
    return P


def expected_utility(P, d, gamma) -> float:
    """U_γ(P) with the P-optimal splits; equals -H^EU_γ[Π|X]."""
    P = _check_P(P)
    g = _check_gamma(gamma)
    if g == 1.0:
        return bayes.delta_G(P, d)
    return _Iso(d, g).U(P)


def Phi(theta: float, d, gamma) -> float:
    g = _check_gamma(gamma)
    if g == 1.0:
        return bayes.F(theta, d)
    return _Iso(d, g).Phi(theta)


def lambda_bar(d) -> float:
    """½(max - min) of log(p_k(A)/p_k(B)) over the common support."""
    G = bayes._Game(d.as_float())
    if not G.both.any():
        raise Degenerate("no common support")
    r = (G.la - G.lb)[G.both]
    return 0.5 * float(r.max() - r.min())


def contraction_bound(d, gamma) -> float | None:
    """Global Lipschitz constant of Φ, or None when the supports differ."""
    g = _check_gamma(gamma)
    if not d.same_support:
        return None
    return math.tanh(lambda_bar(d) / (2 * g))


@dataclass(frozen=True)
class IsoEquilibrium:
    game_class: GameClass
    gamma: float
    P_star: float | None
    theta_star: float | None
    splits: dict
    U_star: float
    err_bound: float
    contraction_bound: float | None
    method: str | None
    iterations: int = 0
    swapped: bool = False

    def as_dict(self) -> dict:
        return {
            "class": self.game_class.value,
            "gamma": self.gamma,
            "P_star": self.P_star,
            "theta_star": self.theta_star,
            "U_star": self.U_star,
            "err_bound": self.err_bound,
            "contraction_bound": self.contraction_bound,
            "method": self.method,
            "iterations": self.iterations,
            "splits": {str(k): v for k, v in self.splits.items()},
            "swapped": self.swapped,
        }


def _bisect_sign(I: _Iso, tol: float, max_iter: int = 2000):
    lo, hi = -1.0, 1.0
    while I.sign(lo) > 0:
        hi, lo = lo, 2 * lo
        if lo < -1e6:
            raise NoConvergence("no sign change of U_A - U_B below")
    while I.sign(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise NoConvergence("no sign change of U_A - U_B above")
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        s = I.sign(mid)
        if s == 0:
            return mid, 0.0, it
        if s < 0:
            lo = mid
        else:
            hi = mid
        if 0.5 * (hi - lo) <= tol or not (lo < 0.5 * (lo + hi) < hi):
            return 0.5 * (lo + hi), 0.5 * (hi - lo), it
    raise NoConvergence("bisection on U_A - U_B did not converge")


def _iterate_phi(I: _Iso, L: float, tol: float, max_iter: int):
    theta = 0.0
    for it in range(1, max_iter + 1):
        nxt = I.Phi(theta)
        step = abs(nxt - theta)
        theta = nxt
        err = L / (1 - L) * step + 1e-15 * (1 + abs(theta)) / (1 - L)
        if err <= tol:
            return theta, err, it
    raise NoConvergence(f"Φ iteration: bound {err:g} after {max_iter} steps")


def solve_iso(spec: GameSpec, gamma=None, tol: float = DEFAULT_TOL,
              max_iter: int = 5000) -> IsoEquilibrium:
    """Equilibrium prior and splits of the isoelastic game.

    With identical supports Φ is iterated (Banach bound L/(1-L)·|step|);
    otherwise, or if that is too slow, the sign of dU/dP is bisected in ϑ —
    U_γ is convex in P, so this finds its unique minimiser.
    """
    g = _check_gamma(spec.gamma if gamma is None else gamma)
    cls = classify(spec)
    d = hypergeom_pmfs(spec.canonical())
    if cls is GameClass.BLIND:
        return IsoEquilibrium(cls, g, 0.5, 0.0, {k: 0.5 for k in d.support},
                              utility(0.5, g), 0.0, None, None, 0, spec.swapped)
    if cls is GameClass.SURE:
        splits = {k: 1.0 for k in d.support_A}
        splits.update({k: 0.0 for k in d.support_B})
        return IsoEquilibrium(cls, g, None, None, dict(sorted(splits.items())), 0.0, 0.0,
                              None, None, 0, spec.swapped)
    return solve_iso_distributions(d, g, tol, max_iter, cls, spec.swapped)


def solve_iso_distributions(d, gamma, tol=DEFAULT_TOL, max_iter=5000,
                            game_class=GameClass.NONTRIVIAL, swapped=False) -> IsoEquilibrium:
    g = _check_gamma(gamma)
    if g == 1.0:
        eq = bayes.solve_distributions(d, bayes.SolverConfig(tol=tol), game_class, swapped)
        L = contraction_bound(d, 1.0)
        return IsoEquilibrium(game_class, g, eq.P_star, eq.theta_star, eq.splits, eq.delta_G,
                              eq.err_bound, L, f"bayes/{eq.method}", eq.iterations, swapped)
    I = _Iso(d, g)
    L = contraction_bound(d, g)
    theta = None
    if L is not None and L < 1:
        try:
            theta, err, it = _iterate_phi(I, L, tol, max_iter)
            method = "phi"
        except NoConvergence:
            theta = None
    if theta is None:
        theta, err, it = _bisect_sign(I, tol)
        method = "bisection"
    P = float(expit(theta))
    ls, _ = I.log_splits(theta)
    splits = {int(k): float(np.exp(s)) for k, s in zip(I.G.ks, ls)}
    return IsoEquilibrium(game_class, g, P, theta, splits, I.U(P), err, L, method, it, swapped)


# --- small-γ limit -----------------------------------------------------------

@dataclass(frozen=True)
class UnificationReport:
    gammas: list
    P_stars: list
    splits: list        # p'_{γ,k*}
    P0: float           # Fisher P*
    nu: float           # Fisher ν*
    k_star: int
    max_dev_P: float
    max_dev_split: float
    slope_fit: float
    slope_expected: float


def gamma_to_zero_check(spec: GameSpec, gamma_grid) -> UnificationReport:
    """Compare isoelastic equilibria on a decreasing γ grid with the Fisher one.

    The slope of ϑ*(γ) at 0 is estimated from (ϑ*(γ) - ϑ*_0)/γ with one
    Richardson step over the last two grid points.
    """
    canon = GameSpec(*spec.canonical().astuple())
    f = solve_fisher(canon)
    if f.game_class is not GameClass.NONTRIVIAL or f.nu_star == 0:
        raise Degenerate("needs a Nontrivial game with ν* != 0")
    gammas = sorted((float(x) for x in gamma_grid), reverse=True)
    P0, nu, k = float(f.P_star), float(f.nu_star), f.k_star
    theta0 = math.log(P0 / (1 - P0))
    Ps, sp, slopes = [], [], []
    for g in gammas:
        eq = solve_iso(canon, g, tol=1e-13)
        Ps.append(eq.P_star)
        sp.append(eq.splits[k])
        slopes.append((eq.theta_star - theta0) / g)
    if len(gammas) >= 2:
        g1, g2 = gammas[-2], gammas[-1]
        slope = (g1 * slopes[-1] - g2 * slopes[-2]) / (g1 - g2)
    else:
        slope = slopes[-1]
    return UnificationReport(
        gammas, Ps, sp, P0, nu, k,
        max(abs(p - P0) for p in Ps), max(abs(s - nu) for s in sp),
        slope, math.log(nu / (1 - nu)),
    )


# --- entropies ---------------------------------------------------------------

def _prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if (p < 0).any() or abs(p.sum() - 1.0) > NORM_TOL * max(1, len(p)):
        raise NotNormalized(f"probabilities must be >= 0 and sum to 1 (sum={p.sum()!r})")
    return p


def _shannon(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _order(a) -> float:
    a = float(a)
    if not (a > 0) or not math.isfinite(a):
        raise DomainError(f"order must be a finite positive number, got {a!r}")
    return a


def _log_power_sum(p: np.ndarray, a: float) -> float:
    p = p[p > 0]
    return float(logsumexp(a * np.log(p)))


def entropy_eu(p, gamma) -> float:
    """H^EU_γ(p) = (1 - ||p||_{1/γ})/(1-γ); Shannon at γ = 1."""
    g = _check_gamma(gamma)
    p = _prob(p)
    if g == 1.0:
        return _shannon(p)
    log_norm = g * _log_power_sum(p, 1 / g)
    return float(-np.expm1(log_norm) / (1 - g))


def entropy_renyi(p, alpha) -> float:
    """Rényi entropy of order α (Shannon at α = 1)."""
    a = _order(alpha)
    p = _prob(p)
    if a == 1.0:
        return _shannon(p)
    return _log_power_sum(p, a) / (1 - a)


def entropy_tsallis(p, q) -> float:
    """Tsallis entropy (Σ p^q - 1)/(1 - q) (Shannon at q = 1)."""
    q = _order(q)
    p = _prob(p)
    if q == 1.0:
        return _shannon(p)
    return float(np.expm1(_log_power_sum(p, q)) / (1 - q))


def _joint(joint) -> np.ndarray:
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2:
        raise DomainError("joint pmf must be a 2-D array (rows: x, columns: y)")
    _prob(j)
    return j


def conditional_eu(joint, gamma) -> float:
    """H^EU_γ[Y|X] = Σ_x p(x) H^EU_γ(Y | X = x)."""
    g = _check_gamma(gamma)
    j = _joint(joint)
    total = 0.0
    for row in j:
        px = row.sum()
        if px > 0:
            total += px * entropy_eu(row / px, g)
    return total


def conditional_renyi(joint, alpha) -> float:
    a = _order(alpha)
    j = _joint(joint)
    return sum(r.sum() * entropy_renyi(r / r.sum(), a) for r in j if r.sum() > 0)


def conditional_tsallis(joint, q) -> float:
    """(S_q(X,Y) - S_q(X)) / (1 + (1-q) S_q(X))."""
    q = _order(q)
    j = _joint(joint)
    if q == 1.0:
        return _shannon(j.ravel()) - _shannon(j.sum(axis=1))
    log_ratio = _log_power_sum(j.ravel(), q) - _log_power_sum(j.sum(axis=1), q)
    return float(np.expm1(log_ratio) / (1 - q))


def divergence_eu(p, q, gamma) -> float:
    """D^γ_EU(p||q) = γ/(1-γ) log Σ q (p/q)^{1/γ}; Rényi divergence of order 1/γ."""
    g = _check_gamma(gamma)
    p, q = _prob(p), _prob(q)
    if ((p > 0) & (q == 0)).any():
        raise SupportViolation("q must be positive wherever p is")
    m = p > 0
    lp, lq = np.log(p[m]), np.log(q[m])
    if g == 1.0:
        return float(np.sum(p[m] * (lp - lq)))
    return float(g / (1 - g) * logsumexp(lq + (lp - lq) / g))


# --- which prior do the entropy criteria pick? -------------------------------

@dataclass(frozen=True)
class CriteriaComparison:
    gamma: float
    eu: float
    renyi: float
    tsallis: float


def _maximise_on_P(f, grid_n=801) -> float:
    thetas = np.linspace(-12, 12, grid_n)
    vals = [f(float(expit(t))) for t in thetas]
    i = int(np.argmax(vals))
    lo, hi = thetas[max(i - 1, 0)], thetas[min(i + 1, grid_n - 1)]
    res = minimize_scalar(lambda t: -f(float(expit(t))), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    return float(expit(res.x))


def prior_vs_entropy_criteria(spec: GameSpec, gamma) -> CriteriaComparison:
    """Priors maximising the conditional EU, Rényi (α = 1/γ) and Tsallis
    (q = 1/γ) entropies of the scenario given the sampled count."""
    g = _check_gamma(gamma)
    canon = GameSpec(*spec.canonical().astuple())
    if classify(canon) is not GameClass.NONTRIVIAL:
        raise Degenerate("criteria comparison needs a Nontrivial game")
    d = hypergeom_pmfs(canon)
    pa, pb = d.arrays()
    order = 1 / g

    def joint(P):
        return np.column_stack([P * pa, (1 - P) * pb])

    eu = solve_iso(canon, g, tol=1e-12).P_star
    if order == 1.0:
        renyi = tsallis = eu
    else:
        renyi = _maximise_on_P(lambda P: conditional_renyi(joint(P), order))
        # the Tsallis criterion is a monotone function of this log ratio
        log_ratio = lambda P: (_log_power_sum(joint(P).ravel(), order)
                               - _log_power_sum(joint(P).sum(axis=1), order))
        tsallis = _maximise_on_P(lambda P: math.copysign(1.0, order - 1) * -log_ratio(P))
    return CriteriaComparison(g, eu, renyi, tsallis)
