"""Large-N asymptotics of Binomial games.

With x_A < x_B the Fisher policy threshold k*/N tends to the point x0*
where the two binomial rate functions balance; the Bayesian prior tends to
an oscillating function of the phase 2πN x0* whose zeroth harmonic is the
approximation P≈ = 1 - α_A.  Results resting on conjectured expansions are
flagged as such.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from scipy.special import beta as beta_fn
from scipy.special import expit

from .errors import DomainError, NoConvergence, PoleError

POLE_TOL = 1e-9


def _pair(x_A, x_B) -> tuple[float, float]:
    xa, xb = float(x_A), float(x_B)
    if not (0.0 < xa < xb < 1.0):
        raise DomainError(f"need 0 < x_A < x_B < 1, got ({x_A}, {x_B})")
    return xa, xb


@dataclass(frozen=True)
class BinomialGameSpec:
    N: int
    x_A: float
    x_B: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise DomainError(f"N must be a non-negative integer, got {self.N!r}")
        for x in (self.x_A, self.x_B):
            if not (0.0 < float(x) < 1.0):
                raise DomainError(f"fractions must lie in (0,1), got {x!r}")

    @property
    def swapped(self) -> bool:
        return self.x_A > self.x_B

    def canonical(self) -> BinomialGameSpec:
        if not self.swapped:
            return self
        return BinomialGameSpec(self.N, self.x_B, self.x_A)


def rate_function(x, x_theta) -> tuple[float, float, float]:
    """Binomial large-deviation rate I(x, x_θ) and its first two x-derivatives."""
    x, t = float(x), float(x_theta)
    if not (0 < x < 1 and 0 < t < 1):
        raise DomainError(f"x and x_theta must lie in (0,1), got ({x}, {t})")
    I = x * math.log(x / t) + (1 - x) * math.log((1 - x) / (1 - t))
    I1 = math.log(x / (1 - x)) - math.log(t / (1 - t))
    I2 = 1.0 / (x * (1 - x))
    return I, I1, I2


def _beta(xa, xb) -> float:
    return math.log(xb * (1 - xa) / (xa * (1 - xb)))


def fisher_policy_limit(x_A, x_B) -> float:
    xa, xb = _pair(x_A, x_B)
    return math.log((1 - xa) / (1 - xb)) / _beta(xa, xb)


def _alphas(xa, xb):
    b = _beta(xa, xb)
    x0 = math.log((1 - xa) / (1 - xb)) / b
    aA = rate_function(x0, xa)[1] / b
    aB = rate_function(x0, xb)[1] / b
    return x0, b, aA, aB


def fisher_prior_limit_bounds(x_A, x_B) -> tuple[float, float]:
    """Conjectured liminf / limsup of the Binomial Fisher prior P*_N."""
    xa, xb = _pair(x_A, x_B)
    _, b, aA, aB = _alphas(xa, xb)
    base = math.log(-math.expm1(aB * b) / -math.expm1(-aA * b))
    return float(expit(base - aA * b)), float(expit(base - aB * b))


def fisher_prior_limit_logodds(x_A, x_B) -> tuple[float, float]:
    xa, xb = _pair(x_A, x_B)
    _, b, aA, aB = _alphas(xa, xb)
    base = math.log(-math.expm1(aB * b) / -math.expm1(-aA * b))
    return base - aA * b, base - aB * b


def bayes_prior_approx(x_A, x_B) -> float:
    """Zeroth-order limiting Bayesian prior P≈ (= 1 - α_A = -α_B)."""
    xa, xb = _pair(x_A, x_B)
    x0 = fisher_policy_limit(xa, xb)
    return math.log((1 - x0) * xb / ((1 - xb) * x0)) / _beta(xa, xb)


def gamma_critical(x_A, x_B) -> float:
    """Critical risk aversion γ⋄ = min(1/α_A, 1/(1-α_A)), in (1, 2]."""
    xa, xb = _pair(x_A, x_B)
    aA = _alphas(xa, xb)[2]
    g = min(1 / aA, 1 / (1 - aA))
    if not (1 < g <= 2 + 1e-12):
        raise DomainError(f"γ⋄ = {g} outside (1, 2]")
    return g


# --- kernels -----------------------------------------------------------------

def _near_int(x: float) -> bool:
    return abs(x - round(x)) < POLE_TOL


def kernel_C(alpha) -> float:
    """C(α) = -π/(α sin πα): C_A on (0,1), C_B on (-1,0)."""
    a = float(alpha)
    if _near_int(a):
        raise PoleError(f"C(α) has a pole at α = {a}")
    if not (-1 < a < 1):
        raise DomainError(f"the kernel integral diverges for α = {a}")
    return -math.pi / (a * math.sin(math.pi * a))


def kernel_C_gamma(alpha, gamma) -> float:
    """Isoelastic kernel C^γ(α).

    α > 0 (scenario A): -(1/α) B(1-γα, 1-γ(1-α)), needs γα < 1 and γ(1-α) < 1.
    α < 0 (scenario B):  (1/α) B(1+γα, 1-γ(1+α)), needs -1 < α and γ(1+α) < 1.
    Both reduce to C(α) at γ = 1.
    """
    a, g = float(alpha), float(gamma)
    if not (g > 0):
        raise DomainError(f"gamma must be > 0, got {g}")
    if _near_int(a):
        raise PoleError(f"C^γ(α) has a pole at α = {a}")
    if a > 0:
        p, q, sign = 1 - g * a, 1 - g * (1 - a), -1.0
    else:
        p, q, sign = 1 + g * a, 1 - g * (1 + a), 1.0
    for arg in (p, q):
        if arg <= 0 and _near_int(arg):
            raise PoleError(f"Gamma pole: argument {arg} at α={a}, γ={g}")
        if arg <= 0:
            raise DomainError(f"kernel integral diverges at α={a}, γ={g}")
    return sign * float(beta_fn(p, q)) / a


def kernel_ratio_second(alpha_A) -> float:
    """C_B''(α_B)/C_B(α_B) - C_A''(α_A)/C_A(α_A) with α_B = α_A - 1."""
    a = float(alpha_A)
    if not (0 < a < 1):
        raise DomainError(f"α_A must lie in (0,1), got {a}")
    return (-2 * (1 - 2 * a) / (a * a * (1 - a) ** 2)
            - 2 * math.pi / (a * (1 - a)) / math.tan(math.pi * a))


# --- first order and phase series -------------------------------------------

def sampi_first_order(x_A, x_B):
    """First-order coefficient ϝ and ϑ_N ≈ ϑ≈ + ϝ/N (conjectured expansion)."""
    xa, xb = _pair(x_A, x_B)
    x0, b, aA, _ = _alphas(xa, xb)
    theta0 = math.log((1 - aA) / aA)
    kappa = 1 / (x0 * (1 - x0))
    n1 = -(1 - 2 * x0) / (2 * x0 * (1 - x0))
    sampi = ((n1 / b - kappa * theta0 / b ** 2) / (aA * (1 - aA))
             + 0.5 * kappa / b ** 2 * kernel_ratio_second(aA))

    def theta_fn(N):
        if N <= 0:
            raise DomainError("N must be positive")
        return theta0 + sampi / N

    return sampi, theta_fn


def phase(N: int, x_A, x_B) -> float:
    return (2 * math.pi * N * fisher_policy_limit(x_A, x_B)) % (2 * math.pi)


@dataclass(frozen=True)
class PhaseSeriesResult:
    P: float | None
    theta: float | None
    phi: float
    harmonics: int
    converged: bool
    iterations: int
    conjecture: bool = True


def _xi(theta, phi, a, b, harmonics) -> float | None:
    num = math.pi / (a * math.sin(math.pi * a))
    den = math.pi / ((1 - a) * math.sin(math.pi * a))
    w = phi + 2 * math.pi * theta / b
    for m in range(1, harmonics + 1):
        e = cmath.exp(1j * m * w)
        shift = 2 * math.pi * m / b
        num += 2 * (math.pi / (a - 1j * shift) * e / cmath.sin(math.pi * a - 1j * math.pi * shift)).real
        den += 2 * (math.pi / (1 - a + 1j * shift) * e / cmath.sin(math.pi * a + 1j * math.pi * shift)).real
    if num <= 0 or den <= 0:
        return None
    return math.log(num / den)


def phase_series_prior(x_A, x_B, N: int, harmonics: int = 1, damping: float = 0.5,
                       max_iter: int = 1000, tol: float = 1e-12) -> PhaseSeriesResult:
    """Fixed point of the truncated phase-dependent log-odds map Ξ^φ.

    Seeded at ϑ≈ with damped iteration; failure to converge is reported in
    the result rather than raised.
    """
    xa, xb = _pair(x_A, x_B)
    if harmonics < 0:
        raise DomainError("harmonics must be >= 0")
    phi = phase(N, xa, xb)
    _, b, aA, _ = _alphas(xa, xb)
    theta = math.log((1 - aA) / aA)
    if harmonics == 0:
        return PhaseSeriesResult(bayes_prior_approx(xa, xb), theta, phi, 0, True, 0)
    for it in range(1, max_iter + 1):
        x = _xi(theta, phi, aA, b, harmonics)
        if x is None:
            return PhaseSeriesResult(None, None, phi, harmonics, False, it)
        nxt = (1 - damping) * theta + damping * x
        if abs(nxt - theta) <= tol * (1 + abs(theta)):
            return PhaseSeriesResult(float(expit(nxt)), nxt, phi, harmonics, True, it)
        theta = nxt
    return PhaseSeriesResult(float(expit(theta)), theta, phi, harmonics, False, max_iter)


def phase_series_prior_strict(*args, **kw) -> PhaseSeriesResult:
    r = phase_series_prior(*args, **kw)
    if not r.converged:
        raise NoConvergence("phase series fixed point did not converge")
    return r


# --- summary record ----------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticResult:
    x_A: float
    x_B: float
    x0_star: float
    beta: float
    alpha_A: float
    alpha_B: float
    epsilon: float
    P_approx: float
    theta_approx: float
    sampi: float
    gamma_diamond: float
    fisher_prior_bounds: tuple
    N: int | None = None
    phi: float | None = None
    theta_first_order: float | None = None
    P_first_order: float | None = None
    conjecture: dict = field(default_factory=lambda: {
        "fisher_prior_bounds": True, "sampi": True, "theta_first_order": True,
        "P_first_order": True, "phi": False, "P_approx": False,
    })

    def as_dict(self) -> dict:
        return {
            "x_A": self.x_A, "x_B": self.x_B, "N": self.N,
            "x0_star": self.x0_star, "beta": self.beta,
            "alpha_A": self.alpha_A, "alpha_B": self.alpha_B, "epsilon": self.epsilon,
            "P_approx": self.P_approx, "theta_approx": self.theta_approx,
            "sampi": self.sampi, "theta_first_order": self.theta_first_order,
            "P_first_order": self.P_first_order, "phi": self.phi,
            "gamma_diamond": self.gamma_diamond,
            "fisher_prior_bounds": list(self.fisher_prior_bounds),
            "conjecture": dict(self.conjecture),
        }


def asymptotics(x_A, x_B, N: int | None = None) -> AsymptoticResult:
    xa, xb = _pair(x_A, x_B)
    x0, b, aA, aB = _alphas(xa, xb)
    sampi, theta_fn = sampi_first_order(xa, xb)
    theta0 = math.log((1 - aA) / aA)
    th1 = theta_fn(N) if N else None
    return AsymptoticResult(
        xa, xb, x0, b, aA, aB, rate_function(x0, xa)[0],
        bayes_prior_approx(xa, xb), theta0, sampi, gamma_critical(xa, xb),
        fisher_prior_limit_bounds(xa, xb), N,
        phase(N, xa, xb) if N else None, th1,
        float(expit(th1)) if th1 is not None else None,
    )
