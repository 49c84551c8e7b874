"""Orlicz-space calculus for the exponential Young functions psi_beta.

    psi_beta(x) = exp((x + xi)^beta) - exp(xi^beta),
    xi = ((1 - beta) / beta)^(1/beta) if 0 < beta < 1 else 0.

The shift xi makes psi_beta convex on [0, inf) for beta < 1.

All expectations are written as tail integrals of the quantile function
of |Z|,

    E F(|Z|) = int_0^1 F(Q(u)) du,   Q(u) = inf{t > 0 : P(|Z| > t) <= u},

so the Luxemburg norm and the mixing coefficient c_k(beta) share one code
path (c_k integrates only over [0, alpha]).  For the gaussian law the
integral over u is mapped back to t, which removes the singularity of Q at
u = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError, ValidationError

__all__ = [
    "YoungFunctionBeta",
    "MarginalSpec",
    "psi_eval",
    "beta_of_q",
    "tail_integral",
    "luxemburg_norm",
    "quantile_q",
    "c_k_coefficient",
    "d_k_coefficient",
    "lp_norm",
    "norm_equivalence_diag",
    "ck_equivalence_diag",
    "DEFAULT_P_GRID",
]

MAX_ITER = 200
# p in {2.01, ..., 64}, geometric
DEFAULT_P_GRID = tuple(float(p) for p in np.geomspace(2.01, 64.0, 40))


@dataclass(frozen=True)
class YoungFunctionBeta:
    beta: float

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be a positive finite number, got {self.beta}")

    @property
    def xi(self) -> float:
        if self.beta < 1:
            return ((1.0 - self.beta) / self.beta) ** (1.0 / self.beta)
        return 0.0

    def __call__(self, x: float) -> float:
        return psi_eval(self, x)

    def inverse_at_one(self) -> float:
        """psi_beta^{-1}(1): the Luxemburg norm of the constant 1."""
        xi, b = self.xi, self.beta
        y = math.log1p(math.exp(-(xi**b)))
        if xi == 0:
            return y ** (1.0 / b)
        return xi * math.expm1(math.log1p(y / xi**b) / b)


def _gap(xi: float, b: float, x: float) -> float:
    # (x + xi)^b - xi^b without cancellation; xi is huge for small beta
    if xi == 0:
        return x**b
    return xi**b * math.expm1(b * math.log1p(x / xi))


def psi_eval(yf: YoungFunctionBeta, x: float) -> float:
    if x < 0 or math.isnan(x):
        raise DomainError(f"psi_beta is defined on [0, inf), got {x}")
    if x == 0:
        return 0.0
    xi, b = yf.xi, yf.beta
    gap = _gap(xi, b, x)
    try:
        return math.exp(xi**b) * math.expm1(gap)
    except OverflowError:
        return math.inf


def beta_of_q(q: float) -> float:
    """beta(q) = 2q / (2 - q) for 0 < q < 2."""
    if not 0 < q < 2:
        raise DomainError(f"q must lie in (0, 2), got {q}")
    return 2.0 * q / (2.0 - q)


@dataclass(frozen=True)
class MarginalSpec:
    """Law of a real variable Z; only |Z| matters here.

    ``law`` is one of ``point`` (|Z| = value), ``uniform`` (Z ~ U(-value, value)),
    ``gaussian`` (Z ~ N(0, value^2)) or ``empirical`` (``sample`` holds draws).
    A point mass at 0 is the zero variable.
    """

    law: str
    value: float = 1.0
    sample: tuple[float, ...] = ()

    def __post_init__(self):
        if self.law not in ("point", "uniform", "gaussian", "empirical"):
            raise ValidationError(f"unknown marginal law {self.law!r}")
        if self.law == "empirical":
            if not self.sample:
                raise ValidationError("empirical law needs a nonempty sample")
            object.__setattr__(self, "sample", tuple(float(v) for v in self.sample))
        elif self.law == "point":
            if not self.value >= 0:
                raise ValidationError(f"point mass location must be >= 0, got {self.value}")
        elif not self.value > 0:
            raise ValidationError(f"{self.law} scale must be > 0, got {self.value}")

    @classmethod
    def point(cls, m: float) -> "MarginalSpec":
        return cls("point", m)

    @classmethod
    def uniform(cls, a: float) -> "MarginalSpec":
        return cls("uniform", a)

    @classmethod
    def gaussian(cls, sigma: float) -> "MarginalSpec":
        return cls("gaussian", sigma)

    @classmethod
    def empirical(cls, sample: Sequence[float]) -> "MarginalSpec":
        return cls("empirical", sample=tuple(sample))

    def scaled(self, lam: float) -> "MarginalSpec":
        lam = abs(lam)
        if self.law == "empirical":
            return MarginalSpec.empirical([lam * v for v in self.sample])
        return MarginalSpec(self.law, lam * self.value)

    @property
    def is_zero(self) -> bool:
        if self.law == "point":
            return self.value == 0
        if self.law == "empirical":
            return not any(self.sample)
        return False

    @property
    def sup(self) -> float:
        """Essential supremum of |Z|."""
        if self.law in ("point", "uniform"):
            return self.value
        if self.law == "gaussian":
            return math.inf
        return max(abs(v) for v in self.sample)

    def abs_sorted_desc(self) -> np.ndarray:
        return np.sort(np.abs(np.asarray(self.sample)))[::-1]


def quantile_q(Z: MarginalSpec, u: float) -> float:
    """Q(u) = inf{t > 0 : P(|Z| > t) <= u}, the cadlag inverse of the tail."""
    if not 0 <= u <= 1:
        raise DomainError(f"u must lie in [0, 1], got {u}")
    if u >= 1:
        return 0.0
    if Z.law == "point":
        return Z.value
    if Z.law == "uniform":
        return Z.value * (1.0 - u)
    if Z.law == "gaussian":
        return -Z.value * float(special.ndtri(u / 2.0)) if u > 0 else math.inf
    desc = Z.abs_sorted_desc()
    k = math.floor(u * len(desc) + 1e-12)
    return float(desc[k]) if k < len(desc) else 0.0


def _quad(fn, lo, hi):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        with np.errstate(all="ignore"):
            val, err = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)
    if not math.isfinite(val):
        return math.inf
    return val


def _log_psi(yf: YoungFunctionBeta, x: float) -> float:
    if x <= 0:
        return -math.inf
    xi, b = yf.xi, yf.beta
    gap = _gap(xi, b, x)
    if gap > 30:
        return xi**b + gap + math.log1p(-math.exp(-gap))
    return xi**b + math.log(math.expm1(gap))


def tail_integral(
    Z: MarginalSpec,
    fn: Callable[[float], float],
    alpha: float,
    log_fn: Callable[[float], float] | None = None,
) -> float:
    """int_0^alpha fn(Q(u)) du for nondecreasing, nonnegative ``fn``.

    ``log_fn``, if given, is log(fn) and is used where fn alone would
    overflow before the density decays (gaussian law).
    """
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0:
        return 0.0
    if Z.law == "point":
        return alpha * fn(Z.value)
    if Z.law == "uniform":
        a = Z.value
        return _quad(lambda u: fn(a * (1.0 - u)), 0.0, alpha)
    if Z.law == "empirical":
        desc = Z.abs_sorted_desc()
        N = len(desc)
        full = min(N, math.floor(alpha * N + 1e-12))
        acc = sum(fn(float(v)) for v in desc[:full]) / N
        rest = alpha - full / N
        if rest > 0 and full < N:
            acc += rest * fn(float(desc[full]))
        return acc
    # gaussian: u = P(|Z| > t), du = -2 phi(t/s)/s dt
    s = Z.value
    t0 = quantile_q(Z, alpha)

    if log_fn is None:
        log_fn = lambda t: math.log(v) if (v := fn(t)) > 0 else -math.inf

    def integrand(t):
        expo = log_fn(t) - 0.5 * (t / s) ** 2
        if expo > 700:
            return math.inf
        return math.exp(expo) * 2.0 / (s * math.sqrt(2 * math.pi))

    return _quad(integrand, t0, math.inf)


def _gaussian_psi2(Z: MarginalSpec, c: float, alpha: float) -> float:
    # int_0^alpha psi_2(Q(u)/c) du in closed form; infinite when c <= sigma sqrt 2
    s = Z.value
    k2 = 1.0 - 2.0 * s * s / (c * c)
    if k2 <= 0:
        return math.inf
    k = math.sqrt(k2)
    t0 = quantile_q(Z, alpha)
    tail = 2.0 * special.ndtr(-t0 * k / s) if math.isfinite(t0) else 0.0
    return tail / k - alpha


def _psi_expectation(Z: MarginalSpec, yf: YoungFunctionBeta, c: float, alpha: float) -> float:
    if Z.law == "gaussian":
        if yf.beta > 2:
            return math.inf
        if yf.beta == 2:
            return _gaussian_psi2(Z, c, alpha)
    return tail_integral(Z, lambda t: psi_eval(yf, t / c), alpha, lambda t: _log_psi(yf, t / c))


def _bisect_norm(F: Callable[[float], float], scale: float, tol: float, what: str) -> float:
    """inf{c > 0 : F(c) <= 1} for F nonincreasing in c.

    Returns ``inf`` when F(c) stays above 1 over the whole search range.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    hi = scale
    for _ in range(2100):
        if F(hi) <= 1.0:
            break
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    lo = hi / 2.0
    for _ in range(2100):
        if F(lo) > 1.0:
            break
        hi, lo = lo, lo / 2.0
        if lo < 1e-300:
            return 0.0
    for it in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return hi
        if F(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4e-16 * hi:
            return hi
    raise NumericalError(
        f"{what}: bisection did not converge in {MAX_ITER} iterations",
        {"lo": lo, "hi": hi, "F(lo)": F(lo), "F(hi)": F(hi)},
    )


def _scale_hint(Z: MarginalSpec) -> float:
    if Z.law == "empirical":
        return float(np.abs(Z.sample).max())
    return Z.value


def luxemburg_norm(Z: MarginalSpec, beta: float, tol: float = 1e-12) -> float:
    """||Z||_psi_beta = inf{c > 0 : E psi_beta(|Z| / c) <= 1}.

    Returns 0 for Z = 0 and ``math.inf`` when the expectation is infinite
    for every c (Z outside the Orlicz space).
    """
    yf = YoungFunctionBeta(beta)
    if Z.is_zero:
        return 0.0
    return _bisect_norm(lambda c: _psi_expectation(Z, yf, c, 1.0), _scale_hint(Z), tol, "luxemburg_norm")


def c_k_coefficient(Z: MarginalSpec, alpha: float, beta: float, tol: float = 1e-12) -> float:
    """inf{c > 0 : int_0^alpha psi_beta(Q(u) / c) du <= 1}; zero when alpha = 0."""
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    yf = YoungFunctionBeta(beta)
    if alpha == 0 or Z.is_zero:
        return 0.0
    return _bisect_norm(lambda c: _psi_expectation(Z, yf, c, alpha), _scale_hint(Z), tol, "c_k_coefficient")


def d_k_coefficient(Z: MarginalSpec, alpha: float, p: float) -> float:
    """(int_0^alpha Q(u)^p du)^(1/p)."""
    if not p > 2:
        raise DomainError(f"p must be > 2, got {p}")
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    val = tail_integral(Z, lambda t: t**p, alpha, lambda t: p * math.log(t) if t > 0 else -math.inf)
    if not math.isfinite(val):
        raise NumericalError("d_k_coefficient: divergent quantile integral", {"alpha": alpha, "p": p})
    return val ** (1.0 / p)


def lp_norm(Z: MarginalSpec, p: float) -> float:
    """(E |Z|^p)^(1/p), in closed form where available."""
    if not p > 0:
        raise DomainError(f"p must be > 0, got {p}")
    if Z.law == "point":
        return Z.value
    if Z.law == "uniform":
        return Z.value / (p + 1.0) ** (1.0 / p)
    if Z.law == "gaussian":
        log_m = 0.5 * p * math.log(2.0) + math.lgamma((p + 1) / 2.0) - 0.5 * math.log(math.pi)
        return Z.value * math.exp(log_m / p)
    a = np.abs(np.asarray(Z.sample))
    top = a.max()
    if top == 0:
        return 0.0
    return float(top * np.mean((a / top) ** p) ** (1.0 / p))


def norm_equivalence_diag(Z: MarginalSpec, beta: float, p_grid: Sequence[float] = DEFAULT_P_GRID):
    """(||Z||_psi_beta, max over p_grid of ||Z||_p / p^(1/beta)).

    The second value is a lower bound for the sup over all p > 2.  The two
    agree up to constants depending on beta only; no ratio is asserted.
    """
    if any(p <= 2 for p in p_grid):
        raise DomainError("p_grid entries must be > 2")
    lux = luxemburg_norm(Z, beta)
    best = max(lp_norm(Z, p) / p ** (1.0 / beta) for p in p_grid)
    return lux, best


def ck_equivalence_diag(Z: MarginalSpec, alpha: float, beta: float, p_grid: Sequence[float] = DEFAULT_P_GRID):
    """(c_k(beta), max over p_grid of d_k(p) / p^(1/beta)) at mixing level ``alpha``."""
    ck = c_k_coefficient(Z, alpha, beta)
    best = max(d_k_coefficient(Z, alpha, p) / p ** (1.0 / beta) for p in p_grid)
    return ck, best
