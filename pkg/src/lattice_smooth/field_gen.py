"""Stationary zero-mean error fields on the lattice {1, ..., n}^d.

Three families are shipped, each a finite-range functional of iid
innovations so that every dependence quantity is available in closed form:

``IID``
    eps_i = xi_i.
``LINEAR``
    finite moving average eps_i = sum_j a_j xi_{i-j}.
``MD_NEIGHBOR``
    eps_i = xi_i * f(xi_{i-e_1}) with a bounded link f.  Since xi_i is
    independent of every eps_j with j lexicographically before i, the field
    is a martingale difference with respect to the lexicographic past.

Innovations live on a padded box so that every site of the lattice sees a
complete neighbourhood; there are no edge effects and the restriction to
the lattice is exactly stationary.  All three families are ergodic
(finite-range functionals of an iid field), which the uniform rate results
use through the ergodic theorem.

Innovation ``xi_j`` is drawn from a stateless hash of the seed and the
flattened padded index of ``j``; generation order is irrelevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, special

from . import _rng
from .errors import CapacityError, UnsupportedModelError, ValidationError

__all__ = [
    "LatticeShape",
    "Innovation",
    "GeneratorSpec",
    "FieldSample",
    "LINKS",
    "generate",
    "draw_innovations",
    "theoretical_covariance",
    "dependence_radius",
    "marginal_variance",
    "MAX_SITES",
]

VARIANTS = ("IID", "LINEAR", "MD_NEIGHBOR")
LAWS = ("gaussian", "uniform", "rademacher")

# Upper limit on padded sites materialised by ``generate``.
MAX_SITES = 2**27
_SAFE_INT = 2**53


@dataclass(frozen=True)
class LatticeShape:
    """The design lattice {1, ..., n}^d."""

    d: int
    n: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"dimension d must be a positive integer, got {self.d}")
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"lattice size n must be an integer >= 2, got {self.n}")
        if self.n**self.d > _SAFE_INT:
            raise CapacityError(f"n^d = {self.n}^{self.d} exceeds the safe integer range")

    @property
    def sites(self) -> int:
        return self.n**self.d

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.n,) * self.d


@dataclass(frozen=True)
class Innovation:
    """Law of the iid innovations; always centred.

    ``scale`` is sigma for ``gaussian`` and the half-width ``a`` for
    ``uniform``; it is ignored for ``rademacher``.  A zero scale gives the
    degenerate zero field.
    """

    law: str = "gaussian"
    scale: float = 1.0
    mean: float = 0.0

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValidationError(f"unknown innovation law {self.law!r}; expected one of {LAWS}")
        if self.mean != 0.0:
            raise ValidationError(f"innovations must have mean zero, got mean {self.mean}")
        if not math.isfinite(self.scale) or self.scale < 0:
            raise ValidationError(f"innovation scale must be finite and >= 0, got {self.scale}")

    @property
    def variance(self) -> float:
        if self.law == "gaussian":
            return self.scale**2
        if self.law == "uniform":
            return self.scale**2 / 3.0
        return 1.0

    @property
    def bound(self) -> float:
        """Essential supremum of |xi| (infinite for the gaussian law)."""
        if self.law == "gaussian":
            return math.inf if self.scale > 0 else 0.0
        if self.law == "uniform":
            return self.scale
        return 1.0

    def from_uniform(self, u: NDArray, bits: NDArray) -> NDArray:
        if self.law == "gaussian":
            return self.scale * special.ndtri(u)
        if self.law == "uniform":
            return self.scale * (2.0 * u - 1.0)
        return np.where(bits >> np.uint64(63), 1.0, -1.0)

    def expect(self, fn: Callable[[float], float]) -> float:
        """E fn(xi) by exact enumeration or quadrature."""
        if self.law == "rademacher":
            return 0.5 * (fn(1.0) + fn(-1.0))
        if self.scale == 0:
            return fn(0.0)
        if self.law == "uniform":
            a = self.scale
            val, _ = integrate.quad(lambda t: fn(t) / (2 * a), -a, a, epsabs=1e-13, epsrel=1e-12)
            return val
        s = self.scale
        dens = lambda t: fn(t) * math.exp(-0.5 * (t / s) ** 2) / (s * math.sqrt(2 * math.pi))
        val, _ = integrate.quad(dens, -math.inf, math.inf, epsabs=1e-13, epsrel=1e-12)
        return val


def _sign(x):
    return np.sign(x)


def _clip(x):
    return np.clip(x, -1.0, 1.0)


# name -> (vectorised link, sup |f|)
LINKS: dict[str, tuple[Callable, float]] = {
    "sign": (_sign, 1.0),
    "tanh": (np.tanh, 1.0),
    "clip": (_clip, 1.0),
    "cos": (np.cos, 1.0),
}


@dataclass(frozen=True)
class GeneratorSpec:
    """One of the shipped error-field families.

    ``coefficients`` (LINEAR only) maps integer offsets j, each a d-tuple,
    to moving-average weights a_j.  ``link`` (MD_NEIGHBOR only) names an
    entry of :data:`LINKS`.
    """

    variant: str
    innovation: Innovation = field(default_factory=Innovation)
    coefficients: tuple[tuple[tuple[int, ...], float], ...] = ()
    link: str = "sign"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "LINEAR":
            if not self.coefficients:
                raise ValidationError("LINEAR generator needs a nonempty coefficient table")
            coeffs = tuple(
                (tuple(int(c) for c in off), float(a)) for off, a in dict(self.coefficients).items()
            )
            dims = {len(off) for off, _ in coeffs}
            if len(dims) != 1:
                raise ValidationError("all coefficient offsets must have the same length")
            if not all(math.isfinite(a) for _, a in coeffs):
                raise ValidationError("coefficients must be finite")
            object.__setattr__(self, "coefficients", tuple(sorted(coeffs)))
        if self.variant == "MD_NEIGHBOR" and self.link not in LINKS:
            raise ValidationError(f"unknown link {self.link!r}; expected one of {tuple(LINKS)}")

    @classmethod
    def iid(cls, innovation: Innovation | None = None) -> "GeneratorSpec":
        return cls("IID", innovation or Innovation())

    @classmethod
    def linear(cls, coefficients, innovation: Innovation | None = None) -> "GeneratorSpec":
        """``coefficients`` is a mapping or an iterable of (offset, weight) pairs.

        Integer offsets are accepted for d = 1.
        """
        items = coefficients.items() if hasattr(coefficients, "items") else coefficients
        table = []
        for off, a in items:
            off = (off,) if isinstance(off, (int, np.integer)) else tuple(off)
            table.append((off, a))
        return cls("LINEAR", innovation or Innovation(), tuple(table))

    @classmethod
    def md_neighbor(cls, link: str = "sign", innovation: Innovation | None = None) -> "GeneratorSpec":
        return cls("MD_NEIGHBOR", innovation or Innovation(), link=link)

    @property
    def coefficient_dim(self) -> int | None:
        return len(self.coefficients[0][0]) if self.coefficients else None

    def padding(self, d: int) -> tuple[tuple[int, int], ...]:
        """Innovation padding (below, above) per axis for a d-dim lattice."""
        if self.variant == "IID":
            return ((0, 0),) * d
        if self.variant == "MD_NEIGHBOR":
            return ((1, 0),) + ((0, 0),) * (d - 1)
        offs = np.array([off for off, _ in self.coefficients])
        lo = np.maximum(offs.max(axis=0), 0)
        hi = np.maximum(-offs.min(axis=0), 0)
        return tuple((int(a), int(b)) for a, b in zip(lo, hi))

    def check_dimension(self, d: int):
        if self.variant == "LINEAR" and self.coefficient_dim != d:
            raise ValidationError(
                f"coefficient offsets have length {self.coefficient_dim}, lattice has d={d}"
            )


@dataclass(frozen=True)
class FieldSample:
    shape: LatticeShape
    values: NDArray[np.float64]
    spec: GeneratorSpec
    seed: int

    def __post_init__(self):
        if self.values.shape != self.shape.dims:
            raise ValidationError(f"values have shape {self.values.shape}, expected {self.shape.dims}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")
        self.values.flags.writeable = False


def draw_innovations(spec: GeneratorSpec, shape: LatticeShape, seed: int):
    """Innovations on the padded box.

    Returns ``(xi, pad)`` where ``pad[k] = (below, above)``; lattice site
    ``i`` (1-based) sits at padded position ``i - 1 + pad[k][0]`` on axis k.
    """
    spec.check_dimension(shape.d)
    pad = spec.padding(shape.d)
    dims = tuple(shape.n + lo + hi for lo, hi in pad)
    total = math.prod(dims)
    if total > MAX_SITES:
        raise CapacityError(f"padded lattice has {total} sites, limit is {MAX_SITES}")
    counters = np.arange(total, dtype=np.uint64)
    bits = _rng.raw_bits(seed, counters)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    xi = spec.innovation.from_uniform(u, bits).reshape(dims)
    return xi, pad


def generate(spec: GeneratorSpec, shape: LatticeShape, seed: int) -> FieldSample:
    """Draw one realisation of the error field on ``shape``.

    Deterministic in ``(spec, shape, seed)``.
    """
    seed = _rng.check_seed(seed)
    xi, pad = draw_innovations(spec, shape, seed)
    n = shape.n
    core = tuple(slice(lo, lo + n) for lo, _ in pad)

    if spec.variant == "IID":
        values = xi[core].copy()
    elif spec.variant == "LINEAR":
        values = np.zeros(shape.dims)
        for off, a in spec.coefficients:
            sl = tuple(slice(lo - j, lo - j + n) for (lo, _), j in zip(pad, off))
            values += a * xi[sl]
    else:
        f, _ = LINKS[spec.link]
        prev = (slice(0, n),) + core[1:]
        values = xi[core] * f(xi[prev])
    return FieldSample(shape, values, spec, seed)


def dependence_radius(spec: GeneratorSpec) -> int:
    """Smallest m such that sites at sup-distance > m are independent.

    For LINEAR this is the sup-norm diameter of the coefficient support,
    which equals the support radius for one-sided (causal) tables.
    """
    if spec.variant == "IID":
        return 0
    if spec.variant == "MD_NEIGHBOR":
        return 1
    offs = np.array([off for off, a in spec.coefficients if a != 0.0])
    if offs.size == 0:
        return 0
    return int((offs.max(axis=0) - offs.min(axis=0)).max())


def marginal_variance(spec: GeneratorSpec) -> float:
    """Var(eps_0)."""
    var = spec.innovation.variance
    if spec.variant == "IID":
        return var
    if spec.variant == "LINEAR":
        return var * sum(a * a for _, a in spec.coefficients)
    if spec.variant == "MD_NEIGHBOR":
        f, _ = LINKS[spec.link]
        return var * spec.innovation.expect(lambda t: float(f(t)) ** 2)
    raise UnsupportedModelError(f"no covariance formula for variant {spec.variant!r}")


def theoretical_covariance(spec: GeneratorSpec, lag) -> float:
    """Exact E(eps_0 eps_lag)."""
    lag = (int(lag),) if np.isscalar(lag) else tuple(int(v) for v in lag)
    if spec.variant not in VARIANTS:
        raise UnsupportedModelError(f"no covariance formula for variant {spec.variant!r}")
    if spec.variant == "LINEAR":
        if len(lag) != spec.coefficient_dim:
            raise ValidationError(f"lag has length {len(lag)}, coefficients use {spec.coefficient_dim}")
        table = dict(spec.coefficients)
        acc = 0.0
        for off, a in spec.coefficients:
            shifted = tuple(j + k for j, k in zip(off, lag))
            acc += a * table.get(shifted, 0.0)
        return spec.innovation.variance * acc
    if any(lag):
        return 0.0
    return marginal_variance(spec)
