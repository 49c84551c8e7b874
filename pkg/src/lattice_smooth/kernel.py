"""Probability kernels on [-1, 1]^d with a strictly positive floor.

Both shipped kernels are bounded below by a positive constant on their
support, which the window-size bounds of the estimator rely on.  Common
kernels such as Epanechnikov vanish on the boundary and are therefore
not offered.

``UNIFORM``   K(u) = 2^-d on [-1, 1]^d.
``PEDESTAL``  K(u) = (a + b (1 - |u|_inf)) / Z, a tent on a flat pedestal,
              with Z = 2^d (a + b / (d + 1)) so that K integrates to one.

Lipschitz continuity is only required inside [-1, 1]^d; the jump of both
kernels at the support boundary is admissible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError

__all__ = ["KernelSpec", "A1Report", "eval_kernel", "verify_a1"]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel variant plus its bound and Lipschitz constants.

    ``c``, ``C`` and ``eta`` default to the certified values; passing them
    explicitly declares constants that :func:`verify_a1` will then check.
    """

    variant: str = "UNIFORM"
    d: int = 1
    a: float = 1.0
    b: float = 0.0
    c: float | None = None
    C: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.variant not in ("UNIFORM", "PEDESTAL"):
            raise ValidationError(f"unknown kernel variant {self.variant!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"kernel dimension must be a positive integer, got {self.d}")
        if self.variant == "PEDESTAL":
            if not self.a > 0:
                raise ValidationError(f"pedestal height a must be > 0, got {self.a}")
            if not self.b >= 0:
                raise ValidationError(f"tent weight b must be >= 0, got {self.b}")
        if self.c is None:
            object.__setattr__(self, "c", self.certified[0])
        if self.C is None:
            object.__setattr__(self, "C", self.certified[1])
        if self.eta is None:
            object.__setattr__(self, "eta", self.certified[2])
        if not 0 < self.c <= self.C:
            raise ValidationError(f"need 0 < c <= C, got c={self.c}, C={self.C}")
        if self.eta < 0:
            raise ValidationError(f"Lipschitz constant must be >= 0, got {self.eta}")

    @classmethod
    def uniform(cls, d: int = 1) -> "KernelSpec":
        return cls("UNIFORM", d)

    @classmethod
    def pedestal(cls, a: float = 1.0, b: float = 1.0, d: int = 1, **declared) -> "KernelSpec":
        return cls("PEDESTAL", d, a, b, **declared)

    @property
    def normalizer(self) -> float:
        if self.variant == "UNIFORM":
            return 2.0**self.d
        return 2.0**self.d * (self.a + self.b / (self.d + 1))

    @property
    def certified(self) -> tuple[float, float, float]:
        """(lower bound, upper bound, sup-norm Lipschitz constant)."""
        z = self.normalizer
        if self.variant == "UNIFORM":
            return 1.0 / z, 1.0 / z, 0.0
        return self.a / z, (self.a + self.b) / z, self.b / z

    def profile(self, r: NDArray) -> NDArray:
        """K as a function of r = |u|_inf, for r already known to be <= 1."""
        if self.variant == "UNIFORM":
            return np.full_like(r, 1.0 / self.normalizer, dtype=float)
        return (self.a + self.b * (1.0 - r)) / self.normalizer

    def __call__(self, u: ArrayLike) -> NDArray | float:
        return eval_kernel(self, u)


def eval_kernel(kernel: KernelSpec, u: ArrayLike) -> NDArray | float:
    """K(u); ``u`` has trailing axis of length d (a scalar is fine for d=1)."""
    arr = np.asarray(u, dtype=float)
    if kernel.d == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != kernel.d:
        raise ValidationError(f"point has {arr.shape[-1]} coordinates, kernel has d={kernel.d}")
    r = np.abs(arr).max(axis=-1)
    out = np.where(r <= 1.0, kernel.profile(np.minimum(r, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class A1Report:
    minimum: float
    maximum: float
    lipschitz_quotient: float
    integral: float
    quadrature_bound: float
    symmetric: bool
    passed: bool


def verify_a1(kernel: KernelSpec, resolution: int, tol: float = 1e-12) -> A1Report:
    """Numerically certify the kernel assumptions on a regular grid.

    The grid has ``2 * resolution + 1`` points per axis with spacing
    ``1 / resolution``.  The integral is a product trapezoid rule; for a
    kernel that is eta-Lipschitz inside the cube its error is at most
    ``eta * 2^d / resolution``.
    """
    if resolution < 8:
        raise ValidationError(f"resolution must be >= 8, got {resolution}")
    d = kernel.d
    axis = np.arange(-resolution, resolution + 1) / resolution
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
    vals = np.asarray(eval_kernel(kernel, mesh))

    quotient = 0.0
    for k in range(d):
        diff = np.abs(np.diff(vals, axis=k))
        quotient = max(quotient, float(diff.max()) * resolution)

    weights = np.full(axis.size, 1.0 / resolution)
    weights[[0, -1]] *= 0.5
    integral = vals
    for _ in range(d):
        integral = integral @ weights
    integral = float(integral)
    qbound = kernel.eta * 2.0**d / resolution + tol

    symmetric = bool(np.array_equal(vals, vals[(slice(None, None, -1),) * d]))
    lo, hi = float(vals.min()), float(vals.max())
    passed = (
        lo >= kernel.c - tol
        and hi <= kernel.C + tol
        and quotient <= kernel.eta + tol
        and abs(integral - 1.0) <= qbound
        and symmetric
    )
    return A1Report(lo, hi, quotient, integral, qbound, symmetric, passed)
