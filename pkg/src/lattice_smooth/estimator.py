"""Fixed design kernel regression on the lattice {1, ..., n}^d.

For observations Y_i = g(i/n) + eps_i the estimator at x in [0, 1]^d is

    g_n(x) = sum_i Y_i a_i(x) / sum_i a_i(x),   a_i(x) = K((x - i/n) / h).

Because K vanishes outside [-1, 1]^d, only the sites with |x - i/n|_inf <= h
contribute, and every routine here iterates over that window alone.  The
window is closed: a site exactly at distance h is included.  Distances are
compared in units of lattice steps with a 1e-9 slack so that floating-point
noise in x +- h cannot drop an edge site.

Evaluation on a regular grid that refines the design lattice uses FFT
convolution of the zero-stuffed data with a sampled kernel stencil.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal

from .errors import ConfigurationError, DegenerateBandwidthError, DomainError, ValidationError
from .field_gen import LatticeShape
from .kernel import KernelSpec

__all__ = [
    "BandwidthSchedule",
    "EstimationProblem",
    "EvalGrid",
    "SupReport",
    "LIPSCHITZ_FUNCTIONS",
    "lipschitz_function",
    "weight",
    "weight_sum",
    "estimate",
    "expected_estimate",
    "bias",
    "smooth_on_grid",
    "sup_deviation",
    "GridEvaluator",
    "auto_grid",
    "target_rate",
    "weight_sum_envelope",
    "count_weight_sum_upper",
    "second_moment",
]

# slack, in lattice steps, for the closed-window membership test
_EDGE = 1e-9


@dataclass(frozen=True)
class BandwidthSchedule:
    """A bandwidth sequence h_n.

    ``OPTIMAL_AS``  (n^-d log n)^(1/(2+d))
    ``OPTIMAL_LP``  n^(-d/(2+d))
    ``POWERLOG``    n^-theta2 (log n)^theta1
    ``FIXED``       a constant ``value``; for single-n problems only
    """

    form: str = "OPTIMAL_AS"
    theta1: float = 0.0
    theta2: float = 0.0
    value: float | None = None

    def __post_init__(self):
        if self.form not in ("OPTIMAL_AS", "OPTIMAL_LP", "POWERLOG", "FIXED"):
            raise ValidationError(f"unknown bandwidth form {self.form!r}")
        if self.theta1 < 0 or self.theta2 < 0:
            raise ValidationError("theta1 and theta2 must be >= 0")
        if self.form == "FIXED" and not (self.value is not None and 0 < self.value < 1):
            raise ValidationError("FIXED bandwidth needs a value in (0, 1)")

    def __call__(self, n: int, d: int) -> float:
        if self.form == "OPTIMAL_AS":
            return (math.log(n) / n**d) ** (1.0 / (2 + d))
        if self.form == "OPTIMAL_LP":
            return n ** (-d / (2.0 + d))
        if self.form == "POWERLOG":
            return n ** (-self.theta2) * math.log(n) ** self.theta1
        return self.value

    def check(self, ns, d: int):
        """Check h_n in (0,1), floor(n h_n) >= 2, h_n decreasing and n h_n increasing."""
        hs = [self(n, d) for n in ns]
        for n, h in zip(ns, hs):
            if not 0 < h < 1:
                raise ConfigurationError(f"bandwidth h={h} at n={n} is not in (0, 1)")
            if math.floor(n * h + _EDGE) < 2:
                raise ConfigurationError(f"floor(n h) < 2 at n={n}, h={h}: kernel window too small")
        if len(ns) > 1 and self.form != "FIXED":
            if any(b >= a for a, b in zip(hs, hs[1:])):
                raise ConfigurationError("bandwidth must decrease over the configured n values")
            nh = [n * h for n, h in zip(ns, hs)]
            if any(b <= a for a, b in zip(nh, nh[1:])):
                raise ConfigurationError("n * h_n must increase over the configured n values")
        return hs


def target_rate(n: int, h: float, d: int) -> float:
    """(log n)^(1/2) / (n h)^(d/2); equals (log n / n^d)^(1/(2+d)) on the optimal schedule."""
    return math.sqrt(math.log(n)) / (n * h) ** (d / 2.0)


# --- Lipschitz test functions -------------------------------------------------


def _affine(B, d):
    return lambda x: B * x[..., 0]


def _constant(B, d):
    return lambda x: np.full(x.shape[:-1], 0.5 * B)


def _distance(B, d):
    p = np.full(d, 0.3)
    return lambda x: B * np.abs(x - p).max(axis=-1)


def _sinusoid(B, d):
    f = 3.0
    return lambda x: B / (2 * math.pi * f) * np.sin(2 * math.pi * f * x[..., 0])


def _maxcoord(B, d):
    return lambda x: B * x.max(axis=-1)


# each factory(B, d) returns a vectorised g with sup-norm Lipschitz constant <= B
LIPSCHITZ_FUNCTIONS: dict[str, Callable] = {
    "constant": _constant,
    "affine": _affine,
    "distance": _distance,
    "sinusoid": _sinusoid,
    "max": _maxcoord,
}


def lipschitz_function(name: str, B: float, d: int) -> Callable[[NDArray], NDArray]:
    try:
        return LIPSCHITZ_FUNCTIONS[name](B, d)
    except KeyError:
        raise ConfigurationError(f"unknown test function {name!r}; choose from {sorted(LIPSCHITZ_FUNCTIONS)}")


# --- problem ------------------------------------------------------------------


@dataclass(frozen=True)
class EstimationProblem:
    """Design, kernel and bandwidth, plus an optional true regression.

    ``g`` maps an array of points with trailing axis d to values; ``B`` is
    its sup-norm Lipschitz constant.
    """

    shape: LatticeShape
    kernel: KernelSpec
    h: float
    g: Callable[[NDArray], NDArray] | None = None
    B: float | None = None

    def __post_init__(self):
        if self.kernel.d != self.shape.d:
            raise ValidationError(f"kernel has d={self.kernel.d}, lattice has d={self.shape.d}")
        if not 0 < self.h < 1:
            raise ValidationError(f"bandwidth must lie in (0, 1), got {self.h}")
        if math.floor(self.shape.n * self.h + _EDGE) < 2:
            raise DegenerateBandwidthError(
                f"floor(n h) = floor({self.shape.n} * {self.h}) < 2; the kernel window is too small"
            )
        if self.g is not None and not (self.B is not None and self.B > 0):
            raise ValidationError("a true regression g needs a Lipschitz constant B > 0")

    @property
    def d(self) -> int:
        return self.shape.d

    @property
    def n(self) -> int:
        return self.shape.n

    @functools.cached_property
    def design_values(self) -> NDArray:
        """g(i/n) on the whole lattice."""
        if self.g is None:
            raise ConfigurationError("this problem carries no true regression function")
        axis = np.arange(1, self.n + 1) / self.n
        mesh = np.stack(np.meshgrid(*([axis] * self.d), indexing="ij"), axis=-1)
        return np.asarray(self.g(mesh), dtype=float)


def _as_point(problem: EstimationProblem, x: ArrayLike) -> NDArray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (problem.d,):
        raise ValidationError(f"point must have {problem.d} coordinates, got shape {x.shape}")
    return x


def _window(problem: EstimationProblem, x: NDArray):
    """0-based index slices of the kernel window around x and its weights."""
    n, h = problem.n, problem.h
    slices, dists = [], []
    for xk in x:
        lo = max(1, math.ceil(n * (xk - h) - _EDGE))
        hi = min(n, math.floor(n * (xk + h) + _EDGE))
        if hi < lo:
            raise DegenerateBandwidthError(f"empty kernel window at x={x.tolist()}")
        i = np.arange(lo, hi + 1)
        slices.append(slice(lo - 1, hi))
        dists.append(np.minimum(np.abs(xk - i / n) / h, 1.0))
    r = functools.reduce(np.maximum, np.ix_(*dists)) if problem.d > 1 else dists[0]
    return tuple(slices), problem.kernel.profile(r)


def weight(problem: EstimationProblem, x: ArrayLike, i) -> float:
    """a_i(x) = K((x - i/n) / h) for a lattice index i (1-based)."""
    x = _as_point(problem, x)
    i = np.atleast_1d(np.asarray(i))
    if i.shape != (problem.d,) or np.any(i < 1) or np.any(i > problem.n):
        raise DomainError(f"index {i.tolist()} is outside the lattice {{1..{problem.n}}}^{problem.d}")
    steps = np.abs(problem.n * x - i)
    if np.any(steps > problem.n * problem.h + _EDGE):
        return 0.0
    r = min(float((np.abs(x - i / problem.n) / problem.h).max()), 1.0)
    return float(problem.kernel.profile(np.array(r)))


def weight_sum(problem: EstimationProblem, x: ArrayLike) -> float:
    """sum_i a_i(x), visiting only the kernel window."""
    _, w = _window(problem, _as_point(problem, x))
    total = float(w.sum())
    if not total > 0:
        raise DegenerateBandwidthError("kernel weights sum to zero")
    return total


def estimate(problem: EstimationProblem, Y: ArrayLike, x: ArrayLike) -> float:
    """g_n(x) for observations ``Y`` indexed like the lattice."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != problem.shape.dims:
        raise ValidationError(f"Y has shape {Y.shape}, expected {problem.shape.dims}")
    sl, w = _window(problem, _as_point(problem, x))
    return float((w * Y[sl]).sum() / w.sum())


def expected_estimate(problem: EstimationProblem, x: ArrayLike) -> float:
    """E g_n(x) = sum_i a_i(x) g(i/n) / sum_i a_i(x), exact since E eps = 0."""
    return estimate(problem, problem.design_values, x)


def bias(problem: EstimationProblem, x: ArrayLike) -> float:
    x = _as_point(problem, x)
    return expected_estimate(problem, x) - float(problem.g(x))


def weight_sum_envelope(problem: EstimationProblem) -> tuple[float, float]:
    """Bounds c (floor(nh) - 1)^d <= sum_i a_i(x) <= C (2 floor(nh) + 2)^d, valid for all x."""
    m = math.floor(problem.n * problem.h + _EDGE)
    k = problem.kernel
    return k.c * (m - 1) ** problem.d, k.C * (2 * m + 2) ** problem.d


def count_weight_sum_upper(problem: EstimationProblem, x: ArrayLike) -> float:
    """C * prod_k floor(n (x_k + h)), the upper count bound for sum_i a_i(x)."""
    x = _as_point(problem, x)
    counts = [min(problem.n, math.floor(problem.n * (xk + problem.h) + _EDGE)) for xk in x]
    return problem.kernel.C * math.prod(counts)


def second_moment(problem: EstimationProblem, cov: Callable[[tuple], float], radius: int, x: ArrayLike) -> float:
    """E S_n(x)^2 = sum_{k,l} a_k a_l E(eps_k eps_l) for a field with cov(lag) = 0 beyond ``radius``.

    Evaluated as sum over lags of cov(lag) * sum_k a_k a_{k+lag}.
    """
    _, w = _window(problem, _as_point(problem, x))
    d = problem.d
    total = 0.0
    for lag in np.ndindex(*([2 * radius + 1] * d)):
        lag = tuple(v - radius for v in lag)
        c = cov(lag)
        if c == 0.0:
            continue
        a = tuple(slice(max(0, -v), w.shape[k] - max(0, v)) for k, v in enumerate(lag))
        b = tuple(slice(max(0, v), w.shape[k] - max(0, -v)) for k, v in enumerate(lag))
        total += c * float((w[a] * w[b]).sum())
    return total


# --- grids --------------------------------------------------------------------


@dataclass(frozen=True)
class EvalGrid:
    """Evaluation points in [0, 1]^d.

    ``UNIFORM``: the points k * spacing, k = 0..M with M = 1 / spacing.
    ``COVERING``: centres of the ``per_axis^d`` cubes of side ``side`` that
    tile [0, 1]^d.  ``capped`` records that the requested side was enlarged
    to respect a cube budget.
    """

    kind: str
    d: int
    per_axis: int
    capped: bool = False
    requested: float | None = None

    def __post_init__(self):
        if self.kind not in ("UNIFORM", "COVERING"):
            raise ValidationError(f"unknown grid kind {self.kind!r}")
        if self.per_axis < 1:
            raise ConfigurationError("grid needs at least one point per axis")

    @classmethod
    def uniform(cls, spacing: float, d: int) -> "EvalGrid":
        if not 0 < spacing <= 1:
            raise ConfigurationError(f"grid spacing must lie in (0, 1], got {spacing}")
        return cls("UNIFORM", d, math.ceil(1.0 / spacing - 1e-9), requested=spacing)

    @classmethod
    def covering(cls, side: float, d: int, max_cubes: int | None = None) -> "EvalGrid":
        if not side > 0:
            raise ConfigurationError(f"cube side must be > 0, got {side}")
        m = math.ceil(1.0 / min(side, 1.0) - 1e-9)
        capped = False
        if max_cubes is not None and m**d > max_cubes:
            m = max(1, int(math.floor(max_cubes ** (1.0 / d) + 1e-9)))
            capped = True
        return cls("COVERING", d, m, capped, side)

    @property
    def spacing(self) -> float:
        return 1.0 / self.per_axis

    @property
    def side(self) -> float:
        return 1.0 / self.per_axis

    @property
    def axis(self) -> NDArray:
        if self.kind == "UNIFORM":
            return np.arange(self.per_axis + 1) / self.per_axis
        return (np.arange(self.per_axis) + 0.5) / self.per_axis

    @property
    def count(self) -> int:
        return self.axis.size**self.d

    def points(self) -> NDArray:
        """All points, shape (count, d), in C order."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.d)

    def refinement(self, n: int) -> int | None:
        """s such that the grid is {t / (s n)}, or None if it does not refine the lattice."""
        if self.kind != "UNIFORM" or self.per_axis % n:
            return None
        return self.per_axis // n

    def cube_of(self, pts: NDArray) -> NDArray:
        """Per-axis index of the covering cube containing each point."""
        return np.clip(np.floor(pts * self.per_axis).astype(np.int64), 0, self.per_axis - 1)


def auto_grid(problem: EstimationProblem, rate: float, max_points: int = 2**20, floor: float = 2.0**-20):
    """Uniform grid refining the lattice with spacing about min(h/8, l_n).

    l_n = rate * h^(2d+1), floored at ``floor``.  The refinement factor is
    cut back so that the grid has at most ``max_points`` points, but never
    below 1: the grid always contains the (n + 1)^d lattice-aligned points.
    Returns ``(grid, info)``.
    """
    n, d, h = problem.n, problem.d, problem.h
    side = max(rate * h ** (2 * d + 1), floor)
    delta = min(h / 8.0, side)
    s = max(1, math.ceil(1.0 / (n * delta) - 1e-9))
    s_cap = max(1, int(math.floor((max_points ** (1.0 / d) - 1) / n + 1e-9)))
    info = {"target_spacing": delta, "covering_side": side, "refine": min(s, s_cap), "capped": s > s_cap}
    return EvalGrid("UNIFORM", d, min(s, s_cap) * n, info["capped"], delta), info


def _stencil(problem: EstimationProblem, s: int) -> NDArray:
    n, h = problem.n, problem.h
    width = math.floor(s * n * h + _EDGE * s)
    offs = np.arange(-width, width + 1)
    r1 = np.minimum(np.abs(offs) / (s * n * h), 1.0)
    r = functools.reduce(np.maximum, np.ix_(*([r1] * problem.d))) if problem.d > 1 else r1
    return problem.kernel.profile(r)


def smooth_on_grid(problem: EstimationProblem, values: NDArray, s: int) -> NDArray:
    """sum_i values_i a_i(t / (s n)) at every t in {0..s n}^d, by FFT convolution."""
    n, d = problem.n, problem.d
    stuffed = np.zeros((s * n + 1,) * d)
    stuffed[(slice(s, None, s),) * d] = values
    return signal.fftconvolve(stuffed, _stencil(problem, s), mode="same")


def _smooth_points(problem: EstimationProblem, values: NDArray, pts: NDArray):
    num = np.empty(len(pts))
    den = np.empty(len(pts))
    for k, x in enumerate(pts):
        sl, w = _window(problem, x)
        num[k] = (w * values[sl]).sum()
        den[k] = w.sum()
    return num, den


@dataclass
class SupReport:
    """Sup over a grid of |V_n| = |g_n - E g_n|, with optional covering diagnostics.

    ``A1`` and ``A2`` are the largest changes of g_n and E g_n between a
    grid point and the centre of its covering cube; ``A3`` is the largest
    |V_n| over all cube centres.
    """

    sup: float
    argmax: tuple[float, ...]
    points: int
    total_sup: float | None = None
    A1: float | None = None
    A2: float | None = None
    A3: float | None = None
    cubes: int | None = None
    cube_side: float | None = None
    cubes_capped: bool | None = None

    @property
    def decomposition_bound(self) -> float | None:
        if self.A1 is None:
            return None
        return self.A1 + self.A2 + self.A3


class GridEvaluator:
    """Evaluates V_n and g_n on a fixed grid, caching everything that does not depend on the noise.

    Grids that refine the design lattice use FFT convolution; any other
    grid falls back to direct window sums.
    """

    def __init__(self, problem: EstimationProblem, grid: EvalGrid):
        if grid.d != problem.d:
            raise ConfigurationError(f"grid has d={grid.d}, problem has d={problem.d}")
        self.problem = problem
        self.grid = grid
        self.points = grid.points()
        self.refine = grid.refinement(problem.n)
        ones = np.ones(problem.shape.dims)
        self.den = self._numerator(ones)
        if problem.g is not None:
            self.mean = problem.design_values
            self.fitted_mean = self._numerator(self.mean) / self.den
            self.truth = np.asarray(problem.g(self.points), dtype=float)
        else:
            self.mean = np.zeros(problem.shape.dims)
            self.fitted_mean = np.zeros(len(self.points))
            self.truth = None

    def _numerator(self, values: NDArray) -> NDArray:
        if self.refine is not None:
            return smooth_on_grid(self.problem, values, self.refine).ravel()
        return _smooth_points(self.problem, values, self.points)[0]

    def deviation(self, eps: NDArray) -> NDArray:
        """V_n = g_n - E g_n at every grid point, from the centred field."""
        return self._numerator(eps) / self.den


def sup_deviation(
    problem: EstimationProblem,
    Y: ArrayLike,
    grid: EvalGrid,
    cover: EvalGrid | None = None,
    evaluator: GridEvaluator | None = None,
) -> SupReport:
    """sup over ``grid`` of |g_n(x) - E g_n(x)|.

    Without a true regression on the problem, Y is taken to be centred.
    When the problem has g, ``total_sup`` additionally gives sup |g_n - g|.
    ``cover`` (a COVERING grid) switches on the A1/A2/A3 decomposition.
    A prebuilt ``evaluator`` for the same problem and grid may be passed.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape != problem.shape.dims:
        raise ValidationError(f"Y has shape {Y.shape}, expected {problem.shape.dims}")
    if cover is not None and (cover.kind != "COVERING" or cover.d != problem.d):
        raise ConfigurationError("cover must be a COVERING grid of the problem dimension")
    ev = evaluator if evaluator is not None else GridEvaluator(problem, grid)
    pts = ev.points
    eps = Y - ev.mean
    dev = ev.deviation(eps)

    k = int(np.argmax(np.abs(dev)))
    report = SupReport(float(abs(dev[k])), tuple(pts[k].tolist()), len(pts))
    if ev.truth is not None:
        report.total_sup = float(np.abs(dev + ev.fitted_mean - ev.truth).max())

    if cover is not None:
        centres = cover.points()
        c_num, c_den = _smooth_points(problem, eps, centres)
        c_mean = _smooth_points(problem, ev.mean, centres)[0] / c_den
        c_dev = c_num / c_den
        idx = np.ravel_multi_index(tuple(cover.cube_of(pts).T), (cover.per_axis,) * problem.d)
        report.A1 = float(np.abs(dev + ev.fitted_mean - (c_dev + c_mean)[idx]).max())
        report.A2 = float(np.abs(ev.fitted_mean - c_mean[idx]).max())
        report.A3 = float(np.abs(c_dev).max())
        report.cubes = len(centres)
        report.cube_side = cover.side
        report.cubes_capped = cover.capped
    return report
