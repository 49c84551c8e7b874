"""JSON experiment configuration.

Every section mirrors a field of :class:`ExperimentConfig`; unknown keys
anywhere are rejected so that a typo cannot silently fall back to a
default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .. import _rng
from ..errors import ConfigurationError, ValidationError
from ..estimator import LIPSCHITZ_FUNCTIONS, BandwidthSchedule
from ..field_gen import GeneratorSpec, Innovation
from ..kernel import KernelSpec
from ..orlicz import MarginalSpec

__all__ = ["ExperimentConfig", "GridPolicy", "admissibility", "load_config", "parse_config", "parse_marginal"]

TOP_KEYS = {
    "d", "n", "generator", "kernel", "bandwidth", "regression", "grid", "replications",
    "seed", "error", "slope_tolerance", "variance", "conditions", "orlicz",
    "admissibility", "output", "workers",
}


def _section(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return obj


@dataclass(frozen=True)
class GridPolicy:
    """How evaluation grids are chosen.

    ``max_points`` caps the sup-norm grid, ``max_cubes`` the covering used
    for decomposition diagnostics, ``covering_floor`` the covering side.
    ``bias_points`` and ``oracle_points`` are per-axis counts of the
    deterministic grids; by default 401 (d = 1) or 61 (d >= 2).
    """

    max_points: int = 2**20
    max_cubes: int = 2**16
    covering_floor: float = 2.0**-20
    bias_points: int | None = None
    oracle_points: int | None = None

    def per_axis(self, which: str, d: int) -> int:
        v = self.bias_points if which == "bias" else self.oracle_points
        return v if v is not None else (401 if d == 1 else 61)


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    n: tuple[int, ...] = ()
    generator: GeneratorSpec = field(default_factory=lambda: GeneratorSpec.iid())
    kernel: KernelSpec | None = None
    bandwidth: BandwidthSchedule = field(default_factory=BandwidthSchedule)
    g_name: str = "sinusoid"
    B: float = 1.0
    battery: tuple[str, ...] = ("affine", "distance", "sinusoid", "max")
    grid: GridPolicy = field(default_factory=GridPolicy)
    replications: int = 100
    seed: int = 0
    error: str = "deviation"
    slope_tolerance: float = 0.12
    variance_slope_tolerance: float = 0.1
    x0: tuple[float, ...] | None = None
    oracle_n: tuple[int, ...] = (16, 32, 64)
    condition_ids: tuple[str, ...] = ("C1", "C2", "C3", "C4", "C'1", "C'2", "C'3")
    q: float = 1.0
    p: float = 4.0
    orlicz: dict = field(default_factory=dict)
    admissibility: dict | None = None
    output: dict = field(default_factory=dict)
    workers: int | None = None

    def __post_init__(self):
        if self.kernel is None:
            object.__setattr__(self, "kernel", KernelSpec.uniform(self.d))
        if self.kernel.d != self.d:
            raise ConfigurationError(f"kernel dimension {self.kernel.d} differs from d={self.d}")
        try:
            self.generator.check_dimension(self.d)
        except ValidationError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.error not in ("deviation", "total"):
            raise ConfigurationError(f"error must be 'deviation' or 'total', got {self.error!r}")
        for name in (self.g_name, *self.battery):
            if name not in LIPSCHITZ_FUNCTIONS:
                raise ConfigurationError(f"unknown regression function {name!r}")
        if not self.B > 0:
            raise ConfigurationError("Lipschitz constant B must be > 0")
        if self.x0 is None:
            object.__setattr__(self, "x0", (0.5,) * self.d)
        if len(self.x0) != self.d or not all(0 <= v <= 1 for v in self.x0):
            raise ConfigurationError("x0 must be a point of [0, 1]^d")
        try:
            _rng.check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def require_sizes(self, monte_carlo: bool, slope: bool = True):
        """Invariants of Monte Carlo studies: increasing n, enough replications, valid bandwidths."""
        ns = list(self.n)
        if not ns:
            raise ConfigurationError("config lists no lattice sizes n")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigurationError("n values must be strictly increasing")
        if slope and len(ns) < 4:
            raise ConfigurationError("slope fits need at least 4 values of n")
        if monte_carlo and self.replications < 30:
            raise ConfigurationError("Monte Carlo studies need at least 30 replications")
        return self.bandwidth.check(ns, self.d)


def _innovation(obj) -> Innovation:
    obj = _section(obj, {"law", "scale", "sigma", "a", "mean", "low", "high"}, "generator.innovation")
    law = obj.get("law", "gaussian")
    scale = obj.get("scale", obj.get("sigma", obj.get("a", 1.0)))
    mean = float(obj.get("mean", 0.0))
    if "low" in obj or "high" in obj:
        lo, hi = float(obj.get("low", -1.0)), float(obj.get("high", 1.0))
        mean = 0.5 * (lo + hi)
        scale = 0.5 * (hi - lo)
    return Innovation(law, float(scale), mean)


def _generator(obj, d) -> GeneratorSpec:
    obj = _section(obj, {"variant", "innovation", "coefficients", "link"}, "generator")
    variant = obj.get("variant", "IID")
    inn = _innovation(obj.get("innovation", {}))
    if variant == "LINEAR":
        table = []
        for entry in obj.get("coefficients", []):
            entry = _section(entry, {"offset", "value"}, "generator.coefficients[]")
            off = entry["offset"]
            table.append(((off,) if isinstance(off, int) else tuple(off), float(entry["value"])))
        return GeneratorSpec("LINEAR", inn, tuple(table))
    return GeneratorSpec(variant, inn, link=obj.get("link", "sign"))


def _kernel(obj, d) -> KernelSpec:
    obj = _section(obj, {"variant", "a", "b", "c", "C", "eta"}, "kernel")
    variant = obj.get("variant", "UNIFORM")
    declared = {k: float(obj[k]) for k in ("c", "C", "eta") if k in obj}
    if variant == "UNIFORM":
        return KernelSpec("UNIFORM", d, **declared)
    return KernelSpec("PEDESTAL", d, float(obj.get("a", 1.0)), float(obj.get("b", 1.0)), **declared)


def parse_config(raw: dict) -> ExperimentConfig:
    """Build a config from a decoded JSON document."""
    raw = _section(raw, TOP_KEYS, "config")
    if "d" not in raw:
        raise ConfigurationError("config needs the lattice dimension 'd'")
    d = raw["d"]
    if not isinstance(d, int) or d < 1:
        raise ConfigurationError(f"d must be a positive integer, got {d!r}")
    kw = {"d": d}
    try:
        if "n" in raw:
            ns = raw["n"]
            if not isinstance(ns, list) or not all(isinstance(v, int) and v >= 2 for v in ns):
                raise ConfigurationError("n must be a list of integers >= 2")
            kw["n"] = tuple(ns)
        if "generator" in raw:
            kw["generator"] = _generator(raw["generator"], d)
        if "kernel" in raw:
            kw["kernel"] = _kernel(raw["kernel"], d)
        if "bandwidth" in raw:
            b = _section(raw["bandwidth"], {"form", "theta1", "theta2", "value"}, "bandwidth")
            kw["bandwidth"] = BandwidthSchedule(
                b.get("form", "OPTIMAL_AS"), float(b.get("theta1", 0.0)), float(b.get("theta2", 0.0)), b.get("value")
            )
        if "regression" in raw:
            r = _section(raw["regression"], {"g", "B", "battery"}, "regression")
            if "g" in r:
                kw["g_name"] = r["g"]
            if "B" in r:
                kw["B"] = float(r["B"])
            if "battery" in r:
                kw["battery"] = tuple(r["battery"])
        if "grid" in raw:
            g = _section(
                raw["grid"], {"max_points", "max_cubes", "covering_floor", "bias_points", "oracle_points"}, "grid"
            )
            kw["grid"] = GridPolicy(**g)
        for key in ("replications", "seed", "workers"):
            if key in raw:
                if not isinstance(raw[key], int) or isinstance(raw[key], bool):
                    raise ConfigurationError(f"{key} must be an integer")
                kw[key] = raw[key]
        if "error" in raw:
            kw["error"] = raw["error"]
        if "slope_tolerance" in raw:
            kw["slope_tolerance"] = float(raw["slope_tolerance"])
        if "variance" in raw:
            v = _section(raw["variance"], {"x0", "oracle_n", "slope_tolerance"}, "variance")
            if "x0" in v:
                kw["x0"] = tuple(float(t) for t in v["x0"])
            if "oracle_n" in v:
                kw["oracle_n"] = tuple(int(t) for t in v["oracle_n"])
            if "slope_tolerance" in v:
                kw["variance_slope_tolerance"] = float(v["slope_tolerance"])
        if "conditions" in raw:
            c = _section(raw["conditions"], {"ids", "q", "p"}, "conditions")
            if "ids" in c:
                kw["condition_ids"] = tuple(c["ids"])
            if "q" in c:
                kw["q"] = float(c["q"])
            if "p" in c:
                kw["p"] = float(c["p"])
        if "orlicz" in raw:
            o = _section(raw["orlicz"], {"marginal", "beta", "alpha", "p", "tol", "u", "p_grid"}, "orlicz")
            if "marginal" in o:
                parse_marginal(o["marginal"])
            kw["orlicz"] = o
        if "admissibility" in raw:
            kw["admissibility"] = _section(raw["admissibility"], {"p", "a", "b"}, "admissibility")
        if "output" in raw:
            kw["output"] = _section(raw["output"], {"csv", "json"}, "output")
        return ExperimentConfig(**kw)
    except ConfigurationError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from exc


def parse_marginal(obj) -> MarginalSpec:
    obj = _section(obj, {"law", "value", "sample"}, "orlicz.marginal")
    try:
        return MarginalSpec(obj.get("law", "point"), float(obj.get("value", 1.0)), tuple(obj.get("sample", ())))
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def admissibility(d: int, schedule: BandwidthSchedule, p: float, a: float, b: float = 0.0, ns=()) -> dict:
    """Parameter inequalities of the polynomial-moment sup-norm rates.

    Almost-sure form: h_n = n^-theta2 (log n)^theta1 with
    theta = (2a(d+p) - d^2 - 2) / (d(3d+2)) >= theta2 and
    d(3d+2) theta1 + 2(d+p) b > 2.
    L^p form: theta' = (2a(d+p) - d^2) / (d(3d+2)) > 0 and h_n >= n^-theta'
    at every configured n.  These only validate parameters; rates that
    differ by n^eps cannot be told apart by simulation.
    """
    if not p > 2:
        raise ConfigurationError(f"p must be > 2, got {p}")
    if a < 0 or b < 0:
        raise ConfigurationError("a and b must be >= 0")
    if schedule.form == "POWERLOG":
        t1, t2 = schedule.theta1, schedule.theta2
    elif schedule.form == "OPTIMAL_AS":
        t1, t2 = 1.0 / (2 + d), d / (2.0 + d)
    elif schedule.form == "OPTIMAL_LP":
        t1, t2 = 0.0, d / (2.0 + d)
    else:
        t1, t2 = math.nan, math.nan
    denom = d * (3 * d + 2)
    theta_as = (2 * a * (d + p) - d * d - 2) / denom
    theta_lp = (2 * a * (d + p) - d * d) / denom
    as_ok = bool(t2 == t2 and theta_as >= t2 and denom * t1 + 2 * (d + p) * b > 2)
    lp_ok = theta_lp > 0 and all(schedule(n, d) >= n ** (-theta_lp) for n in ns)
    return {
        "theta1": t1,
        "theta2": t2,
        "theta_as": theta_as,
        "theta_lp": theta_lp,
        "as_admissible": as_ok,
        "lp_admissible": bool(lp_ok),
        "min_a_as": (t2 * denom + d * d + 2) / (2 * (d + p)),
        "min_a_lp": d * d / (2.0 * (d + p)),
    }
