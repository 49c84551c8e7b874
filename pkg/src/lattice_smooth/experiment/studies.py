"""Monte Carlo and deterministic studies built on the estimator.

Every study returns a report dataclass plus a list of CSV rows
``(study, d, n, h, replicate, statistic, value)``.  Replication ``r`` at
lattice size ``n`` draws its field with ``derive_seed(master, n, r)``, so
results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import _rng
from ..dependence import check_condition
from ..errors import ConfigurationError, DomainError, LatticeSmoothError
from ..estimator import (
    EstimationProblem,
    EvalGrid,
    GridEvaluator,
    _as_point,
    _window,
    auto_grid,
    lipschitz_function,
    second_moment,
    sup_deviation,
    target_rate,
    weight_sum,
)
from ..field_gen import LatticeShape, dependence_radius, generate, marginal_variance, theoretical_covariance
from ..orlicz import (
    DEFAULT_P_GRID,
    c_k_coefficient,
    ck_equivalence_diag,
    d_k_coefficient,
    lp_norm,
    luxemburg_norm,
    norm_equivalence_diag,
    quantile_q,
)
from .config import ExperimentConfig, admissibility, parse_marginal

__all__ = [
    "CSV_HEADER",
    "RateRow",
    "RateReport",
    "BiasReport",
    "VarianceReport",
    "fit_slope",
    "run_rate_study",
    "run_bias_study",
    "run_variance_study",
    "run_simulate",
    "run_estimate",
    "run_conditions",
    "run_orlicz",
    "write_csv",
    "csv_text",
    "write_json",
]

CSV_HEADER = ("study", "d", "n", "h", "replicate", "statistic", "value")
THREADS_ENV = "LATTICE_SMOOTH_THREADS"


# --- plumbing -----------------------------------------------------------------


def fit_slope(points) -> tuple[float, float, float]:
    """Ordinary least squares through ``(x, y)`` pairs: (slope, intercept, stderr of slope).

    Needs at least 3 points and 2 distinct x values; repeated x values are
    allowed.  The standard error is 0 for collinear input.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise DomainError(f"need at least 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("points must be finite")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0 or len(np.unique(x)) < 2:
        raise DomainError("x values are degenerate (fewer than 2 distinct)")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = len(pts) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    return slope, intercept, math.sqrt(s2 / sxx)


def _workers(config: ExperimentConfig) -> int:
    if config.workers is not None:
        return config.workers
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be >= 1")
        return cap
    return os.cpu_count() or 1


def _replicate_map(config: ExperimentConfig, fn, n: int):
    """fn(r, seed) for r = 0..R-1, in replication order."""
    seeds = [_rng.derive_seed(config.seed, n, r) for r in range(config.replications)]

    def task(r):
        try:
            return fn(r, seeds[r])
        except LatticeSmoothError as exc:
            raise type(exc)(f"replication {r} at n={n} (seed {seeds[r]}) failed: {exc}") from exc

    workers = min(_workers(config), config.replications)
    if workers <= 1:
        return [task(r) for r in range(config.replications)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(config.replications)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        study, d, n, h, rep, stat, val = row
        w.writerow((study, _fmt(d), _fmt(n), _fmt(h), _fmt(rep), stat, _fmt(val)))
    return buf.getvalue()


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _problem(config: ExperimentConfig, n: int, h: float, g_name: str | None = None):
    g = lipschitz_function(g_name or config.g_name, config.B, config.d)
    return EstimationProblem(LatticeShape(config.d, n), config.kernel, h, g, config.B)


# --- rate study ---------------------------------------------------------------


@dataclass
class RateRow:
    n: int
    h: float
    replications: int
    mean: float
    median: float
    q90: float
    grid_points: int
    grid_capped: bool


@dataclass
class RateReport:
    d: int
    error: str
    rows: list[RateRow]
    slope: float | None
    intercept: float | None
    stderr: float | None
    theoretical_slope: float
    tolerance: float
    verdict: str
    monotone_fraction: float
    quantile_slope: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def run_rate_study(config: ExperimentConfig) -> tuple[RateReport, list]:
    """Sup-norm error over n, regressed on log(n^-d log n)."""
    hs = config.require_sizes(monte_carlo=True)
    d = config.d
    rows_out, csv_rows = [], []
    for n, h in zip(config.n, hs):
        prob = _problem(config, n, h)
        grid, info = auto_grid(prob, target_rate(n, h, d), config.grid.max_points, config.grid.covering_floor)
        ev = GridEvaluator(prob, grid)
        shape = prob.shape
        design = prob.design_values

        def one(r, seed, prob=prob, grid=grid, ev=ev, shape=shape, design=design):
            eps = generate(config.generator, shape, seed).values
            rep = sup_deviation(prob, design + eps, grid, evaluator=ev)
            return rep.total_sup if config.error == "total" else rep.sup

        sups = np.array(_replicate_map(config, one, n))
        for r, s in enumerate(sups):
            csv_rows.append(("rates", d, n, h, r, "sup", s))
        row = RateRow(
            n, h, len(sups), float(sups.mean()), float(np.median(sups)), float(np.quantile(sups, 0.9)),
            grid.count, bool(info["capped"]),
        )
        rows_out.append(row)
        for stat in ("mean", "median", "q90"):
            csv_rows.append(("rates", d, n, h, None, stat, getattr(row, stat)))
        csv_rows.append(("rates", d, n, h, None, "grid_points", grid.count))

    theo = 1.0 / (2 + d)
    pairs = list(zip(rows_out, rows_out[1:]))
    mono = sum(1 for a, b in pairs if b.mean <= a.mean) / len(pairs)
    if all(r.mean == 0.0 for r in rows_out):
        report = RateReport(d, config.error, rows_out, None, None, None, theo, config.slope_tolerance, "DEGENERATE", mono)
    elif any(r.mean == 0.0 for r in rows_out):
        raise DomainError("some but not all mean sup errors are zero; cannot fit a log-log slope")
    else:
        xs = [math.log(math.log(r.n) / r.n**d) for r in rows_out]
        slope, icpt, se = fit_slope([(x, math.log(r.mean)) for x, r in zip(xs, rows_out)])
        qslope = fit_slope([(x, math.log(r.q90)) for x, r in zip(xs, rows_out)])[0] if all(r.q90 > 0 for r in rows_out) else None
        verdict = "PASS" if abs(slope - theo) <= config.slope_tolerance else "FAIL"
        report = RateReport(d, config.error, rows_out, slope, icpt, se, theo, config.slope_tolerance, verdict, mono, qslope)
        csv_rows += [
            ("rates", d, None, None, None, "slope", slope),
            ("rates", d, None, None, None, "slope_stderr", se),
            ("rates", d, None, None, None, "q90_slope", qslope),
        ]
    csv_rows += [
        ("rates", d, None, None, None, "theoretical_slope", theo),
        ("rates", d, None, None, None, "slope_tolerance", config.slope_tolerance),
        ("rates", d, None, None, None, "monotone_fraction", mono),
    ]
    return report, csv_rows


# --- bias study ---------------------------------------------------------------


@dataclass
class BiasReport:
    d: int
    B: float
    per_n: list[dict]
    max_ratio: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


class _PointSmoother:
    """Normalised kernel sums at fixed points, with the windows computed once."""

    def __init__(self, problem: EstimationProblem, grid: EvalGrid):
        self.refine = grid.refinement(problem.n)
        self.problem = problem
        self.points = grid.points()
        if self.refine is None:
            self.windows = [_window(problem, x) for x in self.points]
            self.den = np.array([w.sum() for _, w in self.windows])
        else:
            self.ev = GridEvaluator(EstimationProblem(problem.shape, problem.kernel, problem.h), grid)

    def __call__(self, values):
        if self.refine is not None:
            return self.ev.deviation(values)
        return np.array([(w * values[sl]).sum() for sl, w in self.windows]) / self.den


def run_bias_study(config: ExperimentConfig) -> tuple[BiasReport, list]:
    """max over grid and battery of |E g_n - g|, against B h_n. Fully deterministic."""
    if not config.n:
        raise ConfigurationError("config lists no lattice sizes n")
    hs = config.require_sizes(monte_carlo=False, slope=False)
    d, B = config.d, config.B
    grid = EvalGrid("UNIFORM", d, config.grid.per_axis("bias", d) - 1)
    per_n, rows = [], []
    ok = True
    for n, h in zip(config.n, hs):
        base = EstimationProblem(LatticeShape(d, n), config.kernel, h)
        smooth = _PointSmoother(base, grid)
        worst, worst_g, worst_x = 0.0, None, None
        for name in config.battery:
            g = lipschitz_function(name, B, d)
            design = _problem(config, n, h, name).design_values
            err = np.abs(smooth(design) - np.asarray(g(smooth.points), dtype=float))
            k = int(np.argmax(err))
            rows.append(("bias", d, n, h, None, f"max_abs_bias:{name}", float(err[k])))
            if err[k] > worst or worst_g is None:
                worst, worst_g, worst_x = float(err[k]), name, smooth.points[k].tolist()
        bound = B * h
        holds = worst <= bound + 1e-12
        ok &= holds
        per_n.append({
            "n": n, "h": h, "max_abs_bias": worst, "bound": bound, "ratio": worst / h,
            "argmax_g": worst_g, "argmax_x": worst_x, "holds": holds, "grid_points": grid.count,
        })
        rows += [
            ("bias", d, n, h, None, "max_abs_bias", worst),
            ("bias", d, n, h, None, "bound", bound),
            ("bias", d, n, h, None, "ratio", worst / h),
        ]
    max_ratio = max(p["ratio"] for p in per_n)
    return BiasReport(d, B, per_n, max_ratio, "PASS" if ok else "FAIL"), rows


# --- variance study -----------------------------------------------------------


@dataclass
class VarianceReport:
    d: int
    oracle: list[dict]
    mc: list[dict]
    slope: float | None
    stderr: float | None
    theoretical_slope: float
    tolerance: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def _cov_fn(spec):
    cache = {}

    def cov(lag):
        if lag not in cache:
            cache[lag] = theoretical_covariance(spec, lag)
        return cache[lag]

    return cov


def abs_cov_sum(spec, d: int) -> float:
    m = dependence_radius(spec)
    cov = _cov_fn(spec)
    return sum(abs(cov(tuple(v - m for v in k))) for k in np.ndindex(*([2 * m + 1] * d)))


def variance_oracle(config: ExperimentConfig, n: int, h: float) -> dict:
    """Exact E S_n(x)^2 against (sum |cov|) * sum a(x) * max(1, C) at every oracle grid point."""
    d, spec = config.d, config.generator
    prob = EstimationProblem(LatticeShape(d, n), config.kernel, h)
    grid = EvalGrid("UNIFORM", d, config.grid.per_axis("oracle", d) - 1)
    m = dependence_radius(spec)
    cov = _cov_fn(spec)
    total_cov = abs_cov_sum(spec, d)
    factor = max(1.0, config.kernel.C)
    worst_ratio = 0.0
    ok = True
    for x in grid.points():
        es2 = second_moment(prob, cov, m, x)
        bound = total_cov * weight_sum(prob, x) * factor
        if es2 > bound * (1 + 1e-12) + 1e-12:
            ok = False
        if bound > 0:
            worst_ratio = max(worst_ratio, es2 / bound)
    return {"n": n, "h": h, "abs_cov_sum": total_cov, "max_ratio": worst_ratio, "holds": ok, "points": grid.count}


def run_variance_study(config: ExperimentConfig, oracle: bool = True) -> tuple[VarianceReport, list]:
    """Oracle second-moment bound on small n, then Monte Carlo slope of RMS V_n(x0) vs log(n h)."""
    d, spec = config.d, config.generator
    rows = []
    oracle_rows = []
    ok = True
    if oracle:
        ons = sorted(config.oracle_n)
        for n, h in zip(ons, config.bandwidth.check(ons, d)):
            rep = variance_oracle(config, n, h)
            ok &= rep["holds"]
            oracle_rows.append(rep)
            rows += [
                ("variance_oracle", d, n, h, None, "max_ratio", rep["max_ratio"]),
                ("variance_oracle", d, n, h, None, "holds", rep["holds"]),
            ]

    hs = config.require_sizes(monte_carlo=True)
    mc = []
    for n, h in zip(config.n, hs):
        prob = EstimationProblem(LatticeShape(d, n), config.kernel, h)
        sl, w = _window(prob, _as_point(prob, config.x0))
        wsum = float(w.sum())
        shape = prob.shape

        def one(r, seed, sl=sl, w=w, wsum=wsum, shape=shape):
            eps = generate(spec, shape, seed).values
            return float((w * eps[sl]).sum()) / wsum

        vals = np.array(_replicate_map(config, one, n))
        for r, v in enumerate(vals):
            rows.append(("variance", d, n, h, r, "V_n(x0)", v))
        rms = float(np.sqrt(np.mean(vals**2)))
        predicted = math.sqrt(second_moment(prob, _cov_fn(spec), dependence_radius(spec), config.x0)) / wsum
        mc.append({"n": n, "h": h, "nh": n * h, "rms": rms, "predicted_rms": predicted, "replications": len(vals)})
        rows += [
            ("variance", d, n, h, None, "rms", rms),
            ("variance", d, n, h, None, "predicted_rms", predicted),
        ]

    theo = -d / 2.0
    tol = config.variance_slope_tolerance
    if all(r["rms"] == 0 for r in mc):
        slope = se = None
        verdict = "DEGENERATE" if ok else "FAIL"
    else:
        slope, _, se = fit_slope([(math.log(r["nh"]), math.log(r["rms"])) for r in mc])
        verdict = "PASS" if ok and abs(slope - theo) <= tol else "FAIL"
        rows += [("variance", d, None, None, None, "slope", slope), ("variance", d, None, None, None, "slope_stderr", se)]
    rows += [("variance", d, None, None, None, "theoretical_slope", theo)]
    return VarianceReport(d, oracle_rows, mc, slope, se, theo, tol, verdict), rows


# --- single-realisation tools ---------------------------------------------------


def run_simulate(config: ExperimentConfig) -> tuple[dict, list]:
    """One field per n: empirical mean, variance and lag-1 covariances against theory."""
    if not config.n:
        raise ConfigurationError("config lists no lattice sizes n")
    d, spec = config.d, config.generator
    rows, out = [], []
    for n in config.n:
        seed = _rng.derive_seed(config.seed, n, 0)
        v = generate(spec, LatticeShape(d, n), seed).values
        entry = {"n": n, "seed": seed, "mean": float(v.mean()), "variance": float(v.var()),
                 "theoretical_variance": marginal_variance(spec)}
        for k in range(d):
            lag = tuple(1 if j == k else 0 for j in range(d))
            a = v[tuple(slice(1, None) if j == k else slice(None) for j in range(d))]
            b = v[tuple(slice(None, -1) if j == k else slice(None) for j in range(d))]
            entry[f"cov_lag_e{k + 1}"] = float((a * b).mean())
            entry[f"theoretical_cov_lag_e{k + 1}"] = theoretical_covariance(spec, lag)
        out.append(entry)
        for key, val in entry.items():
            if key not in ("n",):
                rows.append(("simulate", d, n, None, 0, key, val))
    return {"study": "simulate", "d": d, "fields": out}, rows


def run_estimate(config: ExperimentConfig) -> tuple[dict, list]:
    """One replication per n with the covering decomposition of the sup deviation."""
    if not config.n:
        raise ConfigurationError("config lists no lattice sizes n")
    hs = config.require_sizes(monte_carlo=False, slope=False)
    d = config.d
    rows, out = [], []
    for n, h in zip(config.n, hs):
        prob = _problem(config, n, h)
        grid, info = auto_grid(prob, target_rate(n, h, d), config.grid.max_points, config.grid.covering_floor)
        cover = EvalGrid.covering(info["covering_side"], d, config.grid.max_cubes)
        seed = _rng.derive_seed(config.seed, n, 0)
        Y = prob.design_values + generate(config.generator, prob.shape, seed).values
        rep = sup_deviation(prob, Y, grid, cover)
        entry = {"n": n, "h": h, "seed": seed, "sup_deviation": rep.sup, "sup_total": rep.total_sup,
                 "A1": rep.A1, "A2": rep.A2, "A3": rep.A3, "decomposition_bound": rep.decomposition_bound,
                 "grid_points": rep.points, "cubes": rep.cubes, "cube_side": rep.cube_side,
                 "cubes_capped": rep.cubes_capped, "target_rate": target_rate(n, h, d)}
        out.append(entry)
        for key, val in entry.items():
            if key not in ("n", "h"):
                rows.append(("estimate", d, n, h, 0, key, val))
    return {"study": "estimate", "d": d, "g": config.g_name, "B": config.B, "rows": out}, rows


def run_conditions(config: ExperimentConfig) -> tuple[dict, list]:
    d = config.d
    reports, rows = [], []
    for cid in config.condition_ids:
        rep = check_condition(cid, config.generator, {"q": config.q, "p": config.p, "d": d})
        reports.append(rep.to_dict())
        rows.append(("conditions", d, None, None, None, f"{cid}:value", rep.value))
        rows.append(("conditions", d, None, None, None, f"{cid}:truncation_radius", rep.radius))
    payload = {"study": "conditions", "d": d, "reports": reports}
    if config.admissibility is not None:
        adm = config.admissibility
        payload["admissibility"] = admissibility(
            d, config.bandwidth, float(adm.get("p", config.p)), float(adm.get("a", 0.0)), float(adm.get("b", 0.0)), config.n
        )
    return payload, rows


def run_orlicz(config: ExperimentConfig) -> tuple[dict, list]:
    o = config.orlicz
    Z = parse_marginal(o.get("marginal", {}))
    beta = float(o.get("beta", 2.0))
    alpha = float(o.get("alpha", 0.1))
    p = float(o.get("p", config.p))
    tol = float(o.get("tol", 1e-12))
    p_grid = tuple(float(v) for v in o.get("p_grid", DEFAULT_P_GRID))
    res = {
        "luxemburg_norm": luxemburg_norm(Z, beta, tol),
        "c_k": c_k_coefficient(Z, alpha, beta, tol),
        "d_k": d_k_coefficient(Z, alpha, p),
        "lp_norm": lp_norm(Z, p),
    }
    if "u" in o:
        res["Q(u)"] = quantile_q(Z, float(o["u"]))
    lux, best = norm_equivalence_diag(Z, beta, p_grid)
    ck, dbest = ck_equivalence_diag(Z, alpha, beta, p_grid)
    res["moment_sup_over_p"] = best
    res["dk_sup_over_p"] = dbest
    rows = [("orlicz", None, None, None, None, k, v) for k, v in res.items()]
    payload = {"study": "orlicz", "marginal": {"law": Z.law, "value": Z.value}, "beta": beta, "alpha": alpha,
               "p": p, "tol": tol, "results": res}
    return payload, rows
