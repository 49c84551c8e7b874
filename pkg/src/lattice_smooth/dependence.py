"""Lexicographic order, mixing profiles and dependence-condition checkers.

The projective conditions C1-C3 sum, over sites k lexicographically before
the origin, a norm of eps_k E(eps_0 | F_{V_0^|k|}) where V_0^r is the part
of the lexicographic past at sup-distance >= r.  C4 sums absolute
covariances.  The mixing conditions C'1-C'3 sum functionals of the
coefficients phi_{inf,1}(|k|) and alpha_{1,inf}(|k|).

Conditional expectations given an infinite past cannot be estimated
reliably, so the checkers only handle the shipped field families, for
which every term is either exactly zero by construction or bounded in
closed form:

* IID and MD_NEIGHBOR fields are martingale differences for the
  lexicographic past, so E(eps_0 | F_{V_0^r}) = 0 for every r >= 1 and all
  projective terms vanish.
* An m-dependent field (m = :func:`~lattice_smooth.field_gen.dependence_radius`)
  has E(eps_0 | F_{V_0^r}) = 0 and zero mixing coefficients for r > m.  For
  r <= m only trivial bounds are available (alpha <= 1/4, phi <= 1).

Sums over Z^d are truncated at the dependence radius, beyond which every
term is provably zero; the radius is part of each report.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import DomainError, UnsupportedModelError
from .field_gen import LINKS, VARIANTS, GeneratorSpec, dependence_radius, theoretical_covariance
from .orlicz import (
    MarginalSpec,
    beta_of_q,
    c_k_coefficient,
    d_k_coefficient,
    lp_norm,
    luxemburg_norm,
)

__all__ = [
    "lex_compare",
    "v_set_contains",
    "v_set",
    "MixingProfile",
    "mixing_profile",
    "ConditionReport",
    "check_condition",
    "serfling_bound",
    "rio_bound",
    "marginal_of",
    "CONDITIONS",
]

CONDITIONS = ("C1", "C2", "C3", "C4", "C'1", "C'2", "C'3")
ALPHA_TRIVIAL = 0.25
PHI_TRIVIAL = 1.0


def lex_compare(i, j) -> int:
    """-1 if i <_lex j, 0 if equal, 1 otherwise.  Coordinate 1 is most significant."""
    i, j = tuple(i), tuple(j)
    if len(i) != len(j):
        raise DomainError(f"cannot compare points of lengths {len(i)} and {len(j)}")
    for a, b in zip(i, j):
        if a != b:
            return -1 if a < b else 1
    return 0


def sup_dist(i, j) -> int:
    return max(abs(a - b) for a, b in zip(i, j))


def v_set_contains(i, k: int, j) -> bool:
    """j in V_i^k: j <_lex i and, for k >= 2, |i - j|_inf >= k."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    return lex_compare(j, i) < 0 and (k == 1 or sup_dist(i, j) >= k)


def v_set(i, k: int, radius: int):
    """Members of V_i^k inside the box of sup-radius ``radius`` around i."""
    i = tuple(i)
    out = []
    for off in itertools.product(range(-radius, radius + 1), repeat=len(i)):
        j = tuple(a + b for a, b in zip(i, off))
        if v_set_contains(i, k, j):
            out.append(j)
    return out


@dataclass(frozen=True)
class MixingProfile:
    """alpha_{1,inf}(r) and phi_{inf,1}(r) for an m-dependent field.

    Both are exactly zero for r > m; for r <= m the trivial bounds 1/4 and
    1 are reported and ``exact(r)`` is False.
    """

    model: str
    radius: int

    def alpha_1_inf(self, r: int) -> float:
        return 0.0 if r > self.radius else ALPHA_TRIVIAL

    def phi_inf_1(self, r: int) -> float:
        return 0.0 if r > self.radius else PHI_TRIVIAL

    def exact(self, r: int) -> bool:
        return r > self.radius


def mixing_profile(spec: GeneratorSpec) -> MixingProfile:
    if spec.variant not in VARIANTS:
        raise UnsupportedModelError(f"no mixing profile for variant {spec.variant!r}")
    return MixingProfile(spec.variant, dependence_radius(spec))


def marginal_of(spec: GeneratorSpec) -> tuple[MarginalSpec, bool]:
    """A law for |eps_0|: exact (flag True) or stochastically dominating (False)."""
    inn = spec.innovation
    if inn.scale == 0 and inn.law != "rademacher":
        return MarginalSpec.point(0.0), True

    def innovation_law(scale=1.0):
        if inn.law == "gaussian":
            return MarginalSpec.gaussian(scale * inn.scale)
        if inn.law == "uniform":
            return MarginalSpec.uniform(scale * inn.scale)
        return MarginalSpec.point(scale)

    if spec.variant == "IID":
        return innovation_law(), True
    if spec.variant == "LINEAR":
        weights = [a for _, a in spec.coefficients]
        if inn.law == "gaussian":
            return MarginalSpec.gaussian(inn.scale * math.sqrt(sum(a * a for a in weights))), True
        bound = inn.bound * sum(abs(a) for a in weights)
        exact = sum(1 for a in weights if a != 0) <= 1 and inn.law == "rademacher"
        return MarginalSpec.point(bound), exact
    # MD_NEIGHBOR: |eps_0| <= sup|f| |xi_0|
    _, fbound = LINKS[spec.link]
    exact = inn.law == "rademacher" and spec.link == "sign"
    return innovation_law(fbound), exact


def serfling_bound(M_inf: float, phi: float) -> float:
    """2 ||eps_0||_inf^2 phi, a bound on ||eps_k E_|k|(eps_0)||_inf."""
    if M_inf < 0:
        raise DomainError(f"M_inf must be >= 0, got {M_inf}")
    if not 0 <= phi <= 1:
        raise DomainError(f"phi must lie in [0, 1], got {phi}")
    return 2.0 * M_inf**2 * phi


def rio_bound(Z: MarginalSpec, alpha: float, p: float) -> float:
    """4 (int_0^alpha Q^p)^(2/p), a bound on ||eps_k E_|k|(eps_0)||_{p/2}."""
    return 4.0 * d_k_coefficient(Z, alpha, p) ** 2


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    value: float
    radius: int
    params: dict = field(default_factory=dict)
    terms: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "value": self.value,
            "truncation_radius": self.radius,
            "params": self.params,
            "reason": self.reason,
            "terms": self.terms,
        }


def _undetermined(cid, radius, params, reason):
    return ConditionReport(cid, "UNDETERMINED", math.nan, radius, params, [], reason)


def _lattice_offsets(d: int, radius: int, past_only: bool):
    origin = (0,) * d
    for k in itertools.product(range(-radius, radius + 1), repeat=d):
        if past_only and not v_set_contains(origin, 1, k):
            continue
        yield k


def check_condition(cid: str, spec: GeneratorSpec, params: dict | None = None, tol: float = 1e-12) -> ConditionReport:
    """Evaluate one of C1-C4, C'1-C'3 for a shipped field model.

    ``params`` carries ``q`` (0 < q < 2) for C2/C'2, ``p`` (> 2) for C3/C'3
    and ``d`` (lattice dimension; taken from LINEAR coefficients otherwise,
    default 1).
    """
    if cid not in CONDITIONS:
        raise DomainError(f"unknown condition {cid!r}; expected one of {CONDITIONS}")
    if spec.variant not in VARIANTS:
        raise UnsupportedModelError(f"no checker for variant {spec.variant!r}")
    params = dict(params or {})
    d = spec.coefficient_dim or int(params.get("d", 1))
    params["d"] = d
    m = dependence_radius(spec)
    marg, marg_exact = marginal_of(spec)
    bounded = math.isfinite(marg.sup)

    if cid in ("C2", "C'2"):
        q = params.get("q")
        if q is None:
            raise DomainError(f"{cid} needs parameter q")
        beta = beta_of_q(q)
        params["beta"] = beta
        norm = luxemburg_norm(marg, beta, tol)
        if not math.isfinite(norm):
            return _undetermined(cid, m, params, f"|eps_0| bound is not in L_psi_{beta:g}")
    if cid in ("C3", "C'3"):
        p = params.get("p")
        if p is None or not p > 2:
            raise DomainError(f"{cid} needs parameter p > 2")
    if cid in ("C1", "C'1") and not bounded:
        return _undetermined(cid, m, params, "eps_0 is not essentially bounded")

    if cid == "C4":
        terms = []
        for k in _lattice_offsets(d, m, past_only=False):
            cov = theoretical_covariance(spec, k)
            if cov != 0.0:
                terms.append({"k": list(k), "value": abs(cov), "exact": True})
        total = sum(t["value"] for t in terms)
        return ConditionReport(cid, "HOLDS_EXACT", total, m, params, terms)

    if cid in ("C1", "C2", "C3"):
        if spec.variant in ("IID", "MD_NEIGHBOR") or m == 0:
            return ConditionReport(
                cid, "HOLDS_EXACT", 0.0, 0, params, [], "martingale difference: every projective term is zero"
            )
        terms = []
        for k in _lattice_offsets(d, m, past_only=True):
            terms.append(_projective_term(cid, k, marg, params, tol))
        total = sum(t["value"] for t in terms)
        return ConditionReport(cid, "HOLDS_BOUND", total, m, params, terms)

    # mixing conditions, summed over all k in Z^d with |k| <= m
    prof = mixing_profile(spec)
    terms = []
    for k in _lattice_offsets(d, m, past_only=False):
        r = max((abs(v) for v in k), default=0)
        terms.append(_mixing_term(cid, r, k, prof, marg, params, tol))
    total = sum(t["value"] for t in terms)
    if cid == "C'2":
        extra_total = sum(t["c_k_squared"] for t in terms)
        params["sum_c_k_squared"] = extra_total
        total = min(total, extra_total)
    verdict = "HOLDS_EXACT" if all(t["exact"] for t in terms) else "HOLDS_BOUND"
    report = ConditionReport(cid, verdict, total, m, params, terms)
    if not marg_exact:
        report.reason = "terms use a dominating law for |eps_0|"
    return report


def _projective_term(cid, k, marg, params, tol):
    if cid == "C1":
        # |eps_k E(eps_0|.)| <= ||eps_0||_inf^2, no better than Serfling with phi = 1
        holder = marg.sup**2
        value, how = min((holder, "holder"), (serfling_bound(marg.sup, PHI_TRIVIAL), "serfling"))
    elif cid == "C2":
        # sqrt|XY| <= (|X|/a + a|Y|)/2 and conditional Jensen give ||eps_0||_psi^2
        value, how = luxemburg_norm(marg, params["beta"], tol) ** 2, "orlicz-holder"
    else:
        p = params["p"]
        value, how = min((lp_norm(marg, p) ** 2, "holder"), (rio_bound(marg, ALPHA_TRIVIAL, p), "rio"))
    return {"k": list(k), "value": value, "exact": False, "bound": how}


def _mixing_term(cid, r, k, prof, marg, params, tol):
    exact = prof.exact(r)
    if cid == "C'1":
        value = prof.phi_inf_1(r)
        return {"k": list(k), "value": value, "exact": exact}
    alpha = prof.alpha_1_inf(r)
    if cid == "C'2":
        value = math.sqrt(prof.phi_inf_1(r))
        ck = c_k_coefficient(marg, alpha, params["beta"], tol)
        return {"k": list(k), "value": value, "c_k_squared": ck * ck, "exact": exact}
    value = d_k_coefficient(marg, alpha, params["p"]) ** 2
    return {"k": list(k), "value": value, "exact": exact}
