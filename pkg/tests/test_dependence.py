import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_smooth.dependence import (
    CONDITIONS,
    check_condition,
    lex_compare,
    marginal_of,
    mixing_profile,
    rio_bound,
    serfling_bound,
    sup_dist,
    v_set,
    v_set_contains,
)
from lattice_smooth.errors import DomainError, UnsupportedModelError
from lattice_smooth.field_gen import GeneratorSpec, Innovation, LatticeShape, generate, theoretical_covariance
from lattice_smooth.orlicz import MarginalSpec

MA = GeneratorSpec.linear({0: 1.0, 1: 0.5}, Innovation("gaussian", 1.0))
MD = GeneratorSpec.md_neighbor("sign", Innovation("rademacher"))


def test_lex_examples():
    assert lex_compare((0, 5), (1, -9)) == -1
    assert lex_compare((0, 1), (0, 3)) == -1
    assert lex_compare((2, 2), (2, 2)) == 0
    assert lex_compare((1, -9), (0, 5)) == 1
    with pytest.raises(DomainError):
        lex_compare((0,), (0, 1))


vec = st.lists(st.integers(-4, 4), min_size=3, max_size=3)


@settings(max_examples=300, deadline=None)
@given(vec, vec, vec)
def test_lex_is_strict_total_order(i, j, k):
    # coordinate 1 most significant: same as Python tuple order
    assert lex_compare(i, j) == (tuple(i) > tuple(j)) - (tuple(i) < tuple(j))
    assert lex_compare(i, j) == -lex_compare(j, i)
    if lex_compare(i, j) < 0 and lex_compare(j, k) < 0:
        assert lex_compare(i, k) < 0


def test_v_set_examples():
    assert v_set_contains((0,), 1, (-1,))
    assert not v_set_contains((0,), 3, (-2,))
    assert v_set_contains((0, 0), 2, (-2, 7))
    assert not v_set_contains((0, 0), 1, (0, 0))
    assert not v_set_contains((0, 0), 1, (0, 1))
    assert v_set_contains((0, 0), 1, (0, -1))
    with pytest.raises(DomainError):
        v_set_contains((0,), 0, (-1,))


def test_v_sets_nested_and_match_membership():
    i = (1, -1)
    R = 4
    box = [tuple(a + b for a, b in zip(i, off)) for off in itertools.product(range(-R, R + 1), repeat=2)]
    prev = None
    for k in range(1, R + 2):
        members = set(v_set(i, k, R))
        assert members == {j for j in box if v_set_contains(i, k, j)}
        if prev is not None:
            assert members <= prev
        prev = members
    # V^1 is half of the box minus the centre
    assert len(v_set(i, 1, R)) == ((2 * R + 1) ** 2 - 1) // 2


def test_mixing_profiles():
    iid = mixing_profile(GeneratorSpec.iid())
    assert all(iid.alpha_1_inf(r) == 0 for r in range(1, 6))
    ma = mixing_profile(MA)
    assert ma.alpha_1_inf(2) == 0 and ma.phi_inf_1(2) == 0
    assert ma.phi_inf_1(1) == 1.0 and not ma.exact(1)
    assert mixing_profile(MD).radius == 1
    for prof in (iid, ma, mixing_profile(GeneratorSpec.linear({-1: 1.0, 2: 1.0}))):
        alphas = [prof.alpha_1_inf(r) for r in range(1, 8)]
        phis = [prof.phi_inf_1(r) for r in range(1, 8)]
        assert alphas == sorted(alphas, reverse=True) and phis == sorted(phis, reverse=True)
        assert all(2 * a <= p for a, p in zip(alphas, phis))


def test_unsupported():
    spec = GeneratorSpec.iid()
    object.__setattr__(spec, "variant", "GIBBS")
    with pytest.raises(UnsupportedModelError):
        mixing_profile(spec)
    with pytest.raises(UnsupportedModelError):
        check_condition("C1", spec)
    with pytest.raises(DomainError):
        check_condition("C9", MA)


def test_bounds():
    assert serfling_bound(3.0, 0.0) == 0.0
    assert serfling_bound(1.0, 0.5) == 1.0
    assert rio_bound(MarginalSpec.point(1.0), 0.1, 4.0) == pytest.approx(4 * math.sqrt(0.1), abs=1e-12)
    with pytest.raises(DomainError):
        serfling_bound(-1.0, 0.5)
    with pytest.raises(DomainError):
        serfling_bound(1.0, 1.5)
    with pytest.raises(DomainError):
        rio_bound(MarginalSpec.point(1.0), 0.1, 2.0)


@pytest.mark.parametrize("cid", ["C1", "C2", "C3"])
@pytest.mark.parametrize(
    "spec", [MD, GeneratorSpec.md_neighbor("tanh", Innovation("uniform", 2.0)), GeneratorSpec.iid(Innovation("rademacher"))]
)
def test_projective_conditions_vanish_for_martingale_differences(cid, spec):
    rep = check_condition(cid, spec, {"q": 1.0, "p": 4.0})
    assert rep.verdict == "HOLDS_EXACT" and rep.value == 0.0


def test_c4_linear():
    rep = check_condition("C4", MA)
    assert rep.verdict == "HOLDS_EXACT"
    assert rep.value == 2.25
    assert rep.radius == 1
    ref = sum(abs(theoretical_covariance(MA, k)) for k in range(-5, 6))
    assert rep.value == pytest.approx(ref, abs=1e-12)


def test_c4_two_dim_matches_lag_sum():
    spec = GeneratorSpec.linear({(0, 0): 1.0, (1, 0): -0.4, (0, 2): 0.3}, Innovation("uniform", 1.0))
    rep = check_condition("C4", spec)
    ref = sum(abs(theoretical_covariance(spec, k)) for k in itertools.product(range(-6, 7), repeat=2))
    assert rep.value == pytest.approx(ref, abs=1e-12)
    assert rep.radius == 2


def test_c1_unbounded_is_undetermined():
    rep = check_condition("C1", MA)
    assert rep.verdict == "UNDETERMINED" and "bounded" in rep.reason
    assert check_condition("C'1", MA).verdict == "UNDETERMINED"


def test_linear_bounded_conditions():
    spec = GeneratorSpec.linear({0: 1.0, 1: 0.5}, Innovation("uniform", 1.0))
    c1 = check_condition("C1", spec)
    assert c1.verdict == "HOLDS_BOUND" and c1.value == pytest.approx(1.5**2)  # one past site within radius 1
    c3 = check_condition("C'3", spec, {"p": 4.0})
    assert c3.verdict == "HOLDS_BOUND"
    # three terms |k| <= 1, each (alpha M^4)^(1/2) with alpha = 1/4 and M = 1.5
    assert len(c3.terms) == 3
    assert c3.value == pytest.approx(3 * math.sqrt(0.25 * 1.5**4), abs=1e-12)
    c2 = check_condition("C'2", spec, {"q": 1.0})
    assert c2.value <= c2.params["sum_c_k_squared"] + 1e-12
    d = check_condition("C3", spec, {"p": 4.0})
    assert [t["k"] for t in d.terms] == [[-1]]


def test_mixing_conditions_exact_for_iid():
    for cid in ("C'1", "C'2", "C'3"):
        rep = check_condition(cid, GeneratorSpec.iid(Innovation("uniform", 1.0)), {"q": 1.0, "p": 3.0})
        assert rep.verdict in ("HOLDS_EXACT", "HOLDS_BOUND")
        # the only term is k = 0, at distance 0 <= m
        assert len(rep.terms) == 1


def test_parameter_validation():
    with pytest.raises(DomainError):
        check_condition("C2", MD)
    with pytest.raises(DomainError):
        check_condition("C3", MD, {"p": 2.0})
    with pytest.raises(DomainError):
        check_condition("C2", MD, {"q": 2.0})


def test_c2_gaussian_outside_space_is_undetermined():
    rep = check_condition("C2", MA, {"q": 1.5})  # beta = 6
    assert rep.verdict == "UNDETERMINED"


def test_report_serialisation():
    d = check_condition("C4", MA).to_dict()
    assert d["truncation_radius"] == 1 and d["condition"] == "C4"
    assert set(CONDITIONS) == {"C1", "C2", "C3", "C4", "C'1", "C'2", "C'3"}


def test_marginals():
    assert marginal_of(MA) == (MarginalSpec.gaussian(math.sqrt(1.25)), True)
    assert marginal_of(MD) == (MarginalSpec.point(1.0), True)
    z, exact = marginal_of(GeneratorSpec.md_neighbor("tanh", Innovation("uniform", 2.0)))
    assert z.sup == 2.0 and not exact
    assert marginal_of(GeneratorSpec.iid(Innovation("gaussian", 0.0)))[0].is_zero


def test_md_conditional_mean_regression_is_zero():
    """Regress eps_0 on a window of lexicographic-past values; coefficients within 4 SE of 0."""
    spec = GeneratorSpec.md_neighbor("tanh", Innovation("gaussian", 1.0))
    x = generate(spec, LatticeShape(2, 300), 5).values
    y = x[2:, 2:].ravel()
    cols = [x[1:-1, 2:], x[:-2, 2:], x[2:, 1:-1], x[2:, :-2], x[1:-1, 1:-1], np.tanh(x[1:-1, 2:])]
    X = np.column_stack([np.ones_like(y)] + [c.ravel() for c in cols])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    s2 = resid @ resid / (len(y) - X.shape[1])
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    assert np.all(np.abs(beta) < 4 * se)


def test_block_independence_beyond_radius_monte_carlo():
    """Exact zero mixing beyond m: block functionals at distance m + 1 are uncorrelated."""
    spec = GeneratorSpec.linear({(0, 0): 1.0, (1, 1): 0.7, (0, 1): -0.4}, Innovation("uniform", 1.0))
    m = mixing_profile(spec).radius
    R = 2000
    a = np.empty(R)
    b = np.empty(R)
    pair = np.empty((R, 2))
    for r in range(R):
        x = generate(spec, LatticeShape(2, 8), 1000 + r).values
        a[r] = x[:3, :3].sum()
        b[r] = x[3 + m :, :3].sum()  # rows at sup-distance >= m + 1 from the first block
        pair[r] = x[2, 0], x[3, 1]
    assert sup_dist((2, 0), (3 + m, 0)) == m + 1
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(R)
    # control: sites at lag (1, 1) share an innovation
    rho = theoretical_covariance(spec, (1, 1)) / theoretical_covariance(spec, (0, 0))
    assert abs(np.corrcoef(pair.T)[0, 1] - rho) < 4 / math.sqrt(R)
    assert rho > 8 / math.sqrt(R)
