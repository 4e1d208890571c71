from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from crossimpact.cost import (THREE_PHASE_BRACKETS, _expansion_coefficients, cost, cost_in_out,
                              cost_powerlaw_inout, exponential_expansion_cost, powerlaw_lambda, powerlaw_spec,
                              three_phase_bracket)
from crossimpact.errors import KernelDomainError, ValidationError
from crossimpact.model import (Exponential, KernelSpec, Linear, Permanent, PowerLaw, PowerLawSign, Strategy,
                               Tabulated, TabulatedImpact)


def dblquad_cost(spec, strat):
    """Oracle: scipy dblquad over every (trading phase, source phase) pair."""
    t = strat.times
    total = 0.0
    for i in range(spec.n_assets):
        for j in range(spec.n_assets):
            g, fn = spec.G[i][j], spec.f[i][j]
            for k in range(strat.n_phases):
                vi = strat.rates[k, i]
                for m in range(k + 1):
                    drift = float(fn(strat.rates[m, j]))
                    if vi == 0 or drift == 0:
                        continue
                    a, b, c, d = t[k], t[k + 1], t[m], t[m + 1]
                    val, _ = integrate.dblquad(lambda s, u: g(u - s), a, b, lambda u: c,
                                               lambda u: min(u, d), epsabs=1e-13, epsrel=1e-11)
                    total += vi * drift * val
    return total


SPECS = [
    KernelSpec.linear([[1.0, 0.3], [0.1, 0.7]]),
    KernelSpec.exponential([[1.0, 0.4], [0.4, 1.2]], [[0.5, 2.0], [2.0, 0.1]]),
    KernelSpec(2, [[Tabulated((0.0, 0.4, 1.5), (1.0, 0.7, 0.1)), Exponential(1.0)],
                   [Permanent(), Tabulated((0.0, 2.0), (1.0, 0.5))]],
               [[Linear(1.0), PowerLawSign(0.5, 0.6)], [TabulatedImpact((0.0, 1.0, 3.0), (0.0, 0.4, 0.9)),
                                                        Linear(0.8)]]),
]
STRATS = [
    Strategy.three_phase(1.0, 0.7, 2.0),
    Strategy.in_out([1.0, -0.5], [-2.0, 1.0], 1.5),
    Strategy([0.0, 0.3, 0.5, 1.4, 2.0], [[1.0, 0.0], [-0.5, 2.0], [0.2, -1.0], [-0.4, -0.1]]),
]


@pytest.mark.parametrize("spec", SPECS, ids=["permanent", "exponential", "mixed"])
@pytest.mark.parametrize("strat", STRATS, ids=["three_phase", "in_out", "four_phase"])
def test_cost_matches_dblquad(spec, strat):
    want = dblquad_cost(spec, strat)
    got = cost(spec, strat)
    assert got.total == pytest.approx(want, rel=1e-8, abs=1e-12)
    assert got.per_pair.sum() == pytest.approx(got.total)


@pytest.mark.parametrize("strat", STRATS, ids=["three_phase", "in_out", "four_phase"])
def test_quadrature_method_agrees_with_closed_form(strat):
    spec = SPECS[1]
    closed = cost(spec, strat, "closed_form")
    quad = cost(spec, strat, "quadrature")
    assert quad.method == "quadrature"
    assert quad.total == pytest.approx(closed.total, rel=1e-9)


def test_method_guards():
    with pytest.raises(ValidationError, match="no closed form"):
        cost(SPECS[2], STRATS[0], "closed_form")
    spec = powerlaw_spec([[1.0]], [[0.5]], [[0.5]])
    with pytest.raises(KernelDomainError):
        cost(spec, Strategy.in_out([1.0], [-1.0], 1.0), "quadrature")
    with pytest.raises(ValidationError, match="dimension"):
        cost(SPECS[0], Strategy([0.0, 1.0], [[1.0, 1.0, 1.0]]))
    with pytest.raises(ValidationError, match="unknown cost method"):
        cost(SPECS[0], STRATS[0], "magic")


def test_cost_in_out_components():
    spec = SPECS[1]
    v1, v2, T = np.array([1.0, -0.5]), np.array([-2.0, 1.0]), 1.5
    res = cost_in_out(spec, v1, v2, T)
    assert res.total == pytest.approx(cost(spec, Strategy.in_out(v1, v2, T)).total, rel=1e-12)
    assert set(res.components) == {"C_A", "C_B", "C_C"}
    assert res.components["C_A"].sum() + res.components["C_B"].sum() + res.components["C_C"].sum() == \
        pytest.approx(res.total)


@given(c=st.floats(0.1, 10.0), s=st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_linear_scaling(c, s):
    # linear impact: cost is quadratic in the rates; permanent kernel: quadratic in time
    spec = KernelSpec.linear([[1.0, 0.3], [0.2, 0.9]])
    base = Strategy([0.0, 0.5, 1.0, 1.5], [[1.0, -0.5], [-0.2, 1.0], [-0.8, -0.5]])
    c0 = cost(spec, base).total
    assert cost(spec, base.scaled(c)).total == pytest.approx(c * c * c0, rel=1e-10)
    assert cost(spec, base.time_scaled(s)).total == pytest.approx(s * s * c0, rel=1e-10)


@given(va=st.floats(0.1, 10), vb=st.floats(0.1, 10), T=st.floats(0.01, 10),
       eab=st.floats(0.0, 2.0), eba=st.floats(0.0, 2.0))
@settings(max_examples=50, deadline=None)
def test_three_phase_permanent_formula(va, vb, T, eab, eba):
    spec = KernelSpec.linear([[1.0, eab], [eba, 1.5]])
    got = cost(spec, Strategy.three_phase(va, vb, T)).total
    want = va * vb * T * T / 18 * (eba - eab)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12 * va * vb * T * T)


def test_powerlaw_lambda_against_single_asset_cost():
    # one asset: the equal-phase round trip cost is Lambda v^{1+delta}
    eta, gamma, delta, v, T = 0.7, 0.4, 0.6, 2.0, 3.0
    res = cost_powerlaw_inout([[eta]], [[gamma]], [[delta]], [v], T)
    want = cost(powerlaw_spec([[eta]], [[gamma]], [[delta]]), Strategy.in_out([v], [-v], T)).total
    assert res.total == pytest.approx(want, rel=1e-12)
    assert res.components["Lambda"][0, 0] == pytest.approx(powerlaw_lambda(eta, gamma, T))


def test_powerlaw_hedged_cross_term_sign():
    res = cost_powerlaw_inout([[1.0, 0.5], [0.5, 1.0]], [[0.5] * 2] * 2, [[0.5] * 2] * 2, [1.0, -1.0], 1.0)
    assert res.per_pair[0, 1] < 0 and res.per_pair[1, 0] < 0


@pytest.mark.parametrize("kw, msg", [
    (dict(gamma=[[1.0]]), "exponents"), (dict(delta=[[0.0]]), "impact exponents"),
    (dict(T=-1.0), "horizon"), (dict(eta=[[np.nan]]), "non-finite"),
])
def test_powerlaw_validation(kw, msg):
    args = dict(eta=[[1.0]], gamma=[[0.5]], delta=[[0.5]], v=[1.0], T=1.0)
    args.update(kw)
    with pytest.raises(ValidationError, match=msg):
        cost_powerlaw_inout(**args)


@pytest.mark.parametrize("pair", list(THREE_PHASE_BRACKETS))
@pytest.mark.parametrize("y", [1e-6, 0.3, 0.99, 1.0, 5.0])
def test_three_phase_bracket_against_mpmath(pair, y):
    import mpmath
    mpmath.mp.dps = 50
    rho, h = mpmath.mpf(y), mpmath.mpf(1)

    def g2(x):
        z = rho * x
        return (z - 1 + mpmath.e ** (-z)) / rho**2

    want = float(sum(c * g2(m * h) for m, c in THREE_PHASE_BRACKETS[pair].items()))
    assert three_phase_bracket(THREE_PHASE_BRACKETS[pair], y, 1.0) == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_expansion_coefficients_from_finite_differences():
    # first-order coefficients of each bracket in rho, in units of h^3
    coeffs = _expansion_coefficients()
    for pair, c in THREE_PHASE_BRACKETS.items():
        b0 = three_phase_bracket(c, 0.0, 1.0)
        b1 = three_phase_bracket(c, 1e-7, 1.0)
        assert (b1 - b0) / 1e-7 == pytest.approx(float(coeffs[pair]), rel=1e-5, abs=1e-9)


def _first_order_oracle(ra, rb, T=1.0):
    """``d/drho`` at 0 of the cost: ``-int int_{s<t} xa'(t) xb'(s) (t - s) ds dt``, phase by phase."""
    h = T / 3
    total = 0.0
    for k in range(3):
        for m in range(k + 1):
            if ra[k] == 0 or rb[m] == 0:
                continue
            val, _ = integrate.dblquad(lambda s, t: t - s, k * h, (k + 1) * h, m * h,
                                       lambda t, m=m: min(t, (m + 1) * h), epsabs=1e-14, epsrel=1e-12)
            total += ra[k] * rb[m] * val
    return -total


def test_expansion_self_coefficient_is_ten_27ths():
    # asset a trades (1, 0, -1) over thirds of T = 1: d cost / d rho = (10/27) / 6
    slope = _first_order_oracle((1.0, 0.0, -1.0), (1.0, 0.0, -1.0))
    assert slope == pytest.approx(float(Fraction(10, 27) / 6), rel=1e-10)
    eta = np.diag([1.0, 0.0])
    rho = np.array([[1e-3, 0.0], [0.0, 0.0]])
    _, lead = exponential_expansion_cost(eta, rho, np.array([1.0, 0.0]), 1.0)
    assert lead == pytest.approx(slope * 1e-3, rel=1e-10)


@pytest.mark.parametrize("pair", [(0, 1), (1, 0), (1, 1)])
def test_expansion_cross_coefficients(pair):
    rates = {0: (1.0, 0.0, -1.0), 1: (-1.0, 1.0, 0.0)}
    slope = _first_order_oracle(rates[pair[0]], rates[pair[1]])
    eta = np.zeros((2, 2))
    eta[pair] = 1.0
    eta[pair[::-1]] = 1.0
    rho = np.zeros((2, 2))
    rho[pair] = 1e-3
    _, lead = exponential_expansion_cost(eta, rho, np.array([1.0, 1.0]), 1.0)
    assert lead == pytest.approx(slope * 1e-3, rel=1e-10)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_expansion_converges_first_order(seed):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.05, 2.0, 3)
    rho = np.array([[r[0], r[1]], [r[1], r[2]]])
    eta = np.array([[1.0, 0.6], [0.6, 1.3]])
    v = rng.uniform(0.5, 2.0, 2)
    Ts = np.logspace(-3, -5, 5)
    errs = []
    for T in Ts:
        exact, lead = exponential_expansion_cost(eta, rho, v, T)
        errs.append(abs(exact - lead) / abs(exact))
    order = np.polyfit(np.log(Ts), np.log(errs), 1)[0]
    assert 0.9 < order < 1.1


def test_expansion_requires_symmetric_eta():
    with pytest.raises(ValidationError, match="symmetric"):
        exponential_expansion_cost([[1, 0.2], [0.1, 1]], [[1, 1], [1, 1]], [1, 1], 1.0)
