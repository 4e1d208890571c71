import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from crossimpact.errors import KernelDomainError, ValidationError
from crossimpact.model import (Exponential, KernelSpec, Linear, Permanent, PowerLaw, PowerLawSign, Strategy,
                               Tabulated, TabulatedImpact, expected_price_path, in_out_turn, load_config)

KERNELS = [Permanent(), Exponential(0.7), Exponential(1e-6), Exponential(30.0), PowerLaw(0.4),
           Tabulated((0.0, 0.5, 2.0), (1.0, 0.6, 0.2)), Tabulated((0.3, 1.0), (0.9, 0.4))]


@pytest.mark.parametrize("kern", KERNELS, ids=lambda k: k.kind)
@pytest.mark.parametrize("x", [1e-3, 0.37, 2.5])
def test_primitives_match_quadrature(kern, x):
    g1, _ = integrate.quad(lambda u: kern(u) if u > 0 else kern(1e-300), 0, x, epsabs=0, epsrel=1e-12,
                           points=[p for p in kern.breakpoints if 0 < p < x] or None)
    g2, _ = integrate.quad(lambda u: float(kern.primitive(u)), 0, x, epsabs=0, epsrel=1e-12,
                           points=[p for p in kern.breakpoints if 0 < p < x] or None)
    assert float(kern.primitive(x)) == pytest.approx(g1, rel=1e-9)
    assert float(kern.double_primitive(x)) == pytest.approx(g2, rel=1e-9)


@given(rho=st.floats(1e-8, 50.0), x=st.floats(1e-6, 10.0))
def test_exponential_double_primitive_series_branch_continuous(rho, x):
    # compare against the series (y - 1 + e^-y)/rho^2 evaluated in extended precision
    import mpmath
    mpmath.mp.dps = 40
    y = mpmath.mpf(rho) * mpmath.mpf(x)
    want = float((y - 1 + mpmath.e ** (-y)) / mpmath.mpf(rho) ** 2)
    assert float(Exponential(rho).double_primitive(x)) == pytest.approx(want, rel=1e-12)


def test_kernel_domains():
    with pytest.raises(KernelDomainError):
        PowerLaw(0.5)(0.0)
    with pytest.raises(KernelDomainError):
        Exponential(1.0)(-1.0)
    for bad in (lambda: PowerLaw(1.0), lambda: PowerLaw(0.0), lambda: Exponential(-1.0),
                lambda: Exponential(float("nan")), lambda: PowerLawSign(1.0, 0.0), lambda: PowerLawSign(-1.0, 0.5)):
        with pytest.raises(ValidationError):
            bad()


def test_tabulated_kernel_validation():
    with pytest.raises(ValidationError):
        Tabulated((0.0, 0.0), (1.0, 0.5))
    with pytest.raises(ValidationError):
        Tabulated((0.0, 1.0), (1.0,))
    with pytest.raises(ValidationError, match="not non-increasing"):
        Tabulated((0.0, 1.0, 2.0), (1.0, 0.5, 0.7), assert_monotone=True)
    k = Tabulated((0.0, 1.0, 2.0), (1.0, 0.5, 0.7))
    assert not k.is_non_increasing()
    assert k(5.0) == 0.7 and k(0.5) == pytest.approx(0.75)


def test_impact_functions():
    assert Linear(2.0)(-1.5) == -3.0
    f = PowerLawSign(2.0, 0.5)
    assert f(-4.0) == pytest.approx(-4.0)
    assert not f.linear and PowerLawSign(1.0, 1.0).linear
    one_sided = TabulatedImpact((1.0, 2.0), (0.5, 0.8))
    assert one_sided(-2.0) == pytest.approx(-0.8)
    assert one_sided(0.5) == pytest.approx(0.25)
    assert one_sided(0.0) == 0.0
    two_sided = TabulatedImpact((-1.0, 0.0, 1.0), (-0.5, 0.0, 1.0))
    assert two_sided(-1.0) + two_sided(1.0) == pytest.approx(0.5)
    with pytest.raises(ValidationError, match="odd"):
        TabulatedImpact((-1.0, 0.0, 1.0), (-0.5, 0.0, 1.0), assert_odd=True)


def test_spec_roundtrip(tmp_path):
    spec = KernelSpec(2, [[Exponential(1.0), PowerLaw(0.3)], [Tabulated((0.0, 1.0), (1.0, 0.2)), Permanent()]],
                      [[Linear(1.0), PowerLawSign(0.4, 0.6)], [TabulatedImpact((0.0, 1.0), (0.0, 0.3)), Linear(-0.1)]],
                      noise_cov=[[1.0, 0.2], [0.2, 1.0]])
    path = tmp_path / "spec.json"
    spec.dump(path)
    back = KernelSpec.load(path)
    assert back.to_dict() == spec.to_dict()
    assert json.loads(path.read_text())["G"][0][1] == {"kind": "powerlaw", "params": {"gamma": 0.3}}


def test_spec_toml(tmp_path):
    path = tmp_path / "spec.toml"
    path.write_text('n_assets = 1\nG = [[{kind = "exponential", params = {rho = 2.0}}]]\n'
                    'f = [[{kind = "linear", params = {eta = 0.5}}]]\n')
    spec = KernelSpec.load(path)
    assert spec.G[0][0] == Exponential(2.0) and spec.eta()[0, 0] == 0.5


@pytest.mark.parametrize("doc, msg", [
    ({"G": [], "f": []}, "n_assets"),
    ({"n_assets": 1, "f": []}, "'G'"),
    ({"n_assets": 1, "G": [[{"kind": "nope"}]], "f": [[{"kind": "linear", "params": {"eta": 1}}]]}, "unknown kernel"),
    ({"n_assets": 1, "G": [[{"kind": "exponential", "params": {"tau": 1}}]],
      "f": [[{"kind": "linear", "params": {"eta": 1}}]]}, "bad parameters"),
    ({"n_assets": 2, "G": [[{"kind": "permanent"}]], "f": [[{"kind": "linear", "params": {"eta": 1}}]]}, "2x2"),
    ({"n_assets": 1, "G": [[{"kind": "permanent"}]], "f": [[{"kind": "linear", "params": {"eta": 1}}]],
      "noise_cov": [[-1.0]]}, "semidefinite"),
])
def test_spec_validation(doc, msg):
    with pytest.raises(ValidationError, match=msg):
        KernelSpec.from_dict(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("x = [")
    with pytest.raises(ValidationError, match="invalid TOML"):
        load_config(bad)
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_config(bad)


def test_strategy_validation():
    with pytest.raises(ValidationError):
        Strategy([0.0, 1.0, 1.0], [[1.0], [2.0]])
    with pytest.raises(ValidationError):
        Strategy([0.5, 1.0], [[1.0]])
    with pytest.raises(ValidationError):
        Strategy([0.0, 1.0], [[np.nan]])
    with pytest.raises(ValidationError, match="gap or overlap"):
        Strategy.from_phases([(0, 1, [1.0]), (1.5, 2, [-1.0])])


def test_strategy_csv_roundtrip(tmp_path):
    s = Strategy.three_phase(1.5, -0.25, 0.9, n_assets=3, a=2, b=0)
    path = tmp_path / "s.csv"
    s.to_csv(path)
    back = Strategy.from_csv(path)
    np.testing.assert_array_equal(back.times, s.times)
    np.testing.assert_array_equal(back.rates, s.rates)
    assert back.is_round_trip()


def test_strategy_csv_errors(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("start,end,r\n0,1,1\n")
    with pytest.raises(ValidationError, match="header"):
        Strategy.from_csv(p)
    p.write_text("phase_start,phase_end,rate_asset_0\n0,1,x\n")
    with pytest.raises(ValidationError, match=":2: non-numeric"):
        Strategy.from_csv(p)


@given(v2=st.floats(0.1, 10.0), kappa=st.one_of(st.just(0.0), st.floats(-10.0, -1e-6)), T=st.floats(0.01, 100.0))
def test_in_out_is_round_trip(v2, kappa, T):
    s = Strategy.in_out([kappa * v2, -kappa * v2 / 2], [v2, -v2 / 2], T)
    assert s.times[1] == pytest.approx(T / (1 - kappa))
    assert s.is_round_trip()


def test_in_out_errors():
    with pytest.raises(ValidationError, match="opposite signs"):
        in_out_turn([1.0], [1.0], 1.0)
    with pytest.raises(ValidationError, match="differs"):
        in_out_turn([1.0, 1.0], [-1.0, -2.0], 1.0)
    with pytest.raises(ValidationError, match="never unwound"):
        in_out_turn([1.0, 1.0], [-1.0, 0.0], 1.0)


def test_expected_price_path_oracle():
    spec = KernelSpec.exponential([[1.0, 0.3], [0.2, 0.8]], [[0.5, 1.0], [2.0, 0.1]])
    s = Strategy.three_phase(1.0, 0.6, 3.0)
    grid = np.linspace(0, 3.0, 13)
    got = expected_price_path(spec, s, grid)

    def rate(j, u):
        k = min(np.searchsorted(s.times, u, side="right") - 1, s.n_phases - 1)
        return s.rates[k, j]

    for i in range(2):
        for m, t in enumerate(grid):
            want = sum(integrate.quad(lambda u: spec.f[i][j](rate(j, u)) * spec.G[i][j](t - u), 0, t,
                                      points=[x for x in s.times if 0 < x < t] or None, epsabs=1e-14)[0]
                       for j in range(2)) if t > 0 else 0.0
            assert got[i, m] == pytest.approx(want, rel=1e-9, abs=1e-13)


def test_spec_eta_requires_linear():
    spec = KernelSpec(1, [[Permanent()]], [[PowerLawSign(1.0, 0.5)]])
    assert not spec.is_all_linear()
    with pytest.raises(ValidationError):
        spec.eta()
    assert math.isclose(KernelSpec.linear([[2.0]]).eta()[0, 0], 2.0)
