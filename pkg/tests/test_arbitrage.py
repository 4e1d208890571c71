import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossimpact.arbitrage import (CONDITIONS, constructive_search, default_horizon, size_bound_check,
                                   slippage_ratio, spectral_check, verify_certificate)
from crossimpact.cost import cost, powerlaw_spec
from crossimpact.errors import ValidationError
from crossimpact.model import Exponential, KernelSpec, Linear, PowerLawSign, Strategy, TabulatedImpact


def assert_certificate(spec, rep, condition):
    assert rep.admits_manipulation
    assert rep.binding_condition == condition
    assert rep.certificate.is_round_trip()
    assert cost(spec, rep.certificate).total == pytest.approx(rep.certificate_cost)
    assert rep.certificate_cost < 0


def test_spectral_detects_nonuniform_decay():
    spec = KernelSpec.exponential([[1.0, 0.9], [0.9, 1.0]], [[0.01, 0.2], [0.2, 0.01]])
    rep = spectral_check(spec)
    assert rep.min_eigenvalue < 0
    assert_certificate(spec, rep, "SpectralNegativity")


def test_spectral_clean_on_uniform_decay():
    rep = spectral_check(KernelSpec.exponential([[1.0, 0.5], [0.5, 1.0]], [[1.0, 1.0], [1.0, 1.0]]))
    assert not rep.admits_manipulation and rep.min_eigenvalue > 0 and rep.certificate is None


def test_spectral_guards():
    with pytest.raises(ValidationError, match="linear"):
        spectral_check(KernelSpec(1, [[Exponential(1.0)]], [[PowerLawSign(1.0, 0.5)]]))
    with pytest.raises(ValidationError, match="bounded"):
        spectral_check(powerlaw_spec([[1.0]], [[0.5]], [[1.0]]))
    with pytest.raises(ValidationError, match="grid_size"):
        spectral_check(KernelSpec.linear([[1.0]]), grid_size=1)


def test_nonzero_at_zero():
    G = [[Exponential(1.0)] * 2 for _ in range(2)]
    spec = KernelSpec(2, G, [[Linear(1.0), TabulatedImpact((-1, 0, 1), (0.1, 0.1, 0.6))],
                             [Linear(0.3), Linear(1.0)]])
    assert_certificate(spec, constructive_search(spec), "NonzeroAtZero")


def test_nonlinear_self_impact():
    G = [[Exponential(1.0)] * 2 for _ in range(2)]
    spec = KernelSpec(2, G, [[PowerLawSign(1.0, 0.5), Linear(0.0)], [Linear(0.0), Linear(1.0)]])
    assert_certificate(spec, constructive_search(spec), "NonlinearityWithBoundedKernel")


def test_size_bound_violation_under_uniform_decay():
    spec = KernelSpec.exponential([[1.0, 1.2], [1.2, 1.0]], [[1.0, 1.0], [1.0, 1.0]])
    assert_certificate(spec, constructive_search(spec), "SizeBound")


def test_nonuniform_decay_found_by_search():
    spec = KernelSpec.exponential([[1.0, 0.9], [0.9, 1.0]], [[0.01, 0.2], [0.2, 0.01]])
    assert_certificate(spec, constructive_search(spec), "DecayRateCondition")


def test_powerlaw_equal_exponents_no_certificate():
    spec = powerlaw_spec([[1, 0.5], [0.5, 1]], [[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]])
    rep = constructive_search(spec)
    assert not rep.admits_manipulation and rep.binding_condition == "None"


def test_powerlaw_warning_single_asset():
    spec = powerlaw_spec([[1.0]], [[0.2]], [[0.5]])
    rep = constructive_search(spec)
    assert any("single-asset" in w for w in rep.warnings)


def test_threads_give_same_certificate():
    spec = KernelSpec.linear([[1.0, 0.2], [0.1, 1.0]])
    a = constructive_search(spec, threads=1)
    b = constructive_search(spec, threads=4)
    np.testing.assert_array_equal(a.certificate.rates, b.certificate.rates)
    np.testing.assert_array_equal(a.certificate.times, b.certificate.times)


def test_search_guards():
    spec = KernelSpec.linear([[1.0]])
    with pytest.raises(ValidationError):
        constructive_search(spec, v_grid=[0.0, 1.0])
    with pytest.raises(ValidationError):
        constructive_search(spec, T_cap=-1.0)


def test_report_serialises():
    rep = constructive_search(KernelSpec.linear([[1.0, 0.2], [0.1, 1.0]]))
    d = rep.to_dict()
    assert d["binding_condition"] in CONDITIONS
    assert len(d["certificate"]["times"]) == rep.certificate.n_phases + 1


def test_verify_certificate_rejects_non_round_trip():
    spec = KernelSpec.linear([[1.0]])
    ok, total = verify_certificate(spec, Strategy([0.0, 1.0], [[1.0]]))
    assert not ok and np.isnan(total)


def test_default_horizon():
    assert default_horizon(KernelSpec.linear([[1.0]])) == 1.0
    T = default_horizon(KernelSpec.exponential([[1.0]], [[10.0]]))
    assert np.exp(-10 * T) == pytest.approx(0.99, rel=1e-9)


@given(a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0), r=st.floats(0.0, 2.0))
def test_size_bound_two_assets_matches_psd(a, b, r):
    c = r * np.sqrt(a * b)
    res = size_bound_check([[a, c], [c, b]])
    if abs(r - 1.0) > 1e-9:
        assert res.psd == (r < 1.0)
        assert bool(res.violated_pairs) == (r > 1.0)


def test_size_bound_three_assets_pairwise_is_not_enough():
    eta = [[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]
    res = size_bound_check(eta)
    assert res.violated_pairs == [] and not res.psd
    assert res.min_eigenvalue == pytest.approx(-0.8)


def test_size_bound_needs_symmetric():
    with pytest.raises(ValidationError, match="symmetric"):
        size_bound_check([[1.0, 0.2], [0.1, 1.0]])


def test_slippage_ratio_formula():
    res = slippage_ratio(2e-12, 4.0, 5.0, 1e5, 2e5, 10.0, reference_T=3.0, pair=("x", "y"))
    va, vb = 1e5, 2e5
    want = va * vb * 10.0 * 2e-12 / (6 * (va * 4e-4 + vb * 5e-4))
    assert res.ratio == pytest.approx(want, rel=1e-14)
    assert res.vT == (pytest.approx(1e6), pytest.approx(2e6))
    assert not res.profitable
    # linear in T
    assert slippage_ratio(2e-12, 4.0, 5.0, 1e5, 2e5, 20.0).ratio == pytest.approx(2 * want)


@pytest.mark.parametrize("kw", [dict(B_a=0.0), dict(T_units=0.0), dict(delta_eta=-1.0), dict(B_b=float("nan"))])
def test_slippage_validation(kw):
    args = dict(delta_eta=1e-12, B_a=4.0, B_b=4.0, avg_trade_value_a=1e5, avg_trade_value_b=1e5, T_units=3.0)
    args.update(kw)
    with pytest.raises(ValidationError):
        slippage_ratio(**args)
