"""Closed-form values and Monte-Carlo relations the library must reproduce."""

import numpy as np
import pytest

from crossimpact.arbitrage import constructive_search, size_bound_check
from crossimpact.cost import cost, cost_in_out, exponential_expansion_cost
from crossimpact.estimation import impact_curve, response
from crossimpact.model import Exponential, KernelSpec, Linear, Permanent, PowerLawSign, Strategy
from crossimpact.simulate import SimConfig, planted_kernel, simulate


def test_three_phase_permanent_value():
    spec = KernelSpec.linear([[1.0, 0.2], [0.1, 1.0]])
    assert cost(spec, Strategy.three_phase(1.0, 1.0, 3.0)).total == pytest.approx(-0.05, rel=1e-12)


@pytest.mark.parametrize("times, rates", [([0.0, 1.0, 3.0], [[2.0], [-1.0]]),
                                          ([0.0, 0.5, 0.7, 2.0], [[1.0], [3.0], [-1.1 / 1.3]])])
def test_single_asset_permanent_round_trip_is_free(times, rates):
    s = Strategy(times, rates)
    assert s.is_round_trip()
    assert cost(KernelSpec.linear([[0.7]]), s).total == pytest.approx(0.0, abs=1e-14)


def test_in_out_components_permanent():
    eta = 1.3
    res = cost_in_out(KernelSpec.linear([[eta]]), [1.0], [-1.0], 2.0)
    assert res.components["C_A"][0, 0] == pytest.approx(0.5 * eta)
    assert res.components["C_B"][0, 0] == pytest.approx(-eta)
    assert res.components["C_C"][0, 0] == pytest.approx(0.5 * eta)
    assert res.total == pytest.approx(0.0, abs=1e-14)


def test_uniform_kernel_cost_factorises():
    # with one decay kernel for every pair and odd impact, an in-out round trip
    # costs a fixed multiple of sum_ij v_i f^ij(v_j)
    rng = np.random.default_rng(3)
    G = [[Exponential(0.8)] * 2 for _ in range(2)]
    ratios = []
    for _ in range(6):
        f = [[PowerLawSign(rng.uniform(0.2, 2), rng.uniform(0.3, 1)) for _ in range(2)] for _ in range(2)]
        v = rng.uniform(0.2, 3.0, 2) * rng.choice([-1, 1], 2)
        spec = KernelSpec(2, G, f)
        total = cost_in_out(spec, v, -v, 1.7).total
        bracket = sum(v[i] * f[i][j](v[j]) for i in range(2) for j in range(2))
        ratios.append(total / bracket)
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-10)


def test_fast_cross_decay_gives_negative_leading_cost():
    eta = np.array([[1.0, 0.9], [0.9, 1.0]])
    rho = np.array([[0.01, 0.2], [0.2, 0.01]])
    _, lead = exponential_expansion_cost(eta, rho, np.array([1.0, 1.0]), 1.0)
    assert lead < 0


@pytest.mark.parametrize("eta_c, admits", [(0.5, False), (1.0, False), (1.2, True)])
def test_cross_size_under_uniform_decay(eta_c, admits):
    spec = KernelSpec.exponential([[1.0, eta_c], [eta_c, 1.0]], [[1.0, 1.0], [1.0, 1.0]])
    rep = constructive_search(spec)
    assert rep.admits_manipulation == admits
    if admits:
        assert rep.certificate_cost < 0


def test_permanent_symmetric_round_trips_cost_nothing():
    # cost = x_T' eta x_T / 2 under permanent kernels and symmetric linear impact,
    # so no round trip can be profitable whatever the size of eta_c
    spec = KernelSpec.linear([[1.0, 1.2], [1.2, 1.0]])
    rng = np.random.default_rng(0)
    for _ in range(5):
        rates = rng.standard_normal((4, 2))
        rates[-1] = -rates[:-1].sum(axis=0)
        assert cost(spec, Strategy(np.arange(5.0), rates)).total == pytest.approx(0.0, abs=1e-12)
    assert not constructive_search(spec).admits_manipulation


def test_single_asset_exponential_is_clean():
    rep = constructive_search(KernelSpec.exponential([[1.0]], [[0.5]]))
    assert not rep.admits_manipulation and rep.binding_condition == "None"


def test_size_bound_equality_is_allowed():
    res = size_bound_check([[1.0, 1.0], [1.0, 1.0]])
    assert res.violated_pairs == [] and res.psd


def test_response_equals_cumulative_kernel_for_independent_signs():
    H = planted_kernel(2, 4, 1e-4, 3e-5, asymmetry=2e-5, peak_lag=1.0)
    cfg = SimConfig(2, H, 400_000, seed=21, simultaneity_prob=0.1, trade_intensity=[0.7, 0.3],
                    noise_vol=2e-5, steps_per_day=10_000)
    tape = simulate(cfg)
    rf = response(tape, [1, 2, 3])
    z = (rf.R - H[:3]) / rf.stderr
    assert np.max(np.abs(z)) < 4
    # normalised by all steps instead of trades of j, R(1) picks up P(trade in j)
    a = tape.signs.astype(float)
    r = np.nan_to_num(tape.returns())
    per_step = r.T @ a / tape.n_steps
    p_trade = np.count_nonzero(a, axis=0) / tape.n_steps
    np.testing.assert_allclose(per_step, H[0] * p_trade[None, :], rtol=0.1)


def test_impact_slope_recovers_planted_linear_impact():
    H = planted_kernel(1, 2, 1e-4, 0.0)
    cfg = SimConfig(1, H, 1_000_000, seed=13, noise_vol=1e-4, volume_median=1e5, volume_sigma=0.6,
                    impact_volume_exponent=1.0, steps_per_day=20_000)
    cell = impact_curve(simulate(cfg), 1).cells[(0, 0)]
    eta = 1e-4 / 1e5
    assert abs(cell.slope - eta) <= 2 * cell.slope_stderr
    assert cell.slope_stderr < 0.02 * eta
