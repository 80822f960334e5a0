import dataclasses
import math

import numpy as np
import pytest

from isinghobo.solvers import solve_exhaustive
from isinghobo.swipt import (
    PAPER_EH_PARAMS,
    ChannelRealization,
    ScenarioConfig,
    SwiptInstance,
    ThresholdMode,
    build_instance,
    eh_curve_max,
    eh_output,
    eh_threshold,
    friis_amplitude,
    generate_instance,
    sample_channels,
    to_constrained_problem,
)

from conftest import hypercube

# smaller root of a1 c^2 + a2 c + a3 = 500 (numpy.roots on the EH quadratic)
C_ROOT_500 = float(min(np.roots([PAPER_EH_PARAMS[0], PAPER_EH_PARAMS[1], PAPER_EH_PARAMS[2] - 500.0]).real))


def test_friis_unit_distance():
    assert friis_amplitude(1.0, 915e6) == pytest.approx(299_792_458.0 / 915e6 / (4 * math.pi))
    assert friis_amplitude(1.0, 915e6) == pytest.approx(0.02607, abs=1e-5)
    assert friis_amplitude(2.0, 915e6, gain_tx=4.0) == pytest.approx(friis_amplitude(1.0, 915e6))


def test_pure_los_has_equal_magnitudes():
    cfg = ScenarioConfig(n_elements=8, rician_k=math.inf)
    ch = sample_channels(cfg, 3)
    for v in (ch.h, ch.g, ch.f):
        assert np.allclose(np.abs(v), np.abs(v[0]))
    assert np.abs(ch.h[0]) == pytest.approx(friis_amplitude(cfg.tx_distance, cfg.carrier_freq, 10 ** 0.8))


def test_rayleigh_mean_power():
    cfg = ScenarioConfig(n_elements=1000, rician_k=0.0, tx_distance=4.0)
    amp = friis_amplitude(4.0, cfg.carrier_freq, 10 ** 0.8)
    power = np.concatenate([np.abs(sample_channels(cfg, k).h) ** 2 for k in range(100)])
    assert power.size == 10**5
    assert power.mean() == pytest.approx(amp**2, rel=0.02)


def test_single_element_is_flip_invariant():
    inst = generate_instance(ScenarioConfig(n_elements=1), 0)
    assert inst.info_power([1]) == inst.info_power([-1])
    ch = sample_channels(ScenarioConfig(n_elements=1), 0)
    assert inst.r_matrix[0, 0] == pytest.approx(10.0 * 1e6 * abs(ch.h[0] * ch.g[0]) ** 2)


def test_quadratic_forms_match_complex_received_power():
    cfg = ScenarioConfig(n_elements=6)
    ch = sample_channels(cfg, 5)
    inst = build_instance(ch, cfg)
    X = hypercube(6, "ising")
    direct_i = np.array([cfg.tx_power * abs(np.sum(ch.g * ch.h * x)) ** 2 * 1e6 for x in X])
    direct_e = np.array([cfg.tx_power * abs(np.sum(ch.f * ch.h * x)) ** 2 * 1e6 for x in X])
    assert np.allclose(inst.info_powers(X), direct_i, rtol=1e-9)
    assert np.allclose(inst.eh_input_powers(X), direct_e, rtol=1e-9)
    assert inst.info_powers(X).min() >= 0


def test_threshold_quadratic_root():
    c = eh_threshold(PAPER_EH_PARAMS, 500.0)
    assert c == pytest.approx(C_ROOT_500, rel=1e-12)
    assert c == pytest.approx(888.6, abs=0.1)
    assert eh_output(PAPER_EH_PARAMS, c) == pytest.approx(500.0, abs=1e-6)


def test_threshold_paper_formula():
    a1, a2, a3 = PAPER_EH_PARAMS
    expected = (-a2 + math.sqrt(4 * a1 * (a3 - 500.0))) / (2 * a1)
    c = eh_threshold(PAPER_EH_PARAMS, 500.0, ThresholdMode.PAPER_FORMULA)
    assert c == pytest.approx(expected, rel=1e-12)
    assert c == pytest.approx(756.37, abs=0.01)


def test_threshold_consistency_at_constructed_point():
    delta = eh_output(PAPER_EH_PARAMS, 1000.0)
    assert eh_threshold(PAPER_EH_PARAMS, delta) == pytest.approx(1000.0, rel=1e-9)


def test_unattainable_requirement_names_peak():
    peak = eh_curve_max(PAPER_EH_PARAMS)
    with pytest.raises(ValueError, match=f"{peak:.6g}"):
        eh_threshold(PAPER_EH_PARAMS, peak + 1.0)
    with pytest.raises(ValueError):
        generate_instance(ScenarioConfig(delta=peak + 1.0), 0)


def test_threshold_mode_parse():
    assert ThresholdMode.parse("paper_formula") is ThresholdMode.PAPER_FORMULA
    with pytest.raises(ValueError):
        ThresholdMode.parse("nope")


def test_feasible_points_harvest_requirement():
    cfg = ScenarioConfig(n_elements=10)
    for cid in range(20):
        inst = generate_instance(cfg, cid)
        X = hypercube(10, "ising")
        ok = inst.feasible_rows(X)
        p = to_constrained_problem(inst)
        g = p.inequalities[0].values(X)
        assert np.array_equal(ok, g <= inst.feasibility_tol())
        pe = inst.eh_input_powers(X[ok])
        # only the lower branch of the concave curve is guaranteed to reach delta
        low = pe <= -PAPER_EH_PARAMS[1] / (2 * PAPER_EH_PARAMS[0])
        a1, a2, a3 = PAPER_EH_PARAMS
        assert np.all(a1 * pe[low] ** 2 + a2 * pe[low] + a3 >= cfg.delta - 1e-6)


def test_aligned_los_channel_all_ones_is_best():
    n = 6
    ones = np.ones(n, dtype=complex)
    ch = ChannelRealization(h=0.01 * ones, g=0.02 * ones, f=0.03 * ones)
    inst = build_instance(ch, ScenarioConfig(n_elements=n))
    X = hypercube(n, "ising")
    assert inst.info_power(np.ones(n)) == pytest.approx(inst.info_powers(X).max())


def test_infeasible_instance_reported():
    cfg = ScenarioConfig(n_elements=6, delta=900.0, eh_rx_distance_range=(25.0, 30.0))
    inst = generate_instance(cfg, 0)
    assert not inst.feasible_rows(hypercube(6, "ising")).any()
    assert not solve_exhaustive(-inst.r_matrix, (inst.j_matrix, inst.c)).feasible


def test_flip_invariance_and_snr():
    inst = generate_instance(ScenarioConfig(n_elements=8), 2)
    x = hypercube(8, "ising")[77]
    assert inst.snr(x) == pytest.approx(inst.snr(-x))
    assert inst.snr(x) == pytest.approx(inst.info_power(x) * 1e-6 / inst.noise_power)


def test_reproducible_and_channel_dependent():
    cfg = ScenarioConfig(n_elements=8)
    a, b = generate_instance(cfg, 4), generate_instance(cfg, 4)
    assert np.array_equal(a.r_matrix, b.r_matrix)
    assert not np.array_equal(a.r_matrix, generate_instance(cfg, 5).r_matrix)
    other = generate_instance(dataclasses.replace(cfg, seed=1), 4)
    assert not np.array_equal(a.r_matrix, other.r_matrix)


def test_json_round_trip(tmp_path):
    inst = generate_instance(ScenarioConfig(n_elements=5, threshold_mode="paper_formula"), 9)
    path = tmp_path / "inst.json"
    inst.save(path)
    back = SwiptInstance.load(path)
    assert np.array_equal(back.r_matrix, inst.r_matrix)
    assert np.array_equal(back.j_matrix, inst.j_matrix)
    assert (back.c, back.channel_id, back.threshold_mode) == (inst.c, 9, ThresholdMode.PAPER_FORMULA)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(n_elements=0)
    with pytest.raises(ValueError):
        ScenarioConfig(eh_params=(1.0, 0.5, 0.0))
    with pytest.raises(ValueError):
        ScenarioConfig(tx_distance=-1.0)


def _feasible_fraction(n, channels):
    cfg = ScenarioConfig(n_elements=n)
    X = hypercube(n, "ising")
    return np.mean([generate_instance(cfg, k).feasible_rows(X).any() for k in range(channels)])


def test_exhaustive_feasibility_near_reported_rates():
    # reported exhaustive feasibility at delta=500: 0.0696 (N=10), 0.3174 (N=14)
    f10, f14 = _feasible_fraction(10, 300), _feasible_fraction(14, 300)
    assert 0.02 <= f10 <= 0.15
    assert 0.2 <= f14 <= 0.45
    assert f10 < f14
