from __future__ import annotations

import math

import numpy as np
import pytest

from robosort.model import (
    DEFAULT_COEFFS,
    AttenuationCoeffs,
    area_proportions,
    attenuation,
    avg_travel_distance,
    avg_travel_distance_collected,
    calibrate_attenuation,
    collected_form_gap,
    critical_station_count,
    expected_lengths,
    is_unimodal,
    measured_attenuation,
    n_vp_total,
    occupied_vps,
    throughput_estimate,
    throughput_upper_bound,
    workforce_factor,
)


def test_vp_total():
    assert n_vp_total(4, 4) == 12
    assert n_vp_total(12, 12) == 132
    assert n_vp_total(10, 14) == (10 * 13 + 14 * 9) / 2


def test_workforce_factor():
    assert workforce_factor(1.0) == 1.0
    assert workforce_factor(0.5) == 0.75
    with pytest.raises(ValueError):
        workforce_factor(0.0)


def test_attenuation_default_coefficients():
    assert attenuation(12, 12) == pytest.approx(1 / (1.4 + 0.012 * 24))
    with pytest.raises(ValueError):
        AttenuationCoeffs(0.9, 0.01)


def test_occupied_vps_limited_by_robots():
    cap = attenuation(12, 12) * n_vp_total(12, 12)
    assert occupied_vps(1.0, 10, 12, 12) == 10
    assert occupied_vps(1.0, 1e6, 12, 12) == pytest.approx(cap)
    assert occupied_vps(1.0, 0, 12, 12) == 0.0


@pytest.mark.parametrize("alpha", np.linspace(0.05, 1.0, 20))
def test_area_proportions_sum_to_one(alpha):
    assert math.fsum(area_proportions(alpha)) == pytest.approx(1.0, abs=1e-15)


def test_central_area_length_is_mean_of_first_two():
    l1, l2, _, l4 = expected_lengths(12, 16, 0.6)
    assert l4 == 0.5 * (l1 + l2)


def test_full_staffing_uses_only_central_paths():
    assert avg_travel_distance(12, 12, 1.0) == pytest.approx(expected_lengths(12, 12, 1.0)[3])


def test_spread_parameter_changes_only_the_one_turn_term():
    a = expected_lengths(12, 12, 0.5)
    b = expected_lengths(12, 12, 0.5, spread=DEFAULT_COEFFS.a)
    assert a[0] != b[0]
    assert a[1:3] == b[1:3]


def test_distance_scales_with_cell_length():
    assert avg_travel_distance(12, 12, 0.5, D=1.6) == pytest.approx(1.6 * avg_travel_distance(12, 12, 0.5))


def test_shape_warning():
    with pytest.warns(UserWarning):
        avg_travel_distance(4, 8, 0.5)
    with pytest.raises(ValueError):
        avg_travel_distance(12, 12, 1.5)


@pytest.mark.parametrize("n_h,n_v,alpha", [(12, 12, 0.3), (10, 14, 0.8), (16, 20, 1.0)])
def test_collected_form_differs_by_the_stated_gap(n_h, n_v, alpha):
    diff = avg_travel_distance(n_h, n_v, alpha) - avg_travel_distance_collected(n_h, n_v, alpha)
    assert diff == pytest.approx(collected_form_gap(n_h, n_v, alpha), rel=1e-9, abs=1e-12)


def test_throughput_composition():
    e = throughput_estimate(12, 12, 12, 100)
    assert e.throughput == 3600.0 * e.n_vp_occupied * (1.0 / 0.5) / e.avg_travel_distance
    assert e.kappa == workforce_factor(0.5)
    assert e.avg_travel_cells == e.avg_travel_distance


def test_frozen_estimates(golden):
    for n_w, ref in golden["model"].items():
        e = throughput_estimate(12, 12, int(n_w), math.inf)
        assert e.avg_travel_distance == pytest.approx(ref["l_bar"], rel=1e-12)
        assert e.throughput == pytest.approx(ref["throughput"], rel=1e-12)


def test_upper_bound_is_the_unlimited_robot_estimate():
    assert throughput_upper_bound(12, 12, 8) == throughput_estimate(12, 12, 8, math.inf).throughput


def test_critical_station_count():
    vals = [throughput_upper_bound(12, 12, n) for n in range(1, 25)]
    assert critical_station_count(12, 12) == int(np.argmax(vals)) + 1


def test_is_unimodal():
    assert is_unimodal([1, 2, 3, 3, 2])
    assert is_unimodal([3, 2, 1])
    assert not is_unimodal([1, 3, 2, 4])


def test_calibration_recovers_coefficients():
    x = np.array([16, 20, 24, 28, 32] * 3, dtype=float)
    beta = 1.0 / (1.3 + 0.015 * x)
    cal = calibrate_attenuation(x, beta)
    assert cal.coeffs.a == pytest.approx(1.3)
    assert cal.coeffs.b == pytest.approx(0.015)
    assert cal.r2 == pytest.approx(1.0)


def test_calibration_needs_two_scales():
    with pytest.raises(ValueError):
        calibrate_attenuation([24, 24, 24], [0.5, 0.5, 0.5])


def test_measured_attenuation():
    assert measured_attenuation(66.0, 12, 12) == 0.5
