import copy

import pytest

from gevrey_hull.config import parse_config
from gevrey_hull.sweep import SweepPoint, run_sweep_points, sweep_point, swept_model


def sweep_config(desk_config, **sweep):
    raw = copy.deepcopy(desk_config)
    raw['sweep'] = sweep
    return parse_config(raw)


def test_swept_amplitude_scales_the_potential(desk_config):
    config = sweep_config(desk_config, parameter='amplitude', values=[2.0], index=1)
    model = swept_model(config, 2.0)
    assert model.interactions[0] is config.model.interactions[0]
    assert model.interactions[1].amplitudes == pytest.approx(config.model.interactions[1].amplitudes * 2.0)


def test_swept_omega_resets_the_diophantine_constant(desk_config):
    config = sweep_config(desk_config, parameter='omega', values=[1.5])
    model = swept_model(config, 1.5)
    assert model.freq.omega == 1.5
    assert model.freq.nu is None
    assert model.freq.alpha == config.model.freq.alpha


def test_sweep_point_records_failures_as_data(desk_config):
    config = sweep_config(desk_config, parameter='amplitude', values=[8.0])
    point = sweep_point(config, 8.0)
    assert isinstance(point, SweepPoint)
    assert point['value'] == 8.0
    assert not point['converged']
    assert point.needs_attention()
    assert point['failure']


def test_amplitude_sweep_has_a_monotone_failure_onset(desk_config):
    config = sweep_config(desk_config, parameter='amplitude', values=[4, 0.5, 8, 1])
    points = run_sweep_points(config)
    assert [p['value'] for p in points] == [0.5, 1.0, 4.0, 8.0]
    assert points[0]['converged'] and points[1]['converged']
    assert points[0]['final_residual'] <= 1e-12
    assert points[0]['h5_pass']
    assert points.failure_onset() == 4.0
    assert points.is_monotone()


@pytest.mark.slow
def test_sweep_on_a_worker_pool_matches_sequential(desk_config):
    sequential = run_sweep_points(
        sweep_config(desk_config, parameter='amplitude', values=[0.5, 8])
    )
    pooled = run_sweep_points(
        sweep_config(desk_config, parameter='amplitude', values=[0.5, 8], workers=2)
    )
    assert pooled.to_csv() == sequential.to_csv()
