import copy
import json
import logging

import pytest

from gevrey_hull.config import DEFAULT_OUT_DIR, ENV_OUT_DIR, load_config, parse_config
from gevrey_hull.errors import ConfigParseError, ConfigValidationError
from gevrey_hull.fourier_core import DROP_THRESHOLD


def test_parse_desk_config(desk_config):
    config = parse_config(desk_config)
    model = config.model
    assert model.dim == 2
    assert model.twist == 1.0
    assert len(model.interactions) == 2
    assert config.cutoff == 8
    assert config.h0.cutoff == 8
    assert config.h0.l1() == 0.0
    assert config.freq.kmax == 16
    assert config.gevrey.margin == 0.2
    assert config.schedule.r0 == 0.4
    assert config.schedule.neumann_tolerance == 1e-13
    assert config.verification.reseed_trials == 0
    assert config.verification.phis == (0.3,)
    assert config.sweep is None


def test_every_violation_is_reported(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['gevrey']['beta'] = 0.5
    raw['gevrey']['radius'] = -1.0
    raw['truncation']['cutoff'] = 2.5
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    violations = err.value.violations
    assert len(violations) == 3
    assert any(v.startswith('gevrey.beta: beta must be >= 1') for v in violations)
    assert any(v.startswith('gevrey.radius:') for v in violations)
    assert any(v.startswith('truncation.cutoff: must be an integer') for v in violations)


def test_missing_blocks(desk_config):
    raw = copy.deepcopy(desk_config)
    del raw['frequency']
    del raw['model']
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert 'frequency: block is missing' in err.value.violations
    assert 'model: block is missing' in err.value.violations


def test_null_required_value(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['gevrey']['radius'] = None
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert err.value.violations == ['gevrey.radius: is required']


def test_bad_term_has_its_path(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['model']['interactions'][1]['terms'][0]['kind'] = 'spline'
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert err.value.violations[0].startswith('model.interactions[1].terms[0]:')


def test_missing_twist_needs_override(desk_config, caplog):
    raw = copy.deepcopy(desk_config)
    raw['model']['interactions'][0]['twist'] = 0.0
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert 'H4' in err.value.violations[0]
    assert 'run.override_hypotheses' in err.value.violations[0]

    raw['run']['override_hypotheses'] = True
    with caplog.at_level(logging.WARNING):
        config = parse_config(raw)
    assert config.schedule.override_hypotheses
    assert 'H4' in caplog.text


def test_product_and_difference_terms(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['model']['interactions'].append({
        'span': 2,
        'bound': 1e-4,
        'terms': [
            {'kind': 'product', 'scale': 1e-5, 'factors': [
                {'slot': 0, 'modes': [[[1, 0], 0.5, 0.0], [[-1, 0], 0.5, 0.0]]},
                {'slot': 2, 'modes': [[[1, 0], 0.5, 0.0], [[-1, 0], 0.5, 0.0]]},
            ]},
            {'kind': 'difference', 'scale': 1e-5, 'slots': [0, 2], 'direction': [1, 0],
             'modes': [[1, 0.5, 0.0], [-1, 0.5, 0.0]]},
        ],
    })
    config = parse_config(raw)
    long_range = config.model.of_span(2)[0]
    assert long_range.bound == 1e-4
    # the difference term lands on two of the product modes
    assert long_range.waves.shape == (4, 3, 2)
    assert config.model.long_spans == [2]


def test_initial_modes_must_be_real(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['run']['initial_modes'] = [[1, 0, 0.01, 0.0], [-1, 0, 0.01, 0.0]]
    assert parse_config(raw).h0[(1, 0)] == 0.01
    raw['run']['initial_modes'] = [[1, 0, 0.01, 0.0]]
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert err.value.violations == ['run.initial_modes: must describe a real function']


def test_sweep_block(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['sweep'] = {'parameter': 'amplitude', 'values': [1, 2], 'index': 1, 'workers': 2}
    sweep = parse_config(raw).sweep
    assert sweep.values == (1.0, 2.0)
    assert sweep.index == 1
    assert sweep.workers == 2
    raw['sweep'] = {'parameter': 'beta', 'values': []}
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert len(err.value.violations) == 2


@pytest.mark.parametrize('index', [7, 0])
def test_sweep_index_must_name_a_periodic_interaction(desk_config, index):
    raw = copy.deepcopy(desk_config)
    raw['sweep'] = {'parameter': 'amplitude', 'values': [1e6], 'index': index}
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert err.value.violations == [
        'sweep.index: must name a periodic interaction (0..1), got {i}'.format(i=index)
    ]


def test_amplitude_sweep_needs_a_periodic_part(desk_config):
    raw = copy.deepcopy(desk_config)
    del raw['model']['interactions'][1]
    raw['sweep'] = {'parameter': 'amplitude', 'values': [1.0]}
    with pytest.raises(ConfigValidationError) as err:
        parse_config(raw)
    assert err.value.violations == ['sweep.parameter: the model has no periodic part to scale']
    raw['sweep']['parameter'] = 'omega'
    assert parse_config(raw).sweep.parameter == 'omega'


def test_drop_threshold_travels_with_the_model(desk_config):
    raw = copy.deepcopy(desk_config)
    raw['truncation']['drop_threshold'] = 1e-12
    model = parse_config(raw).model
    assert model.drop_threshold == 1e-12
    assert model.grid(8).drop_threshold == 1e-12
    assert model.scaled(2.0).grid(8).drop_threshold == 1e-12
    assert parse_config(desk_config).model.grid(8).drop_threshold == DROP_THRESHOLD


def test_output_directory(desk_config, monkeypatch):
    monkeypatch.delenv(ENV_OUT_DIR, raising=False)
    assert parse_config(desk_config).out_dir == DEFAULT_OUT_DIR
    monkeypatch.setenv(ENV_OUT_DIR, '/tmp/hulls')
    assert parse_config(desk_config).out_dir == '/tmp/hulls'
    assert parse_config(desk_config, out_dir='run1').out_dir == 'run1'


def test_load_config(tmp_path, desk_config):
    path = tmp_path / 'desk.json'
    path.write_text(json.dumps(desk_config))
    assert load_config(path).cutoff == 8

    broken = tmp_path / 'broken.json'
    broken.write_text('{"frequency": ')
    with pytest.raises(ConfigParseError, match='line 1'):
        load_config(broken)
    with pytest.raises(ConfigParseError):
        load_config(tmp_path / 'missing.json')
