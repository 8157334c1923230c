import json
import math

import numpy as np
import pytest

from gevrey_hull.errors import FormatError
from gevrey_hull.fourier_core import random_hermitian
from gevrey_hull.hull_io import FORMAT_VERSION, load_hull, save_hull, series_table, write_report
from gevrey_hull.kam_solver import HullState


@pytest.fixture
def state(rng):
    h = random_hermitian(2, 6, rng, zero_mean=True) * 0.01
    return HullState(
        h=h.with_tail(1.5e-17), radius=0.3125, iteration=3,
        residual_norm=2.718281828459045e-14, accumulated_delta_norm=0.0217,
    )


def test_hull_file_reproduces_every_coefficient(tmp_path, state):
    path = tmp_path / 'hull.txt'
    save_hull(state, path)
    loaded = load_hull(path)
    assert np.array_equal(loaded.h.coeffs, state.h.coeffs)
    assert loaded.h.tail == state.h.tail
    assert loaded.radius == state.radius
    assert loaded.iteration == 3
    assert loaded.residual_norm == state.residual_norm
    assert loaded.accumulated_delta_norm == state.accumulated_delta_norm
    assert loaded.residual is None


def test_hull_file_header(tmp_path, state):
    path = tmp_path / 'hull.txt'
    save_hull(state, path)
    lines = path.read_text().splitlines()
    assert lines[0] == '# format: {v}'.format(v=FORMAT_VERSION)
    assert lines[1] == '# dim: 2'
    assert '# modes: {n}'.format(n=len(state.h.modes())) in lines
    assert 'k1,k2,re,im' in lines


def test_series_table_columns(state):
    table = series_table(state.h)
    assert list(table.columns) == ['k1', 'k2', 're', 'im']
    assert len(table) == len(state.h.modes())


def write_and_edit(tmp_path, state, old, new):
    path = tmp_path / 'hull.txt'
    save_hull(state, path)
    path.write_text(path.read_text().replace(old, new, 1))
    return path


def test_version_mismatch(tmp_path, state):
    path = write_and_edit(tmp_path, state, FORMAT_VERSION, 'gevrey_hull v0')
    with pytest.raises(FormatError, match='format'):
        load_hull(path)


def test_missing_header_key(tmp_path, state):
    path = write_and_edit(tmp_path, state, '# radius:', '# radios:')
    with pytest.raises(FormatError, match='radius'):
        load_hull(path)


def test_truncated_table(tmp_path, state):
    path = tmp_path / 'hull.txt'
    save_hull(state, path)
    lines = path.read_text().splitlines()
    path.write_text('\n'.join(lines[:-2]) + '\n')
    with pytest.raises(FormatError, match='modes'):
        load_hull(path)


def test_unreadable_hull(tmp_path):
    with pytest.raises(FormatError):
        load_hull(tmp_path / 'nothing.txt')


def test_report_is_deterministic_json(tmp_path):
    path = tmp_path / 'report.json'
    payload = {'b': math.inf, 'a': [np.float64(0.1), np.int64(3), np.bool_(True)], 'c': 1 + 2j}
    write_report(path, payload)
    first = path.read_bytes()
    write_report(path, payload)
    assert path.read_bytes() == first
    loaded = json.loads(first)
    assert list(loaded) == ['a', 'b', 'c']
    assert loaded['a'] == [0.1, 3, True]
    assert loaded['b'] is None
    assert loaded['c'] == [1.0, 2.0]
