'''Hull files and JSON reports.

A hull file is a CSV table of the nonzero coefficients (k_1..k_d, re, im)
under a block of "# key: value" header lines:

    # format: gevrey_hull v1
    # dim: 2
    # cutoff: 32
    # radius: 0.35
    # iteration: 4
    # residual_norm: 3.1e-15
    # accumulated_delta_norm: 0.0240
    # tail: 0
    # modes: 1250
    k1,k2,re,im
    ...

Floats are written with 17 significant digits and read back with pandas'
round-trip parser, so a save/load cycle reproduces every coefficient.
'''
import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import FormatError
from .fourier_core import FourierSeries
from .kam_solver import HullState
from .records import FLOAT_FORMAT


logger = logging.getLogger(__name__)


FORMAT_VERSION = 'gevrey_hull v1'
HEADER_KEYS = (
    'dim', 'cutoff', 'radius', 'iteration', 'residual_norm',
    'accumulated_delta_norm', 'tail', 'modes',
)


def _float_text(value):
    return FLOAT_FORMAT % value


def series_table(f):
    '''Nonzero coefficients of f as a DataFrame with columns k1..kd, re, im.'''
    return pd.DataFrame(
        [list(k) + [c.real, c.imag] for k, c in sorted(f.modes().items())],
        columns=_columns(f.dim) + ['re', 'im'],
    )


def _columns(dim):
    return ['k{i}'.format(i=i + 1) for i in range(dim)]


def save_series(f, path):
    series_table(f).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def save_hull(state, path):
    h = state.h
    table = series_table(h)
    header = {
        'dim': str(h.dim),
        'cutoff': str(h.cutoff),
        'radius': _float_text(state.radius),
        'iteration': str(state.iteration),
        'residual_norm': _float_text(state.residual_norm),
        'accumulated_delta_norm': _float_text(state.accumulated_delta_norm),
        'tail': _float_text(h.tail),
        'modes': str(len(table)),
    }
    path = Path(path)
    with path.open('w') as fp:
        fp.write('# format: {v}\n'.format(v=FORMAT_VERSION))
        for key in HEADER_KEYS:
            fp.write('# {k}: {v}\n'.format(k=key, v=header[key]))
        table.to_csv(fp, index=False, float_format=FLOAT_FORMAT)
    logger.info(f'save_hull: {len(table)} modes to {path}')


def _read_header(path):
    header = {}
    with Path(path).open() as fp:
        for line in fp:
            if not line.startswith('#'):
                break
            key, sep, value = line[1:].partition(':')
            if not sep:
                raise FormatError('{p}: malformed header line {l!r}'.format(p=path, l=line))
            header[key.strip()] = value.strip()
    return header


def load_hull(path):
    '''HullState from a hull file; the residual is left to be recomputed.

    Raises:
        FormatError: version mismatch, missing header keys or a truncated table.
    '''
    try:
        header = _read_header(path)
    except OSError as err:
        raise FormatError('{p}: {e}'.format(p=path, e=err)) from err
    version = header.get('format')
    if version != FORMAT_VERSION:
        raise FormatError(
            '{p}: format {v!r} is not {e!r}'.format(p=path, v=version, e=FORMAT_VERSION)
        )
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise FormatError('{p}: missing header keys {m}'.format(p=path, m=missing))
    try:
        dim = int(header['dim'])
        cutoff = int(header['cutoff'])
        expected = int(header['modes'])
        table = pd.read_csv(path, comment='#', float_precision='round_trip')
        columns = _columns(dim)
        if list(table.columns) != columns + ['re', 'im'] or len(table) != expected:
            raise FormatError(
                '{p}: expected {n} modes in columns {c}, found {m} rows in {f}'.format(
                    p=path, n=expected, c=columns + ['re', 'im'], m=len(table),
                    f=list(table.columns),
                )
            )
        if table.isnull().values.any():
            raise FormatError('{p}: table has empty cells'.format(p=path))
        coeffs = np.zeros((2 * cutoff + 1,) * dim, dtype=complex)
        index = tuple(table[c].to_numpy(dtype=int) + cutoff for c in columns)
        coeffs[index] = table['re'].to_numpy(dtype=float) + 1j * table['im'].to_numpy(dtype=float)
        h = FourierSeries(dim, cutoff, coeffs, float(header['tail']))
        return HullState(
            h=h,
            radius=float(header['radius']),
            iteration=int(header['iteration']),
            residual_norm=float(header['residual_norm']),
            accumulated_delta_norm=float(header['accumulated_delta_norm']),
        )
    except FormatError:
        raise
    except (ValueError, IndexError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise FormatError('{p}: {e}'.format(p=path, e=err)) from err


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    return value


def write_report(path, payload):
    '''Deterministic JSON: sorted keys, shortest round-trip floats, null for inf/nan.'''
    path = Path(path)
    with path.open('w') as fp:
        json.dump(_jsonable(payload), fp, indent=2, sort_keys=True)
        fp.write('\n')
    logger.info(f'write_report: {path}')
