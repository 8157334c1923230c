'''Parameter sweeps: one independent solve per value, run on a worker pool.

A failing point is data, not an error; the collection reports where the
failures start and whether they stay failed from there on.
'''
import logging
from dataclasses import replace
from multiprocessing import Pool

from .errors import HullError
from .kam_solver import solve
from .records import Record, Records


logger = logging.getLogger(__name__)


class SweepPoint(Record):
    COLUMNS = (
        'value',
        'converged',
        'iterations',
        'final_residual',
        'h5_pass',
        'failure',
    )

    def needs_attention(self):
        return not self['converged']


class SweepPoints(Records):
    @classmethod
    def get_record_type(cls):
        return SweepPoint

    def sorted(self):
        return SweepPoints(sorted(self.items, key=lambda point: point['value']))

    def failure_onset(self):
        '''Smallest swept value that did not converge, or None.'''
        for point in self.sorted():
            if point.needs_attention():
                return point['value']
        return None

    def is_monotone(self):
        '''True when every point below the onset converged and none above it did.'''
        onset = self.failure_onset()
        if onset is None:
            return True
        return all(
            point.needs_attention() == (point['value'] >= onset) for point in self.items
        )

    def log_summary(self):
        onset = self.failure_onset()
        failed = self.get_items_needing_attention()
        logger.info(
            f'log_summary: {len(self)} sweep points, {len(failed)} failed, failure onset {onset}'
        )
        if not self.is_monotone():
            logger.warning('log_summary: failures are not monotone in the swept value')


def swept_model(config, value):
    sweep = config.sweep
    if sweep.parameter == 'amplitude':
        return config.model.scaled(value, sweep.index)
    if sweep.parameter == 'omega':
        freq = replace(config.model.freq, omega=value, nu=None)
        return config.model.with_frequency(freq)
    raise ValueError('cannot sweep {p!r}'.format(p=sweep.parameter))


def sweep_point(config, value):
    '''Solve at one swept value; never raises for numerical failures.'''
    try:
        result = solve(swept_model(config, value), config.h0, config.schedule, c_floor=config.c_floor)
    except HullError as err:
        logger.info(f'sweep_point: value {value} failed with {type(err).__name__}: {err}')
        return SweepPoint(
            value=value, converged=False, iterations=None, final_residual=None,
            h5_pass=None, failure='{n}: {e}'.format(n=type(err).__name__, e=err),
        )
    return SweepPoint(
        value=value,
        converged=result.converged,
        iterations=result.state.iteration,
        final_residual=result.state.residual_norm,
        h5_pass=result.initial_report.passes.get('H5'),
        failure=result.failure,
    )


def _sweep_worker(args):
    config, value = args
    return sweep_point(config, value)


def run_sweep_points(config):
    '''SweepPoints for every configured value, ordered by value.'''
    values = sorted(config.sweep.values)
    tasks = [(config, value) for value in values]
    if config.sweep.workers > 1:
        logger.info(f'run_sweep_points: {len(values)} points on {config.sweep.workers} workers')
        with Pool(processes=config.sweep.workers) as pool:
            points = pool.map(_sweep_worker, tasks)
    else:
        points = [_sweep_worker(task) for task in tasks]
    points = SweepPoints(points).sorted()
    points.log_summary()
    return points
