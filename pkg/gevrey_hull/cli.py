'''Command line surface of gevrey_hull:
- solve: quasi-Newton iteration from the configured initial hull, with the
         a-posteriori verification of the result.
- certify: condition numbers, hypotheses and verification of a saved hull.
- residual: residual norm and model identities of a saved hull.
- sweep: one solve per value of a swept scalar (amplitude or omega).

Certifier verdicts are written to the reports and never change the exit
status; only errors do.
'''
import argparse
import logging
import sys
from pathlib import Path

from .certifier import condition_numbers, smallness_report, verify_solution
from .config import load_config
from .errors import ConfigValidationError, HullError
from .fourier_core import average, gevrey_norm, multiply
from .hull_io import load_hull, save_hull, save_series, write_report
from .interaction_model import (
    hull_tangent,
    linearized_apply,
    residual,
    residual_theta_derivative,
)
from .kam_solver import solve
from .sweep import run_sweep_points


logging.basicConfig(
    level='INFO', format='%(asctime)s|%(name)s|%(levelname)s| %(message)s'
)
logger = logging.getLogger(__name__)


REPORT_FILE = 'report.json'
HULL_FILE = 'hull.txt'
HISTORY_FILE = 'residual_history.csv'
RESIDUAL_FILE = 'residual_modes.csv'
SWEEP_FILE = 'sweep.csv'


def _out_dir(config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _with_nu(model):
    if model.freq.nu is None:
        return model.with_frequency(model.freq.with_estimated_constants())
    return model


def _load_saved_hull(config, path):
    if path is None:
        raise ConfigValidationError(['--hull: a saved hull is required'])
    state = load_hull(path)
    if state.h.dim != config.model.dim:
        raise ConfigValidationError([
            '--hull: hull of dimension {h} for a model of dimension {d}'.format(
                h=state.h.dim, d=config.model.dim
            )
        ])
    return state


def run_solve(config, hull_path=None):
    '''Solve from the configured initial hull and verify the result.'''
    out = _out_dir(config)
    result = solve(
        config.model, config.h0, config.schedule,
        verification=config.verification, c_floor=config.c_floor,
    )
    write_report(out / REPORT_FILE, {'command': 'solve', 'result': result.to_dict()})
    save_hull(result.state, out / HULL_FILE)
    result.records.to_csv(out / HISTORY_FILE)
    if not result.converged:
        logger.warning(f'run_solve: not converged: {result.failure}')
    return 0


def run_certify(config, hull_path=None):
    '''Condition numbers, hypotheses and verification of a saved hull.'''
    out = _out_dir(config)
    state = _load_saved_hull(config, hull_path)
    model = _with_nu(config.model)
    report = condition_numbers(model, state.h, model.gevrey, c_floor=config.c_floor)
    smallness = smallness_report(report, config.schedule)
    verification = verify_solution(model, state.h, config.verification, config.schedule)
    write_report(out / REPORT_FILE, {
        'command': 'certify',
        'hull': str(hull_path),
        'condition_report': report.to_dict(),
        'smallness': smallness.to_dict(),
        'verification': verification.to_dict(),
    })
    for check in report.hypotheses:
        logger.info(
            f'run_certify: {check.name} {"passes" if check.passed else "fails"} '
            f'(margin {check.margin:.3e})'
        )
    return 0


def run_residual(config, hull_path=None):
    '''Residual of a saved hull and the identities it satisfies.'''
    out = _out_dir(config)
    state = _load_saved_hull(config, hull_path)
    model = config.model
    h = state.h
    g = model.gevrey.with_radius(state.radius)
    eps = residual(model, h)
    tangent = hull_tangent(h, model.alpha)
    derivative = residual_theta_derivative(model, h)
    along = linearized_apply(model, h, tangent)
    eps_norm = gevrey_norm(eps, g)
    write_report(out / REPORT_FILE, {
        'command': 'residual',
        'hull': str(hull_path),
        'radius': state.radius,
        'residual_norm': eps_norm,
        'residual_tail': eps.tail,
        'zero_average_defect': abs(average(multiply(tangent, eps, model.grid(h.cutoff)))),
        'theta_derivative_defect': gevrey_norm(derivative - along, g),
    })
    save_series(eps, out / RESIDUAL_FILE)
    logger.info(f'run_residual: ||E|| = {eps_norm:.6e} at R = {state.radius}')
    return 0


def run_sweep(config, hull_path=None):
    '''One solve per swept value, written as a table.'''
    if config.sweep is None:
        raise ConfigValidationError(['sweep: block is missing'])
    out = _out_dir(config)
    points = run_sweep_points(config)
    points.to_csv(out / SWEEP_FILE)
    write_report(out / REPORT_FILE, {
        'command': 'sweep',
        'parameter': config.sweep.parameter,
        'points': len(points),
        'failure_onset': points.failure_onset(),
        'monotone': points.is_monotone(),
    })
    return 0


COMMANDS = {
    'solve': run_solve,
    'certify': run_certify,
    'residual': run_residual,
    'sweep': run_sweep,
}


def get_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help='JSON run configuration')
    common.add_argument(
        '--out', help='Output directory (default: $GEVREY_HULL_OUT or ./gevrey_hull_out)'
    )
    common.add_argument('--hull', help='Saved hull file (certify, residual)')
    common.add_argument('--quiet', action='store_true', help='Log warnings and errors only')

    parser = argparse.ArgumentParser(
        prog='gevrey_hull',
        description='Quasi-Newton solver and a-posteriori certifier for hull functions',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, func in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=func.__doc__)
    return parser


def main(argv=None):
    args = get_parser().parse_args(argv)
    if args.quiet:
        logging.getLogger().setLevel('WARNING')
    try:
        config = load_config(args.config, out_dir=args.out)
        return COMMANDS[args.command](config, args.hull)
    except HullError as err:
        logger.error(f'main: {type(err).__name__}: {err}')
        return 1


if __name__ == '__main__':
    sys.exit(main())
