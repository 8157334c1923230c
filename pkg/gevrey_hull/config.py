'''Run configuration: one JSON document with nested blocks.

    {
        "frequency": {"alpha": [1.0, 0.618...], "omega": 1.0, "tau": 2.0},
        "gevrey": {"beta": 2.0, "radius": 0.4, "margin": 0.2},
        "truncation": {"cutoff": 32},
        "model": {"interactions": [
            {"span": 1, "twist": 1.0},
            {"span": 0, "terms": [{"kind": "cosine", "amplitude": 0.01, "wave": [[1, 0]]}]}
        ]},
        "schedule": {"max_iterations": 12},
        "run": {"seed": 0},
        "sweep": {"parameter": "amplitude", "values": [0.5, 1.0, 2.0]}
    }

Every violation is collected with its dotted path before anything is raised.
The output directory can be overridden by the environment variable
GEVREY_HULL_OUT.
'''
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .certifier import C_FLOOR, VerificationOptions
from .errors import ConfigParseError, ConfigValidationError, HullError
from .fourier_core import DROP_THRESHOLD, FourierSeries, GevreyParams
from .interaction_model import (
    Interaction,
    Model,
    cosine_term,
    difference_term,
    product_term,
)
from .kam_solver import StepSchedule
from .small_divisors import Frequency


logger = logging.getLogger(__name__)


ENV_OUT_DIR = 'GEVREY_HULL_OUT'
DEFAULT_OUT_DIR = 'gevrey_hull_out'
SWEEP_PARAMETERS = ('amplitude', 'omega')

_MISSING = object()


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: Tuple[float, ...]
    index: Optional[int] = None
    workers: int = 1


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: Model
    h0: FourierSeries
    schedule: StepSchedule
    verification: VerificationOptions
    cutoff: int
    c_floor: float = C_FLOOR
    out_dir: str = DEFAULT_OUT_DIR
    sweep: Optional[SweepConfig] = None
    raw: dict = field(default_factory=dict)

    @property
    def freq(self):
        return self.model.freq

    @property
    def gevrey(self):
        return self.model.gevrey


class _Reader:
    '''Typed access to nested JSON blocks that records violations instead of raising.'''

    def __init__(self, raw):
        self.raw = raw
        self.violations = []

    def block(self, name, required=True):
        value = self.raw.get(name, _MISSING)
        if value is _MISSING:
            if required:
                self.violations.append('{n}: block is missing'.format(n=name))
            return {}
        if not isinstance(value, dict):
            self.violations.append('{n}: must be an object'.format(n=name))
            return {}
        return value

    def number(self, block, name, path, default=_MISSING, lower=None, upper=None,
               strict=False, integer=False, message=None):
        value = block.get(name, default)
        where = '{p}.{n}'.format(p=path, n=name)
        if value is _MISSING or (value is None and default is _MISSING):
            self.violations.append('{w}: is required'.format(w=where))
            return None
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.violations.append('{w}: must be a number, got {v!r}'.format(w=where, v=value))
            return None
        if integer and int(value) != value:
            self.violations.append('{w}: must be an integer, got {v!r}'.format(w=where, v=value))
            return None
        too_low = lower is not None and (value <= lower if strict else value < lower)
        too_high = upper is not None and value > upper
        if too_low or too_high or not np.isfinite(value):
            if message is None:
                bound = []
                if lower is not None:
                    bound.append('{o} {b}'.format(o='>' if strict else '>=', b=lower))
                if upper is not None:
                    bound.append('<= {b}'.format(b=upper))
                message = 'must be ' + ' and '.join(bound) if bound else 'must be finite'
            self.violations.append('{w}: {m}, got {v!r}'.format(w=where, m=message, v=value))
            return None
        return int(value) if integer else float(value)

    def flag(self, block, name, path, default=False):
        value = block.get(name, default)
        if not isinstance(value, bool):
            self.violations.append('{p}.{n}: must be true or false'.format(p=path, n=name))
            return default
        return value


def _parse_term(term, dim, span):
    kind = term.get('kind')
    if kind == 'cosine':
        return cosine_term(dim, span, float(term['amplitude']), term['wave'])
    if kind == 'product':
        factors = [
            (int(f['slot']), {tuple(int(x) for x in m[0]): complex(m[1], m[2]) for m in f['modes']})
            for f in term['factors']
        ]
        return product_term(dim, span, float(term.get('scale', 1.0)), factors)
    if kind == 'difference':
        modes = {int(m[0]): complex(m[1], m[2]) for m in term['modes']}
        return difference_term(
            dim, span, float(term.get('scale', 1.0)), term['slots'], term['direction'], modes
        )
    raise ValueError('unknown term kind {k!r}'.format(k=kind))


def _parse_interactions(reader, block, dim):
    specs = block.get('interactions', _MISSING)
    if specs is _MISSING or not isinstance(specs, list) or not specs:
        reader.violations.append('model.interactions: must be a non-empty list')
        return ()
    interactions = []
    for i, spec in enumerate(specs):
        path = 'model.interactions[{i}]'.format(i=i)
        if not isinstance(spec, dict):
            reader.violations.append('{p}: must be an object'.format(p=path))
            continue
        span = reader.number(spec, 'span', path, lower=0, integer=True)
        twist = reader.number(spec, 'twist', path, default=0.0)
        bound = reader.number(spec, 'bound', path, default=None, lower=0.0)
        if span is None or twist is None:
            continue
        terms = []
        for j, term in enumerate(spec.get('terms', [])):
            try:
                terms.append(_parse_term(term, dim, span))
            except (KeyError, TypeError, ValueError, IndexError, HullError) as err:
                reader.violations.append(
                    '{p}.terms[{j}]: {e}'.format(p=path, j=j, e=err)
                )
        try:
            interactions.append(Interaction.from_terms(dim, span, terms, twist=twist, bound=bound))
        except (ValueError, HullError) as err:
            reader.violations.append('{p}: {e}'.format(p=path, e=err))
    return tuple(interactions)


def _check_twist(reader, interactions, override):
    twisted = [i for i in interactions if i.span == 1 and i.twist != 0.0]
    if len(twisted) == 1:
        return
    message = (
        'model.interactions: exactly one span-1 interaction with a nonzero twist is '
        'required by H4, found {n}'.format(n=len(twisted))
    )
    if override:
        logger.warning(f'load_config: {message}; continuing on run.override_hypotheses')
    else:
        reader.violations.append(message + ' (set run.override_hypotheses to proceed)')


def _parse_initial(reader, block, dim, cutoff):
    modes = block.get('initial_modes')
    if modes is None:
        return FourierSeries.zeros(dim, cutoff)
    try:
        table = {tuple(int(x) for x in m[:dim]): complex(m[dim], m[dim + 1]) for m in modes}
        h0 = FourierSeries.from_modes(dim, cutoff, table)
        if not h0.is_hermitian():
            reader.violations.append('run.initial_modes: must describe a real function')
        return h0
    except (TypeError, ValueError, IndexError, HullError) as err:
        reader.violations.append('run.initial_modes: {e}'.format(e=err))
        return FourierSeries.zeros(dim, cutoff)


def _parse_sweep(reader, raw, interactions):
    if 'sweep' not in raw:
        return None
    block = reader.block('sweep')
    parameter = block.get('parameter')
    if parameter not in SWEEP_PARAMETERS:
        reader.violations.append(
            'sweep.parameter: must be one of {p}, got {v!r}'.format(p=SWEEP_PARAMETERS, v=parameter)
        )
    values = block.get('values')
    if not isinstance(values, list) or not values or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        reader.violations.append('sweep.values: must be a non-empty list of numbers')
        values = []
    index = reader.number(block, 'index', 'sweep', default=None, lower=0, integer=True)
    if interactions:
        periodic = [n for n, i in enumerate(interactions) if i.is_periodic]
        if index is not None and index not in periodic:
            reader.violations.append(
                'sweep.index: must name a periodic interaction (0..{n}), got {i}'.format(
                    n=len(interactions) - 1, i=index
                )
            )
        elif parameter == 'amplitude' and not periodic:
            reader.violations.append('sweep.parameter: the model has no periodic part to scale')
    workers = reader.number(block, 'workers', 'sweep', default=1, lower=1, integer=True)
    return SweepConfig(
        parameter=parameter, values=tuple(float(v) for v in values),
        index=index, workers=workers or 1,
    )


def parse_config(raw, out_dir=None):
    '''RunConfig from an already decoded JSON object.

    Raises:
        ConfigValidationError: with every violation found.
    '''
    if not isinstance(raw, dict):
        raise ConfigValidationError(['<root>: must be an object'])
    reader = _Reader(raw)
    frequency = reader.block('frequency')
    gevrey = reader.block('gevrey')
    truncation = reader.block('truncation', required=False)
    model_block = reader.block('model')
    schedule_block = reader.block('schedule', required=False)
    run = reader.block('run', required=False)

    alpha = frequency.get('alpha')
    if not isinstance(alpha, list) or not alpha or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) and 0.0 <= a <= 1.0 for a in alpha
    ):
        reader.violations.append('frequency.alpha: must be a non-empty list of numbers in [0, 1]')
        alpha = None
    omega = reader.number(frequency, 'omega', 'frequency', default=1.0)
    tau = reader.number(frequency, 'tau', 'frequency', default=2.0, lower=0.0, strict=True)
    tau0 = reader.number(frequency, 'tau0', 'frequency', default=None, lower=0.0, strict=True)
    nu = reader.number(frequency, 'nu', 'frequency', default=None, lower=0.0, strict=True)

    beta = reader.number(gevrey, 'beta', 'gevrey', lower=1.0, message='beta must be >= 1')
    radius = reader.number(gevrey, 'radius', 'gevrey', lower=0.0, strict=True)
    margin = reader.number(gevrey, 'margin', 'gevrey', default=0.5, lower=0.0, strict=True)

    cutoff = reader.number(truncation, 'cutoff', 'truncation', default=32, lower=1, integer=True)
    padding = reader.number(truncation, 'padding', 'truncation', default=2, lower=2, integer=True)
    neumann_tolerance = reader.number(
        truncation, 'neumann_tolerance', 'truncation', default=1e-13, lower=0.0, strict=True
    )
    neumann_max_terms = reader.number(
        truncation, 'neumann_max_terms', 'truncation', default=60, lower=1, integer=True
    )
    c_floor = reader.number(truncation, 'c_floor', 'truncation', default=C_FLOOR, lower=0.0)
    reciprocal_floor = reader.number(
        truncation, 'reciprocal_floor', 'truncation', default=1e-8, lower=0.0, strict=True
    )
    aliasing_tolerance = reader.number(
        truncation, 'aliasing_tolerance', 'truncation', default=1e-8, lower=0.0, strict=True
    )
    drop_threshold = reader.number(
        truncation, 'drop_threshold', 'truncation', default=DROP_THRESHOLD, lower=0.0
    )
    kmax = reader.number(
        frequency, 'kmax', 'frequency', default=2 * (cutoff or 32), lower=1, integer=True
    )

    max_iterations = reader.number(
        schedule_block, 'max_iterations', 'schedule', default=12, lower=0, integer=True
    )
    epsilon_floor = reader.number(
        schedule_block, 'epsilon_floor', 'schedule', default=1e-12, lower=0.0
    )

    seed = reader.number(run, 'seed', 'run', default=0, lower=0, integer=True)
    reseed_trials = reader.number(run, 'reseed_trials', 'run', default=2, lower=0, integer=True)
    perturbation = reader.number(run, 'perturbation', 'run', default=1e-4, lower=0.0, strict=True)
    phis = run.get('phis', [0.1, 0.3, 0.7])
    if not isinstance(phis, list) or not all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in phis
    ):
        reader.violations.append('run.phis: must be a list of numbers')
        phis = []
    override = reader.flag(run, 'override_hypotheses', 'run')

    interactions = ()
    if alpha is not None:
        interactions = _parse_interactions(reader, model_block, len(alpha))
        if interactions:
            _check_twist(reader, interactions, override)
    sweep = _parse_sweep(reader, raw, interactions)

    h0 = None
    if alpha is not None and cutoff is not None:
        h0 = _parse_initial(reader, run, len(alpha), cutoff)

    if reader.violations:
        raise ConfigValidationError(reader.violations)

    try:
        freq = Frequency(
            alpha=tuple(alpha), omega=omega, tau=tau, nu=nu, tau0=tau0, kmax=kmax,
        )
        model = Model(
            interactions=interactions,
            freq=freq,
            gevrey=GevreyParams(beta=beta, radius=radius, margin=margin),
            padding=padding,
            aliasing_tolerance=aliasing_tolerance,
            reciprocal_floor=reciprocal_floor,
            drop_threshold=drop_threshold,
        )
        schedule = StepSchedule(
            r0=radius,
            max_iterations=max_iterations,
            epsilon_floor=epsilon_floor,
            neumann_tolerance=neumann_tolerance,
            neumann_max_terms=neumann_max_terms,
            override_hypotheses=override,
        )
    except (ValueError, HullError) as err:
        raise ConfigValidationError(['<model>: {e}'.format(e=err)]) from err

    if out_dir is None:
        out_dir = os.environ.get(ENV_OUT_DIR, DEFAULT_OUT_DIR)

    return RunConfig(
        model=model,
        h0=h0,
        schedule=schedule,
        verification=VerificationOptions(
            phis=tuple(float(p) for p in phis),
            reseed_trials=reseed_trials,
            perturbation=perturbation,
            seed=seed,
        ),
        cutoff=cutoff,
        c_floor=c_floor,
        out_dir=out_dir,
        sweep=sweep,
        raw=raw,
    )


def load_config(path, out_dir=None):
    '''Read and validate the JSON config at `path`.

    Raises:
        ConfigParseError: unreadable file or malformed JSON.
        ConfigValidationError: with every violation found.
    '''
    try:
        with open(path) as fp:
            raw = json.load(fp)
    except json.JSONDecodeError as err:
        raise ConfigParseError(
            '{p}: line {l} column {c}: {m}'.format(p=path, l=err.lineno, c=err.colno, m=err.msg)
        ) from err
    except OSError as err:
        raise ConfigParseError('{p}: {e}'.format(p=path, e=err)) from err
    config = parse_config(raw, out_dir=out_dir)
    logger.info(
        f'load_config: {path}, d={config.model.dim}, K={config.cutoff}, '
        f'{len(config.model.interactions)} interactions'
    )
    return config
