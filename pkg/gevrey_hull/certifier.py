'''Condition numbers, hypothesis checks and a-posteriori verification.

Nothing here is a proof: every verdict is numerical evidence at the working
truncation, reported together with the tail budget it was computed under.
'''
import logging
import math
from collections import namedtuple
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Tuple

import numpy as np

from .errors import (
    BoundViolated,
    DegenerateFrequency,
    HullError,
    InsufficientHistory,
    NearSingular,
    NondegeneracyLost,
)
from .fourier_core import (
    FourierSeries,
    average,
    directional_derivative,
    gevrey_norm,
    multiply,
    random_hermitian,
    reciprocal,
    shift,
)
from .interaction_model import (
    coefficient_C,
    delta_bound,
    hull_tangent,
    mixed_derivative,
    residual,
)


logger = logging.getLogger(__name__)


C_FLOOR = 1e-3
QUADRATIC_SLOPE = 1.8
TRANSLATION_RATIO = 10.0
TRANSLATION_ABSOLUTE_TOLERANCE = 1e-13
IDENTITY_TOLERANCE = 1e-9
BOUND_TOLERANCE = 1e-9


HypothesisCheck = namedtuple('HypothesisCheck', ['name', 'passed', 'margin'])


def evidence_label(cutoff, tail):
    return 'numerical evidence at truncation K={k}, tail budget {t:.3e}'.format(k=cutoff, t=tail)


@dataclass(frozen=True)
class ConditionReport:
    '''All condition numbers at one hull.

    h5b is the perturbation product U (N-)^2 T h5a/(1 - h5a) that controls the
    scalar W_bar; the plain product (N-)^2 U T is kept as ut_product.
    '''
    nplus: float
    nminus: float
    c: float
    T: float
    U: float
    delta: float
    nu: float
    tau: float
    eps0: float
    h5a: float
    h5b: float
    ut_product: float
    radius: float
    beta: float
    dim: int
    cutoff: int
    margin: float
    composition_margin: float
    bounds: Mapping[int, float] = field(default_factory=dict)
    bounds_estimated: bool = False
    tail: float = 0.0
    c_floor: float = C_FLOOR
    chi: Optional[float] = None
    chi_prime: Optional[float] = None
    predicted: Mapping[str, Optional[float]] = field(default_factory=dict)
    hypotheses: Tuple[HypothesisCheck, ...] = ()

    @property
    def passes(self):
        passes = {}
        for check in self.hypotheses:
            name = 'H5' if check.name.startswith('H5') else check.name
            passes[name] = passes.get(name, True) and check.passed
        return passes

    @property
    def all_passed(self):
        return all(check.passed for check in self.hypotheses)

    @property
    def label(self):
        return evidence_label(self.cutoff, self.tail)

    def to_dict(self):
        d = asdict(self)
        d['bounds'] = {str(span): value for span, value in self.bounds.items()}
        d['hypotheses'] = [check._asdict() for check in self.hypotheses]
        d['passes'] = self.passes
        d['label'] = self.label
        return d


def _finite(*values):
    return all(v is not None and math.isfinite(v) for v in values)


def _reciprocal_or_lost(f, grid, floor, what):
    try:
        return reciprocal(f, grid, floor=floor)
    except NearSingular as err:
        raise NondegeneracyLost('{w}: {e}'.format(w=what, e=err)) from err


def condition_numbers(model, h, g, c_floor=C_FLOOR):
    '''N+, N-, c, T, U, delta and eps0 of the hull h, all normed with g.

    Raises:
        NondegeneracyLost: l or the twist coefficient is not invertible on the grid.
    '''
    grid = model.grid(h.cutoff)
    rotation = model.freq.rotation
    tangent = hull_tangent(h, model.alpha)
    tangent_inverse = _reciprocal_or_lost(tangent, grid, model.reciprocal_floor, 'l')
    nplus = gevrey_norm(tangent, g)
    nminus = gevrey_norm(tangent_inverse, g)
    c = abs(average(multiply(tangent_inverse, shift(tangent_inverse, -rotation), grid)))

    mixed_inverse = _reciprocal_or_lost(
        mixed_derivative(model, h, 0, 1, 1), grid, model.reciprocal_floor, 'twist'
    )
    leading_inverse = _reciprocal_or_lost(
        coefficient_C(model, h, 0, 1, 1), grid, model.reciprocal_floor, 'C_011'
    )
    T = gevrey_norm(mixed_inverse, g)
    mean_inverse = abs(average(leading_inverse))
    U = 1.0 / mean_inverse if mean_inverse > 0.0 else math.inf

    delta = delta_bound(model, nplus)
    nu = model.freq.nu
    if nu is None:
        try:
            nu = model.freq.with_estimated_constants().nu
        except DegenerateFrequency as err:
            logger.warning(f'condition_numbers: {err}')
            nu = 0.0
    eps = residual(model, h)
    h5a = nminus ** 2 * T * delta
    h5b = U * nminus ** 2 * T * h5a / (1.0 - h5a) if h5a < 1.0 else math.inf
    budget = model.composition_budget
    if budget is None:
        budget = model.composition_level(h, model.gevrey.margin)

    report = ConditionReport(
        nplus=nplus,
        nminus=nminus,
        c=c,
        T=T,
        U=U,
        delta=delta,
        nu=nu,
        tau=model.freq.tau,
        eps0=gevrey_norm(eps, g),
        h5a=h5a,
        h5b=h5b,
        ut_product=nminus ** 2 * U * T,
        radius=g.radius,
        beta=g.beta,
        dim=model.dim,
        cutoff=h.cutoff,
        margin=model.gevrey.margin,
        composition_margin=budget - model.composition_level(h),
        bounds=model.bounds(),
        bounds_estimated=model.bounds_estimated(),
        tail=tangent_inverse.tail + mixed_inverse.tail + leading_inverse.tail + eps.tail,
        c_floor=c_floor,
    )
    return replace(report, hypotheses=tuple(check_hypotheses(report)))


def check_hypotheses(report):
    '''(name, passed, margin) for H1 through H5; H5 is split into H5a and H5b.'''
    checks = []
    checks.append(HypothesisCheck('H1', _finite(report.nu) and report.nu > 0.0, report.nu))

    c_margin = report.c - report.c_floor if _finite(report.c) else -math.inf
    checks.append(HypothesisCheck(
        'H2', _finite(report.nplus, report.nminus) and c_margin >= 0.0, c_margin
    ))

    bounded = _finite(report.delta, *report.bounds.values())
    checks.append(HypothesisCheck(
        'H3', bounded and report.composition_margin >= 0.0, report.composition_margin
    ))

    twist_ok = _finite(report.T, report.U)
    checks.append(HypothesisCheck(
        'H4', twist_ok, 1.0 / max(report.T, report.U) if twist_ok else -math.inf
    ))

    for name, value in (('H5a', report.h5a), ('H5b', report.h5b)):
        margin = 0.5 - value if _finite(value) else -math.inf
        checks.append(HypothesisCheck(name, margin > 0.0, margin))

    for check in checks:
        if not check.passed:
            logger.info(f'check_hypotheses: {check.name} fails with margin {check.margin:.3e}')
    return checks


def post_step_diagnostics(model, h, report, delta_hat, g):
    '''Predicted and recomputed condition numbers after h -> h + delta_hat.

    The prediction uses chi = ||delta||, chi' = ||d_alpha delta||:
        N+~ <= N+ + chi'
        N-~ <= N- + chi' (N-)^2 / (1 - chi' N-)        (needs chi' N- < 1)
        |c~ - c| <= (N-~)^2 (N-)^2 chi' (2 N+ + chi')
        U~ <= U / (1 - q/(1 - q)),  q = 3 (N-)^2 T M_1 ((N+)^2 + N+) chi'
    The U bound depends on the possibly estimated M_1 and is only reported.

    Raises:
        BoundViolated: a recomputed N+, N- or c exceeds its prediction.
    '''
    chi = gevrey_norm(delta_hat, g)
    chi_prime = gevrey_norm(directional_derivative(delta_hat, model.alpha), g)
    nplus, nminus = report.nplus, report.nminus

    predicted = {'nplus': nplus + chi_prime}
    x = chi_prime * nminus
    predicted['nminus'] = nminus + chi_prime * nminus ** 2 / (1.0 - x) if x < 1.0 else None
    if predicted['nminus'] is None:
        logger.warning(f'post_step_diagnostics: chi\' N- = {x:.3e} >= 1, N- bound unavailable')
        predicted['c_change'] = None
    else:
        predicted['c_change'] = (
            predicted['nminus'] ** 2 * nminus ** 2 * chi_prime * (2.0 * nplus + chi_prime)
        )
    q = 3.0 * nminus ** 2 * report.T * model.bounds().get(1, 0.0) * (nplus ** 2 + nplus) * chi_prime
    predicted['U'] = report.U / (1.0 - q / (1.0 - q)) if q < 0.5 else None

    recomputed = condition_numbers(model, h + delta_hat, g, c_floor=report.c_floor)
    slack = recomputed.tail + report.tail

    violations = []
    observed = {
        'nplus': recomputed.nplus,
        'nminus': recomputed.nminus,
        'c_change': abs(recomputed.c - report.c),
    }
    for name, value in observed.items():
        bound = predicted[name]
        if bound is not None and value > bound + BOUND_TOLERANCE * (1.0 + bound) + slack:
            violations.append('{n}: recomputed {v:.12e} > predicted {b:.12e}'.format(
                n=name, v=value, b=bound
            ))
    if violations:
        raise BoundViolated('post_step_diagnostics: ' + '; '.join(violations))
    if predicted['U'] is not None and recomputed.U > predicted['U'] * (1.0 + BOUND_TOLERANCE):
        logger.warning(
            f'post_step_diagnostics: U {recomputed.U:.6e} above its estimated bound '
            f'{predicted["U"]:.6e}'
        )
    return replace(recomputed, chi=chi, chi_prime=chi_prime, predicted=predicted)


@dataclass(frozen=True)
class ConvergenceFit:
    slope: float
    a_fit: float
    quadratic: bool
    points: int


def convergence_fit(history, floor=0.0):
    '''Slope of log eps_{n+1} against log eps_n and the constant A of eps_n <= (A eps_0)^(2^n).

    Only entries above `floor` take part.
    '''
    values = [float(e) for e in history if math.isfinite(e) and e > floor]
    if len(values) < 3:
        raise InsufficientHistory(
            'convergence_fit: {n} entries above floor {f:.1e}, need 3'.format(n=len(values), f=floor)
        )
    logs = np.log(values)
    slope, _ = np.polyfit(logs[:-1], logs[1:], 1)
    a_fit = max(values[n] ** (2.0 ** -n) / values[0] for n in range(1, len(values)))
    return ConvergenceFit(
        slope=float(slope), a_fit=float(a_fit),
        quadratic=bool(slope >= QUADRATIC_SLOPE), points=len(values),
    )


def step_exponent(beta, tau, dim):
    '''C3 = beta + 4 tau beta + 4 (beta - 1) d + 4 beta d.'''
    return beta + 4.0 * tau * beta + 4.0 * (beta - 1.0) * dim + 4.0 * beta * dim


SmallnessEntry = namedtuple('SmallnessEntry', ['name', 'value', 'threshold', 'satisfied'])


@dataclass(frozen=True)
class SmallnessReport:
    entries: Tuple[SmallnessEntry, ...]
    c3: float
    eps0_over_nu4: Optional[float]
    limit_radius: float
    label: str

    @property
    def all_satisfied(self):
        return all(entry.satisfied for entry in self.entries)

    def to_dict(self):
        return {
            'entries': [entry._asdict() for entry in self.entries],
            'c3': self.c3,
            'eps0_over_nu4': self.eps0_over_nu4,
            'limit_radius': self.limit_radius,
            'all_satisfied': self.all_satisfied,
            'label': self.label,
        }


def smallness_report(report, schedule, fit=None, accumulated_delta_norm=0.0, final=None):
    '''Fitted analogs of the smallness conditions on eps0.

    These are heuristic surrogates: the admissible eps* has no closed form,
    so A comes from convergence_fit and the ledger only says which of the
    conditions the observed run satisfies.
    '''
    c3 = step_exponent(report.beta, report.tau, report.dim)
    a_fit = None if fit is None else fit.a_fit
    if report.eps0 == 0.0:
        a_eps0 = 0.0
    elif a_fit is None:
        a_eps0 = None
    else:
        a_eps0 = a_fit * report.eps0
    scaled = None if a_eps0 is None else 2.0 ** (c3 / 2.0) * a_eps0
    final = report if final is None else final

    entries = (
        SmallnessEntry('a_eps0', a_eps0, 1.0, a_eps0 is not None and a_eps0 < 1.0),
        SmallnessEntry('c3_a_eps0', scaled, 0.5, scaled is not None and scaled <= 0.5),
        SmallnessEntry('iota_budget', accumulated_delta_norm, report.margin / 4.0,
                       accumulated_delta_norm <= report.margin / 4.0),
        SmallnessEntry('nplus_doubling', final.nplus, 2.0 * report.nplus,
                       final.nplus <= 2.0 * report.nplus),
        SmallnessEntry('nminus_doubling', final.nminus, 2.0 * report.nminus,
                       final.nminus <= 2.0 * report.nminus),
        SmallnessEntry('c_halving', final.c, 0.5 * report.c, final.c >= 0.5 * report.c),
    )
    eps0_over_nu4 = report.eps0 / report.nu ** 4 if report.nu > 0.0 else None
    return SmallnessReport(
        entries=entries,
        c3=c3,
        eps0_over_nu4=eps0_over_nu4,
        limit_radius=0.75 * schedule.r0,
        label='heuristic surrogate; ' + evidence_label(report.cutoff, report.tail),
    )


@dataclass(frozen=True)
class VerificationOptions:
    phis: Tuple[float, ...] = (0.1, 0.3, 0.7)
    reseed_trials: int = 2
    perturbation: float = 1e-4
    seed: int = 0
    tolerance: float = 1e-8


TranslationCheck = namedtuple('TranslationCheck', ['phi', 'residual_norm', 'ratio', 'passed'])
UniquenessTrial = namedtuple('UniquenessTrial', ['trial', 'distance', 'passed', 'failure'])


@dataclass(frozen=True)
class VerificationReport:
    residual_norm: float
    translations: Tuple[TranslationCheck, ...]
    identity_defect: float
    identity_passed: bool
    uniqueness: Tuple[UniquenessTrial, ...]
    label: str

    @property
    def all_passed(self):
        return (
            self.identity_passed
            and all(t.passed for t in self.translations)
            and all(u.passed for u in self.uniqueness)
        )

    def to_dict(self):
        return {
            'residual_norm': self.residual_norm,
            'translations': [t._asdict() for t in self.translations],
            'identity_defect': self.identity_defect,
            'identity_passed': self.identity_passed,
            'uniqueness': [u._asdict() for u in self.uniqueness],
            'all_passed': self.all_passed,
            'label': self.label,
        }


def _seed_direction(h, trial, rng):
    if trial == 0:
        e1 = (1,) + (0,) * (h.dim - 1)
        minus_e1 = tuple(-x for x in e1)
        return FourierSeries.from_modes(h.dim, h.cutoff, {e1: 0.5, minus_e1: 0.5})
    return random_hermitian(h.dim, h.cutoff, rng, zero_mean=True)


def verify_solution(model, h_star, options=None, schedule=None):
    '''Translation family, zero-average identity and uniqueness probe for h_star.

    Report only: failures are recorded, never raised.
    '''
    # kam_solver builds on this module
    from .kam_solver import StepSchedule, solve

    options = VerificationOptions() if options is None else options
    g = model.gevrey
    free = model.released()
    base = residual(free, h_star)
    base_norm = gevrey_norm(base, g)

    translations = []
    for phi in options.phis:
        moved = shift(h_star, phi * model.alpha) + phi
        norm = gevrey_norm(residual(free, moved), g)
        if base_norm > 0.0:
            ratio = norm / base_norm
        else:
            ratio = 0.0 if norm == 0.0 else math.inf
        passed = norm <= TRANSLATION_RATIO * base_norm + TRANSLATION_ABSOLUTE_TOLERANCE
        translations.append(TranslationCheck(float(phi), norm, ratio, passed))

    defect = abs(average(multiply(hull_tangent(h_star, model.alpha), base, free.grid(h_star.cutoff))))
    identity_passed = defect <= IDENTITY_TOLERANCE * base.l1() + TRANSLATION_ABSOLUTE_TOLERANCE

    schedule = StepSchedule(r0=g.radius) if schedule is None else schedule
    half = g.with_radius(0.5 * g.radius)
    rng = np.random.default_rng(options.seed)
    trials = []
    for trial in range(options.reseed_trials):
        direction = _seed_direction(h_star, trial, rng)
        direction = direction * (options.perturbation / gevrey_norm(direction, g))
        try:
            result = solve(free, h_star + direction, schedule)
        except HullError as err:
            logger.warning(f'verify_solution: uniqueness trial {trial} failed: {err}')
            trials.append(UniquenessTrial(trial, None, False, str(err)))
            continue
        distance = gevrey_norm(result.state.h - h_star, half)
        passed = result.converged and distance <= options.tolerance
        trials.append(UniquenessTrial(trial, distance, passed, result.failure))

    return VerificationReport(
        residual_norm=base_norm,
        translations=tuple(translations),
        identity_defect=defect,
        identity_passed=identity_passed,
        uniqueness=tuple(trials),
        label=evidence_label(h_star.cutoff, base.tail),
    )
