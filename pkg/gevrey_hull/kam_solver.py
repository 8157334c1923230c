'''Quasi-Newton iteration for the hull function.

One step solves the modified Newton equation through the factorization
    l E[h] = S_1 [C_011 + G] S_-1 eta,    Delta = l eta,
i.e. two cohomological equations around one inversion of C_011 + G by a
Neumann series. Radii follow the fixed schedule
    R_n = R_0 (1 - 1/4 sum_{i=1}^n 2^-i)  ->  3/4 R_0
and only weight the reported norms.
'''
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

from .certifier import (
    C_FLOOR,
    condition_numbers,
    convergence_fit,
    post_step_diagnostics,
    smallness_report,
    step_exponent,
    verify_solution,
)
from .errors import (
    CompositionDomainExceeded,
    InsufficientHistory,
    NeumannDivergence,
    NoConvergence,
    NondegeneracyLost,
)
from .fourier_core import FourierSeries, average, directional_derivative, gevrey_norm, multiply
from .interaction_model import CouplingOperator, hull_tangent, residual
from .records import Record, Records
from .small_divisors import solve_cohomology


logger = logging.getLogger(__name__)


MEAN_TOLERANCE = 1e-14
STAGNATION_LIMIT = 2


def schedule_radii(r0, n_max):
    '''[R_1, ..., R_n_max].'''
    return [r0 * (1.0 - 0.25 * (1.0 - 2.0 ** -n)) for n in range(1, n_max + 1)]


@dataclass(frozen=True)
class DomainLoss:
    '''Split of the radius loss kappa = R_n - R_{n+1} over the substeps of one iteration.'''
    kappa: float
    eps1: float
    sigma1: float
    r1: float
    r2: float
    eps2: float
    sigma2: float
    r3: float
    r4: float
    r5: float


@dataclass(frozen=True)
class StepSchedule:
    r0: float
    max_iterations: int = 12
    epsilon_floor: float = 1e-12
    neumann_tolerance: float = 1e-13
    neumann_max_terms: int = 60
    override_hypotheses: bool = False

    def __post_init__(self):
        if not self.r0 > 0.0:
            raise ValueError('r0 must be > 0, got {r}'.format(r=self.r0))
        if self.max_iterations < 0:
            raise ValueError('max_iterations must be >= 0')

    def radius(self, n):
        return self.r0 if n == 0 else schedule_radii(self.r0, n)[-1]

    def domain_losses(self, n):
        radius = self.radius(n)
        kappa = radius - self.radius(n + 1)
        eps1 = kappa / (8.0 * radius)
        r1 = (1.0 - eps1) * radius - kappa / 8.0
        r2 = r1 - kappa / 8.0
        eps2 = kappa / (8.0 * r2)
        r3 = (1.0 - eps2) * r2 - kappa / 8.0
        return DomainLoss(
            kappa=kappa, eps1=eps1, sigma1=kappa / 8.0, r1=r1, r2=r2,
            eps2=eps2, sigma2=kappa / 8.0, r3=r3, r4=r3 - kappa / 8.0,
            r5=radius - kappa,
        )


@dataclass(frozen=True, eq=False)
class HullState:
    h: FourierSeries
    radius: float
    iteration: int = 0
    residual_norm: float = math.inf
    accumulated_delta_norm: float = 0.0
    residual: Optional[FourierSeries] = None

    @classmethod
    def initial(cls, model, h0, radius):
        mean = average(h0)
        if abs(mean) > MEAN_TOLERANCE:
            logger.info(f'HullState.initial: removing initial average {abs(mean):.3e}')
        h0 = h0.without_mean()
        eps = residual(model, h0)
        return cls(
            h=h0, radius=radius, iteration=0,
            residual_norm=gevrey_norm(eps, model.gevrey.with_radius(radius)),
            residual=eps,
        )


class StepRecord(Record):
    '''Diagnostics of one Newton step.'''
    COLUMNS = (
        'iteration',
        'radius',
        'residual_norm',
        'delta_norm',
        'delta_derivative_norm',
        'neumann_terms',
        'tail_budget',
        'projected_mean',
        'wbar',
        'kappa',
        'next_residual_norm',
        'step_constant',
    )

    def needs_attention(self):
        return self['next_residual_norm'] >= self['residual_norm']


class StepRecords(Records):
    @classmethod
    def get_record_type(cls):
        return StepRecord

    def log_summary(self):
        stalled = self.get_items_needing_attention()
        logger.info(
            f'log_summary: {len(self)} Newton steps, {len(stalled)} without residual decrease'
        )


def neumann_series(operator, W, tol, max_terms, gevrey):
    '''sum_j (-C^-1 G)^j C^-1 W until the last term drops below tol ||W||.

    Returns:
        (sum, number of terms)
    Raises:
        NeumannDivergence: terms stop decreasing, max_terms is exceeded, or the
            defect ||(C + G) sum - W|| exceeds 10 tol ||W|| plus the truncation budget.
    '''
    w_norm = gevrey_norm(W, gevrey)
    if w_norm == 0.0:
        return FourierSeries.zeros(W.dim, W.cutoff), 0
    term = operator.solve_leading(W)
    total = term
    last = gevrey_norm(term, gevrey)
    terms = 1
    while operator.couplings and last >= tol * w_norm:
        if terms > max_terms:
            raise NeumannDivergence(
                'neumann_series: {n} terms without reaching tolerance'.format(n=max_terms)
            )
        term = -operator.solve_leading(operator.apply_G(term, extended=True))
        norm = gevrey_norm(term, gevrey)
        if norm >= last:
            raise NeumannDivergence(
                'neumann_series: term {n} has norm {a:.3e} >= previous {b:.3e}'.format(
                    n=terms, a=norm, b=last
                )
            )
        total = total + term
        last = norm
        terms += 1
    image = operator.apply(total)
    defect = gevrey_norm(image - W, gevrey)
    if defect > 10.0 * tol * w_norm + image.tail:
        raise NeumannDivergence(
            'neumann_series: defect {d:.3e} above {b:.3e}'.format(d=defect, b=10.0 * tol * w_norm)
        )
    return total, terms


def invert_C_plus_G(model, h, W, tol, max_terms, operator=None):
    operator = CouplingOperator.build(model, h) if operator is None else operator
    result, _ = neumann_series(operator, W, tol, max_terms, model.gevrey)
    return result


def newton_step(model, state, schedule):
    '''One quasi-Newton step from `state`; returns (next state, StepRecord).'''
    h = state.h
    freq = model.freq
    grid = model.grid(h.cutoff)
    gevrey = model.gevrey.with_radius(state.radius)
    eps = residual(model, h) if state.residual is None else state.residual
    tangent = hull_tangent(h, model.alpha)

    # (1) S_1 W0 = l E, after projecting out the truncation mean of l E
    rhs = multiply(tangent, eps, grid)
    projected_mean = abs(average(rhs))
    logger.info(
        f'newton_step: iteration {state.iteration}, <l E> = {projected_mean:.3e} '
        f'against ||E|| = {state.residual_norm:.3e}'
    )
    w0 = solve_cohomology(rhs.without_mean(), 1, freq)

    # (2)-(3) W_bar from (C + G)^-1 [W0 + W_bar] having zero average
    operator = CouplingOperator.build(model, h)
    tol, max_terms = schedule.neumann_tolerance, schedule.neumann_max_terms
    psi0, terms0 = neumann_series(operator, w0, tol, max_terms, gevrey)
    one = FourierSeries.constant(h.dim, h.cutoff, 1.0)
    psi1, terms1 = neumann_series(operator, one, tol, max_terms, gevrey)
    mean_one = average(psi1)
    if mean_one == 0.0:
        raise NondegeneracyLost('newton_step: <(C + G)^-1 1> vanishes')
    wbar = (-average(psi0) / mean_one).real
    psi = psi0 + wbar * psi1

    # (4) S_-1 eta = psi, normalized so that <l eta> = 0
    eta = solve_cohomology(psi.without_mean(), -1, freq)
    eta = eta - average(multiply(tangent, eta, grid)).real

    # (5)
    delta = multiply(tangent, eta, grid).without_mean()
    next_radius = schedule.radius(state.iteration + 1)
    next_gevrey = model.gevrey.with_radius(next_radius)
    delta_norm = gevrey_norm(delta, next_gevrey)
    accumulated = state.accumulated_delta_norm + delta_norm
    if accumulated > model.gevrey.margin / 4.0:
        raise CompositionDomainExceeded(
            'newton_step: accumulated correction {a:.6e} exceeds iota/4 = {b:.6e}'.format(
                a=accumulated, b=model.gevrey.margin / 4.0
            )
        )
    h_next = (h + delta).without_mean()
    eps_next = residual(model, h_next)
    next_norm = gevrey_norm(eps_next, next_gevrey)
    logger.info(
        f'newton_step: ||Delta|| = {delta_norm:.3e}, Neumann terms {terms0}+{terms1}, '
        f'residual {state.residual_norm:.3e} -> {next_norm:.3e}'
    )

    losses = schedule.domain_losses(state.iteration)
    step_constant = None
    if freq.nu and state.residual_norm > 0.0:
        c3 = step_exponent(model.gevrey.beta, freq.tau, model.dim)
        step_constant = next_norm / (
            freq.nu ** -4 * losses.kappa ** -c3 * state.residual_norm ** 2
        )
    record = StepRecord(
        iteration=state.iteration,
        radius=state.radius,
        residual_norm=state.residual_norm,
        delta_norm=delta_norm,
        delta_derivative_norm=gevrey_norm(directional_derivative(delta, model.alpha), next_gevrey),
        neumann_terms=terms0 + terms1,
        tail_budget=h_next.tail + eps_next.tail,
        projected_mean=projected_mean,
        wbar=wbar,
        kappa=losses.kappa,
        next_residual_norm=next_norm,
        step_constant=step_constant,
    )
    state_next = HullState(
        h=h_next,
        radius=next_radius,
        iteration=state.iteration + 1,
        residual_norm=next_norm,
        accumulated_delta_norm=accumulated,
        residual=eps_next,
    )
    return state_next, record


@dataclass(frozen=True, eq=False)
class SolveResult:
    state: HullState
    history: List[float]
    records: StepRecords
    initial_report: object = None
    final_report: object = None
    fit: object = None
    smallness: object = None
    verification: object = None
    converged: bool = False
    failure: Optional[str] = None

    def to_dict(self):
        return {
            'converged': self.converged,
            'failure': self.failure,
            'iterations': self.state.iteration,
            'radius': self.state.radius,
            'residual_norm': self.state.residual_norm,
            'accumulated_delta_norm': self.state.accumulated_delta_norm,
            'history': list(self.history),
            'steps': [dict(record) for record in self.records],
            'initial_report': None if self.initial_report is None else self.initial_report.to_dict(),
            'final_report': None if self.final_report is None else self.final_report.to_dict(),
            'fit': None if self.fit is None else {
                'slope': self.fit.slope,
                'a_fit': self.fit.a_fit,
                'quadratic': self.fit.quadratic,
                'points': self.fit.points,
            },
            'smallness': None if self.smallness is None else self.smallness.to_dict(),
            'verification': None if self.verification is None else self.verification.to_dict(),
        }


def _stop_level(schedule, state):
    tail = state.h.tail + (state.residual.tail if state.residual is not None else 0.0)
    return max(schedule.epsilon_floor, 1e3 * tail)


def solve(model, h0, schedule, verification=None, c_floor=C_FLOOR):
    '''Iterate newton_step from h0 until the residual reaches the stop level.

    The model is anchored at the normalized h0, so the composition domain
    stays fixed for the whole run. When the initial hypotheses fail the
    result comes back unconverged unless schedule.override_hypotheses is set.

    Raises:
        NoConvergence: the residual fails to decrease twice in a row, turns NaN, or
            max_iterations runs out above the stop level.
    '''
    if model.freq.nu is None:
        model = model.with_frequency(model.freq.with_estimated_constants())
    h0 = h0.without_mean()
    model = model.anchored(h0)
    g = model.gevrey

    state = HullState.initial(model, h0, schedule.r0)
    report = condition_numbers(model, state.h, g, c_floor=c_floor)
    initial_report = report
    history = [state.residual_norm]
    records = []

    if not report.all_passed:
        failed = ', '.join(check.name for check in report.hypotheses if not check.passed)
        if not schedule.override_hypotheses:
            logger.info(f'solve: not iterating, hypotheses failed: {failed}')
            return SolveResult(
                state=state, history=history, records=StepRecords(),
                initial_report=initial_report, final_report=report,
                converged=False, failure='hypotheses failed: {f}'.format(f=failed),
            )
        logger.warning(f'solve: hypotheses failed ({failed}), iterating on override')

    stalls = 0
    while state.residual_norm > _stop_level(schedule, state):
        if state.iteration >= schedule.max_iterations:
            raise NoConvergence(
                'solve: residual {r:.3e} above {s:.3e} after {n} iterations'.format(
                    r=state.residual_norm, s=_stop_level(schedule, state), n=state.iteration
                )
            )
        next_state, record = newton_step(model, state, schedule)
        records.append(record)
        history.append(next_state.residual_norm)
        if math.isnan(next_state.residual_norm):
            raise NoConvergence('solve: residual is NaN at iteration {n}'.format(n=next_state.iteration))
        if record.needs_attention():
            stalls += 1
            logger.warning(
                f'solve: residual did not decrease at iteration {state.iteration} '
                f'({state.residual_norm:.3e} -> {next_state.residual_norm:.3e})'
            )
            if stalls >= STAGNATION_LIMIT:
                raise NoConvergence(
                    'solve: residual stagnates at {r:.3e}'.format(r=next_state.residual_norm)
                )
        else:
            stalls = 0
        report = post_step_diagnostics(model, state.h, report, next_state.h - state.h, g)
        state = next_state

    records = StepRecords(records)
    records.log_summary()
    try:
        fit = convergence_fit(history, floor=schedule.epsilon_floor)
    except InsufficientHistory as err:
        logger.info(f'solve: no convergence fit, {err}')
        fit = None
    smallness = smallness_report(
        initial_report, schedule, fit=fit,
        accumulated_delta_norm=state.accumulated_delta_norm, final=report,
    )
    checked = None
    if verification is not None:
        checked = verify_solution(model, state.h, verification, schedule)
    logger.info(
        f'solve: converged after {state.iteration} iterations, residual {state.residual_norm:.3e}'
    )
    return SolveResult(
        state=state, history=history, records=records,
        initial_report=initial_report, final_report=report, fit=fit,
        smallness=smallness, verification=checked, converged=True,
    )
