'''Interactions H_L and the functionals derived from them.

Each periodic part is expanded into a sparse table of plane waves over
Z^{d(L+1)}: H_L(zeta_0, ..., zeta_L) = sum_q c_q exp(i sum_i q_i.zeta_i).
Derivatives along alpha in slot i multiply c_q by i(q_i.alpha), so every
derivative array of H_L is evaluated along the hull in closed form on the
grid, then re-expanded.

The twist a of a nearest-neighbor interaction is the exactly quadratic
energy -(a/2)(u_1 - u_0)^2 in hull coordinates: its mixed derivative is +a,
its pure second derivatives are -a, and its Euler-Lagrange term is
a(h(. + omega alpha) + h(. - omega alpha) - 2h).
'''
import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .errors import (
    AliasingBudgetExceeded,
    CompositionDomainExceeded,
    DimensionMismatch,
    NearSingular,
    NondegeneracyLost,
)
from .fourier_core import (
    DROP_THRESHOLD,
    FourierSeries,
    GevreyParams,
    GridSpec,
    directional_derivative,
    eval_grid,
    from_grid,
    gevrey_norm,
    k_weight,
    multiply,
    reciprocal,
    shift,
)
from .small_divisors import Frequency, apply_L, telescope, check_zero_average


logger = logging.getLogger(__name__)


HERMITIAN_TOLERANCE = 1e-12


def cosine_term(dim, span, amplitude, wave):
    '''amplitude * cos(sum_i q_i.zeta_i); `wave` lists q_i for the first slots.'''
    q = _slot_vector(dim, span, {i: w for i, w in enumerate(wave)})
    return {q: 0.5 * amplitude, tuple(-x for x in q): 0.5 * amplitude}


def product_term(dim, span, scale, factors):
    '''scale * prod_f g_f(zeta_{slot_f}) with g_f = sum_k g_k exp(i k.zeta).

    Args:
        factors:
            List of (slot, {k: amplitude}) pairs.
    '''
    table = {(0,) * (dim * (span + 1)): complex(scale)}
    for slot, modes in factors:
        expanded = defaultdict(complex)
        for q, c in table.items():
            for k, amplitude in modes.items():
                step = _slot_vector(dim, span, {slot: k})
                expanded[tuple(a + b for a, b in zip(q, step))] += c * amplitude
        table = dict(expanded)
    return table


def difference_term(dim, span, scale, slots, direction, modes):
    '''scale * g(e.(zeta_i - zeta_j)) with g(s) = sum_n g_n exp(i n s).'''
    i, j = slots
    if i == j:
        raise ValueError('difference term needs two distinct slots, got {s}'.format(s=slots))
    direction = [int(x) for x in direction]
    table = defaultdict(complex)
    for n, amplitude in modes.items():
        step = [n * e for e in direction]
        q = _slot_vector(dim, span, {i: step, j: [-x for x in step]})
        table[q] += scale * amplitude
    return dict(table)


def _slot_vector(dim, span, by_slot):
    q = [0] * (dim * (span + 1))
    for slot, k in by_slot.items():
        if not 0 <= slot <= span:
            raise ValueError('slot {s} outside 0..{L}'.format(s=slot, L=span))
        k = [int(x) for x in k]
        if len(k) != dim:
            raise DimensionMismatch(
                'wave vector {k} for dimension {d}'.format(k=k, d=dim)
            )
        for axis, x in enumerate(k):
            q[slot * dim + axis] += x
    return tuple(q)


@dataclass(frozen=True, eq=False)
class Interaction:
    '''One H_L: plane-wave table of its periodic part plus the twist.

    Args:
        waves:
            Integer array of shape (modes, span + 1, dim).
        amplitudes:
            Complex array of shape (modes,).
        bound:
            User-supplied M_L; None means estimate it from the table.
    '''
    dim: int
    span: int
    waves: np.ndarray
    amplitudes: np.ndarray
    twist: float = 0.0
    bound: Optional[float] = None

    def __post_init__(self):
        waves = np.asarray(self.waves, dtype=int).reshape(-1, self.span + 1, self.dim)
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if waves.shape[0] != amplitudes.shape[0]:
            raise ValueError('waves and amplitudes disagree in length')
        if self.span < 0:
            raise ValueError('span must be >= 0, got {L}'.format(L=self.span))
        if self.twist != 0.0 and self.span != 1:
            raise ValueError('a twist only exists for span 1, got span {L}'.format(L=self.span))
        if self.bound is not None and not self.bound >= 0.0:
            raise ValueError('bound must be >= 0, got {b}'.format(b=self.bound))
        waves.setflags(write=False)
        amplitudes.setflags(write=False)
        object.__setattr__(self, 'waves', waves)
        object.__setattr__(self, 'amplitudes', amplitudes)
        self._check_hermitian()

    @classmethod
    def from_terms(cls, dim, span, terms=(), twist=0.0, bound=None):
        table = defaultdict(complex)
        for term in terms:
            for q, c in term.items():
                table[q] += c
        items = sorted((q, c) for q, c in table.items() if c != 0)
        waves = np.array([q for q, _ in items], dtype=int).reshape(-1, span + 1, dim)
        amplitudes = np.array([c for _, c in items], dtype=complex)
        return cls(dim=dim, span=span, waves=waves, amplitudes=amplitudes,
                   twist=float(twist), bound=bound)

    @classmethod
    def spring(cls, dim, twist, bound=None):
        return cls.from_terms(dim, 1, (), twist=twist, bound=bound)

    def _check_hermitian(self):
        table = {tuple(q.ravel()): c for q, c in zip(self.waves, self.amplitudes)}
        for q, c in table.items():
            partner = table.get(tuple(-x for x in q), 0j)
            if abs(partner - np.conj(c)) > HERMITIAN_TOLERANCE * max(abs(c), 1.0):
                raise ValueError(
                    'periodic part is not real: c[{q}] has no conjugate partner'.format(q=q)
                )

    @property
    def is_periodic(self):
        return self.amplitudes.size > 0

    def scaled(self, factor):
        return replace(self, amplitudes=self.amplitudes * factor,
                       bound=None if self.bound is None else self.bound * abs(factor))

    def slopes(self, alpha):
        '''q_i.alpha for every mode and slot, shape (modes, span + 1).'''
        return np.tensordot(self.waves, np.asarray(alpha, dtype=float), axes=([2], [0]))

    def estimate_bound(self, beta, rbar):
        '''max over derivative orders 0..3 of the weighted l1 norm of the table.

        Non-rigorous stand-in for M_L when none is supplied; the twist adds |a|.
        '''
        if not self.is_periodic:
            return abs(self.twist)
        flat = self.waves.reshape(self.waves.shape[0], -1)
        weight = np.exp(beta * rbar * k_weight(flat.T, beta)) * np.abs(self.amplitudes)
        best = 0.0
        for order in range(4):
            for combo in itertools.combinations_with_replacement(range(flat.shape[1]), order):
                factor = np.prod(np.abs(flat[:, list(combo)]), axis=1) if combo else 1.0
                best = max(best, float(np.sum(weight * factor)))
        return best + abs(self.twist)


@dataclass(frozen=True, eq=False)
class Model:
    '''Interactions with the frequency and Gevrey data they are solved for.

    composition_budget is the value R_bar^beta / d^(beta-1) of the composition
    domain; anchored() fixes it from a reference hull, after which every
    residual evaluation checks the iterate against it.
    '''
    interactions: Tuple[Interaction, ...]
    freq: Frequency
    gevrey: GevreyParams
    padding: int = 2
    aliasing_tolerance: float = 1e-8
    reciprocal_floor: float = 1e-8
    drop_threshold: float = DROP_THRESHOLD
    composition_budget: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'interactions', tuple(self.interactions))
        for interaction in self.interactions:
            if interaction.dim != self.freq.dim:
                raise DimensionMismatch(
                    'Interaction of dimension {i} in a model of dimension {d}'.format(
                        i=interaction.dim, d=self.freq.dim
                    )
                )

    @property
    def dim(self):
        return self.freq.dim

    @property
    def alpha(self):
        return np.asarray(self.freq.alpha)

    @property
    def max_span(self):
        return max((i.span for i in self.interactions), default=0)

    @property
    def twist(self):
        return sum(i.twist for i in self.interactions if i.span == 1)

    def of_span(self, span):
        return [i for i in self.interactions if i.span == span]

    @property
    def long_spans(self):
        return sorted({i.span for i in self.interactions if i.span >= 2})

    def grid(self, cutoff):
        return GridSpec.for_cutoff(self.dim, cutoff, self.padding, self.drop_threshold)

    def composition_level(self, h, extra=0.0):
        return self.dim * self.gevrey.radius ** self.gevrey.beta + gevrey_norm(h, self.gevrey) + extra

    def anchored(self, h):
        return replace(self, composition_budget=self.composition_level(h, self.gevrey.margin))

    def released(self):
        return replace(self, composition_budget=None)

    @property
    def rbar(self):
        budget = self.composition_budget
        if budget is None:
            budget = self.dim * self.gevrey.radius ** self.gevrey.beta + self.gevrey.margin
        beta = self.gevrey.beta
        return (self.dim ** (beta - 1.0) * budget) ** (1.0 / beta)

    def bounds(self):
        '''M_L per span; estimated entries are flagged by bounds_estimated().'''
        bounds = defaultdict(float)
        for interaction in self.interactions:
            if interaction.bound is not None:
                bounds[interaction.span] += interaction.bound
            else:
                bounds[interaction.span] += interaction.estimate_bound(self.gevrey.beta, self.rbar)
        return dict(sorted(bounds.items()))

    def bounds_estimated(self):
        return any(i.bound is None and i.is_periodic for i in self.interactions)

    def scaled(self, factor, index=None):
        '''Scale the periodic parts (all of them, or only interactions[index]).'''
        interactions = tuple(
            i.scaled(factor) if index is None or n == index else i
            for n, i in enumerate(self.interactions)
        )
        return replace(self, interactions=interactions)

    def with_frequency(self, freq):
        return replace(self, freq=freq)


def hull_tangent(h, alpha):
    '''l = 1 + d_alpha h.'''
    return directional_derivative(h, alpha) + 1.0


@dataclass(frozen=True, eq=False)
class _Orbit:
    grid: GridSpec
    nodes: np.ndarray
    values: dict


def _orbit(model, series, reach):
    '''Grid values of series(. + m omega alpha) for |m| <= reach.'''
    grid = model.grid(series.cutoff)
    values = {
        m: eval_grid(shift(series, m * model.freq.rotation), grid)
        for m in range(-reach, reach + 1)
    }
    return _Orbit(grid=grid, nodes=grid.nodes(), values=values)


def _plane_waves(model, interaction, orbit, offset):
    '''c_q exp(i q.gamma^(-offset)(sigma)) on the grid, one array per mode.'''
    slopes = interaction.slopes(model.alpha)
    shifts = np.arange(interaction.span + 1) - offset
    totals = interaction.waves.sum(axis=1)
    stack = np.empty((len(totals),) + orbit.grid.shape, dtype=complex)
    for n, (q_sum, slope, c) in enumerate(zip(totals, slopes, interaction.amplitudes)):
        phase = np.tensordot(q_sum.astype(float), orbit.nodes, axes=1)
        phase = phase + model.freq.omega * float(np.dot(shifts, slope))
        for m, s in zip(shifts, slope):
            if s != 0.0:
                phase = phase + s * orbit.values[m]
        stack[n] = c * np.exp(1j * phase)
    return stack, slopes


def _combine(weights, stack):
    return np.tensordot(weights, stack, axes=1).real


def _expand(model, values, scale, cutoff, where):
    series = from_grid(values, cutoff, model.drop_threshold)
    if series.tail > model.aliasing_tolerance * scale:
        raise AliasingBudgetExceeded(
            '{w}: composed function not resolved at cutoff {k} '
            '(tail {t:.3e}, scale {s:.3e})'.format(w=where, k=cutoff, t=series.tail, s=scale)
        )
    return series


def _twist_laplacian(model, series):
    a = model.twist
    if a == 0.0:
        return FourierSeries.zeros(series.dim, series.cutoff)
    step = model.freq.rotation
    return a * (shift(series, step) + shift(series, -step) - 2.0 * series)


def _check_hull(model, h):
    if h.dim != model.dim:
        raise DimensionMismatch(
            'Hull of dimension {h} for a model of dimension {d}'.format(h=h.dim, d=model.dim)
        )


def residual(model, h):
    '''E[h](sigma) = sum_L sum_k d_alpha^(k) H_L(gamma_L^(-k)(sigma)).'''
    _check_hull(model, h)
    if not compose_check(model, h, 0.0):
        raise CompositionDomainExceeded(
            'residual: hull norm {n:.6e} leaves the composition domain'.format(
                n=gevrey_norm(h, model.gevrey)
            )
        )
    total = _twist_laplacian(model, h).with_tail(h.tail)
    periodic = [i for i in model.interactions if i.is_periodic]
    if not periodic:
        return total
    orbit = _orbit(model, h, max(i.span for i in periodic))
    values = np.zeros(orbit.grid.shape)
    scale = 0.0
    for interaction in periodic:
        for k in range(interaction.span + 1):
            stack, slopes = _plane_waves(model, interaction, orbit, k)
            part = _combine(1j * slopes[:, k], stack)
            values += part
            scale = max(scale, float(np.max(np.abs(part))))
    return total + _expand(model, values, scale, h.cutoff, 'residual')


def residual_theta_derivative(model, h):
    return directional_derivative(residual(model, h), model.alpha)


def linearized_apply(model, h, delta):
    '''(DE[h] delta)(sigma) = sum_L sum_k sum_j d^(k) d^(j) H_L(gamma^(-k)) delta(sigma + (j-k) omega alpha).'''
    _check_hull(model, h)
    if delta.dim != model.dim:
        raise DimensionMismatch('delta dimension {d}'.format(d=delta.dim))
    delta = delta.with_cutoff(h.cutoff)
    total = _twist_laplacian(model, delta)
    periodic = [i for i in model.interactions if i.is_periodic]
    if not periodic:
        return total
    reach = max(i.span for i in periodic)
    orbit = _orbit(model, h, reach)
    moved = _orbit(model, delta, reach).values
    values = np.zeros(orbit.grid.shape)
    scale = 0.0
    for interaction in periodic:
        for k in range(interaction.span + 1):
            stack, slopes = _plane_waves(model, interaction, orbit, k)
            for j in range(interaction.span + 1):
                part = _combine(-slopes[:, k] * slopes[:, j], stack) * moved[j - k]
                values += part
                scale = max(scale, float(np.max(np.abs(part))))
    return total + _expand(model, values, scale, h.cutoff, 'linearized_apply')


def mixed_derivative(model, h, j, k, span):
    '''d_alpha^(k) d_alpha^(j) H_span evaluated along gamma^(-k), as a series.'''
    if not (0 <= j <= span and 0 <= k <= span):
        raise ValueError('need 0 <= j, k <= L, got j={j}, k={k}, L={L}'.format(j=j, k=k, L=span))
    _check_hull(model, h)
    interactions = model.of_span(span)
    twist = sum(i.twist for i in interactions)
    total = FourierSeries.constant(h.dim, h.cutoff, twist if j != k else -twist)
    periodic = [i for i in interactions if i.is_periodic]
    if not periodic:
        return total
    orbit = _orbit(model, h, span)
    values = np.zeros(orbit.grid.shape)
    scale = 0.0
    for interaction in periodic:
        stack, slopes = _plane_waves(model, interaction, orbit, k)
        part = _combine(-slopes[:, k] * slopes[:, j], stack)
        values += part
        scale = max(scale, float(np.max(np.abs(part))))
    return total + _expand(model, values, scale, h.cutoff, 'mixed_derivative')


def coefficient_C(model, h, j, k, span):
    '''C_{j,k,L} = d^(k) d^(j) H_L(gamma^(-k)) * l * l(. + (j-k) omega alpha).'''
    tangent = hull_tangent(h, model.alpha)
    grid = model.grid(h.cutoff)
    moved = shift(tangent, (j - k) * model.freq.rotation)
    return multiply(multiply(mixed_derivative(model, h, j, k, span), tangent, grid), moved, grid)


def long_range_couplings(model, h):
    '''(j, k, C_{j,k,L}) for every L >= 2 and 0 <= j < k <= L.'''
    return tuple(
        (j, k, coefficient_C(model, h, j, k, span))
        for span in model.long_spans
        for j, k in itertools.combinations(range(span + 1), 2)
    )


def _apply_couplings(couplings, eta, freq, grid):
    total = FourierSeries.zeros(eta.dim, eta.cutoff)
    for j, k, coefficient in couplings:
        inner = telescope(eta, j - k, -1, freq)
        total = total + apply_L(multiply(coefficient, inner, grid), k - j, 1, freq)
    return total


def apply_G(model, h, eta):
    '''G eta = sum_{L>=2} sum_{j<k} L^+_{k-j}[C_{j,k,L} R^-_{j-k} eta].'''
    check_zero_average(eta, 'apply_G')
    return _apply_couplings(
        long_range_couplings(model, h), eta.without_mean(), model.freq, model.grid(h.cutoff)
    )


@dataclass(frozen=True, eq=False)
class CouplingOperator:
    '''C_{0,1,1} + G at a fixed hull, with every coefficient precomputed.'''
    model: Model
    leading: FourierSeries
    leading_inverse: FourierSeries
    couplings: tuple = field(default=())

    @classmethod
    def build(cls, model, h):
        grid = model.grid(h.cutoff)
        leading = coefficient_C(model, h, 0, 1, 1)
        try:
            inverse = reciprocal(leading, grid, floor=model.reciprocal_floor)
        except NearSingular as err:
            raise NondegeneracyLost('C_011 is not invertible: {e}'.format(e=err)) from err
        return cls(model=model, leading=leading, leading_inverse=inverse,
                   couplings=long_range_couplings(model, h))

    @property
    def grid(self):
        return self.model.grid(self.leading.cutoff)

    def apply_leading(self, eta):
        return multiply(self.leading, eta, self.grid)

    def solve_leading(self, eta):
        return multiply(self.leading_inverse, eta, self.grid)

    def apply_G(self, eta, extended=False):
        '''G eta; with extended=True also on nonzero-average eta via the telescoped form.'''
        if not extended:
            check_zero_average(eta, 'apply_G')
            eta = eta.without_mean()
        return _apply_couplings(self.couplings, eta, self.model.freq, self.grid)

    def apply(self, eta):
        return self.apply_leading(eta) + self.apply_G(eta, extended=True)


def delta_pair_weight(span):
    '''sum_{0<=j<k<=L} (k-j)^2 = L(L+1)^2(L+2)/12.'''
    return span * (span + 1) ** 2 * (span + 2) // 12


def delta_bound(model, nplus):
    bounds = model.bounds()
    return nplus ** 2 * sum(
        bounds[span] * delta_pair_weight(span) for span in bounds if span >= 2
    )


def compose_check(model, h, candidate_delta_norm):
    '''d R^beta + ||h|| + candidate <= R_bar^beta / d^(beta-1).'''
    budget = model.composition_budget
    if budget is None:
        budget = model.composition_level(h, model.gevrey.margin)
    return model.composition_level(h, candidate_delta_norm) <= budget
