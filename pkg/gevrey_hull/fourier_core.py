'''Truncated Fourier series on the d-torus.

A FourierSeries stores the coefficients f_k of
    f(sigma) = sum_k f_k exp(i k.sigma),    ||k||_inf <= K
as a dense centered numpy array (index k + K along every axis). Products and
reciprocals go through padded uniform grids with numpy.fft; shifts and
derivatives are exact diagonal multipliers.

Every series carries a tail budget: the l1 mass of coefficients discarded by
truncation on the way to it. The budget is accumulated, never reset, so the
certifier can report it next to the condition numbers. Coefficients below
the grid's drop threshold times the largest one are roundoff and count for
nothing.
'''
import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import (
    AliasingBudgetExceeded,
    DimensionMismatch,
    NearSingular,
    SymmetryViolation,
)


logger = logging.getLogger(__name__)


DROP_THRESHOLD = 1e-16


def k_weight(k, beta):
    '''|k|_beta = sum_i |k_i|^(1/beta).

    Args:
        k:
            Integer vector, or a stacked array of vectors with the components
            along the first axis (e.g. the output of wavenumbers()).
        beta:
            Gevrey exponent (>= 1).
    '''
    weight = np.sum(np.abs(np.asarray(k, dtype=float)) ** (1.0 / beta), axis=0)
    if np.ndim(weight) == 0:
        return float(weight)
    return weight


@lru_cache(maxsize=64)
def wavenumbers(dim, cutoff):
    '''Integer lattice of retained modes, shape (dim, 2K+1, ..., 2K+1).'''
    axis = np.arange(-cutoff, cutoff + 1)
    k = np.stack(np.meshgrid(*([axis] * dim), indexing='ij'))
    k.setflags(write=False)
    return k


@dataclass(frozen=True)
class GevreyParams:
    beta: float
    radius: float
    margin: float = 0.5

    def __post_init__(self):
        if not self.beta >= 1.0:
            raise ValueError('beta must be >= 1, got {b}'.format(b=self.beta))
        if not self.radius > 0.0:
            raise ValueError('radius must be > 0, got {r}'.format(r=self.radius))
        if not self.margin > 0.0:
            raise ValueError('margin must be > 0, got {m}'.format(m=self.margin))

    def with_radius(self, radius):
        return replace(self, radius=radius)

    def weights(self, dim, cutoff):
        return np.exp(
            self.beta * self.radius * k_weight(wavenumbers(dim, cutoff), self.beta)
        )


@dataclass(frozen=True)
class GridSpec:
    '''Uniform tensor grid with `points` nodes per axis on the d-torus.'''
    dim: int
    points: int
    padding: int = 2
    drop_threshold: float = DROP_THRESHOLD

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError('dim must be positive, got {d}'.format(d=self.dim))
        if self.padding < 2:
            raise ValueError(
                'padding must be >= 2, got {p}'.format(p=self.padding)
            )
        if self.points < 1:
            raise ValueError(
                'points must be positive, got {m}'.format(m=self.points)
            )
        if not self.drop_threshold >= 0.0:
            raise ValueError(
                'drop_threshold must be >= 0, got {t}'.format(t=self.drop_threshold)
            )

    @classmethod
    def for_cutoff(cls, dim, cutoff, padding=2, drop_threshold=DROP_THRESHOLD):
        return cls(
            dim=dim, points=padding * (2 * cutoff + 1), padding=padding,
            drop_threshold=drop_threshold,
        )

    def supports(self, cutoff):
        return self.points >= self.padding * (2 * cutoff + 1)

    @property
    def shape(self):
        return (self.points,) * self.dim

    def nodes(self):
        axis = 2.0 * np.pi * np.arange(self.points) / self.points
        return np.stack(np.meshgrid(*([axis] * self.dim), indexing='ij'))


class FourierSeries:
    '''Immutable truncated Fourier series.

    Coefficients below the grid drop threshold times max|f_k| are zeroed
    after every grid transform.
    '''
    SYMMETRY_TOLERANCE = 1e-10

    def __init__(self, dim, cutoff, coeffs, tail=0.0):
        if dim < 1 or cutoff < 0:
            raise ValueError(
                'Invalid series shape dim={d}, cutoff={k}'.format(d=dim, k=cutoff)
            )
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape != (2 * cutoff + 1,) * dim:
            raise ValueError(
                'Coefficient array of shape {s} does not match dim={d}, '
                'cutoff={k}'.format(s=coeffs.shape, d=dim, k=cutoff)
            )
        coeffs.setflags(write=False)
        self._dim = int(dim)
        self._cutoff = int(cutoff)
        self._coeffs = coeffs
        self._tail = float(tail)

    @classmethod
    def zeros(cls, dim, cutoff):
        return cls(dim, cutoff, np.zeros((2 * cutoff + 1,) * dim, dtype=complex))

    @classmethod
    def constant(cls, dim, cutoff, value):
        coeffs = np.zeros((2 * cutoff + 1,) * dim, dtype=complex)
        coeffs[(cutoff,) * dim] = value
        return cls(dim, cutoff, coeffs)

    @classmethod
    def from_modes(cls, dim, cutoff, modes):
        '''Build from a mapping {k: amplitude}.'''
        coeffs = np.zeros((2 * cutoff + 1,) * dim, dtype=complex)
        for k, amplitude in modes.items():
            k = tuple(int(x) for x in k)
            if len(k) != dim:
                raise DimensionMismatch(
                    'Mode {k} has dimension {n}, expected {d}'.format(
                        k=k, n=len(k), d=dim
                    )
                )
            if max(abs(x) for x in k) > cutoff:
                raise ValueError(
                    'Mode {k} outside cutoff {c}'.format(k=k, c=cutoff)
                )
            coeffs[tuple(x + cutoff for x in k)] += amplitude
        return cls(dim, cutoff, coeffs)

    @property
    def dim(self):
        return self._dim

    @property
    def cutoff(self):
        return self._cutoff

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def tail(self):
        return self._tail

    @property
    def wavenumbers(self):
        return wavenumbers(self._dim, self._cutoff)

    def __getitem__(self, k):
        k = tuple(int(x) for x in k)
        if len(k) != self._dim or max(abs(x) for x in k) > self._cutoff:
            return 0j
        return complex(self._coeffs[tuple(x + self._cutoff for x in k)])

    def modes(self):
        '''Nonzero coefficients as {k: amplitude}, in lexicographic k order.'''
        index = np.argwhere(self._coeffs != 0)
        return {
            tuple(int(i) - self._cutoff for i in idx): complex(self._coeffs[tuple(idx)])
            for idx in index
        }

    def l1(self):
        return float(np.sum(np.abs(self._coeffs)))

    def max_abs(self):
        return float(np.max(np.abs(self._coeffs)))

    def reflected(self):
        '''Coefficients conj(f_{-k}); equals self for a real function.'''
        return np.conj(np.flip(self._coeffs))

    def symmetry_defect(self):
        return float(np.max(np.abs(self._coeffs - self.reflected())))

    def is_hermitian(self, tol=None):
        tol = self.SYMMETRY_TOLERANCE if tol is None else tol
        return self.symmetry_defect() <= tol * max(self.max_abs(), 1e-300)

    def hermitian_part(self):
        return self._replace(0.5 * (self._coeffs + self.reflected()))

    def without_mean(self):
        coeffs = self._coeffs.copy()
        coeffs[(self._cutoff,) * self._dim] = 0.0
        return self._replace(coeffs)

    def with_cutoff(self, cutoff):
        coeffs, discarded = _embed(self._coeffs, self._dim, self._cutoff, cutoff)
        return FourierSeries(self._dim, cutoff, coeffs, self._tail + discarded)

    def dropped(self, threshold=None):
        threshold = DROP_THRESHOLD if threshold is None else threshold
        magnitude = np.abs(self._coeffs)
        small = magnitude < threshold * magnitude.max() if magnitude.size else None
        if small is None or not small.any():
            return self
        coeffs = self._coeffs.copy()
        coeffs[small] = 0.0
        return self._replace(coeffs)

    def with_tail(self, tail):
        return FourierSeries(self._dim, self._cutoff, self._coeffs, tail)

    def _replace(self, coeffs):
        return FourierSeries(self._dim, self._cutoff, coeffs, self._tail)

    def _aligned(self, other):
        if not isinstance(other, FourierSeries):
            return NotImplemented
        _check_dims(self, other)
        cutoff = max(self._cutoff, other._cutoff)
        return self.with_cutoff(cutoff), other.with_cutoff(cutoff)

    def __add__(self, other):
        if np.isscalar(other):
            return self + FourierSeries.constant(self._dim, self._cutoff, other)
        pair = self._aligned(other)
        if pair is NotImplemented:
            return pair
        a, b = pair
        return FourierSeries(
            a.dim, a.cutoff, a.coeffs + b.coeffs, a.tail + b.tail
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self._replace(-self._coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return FourierSeries(
            self._dim, self._cutoff, scalar * self._coeffs,
            abs(scalar) * self._tail
        )

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __repr__(self):
        return 'FourierSeries(dim={d}, cutoff={k}, modes={n}, tail={t:.3e})'.format(
            d=self._dim, k=self._cutoff,
            n=int(np.count_nonzero(self._coeffs)), t=self._tail
        )


def _check_dims(*series):
    dims = {s.dim for s in series}
    if len(dims) > 1:
        raise DimensionMismatch(
            'Series dimensions differ: {d}'.format(d=sorted(dims))
        )


def _embed(coeffs, dim, cutoff_from, cutoff_to):
    '''Pad or truncate a centered coefficient array. Returns (array, discarded l1).'''
    if cutoff_to == cutoff_from:
        return coeffs, 0.0
    if cutoff_to > cutoff_from:
        out = np.zeros((2 * cutoff_to + 1,) * dim, dtype=complex)
        lo = cutoff_to - cutoff_from
        out[(slice(lo, lo + 2 * cutoff_from + 1),) * dim] = coeffs
        return out, 0.0
    lo = cutoff_from - cutoff_to
    out = coeffs[(slice(lo, lo + 2 * cutoff_to + 1),) * dim]
    discarded = float(np.sum(np.abs(coeffs)) - np.sum(np.abs(out)))
    return out.copy(), max(discarded, 0.0)


def _mode_index(cutoff, points, dim):
    idx = np.arange(-cutoff, cutoff + 1) % points
    return np.ix_(*([idx] * dim))


def synthesize(f, points):
    '''Complex values of f on the uniform grid with `points` nodes per axis.'''
    if points < 2 * f.cutoff + 1:
        raise AliasingBudgetExceeded(
            'Grid with {m} points cannot hold cutoff {k}'.format(
                m=points, k=f.cutoff
            )
        )
    spectrum = np.zeros((points,) * f.dim, dtype=complex)
    spectrum[_mode_index(f.cutoff, points, f.dim)] = f.coeffs
    return np.fft.ifftn(spectrum) * spectrum.size


def analyze(values, cutoff, hermitian=False, tail=0.0, threshold=DROP_THRESHOLD):
    '''Inverse of synthesize, truncated to ||k||_inf <= cutoff.

    The l1 mass of the discarded part of the grid spectrum is added to `tail`.
    '''
    values = np.asarray(values)
    dim = values.ndim
    points = values.shape[0]
    if any(n != points for n in values.shape):
        raise ValueError('Grid must be uniform, got shape {s}'.format(s=values.shape))
    if points < 2 * cutoff + 1:
        raise AliasingBudgetExceeded(
            'Grid with {m} points cannot resolve cutoff {k}'.format(
                m=points, k=cutoff
            )
        )
    spectrum = np.fft.fftn(values) / values.size
    kept = spectrum[_mode_index(cutoff, points, dim)]
    magnitude = np.abs(spectrum)
    resolved = magnitude[magnitude >= threshold * magnitude.max()]
    kept_mass = np.abs(kept)
    kept_mass = kept_mass[kept_mass >= threshold * magnitude.max()]
    discarded = max(float(np.sum(resolved) - np.sum(kept_mass)), 0.0)
    series = FourierSeries(dim, cutoff, kept, tail + discarded)
    if hermitian:
        series = series.hermitian_part()
    return series.dropped(threshold)


def _check_support(grid, cutoff, where):
    if not grid.supports(cutoff):
        raise AliasingBudgetExceeded(
            '{w}: grid of {m} points with padding {p} cannot hold cutoff {k}'.format(
                w=where, m=grid.points, p=grid.padding, k=cutoff
            )
        )


def gevrey_norm(f, g):
    '''sum_k exp(beta R |k|_beta) |f_k|.'''
    return float(np.sum(g.weights(f.dim, f.cutoff) * np.abs(f.coeffs)))


def multiply(f, g, grid=None, cutoff=None, max_tail=None):
    '''Product of two series via a padded grid.

    The retained coefficients are exact whenever grid.points exceeds
    f.cutoff + g.cutoff + cutoff, which the default grid guarantees.

    Args:
        grid:
            GridSpec; defaults to GridSpec.for_cutoff for the larger cutoff.
            A given grid must support the larger input cutoff.
        cutoff:
            Output cutoff; defaults to the larger input cutoff.
        max_tail:
            Raise AliasingBudgetExceeded when more l1 mass than this is
            truncated away.
    '''
    _check_dims(f, g)
    cutoff = max(f.cutoff, g.cutoff) if cutoff is None else cutoff
    if grid is None:
        grid = GridSpec.for_cutoff(f.dim, max(f.cutoff, g.cutoff))
    else:
        _check_support(grid, max(f.cutoff, g.cutoff), 'multiply')
    if grid.dim != f.dim:
        raise DimensionMismatch(
            'Grid dimension {g} != series dimension {d}'.format(g=grid.dim, d=f.dim)
        )
    if grid.points <= f.cutoff + g.cutoff + cutoff:
        raise AliasingBudgetExceeded(
            'Grid of {m} points aliases a product of cutoffs {a}+{b} '
            'into cutoff {c}'.format(m=grid.points, a=f.cutoff, b=g.cutoff, c=cutoff)
        )
    values = synthesize(f, grid.points) * synthesize(g, grid.points)
    carried = f.tail * g.l1() + g.tail * f.l1()
    product = analyze(values, cutoff, tail=0.0, threshold=grid.drop_threshold)
    if max_tail is not None and product.tail > max_tail:
        raise AliasingBudgetExceeded(
            'multiply: truncated mass {t:.3e} above budget {b:.3e}'.format(
                t=product.tail, b=max_tail
            )
        )
    return product.with_tail(product.tail + carried)


def shift(f, t):
    '''f(sigma + t); an exact isometry of every Gevrey norm.'''
    t = np.asarray(t, dtype=float)
    if t.shape != (f.dim,):
        raise DimensionMismatch(
            'Shift vector of shape {s} for dimension {d}'.format(s=t.shape, d=f.dim)
        )
    phase = np.exp(1j * np.tensordot(t, f.wavenumbers, axes=1))
    return FourierSeries(f.dim, f.cutoff, f.coeffs * phase, f.tail)


def directional_derivative(f, alpha):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (f.dim,):
        raise DimensionMismatch(
            'Direction of shape {s} for dimension {d}'.format(s=alpha.shape, d=f.dim)
        )
    factor = 1j * np.tensordot(alpha, f.wavenumbers, axes=1)
    return FourierSeries(f.dim, f.cutoff, f.coeffs * factor, f.tail)


def partial_derivative(f, gamma):
    '''Mixed partial derivative d^gamma f for a multi-index gamma.'''
    if len(gamma) != f.dim:
        raise DimensionMismatch(
            'Multi-index {g} for dimension {d}'.format(g=tuple(gamma), d=f.dim)
        )
    factor = np.ones(f.coeffs.shape, dtype=complex)
    for axis, order in enumerate(gamma):
        factor = factor * (1j * f.wavenumbers[axis]) ** int(order)
    return FourierSeries(f.dim, f.cutoff, f.coeffs * factor, f.tail)


def cauchy_bound(f, g, order, lam):
    '''(r!/lambda^r)^beta * ||f||_{beta,R}: bounds ||d^gamma f||_{beta,R-lambda}, |gamma| = r.'''
    if not 0.0 < lam < g.radius:
        raise ValueError(
            'lambda must lie in (0, R), got {l} for R={r}'.format(l=lam, r=g.radius)
        )
    return (math.factorial(order) / lam ** order) ** g.beta * gevrey_norm(f, g)


def average(f):
    return complex(f.coeffs[(f.cutoff,) * f.dim])


def eval_grid(f, grid):
    '''Real values of a Hermitian series on the grid nodes.'''
    if grid.dim != f.dim:
        raise DimensionMismatch(
            'Grid dimension {g} != series dimension {d}'.format(g=grid.dim, d=f.dim)
        )
    if not f.is_hermitian():
        raise SymmetryViolation(
            'eval_grid: series is not Hermitian (defect {e:.3e})'.format(
                e=f.symmetry_defect()
            )
        )
    return synthesize(f, grid.points).real


def from_grid(values, cutoff, threshold=DROP_THRESHOLD):
    return analyze(np.asarray(values, dtype=float), cutoff, hermitian=True, threshold=threshold)


def reciprocal(f, grid=None, floor=1e-8, cutoff=None):
    '''Series of 1/f, re-expanded from pointwise values on the grid.

    Raises:
        NearSingular: min |f| over the grid is below floor.
    '''
    cutoff = f.cutoff if cutoff is None else cutoff
    if grid is None:
        grid = GridSpec.for_cutoff(f.dim, max(f.cutoff, cutoff))
    else:
        _check_support(grid, max(f.cutoff, cutoff), 'reciprocal')
    values = synthesize(f, grid.points)
    smallest = float(np.min(np.abs(values)))
    if smallest < floor:
        raise NearSingular(
            'reciprocal: min |f| on grid = {s:.3e} < floor {fl:.3e}'.format(
                s=smallest, fl=floor
            )
        )
    hermitian = f.is_hermitian()
    if hermitian:
        values = values.real
    inverse = analyze(
        1.0 / values, cutoff, hermitian=hermitian, threshold=grid.drop_threshold
    )
    # d(1/f) = -df/f^2
    carried = f.tail / smallest ** 2
    return inverse.with_tail(inverse.tail + carried)


def random_hermitian(dim, cutoff, rng, decay=1.0, zero_mean=False):
    '''Random real trigonometric polynomial with |f_k| ~ exp(-decay |k|_1).

    Args:
        rng: numpy.random.Generator.
    '''
    envelope = np.exp(-decay * np.sum(np.abs(wavenumbers(dim, cutoff)), axis=0))
    coeffs = (
        rng.standard_normal(envelope.shape) + 1j * rng.standard_normal(envelope.shape)
    ) * envelope
    series = FourierSeries(dim, cutoff, coeffs).hermitian_part()
    return series.without_mean() if zero_mean else series
