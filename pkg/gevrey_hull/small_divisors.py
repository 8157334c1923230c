'''Diophantine constants and the cohomological operators.

S_n eta = eta(. + n omega alpha) - eta is diagonal in Fourier space with
multiplier exp(i n k.omega alpha) - 1. The bounded operators
L_n^s = S_s^-1 S_n and R_n^s = S_n S_s^-1 (s = +-1) share the multiplier
(exp(i n theta) - 1)/(exp(i s theta) - 1), which telescopes into a finite sum
of shifts, so neither ever divides by a small divisor.
'''
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateFrequency, DimensionMismatch, NonzeroAverage, ResonantMode
from .fourier_core import FourierSeries, average, shift, wavenumbers


logger = logging.getLogger(__name__)


AVERAGE_TOLERANCE = 1e-12
DIVISOR_FLOOR_FACTOR = 1e-3
RESONANCE_TOLERANCE = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class Frequency:
    '''Quasi-periodicity data: alpha, rotation number omega and the
    Diophantine pairs (nu, tau) for omega*alpha and (nu0, tau0) for alpha.

    nu and nu0 stay None until estimated from a lattice scan up to kmax.
    '''
    alpha: Tuple[float, ...]
    omega: float = 1.0
    tau: float = 2.0
    nu: Optional[float] = None
    tau0: Optional[float] = None
    nu0: Optional[float] = None
    kmax: int = 64

    def __post_init__(self):
        object.__setattr__(self, 'alpha', tuple(float(a) for a in self.alpha))
        if not self.alpha:
            raise ValueError('alpha must have at least one component')
        if any(not 0.0 <= a <= 1.0 for a in self.alpha):
            raise ValueError('alpha components must lie in [0, 1]: {a}'.format(a=self.alpha))
        if not self.tau > 0.0:
            raise ValueError('tau must be > 0, got {t}'.format(t=self.tau))
        if self.kmax < 1:
            raise ValueError('kmax must be >= 1, got {k}'.format(k=self.kmax))

    @property
    def dim(self):
        return len(self.alpha)

    @property
    def rotation(self):
        '''The vector omega*alpha.'''
        return self.omega * np.asarray(self.alpha)

    def phases(self, dim, cutoff):
        '''k.omega alpha on the lattice of retained modes.'''
        if dim != self.dim:
            raise DimensionMismatch(
                'Frequency of dimension {f} applied to series of dimension {d}'.format(
                    f=self.dim, d=dim
                )
            )
        return np.tensordot(self.rotation, wavenumbers(dim, cutoff), axes=1)

    def with_estimated_constants(self):
        nu, k = estimate_dio_constants(self.alpha, self.omega, self.tau, self.kmax)
        logger.info(
            'with_estimated_constants: nu={nu:.6e} attained at k={k} (kmax={m})'.format(
                nu=nu, k=k, m=self.kmax
            )
        )
        nu0 = self.nu0
        if self.tau0 is not None:
            nu0, _ = estimate_alpha_constants(self.alpha, self.tau0, self.kmax)
        return replace(self, nu=nu, nu0=nu0)


def _scan_lattice(dim, kmax):
    k = wavenumbers(dim, kmax).reshape(dim, -1).T
    return k[np.any(k != 0, axis=1)]


def estimate_dio_constants(alpha, omega, tau, kmax):
    '''nu = min |omega alpha.k - 2 pi n| |k|_1^tau over 0 < ||k||_inf <= kmax.

    Returns:
        (nu, k) with k the minimizing mode.
    Raises:
        DegenerateFrequency: omega alpha.k lands on 2 pi Z for a scanned k.
    '''
    if kmax < 1:
        raise ValueError('kmax must be >= 1, got {k}'.format(k=kmax))
    alpha = np.asarray(alpha, dtype=float)
    k = _scan_lattice(alpha.size, kmax)
    x = omega * (k @ alpha)
    dist = np.abs(x - 2.0 * np.pi * np.round(x / (2.0 * np.pi)))
    resonant = dist <= RESONANCE_TOLERANCE * np.maximum(1.0, np.abs(x))
    if resonant.any():
        hit = tuple(int(v) for v in k[np.argmax(resonant)])
        raise DegenerateFrequency(
            'omega*alpha.k hits 2*pi*Z at k={k}'.format(k=hit)
        )
    values = dist * np.sum(np.abs(k), axis=1) ** tau
    i = int(np.argmin(values))
    return float(values[i]), tuple(int(v) for v in k[i])


def estimate_alpha_constants(alpha, tau0, kmax):
    '''nu0 = min |alpha.k| |k|_1^tau0; also the rational independence check.'''
    alpha = np.asarray(alpha, dtype=float)
    k = _scan_lattice(alpha.size, kmax)
    x = np.abs(k @ alpha)
    dependent = x <= RESONANCE_TOLERANCE * np.sum(np.abs(k), axis=1)
    if dependent.any():
        hit = tuple(int(v) for v in k[np.argmax(dependent)])
        raise DegenerateFrequency(
            'alpha is rationally dependent: alpha.k = 0 at k={k}'.format(k=hit)
        )
    values = x * np.sum(np.abs(k), axis=1) ** tau0
    i = int(np.argmin(values))
    return float(values[i]), tuple(int(v) for v in k[i])


def cohomology_constant(tau, beta):
    return 0.5 * math.pi * math.exp(-tau * beta) * tau ** (tau * beta)


def cohomology_bound(eta_norm, nu, tau, beta, loss):
    '''Bound on ||phi||_{beta,R-loss} for S_{+-1} phi = eta with ||eta||_{beta,R} = eta_norm.'''
    return cohomology_constant(tau, beta) / nu * loss ** (-tau * beta) * eta_norm


def check_zero_average(eta, where):
    mean = average(eta)
    if abs(mean) > AVERAGE_TOLERANCE * max(eta.l1(), 1.0):
        raise NonzeroAverage(
            '{w}: input average {m:.3e} is not zero'.format(w=where, m=abs(mean))
        )


def apply_S(eta, n, freq):
    if n == 0:
        return FourierSeries.zeros(eta.dim, eta.cutoff)
    return shift(eta, n * freq.rotation) - eta


def solve_cohomology(eta, n, freq, floor=None):
    '''Zero-average phi with phi(. + n omega alpha) - phi = eta on retained modes.

    Args:
        floor:
            Smallest admissible |exp(i n k.omega alpha) - 1|. Defaults to
            1e-3 * nu * K^-tau when freq.nu is known.
    Raises:
        NonzeroAverage, ResonantMode
    '''
    if n == 0:
        raise ValueError('solve_cohomology needs n != 0')
    check_zero_average(eta, 'solve_cohomology')
    if floor is None:
        if freq.nu is not None:
            floor = DIVISOR_FLOOR_FACTOR * freq.nu * max(eta.cutoff, 1) ** (-freq.tau)
        else:
            floor = np.finfo(float).tiny
    divisor = np.exp(1j * n * freq.phases(eta.dim, eta.cutoff)) - 1.0
    center = (eta.cutoff,) * eta.dim
    magnitude = np.abs(divisor)
    magnitude[center] = np.inf
    i = np.unravel_index(np.argmin(magnitude), magnitude.shape)
    if magnitude[i] < floor:
        k = np.asarray(i) - eta.cutoff
        raise ResonantMode(k, float(magnitude[i]), floor)
    divisor[center] = 1.0
    coeffs = eta.coeffs / divisor
    coeffs[center] = 0.0
    # modes beyond K keep their tail bound
    return FourierSeries(eta.dim, eta.cutoff, coeffs, eta.tail)


def telescope(eta, n, sign, freq):
    '''Divisor-free (exp(i n theta) - 1)/(exp(i sign theta) - 1) applied to eta.

    For n*sign > 0 this is sum_{p=0}^{|n|-1} eta(. + sign p omega alpha);
    otherwise -sum_{p=1}^{|n|} eta(. + sgn(n) p omega alpha). Defined on all
    of G: the k=0 multiplier is the limit value n*sign.
    '''
    if sign not in (1, -1):
        raise ValueError('sign must be +1 or -1, got {s}'.format(s=sign))
    if n == 0:
        return FourierSeries.zeros(eta.dim, eta.cutoff)
    if n * sign > 0:
        offsets, coefficient = sign * np.arange(abs(n)), 1.0
    else:
        offsets, coefficient = np.sign(n) * np.arange(1, abs(n) + 1), -1.0
    theta = freq.phases(eta.dim, eta.cutoff)
    multiplier = coefficient * sum(np.exp(1j * p * theta) for p in offsets)
    return FourierSeries(eta.dim, eta.cutoff, eta.coeffs * multiplier, abs(n) * eta.tail)


def apply_L(eta, n, sign, freq):
    # closed form minus n<eta>: subtracting the telescoped mean is the same
    return telescope(eta, n, sign, freq).without_mean()


def apply_R(eta, n, sign, freq):
    check_zero_average(eta, 'apply_R')
    return telescope(eta, n, sign, freq).without_mean()
