import math

import numpy as np
import pytest

from gevrey_hull.fourier_core import FourierSeries, GevreyParams, random_hermitian
from gevrey_hull.interaction_model import Interaction, Model, cosine_term, product_term
from gevrey_hull.kam_solver import StepSchedule
from gevrey_hull.small_divisors import Frequency


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DESK_ALPHA = (1.0, GOLDEN)


def desk_model(epsilon=0.01, cutoff=32, twist=1.0, radius=0.4, margin=0.2, extra=()):
    '''Twist a plus the on-site potential epsilon cos(zeta_1), d=2, beta=2.'''
    freq = Frequency(alpha=DESK_ALPHA, omega=1.0, tau=2.0, kmax=2 * cutoff)
    interactions = [Interaction.spring(2, twist)]
    if epsilon:
        interactions.append(
            Interaction.from_terms(2, 0, [cosine_term(2, 0, epsilon, [(1, 0)])])
        )
    interactions.extend(extra)
    return Model(
        interactions=tuple(interactions),
        freq=freq.with_estimated_constants(),
        gevrey=GevreyParams(beta=2.0, radius=radius, margin=margin),
    )


def long_range_term(mu=1e-5, bound=None):
    '''mu cos(e_1.zeta_0) cos(e_1.zeta_2): a rank-one span-2 interaction.'''
    cos_e1 = {(1, 0): 0.5, (-1, 0): 0.5}
    return Interaction.from_terms(
        2, 2, [product_term(2, 2, mu, [(0, cos_e1), (2, cos_e1)])], bound=bound
    )


def small_hull(rng, cutoff, size=0.02, decay=2.0):
    '''Random real zero-average hull with l1 norm `size`.'''
    h = random_hermitian(2, cutoff, rng, decay=decay, zero_mean=True)
    return h * (size / h.l1())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def twist_model():
    return desk_model(epsilon=0.0, cutoff=8)


@pytest.fixture
def small_desk():
    return desk_model(epsilon=1e-3, cutoff=12)


@pytest.fixture
def desk():
    return desk_model()


@pytest.fixture
def schedule():
    return StepSchedule(r0=0.4)


@pytest.fixture
def desk_config():
    '''Decoded JSON run configuration of the desk model at a small cutoff.'''
    return {
        'frequency': {'alpha': list(DESK_ALPHA), 'omega': 1.0, 'tau': 2.0},
        'gevrey': {'beta': 2.0, 'radius': 0.4, 'margin': 0.2},
        'truncation': {'cutoff': 8},
        'model': {'interactions': [
            {'span': 1, 'twist': 1.0},
            {'span': 0, 'terms': [{'kind': 'cosine', 'amplitude': 0.01, 'wave': [[1, 0]]}]},
        ]},
        'run': {'reseed_trials': 0, 'phis': [0.3]},
    }


@pytest.fixture
def zero_hull():
    return FourierSeries.zeros(2, 8)
