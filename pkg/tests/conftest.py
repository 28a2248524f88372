import numpy as np
import pytest

from hiergc.placement import (
    Placement,
    RandomnessPlan,
    SystemParams,
    compute_replication,
    default_eval_plan,
)

Q = 2147483647


def one_based(gamma):
    return [[{k - 1 for k in ws} for ws in cl] for cl in gamma]


GAMMA_III_B = [
    [{1, 3, 7, 9}, {1, 3, 4, 6}, {4, 6, 7, 9}],
    [{1, 2, 7, 8}, {1, 2, 4, 5}, {4, 5, 7, 8}],
    [{2, 3, 8, 9}, {2, 3, 5, 6}, {5, 6, 8, 9}],
]
GAMMA_IV_B = [[{1, 3}, {1}, {3}], [{1, 4}, {1}, {4}], [{2, 3}, {2}, {3}], [{2, 4}, {2}, {4}]]
GAMMA_PRIME_IV_B = [
    [{2, 3}, {1, 2, 3}, {1, 3}],
    [{1, 2}, {1, 2}, {2}],
    [{1, 3}, {1, 3}, {3}],
    [{2, 3}, {2, 3}, {3}],
]


class Example:
    def __init__(self, params, placement, rand_plan=None):
        self.params = params
        self.placement = placement
        self.rand_plan = rand_plan
        self.r1, self.r2 = compute_replication(placement)
        self.plan = default_eval_plan(params, self.r1, self.r2)

    def gradients(self, seed=0):
        rng = np.random.default_rng(seed)
        return rng.integers(0, self.params.q, size=(self.placement.K, self.params.d), dtype=np.int64)


def make_iii_b(d=8):
    return Example(SystemParams(3, 3, s2=1, d=d), Placement(9, one_based(GAMMA_III_B)))


def make_iv_b(d=6):
    return Example(
        SystemParams(4, 3, s1=1, s2=1, d=d, mode="private"),
        Placement(4, one_based(GAMMA_IV_B)),
        RandomnessPlan(3, one_based(GAMMA_PRIME_IV_B)),
    )


@pytest.fixture
def iii_b():
    return make_iii_b()


@pytest.fixture
def iv_b():
    return make_iv_b()
