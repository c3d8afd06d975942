import math

import numpy as np
import pytest

from onlinecover.harness import InstanceSpec, generate_instance
from onlinecover.model import ScaledInstance


def certified_suite(count=200, seed0=0, cap=200_000):
    """Seeded random instances (m <= 6, n <= 10, p in {1, 2, 3}) stamped
    with a brute-force frontier point."""
    out = []
    rng = np.random.default_rng(seed0)
    for k in range(count):
        m = int(rng.integers(2, 7))
        n = int(rng.integers(1, 11))
        while m**n > cap:
            n -= 1
        p = float([1, 2, 3][k % 3])
        spec = InstanceSpec(m=m, n=n, p=p, cost_dist="loguniform:0.5:8", proc_dist="uniform:0.2:4",
                            allow_large_p=True, enum_cap=cap)
        out.append(generate_instance(spec, seed0 * 100_003 + k))
    return out


@pytest.fixture(scope="session")
def suite():
    return certified_suite()


def binomial_sigma(prob, trials):
    return math.sqrt(max(prob * (1 - prob), 0.0) / trials)


def opening_instance():
    """3 jobs on 5 machines; loads chosen so that alpha x stays near 1 at alpha = 4."""
    P = np.array([[1, 2, 3, 2, 1], [2, 1, 1, 3, 2], [3, 3, 1, 1, 2]]) * 0.1
    return ScaledInstance.direct([2, 2.5, 3, 4, 5], P, 2)


def cost_family():
    """Fixed pre-scaled instances for expected-cost checks."""
    rng = np.random.default_rng(2024)
    out = [("opening-3x5", opening_instance())]
    for k in range(6):
        m = int(rng.integers(5, 10))
        n = int(rng.integers(3, 9))
        p = float([1, 2, 3][k % 3])
        costs = rng.uniform(1, m, m)
        P = rng.uniform(0.05, 1.0, (n, m)) * float(rng.choice([0.2, 1.0, 3.0]))
        out.append((f"rand{k}-p{p:g}", ScaledInstance.direct(costs, P, p)))
    return out
