"""Ground truth for small instances: exhaustive Pareto frontier of
(cost, l_p norm), the cost-oblivious greedy for l_p load balancing, and a
seeded Monte Carlo driver.

Brute force enumerates assignments as base-m numbers with job 0 as the most
significant digit, in ascending order; ties keep the first assignment met.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import TooLarge
from .model import Instance

ENUM_CAP = 10**7
_CHUNK = 1 << 16


@dataclass(frozen=True)
class ParetoPoint:
    cost: float
    lp_norm: float
    assignment: tuple

    def to_json(self) -> dict:
        return {"cost": self.cost, "lp_norm": self.lp_norm, "assignment": list(self.assignment)}


def _decode(index: int, n: int, m: int) -> tuple:
    digits = []
    for _ in range(n):
        index, d = divmod(index, m)
        digits.append(d)
    return tuple(reversed(digits))


def brute_force_opt(instance: Instance, cap: int = ENUM_CAP) -> list[ParetoPoint]:
    """Every non-dominated (cost, l_p norm) pair over all ``m^n`` schedules,
    sorted by increasing cost."""
    m, n, p = instance.m, instance.n, instance.norm_p
    if n == 0:
        return [ParetoPoint(0.0, 0.0, ())]
    total = m**n
    if total > cap:
        raise TooLarge(f"m^n = {total} exceeds enumeration cap {cap}")
    proc = instance.proc_times
    costs = instance.machine_costs
    mask_cost = np.array([costs[[i for i in range(m) if k >> i & 1]].sum() for k in range(1 << m)])
    weights = m ** np.arange(n - 1, -1, -1)
    best_norm = np.full(1 << m, np.inf)
    best_idx = np.full(1 << m, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // weights[None, :]) % m  # (k, n)
        loads = np.zeros((idx.size, m))
        rows = np.arange(idx.size)
        mask = np.zeros(idx.size, dtype=np.int64)
        for j in range(n):
            loads[rows, digits[:, j]] += proc[j, digits[:, j]]
            mask |= np.left_shift(1, digits[:, j])
        with np.errstate(invalid="ignore"):
            norms = (loads**p).sum(axis=1) ** (1.0 / p)
        norms[~np.isfinite(norms)] = np.inf
        # best per mask inside the chunk (first occurrence wins ties)
        order = np.lexsort((idx, norms, mask))
        ms, first = np.unique(mask[order], return_index=True)
        cand = order[first]
        better = norms[cand] < best_norm[ms]
        best_norm[ms[better]] = norms[cand][better]
        best_idx[ms[better]] = idx[cand][better]
    pts = [
        (float(mask_cost[k]), float(best_norm[k]), int(best_idx[k]))
        for k in range(1 << m)
        if best_idx[k] >= 0 and math.isfinite(best_norm[k])
    ]
    pts.sort(key=lambda t: (t[0], t[1], t[2]))
    frontier: list[ParetoPoint] = []
    for cost, norm, k in pts:
        if frontier and (norm >= frontier[-1].lp_norm):
            continue
        if frontier and cost == frontier[-1].cost:
            continue
        frontier.append(ParetoPoint(cost, norm, _decode(k, n, m)))
    return frontier


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.cost <= b.cost and a.lp_norm <= b.lp_norm and (a.cost < b.cost or a.lp_norm < b.lp_norm)


def schedule_value(instance: Instance, assignment) -> tuple[float, float]:
    """(cost, l_p norm) of an integral schedule."""
    loads = np.zeros(instance.m)
    for j, i in enumerate(assignment):
        loads[i] += instance.proc_times[j, i]
    used = sorted(set(int(i) for i in assignment))
    return float(instance.machine_costs[used].sum()), float((loads**instance.norm_p).sum() ** (1.0 / instance.norm_p))


@dataclass
class GreedyResult:
    assignment: list
    loads: np.ndarray
    lp_norm: float
    cost: float | None


def greedy_increment(loads: np.ndarray, p_row: np.ndarray, p: float) -> int:
    """Machine minimising ``(L_i + p_ij)^p - L_i^p`` (lowest index on ties)."""
    if p == 1.0:
        inc = np.asarray(p_row, dtype=float)  # exact; (L + p) - L can round up
    else:
        with np.errstate(invalid="ignore"):
            inc = (loads + p_row) ** p - loads**p
    inc = np.where(np.isfinite(p_row), inc, np.inf)
    return int(np.argmin(inc))


def greedy_lp_norm(instance: Instance, ignore_costs: bool = True) -> GreedyResult:
    """Assign jobs in arrival order to the machine with the smallest increase
    of the p-th power load; startup costs are not consulted."""
    p = instance.norm_p
    loads = np.zeros(instance.m)
    assignment = []
    for j in range(instance.n):
        i = greedy_increment(loads, instance.proc_times[j], p)
        loads[i] += instance.proc_times[j, i]
        assignment.append(i)
    cost = None if ignore_costs else float(instance.machine_costs[sorted(set(assignment))].sum())
    return GreedyResult(assignment, loads, float((loads**p).sum() ** (1.0 / p)), cost)


@dataclass
class MonteCarloResult:
    mean: float
    stderr: float
    values: list

    @property
    def trials(self) -> int:
        return len(self.values)


def summarize(values) -> MonteCarloResult:
    """Sample mean and standard error (``ddof = 1``) of per-trial values."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("need at least one value")
    k = len(values)
    mean = math.fsum(values) / k
    stderr = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (k - 1) / k) if k > 1 else 0.0
    return MonteCarloResult(mean, stderr, values)


def monte_carlo(run: Callable[[int], float], trials: int, base_seed: int = 0) -> MonteCarloResult:
    """Call ``run(base_seed + t)`` for ``t < trials``; mean and standard error."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return summarize([run(base_seed + t) for t in range(trials)])


def frontier_json(points: list[ParetoPoint]) -> str:
    return json.dumps([pt.to_json() for pt in points], indent=1)
