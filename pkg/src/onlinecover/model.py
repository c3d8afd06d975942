"""Scheduling instances, the offline scaling transform and the LP objective.

Processing times live in an ``n x m`` matrix (row = job, column = machine).
An unschedulable pair is stored as ``inf``; it is skipped by every sum and
never offered to an online algorithm.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AllMachinesDiscarded, ConstraintViolation, InvalidInstance, NormOutOfRange

REL_TOL = 1e-9
ABS_TOL = 1e-12


def leq(a: float, b: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    """``a <= b`` up to the package-wide floating tolerance."""
    return a <= b + max(abs_, rel * abs(b))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _proc_matrix(rows) -> np.ndarray:
    return np.array([[math.inf if v is None else float(v) for v in row] for row in rows], dtype=float).reshape(
        len(rows), -1 if rows else 0
    )


@dataclass(frozen=True)
class Instance:
    """Machines with startup costs, jobs with per-machine processing times and
    the guarantee pair (C, L): some schedule has cost <= C and l_p norm <= L.

    ``allow_large_p`` lifts the ``p <= log2 m`` cap (beyond it every l_p norm
    is within a constant of the makespan) so that small test instances can
    still use p = 2, 3.
    """

    machine_costs: np.ndarray
    proc_times: np.ndarray
    norm_p: float
    guarantee_cost: float
    guarantee_load: float
    allow_large_p: bool = False
    guarantee_source: str = "given"

    def __post_init__(self):
        costs = _frozen(self.machine_costs)
        proc = self.proc_times
        if not isinstance(proc, np.ndarray):
            proc = _proc_matrix(proc) if len(proc) else np.zeros((0, costs.size))
        proc = _frozen(proc)
        object.__setattr__(self, "machine_costs", costs)
        object.__setattr__(self, "proc_times", proc)
        m = costs.size
        if costs.ndim != 1 or m == 0:
            raise InvalidInstance("need at least one machine")
        if np.any(costs < 0) or not np.all(np.isfinite(costs)):
            raise InvalidInstance("machine costs must be finite and non-negative")
        if proc.ndim != 2 or proc.shape[1] != m:
            raise InvalidInstance(f"proc_times must be n x {m}, got shape {proc.shape}")
        if np.any(proc < 0) or np.any(np.isnan(proc)):
            raise InvalidInstance("processing times must be non-negative")
        if proc.shape[0] and not np.all(np.isfinite(proc).any(axis=1)):
            bad = np.flatnonzero(~np.isfinite(proc).any(axis=1))
            raise InvalidInstance(f"jobs {bad.tolist()} cannot run on any machine")
        p = float(self.norm_p)
        if not p >= 1:
            raise NormOutOfRange(f"norm exponent must be >= 1, got {p}")
        cap = max(1.0, math.log2(m))
        if p > cap and not self.allow_large_p:
            raise NormOutOfRange(
                f"p={p} exceeds log2(m)={math.log2(m):.3f}; l_p is equivalent to l_inf there "
                "(pass allow_large_p=True to run anyway)"
            )
        if not (self.guarantee_cost > 0 and self.guarantee_load > 0):
            raise InvalidInstance("guarantee pair (C, L) must be positive")

    @property
    def m(self) -> int:
        return self.machine_costs.size

    @property
    def n(self) -> int:
        return self.proc_times.shape[0]

    def with_guarantee(self, cost: float, load: float, source: str) -> "Instance":
        return Instance(self.machine_costs, self.proc_times, self.norm_p, cost, load, self.allow_large_p, source)

    def to_json(self) -> dict:
        proc = [[None if math.isinf(v) else v for v in row] for row in self.proc_times.tolist()]
        d = {
            "costs": self.machine_costs.tolist(),
            "proc": proc,
            "p": self.norm_p,
            "C": self.guarantee_cost,
            "L": self.guarantee_load,
            "n": self.n,
        }
        if self.allow_large_p:
            d["allow_large_p"] = True
        if self.guarantee_source != "given":
            d["guarantee_source"] = self.guarantee_source
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Instance":
        proc = d["proc"]
        if "n" in d and d["n"] != len(proc):
            raise InvalidInstance(f"declared n={d['n']} but {len(proc)} job rows present")
        m = len(d["costs"])
        matrix = _proc_matrix(proc) if proc else np.zeros((0, m))
        return cls(
            np.asarray(d["costs"], dtype=float),
            matrix,
            float(d["p"]),
            float(d["C"]),
            float(d["L"]),
            bool(d.get("allow_large_p", False)),
            d.get("guarantee_source", "given"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def beta_for(m: int, p: float) -> float:
    """Target l_p^p budget ``m ln m / (40 p)^p`` used to scale processing times."""
    return m * math.log(m) / (40.0 * p) ** p


@dataclass(frozen=True)
class ScaledInstance:
    """Output of :func:`preprocess`: the instance the online algorithms see."""

    kept_machines: tuple
    scaled_costs: np.ndarray
    scaled_proc: np.ndarray
    beta_scale: float
    initial_x: np.ndarray
    norm_p: float
    unclamped_costs: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("scaled_costs", "scaled_proc", "initial_x"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.unclamped_costs is None:
            object.__setattr__(self, "unclamped_costs", self.scaled_costs)
        else:
            object.__setattr__(self, "unclamped_costs", _frozen(self.unclamped_costs))

    @property
    def m(self) -> int:
        return self.scaled_costs.size

    @property
    def n(self) -> int:
        return self.scaled_proc.shape[0]

    @classmethod
    def direct(cls, costs, proc, p: float) -> "ScaledInstance":
        """Build an already-scaled instance (costs in [1, m], proc as given).

        Used for hand-made examples where the offline scaling would obscure
        the numbers.
        """
        costs = np.asarray(costs, dtype=float)
        m = costs.size
        if np.any(costs < 1) or np.any(costs > max(m, 1) + ABS_TOL):
            raise InvalidInstance(f"scaled costs must lie in [1, {m}]")
        proc = _proc_matrix(proc) if not isinstance(proc, np.ndarray) else proc.astype(float)
        x0 = np.where(costs == 1.0, 1.0, 1.0 / m)
        return cls(tuple(range(m)), costs, proc, beta_for(m, p), x0, float(p))

    def reference_cost(self, assignment) -> tuple[float, float]:
        """Cost of an integral schedule (kept-machine indices) before and after
        the clamp of small costs to 1."""
        used = sorted(set(int(i) for i in assignment))
        return float(self.unclamped_costs[used].sum()), float(self.scaled_costs[used].sum())


def preprocess(instance: Instance) -> ScaledInstance:
    """Drop machines costlier than C, normalise costs so OPT costs m', clamp
    costs below 1, initialise x and scale loads by ``beta^(1/p) / L``."""
    C, L, p = instance.guarantee_cost, instance.guarantee_load, instance.norm_p
    kept = np.flatnonzero(instance.machine_costs <= C)
    if kept.size == 0:
        raise AllMachinesDiscarded(f"every machine costs more than C={C}")
    mk = kept.size
    raw = instance.machine_costs[kept] * (mk / C)
    costs = np.maximum(raw, 1.0)
    x0 = np.where(costs == 1.0, 1.0, 1.0 / mk)
    beta = beta_for(mk, p)
    proc = instance.proc_times[:, kept] * (beta ** (1.0 / p) / L)
    # 0 * inf would be nan when beta == 0 (single machine)
    proc = np.where(np.isinf(instance.proc_times[:, kept]), math.inf, proc)
    return ScaledInstance(tuple(int(i) for i in kept), costs, proc, beta, x0, p, raw)


def _finite(p):
    return np.where(np.isfinite(p), p, 0.0)


def lp_objective(x, y, scaled: ScaledInstance, fraction_cap: float = 1.0) -> float:
    """Fractional LP objective
    ``sum_i (sum_j p_ij y_ij / x_i)^p x_i + sum_ij y_ij p_ij^p``.

    ``fraction_cap`` relaxes the ``y_ij <= x_i`` check to ``y_ij <= cap * x_i``;
    the online fractional algorithm maintains the cap 2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1, x.size)
    p = scaled.norm_p
    proc = scaled.scaled_proc
    over = y - fraction_cap * x[None, :]
    bad = over > np.maximum(ABS_TOL, REL_TOL * x[None, :])
    if np.any(bad):
        j, i = np.argwhere(bad)[0]
        raise ConstraintViolation(f"y[{j}][{i}]={y[j, i]} exceeds {fraction_cap} * x[{i}]={x[i]}")
    if np.any((y > 0) & np.isinf(proc)):
        raise ConstraintViolation("positive assignment on an unschedulable pair")
    pf = _finite(proc)
    load = (pf * y).sum(axis=0)
    first = np.zeros_like(x)
    pos = x > 0
    first[pos] = (load[pos] / x[pos]) ** p * x[pos]
    second = (y * pf**p).sum()
    return float(first.sum() + second)


@dataclass(frozen=True)
class Violation:
    kind: str  # "cost" | "fraction" | "covering" | "range"
    index: tuple
    amount: float


def validate_feasibility(x, y, scaled: ScaledInstance, cost_budget: float) -> list[Violation]:
    """List every violated LP constraint; an empty list means feasible."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1, x.size)
    out: list[Violation] = []
    cost = float(scaled.scaled_costs @ x)
    if not leq(cost, cost_budget):
        out.append(Violation("cost", (), cost - cost_budget))
    n, m = y.shape
    for j in range(n):
        for i in range(m):
            if not leq(y[j, i], x[i]):
                out.append(Violation("fraction", (i, j), float(y[j, i] - x[i])))
    cover = y.sum(axis=1)
    for j in range(n):
        if not leq(1.0, cover[j]):
            out.append(Violation("covering", (j,), float(1.0 - cover[j])))
    for i in range(m):
        if not (leq(0.0, x[i]) and leq(x[i], 1.0)):
            out.append(Violation("range", ("x", i), float(x[i])))
    for j in range(n):
        for i in range(m):
            if not (leq(0.0, y[j, i]) and leq(y[j, i], 1.0)):
                out.append(Violation("range", ("y", i, j), float(y[j, i])))
    return out


def lp_norm(loads, p: float) -> float:
    loads = np.asarray(loads, dtype=float)
    return float((loads**p).sum() ** (1.0 / p))
