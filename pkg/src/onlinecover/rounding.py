"""Online randomized rounding of the fractional schedule (general l_p).

Every machine has a *blue* copy, opened by a coupled coin so that after each
job ``P[blue open] = min(alpha * x_i, 1)``, and a *red* copy used as a
greedy fallback. Each job goes to

1. a blue copy in ``M1 = {i : x_i >= 1/alpha}`` with probability
   proportional to ``y_ij``, when ``M1`` carries at least half of the job;
2. otherwise an open blue copy in ``M0`` with probability proportional to
   ``z_ij = 4 y_ij / (alpha x_i)``, when those ``z`` sum to at least 1;
3. otherwise the red copy minimising ``(Lhat_i + p_ij)^p - Lhat_i^p``.

Randomness: one ``random.Random(seed)`` stream (Mersenne Twister) per run.
Opening draws come first, one ``random()`` per closed machine in ascending
index order whose opening probability lies strictly between 0 and 1; then
at most one ``random()`` for the case-1/case-2 choice.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantBreach
from .model import ScaledInstance, lp_norm

BLUE, RED = "blue", "red"


def default_alpha(m: int, n: int) -> float:
    """``48 ln(mn)``; zero (degenerate, nothing opens) when ``m = n = 1``."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return 48.0 * math.log(m * n)


@dataclass(frozen=True)
class Decision:
    job: int
    machine: int
    color: str
    case: int

    def to_json(self) -> dict:
        return {"job": self.job, "machine": self.machine, "color": self.color, "case": self.case}


@dataclass
class RoundingState:
    """Integral state of one rounding run (costs and loads in scaled units)."""

    costs: list
    proc: list
    norm_p: float
    alpha: float
    rng_seed: int
    blue_open: list = None
    red_open: list = None
    blue_load: list = None
    red_load: list = None
    x_snapshot: list = None
    assignment: list = field(default_factory=list)
    blue_cost: float = 0.0
    red_cost: float = 0.0
    case_counts: dict = field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    rng: random.Random = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha} (mn = 1 is degenerate)")
        m = len(self.costs)
        self.blue_open = [False] * m if self.blue_open is None else self.blue_open
        self.red_open = [False] * m if self.red_open is None else self.red_open
        self.blue_load = [0.0] * m if self.blue_load is None else self.blue_load
        self.red_load = [0.0] * m if self.red_load is None else self.red_load
        self.x_snapshot = [0.0] * m if self.x_snapshot is None else self.x_snapshot
        if self.rng is None:
            self.rng = random.Random(self.rng_seed)

    @classmethod
    def for_instance(cls, scaled: ScaledInstance, alpha: float, seed: int) -> "RoundingState":
        return cls(
            [float(c) for c in scaled.scaled_costs],
            [[float(v) for v in row] for row in scaled.scaled_proc],
            float(scaled.norm_p),
            float(alpha),
            int(seed),
        )

    @property
    def m(self) -> int:
        return len(self.costs)

    @property
    def total_cost(self) -> float:
        return self.blue_cost + self.red_cost

    def ledger_cost(self) -> tuple[float, float]:
        """Blue and red cost recomputed from the open flags."""
        b = math.fsum(c for c, o in zip(self.costs, self.blue_open) if o)
        r = math.fsum(c for c, o in zip(self.costs, self.red_open) if o)
        return b, r


def open_blue_step(state: RoundingState, x_prev, x_new, rng: random.Random | None = None) -> list[int]:
    """Open closed blue copies with the conditional probability
    ``min(alpha (x_new - x_prev) / (1 - alpha x_prev), 1)``; returns the
    newly opened machines."""
    rng = state.rng if rng is None else rng
    a = state.alpha
    opened = []
    for i in range(state.m):
        xp, xn = float(x_prev[i]), float(x_new[i])
        if xn < xp:
            raise ValueError(f"x[{i}] decreased from {xp} to {xn}")
        if state.blue_open[i]:
            continue
        if a * xp >= 1.0:
            raise InvariantBreach(f"machine {i} closed although alpha * x = {a * xp} >= 1")
        if a * xn >= 1.0:
            prob = 1.0
        else:
            prob = min(a * (xn - xp) / (1.0 - a * xp), 1.0)
        if prob >= 1.0 or (prob > 0.0 and rng.random() < prob):
            state.blue_open[i] = True
            state.blue_cost += state.costs[i]
            opened.append(i)
    state.x_snapshot = [float(v) for v in x_new]
    return opened


def z_values(frac_y_row, x_now, alpha: float) -> np.ndarray:
    """``4 y / (alpha x)`` on machines with ``x < 1/alpha``; ``nan`` elsewhere."""
    y = np.asarray(frac_y_row, dtype=float)
    x = np.asarray(x_now, dtype=float)
    z = np.full(y.shape, np.nan)
    low = alpha * x < 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        z[low] = np.where(y[low] > 0, 4.0 * y[low] / (alpha * x[low]), 0.0)
    return z


def _weighted_pick(rng: random.Random, items: list[int], weights: list[float]) -> int:
    total = math.fsum(weights)
    u = rng.random() * total
    acc = 0.0
    last = None
    for i, w in zip(items, weights):
        if w <= 0:
            continue
        last = i
        acc += w
        if u < acc:
            return i
    return last  # float residue at the top end


def red_choice(red_load, p_row, p: float) -> int:
    """Greedy red copy: smallest ``(L + p_ij)^p - L^p``, lowest index on ties."""
    best, best_inc = -1, math.inf
    for i, (L, pij) in enumerate(zip(red_load, p_row)):
        if not math.isfinite(pij):
            continue
        inc = pij if p == 1.0 else (L + pij) ** p - L**p
        if inc < best_inc:
            best, best_inc = i, inc
    return best


def _assign(state: RoundingState, j: int, i: int, color: str, case: int) -> Decision:
    pij = state.proc[j][i]
    if color == BLUE:
        if not state.blue_open[i]:
            raise InvariantBreach(f"job {j} sent to closed blue copy {i}")
        state.blue_load[i] += pij
    else:
        if not state.red_open[i]:
            state.red_open[i] = True
            state.red_cost += state.costs[i]
        state.red_load[i] += pij
    state.case_counts[case] += 1
    dec = Decision(j, i, color, case)
    state.assignment.append(dec)
    return dec


def assign_job_integer(state: RoundingState, x_now, y_row, job: int, rng: random.Random | None = None) -> Decision:
    """Integral assignment of ``job`` after its fractional assignment and
    the matching blue openings."""
    rng = state.rng if rng is None else rng
    a = state.alpha
    x = [float(v) for v in x_now]
    y = [float(v) for v in y_row]
    m1 = [i for i in range(state.m) if a * x[i] >= 1.0]
    mass1 = math.fsum(y[i] for i in m1)
    if mass1 >= 0.5:
        for i in m1:
            if not state.blue_open[i]:
                raise InvariantBreach(f"machine {i} has alpha x >= 1 but a closed blue copy")
        i = _weighted_pick(rng, m1, [y[i] for i in m1])
        return _assign(state, job, i, BLUE, 1)
    open0 = [i for i in range(state.m) if a * x[i] < 1.0 and state.blue_open[i]]
    z = [4.0 * y[i] / (a * x[i]) for i in open0]
    if math.fsum(z) >= 1.0:
        i = _weighted_pick(rng, open0, z)
        return _assign(state, job, i, BLUE, 2)
    i = red_choice(state.red_load, state.proc[job], state.norm_p)
    return _assign(state, job, i, RED, 3)


def run_rounding(scaled: ScaledInstance, trajectory, alpha: float, seed: int) -> RoundingState:
    """Replay a fractional trajectory through the l_p rounding."""
    state = RoundingState.for_instance(scaled, alpha, seed)
    prev = [0.0] * state.m
    open_blue_step(state, prev, trajectory.initial_x)
    prev = trajectory.initial_x
    for j, (x_after, y_row) in enumerate(zip(trajectory.x_after, trajectory.y_rows)):
        open_blue_step(state, prev, x_after)
        assign_job_integer(state, x_after, y_row, j)
        prev = x_after
    return state


def rounding_report(state: RoundingState, frac_report: dict | None = None, opt: dict | None = None) -> dict:
    """Cost split, blue/red l_p norms, case counts and ratios.

    ``opt`` may carry ``cost`` and ``lp_norm`` of a reference schedule in
    scaled units.
    """
    b, r = state.ledger_cost()
    if not (math.isclose(b, state.blue_cost, rel_tol=1e-12, abs_tol=1e-12)
            and math.isclose(r, state.red_cost, rel_tol=1e-12, abs_tol=1e-12)):
        raise InvariantBreach("cost ledger disagrees with the open flags")
    p = state.norm_p
    out = {
        "alpha": state.alpha,
        "seed": state.rng_seed,
        "blue_cost": b,
        "red_cost": r,
        "total_cost": b + r,
        "blue_norm": lp_norm(state.blue_load, p),
        "red_norm": lp_norm(state.red_load, p),
        "case1": state.case_counts[1],
        "case2": state.case_counts[2],
        "case3": state.case_counts[3],
        "assignment": [d.to_json() for d in state.assignment],
    }
    loads = [bl + rl for bl, rl in zip(state.blue_load, state.red_load)]
    out["norm"] = lp_norm(loads, p)
    if frac_report is not None:
        phi = frac_report["potential"]
        out["potential"] = phi
        out["cost_bound"] = (state.alpha + 1.0) * phi
        out["cost_over_phi"] = (b + r) / phi if phi else 0.0
        out["blue_pp_over_phi"] = sum(v**p for v in state.blue_load) / phi if phi else 0.0
    if opt is not None:
        out["cost_over_opt"] = (b + r) / opt["cost"] if opt["cost"] else math.inf
        out["norm_over_opt"] = out["norm"] / opt["lp_norm"] if opt["lp_norm"] else math.inf
    return out


def assignment_json(state: RoundingState) -> str:
    return json.dumps([d.to_json() for d in state.assignment])
