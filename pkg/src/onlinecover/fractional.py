"""Online fractional assignment for scheduling with startup costs.

Each arriving job is spread over machines in multiplicative steps. A step
orders machines by the preference ``psi``, takes the shortest prefix whose
opening fractions reach 1, grows ``x_i`` of its partially open members by
``x_i / (c_i N)`` and assigns ``min(x_i / (psi_ij N), 2 x_i - y_ij)`` of the
job to each member. Steps that would push some ``x_i`` past 1 or finish the
job are cut short ("small steps") so the limiting quantity lands exactly.

Machines are *partially open* while ``x_i < 1`` and *fully open* once
``x_i = 1``. Job mass received while partially open (the J0 phase) is kept
apart from mass received while fully open (J1); the proxy load
``c_i^(1/p) x_i + sum_J1 y_ij p_ij`` drives both ``psi`` and the potential.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantBreach, NonTermination, PrefixUndefined, StallDetected
from .model import ScaledInstance, leq, lp_objective

JOB_DONE_TOL = 1e-12
STEP_TOL = 1e-9


def step_denominator(n: int, m: int) -> float:
    """``N = n m ln m``, floored at 2 (the per-step potential bound needs N >= 2)."""
    return max(n * m * math.log(m) if m > 1 else 0.0, 2.0)


@dataclass
class StepRecord:
    index: int
    job: int
    small: bool
    prefix: tuple
    phi_before: float
    phi_after: float
    category: int | None = None


@dataclass(frozen=True)
class PotentialBreakdown:
    per_machine: np.ndarray
    total: float
    cost_phase: float
    load_phase_proxy: float
    load_phase_pp: float


@dataclass
class FractionalTrajectory:
    """Per-job snapshots a rounding scheme needs: ``x`` after each job and the
    job's final ``y`` row."""

    initial_x: list
    x_after: list = field(default_factory=list)
    y_rows: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"initial_x": self.initial_x, "x_after": self.x_after, "y_rows": self.y_rows}

    @classmethod
    def from_json(cls, d: dict) -> "FractionalTrajectory":
        return cls(list(d["initial_x"]), [list(r) for r in d["x_after"]], [list(r) for r in d["y_rows"]])


class FractionalState:
    """Monotone fractional solution plus the phase bookkeeping of the
    potential argument.

    ``descending=True`` sorts by non-increasing ``psi`` instead of the default
    non-decreasing order (kept only for side-by-side comparison).
    ``check`` turns every per-step inequality into a runtime assertion.
    """

    def __init__(self, scaled: ScaledInstance, *, descending: bool = False, check: bool = True,
                 log_steps: bool = False, max_steps: int = 10_000_000, N: float | None = None):
        self.scaled = scaled
        self.m, self.n = scaled.m, scaled.n
        self.p = float(scaled.norm_p)
        self.c = [float(v) for v in scaled.scaled_costs]
        self.c_root = [v ** (1.0 / self.p) for v in self.c]
        self.c_pow = [v ** ((self.p - 1.0) / self.p) for v in self.c]
        self.proc = [[float(v) for v in row] for row in scaled.scaled_proc]
        self.x = [float(v) for v in scaled.initial_x]
        self.y = [[0.0] * self.m for _ in range(self.n)]
        self.j0_load = [0.0] * self.m
        self.j0_pp = [0.0] * self.m
        self.j1_load = [0.0] * self.m
        self.j1_pp = [0.0] * self.m
        self.N = float(N) if N is not None else step_denominator(self.n, self.m)
        self.descending = descending
        self.check = check
        self.max_steps = max_steps
        self.small_steps = 0
        self.regular_steps = 0
        self.category_counts = {1: 0, 2: 0, 3: 0}
        self.max_regular_increase = 0.0
        self.step_log: list[StepRecord] | None = [] if log_steps else None
        self.assigned: list[int] = []
        self.trajectory = FractionalTrajectory(list(self.x))
        self._phi = [self._phi_i(i) for i in range(self.m)]

    # -- quantities ---------------------------------------------------------

    def proxy_load(self, i: int) -> float:
        return self.c_root[i] * self.x[i] + self.j1_load[i]

    def psi(self, i: int, j: int) -> float:
        pij = self.proc[j][i]
        if pij == 0.0:
            return 0.0
        if self.x[i] < 1.0:
            return max(self.c_pow[i] * pij, pij**self.p)
        if self.p == 1.0:
            return pij
        L = self.proxy_load(i)
        return (L + pij) ** self.p - L**self.p

    def _phi_i(self, i: int) -> float:
        if self.x[i] < 1.0:
            return self.c[i] * self.x[i]
        return self.proxy_load(i) ** self.p + self.j1_pp[i]

    @property
    def phi(self) -> float:
        return math.fsum(self._phi)

    @property
    def x_array(self) -> np.ndarray:
        return np.array(self.x)

    @property
    def y_matrix(self) -> np.ndarray:
        return np.array(self.y).reshape(self.n, self.m)

    def phase_load_j0(self, i: int) -> tuple[float, float]:
        return self.j0_load[i], self.j0_pp[i]

    # -- the online step ----------------------------------------------------

    def _prefix(self, j: int, elig: list[int], psis: dict) -> list[int]:
        if self.descending:
            order = sorted(elig, key=lambda i: (-psis[i], i))
        else:
            order = sorted(elig, key=lambda i: (psis[i], i))
        prefix, acc = [], 0.0
        for i in order:
            prefix.append(i)
            acc += self.x[i]
            if acc >= 1.0:
                break
        return prefix

    def assign_job(self, j: int, opt_machine: int | None = None) -> list[StepRecord]:
        """Fractionally assign job ``j`` until its row sums to 1.

        ``opt_machine`` (the machine a reference schedule uses for ``j``)
        enables tagging regular steps with the three analysis categories.
        """
        row = self.proc[j]
        yj = self.y[j]
        if any(v != 0.0 for v in yj):
            raise ValueError(f"job {j} has already been assigned")
        if math.fsum(self.x) < 1.0 - STEP_TOL:
            raise PrefixUndefined("sum of x dropped below 1")
        elig = [i for i in range(self.m) if math.isfinite(row[i])]
        if not elig:
            raise ValueError(f"job {j} cannot run on any kept machine")
        p, N = self.p, self.N
        total = 0.0
        records: list[StepRecord] = []
        steps = 0
        while total < 1.0 - JOB_DONE_TOL:
            steps += 1
            if steps > self.max_steps:
                raise NonTermination(f"job {j}: more than {self.max_steps} steps")
            psis = {i: self.psi(i, j) for i in elig}
            prefix = self._prefix(j, elig, psis)
            partial = [i for i in prefix if self.x[i] < 1.0]
            x_rate = {i: self.x[i] / self.c[i] for i in partial}  # dx_i = s * x_rate
            s_open = {i: (1.0 - self.x[i]) / x_rate[i] for i in partial}
            s_lim = min([1.0 / N] + list(s_open.values()))
            remaining = 1.0 - total
            y_rate = {i: (self.x[i] / psis[i] if psis[i] > 0 else math.inf) for i in prefix}
            y_cap = {i: max(2.0 * self.x[i] - yj[i], 0.0) for i in prefix}

            dy = {}
            free = sum(y_cap[i] for i in prefix if math.isinf(y_rate[i]))
            if free >= remaining:
                # zero-psi members alone finish the job: no time passes
                s = 0.0
                left = remaining
                for i in prefix:
                    if math.isinf(y_rate[i]):
                        d = min(y_cap[i], left)
                        dy[i] = d
                        left -= d
                    else:
                        dy[i] = 0.0
                completes = True
            else:
                s, completes = self._solve_step(prefix, y_rate, y_cap, remaining, s_lim)
                for i in prefix:
                    dy[i] = y_cap[i] if math.isinf(y_rate[i]) else min(y_rate[i] * s, y_cap[i])
            opening = [i for i in partial if s > 0 and s_open[i] <= s * (1.0 + 1e-12)]
            small = completes or bool(opening)

            category = None
            if not small and opt_machine is not None:
                if self.x[opt_machine] >= 1.0:
                    category = 3
                elif opt_machine in prefix:
                    category = 1
                else:
                    category = 2

            phi_before = self.phi if self.step_log is not None else None
            old_phi = {i: self._phi[i] for i in prefix}
            x_progress = 0.0
            for i in prefix:
                d = dy[i]
                pij = row[i]
                if self.x[i] < 1.0:
                    dx = s * x_rate[i]
                    if self.check and d > 0:
                        # partially open coupling: load and p-th power load per unit of x
                        if not leq(d * pij, dx * self.c_root[i], 1e-9, 1e-15) or not leq(
                            d * pij**p, dx * self.c[i], 1e-9, 1e-15
                        ):
                            raise InvariantBreach(
                                f"job {j} machine {i}: dy={d} with dx={dx} breaks the partial-phase coupling"
                            )
                    self.j0_load[i] += d * pij
                    self.j0_pp[i] += d * pij**p
                    new_x = 1.0 if i in opening else min(self.x[i] + dx, 1.0)
                    x_progress = max(x_progress, new_x - self.x[i])
                    self.x[i] = new_x
                else:
                    self.j1_load[i] += d * pij
                    self.j1_pp[i] += d * pij**p
                yj[i] += d
                self._phi[i] = self._phi_i(i)
            gained = sum(dy.values())
            total += gained
            increase = sum(self._phi[i] - old_phi[i] for i in prefix)

            if gained < 1e-15 and x_progress < 1e-15:
                raise StallDetected(f"job {j}: step {steps} made no progress")
            if small:
                self.small_steps += 1
            else:
                self.regular_steps += 1
                self.max_regular_increase = max(self.max_regular_increase, increase * N)
                if category is not None:
                    self.category_counts[category] += 1
                if self.check and increase > 5.0 / N + 1e-9:
                    raise InvariantBreach(f"regular step raised the potential by {increase} > 5/N = {5.0 / N}")
            if self.check and increase < -1e-12:
                raise InvariantBreach(f"potential decreased by {-increase}")
            if self.step_log is not None:
                rec = StepRecord(len(self.step_log), j, small, tuple(prefix), phi_before, self.phi, category)
                self.step_log.append(rec)
                records.append(rec)

        # land exactly on 1 (the cut step leaves at most float residue)
        total = math.fsum(yj)
        if total != 1.0:
            for i in range(self.m):
                yj[i] /= total
        self.assigned.append(j)
        self.trajectory.x_after.append(list(self.x))
        self.trajectory.y_rows.append(list(yj))
        if self.check:
            self.check_invariants()
        return records

    def _solve_step(self, prefix, y_rate, y_cap, remaining, s_lim) -> tuple[float, bool]:
        """Largest step scale ``s <= s_lim`` whose job mass stays within
        ``remaining``; returns ``(s, job_completes)``.

        The job mass ``f(s) = sum_i min(rate_i s, cap_i)`` is piecewise linear
        and concave, so the crossing is found by walking its breakpoints.
        """
        base = sum(y_cap[i] for i in prefix if math.isinf(y_rate[i]))
        lin = [(y_cap[i] / y_rate[i], y_rate[i], y_cap[i]) for i in prefix if not math.isinf(y_rate[i]) and y_rate[i] > 0]

        def mass(s):
            return base + sum(min(r * s, cap) for _, r, cap in lin)

        if mass(s_lim) < remaining:
            return s_lim, False
        lin.sort()
        # slopes are re-summed per segment: rates can span 300 orders of
        # magnitude, so a running difference would cancel catastrophically
        for k, (t, _, _) in enumerate(lin):
            slope = math.fsum(r for _, r, _ in lin[k:])
            if base + slope * t >= remaining:
                return min((remaining - base) / slope, s_lim), True
            base += lin[k][2]
        raise InvariantBreach("job mass never reaches the remaining demand below s_lim")

    def run(self, opt_assignment=None) -> "FractionalState":
        for j in range(self.n):
            self.assign_job(j, None if opt_assignment is None else int(opt_assignment[j]))
        return self

    # -- invariants ---------------------------------------------------------

    def check_invariants(self, tol: float = 1e-9) -> None:
        for i in range(self.m):
            for j in self.assigned:
                if self.y[j][i] > 2.0 * self.x[i] + tol:
                    raise InvariantBreach(f"y[{j}][{i}]={self.y[j][i]} > 2 x[{i}]={2 * self.x[i]}")
            if not leq(self.j0_load[i], self.c_root[i] * self.x[i], tol, tol):
                raise InvariantBreach(f"machine {i}: J0 load {self.j0_load[i]} > c^(1/p) x")
            if not leq(self.j0_pp[i], self.c[i] * self.x[i], tol, tol):
                raise InvariantBreach(f"machine {i}: J0 p-th power load {self.j0_pp[i]} > c x")
        for j in self.assigned:
            if abs(math.fsum(self.y[j]) - 1.0) > tol:
                raise InvariantBreach(f"job {j} row sums to {math.fsum(self.y[j])}")
        if math.fsum(self.x) < 1.0 - tol:
            raise InvariantBreach("sum of x below 1")

    def dump(self) -> dict:
        return {"x": list(self.x), "y": [list(r) for r in self.y]}

    def dump_json(self) -> str:
        return json.dumps(self.dump())


def psi(machine_index: int, job_index: int, state: FractionalState) -> float:
    return state.psi(machine_index, job_index)


def assign_job_fractional(state: FractionalState, job_index: int, opt_machine: int | None = None) -> list[StepRecord]:
    return state.assign_job(job_index, opt_machine)


def potential(state: FractionalState) -> PotentialBreakdown:
    per = np.array([state._phi_i(i) for i in range(state.m)])
    cost_phase = sum(state.c[i] * state.x[i] for i in range(state.m) if state.x[i] < 1.0)
    proxy = sum(state.proxy_load(i) ** state.p for i in range(state.m) if state.x[i] >= 1.0)
    pp = sum(state.j1_pp[i] for i in range(state.m) if state.x[i] >= 1.0)
    return PotentialBreakdown(per, math.fsum(per), cost_phase, proxy, pp)


def fractional_report(state: FractionalState, rel_tol: float = 1e-7, strict: bool = True) -> dict:
    """Cost, LP objective and potential of a finished run.

    ``cost <= Phi`` and ``objective <= 2 Phi`` hold for every state the
    algorithm can reach; with ``strict`` a violation raises.
    """
    scaled = state.scaled
    x = state.x_array
    y = state.y_matrix
    cost = float(scaled.scaled_costs @ x)
    objective = lp_objective(x, y, scaled, fraction_cap=2.0)
    phi = state.phi
    cost_ok = cost <= phi * (1.0 + rel_tol)
    obj_ok = objective <= 2.0 * phi * (1.0 + rel_tol)
    if strict and not (cost_ok and obj_ok):
        raise InvariantBreach(f"cost={cost}, objective={objective}, Phi={phi}")
    m = state.m
    mlogm = m * math.log(m) if m > 1 else 1.0
    return {
        "m": m,
        "n": state.n,
        "p": state.p,
        "N": state.N,
        "cost": cost,
        "objective": objective,
        "potential": phi,
        "cost_le_phi": bool(cost_ok),
        "objective_le_2phi": bool(obj_ok),
        "phi_over_mlogm": phi / mlogm,
        "cost_over_phi": cost / phi if phi else 0.0,
        "objective_over_phi": objective / phi if phi else 0.0,
        "small_steps": state.small_steps,
        "regular_steps": state.regular_steps,
        "max_regular_increase_times_N": state.max_regular_increase,
        "category_counts": dict(state.category_counts),
        "realized_j0_load": list(state.j0_load),
        "proxy_load": [state.proxy_load(i) for i in range(m)],
    }


def run_fractional(scaled: ScaledInstance, **kw) -> FractionalState:
    opt = kw.pop("opt_assignment", None)
    return FractionalState(scaled, **kw).run(opt)


STEP_LOG_COLUMNS = ("step_index", "job", "small", "prefix", "phi_before", "phi_after")


def step_log_csv(state: FractionalState) -> str:
    """Step log (requires ``log_steps=True``) as CSV text; prefixes are
    space-separated machine indices."""
    if state.step_log is None:
        raise ValueError("state was created without log_steps=True")
    lines = [",".join(STEP_LOG_COLUMNS)]
    for r in state.step_log:
        prefix = " ".join(str(i) for i in r.prefix)
        lines.append(f"{r.index},{r.job},{int(r.small)},{prefix},{r.phi_before!r},{r.phi_after!r}")
    return "\n".join(lines) + "\n"
