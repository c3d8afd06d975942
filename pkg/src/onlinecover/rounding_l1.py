"""Online rounding specialised to total load (l_1).

Blue copies open exactly as in the l_p scheme. A job goes to an open blue
copy inside its half-mass prefix (machines sorted by processing time, cut
as soon as the fractional mass reaches 1/2); failing that, to the red copy
of its fastest machine. Any prefix member is at most twice the job's
fractional load, which gives a certificate checked on every blue decision.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import InvariantBreach
from .model import ScaledInstance
from .rounding import BLUE, RED, Decision, RoundingState, _assign, open_blue_step

HALF_TOL = 1e-12


def default_alpha_l1(n: int) -> float:
    """``4 ln n``; zero for a single job."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 4.0 * math.log(n)


@dataclass(frozen=True)
class HalfPrefix:
    ordered_machines: tuple
    prefix_end: int
    prefix_mass: float

    @property
    def members(self) -> tuple:
        return self.ordered_machines[: self.prefix_end]


def half_prefix(p_row, y_row) -> HalfPrefix:
    """Shortest prefix of machines sorted by ``p_ij`` (then index) holding
    at least half of the job; a prefix hitting exactly 1/2 is kept."""
    order = sorted((i for i, v in enumerate(p_row) if math.isfinite(v)), key=lambda i: (p_row[i], i))
    acc = 0.0
    for k, i in enumerate(order):
        acc += float(y_row[i])
        if acc >= 0.5 - HALF_TOL:
            return HalfPrefix(tuple(order), k + 1, acc)
    raise ValueError(f"fractional row carries only {acc} < 1/2")


@dataclass(frozen=True)
class Certificate:
    job: int
    machine: int
    p_chosen: float
    frac_load: float

    @property
    def holds(self) -> bool:
        return self.p_chosen <= 2.0 * self.frac_load * (1.0 + 1e-9) + 1e-15


def assign_job_l1(state: RoundingState, y_row, job: int, rng: random.Random | None = None,
                  choice: str = "min", certificates: list | None = None) -> Decision:
    """``choice="min"`` takes the fastest open prefix member; ``"uniform"``
    draws one uniformly (one ``random()`` from the run stream)."""
    rng = state.rng if rng is None else rng
    row = state.proc[job]
    hp = half_prefix(row, y_row)
    open_members = [i for i in hp.members if state.blue_open[i]]
    if open_members:
        if choice == "min":
            i = open_members[0]
        elif choice == "uniform":
            i = open_members[int(rng.random() * len(open_members))]
        else:
            raise ValueError(f"unknown choice rule {choice!r}")
        frac = math.fsum(float(y_row[k]) * row[k] for k in range(len(row)) if y_row[k] > 0)
        cert = Certificate(job, i, row[i], frac)
        if not cert.holds:
            raise InvariantBreach(f"job {job}: p={row[i]} exceeds twice the fractional load {frac}")
        if certificates is not None:
            certificates.append(cert)
        return _assign(state, job, i, BLUE, 1)
    i = min((k for k in range(len(row)) if math.isfinite(row[k])), key=lambda k: (row[k], k))
    return _assign(state, job, i, RED, 2)


def run_rounding_l1(scaled: ScaledInstance, trajectory, alpha: float, seed: int, choice: str = "min"):
    """Replay a fractional trajectory; returns ``(state, certificates)``."""
    state = RoundingState.for_instance(scaled, alpha, seed)
    certs: list[Certificate] = []
    prev = [0.0] * state.m
    open_blue_step(state, prev, trajectory.initial_x)
    prev = trajectory.initial_x
    for j, (x_after, y_row) in enumerate(zip(trajectory.x_after, trajectory.y_rows)):
        open_blue_step(state, prev, x_after)
        assign_job_l1(state, y_row, j, choice=choice, certificates=certs)
        prev = x_after
    return state, certs


def l1_report(state: RoundingState, certificates: list, frac_report: dict | None = None) -> dict:
    """Blue/red l_1, costs and the per-job certificates; a failing
    certificate raises."""
    bad = [c for c in certificates if not c.holds]
    if bad:
        raise InvariantBreach(f"{len(bad)} blue assignments break their certificate, first job {bad[0].job}")
    blue_l1 = math.fsum(state.blue_load)
    cert_sum = 2.0 * math.fsum(c.frac_load for c in certificates)
    out = {
        "alpha": state.alpha,
        "seed": state.rng_seed,
        "blue_l1": blue_l1,
        "red_l1": math.fsum(state.red_load),
        "blue_cost": state.blue_cost,
        "red_cost": state.red_cost,
        "total_cost": state.total_cost,
        "blue_jobs": state.case_counts[1],
        "red_jobs": state.case_counts[2],
        "certificates": len(certificates),
        "certificate_sum": cert_sum,
        "certificates_ok": True,
    }
    if frac_report is not None:
        phi = frac_report["potential"]
        out["potential"] = phi
        out["blue_l1_le_2phi"] = bool(blue_l1 <= 2.0 * phi * (1.0 + 1e-9))
        out["cost_bound"] = (state.alpha + 1.0) * phi
    return out
