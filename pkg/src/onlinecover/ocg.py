"""Deterministic online solver for ``min f(x) s.t. Cx >= 1`` with covering rows
arriving one at a time.

On arrival of an unsatisfied row ``c``, every coordinate grows at rate
``dx_i/dt = c_i x_i / (df/dx_i)`` while the row's dual grows at unit rate.
The flow is integrated with explicit Euler steps whose relative growth is
capped by ``step_eps``; the last step is cut so the row lands on 1.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InfeasibleReference, NonTermination, ZeroGradientOnActiveCoordinate

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class ConvexObjective:
    """Monotone, convex, differentiable objective with its convexity measure
    ``beta = max_x <x, grad f(x)> / f(x)`` and initialisation scale ``gamma``
    (``f(1/gamma, ..., 1/gamma) <= OPT``)."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    beta_measure: float
    gamma_scale: float
    name: str = "custom"


def linear_objective(weights, gamma: float | None = None) -> ConvexObjective:
    """``f(x) = <a, x>``; beta = 1. Default gamma is ``m * max(a)``, which
    assumes rows with unit maximum coefficient."""
    a = np.asarray(weights, dtype=float)
    if np.any(a < 0):
        raise ValueError("linear weights must be non-negative")
    g = gamma if gamma is not None else a.size * float(a.max())
    return ConvexObjective(lambda x: float(a @ x), lambda x: a.copy(), 1.0, g, "linear")


def quadratic_plus_linear(quad, lin, gamma: float) -> ConvexObjective:
    """``f(x) = sum q_i x_i^2 + sum l_i x_i`` (separable); beta = 2."""
    q = np.asarray(quad, dtype=float)
    lv = np.asarray(lin, dtype=float)
    return ConvexObjective(
        lambda x: float(q @ (x * x) + lv @ x),
        lambda x: 2.0 * q * x + lv,
        2.0,
        gamma,
        "quadratic",
    )


@dataclass
class OcgState:
    """Primal vector, dual ledger and the rows seen so far.

    ``c_min`` may be declared up front; when it is ``None`` it is computed
    over the rows seen so far (``c_min_mode == "retrospective"``).
    """

    objective: ConvexObjective
    x: np.ndarray
    step_eps: float
    declared_c_min: float | None = None
    max_steps: int = 10_000_000
    duals: list = field(default_factory=list)
    rows_seen: list = field(default_factory=list)
    f_initial: float = 0.0
    x_initial: np.ndarray = None
    steps_taken: int = 0

    @property
    def dim(self) -> int:
        return self.x.size

    @property
    def c_min(self) -> float | None:
        if self.declared_c_min is not None:
            return self.declared_c_min
        pos = [r[r > 0].min() for r in self.rows_seen if np.any(r > 0)]
        return min(pos) if pos else None

    @property
    def c_min_mode(self) -> str:
        return "declared" if self.declared_c_min is not None else "retrospective"

    @property
    def alpha(self) -> float:
        return math.log(self.objective.gamma_scale / self.c_min)

    def process_constraint(self, row) -> float:
        """Satisfy ``<row, x> >= 1`` by running the flow; returns the row's dual."""
        row = np.asarray(row, dtype=float)
        if row.shape != (self.dim,):
            raise ValueError(f"row has shape {row.shape}, expected ({self.dim},)")
        if np.any(row < 0) or not np.any(row > 0):
            raise ValueError("covering rows need non-negative entries and at least one positive")
        self.rows_seen.append(row.copy())
        x = self.x
        active = row > 0
        c = row[active]
        y = 0.0
        cover = float(row @ x)
        steps = 0
        while cover < 1.0:
            steps += 1
            if self.steps_taken + steps > self.max_steps:
                raise NonTermination(f"step cap {self.max_steps} reached")
            g = np.asarray(self.objective.gradient(x), dtype=float)[active]
            if np.any(g <= 0):
                bad = np.flatnonzero(active)[g <= 0]
                raise ZeroGradientOnActiveCoordinate(f"df/dx = 0 at coordinates {bad.tolist()}")
            rate = c / g  # relative growth per unit time
            dt = self.step_eps / rate.max()
            xa = x[active]
            gain = float((c * xa * rate).sum())  # d<row,x>/dt with frozen gradient
            if cover + dt * gain >= 1.0:
                dt = (1.0 - cover) / gain
            x[active] = xa + dt * rate * xa
            y += dt
            cover = float(row @ x)
            if 1.0 - cover < FEAS_TOL:
                break
        self.steps_taken += steps
        self.duals.append(y)
        return y

    def stationarity_gap(self) -> tuple[np.ndarray, np.ndarray]:
        """Ratios ``sum_j c_ij y_j / (alpha * df/dx_i(x_end))``.

        Returns ``(ratios, zero_grad_mask)``; ratios are ``nan`` where the
        gradient vanishes. Both are empty before the first row.
        """
        if not self.rows_seen:
            return np.zeros(0), np.zeros(0, dtype=bool)
        C = np.vstack(self.rows_seen)
        lhs = C.T @ np.asarray(self.duals)
        g = np.asarray(self.objective.gradient(self.x), dtype=float)
        zero = g <= 0
        ratios = np.full(self.dim, np.nan)
        denom = self.alpha * g[~zero]
        num = lhs[~zero]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[~zero] = np.where(num == 0.0, 0.0, num / denom)
        return ratios, zero

    def guarantee_bound(self, x_star, slack_factor: float = 3.0) -> dict:
        """Compare ``f(x_end)`` with ``f(alpha * beta * x*) + beta * f(x0)``."""
        x_star = np.asarray(x_star, dtype=float)
        for k, r in enumerate(self.rows_seen):
            if float(r @ x_star) < 1.0 - 1e-9:
                raise InfeasibleReference(f"reference violates row {k}: {float(r @ x_star)} < 1")
        f = self.objective.value
        beta = self.objective.beta_measure
        achieved = f(self.x)
        bound = f(self.alpha * beta * x_star) + beta * self.f_initial
        slack = slack_factor * self.step_eps
        return {
            "achieved": achieved,
            "bound": bound,
            "alpha": self.alpha,
            "beta": beta,
            "slack": slack,
            "c_min_mode": self.c_min_mode,
            "holds": bool(achieved <= bound * (1.0 + slack)),
        }

    def rate_gap(self) -> dict:
        """``f(x) - f(x0)`` against the dual sum (they satisfy ``lhs <= rhs``
        for the continuous flow)."""
        return {"increase": self.objective.value(self.x) - self.f_initial, "dual_sum": float(sum(self.duals))}

    def dump_duals(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["constraint_index", "y_j"])
            for k, y in enumerate(self.duals):
                w.writerow([k, repr(y)])


def init_state(objective: ConvexObjective, dim: int, step_eps: float = 1e-3, c_min: float | None = None,
               max_steps: int = 10_000_000) -> OcgState:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not objective.gamma_scale > 0:
        raise ValueError("gamma must be positive")
    if not 0 < step_eps <= 0.1:
        raise ValueError("step_eps must lie in (0, 0.1]")
    x0 = np.full(dim, 1.0 / objective.gamma_scale)
    return OcgState(
        objective=objective,
        x=x0.copy(),
        step_eps=step_eps,
        declared_c_min=c_min,
        max_steps=max_steps,
        f_initial=objective.value(x0),
        x_initial=x0,
    )


_ENTRY = re.compile(r"(\d+)\s*=\s*([0-9.eE+-]+)")


def parse_constraint_stream(text: str, dim: int) -> list[np.ndarray]:
    """Parse ``"j: i1=c1 i2=c2 ..."`` lines (blank lines and ``#`` comments skipped)."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ValueError(f"line {lineno}: missing 'j:' prefix")
        _, body = line.split(":", 1)
        row = np.zeros(dim)
        for tok in body.split():
            mt = _ENTRY.fullmatch(tok)
            if not mt:
                raise ValueError(f"line {lineno}: bad entry {tok!r}")
            i = int(mt.group(1))
            if i >= dim:
                raise ValueError(f"line {lineno}: index {i} out of range for dim {dim}")
            row[i] = float(mt.group(2))
        rows.append(row)
    return rows


def format_constraint_stream(rows) -> str:
    lines = []
    for j, r in enumerate(rows):
        ent = " ".join(f"{i}={v!r}" for i, v in enumerate(np.asarray(r, dtype=float).tolist()) if v > 0)
        lines.append(f"{j}: {ent}")
    return "\n".join(lines) + "\n"
