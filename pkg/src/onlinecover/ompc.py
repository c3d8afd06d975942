"""Online mixed packing/covering as an OCG instance, plus the adaptive
binary-tree adversary that forces deterministic solvers to pay
``Omega(p log(d / log r))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInstance, NormOutOfRange, SolverNotMonotone
from .ocg import ConvexObjective, OcgState, init_state


@dataclass(frozen=True)
class OmpcProblem:
    """Offline packing rows ``P x <= rhs`` whose l_p norm of violations
    ``lambda_k = (P x)_k / rhs_k`` is minimised under online covering rows.

    ``c_max``/``c_min`` are the extreme positive covering coefficients, which
    the online model has to declare up front.
    """

    packing_matrix: np.ndarray
    packing_rhs: np.ndarray
    norm_p: float = 1.0
    d_max: int | None = None
    c_max: float = 1.0
    c_min: float = 1.0
    allow_large_p: bool = False

    def __post_init__(self):
        P = np.asarray(self.packing_matrix, dtype=float)
        rhs = np.asarray(self.packing_rhs, dtype=float)
        object.__setattr__(self, "packing_matrix", P)
        object.__setattr__(self, "packing_rhs", rhs)
        if P.ndim != 2 or rhs.shape != (P.shape[0],):
            raise InvalidInstance("packing matrix must be r x m with an r-vector rhs")
        if np.any(P < 0) or np.any(rhs <= 0):
            raise InvalidInstance("packing entries must be >= 0 and rhs > 0")
        if not np.all((P > 0).any(axis=1)):
            raise InvalidInstance("every packing row needs a positive entry")
        r = P.shape[0]
        if self.norm_p < 1 or (self.norm_p > max(1.0, math.log2(r)) and not self.allow_large_p):
            raise NormOutOfRange(f"p={self.norm_p} outside [1, log2 r] for r={r}")
        if self.d_max is None:
            object.__setattr__(self, "d_max", int((P > 0).sum(axis=1).max()))
        if self.d_max > self.m:
            raise InvalidInstance("d_max cannot exceed the number of variables")
        if not (self.c_max >= self.c_min > 0):
            raise InvalidInstance("need c_max >= c_min > 0")

    @property
    def m(self) -> int:
        return self.packing_matrix.shape[1]

    @property
    def r(self) -> int:
        return self.packing_matrix.shape[0]

    @property
    def p_max(self) -> float:
        return float(self.packing_matrix[self.packing_matrix > 0].max())

    @property
    def p_min(self) -> float:
        return float(self.packing_matrix[self.packing_matrix > 0].min())

    @property
    def rho(self) -> float:
        return self.c_max / self.c_min

    @property
    def kappa(self) -> float:
        return self.p_max / self.p_min

    def violations(self, x) -> np.ndarray:
        return (self.packing_matrix @ np.asarray(x, dtype=float)) / self.packing_rhs


def gamma_for_ompc(problem: OmpcProblem) -> float:
    """``d * c_max * p_max / p_min``: at ``x = 1/gamma`` every packing row is
    below the smallest load any feasible solution can put on it."""
    return problem.d_max * problem.c_max * problem.p_max / problem.p_min


def make_lp_violation_objective(problem: OmpcProblem, ridge: float = 0.0) -> ConvexObjective:
    """l_p norm of the violation vector, optionally plus ``ridge * sum(x)``.

    The gradient at a zero violation vector (a 0/0 limit) is taken to be 0.
    """
    P = problem.packing_matrix
    W = P / problem.packing_rhs[:, None]
    p = float(problem.norm_p)

    def value(x):
        lam = W @ x
        base = float(lam.sum()) if p == 1 else float((lam**p).sum() ** (1.0 / p))
        return base + ridge * float(np.sum(x))

    def gradient(x):
        lam = W @ x
        if p == 1:
            g = W.sum(axis=0)
        else:
            s = float((lam**p).sum())
            if s == 0.0:
                g = np.zeros(W.shape[1])
            else:
                g = (lam ** (p - 1)) @ W * s ** ((1.0 - p) / p)
        return g + ridge

    return ConvexObjective(value, gradient, p, gamma_for_ompc(problem), f"l{p:g}-violation")


# ---------------------------------------------------------------------------
# adversary


def harmonic(d: int) -> float:
    return sum(1.0 / k for k in range(1, d + 1))


def tree_blocks(d: int, r: int) -> dict:
    """Heap-numbered complete binary tree with ``r`` leaves; every node but
    the root (node 1) owns a block of ``d`` consecutive variables."""
    nodes = list(range(2, 2 * r))
    return {v: list(range((v - 2) * d, (v - 1) * d)) for v in nodes}


def tree_packing_matrix(d: int, r: int) -> np.ndarray:
    """One packing row per leaf: the sum of all blocks on its root path."""
    blocks = tree_blocks(d, r)
    P = np.zeros((r, 2 * (r - 1) * d))
    for k, leaf in enumerate(range(r, 2 * r)):
        v = leaf
        while v > 1:
            P[k, blocks[v]] = 1.0
            v //= 2
    return P


@dataclass
class AdversaryTranscript:
    d: int
    r: int
    rounds: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    final_block_weights: dict = field(default_factory=dict)
    offline_witness: list = field(default_factory=list)
    solver_norm: float = 0.0
    witness_norm: float = 0.0
    norm_p: float = 1.0

    @property
    def ratio(self) -> float:
        return self.solver_norm / self.witness_norm

    @property
    def certificate_ok(self) -> bool:
        return all(lv["certified"] for lv in self.levels)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "r": self.r,
            "p": self.norm_p,
            "rounds": self.rounds,
            "levels": self.levels,
            "final_block_weights": {str(k): v for k, v in self.final_block_weights.items()},
            "offline_witness": self.offline_witness,
            "solver_norm": self.solver_norm,
            "witness_norm": self.witness_norm,
            "ratio": self.ratio,
            "certificate_ok": self.certificate_ok,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def make_adversary_solver(d: int, r: int, p: float = 1.0, step_eps: float = 1e-3) -> tuple[OmpcProblem, OcgState]:
    P = tree_packing_matrix(d, r)
    problem = OmpcProblem(P, np.ones(r), norm_p=p, d_max=max(d * int(math.log2(r)), 2 * d))
    obj = make_lp_violation_objective(problem)
    return problem, init_state(obj, P.shape[1], step_eps=step_eps, c_min=1.0)


def run_lower_bound_adversary(d: int, r: int, solver=None, *, p: float = 1.0, step_eps: float = 1e-3,
                              tol: float = 1e-6) -> AdversaryTranscript:
    """Play the block-pair forcing game down the tree against ``solver``.

    At each tree level both children blocks start fully alive. For ``d``
    rounds the adversary presents ``sum(alive vars of both blocks) >= 1`` and
    then kills the heaviest alive variable of *each* block. The removed
    values on a side dominate its alive mass over its alive count, so the two
    blocks together carry at least ``H_d`` and the heavier at least ``H_d/2``.
    The two last survivors sit in every constraint of the level; the one in
    the lighter block goes into the witness, so each leaf path meets at most
    one witness variable. The game then recurses into the heavier child.

    ``solver`` needs ``process_constraint(row)`` and an observable ``x``; by
    default an OCG solver on the tree's l_p violation objective is built.
    """
    if r < 2 or r & (r - 1):
        raise ValueError("r must be a power of two >= 2")
    if d < 2:
        raise ValueError("d must be >= 2")
    if solver is None:
        _, solver = make_adversary_solver(d, r, p, step_eps)
    blocks = tree_blocks(d, r)
    nvar = 2 * (r - 1) * d
    tr = AdversaryTranscript(d=d, r=r, norm_p=p)
    hd2 = harmonic(d) / 2.0
    last = np.array(solver.x, dtype=float)
    if last.size != nvar:
        raise ValueError(f"solver has {last.size} variables, adversary needs {nvar}")

    def observe():
        nonlocal last
        cur = np.array(solver.x, dtype=float)
        if np.any(cur < last - 1e-15):
            i = int(np.argmax(last - cur))
            raise SolverNotMonotone(f"variable {i} decreased from {last[i]} to {cur[i]}")
        last = cur
        return cur

    node = 1
    level = 0
    while node < r:
        level += 1
        a, b = 2 * node, 2 * node + 1
        alive = {a: list(blocks[a]), b: list(blocks[b])}
        survivors = {}
        for _ in range(d):
            row = np.zeros(nvar)
            row[alive[a] + alive[b]] = 1.0
            solver.process_constraint(row)
            x = observe()
            tr.rounds.append({
                "level": level,
                "support": alive[a] + alive[b],
                "response": [x[v] for v in alive[a] + alive[b]],
            })
            for side in (a, b):
                vals = [x[v] for v in alive[side]]
                k = int(np.argmax(vals))  # first maximum = lowest index
                survivors[side] = alive[side].pop(k)
        x = observe()
        wa, wb = float(x[blocks[a]].sum()), float(x[blocks[b]].sum())
        heavy, light = (a, b) if wa >= wb else (b, a)
        tr.rounds[-1]["block_weights"] = {str(a): wa, str(b): wb}
        tr.offline_witness.append(survivors[light])
        tr.levels.append({
            "level": level,
            "blocks": [a, b],
            "weights": [wa, wb],
            "heavier": heavy,
            "threshold": hd2,
            "certified": max(wa, wb) >= hd2 - tol,
        })
        node = heavy

    x = observe()
    tr.final_block_weights = {v: float(x[blocks[v]].sum()) for v in blocks}
    P = tree_packing_matrix(d, r)
    witness = np.zeros(nvar)
    witness[tr.offline_witness] = 1.0
    for rd in tr.rounds:
        if witness[rd["support"]].sum() < 1.0:
            raise AssertionError("offline witness misses a presented constraint")
    tr.solver_norm = _pnorm(P @ x, p)
    tr.witness_norm = _pnorm(P @ witness, p)
    return tr


def _pnorm(v, p):
    return float((np.asarray(v) ** p).sum() ** (1.0 / p))
