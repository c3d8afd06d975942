"""Instance generation and experiment orchestration.

A run is fully determined by its :class:`ExperimentConfig`; the JSON report
is byte-identical across reruns except for ``wall_clock_s``.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import AllMachinesDiscarded, OnlineCoverError, TooLarge
from .fractional import FractionalTrajectory, fractional_report, run_fractional
from .model import Instance, preprocess
from .ocg import init_state, linear_objective, parse_constraint_stream
from .ompc import OmpcProblem, make_lp_violation_objective, run_lower_bound_adversary
from .oracles import ENUM_CAP, brute_force_opt, greedy_lp_norm, summarize
from .rounding import default_alpha, rounding_report, run_rounding
from .rounding_l1 import default_alpha_l1, l1_report, run_rounding_l1

SCHEMA_VERSION = 1
ALGORITHMS = ("ocg", "frac", "round-lp", "round-l1", "adversary", "greedy", "brute")
FRACTIONAL_COLUMNS = ("instance_id", "m", "n", "p", "Phi", "cost", "objective", "small_steps", "regular_steps")
ROUNDING_COLUMNS = ("trial", "seed", "case1", "case2", "case3", "blue_cost", "red_cost", "blue_norm", "red_norm")
SEED_MASK = (1 << 64) - 1


# ---------------------------------------------------------------------------
# instance generation


@dataclass(frozen=True)
class Distribution:
    """``uniform(a, b)``, ``loguniform(a, b)`` or ``setcover`` (entries 1 with
    probability ``a``, unschedulable otherwise)."""

    kind: str
    a: float = 1.0
    b: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "Distribution":
        parts = text.split(":")
        kind = parts[0]
        if kind not in ("uniform", "loguniform", "setcover"):
            raise ValueError(f"unknown distribution {kind!r}")
        nums = [float(v) for v in parts[1:]]
        if kind == "setcover":
            return cls(kind, nums[0] if nums else 0.5, 1.0)
        if len(nums) != 2 or not 0 <= nums[0] <= nums[1]:
            raise ValueError(f"{kind} needs bounds 0 <= a <= b, got {text!r}")
        if kind == "loguniform" and nums[0] <= 0:
            raise ValueError("loguniform needs a > 0")
        return cls(kind, nums[0], nums[1])

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, shape)
        if self.kind == "loguniform":
            return np.exp(rng.uniform(math.log(self.a), math.log(self.b), shape))
        mask = rng.random(shape) < self.a
        out = np.where(mask, 1.0, math.inf)
        if out.ndim == 2:
            # every job keeps at least one machine
            for j in np.flatnonzero(~mask.any(axis=1)):
                out[j, rng.integers(out.shape[1])] = 1.0
        return out


@dataclass(frozen=True)
class InstanceSpec:
    m: int
    n: int
    p: float = 1.0
    cost_dist: str = "uniform:1:5"
    proc_dist: str = "uniform:1:3"
    allow_large_p: bool = False
    enum_cap: int = ENUM_CAP


def generate_instance(spec: InstanceSpec, seed: int) -> Instance:
    """Random instance stamped with a guarantee pair: the middle point of
    the brute-force frontier when ``m^n`` is within the cap (source
    ``"certified"``), otherwise cost and norm of the greedy schedule
    (source ``"heuristic"``)."""
    if spec.m < 1 or spec.n < 1:
        raise ValueError("m and n must be >= 1")
    rng = np.random.default_rng(seed & SEED_MASK)
    costs = Distribution.parse(spec.cost_dist).sample(rng, spec.m)
    proc = Distribution.parse(spec.proc_dist).sample(rng, (spec.n, spec.m))
    inst = Instance(costs, proc, spec.p, 1.0, 1.0, spec.allow_large_p, "unstamped")
    return stamp_guarantee(inst, spec.enum_cap)


def stamp_guarantee(inst: Instance, cap: int = ENUM_CAP) -> Instance:
    try:
        frontier = brute_force_opt(inst, cap)
    except TooLarge:
        g = greedy_lp_norm(inst, ignore_costs=False)
        return inst.with_guarantee(max(g.cost, 1e-12), max(g.lp_norm, 1e-12), "heuristic")
    pt = frontier[len(frontier) // 2]
    # a zero cost or norm cannot serve as a positive guarantee
    return inst.with_guarantee(max(pt.cost, 1e-12), max(pt.lp_norm, 1e-12), "certified")


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    algorithm: str
    instance_path: str | None = None
    generator: dict | None = None
    alpha: float | None = None
    step_eps: float = 1e-3
    trials: int = 1
    base_seed: int = 0
    out_dir: str | None = None
    doubling: bool = False
    phi_cap_factor: float = 10.0
    d: int = 2
    r: int = 2
    p: float = 1.0
    workers: int = 1

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.base_seed <= SEED_MASK:
            raise ValueError("seeds are unsigned 64-bit values")
        if self.instance_path is not None and not Path(self.instance_path).exists():
            raise FileNotFoundError(self.instance_path)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _load_instance(cfg: ExperimentConfig) -> tuple[Instance, str]:
    if cfg.instance_path is not None:
        return Instance.load(cfg.instance_path), Path(cfg.instance_path).name
    if cfg.generator is None:
        raise ValueError("need an instance file or a generator spec")
    spec = InstanceSpec(**cfg.generator)
    return generate_instance(spec, cfg.base_seed), f"gen-{cfg.base_seed}"


def _fractional(inst: Instance, check: bool = True):
    scaled = preprocess(inst)
    state = run_fractional(scaled, check=check)
    return scaled, state, fractional_report(state, strict=False)


def _frac_row(instance_id, rep) -> dict:
    return {
        "instance_id": instance_id,
        "m": rep["m"],
        "n": rep["n"],
        "p": rep["p"],
        "Phi": rep["potential"],
        "cost": rep["cost"],
        "objective": rep["objective"],
        "small_steps": rep["small_steps"],
        "regular_steps": rep["regular_steps"],
    }


def _lp_trial(args):
    scaled, traj, alpha, seed = args
    return rounding_report(run_rounding(scaled, traj, alpha, seed))


def _l1_trial(args):
    scaled, traj, alpha, seed = args
    st, certs = run_rounding_l1(scaled, traj, alpha, seed)
    rep = l1_report(st, certs)
    rep["blue_norm"], rep["red_norm"] = rep["blue_l1"], rep["red_l1"]
    rep["case1"], rep["case2"], rep["case3"] = rep["blue_jobs"], rep["red_jobs"], 0
    return rep


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(a) for a in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _run_rounding(cfg, inst, scheme):
    scaled, state, frep = _fractional(inst)
    m, n = scaled.m, scaled.n
    if cfg.alpha is not None:
        alpha = cfg.alpha
    else:
        alpha = default_alpha(m, n) if scheme == "lp" else default_alpha_l1(n)
    mode = "default" if cfg.alpha is None else "exercise"
    traj = FractionalTrajectory.from_json(state.trajectory.to_json())
    seeds = [(cfg.base_seed + t) & SEED_MASK for t in range(cfg.trials)]
    fn = _lp_trial if scheme == "lp" else _l1_trial
    reps = _map(fn, [(scaled, traj, alpha, s) for s in seeds], cfg.workers)
    rows = []
    for t, (s, rep) in enumerate(zip(seeds, reps)):
        rows.append({"trial": t, "seed": s, **{k: rep[k] for k in ROUNDING_COLUMNS[2:]}})
    summary = summarize([r["total_cost"] for r in reps])
    mean, se = summary.mean, summary.stderr
    phi = frep["potential"]
    bound = (alpha + 1.0) * phi
    freq = {f"case{k}": math.fsum(r[f"case{k}"] for r in reps) / (n * len(reps)) if n else 0.0 for k in (1, 2, 3)}
    agg = {
        "alpha": alpha,
        "alpha_mode": mode,
        "potential": phi,
        "mean_total_cost": mean,
        "stderr_total_cost": se,
        "cost_bound": bound,
        "cost_bound_ok": bool(mean <= bound + 4.0 * se),
        "case_frequency": freq,
        "cases_sum_to_n": all(r["case1"] + r["case2"] + r["case3"] == n for r in reps),
    }
    checks = {"cost_le_phi": frep["cost_le_phi"], "objective_le_2phi": frep["objective_le_2phi"],
              "cost_bound_ok": agg["cost_bound_ok"], "cases_sum_to_n": agg["cases_sum_to_n"]}
    if scheme == "l1":
        agg["certificates_ok"] = all(r["certificates_ok"] for r in reps)
        agg["blue_l1_le_2phi"] = all(r["blue_norm"] <= 2.0 * phi * (1 + 1e-9) for r in reps)
        checks["certificates_ok"] = agg["certificates_ok"]
        if scaled.norm_p == 1.0:
            checks["blue_l1_le_2phi"] = agg["blue_l1_le_2phi"]
    return {"fractional": frep, "aggregate": agg, "checks": checks}, {"rounding": rows}


def doubling_search(inst: Instance, phi_cap_factor: float = 10.0, max_tiers: int = 64) -> dict:
    """Try budgets ``C' = 2^k`` upward from the cheapest machine and report
    the first tier whose fractional potential stays within
    ``phi_cap_factor * max(m' ln m', 1)``.

    A convenience loop for unknown budgets: the cap is a user threshold, not
    a proven constant.
    """
    k = math.floor(math.log2(max(float(inst.machine_costs.min()), 1e-12)))
    tiers = []
    for _ in range(max_tiers):
        budget = 2.0**k
        try:
            scaled, _, rep = _fractional(inst.with_guarantee(budget, inst.guarantee_load, "doubling"))
        except AllMachinesDiscarded:
            tiers.append({"k": k, "budget": budget, "feasible": False, "reason": "all machines discarded"})
            k += 1
            continue
        m = scaled.m
        cap = phi_cap_factor * max(m * math.log(m) if m > 1 else 0.0, 1.0)
        ok = rep["potential"] <= cap
        tiers.append({"k": k, "budget": budget, "feasible": bool(ok), "potential": rep["potential"], "cap": cap})
        if ok:
            return {"tiers": tiers, "first_feasible": k, "budget": budget}
        k += 1
    return {"tiers": tiers, "first_feasible": None, "budget": None}


def _run_ocg(cfg):
    if cfg.instance_path is not None:
        spec = json.loads(Path(cfg.instance_path).read_text(encoding="utf-8"))
    else:
        spec = random_ocg_spec(cfg.base_seed, **(cfg.generator or {}))
    dim = int(spec["dim"])
    rows = parse_constraint_stream(spec["rows"], dim) if isinstance(spec["rows"], str) else [
        np.asarray(r, dtype=float) for r in spec["rows"]]
    if spec["objective"] == "linear":
        obj = linear_objective(spec["weights"])
    else:
        prob = OmpcProblem(np.asarray(spec["packing"], dtype=float), np.asarray(spec["rhs"], dtype=float),
                           norm_p=float(spec["p"]), allow_large_p=True)
        obj = make_lp_violation_objective(prob)
    state = init_state(obj, dim, step_eps=cfg.step_eps)
    for row in rows:
        state.process_constraint(row)
    ratios, zero = state.stationarity_gap()
    rate = state.rate_gap()
    res = {
        "objective": obj.name,
        "x": state.x,
        "duals": state.duals,
        "value": obj.value(state.x),
        "f_initial": state.f_initial,
        "rate": rate,
        "rate_ok": bool(rate["increase"] <= rate["dual_sum"] * (1 + 2 * cfg.step_eps)),
        "max_stationarity_ratio": float(np.nanmax(ratios)) if ratios.size and not np.all(zero) else 0.0,
        "zero_gradient_coords": np.flatnonzero(zero).tolist(),
        "alpha": state.alpha,
        "c_min_mode": state.c_min_mode,
    }
    checks = {"rate_ok": res["rate_ok"]}
    if "x_star" in spec:
        g = state.guarantee_bound(spec["x_star"])
        res["guarantee"] = g
        checks["guarantee_holds"] = g["holds"]
    tables = {"duals": [{"constraint_index": k, "y_j": y} for k, y in enumerate(state.duals)]}
    return {"ocg": res, "checks": checks}, tables


def random_ocg_spec(seed: int, dim: int = 4, n_rows: int = 3, kind: str = "linear", p: float = 2.0,
                    n_pack: int = 3) -> dict:
    """Random 0/1 covering rows with a linear or l_p-violation objective."""
    rng = np.random.default_rng(seed & SEED_MASK)
    rows = []
    for _ in range(n_rows):
        r = (rng.random(dim) < 0.5).astype(float)
        if not r.any():
            r[rng.integers(dim)] = 1.0
        rows.append(r.tolist())
    spec = {"dim": dim, "rows": rows, "objective": kind}
    if kind == "linear":
        spec["weights"] = rng.uniform(0.5, 2.0, dim).tolist()
    else:
        P = (rng.random((n_pack, dim)) < 0.5).astype(float)
        for k in range(n_pack):
            if not P[k].any():
                P[k, rng.integers(dim)] = 1.0
        for i in range(dim):
            if not P[:, i].any():
                P[rng.integers(n_pack), i] = 1.0
        spec.update(packing=P.tolist(), rhs=[1.0] * n_pack, p=p)
    return spec


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute one configured pipeline; returns the report and writes
    ``report.json`` plus CSV tables into ``out_dir`` when set."""
    config.validate()
    t0 = time.perf_counter()
    tables: dict = {}
    try:
        if config.algorithm == "ocg":
            body, tables = _run_ocg(config)
        elif config.algorithm == "adversary":
            tr = run_lower_bound_adversary(config.d, config.r, p=config.p, step_eps=config.step_eps)
            body = {"adversary": tr.to_json(), "checks": {"certificate_ok": tr.certificate_ok}}
        else:
            inst, iid = _load_instance(config)
            if config.algorithm == "brute":
                fr = brute_force_opt(inst)
                body = {"frontier": [pt.to_json() for pt in fr], "checks": {}}
            elif config.algorithm == "greedy":
                g = greedy_lp_norm(inst, ignore_costs=False)
                body = {"greedy": {"assignment": g.assignment, "loads": g.loads, "lp_norm": g.lp_norm,
                                   "cost": g.cost}, "checks": {}}
            elif config.algorithm == "frac":
                if config.doubling:
                    dbl = doubling_search(inst, config.phi_cap_factor)
                    body = {"doubling": dbl, "checks": {"found_tier": dbl["first_feasible"] is not None}}
                else:
                    _, _, rep = _fractional(inst)
                    body = {"fractional": rep,
                            "checks": {"cost_le_phi": rep["cost_le_phi"], "objective_le_2phi": rep["objective_le_2phi"]}}
                    tables = {"fractional": [_frac_row(iid, rep)]}
            else:
                body, tables = _run_rounding(config, inst, "lp" if config.algorithm == "round-lp" else "l1")
            body["instance"] = {"id": iid, "guarantee_source": inst.guarantee_source, "m": inst.m, "n": inst.n,
                                "p": inst.norm_p}
    except OnlineCoverError as exc:
        body = {"error": {"type": type(exc).__name__, "module": type(exc).__module__, "message": str(exc)},
                "checks": {"no_error": False}}
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": asdict(config),
        **body,
        "ok": all(body.get("checks", {}).values()),
        "wall_clock_s": time.perf_counter() - t0,
    }
    report = _clean(report)
    if config.out_dir is not None:
        write_outputs(report, tables, config.out_dir)
    return report


def emit_report(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True)


def parse_report(text: str) -> dict:
    return json.loads(text)


def write_outputs(report: dict, tables: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(emit_report(report), encoding="utf-8")
    for name, rows in tables.items():
        cols = {"fractional": FRACTIONAL_COLUMNS, "rounding": ROUNDING_COLUMNS}.get(name)
        if cols is None:
            cols = tuple(rows[0].keys()) if rows else ()
        with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
