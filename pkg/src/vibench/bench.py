"""Experiment orchestration: strict JSON configs, multi-seed execution,
CSV/SVG artifact emission.

A run plan names one problem (arms may override it), a list of seeds, an
iteration budget, and one or more arms, each combining a solver, a sampler,
and a step-size schedule.  Execution writes, per arm: one CSV per seed, an
aggregate CSV (mean/median/min/max per recorded iteration across seeds), and
a JSON summary; plus one SVG line chart per metric overlaying the arms.
Everything is deterministic given (config, seeds): per-seed starting points
derive from the seed alone, so arms are paired.

Config keys are validated fail-closed: unknown keys are rejected with a
path-to-field diagnostic.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import FiniteSumProblem, VibenchError
from .problems import (
    QuadraticGameSpec,
    WeakMviSpec,
    generate_diagonal_game,
    generate_quadratic_game,
    generate_weak_mvi_problem,
    load_problem,
    regression_counterexample,
)
from .sampling import (
    SamplerSpec,
    importance_probabilities,
    noise_constants_for,
)
from .schedules import StepSizePlan, weak_mvi_batchsize
from .solvers import Trace, peg_run, sog_run, speg_run, weak_mvi_speg_run

__all__ = [
    "ConfigError",
    "RunPlan",
    "ArmPlan",
    "parse_config",
    "build_problem",
    "build_sampler",
    "build_schedule",
    "execute",
    "relative_error_series",
    "preset_path",
    "available_presets",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "k",
    "gamma",
    "omega",
    "sq_dist",
    "r_metric",
    "op_norm_sq",
    "rel_err",
    "rel_opnorm",
    "oracle_calls",
)

_METRICS = ("sq_dist", "r_metric", "op_norm_sq", "rel_err", "rel_opnorm")


class ConfigError(VibenchError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _check_keys(obj: dict, required: set, optional: set, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - required - optional
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{path}.{sorted(missing)[0]}", "missing required key")


def _number(obj, key, path, *, integer=False, minimum=None, allow_none=False):
    if key not in obj or obj[key] is None:
        if allow_none:
            return None
        raise ConfigError(f"{path}.{key}", "missing required number")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {v!r}")
    return int(v) if integer else float(v)


def _interval(obj, key, path, default=None):
    if key not in obj or obj[key] is None:
        if default is not None:
            return default
        raise ConfigError(f"{path}.{key}", "missing interval")
    v = obj[key]
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or any(isinstance(e, bool) or not isinstance(e, (int, float)) for e in v)
    ):
        raise ConfigError(f"{path}.{key}", f"expected [lo, hi], got {v!r}")
    return (float(v[0]), float(v[1]))


@dataclass(frozen=True)
class ArmPlan:
    name: str
    solver: dict
    sampler: dict | None
    schedule: dict
    problem: dict | None = None


@dataclass(frozen=True)
class RunPlan:
    """Validated experiment plan (see the README for the config schema)."""

    name: str
    problem: dict
    arms: tuple[ArmPlan, ...]
    K: int
    seeds: tuple[int, ...]
    x0: dict = field(default_factory=lambda: {"kind": "normal", "scale": 1.0})
    record_every: int | None = None
    init_mode: str = "zero_cache"
    out: str | None = None
    description: str = ""


def _validate_problem(cfg, path) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError(path, f"expected an object, got {type(cfg).__name__}")
    if "family" not in cfg:
        raise ConfigError(f"{path}.family", "missing required key")
    family = cfg.get("family")
    if family == "quadratic_game":
        _check_keys(
            cfg,
            {"family"},
            {
                "n",
                "d",
                "a_interval",
                "b_interval",
                "c_interval",
                "interpolated",
                "seed",
                "first_component_intervals",
                "use_inverse_offset_formula",
                "offset_scale",
            },
            path,
        )
        _number(cfg, "n", path, integer=True, minimum=1, allow_none=True)
        _number(cfg, "d", path, integer=True, minimum=1, allow_none=True)
    elif family == "weak_mvi":
        _check_keys(cfg, {"family"}, {"n", "spread", "seed"}, path)
        _number(cfg, "n", path, integer=True, minimum=1, allow_none=True)
    elif family == "diagonal_game":
        _check_keys(cfg, {"family"}, {"delta"}, path)
        _number(cfg, "delta", path, minimum=1, allow_none=True)
    elif family == "counterexample":
        _check_keys(cfg, {"family", "a1", "b1", "a2", "b2"}, set(), path)
        for key in ("a1", "b1", "a2", "b2"):
            _number(cfg, key, path)
    elif family == "file":
        _check_keys(cfg, {"family", "path"}, set(), path)
        if not isinstance(cfg["path"], str):
            raise ConfigError(f"{path}.path", "expected a string path")
    else:
        raise ConfigError(f"{path}.family", f"unknown problem family {family!r}")
    return dict(cfg)


def _validate_solver(cfg, path) -> dict:
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    _check_keys(cfg, {"kind"}, {"batch", "force"}, path)
    kind = cfg["kind"]
    if kind not in ("speg", "sog", "peg", "weak_mvi_speg"):
        raise ConfigError(f"{path}.kind", f"unknown solver {kind!r}")
    if kind == "weak_mvi_speg":
        _number(cfg, "batch", path, integer=True, minimum=1)
    elif "batch" in cfg:
        raise ConfigError(f"{path}.batch", f"batch applies only to weak_mvi_speg, not {kind!r}")
    return dict(cfg, kind=kind)


def _validate_sampler(cfg, path) -> dict:
    _check_keys(cfg, {"kind"}, {"tau", "probs"}, path)
    kind = cfg["kind"]
    if kind == "minibatch":
        _number(cfg, "tau", path, integer=True, minimum=1)
    elif kind == "single_element":
        probs = cfg.get("probs", "uniform")
        if isinstance(probs, str):
            if probs not in ("uniform", "importance"):
                raise ConfigError(f"{path}.probs", f"expected uniform/importance/list, got {probs!r}")
        elif not isinstance(probs, list):
            raise ConfigError(f"{path}.probs", "expected uniform/importance/list")
    elif kind != "full_batch":
        raise ConfigError(f"{path}.kind", f"unknown sampler {kind!r}")
    return dict(cfg)


def _validate_schedule(cfg, path) -> dict:
    _check_keys(
        cfg,
        {"kind"},
        {"target_eps", "gamma0", "b", "gamma", "omega", "safety", "switch_at"},
        path,
    )
    kind = cfg["kind"]
    if kind in ("constant", "switching", "horizon_aware"):
        pass
    elif kind == "hsieh":
        _number(cfg, "gamma0", path, minimum=0)
        _number(cfg, "b", path, minimum=0)
    elif kind == "weak_mvi":
        pass
    elif kind == "custom":
        _number(cfg, "switch_at", path, integer=True, minimum=0)
    elif kind == "fixed":
        _number(cfg, "omega", path, minimum=0)
    else:
        raise ConfigError(f"{path}.kind", f"unknown schedule {kind!r}")
    return dict(cfg)


def _validate_arm(cfg, path, default_problem) -> ArmPlan:
    _check_keys(cfg, {"name", "solver", "schedule"}, {"sampler", "problem"}, path)
    if not isinstance(cfg["name"], str) or not cfg["name"]:
        raise ConfigError(f"{path}.name", "arm name must be a nonempty string")
    solver = _validate_solver(cfg["solver"], f"{path}.solver")
    sampler = None
    if solver["kind"] in ("speg", "sog"):
        if "sampler" not in cfg or cfg["sampler"] is None:
            raise ConfigError(f"{path}.sampler", f"solver {solver['kind']!r} needs a sampler")
        sampler = _validate_sampler(cfg["sampler"], f"{path}.sampler")
    elif cfg.get("sampler") is not None:
        raise ConfigError(f"{path}.sampler", f"solver {solver['kind']!r} takes no sampler")
    schedule = _validate_schedule(cfg["schedule"], f"{path}.schedule")
    problem = None
    if cfg.get("problem") is not None:
        problem = _validate_problem(cfg["problem"], f"{path}.problem")
    return ArmPlan(name=cfg["name"], solver=solver, sampler=sampler, schedule=schedule, problem=problem)


def parse_config(path) -> RunPlan:
    """Parse and validate a run config; raises :class:`ConfigError` on any
    schema violation, naming the offending field."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(str(path), f"cannot read config: {err}") from err
    top_required = {"problem", "K", "seeds"}
    top_optional = {
        "name",
        "description",
        "arms",
        "solver",
        "sampler",
        "schedule",
        "x0",
        "record_every",
        "init_mode",
        "out",
    }
    _check_keys(raw, top_required, top_optional, "config")
    problem = _validate_problem(raw["problem"], "config.problem")
    k_iter = _number(raw, "K", "config", integer=True, minimum=1)

    seeds_cfg = raw["seeds"]
    if isinstance(seeds_cfg, list):
        if not seeds_cfg or any(isinstance(s, bool) or not isinstance(s, int) for s in seeds_cfg):
            raise ConfigError("config.seeds", "expected a nonempty list of integers")
        seeds = tuple(seeds_cfg)
    elif isinstance(seeds_cfg, dict):
        _check_keys(seeds_cfg, {"count"}, {"base"}, "config.seeds")
        count = _number(seeds_cfg, "count", "config.seeds", integer=True, minimum=1)
        base = _number(seeds_cfg, "base", "config.seeds", integer=True, allow_none=True) or 0
        seeds = tuple(range(base, base + count))
    else:
        raise ConfigError("config.seeds", "expected a list or {count, base}")

    if "arms" in raw and raw["arms"] is not None:
        for key in ("solver", "sampler", "schedule"):
            if raw.get(key) is not None:
                raise ConfigError(f"config.{key}", "give either top-level solver/sampler/schedule or arms, not both")
        if not isinstance(raw["arms"], list) or not raw["arms"]:
            raise ConfigError("config.arms", "expected a nonempty list")
        arms = tuple(
            _validate_arm(a, f"config.arms[{i}]", problem) for i, a in enumerate(raw["arms"])
        )
        if len({a.name for a in arms}) != len(arms):
            raise ConfigError("config.arms", "arm names must be unique")
    else:
        if "solver" not in raw or "schedule" not in raw:
            raise ConfigError("config.solver", "need solver+schedule (or arms)")
        arms = (
            _validate_arm(
                {
                    "name": "main",
                    "solver": raw["solver"],
                    "sampler": raw.get("sampler"),
                    "schedule": raw["schedule"],
                },
                "config",
                problem,
            ),
        )

    x0 = raw.get("x0") or {"kind": "normal", "scale": 1.0}
    _check_keys(x0, {"kind"}, {"scale", "values"}, "config.x0")
    if x0["kind"] not in ("normal", "zeros", "explicit"):
        raise ConfigError("config.x0.kind", f"unknown x0 kind {x0['kind']!r}")
    if x0["kind"] == "explicit" and not isinstance(x0.get("values"), list):
        raise ConfigError("config.x0.values", "explicit x0 needs a list of values")

    record_every = _number(raw, "record_every", "config", integer=True, minimum=1, allow_none=True)
    init_mode = raw.get("init_mode", "zero_cache")
    if init_mode not in ("zero_cache", "warm_start"):
        raise ConfigError("config.init_mode", f"unknown init_mode {init_mode!r}")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("config.out", "expected a string")

    plan = RunPlan(
        name=raw.get("name", path.stem),
        problem=problem,
        arms=arms,
        K=k_iter,
        seeds=seeds,
        x0=dict(x0),
        record_every=record_every,
        init_mode=init_mode,
        out=out,
        description=raw.get("description", ""),
    )
    # eager cross-field validation so `vibench run` fails before any work
    for arm in plan.arms:
        prob = build_problem(arm.problem or plan.problem)
        if arm.sampler is not None:
            build_sampler(arm.sampler, prob, f"config.arms[{arm.name}].sampler")
    return plan


def build_problem(cfg: dict) -> FiniteSumProblem:
    family = cfg["family"]
    if family == "quadratic_game":
        fci = cfg.get("first_component_intervals")
        spec = QuadraticGameSpec(
            n=int(cfg.get("n", 100)),
            d=int(cfg.get("d", 30)),
            a_interval=tuple(cfg.get("a_interval", (0.1, 1.0))),
            b_interval=tuple(cfg.get("b_interval", (0.0, 1.0))),
            c_interval=tuple(cfg.get("c_interval", (0.1, 1.0))),
            interpolated=bool(cfg.get("interpolated", False)),
            seed=int(cfg.get("seed", 0)),
            first_component_intervals=tuple(tuple(t) for t in fci) if fci else None,
            use_inverse_offset_formula=bool(cfg.get("use_inverse_offset_formula", False)),
            offset_scale=float(cfg.get("offset_scale", 1.0)),
        )
        return generate_quadratic_game(spec)
    if family == "weak_mvi":
        return generate_weak_mvi_problem(
            WeakMviSpec(
                n=int(cfg.get("n", 100)),
                spread=float(cfg.get("spread", 0.1)),
                seed=int(cfg.get("seed", 0)),
            )
        )
    if family == "diagonal_game":
        return generate_diagonal_game(float(cfg.get("delta", 3.0)))
    if family == "counterexample":
        problem, _ = regression_counterexample(cfg["a1"], cfg["b1"], cfg["a2"], cfg["b2"])
        return problem
    if family == "file":
        return load_problem(cfg["path"])
    raise ConfigError("problem.family", f"unknown family {family!r}")


def build_sampler(cfg: dict, problem: FiniteSumProblem, path: str = "sampler") -> SamplerSpec:
    n = problem.n_components
    kind = cfg["kind"]
    if kind == "full_batch":
        return SamplerSpec.full_batch(n)
    if kind == "minibatch":
        tau = int(cfg["tau"])
        if tau > n:
            raise ConfigError(f"{path}.tau", f"tau={tau} exceeds the problem's n={n}")
        return SamplerSpec.minibatch(n, tau)
    probs = cfg.get("probs", "uniform")
    if probs == "uniform":
        p = np.full(n, 1.0 / n)
    elif probs == "importance":
        if problem.constants is None:
            raise ConfigError(f"{path}.probs", "importance sampling needs certified constants")
        p = importance_probabilities(problem.constants.L_i_list)
    else:
        p = np.asarray(probs, dtype=np.float64)
        if p.shape != (n,):
            raise ConfigError(f"{path}.probs", f"expected {n} probabilities, got {p.shape[0]}")
    return SamplerSpec.single_element(p)


def build_schedule(
    cfg: dict, problem: FiniteSumProblem, spec: SamplerSpec | None, K: int
) -> StepSizePlan:
    kind = cfg["kind"]
    if kind == "fixed":
        return StepSizePlan.fixed(float(cfg["omega"]), cfg.get("gamma"))
    if kind == "hsieh":
        c = problem.constants
        return StepSizePlan.hsieh(
            float(cfg["gamma0"]),
            float(cfg["b"]),
            L=None if c is None else c.L,
            mu=None if c is None else c.mu,
        )
    c = problem.constants
    if c is None:
        raise VibenchError("derived schedules need certified problem constants")
    if kind == "weak_mvi":
        if c.rho is None:
            raise VibenchError("weak_mvi schedule needs a certified rho")
        return StepSizePlan.weak_mvi(
            c.L,
            c.rho,
            gamma=cfg.get("gamma"),
            omega=cfg.get("omega"),
            safety=float(cfg.get("safety", 0.5)),
        )
    if c.mu is None or c.mu <= 0:
        raise VibenchError(f"schedule {kind!r} needs a positive certified mu")
    noise = (
        noise_constants_for(problem, spec)
        if spec is not None
        else noise_constants_for(problem, SamplerSpec.full_batch(problem.n_components))
    )
    if kind == "constant":
        eps = cfg.get("target_eps")
        return StepSizePlan.constant(
            c.L, c.mu, noise.delta, target_eps=eps, sigma_star_sq=noise.sigma_star_sq
        )
    if kind == "switching":
        return StepSizePlan.switching(c.L, c.mu, noise.delta)
    if kind == "horizon_aware":
        return StepSizePlan.horizon_aware(K, c.L, c.mu, noise.delta)
    if kind == "custom":
        return StepSizePlan.custom_switch(c.L, c.mu, noise.delta, int(cfg["switch_at"]))
    raise ConfigError("schedule.kind", f"unknown schedule {kind!r}")


def _x0_for(plan: RunPlan, problem: FiniteSumProblem, seed: int) -> np.ndarray:
    kind = plan.x0["kind"]
    if kind == "zeros":
        return np.zeros(problem.dimension)
    if kind == "explicit":
        vals = np.asarray(plan.x0["values"], dtype=np.float64)
        if vals.shape != (problem.dimension,):
            raise VibenchError(
                f"explicit x0 has dimension {vals.shape[0]}, problem needs {problem.dimension}"
            )
        return vals
    scale = float(plan.x0.get("scale", 1.0))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 101)))
    return rng.standard_normal(problem.dimension) * scale


def _run_arm_seed(plan: RunPlan, arm: ArmPlan, problem, spec, schedule, seed: int) -> tuple[Trace, float]:
    x0 = _x0_for(plan, problem, seed)
    kind = arm.solver["kind"]
    t0 = time.perf_counter()
    if kind == "speg":
        trace = speg_run(
            problem, spec, schedule, plan.K, x0,
            seed=seed, record_every=plan.record_every, init_mode=plan.init_mode,
        )
    elif kind == "sog":
        trace = sog_run(
            problem, spec, schedule, plan.K, x0,
            seed=seed, record_every=plan.record_every, init_mode=plan.init_mode,
        )
    elif kind == "peg":
        trace = peg_run(problem, schedule, plan.K, x0, record_every=plan.record_every)
    else:
        gamma, omega = schedule.step(0)
        trace = weak_mvi_speg_run(
            problem, int(arm.solver["batch"]), gamma, omega, plan.K, x0,
            seed=seed, record_every=plan.record_every, force=bool(arm.solver.get("force", False)),
        )
    return trace, time.perf_counter() - t0


def relative_error_series(trace: Trace) -> np.ndarray:
    """Per-record ||x_k - x*||^2 / ||x_0 - x*||^2 (exactly 1 at k = 0)."""
    sq = trace.column("sq_dist")
    if sq.size == 0 or not np.isfinite(sq[0]):
        raise VibenchError("relative error needs a known solution")
    return sq / sq[0]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_trace_csv(path, trace: Trace) -> None:
    sq0 = trace.records[0].sq_dist if trace.records else math.nan
    f0_sq = trace.f0_sq
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in trace.records:
            rel_err = r.sq_dist / sq0 if (sq0 and not math.isnan(sq0)) else math.nan
            rel_op = r.op_norm_sq / f0_sq if (f0_sq and not math.isnan(f0_sq)) else math.nan
            w.writerow(
                [
                    _fmt(r.k), _fmt(r.gamma), _fmt(r.omega), _fmt(r.sq_dist),
                    _fmt(r.r_metric), _fmt(r.op_norm_sq), _fmt(rel_err), _fmt(rel_op),
                    _fmt(r.oracle_calls),
                ]
            )


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    cols = {name: np.array([float(r[i]) for r in data]) for i, name in enumerate(header)}
    return cols


def _aggregate(per_seed: list[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
    ks = sorted({int(k) for cols in per_seed for k in cols["k"]})
    out: dict[str, list] = {"k": [], "seeds": []}
    for m in _METRICS:
        for stat in ("mean", "median", "min", "max"):
            out[f"{m}_{stat}"] = []
    for k in ks:
        vals = {m: [] for m in _METRICS}
        count = 0
        for cols in per_seed:
            idx = np.nonzero(cols["k"] == k)[0]
            if idx.size:
                count += 1
                for m in _METRICS:
                    vals[m].append(cols[m][idx[0]])
        out["k"].append(k)
        out["seeds"].append(count)
        for m in _METRICS:
            arr = np.array(vals[m])
            # sorted reduction keeps the statistics invariant to seed order
            finite = np.sort(arr[np.isfinite(arr)])
            stats = (
                (np.mean(finite), np.median(finite), np.min(finite), np.max(finite))
                if finite.size
                else (math.nan,) * 4
            )
            for stat, v in zip(("mean", "median", "min", "max"), stats):
                out[f"{m}_{stat}"].append(v)
    return {k: np.array(v) for k, v in out.items()}


def _write_aggregate_csv(path, agg: dict[str, np.ndarray]) -> None:
    keys = list(agg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for i in range(agg["k"].size):
            w.writerow([_fmt(agg[key][i]) for key in keys])


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def write_line_chart(path, series, title: str, ylabel: str) -> None:
    """Dependency-free SVG chart: linear x, log10 y, one polyline per series.

    ``series`` is a list of (label, xs, ys); nonpositive/NaN ys are dropped.
    """
    width, height = 720, 440
    ml, mr, mt, mb = 70, 20, 40, 50
    plot_w, plot_h = width - ml - mr, height - mt - mb
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        mask = np.isfinite(xs) & np.isfinite(ys) & (ys > 0)
        if mask.any():
            cleaned.append((label, xs[mask], np.log10(ys[mask])))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    if cleaned:
        x_min = min(s[1].min() for s in cleaned)
        x_max = max(s[1].max() for s in cleaned)
        y_min = min(s[2].min() for s in cleaned)
        y_max = max(s[2].max() for s in cleaned)
        if x_max == x_min:
            x_max = x_min + 1
        if y_max == y_min:
            y_max = y_min + 1

        def sx(x):
            return ml + (x - x_min) / (x_max - x_min) * plot_w

        def sy(y):
            return mt + (y_max - y) / (y_max - y_min) * plot_h

        parts.append(
            f'<rect x="{ml}" y="{mt}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>'
        )
        for tick in np.linspace(x_min, x_max, 5):
            parts.append(
                f'<text x="{sx(tick):.1f}" y="{height - mb + 18}" text-anchor="middle">{tick:.0f}</text>'
            )
        lo, hi = math.floor(y_min), math.ceil(y_max)
        step = max(1, (hi - lo) // 6)
        for p10 in range(lo, hi + 1, step):
            if y_min <= p10 <= y_max:
                parts.append(
                    f'<line x1="{ml}" y1="{sy(p10):.1f}" x2="{width - mr}" y2="{sy(p10):.1f}" '
                    'stroke="#ddd"/>'
                )
                parts.append(
                    f'<text x="{ml - 8}" y="{sy(p10) + 4:.1f}" text-anchor="end">1e{p10}</text>'
                )
        for i, (label, xs, ys) in enumerate(cleaned):
            color = _SVG_COLORS[i % len(_SVG_COLORS)]
            pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            parts.append(
                f'<text x="{ml + 10}" y="{mt + 16 + 16 * i}" fill="{color}">{label}</text>'
            )
        parts.append(
            f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">iteration k</text>'
        )
        parts.append(
            f'<text x="16" y="{mt + plot_h / 2}" transform="rotate(-90 16 {mt + plot_h / 2})" '
            f'text-anchor="middle">{ylabel} (log10)</text>'
        )
    else:
        parts.append(f'<text x="{width / 2}" y="{height / 2}" text-anchor="middle">no data</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def resolve_out_dir(plan: RunPlan, cli_out: str | None = None) -> Path:
    if cli_out:
        return Path(cli_out)
    env = os.environ.get("VIBENCH_OUT")
    if env:
        return Path(env) / plan.name
    if plan.out:
        return Path(plan.out)
    return Path("vibench_out") / plan.name


def execute(plan: RunPlan, jobs: int = 1, out_dir=None, seed_offset: int = 0) -> int:
    """Run every (arm, seed) pair, write artifacts, and return the exit code
    (0 if at least one seed completed, 3 if every run diverged)."""
    out = Path(out_dir) if out_dir is not None else resolve_out_dir(plan)
    out.mkdir(parents=True, exist_ok=True)
    seeds = tuple(s + seed_offset for s in plan.seeds)
    t_start = time.perf_counter()

    built = {}
    arm_ctx = []
    for arm in plan.arms:
        key = json.dumps(arm.problem or plan.problem, sort_keys=True)
        if key not in built:
            built[key] = build_problem(arm.problem or plan.problem)
        problem = built[key]
        spec = (
            build_sampler(arm.sampler, problem, f"arms[{arm.name}].sampler")
            if arm.sampler is not None
            else None
        )
        schedule = build_schedule(arm.schedule, problem, spec, plan.K)
        arm_ctx.append((arm, problem, spec, schedule))

    tasks = [(ai, seed) for ai in range(len(arm_ctx)) for seed in seeds]

    def work(task):
        ai, seed = task
        arm, problem, spec, schedule = arm_ctx[ai]
        return _run_arm_seed(plan, arm, problem, spec, schedule, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    summary = {
        "name": plan.name,
        "description": plan.description,
        "K": plan.K,
        "seeds": list(seeds),
        "init_mode": plan.init_mode,
        "arms": {},
    }
    any_completed = False
    chart_series: dict[str, list] = {m: [] for m in _METRICS}
    for ai, (arm, problem, spec, schedule) in enumerate(arm_ctx):
        arm_dir = out / arm.name
        arm_dir.mkdir(exist_ok=True)
        per_seed_cols = []
        arm_summary: dict = {
            "problem": problem.name,
            "sampler": spec.describe() if spec is not None else None,
            "schedule": schedule.describe(),
            "seeds": {},
        }
        finals: dict[str, list] = {m: [] for m in _METRICS}
        min_ops = []
        for (trace, wall), (ai2, seed) in zip(results, tasks):
            if ai2 != ai:
                continue
            csv_path = arm_dir / f"seed_{seed}.csv"
            write_trace_csv(csv_path, trace)
            cols = read_trace_csv(csv_path)
            per_seed_cols.append(cols)
            if not trace.diverged:
                any_completed = True
            arm_summary["seeds"][str(seed)] = {
                "diverged": trace.diverged,
                "diverged_at": trace.diverged_at,
                "oracle_calls": trace.oracle_calls,
                "wall_time_s": wall,
                "final_k": int(trace.final.k) if trace.records else None,
                "final_sq_dist": trace.final.sq_dist if trace.records else None,
                "final_r_metric": trace.final.r_metric if trace.records else None,
                "min_op_norm_sq": trace.min_op_norm_sq,
                "notes": list(trace.notes),
            }
            if trace.records and not trace.diverged:
                for m in _METRICS:
                    finals[m].append(cols[m][-1])
                if not math.isnan(trace.min_op_norm_sq):
                    min_ops.append(trace.min_op_norm_sq)
        agg = _aggregate(per_seed_cols)
        _write_aggregate_csv(arm_dir / "aggregate.csv", agg)
        for m in _METRICS:
            chart_series[m].append((arm.name, agg["k"], agg[f"{m}_mean"]))
        arm_summary["n_diverged"] = sum(
            1 for s in arm_summary["seeds"].values() if s["diverged"]
        )
        for m in _METRICS:
            arr = np.array([v for v in finals[m] if np.isfinite(v)])
            arm_summary[f"final_{m}"] = (
                {
                    "mean": float(arr.mean()),
                    "median": float(np.median(arr)),
                    "min": float(arr.min()),
                    "max": float(arr.max()),
                }
                if arr.size
                else None
            )
        arm_summary["min_op_norm_sq_median"] = float(np.median(min_ops)) if min_ops else None
        summary["arms"][arm.name] = arm_summary

    for m in _METRICS:
        write_line_chart(out / f"{m}.svg", chart_series[m], f"{plan.name}: {m}", m)
    summary["wall_time_s"] = time.perf_counter() - t_start
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float))
    return 0 if any_completed else 3


def preset_path(name: str) -> Path:
    """Path of a shipped preset config (with or without the .json suffix)."""
    fname = name if name.endswith(".json") else f"{name}.json"
    base = resources.files("vibench") / "presets" / fname
    with resources.as_file(base) as p:
        if not p.exists():
            raise VibenchError(f"no preset named {name!r}; see available_presets()")
        return Path(p)


def available_presets() -> list[str]:
    base = resources.files("vibench") / "presets"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def prescriptions(plan: RunPlan) -> dict:
    """Derived constants per arm: noise constants, step sizes, thresholds,
    and the weak-Minty batch prescription for the plan's K."""
    out: dict = {"name": plan.name, "K": plan.K, "arms": {}}
    for arm in plan.arms:
        problem = build_problem(arm.problem or plan.problem)
        spec = (
            build_sampler(arm.sampler, problem, "sampler") if arm.sampler is not None else None
        )
        schedule = build_schedule(arm.schedule, problem, spec, plan.K)
        c = problem.constants
        entry = {
            "problem": problem.name,
            "n": problem.n_components,
            "dimension": problem.dimension,
            "L": c.L if c else None,
            "mu": c.mu if c else None,
            "rho": c.rho if c else None,
            "sampler": spec.describe() if spec else None,
            "schedule": schedule.describe(),
        }
        noise_spec = spec if spec is not None else SamplerSpec.full_batch(problem.n_components)
        if problem.known_solution is not None and c is not None:
            noise = noise_constants_for(problem, noise_spec)
            entry["delta"] = noise.delta
            entry["sigma_star_sq"] = noise.sigma_star_sq
            if c.mu and c.mu > 0:
                from .schedules import switching_threshold

                omega_bar, k_star = switching_threshold(c.L, c.mu, noise.delta)
                entry["omega_bar"] = omega_bar
                entry["k_star"] = k_star
                entry["neighborhood_bound"] = 24.0 * omega_bar * noise.sigma_star_sq / c.mu
            if schedule.kind == "weak_mvi":
                x0 = _x0_for(plan, problem, plan.seeds[0])
                r0 = x0 - problem.known_solution
                entry["weak_mvi_batch_prescription"] = weak_mvi_batchsize(
                    plan.K,
                    noise.delta,
                    noise.sigma_star_sq,
                    c.L,
                    schedule.gamma,
                    schedule.omega,
                    float(r0 @ r0),
                )
        out["arms"][arm.name] = entry
    return out
