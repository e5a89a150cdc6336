"""Scenario orchestration: sweeps over system count, report requirement,
cost blend, and intercommunication mode, with per-seed algorithm and oracle
runs aggregated into deterministic CSV tables.

Scenario codes are three letters: magnitude (Big / S mall), arrivals
(C onstant / P oisson / H eavy-tailed), cost (U nity / L og). The extra code
ADV2 replays the two-event adversarial instance, optionally perturbed.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import statistics
import time
from dataclasses import dataclass, replace

import numpy as np

from .graph import CommGraph, GenerationError, gen_udg, greedy_cds, greedy_mis, Role
from .model import (
    CommCost,
    EventTrace,
    LINEAR,
    LogCost,
    UnityCost,
    ValidationError,
    evaluate,
)
from .online import (
    ThresholdPolicy,
    run_itc,
    run_net,
    run_thb,
    threshold_full,
    threshold_none,
    threshold_partial,
)
from .offline import offline_lb
from .workload import (
    BigEvents,
    ConstantArrivals,
    PoissonArrivals,
    SmallEvents,
    WeibullArrivals,
    WorkloadSpec,
    gen_thm6_instance,
    gen_trace,
    perturb,
)

MODES = ("none", "full", "nc", "fc", "n1", "n2")

_MAGNITUDES = {"B": BigEvents, "S": SmallEvents}
_ARRIVALS = {"C": ConstantArrivals, "P": PoissonArrivals, "H": WeibullArrivals}
_COSTS = {"U": UnityCost, "L": LogCost}


class ConfigError(ValidationError):
    """Raised on a malformed scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_code: str
    mode: str
    n_values: tuple[int, ...]
    k_values: tuple[int, ...]
    rho_values: tuple[float, ...]
    theta_values: tuple[float | None, ...] = (None,)
    runs: int = 50
    n_events: int = 2000
    seed: int = 0
    perturb_pct: float = 0.0
    avg_degree: float = 18.0

    def __post_init__(self):
        code = self.scenario_code
        if code != "ADV2":
            if (
                len(code) != 3
                or code[0] not in _MAGNITUDES
                or code[1] not in _ARRIVALS
                or code[2] not in _COSTS
            ):
                raise ConfigError(f"unknown scenario code {code!r}")
        elif self.mode != "none":
            raise ConfigError("ADV2 replay runs without intercommunication")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("n_values", "k_values", "rho_values", "theta_values"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be non-empty")
        if any(n < 1 for n in self.n_values):
            raise ConfigError("N values must be >= 1")
        if any(k < 1 for k in self.k_values):
            raise ConfigError("K values must be >= 1")
        if any(not 0.0 < r < 1.0 for r in self.rho_values):
            raise ConfigError("rho values must lie in (0, 1)")
        if any(t is not None and t <= 0 for t in self.theta_values):
            raise ConfigError("theta overrides must be positive")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.n_events < 1:
            raise ConfigError("n_events must be >= 1")
        if not 0.0 <= self.perturb_pct <= 1.0:
            raise ConfigError("perturb_pct must be in [0, 1]")
        if self.avg_degree < 0:
            raise ConfigError("avg_degree must be >= 0")

    @property
    def points(self) -> list[tuple[int, int, float, float | None]]:
        return [
            (n, k, rho, theta)
            for n in self.n_values
            for k in self.k_values
            for rho in self.rho_values
            for theta in self.theta_values
        ]


_CONFIG_KEYS = {
    "scenario": "scenario_code",
    "mode": "mode",
    "N": "n_values",
    "K": "k_values",
    "rho": "rho_values",
    "theta": "theta_values",
    "runs": "runs",
    "n_events": "n_events",
    "seed": "seed",
    "perturb_pct": "perturb_pct",
    "avg_degree": "avg_degree",
}


def parse_config(text: str) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, field in _CONFIG_KEYS.items():
        if key not in raw:
            continue
        value = raw[key]
        if field in ("n_values", "k_values", "rho_values"):
            if not isinstance(value, list):
                raise ConfigError(f"{key} must be a list")
            kwargs[field] = tuple(value)
        elif field == "theta_values":
            if value is None:
                kwargs[field] = (None,)
            elif isinstance(value, list):
                kwargs[field] = tuple(value)
            else:
                kwargs[field] = (value,)
        else:
            kwargs[field] = value
    for required in ("scenario_code", "mode", "n_values", "k_values", "rho_values"):
        if required not in kwargs:
            name = next(k for k, f in _CONFIG_KEYS.items() if f == required)
            raise ConfigError(f"missing required config key {name!r}")
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


@dataclass(frozen=True)
class ResultRow:
    scenario_code: str
    mode: str
    n: int
    k: int
    rho: float
    theta: float | None
    seed: int | None
    alg_cost: float | None
    oracle_value: float | None
    ratio: float | None
    wall_time: float | None
    alpha: float | None
    error: str | None = None


def _alpha_for(code: str, n: int, n_events: int) -> float:
    if code == "ADV2" or _COSTS[code[2]] is UnityCost:
        return 1.0
    high = _MAGNITUDES[code[0]]().high(n)
    return math.log(2.0 + high * n_events) / math.log(2.0)


def _default_theta(
    mode: str, n: int, k: int, alpha: float, rho: float, x: float
) -> float:
    if mode == "none":
        return threshold_none(n, k, alpha, rho)
    if mode == "full":
        return threshold_full(n, k, alpha, rho)
    return threshold_partial(n, k, alpha, x, rho)


def _x_for(mode: str, n: int, graph: CommGraph | None) -> float:
    if mode in ("none", "nc"):
        return float(n)
    if mode in ("full", "fc"):
        return 1.0
    return float(len(graph.forward_nodes()))


def _seed_pair(cfg_seed: int, point_idx: int, rep: int) -> tuple[int, int]:
    ss = np.random.SeedSequence([cfg_seed, point_idx, rep])
    state = ss.generate_state(2)
    return int(state[0]), int(state[1])


def _build_graph(
    cfg: ScenarioConfig, n: int, mode: str, graph_seed: int
) -> CommGraph:
    g = gen_udg(n, cfg.avg_degree, graph_seed)
    fwd = greedy_mis(g) if mode == "n1" else greedy_cds(g)
    roles = [
        Role.FORWARD if v in fwd else Role.WITHHOLD for v in range(n)
    ]
    return g.with_roles(roles)


def _run_rep(
    cfg: ScenarioConfig,
    point_idx: int,
    rep: int,
    n: int,
    k: int,
    rho: float,
    theta_override: float | None,
) -> ResultRow:
    trace_seed, graph_seed = _seed_pair(cfg.seed, point_idx, rep)
    code = cfg.scenario_code
    alpha = _alpha_for(code, n, cfg.n_events)

    if code == "ADV2":
        cost_fn: CommCost = UnityCost()
        thetas = np.full(n, 1.0 / n)
        trace = gen_thm6_instance(n, thetas, 1.0, 1e-6)
        trace = perturb(trace, cfg.perturb_pct, trace_seed)
        theta = theta_override if theta_override is not None else 1.0 / n
        policy = ThresholdPolicy(
            theta if theta_override is not None else tuple(thetas)
        )
        graph = None
    else:
        cost_fn = _COSTS[code[2]]()
        spec = WorkloadSpec(
            _ARRIVALS[code[1]](),
            _MAGNITUDES[code[0]](),
            cfg.n_events,
            n,
            trace_seed,
        )
        trace = gen_trace(spec, ensure_k=k)
        graph = (
            _build_graph(cfg, n, cfg.mode, graph_seed)
            if cfg.mode in ("n1", "n2")
            else None
        )
        x = _x_for(cfg.mode, n, graph)
        theta = (
            theta_override
            if theta_override is not None
            else _default_theta(cfg.mode, n, k, alpha, rho, x)
        )
        policy = ThresholdPolicy(theta)

    t0 = time.perf_counter()
    if cfg.mode == "none":
        sched = run_thb(trace, policy, k, rho, cost_fn, LINEAR)
    elif cfg.mode == "full":
        sched = run_itc(trace, policy, k, rho, cost_fn, LINEAR)
    else:
        if graph is None:
            graph = (
                CommGraph.empty(n) if cfg.mode == "nc" else CommGraph.complete(n)
            )
        sched = run_net(trace, policy, k, rho, cost_fn, LINEAR, graph)
    wall = time.perf_counter() - t0

    alg_cost = evaluate(sched, trace, k, rho, cost_fn, LINEAR).total
    oracle = offline_lb(trace, k, rho, cost_fn, LINEAR).value
    return ResultRow(
        scenario_code=code,
        mode=cfg.mode,
        n=n,
        k=k,
        rho=rho,
        theta=theta,
        seed=trace_seed,
        alg_cost=alg_cost,
        oracle_value=oracle,
        ratio=alg_cost / oracle,
        wall_time=wall,
        alpha=alpha,
    )


def _error_row(
    cfg: ScenarioConfig,
    n: int,
    k: int,
    rho: float,
    theta: float | None,
    seed: int | None,
    message: str,
) -> ResultRow:
    return ResultRow(
        scenario_code=cfg.scenario_code,
        mode=cfg.mode,
        n=n,
        k=k,
        rho=rho,
        theta=theta,
        seed=seed,
        alg_cost=None,
        oracle_value=None,
        ratio=None,
        wall_time=None,
        alpha=None,
        error=message,
    )


def _run_point(args: tuple[ScenarioConfig, int]) -> list[ResultRow]:
    cfg, point_idx = args
    n, k, rho, theta = cfg.points[point_idx]
    if k > n:
        return [_error_row(cfg, n, k, rho, theta, None, f"K={k} exceeds N={n}")]
    if cfg.mode in ("n1", "n2") and cfg.avg_degree >= n:
        return [
            _error_row(
                cfg, n, k, rho, theta, None,
                f"avg_degree={cfg.avg_degree} not below N={n}",
            )
        ]
    rows = []
    for rep in range(cfg.runs):
        try:
            rows.append(_run_rep(cfg, point_idx, rep, n, k, rho, theta))
        except (ValidationError, GenerationError) as exc:
            seed, _ = _seed_pair(cfg.seed, point_idx, rep)
            rows.append(_error_row(cfg, n, k, rho, theta, seed, str(exc)))
    return rows


def worker_count(requested: int | None = None) -> int:
    limit = os.environ.get("DIA_THREADS")
    cap = int(limit) if limit else (os.cpu_count() or 1)
    if cap < 1:
        raise ValidationError("DIA_THREADS must be >= 1")
    return min(requested, cap) if requested else cap


def run_scenario(
    cfg: ScenarioConfig, workers: int | None = None
) -> list[ResultRow]:
    """Execute every sweep point x seed and return sorted result rows.

    Points are independent units; worker count never changes the result.
    """
    n_workers = worker_count(workers)
    units = [(cfg, idx) for idx in range(len(cfg.points))]
    if n_workers == 1 or len(units) == 1:
        chunks = [_run_point(u) for u in units]
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=min(n_workers, len(units))
        ) as pool:
            chunks = list(pool.map(_run_point, units))
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(
        key=lambda r: (
            r.scenario_code,
            r.n,
            r.k,
            r.rho,
            -1 if r.seed is None else r.seed,
        )
    )
    return rows


@dataclass(frozen=True)
class SummaryRow:
    scenario_code: str
    mode: str
    n: int
    k: int
    rho: float
    theta: float | None
    mean_ratio: float
    stddev_ratio: float
    min_ratio: float
    max_ratio: float
    count: int


def aggregate(rows: list[ResultRow]) -> list[SummaryRow]:
    """Per-sweep-point ratio statistics; error rows are skipped."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        if row.error is not None:
            continue
        key = (row.scenario_code, row.mode, row.n, row.k, row.rho, row.theta)
        groups.setdefault(key, []).append(row.ratio)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3], k[4], k[5] or 0.0)):
        ratios = groups[key]
        out.append(
            SummaryRow(
                *key,
                mean_ratio=statistics.fmean(ratios),
                stddev_ratio=statistics.pstdev(ratios),
                min_ratio=min(ratios),
                max_ratio=max(ratios),
                count=len(ratios),
            )
        )
    return out


# CSV emission: repr() for floats so repeated sweeps are byte-identical.

RESULT_COLUMNS = (
    "scenario_code,mode,N,K,rho,theta,seed,alg_cost,oracle_value,ratio,"
    "wall_time,alpha,error"
)
SUMMARY_COLUMNS = (
    "scenario_code,mode,N,K,rho,theta,mean_ratio,stddev_ratio,min_ratio,"
    "max_ratio,count"
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[ResultRow], timing: bool = False) -> str:
    lines = [RESULT_COLUMNS]
    for r in rows:
        lines.append(
            ",".join(
                (
                    r.scenario_code,
                    r.mode,
                    str(r.n),
                    str(r.k),
                    _cell(r.rho),
                    _cell(r.theta),
                    _cell(r.seed),
                    _cell(r.alg_cost),
                    _cell(r.oracle_value),
                    _cell(r.ratio),
                    _cell(r.wall_time) if timing else "",
                    _cell(r.alpha),
                    r.error or "",
                )
            )
        )
    return "\n".join(lines) + "\n"


def summary_to_csv(summaries: list[SummaryRow]) -> str:
    lines = [SUMMARY_COLUMNS]
    for s in summaries:
        lines.append(
            ",".join(
                (
                    s.scenario_code,
                    s.mode,
                    str(s.n),
                    str(s.k),
                    _cell(s.rho),
                    _cell(s.theta),
                    _cell(s.mean_ratio),
                    _cell(s.stddev_ratio),
                    _cell(s.min_ratio),
                    _cell(s.max_ratio),
                    str(s.count),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_results(path: str, rows: list[ResultRow], timing: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(rows_to_csv(rows, timing=timing))


def write_summary(path: str, summaries: list[SummaryRow]) -> None:
    with open(path, "w") as fh:
        fh.write(summary_to_csv(summaries))
