"""Threshold-triggered online reporting algorithms and their tuning rules.

Each system accumulates latency penalty for its locally unreported events
and fires a report the instant that penalty reaches theta times the cost of
the report it would send. Three intercommunication settings share one
continuous-time engine:

  * none: systems run independently (run_thb);
  * full: every report is overheard by everyone, and events already
    reported K times are dropped from all pending sets (run_itc);
  * partial: overhearing is restricted to graph neighbors, with
    forward-role nodes relaying identifiers of overheard reports (run_net).

The closed-form threshold settings below balance worst-case report cost
against worst-case latency; each carries its proven competitive ratio.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from aggsim.graph import CommGraph, Role
from aggsim.model import (
    CommCost,
    EventTrace,
    LatencyFn,
    LinearLatency,
    LINEAR,
    Report,
    ReportSchedule,
    ValidationError,
)

__all__ = [
    "ThresholdPolicy",
    "NoIntercomm",
    "FullIntercomm",
    "PartialIntercomm",
    "IntercommMode",
    "balance_root",
    "threshold_none",
    "threshold_full",
    "threshold_partial",
    "ratio_none",
    "ratio_full",
    "ratio_partial",
    "crossing_time",
    "run",
    "run_thb",
    "run_itc",
    "run_net",
]


# ------------------------------------------------------------------ policy


@dataclass(frozen=True)
class ThresholdPolicy:
    """Trigger threshold: one scalar, or one value per system.

    With `heterogeneous` set, the effective threshold becomes
    theta + epsilon * (cost of the would-be report), which deterministically
    staggers otherwise simultaneous crossings so the cheapest report fires
    first. epsilon defaults to 1e-6 * theta.
    """

    theta: float | tuple[float, ...]
    heterogeneous: bool = False
    epsilon: float | None = None

    def __post_init__(self):
        th = self.theta
        if isinstance(th, (list, np.ndarray)):
            th = tuple(float(v) for v in th)
            object.__setattr__(self, "theta", th)
        values = th if isinstance(th, tuple) else (th,)
        if not values or any(
            not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v))
            for v in values
        ):
            raise ValidationError(f"theta must be positive and finite, got {th}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")

    def theta_for(self, i: int) -> float:
        if isinstance(self.theta, tuple):
            return self.theta[i]
        return float(self.theta)

    def epsilon_for(self, i: int) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return 1e-6 * self.theta_for(i)

    def check_systems(self, n: int) -> None:
        if isinstance(self.theta, tuple) and len(self.theta) != n:
            raise ValidationError(
                f"theta vector has {len(self.theta)} entries for {n} systems"
            )


@dataclass(frozen=True)
class NoIntercomm:
    """Systems never overhear each other."""


@dataclass(frozen=True)
class FullIntercomm:
    """Everyone overhears every report; ties fire in priority order."""

    priority: tuple[int, ...] | None = None


@dataclass(frozen=True)
class PartialIntercomm:
    """Overhearing restricted to neighbors in a communication graph."""

    graph: CommGraph


IntercommMode = NoIntercomm | FullIntercomm | PartialIntercomm


# ------------------------------------------------- threshold closed forms


def _check_params(n: int, k: int, alpha: float, rho: float | None) -> None:
    if n < 1:
        raise ValidationError(f"need at least one system, got n={n}")
    if not 1 <= k <= n:
        raise ValidationError(f"K must be in [1, {n}], got {k}")
    if alpha < 1:
        raise ValidationError(f"cost ratio alpha must be >= 1, got {alpha}")
    if rho is not None and not 0 < rho < 1:
        raise ValidationError(f"rho must lie in (0, 1), got {rho}")


def threshold_none(n: int, k: int, alpha: float, rho: float) -> float:
    """Threshold for independent systems: K*rho / (alpha*N*(1-rho))."""
    _check_params(n, k, alpha, rho)
    return k * rho / (alpha * n * (1.0 - rho))


def ratio_none(n: int, k: int, alpha: float) -> float:
    """Proven competitive ratio without intercommunication: alpha*N/K + 1."""
    _check_params(n, k, alpha, None)
    return alpha * n / k + 1.0


def balance_root(n: int, k: int, alpha: float, x: float = 1.0) -> float:
    """Positive root phi of phi + 1 = (alpha/K) * (N/phi + x).

    phi balances the two sides of the cost bound; x is the network
    parameter (x=1: full intercommunication, x=N: none, where phi
    collapses to alpha*N/K exactly).
    """
    _check_params(n, k, alpha, None)
    if not 1 <= x <= n:
        raise ValidationError(f"x must lie in [1, {n}], got {x}")
    ax = alpha * x
    return (math.sqrt((ax - k) ** 2 + 4.0 * alpha * k * n) + ax - k) / (2.0 * k)


def threshold_full(n: int, k: int, alpha: float, rho: float) -> float:
    """Threshold under full intercommunication: rho / ((1-rho) * phi)."""
    _check_params(n, k, alpha, rho)
    return rho / ((1.0 - rho) * balance_root(n, k, alpha, 1.0))


def ratio_full(n: int, k: int, alpha: float) -> float:
    """Proven competitive ratio under full intercommunication: phi + 1."""
    return balance_root(n, k, alpha, 1.0) + 1.0


def threshold_partial(
    n: int, k: int, alpha: float, x: float, rho: float
) -> float:
    """Threshold under partial intercommunication with network parameter x."""
    _check_params(n, k, alpha, rho)
    return rho / ((1.0 - rho) * balance_root(n, k, alpha, x))


def ratio_partial(n: int, k: int, alpha: float, x: float) -> float:
    """Competitive ratio under partial intercommunication: phi_x + 1."""
    return balance_root(n, k, alpha, x) + 1.0


# -------------------------------------------------------- crossing solver


def crossing_time(
    pending: Sequence[tuple[float, float]],
    target: float,
    floor: float,
    lat_fn: LatencyFn = LINEAR,
) -> float:
    """Earliest t >= floor at which accumulated latency reaches target.

    `pending` holds (weight, event_time) pairs with positive total weight.
    Solved in closed form for linear latency; any other monotone latency
    falls back to bracketed bisection at 1e-9 absolute tolerance.
    """
    if isinstance(lat_fn, LinearLatency):
        a = 0.0
        b = 0.0
        for w, te in pending:
            a += w
            b += w * te
        if a <= 0:
            raise ValidationError("crossing needs positive total weight")
        return max((target + b) / a, floor)

    def lat(t: float) -> float:
        return sum(lat_fn.value(w, te, t) for w, te in pending)

    lo = max(floor, max(te for _, te in pending))
    if lat(lo) >= target:
        return lo
    step = 1.0
    hi = lo + step
    while lat(hi) < target:
        step *= 2.0
        hi = lo + step
        if step > 1e18:
            raise ValidationError("latency never reaches the trigger target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lat(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9:
            break
    return hi


# ------------------------------------------------------------- the engine


class _Engine:
    """Continuous-time trigger engine shared by the three algorithms.

    State per system: the pending rows with running weight sums, a floor
    below which the next report cannot happen (latest arrival or removal
    instant), and a version counter that invalidates stale heap entries.
    The heap is keyed by (crossing time, priority rank, system) so
    simultaneous crossings fire one at a time in priority order; every fire
    updates shared counts before the next candidate is examined, which
    realizes same-instant cascades.
    """

    def __init__(
        self,
        trace: EventTrace,
        policy: ThresholdPolicy,
        k: int,
        cost_fn: CommCost,
        lat_fn: LatencyFn,
        mode: IntercommMode,
    ):
        self.trace = trace
        self.policy = policy
        self.k = k
        self.cost_fn = cost_fn
        self.lat_fn = lat_fn
        self.mode = mode
        n = trace.n_systems
        self.n = n
        self.linear = isinstance(lat_fn, LinearLatency)

        self.pend: list[list[int]] = [[] for _ in range(n)]
        self.pend_set: list[set[int]] = [set() for _ in range(n)]
        self.acc_w = [0.0] * n
        self.acc_wt = [0.0] * n
        self.floor = [0.0] * n
        self.version = [0] * n
        self.out: list[list[Report]] = [[] for _ in range(n)]
        self.heap: list[tuple[float, int, int, int]] = []

        if isinstance(mode, FullIntercomm):
            pri = mode.priority
            if pri is None:
                pri = tuple(range(n))
            if sorted(pri) != list(range(n)):
                raise ValidationError(
                    f"priority must be a permutation of 0..{n - 1}"
                )
            self.rank = [0] * n
            for pos, i in enumerate(pri):
                self.rank[i] = pos
            self.cnt = [0] * trace.n_events
            self.holders: list[set[int]] = [set() for _ in range(trace.n_events)]
        elif isinstance(mode, PartialIntercomm):
            g = mode.graph
            if g.n != n:
                raise ValidationError(
                    f"graph has {g.n} nodes for {n} systems"
                )
            self.rank = list(range(n))
            self.known: list[dict[int, set[int]]] = [dict() for _ in range(n)]
            self.fwd_sent: list[dict[int, int]] = [dict() for _ in range(n)]
            self.neighbors = [g.neighbors(i) for i in range(n)]
            self.is_forward = [g.roles[i] is Role.FORWARD for i in range(n)]
        else:
            self.rank = list(range(n))

    # -- per-system trigger bookkeeping

    def _target(self, i: int) -> float:
        com = self.cost_fn.of_total(self.acc_w[i])
        theta = self.policy.theta_for(i)
        if self.policy.heterogeneous:
            theta = theta + self.policy.epsilon_for(i) * com
        return theta * com

    def _push(self, i: int) -> None:
        if not self.pend[i]:
            return
        target = self._target(i)
        if self.linear:
            t_star = (target + self.acc_wt[i]) / self.acc_w[i]
            if t_star < self.floor[i]:
                t_star = self.floor[i]
        else:
            pairs = [
                (float(self.trace.weights[r][i]), float(self.trace.times[r]))
                for r in self.pend[i]
            ]
            t_star = crossing_time(pairs, target, self.floor[i], self.lat_fn)
        heapq.heappush(self.heap, (t_star, self.rank[i], i, self.version[i]))

    def _add_arrival(self, i: int, row: int, t: float, w: float) -> None:
        self.pend[i].append(row)
        self.pend_set[i].add(row)
        self.acc_w[i] += w
        self.acc_wt[i] += w * t
        self.floor[i] = t
        self.version[i] += 1
        if isinstance(self.mode, FullIntercomm):
            self.holders[row].add(i)
        self._push(i)

    def _remove(self, i: int, row: int, t: float) -> None:
        """Drop a delivered event from i's pending set at instant t."""
        self.pend[i].remove(row)
        self.pend_set[i].discard(row)
        w = float(self.trace.weights[row][i])
        self.acc_w[i] -= w
        self.acc_wt[i] -= w * float(self.trace.times[row])
        if not self.pend[i]:
            self.acc_w[i] = 0.0
            self.acc_wt[i] = 0.0
        if t > self.floor[i]:
            self.floor[i] = t
        self.version[i] += 1
        self._push(i)

    # -- firing and intercommunication

    def _fire(self, i: int, t: float) -> None:
        rows = list(self.pend[i])
        ids = tuple(self.trace.event_ids[r] for r in rows)
        self.pend[i].clear()
        self.pend_set[i].clear()
        self.acc_w[i] = 0.0
        self.acc_wt[i] = 0.0
        self.floor[i] = t
        self.version[i] += 1

        forwarded: tuple[int, ...] = ()
        if isinstance(self.mode, FullIntercomm):
            for row in rows:
                self.holders[row].discard(i)
            for row in rows:
                self.cnt[row] += 1
                if self.cnt[row] == self.k:
                    for r in sorted(self.holders[row]):
                        self._remove(r, row, t)
                    self.holders[row].clear()
        elif isinstance(self.mode, PartialIntercomm):
            forwarded = self._propagate_net(i, rows, t)
        self.out[i].append(Report(t, ids, forwarded))

    def _propagate_net(
        self, i: int, rows: list[int], t: float
    ) -> tuple[int, ...]:
        """Share i's report with its neighbors; returns the forwarded ids.

        The payload maps each event row to the reporting systems i can
        vouch for: itself for rows it originates now, plus its whole
        knowledge table when it has the forward role. Receivers merge the
        payload and drop pending events whose known origin count reaches K.
        Each (event, knowledge-size) pair is forwarded at most once.
        """
        known_i = self.known[i]
        payload: dict[int, set[int]] = {row: {i} for row in rows}
        fwd_ids: list[int] = []
        if self.is_forward[i]:
            for row, origins in known_i.items():
                if row in payload:
                    payload[row] = payload[row] | origins
                    continue
                if len(origins) > self.fwd_sent[i].get(row, 0):
                    payload[row] = set(origins)
                    fwd_ids.append(row)
                    self.fwd_sent[i][row] = len(origins)
        for row in rows:
            known_i.setdefault(row, set()).add(i)
        receivers = sorted(set(self.neighbors[i]))
        for r in receivers:
            known_r = self.known[r]
            for row, origins in payload.items():
                merged = known_r.setdefault(row, set())
                merged |= origins
                if len(merged) >= self.k and row in self.pend_set[r]:
                    self._remove(r, row, t)
        return tuple(self.trace.event_ids[r] for r in sorted(fwd_ids))

    # -- main loop

    def _drain(self, until: float) -> None:
        """Fire every crossing strictly before `until`, cascades included."""
        heap = self.heap
        while heap:
            t_star, _, i, ver = heap[0]
            if ver != self.version[i]:
                heapq.heappop(heap)
                continue
            if t_star >= until:
                break
            heapq.heappop(heap)
            self._fire(i, t_star)

    def run(self) -> ReportSchedule:
        trace = self.trace
        weights = trace.weights
        times = trace.times
        for row in range(trace.n_events):
            t = float(times[row])
            self._drain(t)
            for i in np.nonzero(weights[row] > 0)[0]:
                self._add_arrival(int(i), row, t, float(weights[row][int(i)]))
        self._drain(math.inf)
        return ReportSchedule(tuple(tuple(r) for r in self.out))


def _run_checked(
    trace: EventTrace,
    policy: ThresholdPolicy,
    k: int,
    rho: float,
    cost_fn: CommCost,
    lat_fn: LatencyFn,
    mode: IntercommMode,
) -> ReportSchedule:
    if not 0 < rho < 1:
        raise ValidationError(f"rho must lie in (0, 1), got {rho}")
    if not 1 <= k <= trace.n_systems:
        raise ValidationError(
            f"K must be in [1, {trace.n_systems}], got {k}"
        )
    policy.check_systems(trace.n_systems)
    return _Engine(trace, policy, k, cost_fn, lat_fn, mode).run()


def run(
    trace: EventTrace,
    policy: ThresholdPolicy,
    k: int,
    rho: float,
    cost_fn: CommCost,
    lat_fn: LatencyFn,
    mode: IntercommMode,
) -> ReportSchedule:
    """Run the threshold algorithm matching `mode` on one trace."""
    return _run_checked(trace, policy, k, rho, cost_fn, lat_fn, mode)


def run_thb(
    trace: EventTrace,
    policy: ThresholdPolicy,
    k: int,
    rho: float,
    cost_fn: CommCost,
    lat_fn: LatencyFn,
) -> ReportSchedule:
    """Independent threshold reporting; every observer reports everything."""
    return _run_checked(
        trace, policy, k, rho, cost_fn, lat_fn, NoIntercomm()
    )


def run_itc(
    trace: EventTrace,
    policy: ThresholdPolicy,
    k: int,
    rho: float,
    cost_fn: CommCost,
    lat_fn: LatencyFn,
    priority: Sequence[int] | None = None,
) -> ReportSchedule:
    """Full intercommunication: drop events already reported K times."""
    pri = tuple(priority) if priority is not None else None
    return _run_checked(
        trace, policy, k, rho, cost_fn, lat_fn, FullIntercomm(pri)
    )


def run_net(
    trace: EventTrace,
    policy: ThresholdPolicy,
    k: int,
    rho: float,
    cost_fn: CommCost,
    lat_fn: LatencyFn,
    graph: CommGraph,
) -> ReportSchedule:
    """Graph-restricted intercommunication with forward-role relaying."""
    return _run_checked(
        trace, policy, k, rho, cost_fn, lat_fn, PartialIntercomm(graph)
    )
