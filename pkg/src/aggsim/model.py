"""Core data types and the schedule evaluator.

The problem: N systems observe a shared stream of events. Event j appears at
time t_j; system i sees it with measurement weight w[i, j] >= 0 (zero means
unobserved). Each system sends reports, batches of locally observed events, to
a base station. An event counts as delivered once K distinct observers have
reported it; its latency accrues until the K-th such report. The objective
blends total report cost and total latency:

    total = rho * sum(report costs) + (1 - rho) * sum(per-observation latency)

This module holds the trace and schedule types, the report cost and latency
function families, and a pure evaluator for that objective.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "ValidationError",
    "TraceFormatError",
    "Event",
    "EventTrace",
    "CommCost",
    "UnityCost",
    "LogCost",
    "ClampedLogCost",
    "CostBounds",
    "LatencyFn",
    "LinearLatency",
    "LINEAR",
    "Report",
    "ReportSchedule",
    "CostBreakdown",
    "gamma_k",
    "evaluate",
    "accumulate_lat",
    "accumulate_com",
    "parse_cost",
]


class ValidationError(ValueError):
    """Raised when an input violates a documented model invariant."""


class TraceFormatError(ValidationError):
    """Raised on malformed trace CSV; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Event:
    """One event: its id, appearance time, and the per-system weight vector."""

    event_id: int
    time: float
    measurements: tuple[float, ...]


class EventTrace:
    """Immutable ordered event stream with an (m, N) weight matrix.

    Weights are stored as a read-only float64 array with one row per event and
    one column per system. Times must be strictly increasing and nonnegative,
    weights nonnegative and finite.
    """

    __slots__ = ("times", "weights", "event_ids", "_id_to_index")

    def __init__(
        self,
        times: Sequence[float] | np.ndarray,
        weights: Sequence[Sequence[float]] | np.ndarray,
        event_ids: Sequence[int] | None = None,
    ):
        t = np.asarray(times, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64)
        if t.ndim != 1:
            raise ValidationError("times must be one-dimensional")
        if w.ndim != 2 or w.shape[0] != t.shape[0]:
            raise ValidationError(
                f"weights must have shape (n_events, n_systems); got {w.shape} "
                f"for {t.shape[0]} events"
            )
        if t.shape[0] > 0:
            if not np.all(np.isfinite(t)) or float(t[0]) < 0.0:
                raise ValidationError("event times must be finite and nonnegative")
            if np.any(np.diff(t) <= 0):
                bad = int(np.argmax(np.diff(t) <= 0)) + 1
                raise ValidationError(
                    f"event times must be strictly increasing (violated at row {bad})"
                )
        if w.size and (not np.all(np.isfinite(w)) or np.any(w < 0)):
            raise ValidationError("measurements must be finite and nonnegative")
        if event_ids is None:
            ids = tuple(range(t.shape[0]))
        else:
            ids = tuple(int(e) for e in event_ids)
            if len(ids) != t.shape[0]:
                raise ValidationError("event_ids length must match times")
            if len(set(ids)) != len(ids):
                raise ValidationError("event ids must be unique")
        t = t.copy()
        w = w.copy()
        t.setflags(write=False)
        w.setflags(write=False)
        self.times = t
        self.weights = w
        self.event_ids = ids
        self._id_to_index = {e: k for k, e in enumerate(ids)}

    @classmethod
    def from_events(cls, events: Sequence[Event], n_systems: int) -> "EventTrace":
        for ev in events:
            if len(ev.measurements) != n_systems:
                raise ValidationError(
                    f"event {ev.event_id} has {len(ev.measurements)} measurements, "
                    f"expected {n_systems}"
                )
        times = [ev.time for ev in events]
        weights = np.array([ev.measurements for ev in events], dtype=np.float64)
        weights = weights.reshape(len(events), n_systems)
        return cls(times, weights, [ev.event_id for ev in events])

    @property
    def n_events(self) -> int:
        return int(self.times.shape[0])

    @property
    def n_systems(self) -> int:
        return int(self.weights.shape[1])

    def __len__(self) -> int:
        return self.n_events

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events())

    def events(self) -> list[Event]:
        return [
            Event(self.event_ids[k], float(self.times[k]), tuple(self.weights[k]))
            for k in range(self.n_events)
        ]

    def index_of(self, event_id: int) -> int:
        try:
            return self._id_to_index[event_id]
        except KeyError:
            raise ValidationError(f"unknown event id {event_id!r}") from None

    def time_of(self, event_id: int) -> float:
        return float(self.times[self.index_of(event_id)])

    def weight(self, system: int, event_id: int) -> float:
        return float(self.weights[self.index_of(event_id)][system])

    def observer_count(self, event_id: int) -> int:
        return int(np.count_nonzero(self.weights[self.index_of(event_id)] > 0))

    def check_k_feasible(self, k: int) -> None:
        """Every event must be observed (w > 0) by at least k systems."""
        if not 1 <= k <= self.n_systems:
            raise ValidationError(f"K must be in [1, {self.n_systems}], got {k}")
        counts = np.count_nonzero(self.weights > 0, axis=1)
        bad = np.nonzero(counts < k)[0]
        if bad.size:
            names = [self.event_ids[int(b)] for b in bad[:5]]
            raise ValidationError(
                f"trace is not {k}-feasible: events {names} have fewer than "
                f"{k} observers"
            )

    def split_at(self, index: int) -> tuple["EventTrace", "EventTrace"]:
        """Split into a prefix of `index` events and the remaining suffix.

        Both halves keep original times and event ids.
        """
        if not 0 <= index <= self.n_events:
            raise ValidationError(f"split index {index} out of range")
        left = EventTrace(
            self.times[:index], self.weights[:index], self.event_ids[:index]
        )
        right = EventTrace(
            self.times[index:], self.weights[index:], self.event_ids[index:]
        )
        return left, right

    def with_weights(self, weights: np.ndarray) -> "EventTrace":
        return EventTrace(self.times, weights, self.event_ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventTrace):
            return NotImplemented
        return (
            self.event_ids == other.event_ids
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"EventTrace(n_events={self.n_events}, n_systems={self.n_systems})"

    # CSV round trip: header `event_id,time,w_1,...,w_N`, full-precision reprs.
    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["event_id", "time"] + [f"w_{i + 1}" for i in range(self.n_systems)]
            )
            for k in range(self.n_events):
                row = [str(self.event_ids[k]), repr(float(self.times[k]))]
                row.extend(repr(float(v)) for v in self.weights[k])
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str) -> "EventTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise TraceFormatError("empty file", line=1) from None
            if len(header) < 3 or header[:2] != ["event_id", "time"]:
                raise TraceFormatError(
                    "header must be event_id,time,w_1,...,w_N", line=1
                )
            n_systems = len(header) - 2
            ids: list[int] = []
            times: list[float] = []
            rows: list[list[float]] = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != n_systems + 2:
                    raise TraceFormatError(
                        f"expected {n_systems + 2} fields, got {len(row)}",
                        line=lineno,
                    )
                try:
                    ids.append(int(row[0]))
                    times.append(float(row[1]))
                    rows.append([float(v) for v in row[2:]])
                except ValueError as exc:
                    raise TraceFormatError(str(exc), line=lineno) from None
            try:
                return cls(times, np.array(rows, dtype=np.float64).reshape(
                    len(rows), n_systems
                ), ids)
            except ValidationError as exc:
                raise TraceFormatError(str(exc)) from None


@dataclass(frozen=True)
class CostBounds:
    """Per-report cost range: smallest, largest, and their ratio alpha."""

    c_min: float
    c_max: float

    def __post_init__(self):
        if not (0 < self.c_min <= self.c_max):
            raise ValidationError(
                f"need 0 < c_min <= c_max, got ({self.c_min}, {self.c_max})"
            )

    @property
    def alpha(self) -> float:
        return self.c_max / self.c_min


class CommCost:
    """Cost of one report as a function of the reported measurement set.

    All variants in scope depend on the set only through the sum of its
    weights, are positive, non-decreasing, and subadditive. The cost of an
    empty set is defined as the variant's minimum cost c_min, which every
    variant here realizes naturally at total weight zero.
    """

    name: str = "abstract"

    def of_total(self, total_weight: float) -> float:
        raise NotImplementedError

    def of_weights(self, weights: Iterable[float]) -> float:
        return self.of_total(float(sum(weights)))

    def of_total_array(self, totals: np.ndarray) -> np.ndarray:
        """Vectorized of_total; subclasses override for speed."""
        return np.array([self.of_total(float(s)) for s in totals])

    @property
    def c_min(self) -> float:
        return self.of_total(0.0)

    def bounds(self, max_total_weight: float) -> CostBounds:
        """Cost range when a report's total weight is at most the given cap."""
        return CostBounds(self.c_min, self.of_total(float(max_total_weight)))

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class UnityCost(CommCost):
    """Every report costs exactly 1 regardless of content."""

    name = "unity"

    def of_total(self, total_weight: float) -> float:
        return 1.0

    def of_total_array(self, totals: np.ndarray) -> np.ndarray:
        return np.ones_like(totals)


@dataclass(frozen=True, repr=False)
class LogCost(CommCost):
    """cost = log(offset + total weight); offset >= 2 keeps cost >= log 2."""

    offset: float = 2.0
    name: str = field(default="log", init=False)

    def __post_init__(self):
        if self.offset < 2.0:
            raise ValidationError(f"log cost offset must be >= 2, got {self.offset}")

    def of_total(self, total_weight: float) -> float:
        return math.log(self.offset + total_weight)

    def of_total_array(self, totals: np.ndarray) -> np.ndarray:
        return np.log(self.offset + totals)

    def __repr__(self) -> str:
        return f"LogCost(offset={self.offset})"


@dataclass(frozen=True, repr=False)
class ClampedLogCost(CommCost):
    """cost = c1 * log(clamp(total, w_lo, w_hi)) + c0.

    Validation enforces positivity (c_min > 0) and the subadditivity margin
    c_min >= c1 * log 2, which covers the worst split of a small total.
    """

    c1: float
    c0: float
    w_lo: float
    w_hi: float
    name: str = field(default="clamped-log", init=False)

    def __post_init__(self):
        if not (0 < self.w_lo <= self.w_hi):
            raise ValidationError("need 0 < w_lo <= w_hi")
        if self.c1 <= 0:
            raise ValidationError("need c1 > 0 for a non-decreasing cost")
        cmin = self.c1 * math.log(self.w_lo) + self.c0
        if cmin <= 0:
            raise ValidationError("clamped-log cost must be positive at w_lo")
        if cmin < self.c1 * math.log(2.0):
            raise ValidationError(
                "subadditivity needs c1*log(w_lo) + c0 >= c1*log(2)"
            )

    def of_total(self, total_weight: float) -> float:
        clamped = min(max(total_weight, self.w_lo), self.w_hi)
        return self.c1 * math.log(clamped) + self.c0

    def of_total_array(self, totals: np.ndarray) -> np.ndarray:
        return self.c1 * np.log(np.clip(totals, self.w_lo, self.w_hi)) + self.c0

    def bounds(self, max_total_weight: float) -> CostBounds:
        return CostBounds(self.of_total(0.0), self.of_total(self.w_hi))

    def __repr__(self) -> str:
        return (
            f"ClampedLogCost(c1={self.c1}, c0={self.c0}, "
            f"w_lo={self.w_lo}, w_hi={self.w_hi})"
        )


def parse_cost(name: str) -> CommCost:
    """Map a scenario cost code or name to a cost function instance."""
    key = name.strip().lower()
    if key in ("u", "unity"):
        return UnityCost()
    if key in ("l", "log"):
        return LogCost()
    raise ValidationError(f"unknown cost function {name!r} (use unity or log)")


class LatencyFn:
    """Latency penalty of one observation held back until time t."""

    name: str = "abstract"

    def value(self, weight: float, event_time: float, t: float) -> float:
        raise NotImplementedError


class LinearLatency(LatencyFn):
    """penalty = weight * (t - event_time); zero for unobserved events."""

    name = "linear"

    def value(self, weight: float, event_time: float, t: float) -> float:
        if weight == 0.0:
            return 0.0
        return weight * (t - event_time)

    def __repr__(self) -> str:
        return "LinearLatency()"


LINEAR = LinearLatency()


@dataclass(frozen=True)
class Report:
    """One report: its emission time and the event ids it carries.

    `event_ids` are events the sender observed and originates here; entries in
    `forwarded_ids` are relayed identifiers that carry no measurement weight,
    never contribute report cost, and never count toward delivery.
    """

    time: float
    event_ids: tuple[int, ...]
    forwarded_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class ReportSchedule:
    """Per-system report sequences; the full decision output of an algorithm."""

    per_system: tuple[tuple[Report, ...], ...]

    @property
    def n_systems(self) -> int:
        return len(self.per_system)

    def total_reports(self) -> int:
        return sum(len(reports) for reports in self.per_system)

    def validate(self, trace: EventTrace) -> None:
        """Check the schedule invariants against a trace.

        Raises ValidationError listing the first offending (system, report,
        event) triple when a report precedes an event it carries, when report
        times fail to increase, or when a system originates an event it did
        not observe.
        """
        if self.n_systems != trace.n_systems:
            raise ValidationError(
                f"schedule has {self.n_systems} systems, trace has "
                f"{trace.n_systems}"
            )
        for i, reports in enumerate(self.per_system):
            prev = -math.inf
            for k, rep in enumerate(reports):
                if not rep.time > prev:
                    raise ValidationError(
                        f"system {i}: report times must strictly increase "
                        f"(report {k} at {rep.time})"
                    )
                prev = rep.time
                for j in rep.event_ids + rep.forwarded_ids:
                    if trace.time_of(j) > rep.time:
                        raise ValidationError(
                            f"report precedes event: system {i}, report {k}, "
                            f"event {j}"
                        )
                for j in rep.event_ids:
                    if trace.weight(i, j) <= 0.0:
                        raise ValidationError(
                            f"system {i}, report {k} originates event {j} "
                            f"with zero measurement (must be forwarded)"
                        )


@dataclass(frozen=True)
class CostBreakdown:
    """Evaluated objective: report cost, latency, and their rho-blend.

    If some event was never reported K times by observers, `latency` and
    `total` are +inf and the event ids are listed in `infeasible_events`.
    """

    comm: float
    latency: float
    total: float
    infeasible_events: tuple[int, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.infeasible_events


def gamma_k(
    schedule: ReportSchedule, trace: EventTrace, j: int, k: int
) -> float:
    """Time of the K-th report of event j by systems that observed it.

    Qualifying reports are those whose `event_ids` contain j and whose sender
    has positive weight for j; forwarded identifiers never qualify. Ties are
    broken by (time, system index, report index), which cannot change the
    returned time, only the identity of the K-th report. Returns +inf when
    fewer than k qualifying reports exist.
    """
    idx = trace.index_of(j)
    if not 1 <= k <= trace.n_systems:
        raise ValidationError(f"K must be in [1, {trace.n_systems}], got {k}")
    hits: list[tuple[float, int, int]] = []
    for i, reports in enumerate(schedule.per_system):
        if trace.weights[idx][i] <= 0.0:
            continue
        for r, rep in enumerate(reports):
            if j in rep.event_ids:
                hits.append((rep.time, i, r))
    if len(hits) < k:
        return math.inf
    hits.sort()
    return hits[k - 1][0]


def evaluate(
    schedule: ReportSchedule,
    trace: EventTrace,
    k: int,
    rho: float,
    cost_fn: CommCost,
    lat_fn: LatencyFn,
) -> CostBreakdown:
    """Score a schedule against the blended objective.

    Report cost sums cost_fn over each report's own originated measurements.
    Latency charges every positive observation (i, j) from the event time to
    the global K-th-report time of j, regardless of when system i itself
    reported it.
    """
    if not 0 < rho < 1:
        raise ValidationError(f"rho must lie in (0, 1), got {rho}")
    if not 1 <= k <= trace.n_systems:
        raise ValidationError(f"K must be in [1, {trace.n_systems}], got {k}")
    schedule.validate(trace)

    comm = 0.0
    # Delivery times: k-th smallest qualifying report time per event.
    hit_times: dict[int, list[float]] = {e: [] for e in trace.event_ids}
    for i, reports in enumerate(schedule.per_system):
        for rep in reports:
            total_w = 0.0
            for j in rep.event_ids:
                w = trace.weights[trace.index_of(j)][i]
                total_w += w
                hit_times[j].append(rep.time)
            comm += cost_fn.of_total(total_w)

    gammas = np.empty(trace.n_events, dtype=np.float64)
    infeasible: list[int] = []
    for pos, j in enumerate(trace.event_ids):
        times = hit_times[j]
        if len(times) < k:
            gammas[pos] = math.inf
            infeasible.append(j)
        else:
            times.sort()
            gammas[pos] = times[k - 1]

    if infeasible:
        return CostBreakdown(
            comm=comm,
            latency=math.inf,
            total=math.inf,
            infeasible_events=tuple(infeasible),
        )

    if isinstance(lat_fn, LinearLatency):
        row_sums = trace.weights.sum(axis=1)
        latency = float(np.dot(row_sums, gammas - trace.times))
    else:
        latency = 0.0
        for pos in range(trace.n_events):
            t_j = float(trace.times[pos])
            g = float(gammas[pos])
            for i in range(trace.n_systems):
                w = float(trace.weights[pos][i])
                if w > 0.0:
                    latency += lat_fn.value(w, t_j, g)

    total = rho * comm + (1.0 - rho) * latency
    return CostBreakdown(comm=comm, latency=latency, total=total)


def accumulate_lat(
    trace: EventTrace,
    i: int,
    t1: float,
    t2: float,
    unreported: Iterable[int],
    lat_fn: LatencyFn,
) -> float:
    """Latency system i would have accrued by t2 for its pending events.

    Sums lat_fn over events in `unreported` whose appearance time lies in the
    half-open window (t1, t2]. The caller supplies the algorithm's current
    pending set.
    """
    if t1 > t2:
        raise ValidationError(f"window start {t1} exceeds end {t2}")
    total = 0.0
    for j in unreported:
        idx = trace.index_of(j)
        t_j = float(trace.times[idx])
        if t1 < t_j <= t2:
            total += lat_fn.value(float(trace.weights[idx][i]), t_j, t2)
    return total


def accumulate_com(
    trace: EventTrace,
    i: int,
    unreported: Iterable[int],
    cost_fn: CommCost,
) -> float:
    """Cost of the report system i would send for its pending events.

    An empty pending set evaluates to the cost function's minimum, keeping the
    trigger ratio's denominator positive.
    """
    total_w = 0.0
    for j in unreported:
        total_w += float(trace.weights[trace.index_of(j)][i])
    return cost_fn.of_total(total_w)
