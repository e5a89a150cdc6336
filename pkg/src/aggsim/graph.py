"""Communication graphs: generation, role assignment, and analysis.

Systems may overhear each other's reports only along edges of an undirected
communication graph. Each node carries a role: a withhold node merely
suppresses its own redundant reports, while a forward node also relays
identifiers of overheard reports to its neighbors. The network parameter x,
the largest number of systems that can be forced to report the same
information, interpolates the competitive ratio between full
intercommunication (x=1) and none (x=N).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from aggsim.model import ValidationError

__all__ = [
    "Role",
    "CommGraph",
    "GraphFormatError",
    "GenerationError",
    "gen_udg",
    "greedy_mis",
    "greedy_cds",
    "compute_x",
    "XResult",
]


class GraphFormatError(ValidationError):
    """Raised on malformed graph text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class GenerationError(RuntimeError):
    """Raised when random graph generation exhausts its retry budget."""


class Role(enum.Enum):
    WITHHOLD = "withhold"
    FORWARD = "forward"


@dataclass(frozen=True)
class CommGraph:
    """Undirected simple graph over system indices 0..n-1 with node roles."""

    n: int
    edges: frozenset[tuple[int, int]]
    roles: tuple[Role, ...] = ()
    positions: tuple[tuple[float, float], ...] | None = None
    _adj: tuple[tuple[int, ...], ...] = field(
        init=False, repr=False, compare=False, default=()
    )

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"graph needs at least one node, got {self.n}")
        norm = set()
        for e in self.edges:
            a, b = e
            if a == b:
                raise ValidationError(f"self-loop at node {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValidationError(f"edge {e} out of range for n={self.n}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))
        roles = self.roles or tuple(Role.WITHHOLD for _ in range(self.n))
        if len(roles) != self.n:
            raise ValidationError(
                f"roles length {len(roles)} does not match n={self.n}"
            )
        object.__setattr__(self, "roles", tuple(roles))
        if self.positions is not None and len(self.positions) != self.n:
            raise ValidationError("positions length must match n")
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in sorted(norm):
            adj[a].append(b)
            adj[b].append(a)
        object.__setattr__(
            self, "_adj", tuple(tuple(sorted(x)) for x in adj)
        )

    @classmethod
    def empty(cls, n: int) -> "CommGraph":
        return cls(n, frozenset())

    @classmethod
    def complete(cls, n: int) -> "CommGraph":
        return cls(
            n, frozenset((i, j) for i in range(n) for j in range(i + 1, n))
        )

    @classmethod
    def from_edges(
        cls, n: int, edges: Iterable[tuple[int, int]]
    ) -> "CommGraph":
        return cls(n, frozenset(tuple(e) for e in edges))

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    @property
    def avg_degree(self) -> float:
        return 2.0 * len(self.edges) / self.n

    def with_roles(self, roles: Sequence[Role]) -> "CommGraph":
        return CommGraph(self.n, self.edges, tuple(roles), self.positions)

    def forward_nodes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.roles[i] is Role.FORWARD)

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in self._adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self.n

    # Text format: `n` header, one `i j` line per edge (sorted), then an
    # optional `roles` section (one line of F/W characters, one per node)
    # and an optional `positions` section with one `x y` line per node.
    def to_text(self) -> str:
        lines = [str(self.n)]
        lines.extend(f"{a} {b}" for a, b in sorted(self.edges))
        if any(r is Role.FORWARD for r in self.roles):
            lines.append("roles")
            lines.append(
                "".join("F" if r is Role.FORWARD else "W" for r in self.roles)
            )
        if self.positions is not None:
            lines.append("positions")
            lines.extend(f"{repr(x)} {repr(y)}" for x, y in self.positions)
        return "\n".join(lines) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "CommGraph":
        lines = text.splitlines()
        if not lines:
            raise GraphFormatError("empty graph file", line=1)
        try:
            n = int(lines[0].strip())
        except ValueError:
            raise GraphFormatError(
                "header must be the node count", line=1
            ) from None
        edges = []
        roles: tuple[Role, ...] = ()
        positions: list[tuple[float, float]] | None = None
        lineno = 1
        section = "edges"
        for lineno, raw in enumerate(lines[1:], start=2):
            line = raw.strip()
            if not line:
                continue
            if line == "roles":
                section = "roles"
                continue
            if line == "positions":
                section = "positions"
                positions = []
                continue
            parts = line.split()
            if section == "roles":
                if len(line) != n or set(line) - {"F", "W"}:
                    raise GraphFormatError(
                        f"roles line must be {n} F/W characters", line=lineno
                    )
                roles = tuple(
                    Role.FORWARD if c == "F" else Role.WITHHOLD for c in line
                )
            elif section == "positions":
                if len(parts) != 2:
                    raise GraphFormatError(
                        "position line must be `x y`", line=lineno
                    )
                try:
                    positions.append((float(parts[0]), float(parts[1])))
                except ValueError:
                    raise GraphFormatError(
                        f"bad position {line!r}", line=lineno
                    ) from None
            else:
                if len(parts) != 2:
                    raise GraphFormatError(
                        "edge line must be `i j`", line=lineno
                    )
                try:
                    a, b = int(parts[0]), int(parts[1])
                except ValueError:
                    raise GraphFormatError(
                        f"bad edge {line!r}", line=lineno
                    ) from None
                if not (0 <= a < n and 0 <= b < n):
                    raise GraphFormatError(
                        f"edge ({a}, {b}) out of range for n={n}", line=lineno
                    )
                if a == b:
                    raise GraphFormatError(
                        f"self-loop at node {a}", line=lineno
                    )
                edges.append((a, b))
        try:
            return cls(
                n,
                frozenset(edges),
                roles,
                positions=tuple(positions) if positions is not None else None,
            )
        except ValidationError as exc:
            raise GraphFormatError(str(exc)) from None

    @classmethod
    def load(cls, path: str) -> "CommGraph":
        with open(path) as fh:
            return cls.from_text(fh.read())


def gen_udg(n: int, target_avg_degree: float, seed: int) -> CommGraph:
    """Random connected unit-disk graph with a prescribed average degree.

    Scatters n points uniformly in the unit square, binary-searches the
    connection radius until the realized average degree is within 1 of the
    target, and resamples the points (bounded retries) until the result is
    connected. Deterministic per seed.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    if target_avg_degree >= n:
        raise ValidationError(
            f"target average degree {target_avg_degree} must be < n = {n}"
        )
    rng = np.random.default_rng(seed)
    if n == 1:
        pt = rng.uniform(size=2)
        return CommGraph(1, frozenset(), positions=((float(pt[0]), float(pt[1])),))

    for _ in range(60):
        pts = rng.uniform(size=(n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        lo, hi = 0.0, math.sqrt(2.0)
        radius = hi
        for _ in range(80):
            radius = 0.5 * (lo + hi)
            within = dist <= radius
            deg = (within.sum() - n) / n  # exclude self-pairs
            if deg < target_avg_degree:
                lo = radius
            else:
                hi = radius
        within = dist <= hi
        avg = (within.sum() - n) / n
        if abs(avg - target_avg_degree) > 1.0:
            continue
        ii, jj = np.nonzero(np.triu(within, k=1))
        g = CommGraph(
            n,
            frozenset(zip(ii.tolist(), jj.tolist())),
            positions=tuple((float(x), float(y)) for x, y in pts),
        )
        if g.is_connected():
            return g
    raise GenerationError(
        f"no connected unit-disk graph with avg degree ~{target_avg_degree} "
        f"found for n={n} after 60 attempts"
    )


def greedy_mis(g: CommGraph) -> frozenset[int]:
    """Maximal independent set, greedily taking the minimum-degree node.

    Degrees are recomputed on the shrinking residual graph; ties break to
    the lowest node index. The result is independent and maximal.
    """
    alive = set(range(g.n))
    deg = {v: g.degree(v) for v in alive}
    chosen: set[int] = set()
    while alive:
        v = min(alive, key=lambda u: (deg[u], u))
        chosen.add(v)
        removed = {v} | (set(g.neighbors(v)) & alive)
        alive -= removed
        for u in removed:
            for w in g.neighbors(u):
                if w in alive:
                    deg[w] -= 1
    return frozenset(chosen)


def _greedy_mis_max_degree(g: CommGraph, nodes: set[int]) -> list[int]:
    """Maximal independent set over `nodes`, taking max residual degree first."""
    alive = set(nodes)
    deg = {v: len(set(g.neighbors(v)) & alive) for v in alive}
    chosen: list[int] = []
    while alive:
        v = min(alive, key=lambda u: (-deg[u], u))
        chosen.append(v)
        removed = {v} | (set(g.neighbors(v)) & alive)
        alive -= removed
        for u in removed:
            for w in g.neighbors(u):
                if w in alive:
                    deg[w] -= 1
    return chosen


def greedy_cds(g: CommGraph) -> frozenset[int]:
    """Approximate connected dominating set via the two-phase construction.

    Phase one grows a dominating independent seed set, taking the highest
    residual degree first (so hub nodes are preferred); phase two connects
    the seed components with shortest connector paths, merged in node-index
    order. The result is verified dominating and connected for the caller by
    construction.
    """
    if not g.is_connected():
        raise ValidationError("connected dominating set needs a connected graph")
    if g.n == 1:
        return frozenset({0})
    seed = _greedy_mis_max_degree(g, set(range(g.n)))
    cds = set(seed)

    def component_of(v: int, members: set[int]) -> set[int]:
        comp = {v}
        stack = [v]
        while stack:
            a = stack.pop()
            for b in g.neighbors(a):
                if b in members and b not in comp:
                    comp.add(b)
                    stack.append(b)
        return comp

    while True:
        anchor = min(cds)
        comp = component_of(anchor, cds)
        if comp == cds:
            break
        # BFS over the whole graph from the anchor component to the nearest
        # node of another CDS component; connector interiors join the set.
        parent: dict[int, int | None] = {v: None for v in comp}
        frontier = sorted(comp)
        target = None
        while frontier and target is None:
            nxt: list[int] = []
            for v in frontier:
                for u in g.neighbors(v):
                    if u in parent:
                        continue
                    parent[u] = v
                    if u in cds:
                        target = u
                        break
                    nxt.append(u)
                if target is not None:
                    break
            frontier = nxt
        if target is None:
            raise ValidationError("graph became disconnected during CDS build")
        v = parent[target]
        while v is not None and v not in comp:
            cds.add(v)
            v = parent[v]
    return frozenset(cds)


class XResult(NamedTuple):
    value: int
    exact: bool


def _exact_mis_size(adj: dict[int, set[int]]) -> int:
    """Maximum independent set size by branch and bound; fine for <= 20 nodes."""
    if not adj:
        return 0
    # branch on a highest-degree vertex: either exclude it or take it
    v = max(adj, key=lambda u: (len(adj[u]), -u))
    if not adj[v]:
        rest = {u: set(n for n in nb if n != v) for u, nb in adj.items() if u != v}
        return 1 + _exact_mis_size(rest)
    without = {u: nb - {v} for u, nb in adj.items() if u != v}
    best = _exact_mis_size(without)
    dropped = adj[v] | {v}
    with_v = {
        u: nb - dropped for u, nb in adj.items() if u not in dropped
    }
    return max(best, 1 + _exact_mis_size(with_v))


def compute_x(g: CommGraph) -> XResult:
    """Network parameter x: forward nodes plus the largest independent group
    of withhold nodes outside every forward node's neighborhood.

    Exact (by maximum-independent-set search) for n <= 20 or when a shortcut
    applies; otherwise approximated with the greedy set and flagged.
    """
    fwd = set(g.forward_nodes())
    blocked = set(fwd)
    for v in fwd:
        blocked.update(g.neighbors(v))
    free = [v for v in range(g.n) if v not in blocked]
    free_set = set(free)
    has_edge = any(
        u in free_set for v in free for u in g.neighbors(v)
    )
    if not free:
        return XResult(len(fwd), True)
    if not has_edge:
        return XResult(len(fwd) + len(free), True)
    if g.n <= 20:
        adj = {v: set(g.neighbors(v)) & free_set for v in free}
        return XResult(len(fwd) + _exact_mis_size(adj), True)
    sub = CommGraph(
        g.n,
        frozenset(
            (a, b) for a, b in g.edges if a in free_set and b in free_set
        ),
    )
    greedy = {v for v in greedy_mis(sub) if v in free_set}
    return XResult(len(fwd) + len(greedy), False)
