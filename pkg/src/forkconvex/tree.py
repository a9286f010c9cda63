"""Finite filtered probability spaces represented as event trees.

The atoms of F_t are the nodes at time t; Omega is the set of leaves (nodes at
the horizon).  Every process is adapted by construction: it carries one value
per node, and is read as constant after the horizon.

Trees produced by :func:`refine_by_partition` may have several nodes at time 0
(a non-trivial F_0); for those, the ``prob`` of a time-0 node is its
unconditional probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .ext import INF, fmt, parse_rational


class TreeError(ValueError):
    """Malformed tree, process or stopping time."""


@dataclass(frozen=True)
class Node:
    id: str
    time: int
    parent: str | None
    prob: Fraction


@dataclass(frozen=True, eq=False)
class EventTree:
    nodes: tuple[Node, ...]
    horizon: int

    @cached_property
    def by_id(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            if n.parent is not None:
                out[n.parent].append(n.id)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def roots(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.parent is None)

    @property
    def root(self) -> str:
        if len(self.roots) != 1:
            raise TreeError("tree has a non-trivial time-0 sigma-algebra")
        return self.roots[0]

    def time(self, nid: str) -> int:
        return self.by_id[nid].time

    def parent(self, nid: str) -> str | None:
        return self.by_id[nid].parent

    def prob(self, nid: str) -> Fraction:
        """Conditional branch probability (unconditional for time-0 nodes)."""
        return self.by_id[nid].prob

    @cached_property
    def levels(self) -> tuple[tuple[str, ...], ...]:
        lv: list[list[str]] = [[] for _ in range(self.horizon + 1)]
        for n in self.nodes:
            lv[n.time].append(n.id)
        return tuple(tuple(x) for x in lv)

    def nodes_at(self, t: int) -> tuple[str, ...]:
        return self.levels[t]

    @property
    def leaves(self) -> tuple[str, ...]:
        return self.levels[self.horizon]

    @cached_property
    def uprob(self) -> dict[str, Fraction]:
        """Unconditional probability of every node."""
        out: dict[str, Fraction] = {}
        for n in self.nodes:
            out[n.id] = n.prob if n.parent is None else out[n.parent] * n.prob
        return out

    @cached_property
    def paths(self) -> dict[str, tuple[str, ...]]:
        """Leaf id -> node ids along its path, indexed by time."""
        out = {}
        for leaf in self.leaves:
            p = [leaf]
            while self.by_id[p[-1]].parent is not None:
                p.append(self.by_id[p[-1]].parent)
            out[leaf] = tuple(reversed(p))
        return out

    @cached_property
    def leaves_under(self) -> dict[str, frozenset[str]]:
        acc: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        for leaf, path in self.paths.items():
            for nid in path:
                acc[nid].add(leaf)
        return {k: frozenset(v) for k, v in acc.items()}

    def ancestor_at(self, nid: str, t: int) -> str:
        node = self.by_id[nid]
        if t > node.time:
            raise TreeError(f"time {t} is after node {nid}")
        while node.time > t:
            node = self.by_id[node.parent]
        return node.id

    def is_internal(self, nid: str) -> bool:
        return self.by_id[nid].time < self.horizon

    def to_spec(self) -> dict:
        return {
            "horizon": self.horizon,
            "nodes": [
                {"id": n.id, "time": n.time, "parent": n.parent, "prob": fmt(n.prob)}
                for n in self.nodes
            ],
        }


def _validate(nodes: Sequence[Node], horizon: int, forest: bool) -> None:
    if horizon < 1:
        raise TreeError(f"horizon must be >= 1, got {horizon}")
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise TreeError(f"duplicate node id {dup!r}")
    by_id = {n.id: n for n in nodes}
    roots = [n for n in nodes if n.parent is None]
    if not roots:
        raise TreeError("tree has no root")
    if not forest and len(roots) != 1:
        raise TreeError(f"expected exactly one root, found {[r.id for r in roots]}")
    kids: dict[str, list[Node]] = {n.id: [] for n in nodes}
    for n in nodes:
        if n.prob <= 0:
            raise TreeError(f"node {n.id!r}: probability {fmt(n.prob)} is not positive")
        if n.parent is None:
            if n.time != 0:
                raise TreeError(f"node {n.id!r}: root at time {n.time}, expected 0")
            continue
        if n.parent not in by_id:
            raise TreeError(f"node {n.id!r}: orphan, unknown parent {n.parent!r}")
        gap = n.time - by_id[n.parent].time
        if gap != 1:
            raise TreeError(f"node {n.id!r}: time gap {gap} to parent {n.parent!r}, expected 1")
        kids[n.parent].append(n)
    root_sum = sum((r.prob for r in roots), Fraction(0))
    if root_sum != 1:
        raise TreeError(f"root probability sum {fmt(root_sum)} ≠ 1")
    for n in nodes:
        if n.time > horizon:
            raise TreeError(f"node {n.id!r}: time {n.time} beyond horizon {horizon}")
        if n.time < horizon:
            if not kids[n.id]:
                raise TreeError(f"node {n.id!r}: no children before the horizon")
            s = sum((c.prob for c in kids[n.id]), Fraction(0))
            if s != 1:
                raise TreeError(f"node {n.id!r}: probability sum {fmt(s)} ≠ 1")


def make_tree(nodes: Iterable[Node], horizon: int, forest: bool = False) -> EventTree:
    nodes = list(nodes)
    order = {n.id: i for i, n in enumerate(nodes)}
    _validate(nodes, horizon, forest)
    nodes.sort(key=lambda n: (n.time, order[n.id]))
    return EventTree(tuple(nodes), horizon)


def build_tree(spec: Mapping) -> EventTree:
    """Validate an instance description and build the tree.

    ``spec`` has ``horizon`` (optional, defaults to the largest node time) and
    ``nodes``: records with ``id``, ``time``, ``parent`` and ``prob``; the root
    may omit ``prob``.
    """
    try:
        raw = spec["nodes"]
    except (KeyError, TypeError):
        raise TreeError("instance has no 'nodes' list") from None
    nodes = []
    for i, rec in enumerate(raw):
        try:
            nid = str(rec["id"])
            time = int(rec["time"])
            parent = rec.get("parent")
            prob = parse_rational(rec.get("prob", "1") if parent is None else rec["prob"])
        except (KeyError, ValueError, TypeError) as exc:
            raise TreeError(f"nodes[{i}]: {exc}") from None
        nodes.append(Node(nid, time, None if parent is None else str(parent), prob))
    horizon = int(spec.get("horizon", max(n.time for n in nodes)))
    return make_tree(nodes, horizon)


def timeline(horizon: int, prefix: str = "t") -> EventTree:
    """Deterministic tree: one node per time step."""
    nodes = [Node(f"{prefix}{t}", t, None if t == 0 else f"{prefix}{t - 1}", Fraction(1))
             for t in range(horizon + 1)]
    return make_tree(nodes, horizon)


# -- processes ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    tree: EventTree
    values: Mapping[str, Fraction]

    def __post_init__(self):
        missing = [nid for nid in self.tree.ids if nid not in self.values]
        if missing:
            raise TreeError(f"process has no value at node {missing[0]!r}")
        for nid, v in self.values.items():
            if v < 0:
                raise TreeError(f"process is negative at node {nid!r}")

    def __getitem__(self, nid: str) -> Fraction:
        return self.values[nid]

    def same_values(self, other: "AdaptedProcess") -> bool:
        return all(self.values[n] == other.values[n] for n in self.tree.ids)

    def positive(self, nid: str) -> bool:
        return self.values[nid] > 0

    def path_values(self, leaf: str) -> list[Fraction]:
        return [self.values[n] for n in self.tree.paths[leaf]]

    def at(self, nid: str, t: int) -> Fraction:
        """Value at time ``t`` on the path through ``nid`` (``t <= time(nid)``)."""
        return self.values[self.tree.ancestor_at(nid, t)]

    def __repr__(self):
        inner = ", ".join(f"{k}: {fmt(self.values[k])}" for k in self.tree.ids)
        return f"AdaptedProcess({{{inner}}})"


def process(tree: EventTree, values: Mapping[str, object]) -> AdaptedProcess:
    return AdaptedProcess(tree, {k: parse_rational(v) for k, v in values.items()})


def constant(tree: EventTree, c=1) -> AdaptedProcess:
    c = Fraction(c)
    return AdaptedProcess(tree, {n: c for n in tree.ids})


def along_time(tree: EventTree, seq: Sequence) -> AdaptedProcess:
    """Process whose value depends only on time; ``seq[t]`` for t <= horizon."""
    if len(seq) != tree.horizon + 1:
        raise TreeError(f"need {tree.horizon + 1} values, got {len(seq)}")
    vals = [parse_rational(v) for v in seq]
    return AdaptedProcess(tree, {n.id: vals[n.time] for n in tree.nodes})


# -- stopping times ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StoppingTime:
    """Per-leaf value in {0..horizon} or :data:`INF`."""

    tree: EventTree
    values: Mapping[str, object]
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        for leaf in self.tree.leaves:
            if leaf not in self.values:
                raise TreeError(f"stopping time has no value at leaf {leaf!r}")
        if self.check:
            bad = measurability_violation(self.tree, self.values)
            if bad is not None:
                raise TreeError(f"not a stopping time: {{tau <= {bad[1]}}} splits node {bad[0]!r}")

    def __getitem__(self, leaf: str):
        return self.values[leaf]

    def same_values(self, other: "StoppingTime") -> bool:
        return all(self.values[l] == other.values[l] for l in self.tree.leaves)

    def at_node(self, nid: str):
        """Common value over the node's leaves; raises if they disagree."""
        vals = {self.values[l] for l in self.tree.leaves_under[nid]}
        if len(vals) != 1:
            raise TreeError(f"random time not constant on node {nid!r}")
        return vals.pop()

    def before(self, nid: str) -> bool:
        """Whether ``time(nid) < tau`` on the node (requires measurability up to then)."""
        t = self.tree.time(nid)
        flags = {_lt(t, self.values[l]) for l in self.tree.leaves_under[nid]}
        if len(flags) != 1:
            raise TreeError(f"event {{tau > {t}}} splits node {nid!r}")
        return flags.pop()


def _lt(t: int, v) -> bool:
    return v is INF or t < v


def measurability_violation(tree: EventTree, values: Mapping[str, object]):
    for t in range(tree.horizon + 1):
        for nid in tree.nodes_at(t):
            flags = {(values[l] is not INF and values[l] <= t) for l in tree.leaves_under[nid]}
            if len(flags) > 1:
                return nid, t
    return None


def hitting_time(tree: EventTree, X: AdaptedProcess) -> StoppingTime:
    """First time the path value is 0; :data:`INF` if never."""
    out = {}
    for leaf, path in tree.paths.items():
        out[leaf] = next((t for t, nid in enumerate(path) if X[nid] == 0), INF)
    return StoppingTime(tree, out)


# -- expectations and supermartingales ---------------------------------------


def conditional_expectation(tree: EventTree, values: Mapping[str, Fraction], t: int,
                            s: int) -> dict[str, Fraction]:
    """E[V_t | F_s] as a map over time-s nodes."""
    if s > t:
        raise TreeError(f"conditioning time {s} is after {t}")
    out = {nid: Fraction(0) for nid in tree.nodes_at(s)}
    for nid in tree.nodes_at(t):
        if nid not in values:
            raise TreeError(f"no value for time-{t} node {nid!r}")
        anc = tree.ancestor_at(nid, s)
        out[anc] += tree.uprob[nid] / tree.uprob[anc] * Fraction(values[nid])
    return out


@dataclass(frozen=True)
class Verdict:
    holds: bool
    node: str | None = None
    lhs: Fraction | None = None  # E[Y_next | node]
    rhs: Fraction | None = None  # Y(node)

    def __bool__(self):
        return self.holds


def one_step_mean(tree: EventTree, values: Mapping[str, Fraction], nid: str) -> Fraction:
    return sum((tree.prob(c) * values[c] for c in tree.children[nid]), Fraction(0))


def is_supermartingale(tree: EventTree, Y) -> Verdict:
    """One-step test E[Y_{t+1} | node] <= Y(node) at every internal node."""
    vals = Y.values if isinstance(Y, AdaptedProcess) else Y
    for n in tree.nodes:
        if n.time == tree.horizon:
            continue
        lhs = one_step_mean(tree, vals, n.id)
        if lhs > vals[n.id]:
            return Verdict(False, n.id, lhs, vals[n.id])
    return Verdict(True)


# -- refinement and projection -----------------------------------------------


@dataclass(frozen=True, eq=False)
class NodeMap:
    """Refined node id -> original node id, with conditional copy weights."""

    origin: Mapping[str, str]
    weight: Mapping[str, Fraction]

    def copies(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for new, old in self.origin.items():
            out.setdefault(old, []).append(new)
        return out

    def then(self, coarser: "NodeMap") -> "NodeMap":
        """Compose: ``self`` maps T2 -> T1 and ``coarser`` maps T1 -> T0."""
        origin = {k: coarser.origin[v] for k, v in self.origin.items()}
        weight = {k: self.weight[k] * coarser.weight[v] for k, v in self.origin.items()}
        return NodeMap(origin, weight)

    def check(self, fine: EventTree, coarse: EventTree) -> None:
        if set(self.origin) != set(fine.ids):
            raise TreeError("node map does not cover the refined tree")
        if set(self.origin.values()) != set(coarse.ids):
            raise TreeError("node map does not cover the original tree")
        sums: dict[str, Fraction] = {}
        for new, old in self.origin.items():
            w = self.weight[new]
            if w <= 0:
                raise TreeError(f"non-positive copy weight at {new!r}")
            if fine.time(new) != coarse.time(old):
                raise TreeError(f"copy {new!r} and {old!r} live at different times")
            sums[old] = sums.get(old, Fraction(0)) + w
        bad = [k for k, v in sums.items() if v != 1]
        if bad:
            raise TreeError(f"copy weights of {bad[0]!r} do not sum to 1")


def identity_map(tree: EventTree) -> NodeMap:
    return NodeMap({n: n for n in tree.ids}, {n: Fraction(1) for n in tree.ids})


def refine_by_partition(tree: EventTree, cells: Sequence[Iterable[str]],
                        reveal_time: Sequence[int]) -> tuple[EventTree, NodeMap]:
    """Enlarge the filtration by revealing each cell of a leaf partition.

    From ``reveal_time[k]`` on, atoms are intersected with cell k; cells not yet
    revealed stay lumped together.  Zero-probability copies are never created.
    """
    cells = [frozenset(c) for c in cells]
    if len(reveal_time) != len(cells):
        raise TreeError("one reveal time per cell is required")
    seen: dict[str, int] = {}
    for k, cell in enumerate(cells):
        for leaf in cell:
            if leaf not in tree.paths:
                raise TreeError(f"cell {k} contains unknown leaf {leaf!r}")
            if leaf in seen:
                raise TreeError(f"cells {seen[leaf]} and {k} overlap at leaf {leaf!r}")
            seen[leaf] = k
    if len(seen) != len(tree.leaves):
        missing = next(l for l in tree.leaves if l not in seen)
        raise TreeError(f"cells do not cover leaf {missing!r}")
    for k, r in enumerate(reveal_time):
        if not 0 <= r <= tree.horizon:
            raise TreeError(f"reveal time {r} of cell {k} outside 0..{tree.horizon}")

    def label(leaf: str, t: int) -> str:
        k = seen[leaf]
        return f"c{k}" if reveal_time[k] <= t else "r"

    groups: dict[tuple[str, str], set[str]] = {}
    order: list[tuple[str, str]] = []
    for n in tree.nodes:
        for leaf in sorted(tree.leaves_under[n.id], key=tree.leaves.index):
            key = (n.id, label(leaf, n.time))
            if key not in groups:
                groups[key] = set()
                order.append(key)
            groups[key].add(leaf)
    ncopies: dict[str, int] = {}
    for nid, _ in order:
        ncopies[nid] = ncopies.get(nid, 0) + 1

    def new_id(key):
        nid, lab = key
        return nid if ncopies[nid] == 1 else f"{nid}#{lab}"

    def mass(key):
        return sum((tree.uprob[l] for l in groups[key]), Fraction(0))

    nodes, origin, weight = [], {}, {}
    for key in order:
        nid, lab = key
        base = tree.by_id[nid]
        m = mass(key)
        if base.parent is None:
            pkey, prob = None, m
        else:
            plab = lab if lab != "r" and reveal_time[int(lab[1:])] <= base.time - 1 else "r"
            pkey = (base.parent, plab)
            prob = m / mass(pkey)
        nodes.append(Node(new_id(key), base.time, None if pkey is None else new_id(pkey), prob))
        origin[new_id(key)] = nid
        weight[new_id(key)] = m / tree.uprob[nid]
    refined = make_tree(nodes, tree.horizon, forest=True)
    return refined, NodeMap(origin, weight)


def lift(X: AdaptedProcess, fine: EventTree, nmap: NodeMap) -> AdaptedProcess:
    """Copy a coarse process onto every copy of each node."""
    return AdaptedProcess(fine, {n: X[nmap.origin[n]] for n in fine.ids})


def optional_projection(tree: EventTree, nmap: NodeMap, Yplus: AdaptedProcess) -> AdaptedProcess:
    """Project a refined-tree process back: copy-weighted average per node."""
    nmap.check(Yplus.tree, tree)
    out = {nid: Fraction(0) for nid in tree.ids}
    for new, old in nmap.origin.items():
        out[old] += nmap.weight[new] * Yplus[new]
    return AdaptedProcess(tree, out)


def sigma_algebra_size(tree: EventTree, t: int) -> int:
    return 2 ** len(tree.nodes_at(t))
