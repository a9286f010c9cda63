"""Generalised supermartingales: raw (possibly non-adapted) processes.

A raw process assigns each leaf its own value path, so two leaves sharing a
time-t node may disagree at t.  The defining inequality is checked atom by
atom: for a union of atoms of F_s it is the sum of the atom inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .ext import fmt
from .tree import AdaptedProcess, EventTree, TreeError, is_supermartingale


class UndefinedRatio(ValueError):
    """Z_s = 0 < Z_t on some leaf, so Z_t / Z_s is not defined."""


@dataclass(frozen=True, eq=False)
class RawProcess:
    """Leaf -> values at times 0..k; the last value repeats up to the horizon."""

    tree: EventTree
    values: Mapping[str, tuple]

    def __post_init__(self):
        H = self.tree.horizon
        full = {}
        for leaf in self.tree.leaves:
            if leaf not in self.values:
                raise TreeError(f"raw process has no path for leaf {leaf!r}")
            seq = [Fraction(v) for v in self.values[leaf]]
            if not seq:
                raise TreeError(f"empty value path for leaf {leaf!r}")
            if len(seq) > H + 1:
                raise TreeError(f"leaf {leaf!r} has {len(seq)} values, horizon is {H}")
            if any(v < 0 for v in seq):
                raise TreeError(f"negative value on leaf {leaf!r}")
            full[leaf] = tuple(seq + [seq[-1]] * (H + 1 - len(seq)))
        extra = set(self.values) - set(self.tree.leaves)
        if extra:
            raise TreeError(f"unknown leaf {sorted(extra)[0]!r} in raw process")
        object.__setattr__(self, "values", full)

    def __call__(self, leaf: str, t: int) -> Fraction:
        return self.values[leaf][t]

    @classmethod
    def from_adapted(cls, X: AdaptedProcess) -> "RawProcess":
        return cls(X.tree, {leaf: tuple(X.path_values(leaf)) for leaf in X.tree.leaves})

    def to_record(self) -> dict:
        return {leaf: [fmt(v) for v in seq] for leaf, seq in self.values.items()}


@dataclass(frozen=True)
class RatioCheck:
    s: int
    t: int
    atom: str
    lhs: Fraction  # E[Z_t / Z_s ; A]
    rhs: Fraction  # P(A)

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


@dataclass(frozen=True)
class GsmVerdict:
    holds: bool
    witness: RatioCheck | None
    table: tuple[RatioCheck, ...] = field(default=())

    def __bool__(self):
        return self.holds


def _ratio(num: Fraction, den: Fraction, leaf: str, s: int, t: int) -> Fraction:
    if den > 0:
        return num / den
    if num == 0:
        return Fraction(1)
    raise UndefinedRatio(f"Z_{t} = {fmt(num)} over Z_{s} = 0 on leaf {leaf!r}")


def is_generalized_supermartingale(tree: EventTree, Z: RawProcess) -> GsmVerdict:
    rows = []
    witness = None
    for s in range(tree.horizon + 1):
        for t in range(s + 1, tree.horizon + 1):
            for atom in tree.nodes_at(s):
                lhs = Fraction(0)
                for leaf in tree.leaves_under[atom]:
                    lhs += tree.uprob[leaf] * _ratio(Z(leaf, t), Z(leaf, s), leaf, s, t)
                row = RatioCheck(s, t, atom, lhs, tree.uprob[atom])
                rows.append(row)
                if witness is None and not row.holds:
                    witness = row
    return GsmVerdict(witness is None, witness, tuple(rows))


def projection(tree: EventTree, Z: RawProcess) -> AdaptedProcess:
    """Probability-weighted average of Z over each node's leaves."""
    out = {}
    for n in tree.nodes:
        leaves = tree.leaves_under[n.id]
        out[n.id] = sum((tree.uprob[l] * Z(l, n.time) for l in leaves), Fraction(0)) / tree.uprob[n.id]
    return AdaptedProcess(tree, out)


@dataclass(frozen=True, eq=False)
class ProjectionComparison:
    gsm: bool
    projection_supermartingale: bool
    projection: AdaptedProcess
    gsm_verdict: GsmVerdict


def compare_projection(tree: EventTree, Z: RawProcess) -> ProjectionComparison:
    v = is_generalized_supermartingale(tree, Z)
    proj = projection(tree, Z)
    return ProjectionComparison(v.holds, bool(is_supermartingale(tree, proj)), proj, v)


def time_means(tree: EventTree, proj: AdaptedProcess, times: Sequence[int]) -> list[Fraction]:
    """Unconditional mean of an adapted process at each listed time."""
    return [sum((tree.uprob[n] * proj[n] for n in tree.nodes_at(t)), Fraction(0)) for t in times]
