"""Exact sup of the fork-convex closure per node, NUPBR_loc and DSV verdicts.

On a finite tree whose atoms all have positive probability, a set of random
variables is bounded in L0 iff it is uniformly bounded, so both conditions
reduce to finiteness of per-node suprema over the closure.

The recursion tracks, for every generator "member", the largest multiple of it
that some closure element can be holding at a node.  A ray A + xB contributes
two members, A and B: the value of a + b-weighted holdings is linear, so the
sup over a switch-in set {aA + bB = v} sits at one of its two endpoints.
Holdings are split by whether the holder's value has already hit 0 on the way
(S_zero) or not (S_pos).

Two effects make a node unbounded:

* a ray whose B part appears where the A part is held with B = 0 (x -> inf);
* a revival: some member is 0 at a node where the closure is alive and turns
  positive later.  Mixing it into a live process with weight close to 1 and
  switching into the mixture gives an arbitrarily large multiple of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .ext import INF, ext_div, ext_max, ext_mul, fmt
from .process_sets import GeneratorSet, is_spd_witness
from .tree import AdaptedProcess, StoppingTime, hitting_time


@dataclass(frozen=True)
class SupProfile:
    s_pos: dict
    s_zero: dict

    def total(self, nid: str):
        return ext_max(self.s_pos[nid], self.s_zero[nid])


def _members(gens: GeneratorSet):
    """(key, process, ray name or None, part) for every member."""
    out = [(("g", n), p, None, None) for n, p in gens.singles.items()]
    for n, (a, b) in gens.rays.items():
        out.append((("A", n), a, n, "A"))
        out.append((("B", n), b, n, "B"))
    return out


def _revives(gens: GeneratorSet, q: str, n: str) -> bool:
    """Some member is 0 at ``q`` and positive at its descendant ``n``."""
    for g in gens.singles.values():
        if g[q] == 0 and g[n] > 0:
            return True
    for a, b in gens.rays.values():
        if a[q] == 0 and (a[n] > 0 or (b[q] == 0 and b[n] > 0)):
            return True
    return False


def _alive(gens: GeneratorSet, n: str) -> bool:
    return any(g[n] > 0 for g in gens.singles.values()) or any(
        a[n] > 0 or b[n] > 0 for a, b in gens.rays.values())


def closure_sup(gens: GeneratorSet) -> SupProfile:
    tree = gens.tree
    members = _members(gens)
    zero_at = {}
    for key, p, ray, _ in members:
        if ray is None:
            zero_at[key] = {n: p[n] == 0 for n in tree.ids}
        else:
            a, b = gens.rays[ray]
            zero_at[key] = {n: a[n] == 0 and b[n] == 0 for n in tree.ids}
    alive = {n: _alive(gens, n) for n in tree.ids}

    hold_pos: dict[str, dict] = {}
    hold_zero: dict[str, dict] = {}
    s_pos, s_zero = {}, {}
    for node in tree.nodes:
        n = node.id
        if node.parent is None:
            hp = {key: (INF if part == "B" else Fraction(1)) for key, _, _, part in members}
            hz = {key: Fraction(0) for key, *_ in members}
        else:
            pp, pz = hold_pos[node.parent], hold_zero[node.parent]
            hp, hz = {}, {}
            for key, *_ in members:
                if zero_at[key][n]:
                    hp[key] = Fraction(0)
                    hz[key] = ext_max(pz[key], pp[key])
                else:
                    hp[key], hz[key] = pp[key], pz[key]
        sp = ext_max(*(ext_mul(hp[key], p[n]) for key, p, *_ in members))
        sz = ext_max(*(ext_mul(hz[key], p[n]) for key, p, *_ in members))
        if sz is not INF and node.parent is not None:
            q = node.parent
            while q is not None:
                if alive[q] and _revives(gens, q, n):
                    sz = INF
                    break
                q = tree.parent(q)
        s_pos[n], s_zero[n] = sp, sz
        # switching at n into each member
        for key, p, ray, part in members:
            if p[n] > 0:
                hp[key] = ext_max(hp[key], ext_div(sp, p[n]))
                hz[key] = ext_max(hz[key], ext_div(sz, p[n]))
            elif ray is not None:
                a, b = gens.rays[ray]
                other = b if part == "A" else a
                if other[n] > 0:
                    # the other endpoint of {aA + bB = v} is free
                    if sp != 0:
                        hp[key] = INF
                    if sz != 0:
                        hz[key] = INF
        hold_pos[n], hold_zero[n] = hp, hz
    return SupProfile(s_pos, s_zero)


@dataclass(frozen=True)
class NupbrVerdict:
    holds: bool
    time: int | None
    node: str | None
    profile: SupProfile
    times: dict

    def __bool__(self):
        return self.holds

    def level_values(self, t: int) -> dict:
        return {n: self.profile.total(n) for n, tn in self.times.items() if tn == t}


def check_nupbr_loc(gens: GeneratorSet, profile: SupProfile | None = None) -> NupbrVerdict:
    profile = profile or closure_sup(gens)
    times = {n.id: n.time for n in gens.tree.nodes}
    for node in gens.tree.nodes:
        if profile.total(node.id) is INF:
            return NupbrVerdict(False, node.time, node.id, profile, times)
    return NupbrVerdict(True, None, None, profile, times)


@dataclass(frozen=True)
class DsvReport:
    holds: bool
    anchors: dict  # leaf -> anchor node
    statistic: dict  # leaf -> Ext
    sup: object
    Thatt: StoppingTime

    def __bool__(self):
        return self.holds


def anchor_node(tree, Thatt: StoppingTime, leaf: str) -> str:
    """Node at time T^ - 1 on the leaf's path, or the leaf if T^ is infinite."""
    t = Thatt[leaf]
    if t is INF:
        return leaf
    if t == 0:
        raise ValueError(f"dominating process vanishes at time 0 on leaf {leaf!r}")
    return tree.paths[leaf][t - 1]


def dsv_statistic_sup(gens: GeneratorSet, xhat: AdaptedProcess,
                      profile: SupProfile | None = None) -> DsvReport:
    if not is_spd_witness(gens, xhat):
        raise ValueError("xhat is not a dominating process for this generator set")
    tree = gens.tree
    profile = profile or closure_sup(gens)
    that = hitting_time(tree, xhat)
    anchors, stat = {}, {}
    for leaf in tree.leaves:
        d = anchor_node(tree, that, leaf)
        anchors[leaf] = d
        stat[leaf] = ext_div(profile.total(d), xhat[d])
    sup = ext_max(*stat.values())
    return DsvReport(sup is not INF, anchors, stat, sup, that)


# -- liminf of eventually periodic sequences ---------------------------------


class OutOfLemma(ValueError):
    """The inf * 0 configuration, where the product liminf is unconstrained."""


@dataclass(frozen=True)
class EventuallyPeriodicSeq:
    prefix: tuple = ()
    cycle: tuple = (Fraction(1),)
    diverges: bool = False

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("cycle must be nonempty")
        object.__setattr__(self, "prefix", tuple(Fraction(v) for v in self.prefix))
        object.__setattr__(self, "cycle", tuple(Fraction(v) for v in self.cycle))
        if any(v < 0 for v in self.prefix + self.cycle):
            raise ValueError("sequence values must be nonnegative")

    def liminf(self):
        return INF if self.diverges else min(self.cycle)

    def __getitem__(self, k: int) -> Fraction:
        if k < len(self.prefix):
            return self.prefix[k]
        return self.cycle[(k - len(self.prefix)) % len(self.cycle)]


@dataclass(frozen=True)
class LiminfCheck:
    liminf_x: object
    liminf_y: object
    liminf_xy: object
    holds: bool


def liminf_product_check(x: EventuallyPeriodicSeq, y: EventuallyPeriodicSeq) -> LiminfCheck:
    lx, ly = x.liminf(), y.liminf()
    if (lx is INF and ly == 0) or (ly is INF and lx == 0):
        raise OutOfLemma("liminf x * liminf y is inf * 0; the product liminf can be anything")
    if lx is INF or ly is INF:
        lxy = INF
    else:
        start = max(len(x.prefix), len(y.prefix))
        period = lcm(len(x.cycle), len(y.cycle))
        lxy = min(x[k] * y[k] for k in range(start, start + period))
    lhs = ext_mul(lx, ly)
    holds = lxy is INF or (lhs is not INF and lhs <= lxy)
    return LiminfCheck(lx, ly, lxy, holds)


def sup_table(gens: GeneratorSet, profile: SupProfile) -> list[dict]:
    """Rows for reports: one per node, values as exact strings."""
    return [{"node": n.id, "time": n.time, "S_pos": fmt(profile.s_pos[n.id]),
             "S_zero": fmt(profile.s_zero[n.id]), "sup": fmt(profile.total(n.id))}
            for n in gens.tree.nodes]


def stopped_sup(gens: GeneratorSet, tau: StoppingTime, profile: SupProfile | None = None) -> dict:
    """Per-leaf closure sup of X_tau (tau = INF read at the horizon)."""
    profile = profile or closure_sup(gens)
    tree = gens.tree
    out = {}
    for leaf in tree.leaves:
        t = tau[leaf]
        nid = leaf if t is INF else tree.paths[leaf][t]
        out[leaf] = profile.total(nid)
    return out
