"""Verdict-level replay of the main equivalences on concrete instances.

Each check computes the competing verdicts independently (the sup recursion
on one side, an exact LP on the other) and reports whether they fit the
expected implication diagram.  A mismatch on an instance where the theorems
apply is a bug in one of the two computations.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .boundedness import check_nupbr_loc, dsv_statistic_sup
from .deflator import (STRICT, fill_zeros, synth_deflator_before,
                       synth_deflator_dsv, synth_deflator_nupbr, synth_deflator_strict,
                       verify_smd)
from .ext import INF, fmt
from .gsm import RawProcess
from .io import Instance, dumps, instance_to_record
from .process_sets import (CC, SW, Gen, GeneratorSet, RayGen, Recipe, cemetery_structure,
                           classify, evaluate, sample_closure, uniform_mixture)
from .tree import (AdaptedProcess, EventTree, Node, StoppingTime, along_time, make_tree,
                   process, refine_by_partition, timeline)

# -- gallery -----------------------------------------------------------------


def _binary(horizon: int = 1) -> EventTree:
    nodes = [Node("r", 0, None, Fraction(1))]
    for t in range(1, horizon + 1):
        for p in [n for n in nodes if n.time == t - 1]:
            for side in "ud":
                nid = side if p.id == "r" else p.id + side
                nodes.append(Node(nid, t, p.id, Fraction(1, 2)))
    return make_tree(nodes, horizon)


def _sec3_tree() -> EventTree:
    nodes = [Node("s0", 0, None, Fraction(1)), Node("s1", 1, "s0", Fraction(1)),
             Node("s2", 2, "s1", Fraction(1)), Node("a", 3, "s2", Fraction(1, 2)),
             Node("b", 3, "s2", Fraction(1, 2))]
    return make_tree(nodes, 3)


def _timeline_set(horizon, singles=(), rays=()) -> GeneratorSet:
    tree = timeline(horizon)
    return GeneratorSet(tree, {k: along_time(tree, v) for k, v in singles},
                        {k: (along_time(tree, a), along_time(tree, b)) for k, a, b in rays})


def _binomial() -> Instance:
    tree = _binary(1)
    gens = GeneratorSet(tree, {"1": process(tree, {"r": 1, "u": 1, "d": 1}),
                               "stock": process(tree, {"r": 1, "u": 2, "d": "1/2"})})
    return Instance("binomial", gens)


def _ex1() -> Instance:
    gens = _timeline_set(2, rays=[("v", (1, 1, 0), (0, 1, 0))])
    return Instance("ex1", gens, along_time(gens.tree, (1, 1, 0)))


def _xquestion() -> Instance:
    return Instance("xquestion", _timeline_set(2, singles=[("x", (1, 0, 1))]))


def _ex3(N: int) -> Instance:
    if N < 1:
        raise ValueError("ex3-N needs N >= 1")
    xhat = [1] * (N + 1) + [0]
    xtilde = list(range(1, N + 2)) + [0]
    gens = _timeline_set(N + 1, singles=[("xhat", xhat), ("xtilde", xtilde)])
    return Instance(f"ex3-{N}", gens, gens.singles["xhat"], "xhat")


def _sec3() -> Instance:
    tree = _sec3_tree()
    one = AdaptedProcess(tree, {n: Fraction(1) for n in tree.ids})
    raw = {"Z": RawProcess(tree, {"a": (5, 6, 9), "b": (5, 2, 1)}),
           "W": RawProcess(tree, {"a": (5, 9, 6), "b": (5, 1, 2)})}
    return Instance("sec3", GeneratorSet(tree, {"1": one}), raw=raw)


def _ladder() -> Instance:
    return Instance("ladder", _timeline_set(3, singles=[("x1", (1, 1, 0, 0)), ("x2", (1, 1, 1, 0))]))


def _revival() -> Instance:
    return Instance("revival", _timeline_set(3, singles=[("x1", (1, 1, 0, 0)), ("x2", (1, 0, 0, 1))]))


def _split() -> Instance:
    """Two paths; the cemetery time is 2 on one and 1 on the other."""
    nodes = [Node("r", 0, None, Fraction(1)), Node("u", 1, "r", Fraction(1, 2)),
             Node("d", 1, "r", Fraction(1, 2)), Node("uu", 2, "u", Fraction(1)),
             Node("dd", 2, "d", Fraction(1))]
    tree = make_tree(nodes, 2)
    g = process(tree, {"r": 1, "u": 2, "d": 0, "uu": 0, "dd": 0})
    return Instance("split", GeneratorSet(tree, {"g": g}))


def _binomial2() -> Instance:
    """Two-period binomial with an absorbing default branch."""
    tree = _binary(2)
    stock = process(tree, {"r": 1, "u": 2, "d": "1/2", "uu": 3, "ud": 1, "du": 1, "dd": "1/4"})
    bond = process(tree, {"r": 1, "u": 1, "d": 1, "uu": 1, "ud": 1, "du": 1, "dd": 1})
    risky = process(tree, {"r": 1, "u": "3/2", "d": 0, "uu": 2, "ud": 0, "du": 0, "dd": 0})
    return Instance("binomial2", GeneratorSet(tree, {"1": bond, "stock": stock, "risky": risky}))


_FIXED = {"binomial": _binomial, "binomial2": _binomial2, "ex1": _ex1, "xquestion": _xquestion,
          "sec3": _sec3, "ladder": _ladder, "revival": _revival, "split": _split}
GALLERY_NAMES = tuple(_FIXED) + ("ex3-N",)
DEFAULT_GALLERY = tuple(_FIXED) + ("ex3-1", "ex3-3")


def gallery_instance(name: str) -> Instance:
    if name in _FIXED:
        return _FIXED[name]()
    m = re.fullmatch(r"ex3-(\d+)", name)
    if m:
        return _ex3(int(m.group(1)))
    raise KeyError(f"unknown gallery instance {name!r}; available: {', '.join(GALLERY_NAMES)}")


def gallery(name: str) -> GeneratorSet:
    return gallery_instance(name).gens


# -- equivalence matrix ------------------------------------------------------


@dataclass(frozen=True)
class Statement:
    holds: bool
    witness: str


@dataclass(frozen=True)
class EquivalenceReport:
    statements: dict  # "1".."4" -> Statement
    absorbing: bool
    implications: dict  # "(1)=>(2)" etc -> bool
    extension_verified: bool

    @property
    def consistent(self) -> bool:
        return all(self.implications.values()) and self.extension_verified

    def verdicts(self) -> tuple[bool, bool, bool, bool]:
        return tuple(self.statements[k].holds for k in "1234")


def implication_matrix(v: Sequence[bool], absorbing: bool) -> dict:
    v1, v2, v3, v4 = v
    out = {"(1)<=>(2)": v1 == v2, "(2)=>(3)": (not v2) or v3, "(3)=>(4)": (not v3) or v4}
    if absorbing:
        out["(4)=>(1) [absorbing]"] = (not v4) or v1
    return out


def _lp_witness(res) -> str:
    if res.feasible:
        return f"delta* = {fmt(res.delta)}"
    names = sorted(res.certificate)
    return "delta* = 0; certificate " + ", ".join(names)


def check_theorem_equivalences(gens: GeneratorSet) -> EquivalenceReport:
    cs = cemetery_structure(gens)
    r1 = synth_deflator_strict(gens)
    r2 = synth_deflator_nupbr(gens)
    nup = check_nupbr_loc(gens)
    r4 = synth_deflator_before(gens, cs.Ttilde)
    w3 = "sup finite at every node" if nup else f"sup = inf at node {nup.node!r} (t = {nup.time})"
    stmts = {"1": Statement(r1.feasible, _lp_witness(r1)), "2": Statement(r2.feasible, _lp_witness(r2)),
             "3": Statement(nup.holds, w3), "4": Statement(r4.feasible, _lp_witness(r4))}
    extension_ok = True
    if r2.feasible:
        extension_ok = verify_smd(gens, fill_zeros(r2.deflator.Y), STRICT).ok
    impl = implication_matrix([s.holds for s in stmts.values()], cs.absorbing)
    return EquivalenceReport(stmts, cs.absorbing, impl, extension_ok)


# -- characterisation of the cemetery time -----------------------------------


@dataclass(frozen=True)
class CharTimeVerdict:
    hypotheses_hold: bool
    failed: tuple | None  # (hypothesis, s, t, leaf)
    equal: bool
    mismatch: str | None  # leaf where tau differs from T~

    def __bool__(self):
        return self.hypotheses_hold and self.equal


def verify_char_time(gens: GeneratorSet, tau) -> CharTimeVerdict:
    """Check the two hypotheses that pin a random time down as T~.

    (i) on {s < tau <= t} some closure element is positive on [0, s]; the
    uniform mixture is positive wherever any element is, so it is the test
    process.  (ii) on the same event every generator representative is 0 from
    t on.  The pathwise comparison with T~ is always reported.
    """
    tree = gens.tree
    vals = tau.values if isinstance(tau, StoppingTime) else dict(tau)
    for leaf in tree.leaves:
        v = vals[leaf]
        if v is not INF and v <= 0:
            raise ValueError(f"tau must be positive; it is {v} on leaf {leaf!r}")
    _, mix = uniform_mixture(gens)
    reps = [p for _, p in gens.representatives()]
    failed = None
    for s in range(tree.horizon + 1):
        for t in range(s + 1, tree.horizon + 1):
            for leaf in tree.leaves:
                v = vals[leaf]
                if v is INF or not s < v <= t:
                    continue
                path = tree.paths[leaf]
                if any(mix[path[k]] == 0 for k in range(s + 1)):
                    failed = failed or ("(i) positive on [0, s]", s, t, leaf)
                if any(r[path[k]] != 0 for r in reps for k in range(t, tree.horizon + 1)):
                    failed = failed or ("(ii) zero from t on", s, t, leaf)
    ttilde = cemetery_structure(gens).Ttilde
    mismatch = next((l for l in tree.leaves if vals[l] != ttilde[l]), None)
    return CharTimeVerdict(failed is None, failed, mismatch is None, mismatch)


# -- enlargement stability ---------------------------------------------------


@dataclass(frozen=True)
class EnlargementVerdict:
    base_holds: bool
    refined_holds: bool
    replay_checked: int
    replay_failures: tuple

    @property
    def preserved(self) -> bool:
        return (not self.base_holds) or self.refined_holds

    def __bool__(self):
        return self.preserved and not self.replay_failures


def _translate(recipe: Recipe, relevant) -> Recipe:
    """Base-tree recipe that follows ``recipe`` on one cell."""
    if isinstance(recipe, (Gen, RayGen)):
        return recipe
    left, right = _translate(recipe.left, relevant), _translate(recipe.right, relevant)
    if isinstance(recipe, CC):
        return CC(recipe.alpha, left, right)
    atoms = tuple(sorted({relevant[a] for a in recipe.atoms if a in relevant}))
    return SW(recipe.t, atoms, left, right)


def check_enlargement_stability(gens: GeneratorSet, cells: Sequence, reveal: Sequence[int],
                                depth: int = 2, seed: int = 0, count: int = 16) -> EnlargementVerdict:
    """Refine by revealing ``cells`` and compare NUPBR_loc before and after.

    Sampled refined closure elements are translated cell by cell into base
    closure elements and compared along every path of that cell.
    """
    tree = gens.tree
    fine, nmap = refine_by_partition(tree, cells, reveal)
    lifted = gens.on(fine, nmap.origin)
    base_v, fine_v = check_nupbr_loc(gens), check_nupbr_loc(lifted)
    cell_of = {}
    for k, cell in enumerate(cells):
        for leaf in cell:
            cell_of[leaf] = k
    failures = []
    checked = 0
    samples = sample_closure(lifted, depth, seed, count=count)
    for k in range(len(cells)):
        fine_leaves = [l for l in fine.leaves if cell_of[nmap.origin[l]] == k]
        if not fine_leaves:
            continue
        relevant = {}
        for l in fine_leaves:
            for n in fine.paths[l]:
                relevant[n] = nmap.origin[n]
        for s in samples:
            base_el = evaluate(gens, _translate(s.recipe, relevant))
            checked += 1
            for l in fine_leaves:
                if s.value.path_values(l) != base_el.path_values(nmap.origin[l]):
                    failures.append((k, l))
                    break
    return EnlargementVerdict(base_v.holds, fine_v.holds, checked, tuple(failures))


def standard_partitions(tree: EventTree) -> list[tuple[list, list]]:
    """Trivial partition, leaf-by-leaf at time 0, leaf-by-leaf just before the horizon,
    and first-step branches revealed at time 0."""
    leaves = list(tree.leaves)
    out = [([leaves], [0]),
           ([[l] for l in leaves], [0] * len(leaves)),
           ([[l] for l in leaves], [max(tree.horizon - 1, 0)] * len(leaves))]
    if tree.horizon >= 1:
        by_first = {}
        for l in leaves:
            by_first.setdefault(tree.paths[l][1] if len(tree.paths[l]) > 1 else l, []).append(l)
        out.append((list(by_first.values()), [0] * len(by_first)))
    return out


# -- random instances --------------------------------------------------------

_VALUES = (Fraction(0), Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2), Fraction(3))


def random_tree(rng: random.Random, max_steps: int = 4, max_branch: int = 3) -> EventTree:
    horizon = rng.randint(1, max_steps)
    nodes = [Node("n0", 0, None, Fraction(1))]
    frontier = ["n0"]
    for t in range(1, horizon + 1):
        nxt = []
        for p in frontier:
            k = min(rng.choice((1, 1, 2, 2, 3)), max_branch)
            weights = [rng.randint(1, 3) for _ in range(k)]
            total = sum(weights)
            for w in weights:
                nid = f"n{len(nodes)}"
                nodes.append(Node(nid, t, p, Fraction(w, total)))
                nxt.append(nid)
        frontier = nxt
    return make_tree(nodes, horizon)


def _random_process(rng, tree, absorbing: bool, zero_bias: float, root=Fraction(1)):
    vals = {}
    for n in tree.nodes:
        if n.parent is None:
            vals[n.id] = root
        elif absorbing and vals[n.parent] == 0:
            vals[n.id] = Fraction(0)
        elif rng.random() < zero_bias:
            vals[n.id] = Fraction(0)
        else:
            vals[n.id] = rng.choice(_VALUES[1:])
    return AdaptedProcess(tree, vals)


def random_instance(seed: int, absorbing: bool = True, max_steps: int = 4, max_branch: int = 3,
                    max_gens: int = 3, ray_prob: float = 0.3) -> GeneratorSet:
    """Seeded random generator set: <= ``max_gens`` generators, at most one a ray."""
    rng = random.Random(seed)
    tree = random_tree(rng, max_steps, max_branch)
    count = rng.randint(1, max_gens)
    with_ray = rng.random() < ray_prob
    zero_bias = rng.choice([0.1, 0.25, 0.4])
    singles = {f"g{i}": _random_process(rng, tree, absorbing, zero_bias)
               for i in range(count - (1 if with_ray else 0))}
    rays = {}
    if with_ray:
        a = _random_process(rng, tree, absorbing, zero_bias)
        if rng.random() < 0.3:
            b = AdaptedProcess(tree, {n: Fraction(0) for n in tree.ids})
        else:
            bv = {}
            for n in tree.nodes:
                dead = n.parent is not None and a[n.parent] == 0 and bv[n.parent] == 0
                if n.parent is None or (absorbing and dead) or rng.random() < 0.5:
                    bv[n.id] = Fraction(0)
                else:
                    bv[n.id] = rng.choice(_VALUES[1:])
            b = AdaptedProcess(tree, bv)
        rays["v"] = (a, b)
    return GeneratorSet(tree, singles, rays)


# -- fuzzing -----------------------------------------------------------------


@dataclass
class FuzzReport:
    instances: int = 0
    absorbing: int = 0
    trips: list = field(default_factory=list)
    combinations: dict = field(default_factory=dict)  # verdict tuple -> count

    @property
    def ok(self) -> bool:
        return not self.trips


def _minimize(gens: GeneratorSet, still_bad) -> GeneratorSet:
    """Drop generators one at a time while the failure persists."""
    current = gens
    changed = True
    while changed:
        changed = False
        names = [("s", k) for k in current.singles] + [("r", k) for k in current.rays]
        for kind, k in names:
            singles = {a: b for a, b in current.singles.items() if not (kind == "s" and a == k)}
            rays = {a: b for a, b in current.rays.items() if not (kind == "r" and a == k)}
            if not singles and not rays:
                continue
            cand = GeneratorSet(current.tree, singles, rays)
            if still_bad(cand):
                current, changed = cand, True
                break
    return current


def fuzz(n: int, seed: int, out_dir: str | Path | None = None) -> FuzzReport:
    """Run the equivalence check on ``n`` seeded random instances.

    Half are absorbing.  Every inconsistent instance is minimised and, when
    ``out_dir`` is given, written there with its verdict block.
    """
    rep = FuzzReport()
    for i in range(n):
        absorbing = i % 2 == 0
        gens = random_instance(seed * 1_000_003 + i, absorbing=absorbing)
        r = check_theorem_equivalences(gens)
        rep.instances += 1
        rep.absorbing += r.absorbing
        key = (r.absorbing,) + r.verdicts()
        rep.combinations[key] = rep.combinations.get(key, 0) + 1
        if not r.consistent:
            small = _minimize(gens, lambda g: not check_theorem_equivalences(g).consistent)
            rs = check_theorem_equivalences(small)
            rec = instance_to_record(Instance(f"fuzz-{seed}-{i}", small))
            rec["verdicts"] = {k: {"holds": s.holds, "witness": s.witness}
                               for k, s in rs.statements.items()}
            rec["implications"] = rs.implications
            rep.trips.append(rec)
            if out_dir is not None:
                path = Path(out_dir)
                path.mkdir(parents=True, exist_ok=True)
                (path / f"counterexample-{seed}-{i}.json").write_text(dumps(rec))
    return rep


# -- witnesses for unbounded nodes -------------------------------------------


def unbounded_witness(gens: GeneratorSet, node: str, target) -> Recipe | None:
    """A closure recipe whose value at ``node`` is at least ``target``.

    Tries the two mechanisms that make a node unbounded: a ray with a large
    parameter (held from the root or switched into on the way), and a mixture
    weighted towards a member that is 0 at an ancestor and positive at
    ``node``, switched into at that ancestor.  Failing both, a witness for an
    ancestor is relayed to ``node`` through a member positive at both.
    """
    tree = gens.tree
    target = Fraction(target)
    path = tree.paths[next(iter(tree.leaves_under[node]))][: tree.time(node) + 1]
    live = [(Gen(k), g) for k, g in gens.singles.items()]
    live += [(RayGen(k, Fraction(0)), a) for k, (a, _) in gens.rays.items()]
    live += [(RayGen(k, Fraction(1)), gens.ray_member(k, 1)) for k in gens.rays]
    candidates = []
    for name, (a, b) in gens.rays.items():
        if b[node] > 0:
            x = target / b[node] + 1
            candidates.append(RayGen(name, x))
            for q in path:
                if a[q] > 0:
                    for rx, X in live:
                        if X[q] > 0:
                            candidates.append(SW(tree.time(q), (q,), rx, RayGen(name, x)))
    for q in path[:-1]:
        for rg, g in live:
            if g[q] != 0 or g[node] == 0:
                continue
            for rx, X in live:
                if X[q] == 0:
                    continue
                # value at node >= alpha / (1 - alpha) * g(node)
                alpha = target / (target + g[node]) if target > 0 else Fraction(1, 2)
                alpha = (alpha + 1) / 2
                candidates.append(SW(tree.time(q), (q,), rx, CC(alpha, rx, rg)))
    for rec in candidates:
        try:
            if evaluate(gens, rec)[node] >= target:
                return rec
        except ValueError:
            continue
    # relay: blow up at an ancestor, then switch into a member positive there and at node
    for q in reversed(path[:-1]):
        for rx, X in live:
            if X[q] == 0 or X[node] == 0:
                continue
            sub = unbounded_witness(gens, q, target * X[q] / X[node])
            if sub is None:
                continue
            rec = SW(tree.time(q), (q,), sub, rx)
            try:
                if evaluate(gens, rec)[node] >= target:
                    return rec
            except ValueError:
                continue
    return None


def verdict_tuple(inst: Instance) -> dict:
    """Pinned summary for a gallery instance."""
    gens = inst.gens
    out = {"kind": classify(gens).kind, "absorbing": cemetery_structure(gens).absorbing,
           "nupbr": check_nupbr_loc(gens).holds,
           "nupbr_lp": synth_deflator_nupbr(gens).feasible}
    xhat = inst.xhat if inst.xhat is not None else classify(gens).witness
    if xhat is not None:
        out["dsv"] = dsv_statistic_sup(gens, xhat).holds
        out["dsv_lp"] = synth_deflator_dsv(gens, xhat).feasible
    out["equivalences"] = check_theorem_equivalences(gens).verdicts()
    return out

