"""Supermartingale deflators: exact LP synthesis, verification, constructions.

A deflator Y makes X*Y a supermartingale for every X in the closure.  The
one-step inequalities are linear in Y, convex combinations preserve them, and
the switching operator pastes two supermartingales at a stopping node, so it
suffices to impose them on the generators.  A ray A + xB must hold for every
x >= 0, which splits into an A-constraint and a B-constraint.

Every synthesis maximises an explicit margin ``delta`` over the declared support
region; a positive optimum is the existence verdict, decided exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .boundedness import anchor_node, check_nupbr_loc
from .ext import INF, fmt
from .lp import LinearProgram
from .process_sets import ClosureElement, GeneratorSet, cemetery_structure, is_spd_witness
from .tree import (AdaptedProcess, EventTree, NodeMap, StoppingTime, hitting_time,
                   identity_map, is_supermartingale, one_step_mean, optional_projection,
                   refine_by_partition)

log = logging.getLogger(__name__)

STRICT = "strict-everywhere"
BEFORE_TTILDE = "strict-before-T̃"
BEFORE_THAT = "strict-before-T̂-with-boundary"
MODES = (STRICT, BEFORE_TTILDE, BEFORE_THAT)


@dataclass(frozen=True, eq=False)
class Deflator:
    Y: AdaptedProcess
    delta: Fraction
    support_mode: str
    certificate: tuple = ()  # (label, node, E[XY next], XY now) per checked inequality


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    feasible: bool
    delta: Fraction
    deflator: Deflator | None
    lp: LinearProgram
    certificate: dict  # constraint name -> positive dual multiplier (when infeasible)

    def __bool__(self):
        return self.feasible


def constraint_processes(gens: GeneratorSet) -> list[tuple[str, AdaptedProcess]]:
    """Singles plus both parts of every ray."""
    out = list(gens.singles.items())
    for name, (a, b) in gens.rays.items():
        out += [(f"{name}.A", a), (f"{name}.B", b)]
    return out


def _var(n: str) -> str:
    return f"Y[{n}]"


def _synthesize(gens: GeneratorSet, fixed: Mapping[str, Fraction], support: Sequence[str],
                anchors: Mapping[str, Fraction], mode: str) -> SynthesisResult:
    """Maximise delta subject to the SMD inequalities.

    ``fixed`` pins node values; ``support`` gets Y >= delta; ``anchors`` maps a
    node d to a weight w with w * Y(d) >= delta.
    """
    tree = gens.tree
    lp = LinearProgram()
    lp.var("delta")
    for n in tree.ids:
        if n not in fixed:
            lp.var(_var(n))
    for label, X in constraint_processes(gens):
        for n in tree.ids:
            if not tree.is_internal(n):
                continue
            coeffs: dict[str, Fraction] = {}
            rhs = Fraction(0)
            terms = [(c, tree.prob(c) * X[c]) for c in tree.children[n]] + [(n, -X[n])]
            for node, w in terms:
                if w == 0:
                    continue
                if node in fixed:
                    rhs -= w * fixed[node]
                else:
                    coeffs[_var(node)] = coeffs.get(_var(node), Fraction(0)) + w
            if not coeffs:
                if rhs < 0:
                    raise ValueError(f"pinned values violate {label} at node {n!r}")
                continue
            if rhs < 0:
                raise ValueError(f"constraint {label}@{n} has pinned terms of the wrong sign")
            lp.add(f"smd[{label}@{n}]", coeffs, rhs)
    for n in support:
        if n in fixed:
            lp.add(f"support[{n}]", {"delta": 1}, fixed[n])
        else:
            lp.add(f"support[{n}]", {"delta": 1, _var(n): -1}, 0)
    for d, w in anchors.items():
        if d in fixed:
            lp.add(f"anchor[{d}]", {"delta": 1}, w * fixed[d])
        else:
            lp.add(f"anchor[{d}]", {"delta": 1, _var(d): -w}, 0)
    lp.maximize({"delta": 1})
    res = lp.solve()
    if res.status != "optimal":
        raise RuntimeError("deflator LP is unbounded; the support region is empty")
    delta = res.objective
    if delta <= 0:
        return SynthesisResult(False, delta, None, lp, res.certificate())
    Y = AdaptedProcess(tree, {n: fixed[n] if n in fixed else res.values[_var(n)] for n in tree.ids})
    cert = tuple(_inequalities(gens, Y))
    return SynthesisResult(True, delta, Deflator(Y, delta, mode, cert), lp, {})


def _inequalities(gens: GeneratorSet, Y: AdaptedProcess):
    tree = gens.tree
    for label, X in constraint_processes(gens):
        xy = {n: X[n] * Y[n] for n in tree.ids}
        for n in tree.ids:
            if tree.is_internal(n):
                yield (label, n, one_step_mean(tree, xy, n), xy[n])


def _all_reps_zero(gens: GeneratorSet, n: str) -> bool:
    return all(X[n] == 0 for _, X in constraint_processes(gens))


def synth_deflator_nupbr(gens: GeneratorSet) -> SynthesisResult:
    """Y with {Y = 0} contained in {X = 0}; dead nodes are pinned to 1, so a
    feasible answer is strictly positive everywhere."""
    tree = gens.tree
    fixed = {r: Fraction(1) for r in tree.roots}
    fixed.update({n: Fraction(1) for n in tree.ids if _all_reps_zero(gens, n)})
    support = [n for n in tree.ids if not _all_reps_zero(gens, n)]
    return _synthesize(gens, fixed, support, {}, STRICT)


def synth_deflator_strict(gens: GeneratorSet) -> SynthesisResult:
    """Strictly positive Y with nothing pinned beyond the root."""
    tree = gens.tree
    fixed = {r: Fraction(1) for r in tree.roots}
    return _synthesize(gens, fixed, list(tree.ids), {}, STRICT)


def synth_deflator_before(gens: GeneratorSet, tau: StoppingTime) -> SynthesisResult:
    """Y strictly positive before the stopping time ``tau``, free afterwards."""
    tree = gens.tree
    fixed = {r: Fraction(1) for r in tree.roots}
    support = [n for n in tree.ids if tau.before(n)]
    return _synthesize(gens, fixed, support, {}, BEFORE_TTILDE)


def synth_deflator_dsv(gens: GeneratorSet, xhat: AdaptedProcess) -> SynthesisResult:
    """Y > 0 before T^ = first zero of xhat, Y = 0 from T^ on, and
    xhat * Y >= delta at the last node before T^ on every path."""
    if not is_spd_witness(gens, xhat):
        raise ValueError("xhat is not a dominating process for this generator set")
    tree = gens.tree
    that = hitting_time(tree, xhat)
    fixed = {r: Fraction(1) for r in tree.roots}
    support = []
    for n in tree.ids:
        if that.before(n):
            support.append(n)
        else:
            fixed[n] = Fraction(0)
    anchors = {}
    for leaf in tree.leaves:
        d = anchor_node(tree, that, leaf)
        anchors[d] = xhat[d]
    return _synthesize(gens, fixed, support, anchors, BEFORE_THAT)


# -- verification ------------------------------------------------------------


@dataclass
class SmdReport:
    violations: list = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def verify_smd(gens: GeneratorSet, Y: AdaptedProcess, mode: str = STRICT,
               samples: Sequence[ClosureElement] = (), delta=None,
               xhat: AdaptedProcess | None = None, ttilde: StoppingTime | None = None) -> SmdReport:
    """Check X*Y for the generators and every sample, and the support condition."""
    if mode not in MODES:
        raise ValueError(f"unknown support mode {mode!r}")
    tree = gens.tree
    rep = SmdReport()
    for r in tree.roots:
        if Y[r] != 1:
            rep.violations.append(("normalisation", r, Y[r], Fraction(1)))
    procs = constraint_processes(gens)
    for name, (a, b) in gens.rays.items():
        procs.append((f"{name}.A+B", gens.ray_member(name, 1)))
    procs += [(f"sample[{i}]", s.value) for i, s in enumerate(samples)]
    for label, X in procs:
        rep.checked += 1
        v = is_supermartingale(tree, {n: X[n] * Y[n] for n in tree.ids})
        if not v:
            rep.violations.append((f"supermartingale:{label}", v.node, v.lhs, v.rhs))
    floor = Fraction(0) if delta is None else Fraction(delta)

    def need_positive(n, why):
        if Y[n] <= 0 or Y[n] < floor:
            rep.violations.append((why, n, Y[n], floor))

    if mode == STRICT:
        for n in tree.ids:
            need_positive(n, "support")
    elif mode == BEFORE_TTILDE:
        ttilde = ttilde or cemetery_structure(gens).Ttilde
        for n in tree.ids:
            if ttilde.before(n):
                need_positive(n, "support")
            elif Y[n] == 0 and not _all_reps_zero(gens, n):
                rep.violations.append(("zero-set", n, Y[n], floor))
    else:
        if xhat is None:
            raise ValueError("boundary mode needs the dominating process")
        that = hitting_time(tree, xhat)
        for n in tree.ids:
            if that.before(n):
                need_positive(n, "support")
        for leaf in tree.leaves:
            d = anchor_node(tree, that, leaf)
            v = xhat[d] * Y[d]
            if v <= 0 or v < floor:
                rep.violations.append(("anchor", d, v, floor))
    return rep


def extend_after(Y: AdaptedProcess, tau: StoppingTime) -> AdaptedProcess:
    """Y before ``tau``, 1 from ``tau`` on."""
    tree = Y.tree
    return AdaptedProcess(tree, {n: Y[n] if tau.before(n) else Fraction(1) for n in tree.ids})


def fill_zeros(Y: AdaptedProcess) -> AdaptedProcess:
    """Y + 1_{Y = 0}."""
    return AdaptedProcess(Y.tree, {n: v if v != 0 else Fraction(1) for n, v in Y.values.items()})


# -- auxiliary set -----------------------------------------------------------


def build_auxiliary_set(gens: GeneratorSet, xhat: AdaptedProcess) -> GeneratorSet:
    """Discount by xhat before T^ and freeze at the last pre-T^ ratio after.

    Linear in the process, so rays map to rays.  The constant 1 (the image of
    xhat) is added, which makes the result strictly positive-containing.
    """
    if not is_spd_witness(gens, xhat):
        raise ValueError("xhat is not a dominating process for this generator set")
    tree = gens.tree
    that = hitting_time(tree, xhat)

    def discount(X: AdaptedProcess) -> AdaptedProcess:
        out = {}
        for n in tree.ids:
            if that.before(n):
                out[n] = X[n] / xhat[n]
            else:
                leaf = next(iter(tree.leaves_under[n]))
                d = anchor_node(tree, that, leaf)
                out[n] = X[d] / xhat[d]
        return AdaptedProcess(tree, out)

    singles = {"1": AdaptedProcess(tree, {n: Fraction(1) for n in tree.ids})}
    for name, X in gens.singles.items():
        singles[name if name != "1" else "1'"] = discount(X)
    rays = {name: (discount(a), discount(b)) for name, (a, b) in gens.rays.items()}
    return GeneratorSet(tree, singles, rays)


# -- pasting pipeline --------------------------------------------------------


class PipelineError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Stage:
    rung: int
    tree: EventTree
    nodemap: NodeMap  # refined -> base
    tau: StoppingTime  # on the refined tree
    delta: Fraction
    Yplus: AdaptedProcess
    Ybar: AdaptedProcess
    cut: AdaptedProcess
    projected: AdaptedProcess


@dataclass(frozen=True, eq=False)
class PipelineResult:
    deflator: Deflator
    stages: tuple[Stage, ...]
    monotone: bool


def stop(X: AdaptedProcess, tau: StoppingTime) -> AdaptedProcess:
    """X stopped at tau (constant from tau on)."""
    tree = X.tree
    out = {}
    for n in tree.nodes:
        if tau.before(n.id) or n.time == 0:
            out[n.id] = X[n.id]
        else:
            s = tau.at_node(n.id)
            out[n.id] = X[tree.ancestor_at(n.id, min(n.time, s))]
    return AdaptedProcess(tree, out)


def pasting_pipeline(gens: GeneratorSet) -> PipelineResult:
    """Ladder-localised deflator construction on enlarged filtrations.

    For each rung T^i of the cemetery ladder, tau^i = T^i - 1 is made a
    stopping time by revealing {T^i = k} at k - 1; an SPP deflator for the
    stopped generators is solved there, pasted onto the previous rungs at
    tau^{i-1}, cut off after tau^i and projected back.
    """
    base = gens.tree
    cs = cemetery_structure(gens)
    problems = []
    if not cs.absorbing:
        problems.append("absorbing")
    if not check_nupbr_loc(gens):
        problems.append("NUPBR_loc")
    if problems:
        raise PipelineError("precondition failed: " + " and ".join(problems))

    cur_tree, cur_map = base, identity_map(base)
    prev: Stage | None = None
    stages: list[Stage] = []
    for i, rung in enumerate(cs.ladder, start=1):
        hit = rung.hitting
        values = sorted({hit[l] for l in base.leaves}, key=lambda v: (v is INF, 0 if v is INF else v))
        cells, reveal = [], []
        for v in values:
            cells.append({l for l in cur_tree.leaves if hit[cur_map.origin[l]] == v})
            reveal.append(base.horizon if v is INF else v - 1)
        new_tree, step = refine_by_partition(cur_tree, cells, reveal)
        new_map = step.then(cur_map)
        tau_vals = {}
        for l in new_tree.leaves:
            h = hit[new_map.origin[l]]
            tau_vals[l] = base.horizon if h is INF else h - 1
        tau = StoppingTime(new_tree, tau_vals)
        lifted = gens.on(new_tree, new_map.origin)
        stopped = GeneratorSet(new_tree,
                               {k: stop(g, tau) for k, g in lifted.singles.items()},
                               {k: (stop(a, tau), stop(b, tau)) for k, (a, b) in lifted.rays.items()})
        res = synth_deflator_strict(stopped)
        if not res.feasible:
            raise PipelineError(f"rung {i}: stopped SPP deflator LP has delta* = 0")
        yplus = res.deflator.Y
        if prev is None:
            ybar = yplus
        else:
            old = {n: prev.Ybar[step.origin[n]] for n in new_tree.ids}
            ptau = {l: prev.tau[step.origin[l]] for l in new_tree.leaves}
            out = {}
            for node in new_tree.nodes:
                n = node.id
                s = ptau[next(iter(new_tree.leaves_under[n]))]
                if node.time <= s:
                    out[n] = old[n]
                else:
                    a = new_tree.ancestor_at(n, s)
                    out[n] = old[a] / yplus[a] * yplus[n]
            ybar = AdaptedProcess(new_tree, out)
        cut = AdaptedProcess(new_tree, {
            n.id: ybar[n.id] if n.time <= tau_vals[next(iter(new_tree.leaves_under[n.id]))]
            else Fraction(0) for n in new_tree.nodes})
        projected = optional_projection(base, new_map, cut)
        stage = Stage(i, new_tree, new_map, tau, res.delta, yplus, ybar, cut, projected)
        log.debug("rung %d: %d refined nodes, delta %s", i, len(new_tree.ids), fmt(res.delta))
        stages.append(stage)
        prev, cur_tree, cur_map = stage, new_tree, new_map

    monotone = all(stages[k].projected[n] <= stages[k + 1].projected[n]
                   for k in range(len(stages) - 1) for n in base.ids)
    final = stages[-1].projected
    Y = AdaptedProcess(base, {n: final[n] if cs.Ttilde.before(n) else Fraction(0) for n in base.ids})
    support = [Y[n] for n in base.ids if cs.Ttilde.before(n)]
    delta = min(support) if support else Fraction(0)
    return PipelineResult(Deflator(Y, delta, BEFORE_TTILDE), tuple(stages), monotone)
