"""Generator sets, the cc / sw operators, closure sampling and classification."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .ext import INF, fmt
from .tree import AdaptedProcess, EventTree, StoppingTime, TreeError, hitting_time


class AdmissibilityError(ValueError):
    """A switch into a process that vanishes where the current one does not."""

    def __init__(self, node: str, x_val: Fraction, xp_val: Fraction):
        self.node = node
        super().__init__(
            f"switch not admissible at node {node!r}: X'_t = {fmt(xp_val)} but X_t = {fmt(x_val)}")


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    tree: EventTree
    singles: Mapping[str, AdaptedProcess] = field(default_factory=dict)
    rays: Mapping[str, tuple[AdaptedProcess, AdaptedProcess]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.singles and not self.rays:
            raise TreeError("generator set is empty")
        overlap = set(self.singles) & set(self.rays)
        if overlap:
            raise TreeError(f"name {sorted(overlap)[0]!r} used for a single and a ray")
        for name, g in self.singles.items():
            if g.tree is not self.tree:
                raise TreeError(f"generator {name!r} lives on another tree")
            for r in self.tree.roots:
                if g[r] != 1:
                    raise TreeError(f"generator {name!r} has root value {fmt(g[r])}, expected 1")
        for name, (a, b) in self.rays.items():
            if a.tree is not self.tree or b.tree is not self.tree:
                raise TreeError(f"ray {name!r} lives on another tree")
            for r in self.tree.roots:
                if a[r] != 1 or b[r] != 0:
                    raise TreeError(f"ray {name!r} needs A(root) = 1 and B(root) = 0")

    def representatives(self) -> list[tuple["Recipe", AdaptedProcess]]:
        """Singles, and A (x = 0) plus A + B (x = 1) for each ray."""
        out: list[tuple[Recipe, AdaptedProcess]] = []
        for name, g in self.singles.items():
            out.append((Gen(name), g))
        for name in self.rays:
            for x in (Fraction(0), Fraction(1)):
                out.append((RayGen(name, x), self.ray_member(name, x)))
        return out

    def ray_member(self, name: str, x) -> AdaptedProcess:
        a, b = self.rays[name]
        x = Fraction(x)
        if x < 0:
            raise ValueError("ray parameter must be nonnegative")
        return AdaptedProcess(self.tree, {n: a[n] + x * b[n] for n in self.tree.ids})

    def on(self, tree: EventTree, origin: Mapping[str, str]) -> "GeneratorSet":
        """The same generators read through a node map onto another tree."""
        def mv(p):
            return AdaptedProcess(tree, {n: p[origin[n]] for n in tree.ids})
        return GeneratorSet(tree, {k: mv(g) for k, g in self.singles.items()},
                            {k: (mv(a), mv(b)) for k, (a, b) in self.rays.items()})

    def with_single(self, name: str, g: AdaptedProcess) -> "GeneratorSet":
        singles = dict(self.singles)
        singles[name] = g
        return GeneratorSet(self.tree, singles, self.rays)


# -- operators ---------------------------------------------------------------


def convex_combine(X: AdaptedProcess, Xp: AdaptedProcess, alpha) -> AdaptedProcess:
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha = {fmt(alpha)} outside [0, 1]")
    if X.tree is not Xp.tree:
        raise TreeError("processes live on different trees")
    return AdaptedProcess(X.tree, {n: (1 - alpha) * X[n] + alpha * Xp[n] for n in X.tree.ids})


def switch(X: AdaptedProcess, Xp: AdaptedProcess, t: int, atoms) -> AdaptedProcess:
    """Follow X, and from time t on the atoms in ``atoms`` move into Xp.

    On a switched atom the value from t on is (X_t / X'_t) X', with 0/0 = 1.
    """
    tree = X.tree
    if Xp.tree is not tree:
        raise TreeError("processes live on different trees")
    atoms = frozenset(atoms)
    level = set(tree.nodes_at(t)) if 0 <= t <= tree.horizon else set()
    stray = atoms - level
    if stray:
        raise TreeError(f"switch atom {sorted(stray)[0]!r} is not a time-{t} node")
    for a in atoms:
        if Xp[a] == 0 and X[a] != 0:
            raise AdmissibilityError(a, X[a], Xp[a])
    out = dict(X.values)
    for n in tree.nodes:
        if n.time < t:
            continue
        a = tree.ancestor_at(n.id, t)
        if a not in atoms:
            continue
        scale = Fraction(1) if Xp[a] == 0 else X[a] / Xp[a]
        out[n.id] = scale * Xp[n.id]
    return AdaptedProcess(tree, out)


def is_absorbing(tree: EventTree, X: AdaptedProcess) -> bool:
    return all(X[c] == 0 for n in tree.ids if X[n] == 0 for c in tree.children[n])


# -- recipes -----------------------------------------------------------------


@dataclass(frozen=True)
class Gen:
    name: str


@dataclass(frozen=True)
class RayGen:
    name: str
    x: Fraction


@dataclass(frozen=True)
class CC:
    alpha: Fraction
    left: "Recipe"
    right: "Recipe"


@dataclass(frozen=True)
class SW:
    t: int
    atoms: tuple[str, ...]
    left: "Recipe"
    right: "Recipe"


Recipe = Union[Gen, RayGen, CC, SW]


def evaluate(gens: GeneratorSet, recipe: Recipe) -> AdaptedProcess:
    if isinstance(recipe, Gen):
        return gens.singles[recipe.name]
    if isinstance(recipe, RayGen):
        return gens.ray_member(recipe.name, recipe.x)
    if isinstance(recipe, CC):
        return convex_combine(evaluate(gens, recipe.left), evaluate(gens, recipe.right),
                              recipe.alpha)
    if isinstance(recipe, SW):
        return switch(evaluate(gens, recipe.left), evaluate(gens, recipe.right), recipe.t,
                      recipe.atoms)
    raise TypeError(f"not a recipe: {recipe!r}")


def recipe_depth(recipe: Recipe) -> int:
    if isinstance(recipe, (CC, SW)):
        return 1 + max(recipe_depth(recipe.left), recipe_depth(recipe.right))
    return 0


def recipe_to_record(recipe: Recipe) -> dict:
    if isinstance(recipe, Gen):
        return {"gen": recipe.name}
    if isinstance(recipe, RayGen):
        return {"ray": recipe.name, "x": fmt(recipe.x)}
    if isinstance(recipe, CC):
        return {"cc": fmt(recipe.alpha), "left": recipe_to_record(recipe.left),
                "right": recipe_to_record(recipe.right)}
    return {"sw": recipe.t, "atoms": list(recipe.atoms), "left": recipe_to_record(recipe.left),
            "right": recipe_to_record(recipe.right)}


def recipe_from_record(rec: Mapping) -> Recipe:
    if "gen" in rec:
        return Gen(str(rec["gen"]))
    if "ray" in rec:
        return RayGen(str(rec["ray"]), Fraction(rec["x"]))
    if "cc" in rec:
        return CC(Fraction(rec["cc"]), recipe_from_record(rec["left"]),
                  recipe_from_record(rec["right"]))
    if "sw" in rec:
        return SW(int(rec["sw"]), tuple(rec["atoms"]), recipe_from_record(rec["left"]),
                  recipe_from_record(rec["right"]))
    raise ValueError(f"unrecognised recipe record {dict(rec)!r}")


@dataclass(frozen=True, eq=False)
class ClosureElement:
    recipe: Recipe
    value: AdaptedProcess


def element(gens: GeneratorSet, recipe: Recipe) -> ClosureElement:
    return ClosureElement(recipe, evaluate(gens, recipe))


_ALPHAS = tuple(Fraction(k, 8) for k in range(9)) + (Fraction(99, 100), Fraction(1, 100))


def sample_closure(gens: GeneratorSet, depth: int, seed: int,
                   ray_values: Sequence = (0, 1), count: int = 32,
                   max_retries: int = 200) -> list[ClosureElement]:
    """Seeded sample of closure elements with nesting depth <= ``depth``.

    The generator representatives (rays at each of ``ray_values``) come first;
    for ``depth > 0`` another ``count`` random recipes follow.  Inadmissible
    switches are redrawn.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    xs = [Fraction(x) for x in ray_values]
    leaves: list[Recipe] = [Gen(n) for n in gens.singles]
    leaves += [RayGen(n, x) for n in gens.rays for x in xs]
    out = [element(gens, r) for r in leaves]
    if depth == 0:
        return out
    rng = random.Random(seed)
    tree = gens.tree

    def draw(d: int) -> ClosureElement:
        if d == 0 or rng.random() < 0.25:
            r = rng.choice(leaves)
            return element(gens, r)
        left, right = draw(d - 1), draw(d - 1)
        if rng.random() < 0.4:
            alpha = rng.choice(_ALPHAS)
            r = CC(alpha, left.recipe, right.recipe)
            return ClosureElement(r, convex_combine(left.value, right.value, alpha))
        for _ in range(max_retries):
            t = rng.randrange(tree.horizon + 1)
            level = tree.nodes_at(t)
            atoms = tuple(a for a in level if rng.random() < 0.6) or (rng.choice(level),)
            try:
                val = switch(left.value, right.value, t, atoms)
            except AdmissibilityError:
                continue
            return ClosureElement(SW(t, atoms, left.recipe, right.recipe), val)
        raise SamplingError(f"no admissible switch found after {max_retries} draws")

    for _ in range(count):
        out.append(draw(depth))
    return out


# -- classification and cemetery structure -----------------------------------


@dataclass(frozen=True, eq=False)
class Classification:
    kind: str  # "SP" | "SPD" | "SPP"
    witness: AdaptedProcess | None
    recipe: Recipe | None


def uniform_mixture(gens: GeneratorSet) -> tuple[Recipe, AdaptedProcess]:
    """Equal-weight mixture of every single and of A + B for each ray."""
    parts: list[Recipe] = [Gen(n) for n in gens.singles] + [RayGen(n, Fraction(1)) for n in gens.rays]
    recipe = parts[0]
    for k, r in enumerate(parts[1:], start=2):
        recipe = CC(Fraction(1, k), recipe, r)
    return recipe, evaluate(gens, recipe)


def classify(gens: GeneratorSet) -> Classification:
    recipe, xhat = uniform_mixture(gens)
    tree = gens.tree
    if all(xhat[n] > 0 for n in tree.ids):
        return Classification("SPP", xhat, recipe)
    reps = [p for _, p in gens.representatives()]
    if all(r[n] == 0 for n in tree.ids if xhat[n] == 0 for r in reps):
        return Classification("SPD", xhat, recipe)
    return Classification("SP", None, None)


def is_spd_witness(gens: GeneratorSet, xhat: AdaptedProcess) -> bool:
    reps = [p for _, p in gens.representatives()]
    return all(xhat[r] == 1 for r in gens.tree.roots) and all(
        rep[n] == 0 for n in gens.tree.ids if xhat[n] == 0 for rep in reps)


@dataclass(frozen=True, eq=False)
class LadderRung:
    recipe: Recipe
    process: AdaptedProcess
    hitting: StoppingTime


@dataclass(frozen=True, eq=False)
class CemeteryStructure:
    Ttilde: StoppingTime
    ladder: tuple[LadderRung, ...]
    absorbing: bool


def cemetery_structure(gens: GeneratorSet) -> CemeteryStructure:
    """Cemetery times of the representatives, the ladder and T~.

    Rungs are running 1/2-mixtures of the representatives taken in order of
    expected hitting time, keeping a rung only when its hitting time changes.
    T~ is the hitting time of the last rung: the first time every
    representative is 0.  Under absorbing generators this is the pathwise
    maximum of the representatives' hitting times; without absorption a
    mixture can outlive all of its parts, and T~ follows the mixture.
    """
    tree = gens.tree
    reps = gens.representatives()
    hits = [hitting_time(tree, p) for _, p in reps]

    def key(i):
        vals = [tree.horizon + 1 if hits[i][l] is INF else hits[i][l] for l in tree.leaves]
        return (sum(tree.uprob[l] * v for l, v in zip(tree.leaves, vals)), i)

    ladder: list[LadderRung] = []
    recipe, proc = None, None
    for i in sorted(range(len(reps)), key=key):
        r, p = reps[i]
        if recipe is None:
            recipe, proc = r, p
        else:
            recipe = CC(Fraction(1, 2), recipe, r)
            proc = convex_combine(proc, p, Fraction(1, 2))
        h = hitting_time(tree, proc)
        if ladder and ladder[-1].hitting.same_values(h):
            continue
        ladder.append(LadderRung(recipe, proc, h))
    absorbing = all(is_absorbing(tree, p) for _, p in reps)
    return CemeteryStructure(ladder[-1].hitting, tuple(ladder), absorbing)
