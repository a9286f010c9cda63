import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from forkconvex.gsm import (RawProcess, UndefinedRatio, compare_projection,
                            is_generalized_supermartingale, projection, time_means)
from forkconvex.theorem_lab import gallery_instance, random_tree
from forkconvex.tree import AdaptedProcess, TreeError, is_supermartingale


def sec3():
    inst = gallery_instance("sec3")
    return inst.tree, inst.raw


def brute_force_gsm(tree, Z):
    """Every union of F_s atoms, ratios computed leaf by leaf."""
    for s in range(tree.horizon + 1):
        atoms = tree.nodes_at(s)
        for t in range(s + 1, tree.horizon + 1):
            for k in range(1, len(atoms) + 1):
                for union in combinations(atoms, k):
                    lhs = prob = Fraction(0)
                    for a in union:
                        prob += tree.uprob[a]
                        for leaf in tree.leaves_under[a]:
                            num, den = Z(leaf, t), Z(leaf, s)
                            lhs += tree.uprob[leaf] * (num / den if den else Fraction(1))
                    if lhs > prob:
                        return False
    return True


def random_raw(seed, positive=True):
    rng = random.Random(seed)
    tree = random_tree(rng, max_steps=3, max_branch=2)
    lo = 1 if positive else 0
    vals = {leaf: tuple(Fraction(rng.randint(lo, 6), rng.randint(1, 3)) for _ in range(tree.horizon + 1))
            for leaf in tree.leaves}
    return tree, RawProcess(tree, vals)


def test_first_raw_process_is_gsm_but_its_projection_is_not_a_supermartingale():
    tree, raw = sec3()
    c = compare_projection(tree, raw["Z"])
    assert (c.gsm, c.projection_supermartingale) == (True, False)
    assert time_means(tree, c.projection, [0, 1, 2]) == [5, 4, 5]


def test_second_raw_process_is_not_gsm_but_its_projection_is_a_supermartingale():
    tree, raw = sec3()
    c = compare_projection(tree, raw["W"])
    assert (c.gsm, c.projection_supermartingale) == (False, True)
    w = c.gsm_verdict.witness
    assert (w.s, w.t, w.lhs, w.rhs) == (1, 2, Fraction(4, 3), 1)
    assert time_means(tree, c.projection, [0, 1, 2]) == [5, 5, 4]


def test_both_agree_for_constants_and_for_growth():
    tree, _ = sec3()
    one = RawProcess(tree, {leaf: (1,) for leaf in tree.leaves})
    grow = RawProcess(tree, {leaf: (1, 2, 3, 4) for leaf in tree.leaves})
    c1, c2 = compare_projection(tree, one), compare_projection(tree, grow)
    assert (c1.gsm, c1.projection_supermartingale) == (True, True)
    assert (c2.gsm, c2.projection_supermartingale) == (False, False)


def test_ratio_with_zero_denominator_is_undefined():
    tree, _ = sec3()
    Z = RawProcess(tree, {"a": (1, 0, 2), "b": (1, 1, 1)})
    with pytest.raises(UndefinedRatio, match="leaf 'a'"):
        is_generalized_supermartingale(tree, Z)


def test_zero_over_zero_counts_as_one():
    tree, _ = sec3()
    Z = RawProcess(tree, {"a": (1, 0, 0), "b": (1, 1, 1)})
    v = is_generalized_supermartingale(tree, Z)
    assert v
    row = next(r for r in v.table if (r.s, r.t) == (1, 2))
    assert row.lhs == 1


def test_short_paths_repeat_their_last_value():
    tree, raw = sec3()
    assert raw["Z"]("a", 3) == 9


@pytest.mark.parametrize("bad, msg", [
    ({"a": (1,)}, "no path for leaf 'b'"),
    ({"a": (1,), "b": ()}, "empty value path"),
    ({"a": (1, 1, 1, 1, 1), "b": (1,)}, "horizon is 3"),
    ({"a": (1, -1), "b": (1,)}, "negative value"),
    ({"a": (1,), "b": (1,), "c": (1,)}, "unknown leaf 'c'"),
])
def test_malformed_raw_process(bad, msg):
    tree, _ = sec3()
    with pytest.raises(TreeError, match=msg):
        RawProcess(tree, bad)


def test_record_round_trip():
    tree, raw = sec3()
    rec = raw["W"].to_record()
    again = RawProcess(tree, {k: tuple(Fraction(x) for x in v) for k, v in rec.items()})
    assert again.values == raw["W"].values


@given(st.integers(0, 10_000))
def test_atom_check_matches_union_brute_force(seed):
    tree, Z = random_raw(seed)
    assert bool(is_generalized_supermartingale(tree, Z)) == brute_force_gsm(tree, Z)


@given(st.integers(0, 10_000))
def test_adapted_positive_processes_gsm_iff_supermartingale(seed):
    rng = random.Random(seed)
    tree = random_tree(rng, max_steps=3, max_branch=3)
    X = AdaptedProcess(tree, {n: Fraction(rng.randint(1, 6), rng.randint(1, 3)) for n in tree.ids})
    Z = RawProcess.from_adapted(X)
    assert bool(is_generalized_supermartingale(tree, Z)) == bool(is_supermartingale(tree, X))


@given(st.integers(0, 10_000))
def test_projection_of_an_adapted_process_is_itself(seed):
    rng = random.Random(seed)
    tree = random_tree(rng, max_steps=3, max_branch=3)
    X = AdaptedProcess(tree, {n: Fraction(rng.randint(0, 6)) for n in tree.ids})
    assert projection(tree, RawProcess.from_adapted(X)).same_values(X)


@given(st.integers(0, 10_000))
def test_projection_preserves_unconditional_means(seed):
    tree, Z = random_raw(seed, positive=False)
    proj = projection(tree, Z)
    for t in range(tree.horizon + 1):
        direct = sum(tree.uprob[leaf] * Z(leaf, t) for leaf in tree.leaves)
        assert time_means(tree, proj, [t]) == [direct]
