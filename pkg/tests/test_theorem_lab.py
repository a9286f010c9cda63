import json

import pytest
from hypothesis import given, strategies as st

from forkconvex.ext import INF
from forkconvex.process_sets import cemetery_structure, classify
from forkconvex.theorem_lab import (DEFAULT_GALLERY, GALLERY_NAMES, check_enlargement_stability,
                                    check_theorem_equivalences, fuzz, gallery, gallery_instance,
                                    implication_matrix, random_instance, standard_partitions,
                                    verdict_tuple, verify_char_time)

T, F = True, False

PINNED = {
    # name: (kind, absorbing, equivalence verdicts (1)-(4))
    "binomial": ("SPP", T, (T, T, T, T)),
    "binomial2": ("SPP", T, (T, T, T, T)),
    "ex1": ("SPD", T, (F, F, F, F)),
    "xquestion": ("SPD", F, (F, F, T, T)),
    "sec3": ("SPP", T, (T, T, T, T)),
    "ladder": ("SPD", T, (T, T, T, T)),
    "revival": ("SPD", F, (F, F, F, T)),
    "split": ("SPD", T, (T, T, T, T)),
    "ex3-1": ("SPD", T, (T, T, T, T)),
    "ex3-3": ("SPD", T, (T, T, T, T)),
}


def test_pins_cover_the_default_gallery():
    assert set(PINNED) == set(DEFAULT_GALLERY)


@pytest.mark.parametrize("name", sorted(PINNED))
def test_gallery_verdicts(name):
    kind, absorbing, eq = PINNED[name]
    v = verdict_tuple(gallery_instance(name))
    assert (v["kind"], v["absorbing"], v["equivalences"]) == (kind, absorbing, eq)
    assert v["nupbr"] == eq[2]


@pytest.mark.parametrize("name", sorted(PINNED))
def test_gallery_is_consistent(name):
    assert check_theorem_equivalences(gallery(name)).consistent


def test_ex3_family_is_parametrised():
    inst = gallery_instance("ex3-4")
    assert inst.tree.horizon == 5 and inst.xhat_name == "xhat"
    with pytest.raises(ValueError):
        gallery_instance("ex3-0")


def test_unknown_gallery_name_lists_choices():
    with pytest.raises(KeyError, match="binomial"):
        gallery_instance("nope")
    assert "ex3-N" in GALLERY_NAMES


def test_implication_matrix_only_closes_the_loop_when_absorbing():
    assert implication_matrix([F, F, T, T], absorbing=False) == {
        "(1)<=>(2)": T, "(2)=>(3)": T, "(3)=>(4)": T}
    assert implication_matrix([F, F, T, T], absorbing=True)["(4)=>(1) [absorbing]"] is False


def test_equivalence_witnesses_name_the_blocking_constraint():
    r = check_theorem_equivalences(gallery("ex1"))
    assert "smd[v.B@t0]" in r.statements["2"].witness
    assert "t = 1" in r.statements["3"].witness


@given(st.integers(0, 10_000))
def test_equivalences_hold_on_absorbing_instances(seed):
    r = check_theorem_equivalences(random_instance(seed, absorbing=True))
    assert r.absorbing and r.consistent
    assert len(set(r.verdicts())) == 1


@given(st.integers(0, 10_000))
def test_forward_chain_holds_without_absorption(seed):
    assert check_theorem_equivalences(random_instance(seed, absorbing=False)).consistent


# -- characterisation time -----------------------------------------------------


def test_cemetery_time_of_the_ladder_passes_both_hypotheses():
    gens = gallery("ladder")
    v = verify_char_time(gens, cemetery_structure(gens).Ttilde)
    assert v and v.hypotheses_hold and v.equal


def test_one_step_early_breaks_the_zero_hypothesis():
    gens = gallery("ladder")
    v = verify_char_time(gens, {"t3": 2})
    assert not v.hypotheses_hold and v.failed[0].startswith("(ii)")
    assert v.mismatch == "t3"


def test_constant_time_on_the_split_tree_breaks_positivity():
    gens = gallery("split")
    v = verify_char_time(gens, {"uu": 2, "dd": 2})
    assert v.failed == ("(i) positive on [0, s]", 1, 2, "dd") and not v.equal


def test_char_time_rejects_nonpositive_times():
    with pytest.raises(ValueError, match="positive"):
        verify_char_time(gallery("ladder"), {"t3": 0})


@given(st.integers(0, 10_000))
def test_cemetery_time_satisfies_its_characterisation(seed):
    gens = random_instance(seed, absorbing=True)
    ttilde = cemetery_structure(gens).Ttilde
    if any(ttilde[l] is not INF and ttilde[l] == 0 for l in gens.tree.leaves):
        return
    assert verify_char_time(gens, ttilde)


# -- enlargement -----------------------------------------------------------------


@pytest.mark.parametrize("name", ["binomial", "binomial2", "ex1", "ladder", "split", "ex3-2"])
def test_enlargement_preserves_the_verdict_on_the_gallery(name):
    gens = gallery(name)
    for cells, reveal in standard_partitions(gens.tree):
        v = check_enlargement_stability(gens, cells, reveal)
        assert v and v.base_holds == v.refined_holds and v.replay_checked > 0


@given(st.integers(0, 10_000))
def test_enlargement_never_destroys_nupbr(seed):
    gens = random_instance(seed, absorbing=True)
    for cells, reveal in standard_partitions(gens.tree):
        assert check_enlargement_stability(gens, cells, reveal, count=6, seed=seed)


# -- fuzzing ---------------------------------------------------------------------


def test_fuzz_run_is_clean_and_reproducible(tmp_path):
    a = fuzz(30, seed=5, out_dir=tmp_path)
    b = fuzz(30, seed=5)
    assert a.ok and a.instances == 30 and a.absorbing >= 15
    assert a.combinations == b.combinations
    assert not list(tmp_path.iterdir())


def test_random_instances_are_deterministic():
    a, b = random_instance(42), random_instance(42)
    assert a.tree.to_spec() == b.tree.to_spec()
    assert {k: dict(g.values) for k, g in a.singles.items()} == \
           {k: dict(g.values) for k, g in b.singles.items()}


@given(st.integers(0, 10_000))
def test_absorbing_flag_is_honoured(seed):
    gens = random_instance(seed, absorbing=True)
    assert cemetery_structure(gens).absorbing
    assert classify(gens).kind in ("SPP", "SPD")


def test_verdict_tuple_is_json_friendly():
    json.dumps(verdict_tuple(gallery_instance("ex1")))
