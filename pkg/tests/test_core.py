import pytest
from hypothesis import given, strategies as st

from cpnkit.core import (
    ArcInscription,
    ColorSet,
    InsufficientTokens,
    Layout,
    Marking,
    MAX_COUNT,
    Multiset,
    Net,
    Place,
    Term,
    Transition,
    Variable,
    canonical_form,
    multiset_add,
    multiset_contains,
    multiset_subtract,
    validate_net,
)

VALUES = ["cash", "m1", "m2", "m3"]
multisets = st.dictionaries(st.sampled_from(VALUES), st.integers(0, 50)).map(Multiset)


class TestMultisetExamples:
    def test_add(self):
        assert multiset_add(Multiset(), Multiset()) == Multiset()
        assert multiset_add(Multiset({"cash": 2}), Multiset({"cash": 3})) == Multiset({"cash": 5})
        assert Multiset({"m1": 1}) + Multiset({"m2": 1}) == Multiset({"m1": 1, "m2": 1})

    def test_subtract(self):
        assert multiset_subtract(Multiset({"cash": 5}), Multiset({"cash": 5})) == Multiset()
        assert len(Multiset({"cash": 5}) - Multiset({"cash": 5})) == 0
        assert Multiset({"cash": 5}) - Multiset({"cash": 2}) == Multiset({"cash": 3})

    def test_subtract_underflow_names_place_and_value(self):
        with pytest.raises(InsufficientTokens, match="insufficient tokens at place P0.*'cash'"):
            multiset_subtract(Multiset({"cash": 1}), Multiset({"cash": 2}), place="P0")

    def test_contains(self):
        assert multiset_contains(Multiset(), Multiset())
        assert not multiset_contains(Multiset({"cash": 3}), Multiset({"cash": 4}))
        assert multiset_contains(Multiset({"m1": 2, "m2": 1}), Multiset({"m1": 1}))

    def test_zero_counts_dropped(self):
        ms = Multiset({"a": 0, "b": 2})
        assert list(ms) == ["b"]
        assert ms.size == 2

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            Multiset({"a": -1})

    def test_overflow_is_an_error(self):
        with pytest.raises(OverflowError):
            Multiset({"a": MAX_COUNT}) + Multiset({"a": 1})

    def test_str(self):
        assert str(Multiset({"a": 2, "b": 1})) == "2`a++1`b"


@given(multisets, multisets)
def test_add_commutative(a, b):
    assert a + b == b + a


@given(multisets, multisets, multisets)
def test_add_associative(a, b, c):
    assert (a + b) + c == a + (b + c)


@given(multisets)
def test_empty_is_identity(a):
    assert a + Multiset() == a


@given(multisets, multisets)
def test_subtract_undoes_add(a, b):
    assert (a + b) - b == a


@given(multisets, multisets, multisets)
def test_contains_is_partial_order(a, b, c):
    assert a >= a
    if a >= b and b >= a:
        assert a == b
    if a >= b and b >= c:
        assert a >= c


@given(multisets, multisets)
def test_size_additive(a, b):
    assert (a + b).size == a.size + b.size


LAYOUT = Layout(("P", "Q"), (("a", "b", "c"), ("x",)))
marking_maps = st.fixed_dictionaries(
    {
        "P": st.dictionaries(st.sampled_from(["a", "b", "c"]), st.integers(0, 4)),
        "Q": st.dictionaries(st.just("x"), st.integers(0, 4)),
    }
)


@given(marking_maps)
def test_canonicalization_idempotent(mapping):
    m = Marking.from_mapping(LAYOUT, mapping)
    again = Marking.from_canonical(LAYOUT, canonical_form(m))
    assert canonical_form(again) == canonical_form(m)
    assert again == m


@given(marking_maps, marking_maps)
def test_canonicalization_injective(m1, m2):
    a, b = Marking.from_mapping(LAYOUT, m1), Marking.from_mapping(LAYOUT, m2)
    same = all(Multiset(m1[p]) == Multiset(m2[p]) for p in ("P", "Q"))
    assert (canonical_form(a) == canonical_form(b)) == same
    assert (a == b) == same
    if same:
        assert hash(a) == hash(b) and a.to_bytes() == b.to_bytes()


def test_canonical_order_follows_declarations():
    m = Marking.from_mapping(LAYOUT, {"Q": {"x": 1}, "P": {"c": 2, "a": 1}})
    assert canonical_form(m) == (("P", "a", 1), ("P", "c", 2), ("Q", "x", 1))
    assert m["P"] == Multiset({"a": 1, "c": 2})
    assert m.total("P") == 3


def test_marking_rejects_foreign_color():
    with pytest.raises(ValueError):
        Marking.from_mapping(LAYOUT, {"Q": {"a": 1}})


def test_color_set_invariants():
    with pytest.raises(ValueError):
        ColorSet("C", ())
    with pytest.raises(ValueError):
        ColorSet("C", ("a", "a"))


def _small_net(**overrides):
    base = dict(
        name="n",
        color_sets=(ColorSet("C", ("a", "b")),),
        variables=(Variable("x", "C"),),
        places=(Place("P", "C"), Place("Q", "C", capacity=2)),
        transitions=(
            Transition("T", inputs={"P": ArcInscription((Term(1, "x", True),))},
                       outputs={"Q": ArcInscription.constant("a")}),
        ),
        initial_marking={"P": Multiset({"a": 1})},
    )
    base.update(overrides)
    return Net(**base)


class TestValidateNet:
    def test_well_formed(self):
        assert validate_net(_small_net()) == []

    def test_dangling_place(self):
        t = Transition("T", outputs={"PX": ArcInscription.constant("a")})
        diags = validate_net(_small_net(transitions=(t,)))
        assert [(d.category, d.element) for d in diags] == [("dangling-reference", "PX")]

    def test_capacity_violated_initially(self):
        diags = validate_net(_small_net(initial_marking={"Q": Multiset({"a": 3})}))
        assert [d.category for d in diags] == ["capacity-violated-initially"]
        assert diags[0].element == "Q"

    def test_type_mismatch(self):
        t = Transition("T", outputs={"Q": ArcInscription.constant("zzz")})
        assert [d.category for d in validate_net(_small_net(transitions=(t,)))] == ["type-mismatch"]

    def test_variable_type_mismatch(self):
        nets = _small_net(
            color_sets=(ColorSet("C", ("a", "b")), ColorSet("D", ("d",))),
            variables=(Variable("x", "D"),),
        )
        assert "type-mismatch" in [d.category for d in validate_net(nets)]

    def test_duplicate_names(self):
        diags = validate_net(_small_net(places=(Place("P", "C"), Place("P", "C"), Place("Q", "C"))))
        assert [(d.category, d.element) for d in diags] == [("duplicate-name", "P")]

    def test_input_inhibitor_overlap(self):
        t = Transition("T", inputs={"P": ArcInscription.constant("a")}, inhibitors={"P": 1})
        diags = validate_net(_small_net(transitions=(t,)))
        assert [d.category for d in diags] == ["input-and-inhibitor-overlap"]

    def test_unknown_color_set(self):
        diags = validate_net(_small_net(places=(Place("P", "C"), Place("Q", "NOPE"))))
        assert ("dangling-reference", "NOPE") in [(d.category, d.element) for d in diags]

    def test_variable_shadowing_value(self):
        diags = validate_net(_small_net(variables=(Variable("a", "C"),)))
        assert ("duplicate-name", "a") in [(d.category, d.element) for d in diags]

    def test_gscm_is_well_formed(self, gscm_net):
        assert validate_net(gscm_net) == []


def test_net_initial_marking_is_normalised():
    n1 = _small_net(initial_marking={"Q": Multiset({"a": 1}), "P": Multiset({"a": 1})})
    n2 = _small_net(initial_marking=(("P", Multiset({"a": 1})), ("Q", Multiset({"a": 1}))))
    assert n1 == n2
    assert [p for p, _ in n1.initial_marking] == ["P", "Q"]


def test_inscription_evaluation():
    ins = ArcInscription((Term(2, "x", True), Term(1, "a")))
    assert ins.evaluate({"x": "a"}) == Multiset({"a": 3})
    assert ins.evaluate({"x": "b"}) == Multiset({"a": 1, "b": 2})
