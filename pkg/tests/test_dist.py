from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from ctclab import rational
from ctclab.dist import (
    Kernel,
    StringDist,
    cycle_kernel,
    expected_length,
    explore_chain,
    identity_kernel,
    is_fixed_point,
    push_forward,
    successor_kernel,
    table_kernel,
    tv_distance,
)
from ctclab.errors import ContractError, StructuralError
from ctclab.graph import strongly_connected_components

HALF = F(1, 2)


def test_stringdist_invariants():
    d = StringDist({"0": HALF, "1": 0, "00": HALF})
    assert list(d) == ["0", "00"]
    assert d.is_normalized
    assert StringDist({"0": F(1, 3)}).mass == F(1, 3)
    with pytest.raises(StructuralError):
        StringDist({"0": F(3, 4), "1": F(1, 2)})
    with pytest.raises(StructuralError):
        StringDist({"0": F(-1, 2)})


def test_tv_examples():
    d = StringDist({"0": HALF, "1": HALF})
    assert tv_distance(d, d) == 0
    assert tv_distance(StringDist.point("0"), StringDist.point("1")) == 1
    assert tv_distance(d, StringDist({"0": F(3, 4), "1": F(1, 4)})) == F(1, 4)
    with pytest.raises(ContractError):
        tv_distance(StringDist({"0": HALF}), d)


def test_expected_length():
    assert expected_length(StringDist.point("")) == 0
    assert expected_length(StringDist.point("0101")) == 4
    assert expected_length(StringDist({"0": HALF, "00": HALF})) == F(3, 2)


def test_push_forward_examples():
    d = StringDist({"0": F(1, 3), "11": F(2, 3)})
    assert push_forward(identity_kernel(), d) == d
    assert push_forward(successor_kernel(), StringDist.point("0")) == StringDist.point("1")


def test_kernel_rejects_unnormalized_rows():
    k = Kernel(lambda y: StringDist({y: HALF}), "leaky")
    with pytest.raises(StructuralError):
        k.apply("0")


def test_explore_identity_and_cycle():
    r = explore_chain(identity_kernel(), ["0"], 10)
    assert r.closed_classes == [(0,)]
    assert r.stationary == [StringDist.point("0")]
    r = explore_chain(cycle_kernel(["0", "1"]), ["0"], 10)
    assert r.stationary == [StringDist({"0": HALF, "1": HALF})]
    assert not r.leaked


def test_successor_leaks():
    r = explore_chain(successor_kernel(), ["0"], 16)
    assert r.leaked
    assert r.stationary == []


def test_is_fixed_point_examples():
    k = cycle_kernel(["0", "1"])
    assert is_fixed_point(k, StringDist({"0": HALF, "1": HALF}))
    assert not is_fixed_point(k, StringDist.point("0"))
    assert is_fixed_point(identity_kernel(), StringDist({"0": HALF, "1": HALF}))


def test_open_states_never_closed():
    # "a" -> {"a", "b"}; cap stops before "b" is discovered
    k = table_kernel({"a": {"a": HALF, "b": HALF}, "b": {"b": 1}})
    r = explore_chain(k, ["a"], 1)
    assert r.leaked and r.stationary == []


def test_seed_order_independence():
    k = table_kernel({"0": {"1": HALF, "00": HALF}, "1": {"0": 1}, "00": {"1": F(1, 3), "00": F(2, 3)}})
    a = explore_chain(k, ["0", "00"], 10)
    b = explore_chain(k, ["00", "0"], 10)
    assert a.states == b.states and a.stationary == b.stationary


def test_two_closed_classes():
    k = table_kernel({"0": {"1": HALF, "00": HALF}, "1": {"1": 1}, "00": {"01": 1}, "01": {"00": 1}})
    r = explore_chain(k, ["0"], 10)
    assert [sorted(d) for d in r.stationary] == [["1"], ["00", "01"]]


def test_rational_solve():
    x = rational.solve([{0: F(2), 1: F(1)}, {0: F(1), 1: F(3)}], [F(3), F(5)], 2)
    assert x == [F(4, 5), F(7, 5)]
    with pytest.raises(ContractError):
        rational.solve([{0: F(1), 1: F(1)}, {0: F(2), 1: F(2)}], [F(1), F(2)], 2)


def test_scc_long_chain_no_recursion_limit():
    n = 20_000
    comps = strongly_connected_components(n, [[i + 1] if i + 1 < n else [0] for i in range(n)])
    assert len(comps) == 1 and len(comps[0]) == n


# random exact kernels on a small state space
STATES = ["", "0", "1", "00"]


@st.composite
def rows(draw):
    out = {}
    for s in STATES:
        w = draw(st.lists(st.integers(0, 4), min_size=len(STATES), max_size=len(STATES)).filter(any))
        out[s] = {t: F(c, sum(w)) for t, c in zip(STATES, w) if c}
    return out


@st.composite
def dists(draw):
    w = draw(st.lists(st.integers(0, 5), min_size=len(STATES), max_size=len(STATES)).filter(any))
    return StringDist({s: F(c, sum(w)) for s, c in zip(STATES, w)})


@settings(max_examples=200, deadline=None)
@given(rows(), dists(), dists())
def test_contraction_and_mass(r, d1, d2):
    k = table_kernel(r)
    e1, e2 = push_forward(k, d1), push_forward(k, d2)
    assert e1.mass == 1
    assert tv_distance(e1, e2) <= tv_distance(d1, d2)


@settings(max_examples=100, deadline=None)
@given(rows())
def test_stationary_outputs_are_fixed_points(r):
    k = table_kernel(r)
    rep = explore_chain(k, STATES, 10)
    assert rep.stationary
    for pi in rep.stationary:
        assert is_fixed_point(k, pi)
