from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from ctclab.deutsch import CtcMachine, constant_label, halting_kernel
from ctclab.dist import (
    Kernel,
    StringDist,
    cycle_kernel,
    identity_kernel,
    metropolis_kernel,
    push_forward,
    table_kernel,
    tv_distance,
)
from ctclab.errors import ContractError, ResourceError
from ctclab.outcomes import Outcome, Verdict
from ctclab.search import bounded_length_search, finite_support_search, grid_candidates

ACC = constant_label(Outcome.ACCEPT)
REJ = constant_label(Outcome.REJECT)


def test_identity_accepts_at_level_zero():
    r = finite_support_search(CtcMachine(identity_kernel(), ACC), 4)
    assert r.verdict == Verdict.ACCEPT and r.level == 0


def test_halt3_found_at_history_length(halt3):
    m = halting_kernel(halt3)
    s3 = m.histories.raw(3)
    r = finite_support_search(m, len(s3))
    assert r.verdict == Verdict.ACCEPT
    assert r.level == len(s3)
    assert r.fixed_point == StringDist.point(s3)
    assert finite_support_search(m, len(s3) - 1).verdict == Verdict.NOT_FOUND


def test_halt1_agrees_with_ctc_decision(corpus):
    m = halting_kernel(corpus.spec("HALT1"))
    r = finite_support_search(m, 8)
    assert r.verdict == Verdict.ACCEPT
    assert m.decision(r.fixed_point) == Verdict.ACCEPT


def test_looper_not_found(looper):
    assert finite_support_search(halting_kernel(looper), 14).verdict == Verdict.NOT_FOUND


def test_ambiguous_class_is_skipped():
    # {"0","1"} is a closed 2-cycle labeled half/half; "00" is a rejecting fixed point
    k = table_kernel({"": {"0": 1}, "0": {"1": 1}, "1": {"0": 1}, "00": {"00": 1}})
    label = lambda y: Outcome.ACCEPT if y == "0" else Outcome.REJECT
    r = finite_support_search(CtcMachine(k, label), 3)
    assert r.verdict == Verdict.REJECT and r.level == 2


def test_grid_candidates():
    cands = list(grid_candidates(["0", "1"], 4))
    assert len(cands) == 5
    assert cands[0] == StringDist.point("0")
    assert all(c.is_normalized for c in cands)


def test_bounded_identity_accepts():
    m = CtcMachine(identity_kernel(["0", "1"]), ACC)
    r = bounded_length_search(m, 1, 10, 4)
    assert r.verdict == Verdict.ACCEPT
    assert len(r.survivors) == r.n_candidates == 5


def test_bounded_two_cycle():
    m = CtcMachine(cycle_kernel(["0", "1"]), ACC)
    r = bounded_length_search(m, 1, 10, 4)
    assert r.verdict == Verdict.ACCEPT
    assert StringDist({"0": F(1, 2), "1": F(1, 2)}) in r.survivors
    assert r.eliminated[StringDist.point("0")] == 1
    assert r.eliminated[StringDist.point("1")] == 1
    r = bounded_length_search(CtcMachine(cycle_kernel(["0", "1"]), REJ), 1, 10, 4)
    assert r.verdict == Verdict.REJECT


def test_mixed_survivors_exhaust():
    label = lambda y: Outcome.ACCEPT if y == "0" else Outcome.REJECT
    r = bounded_length_search(CtcMachine(identity_kernel(["0", "1"]), label), 1, 5, 4)
    assert r.verdict == Verdict.EXHAUSTED


def test_bounded_resource_errors():
    open_kernel = Kernel(StringDist.point, "identity without domain")
    with pytest.raises(ResourceError):
        bounded_length_search(CtcMachine(open_kernel, ACC), 1, 5, 4)
    big = CtcMachine(identity_kernel([format(i, "b") for i in range(40)]), ACC)
    with pytest.raises(ResourceError):
        bounded_length_search(big, 1, 5, 16)
    with pytest.raises(ContractError):
        bounded_length_search(big, 0, 5, 4)


def test_two_eps_closeness_alone_does_not_guarantee_survival():
    k = cycle_kernel(["0", "1"])
    d = StringDist({"0": F(1, 2), "1": F(1, 2)})
    e = StringDist({"0": F(103, 200), "1": F(97, 200)})
    assert tv_distance(d, e) < F(2, 100)
    assert tv_distance(push_forward(k, e), e) > F(2, 100)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 99), st.integers(0, 20))
def test_eps_closeness_guarantees_survival(a, t):
    # within eps of the fixed point, every iterate stays within 2 eps of the start
    k = cycle_kernel(["0", "1"])
    d = StringDist({"0": F(1, 2), "1": F(1, 2)})
    e = StringDist({"0": F(1, 2) + F(a - 50, 5000), "1": F(1, 2) - F(a - 50, 5000)})
    assert tv_distance(d, e) < F(1, 100)
    x = e
    for _ in range(t):
        x = push_forward(k, x)
    assert tv_distance(x, e) < F(2, 100)


def test_planted_fine_grid_soundness():
    d = StringDist({"0": F(3, 4), "1": F(1, 4)})
    m = CtcMachine(metropolis_kernel(d, ["0", "1"]), lambda y: Outcome.ACCEPT if y == "0" else Outcome.REJECT)
    r = bounded_length_search(m, 1, 200, 200)
    near = [c for c in grid_candidates(["0", "1"], 200) if tv_distance(c, d) < F(1, 100)]
    assert len(near) == 3
    assert all(c in r.survivors for c in near)
    assert r.verdict == Verdict.ACCEPT
