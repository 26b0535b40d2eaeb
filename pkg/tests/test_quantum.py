import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctclab import quantum as qm
from ctclab.errors import ContractError, InvariantViolation
from ctclab.outcomes import Verdict

KET0 = np.diag([1, 0]).astype(complex)
KET1 = np.diag([0, 1]).astype(complex)
MIXED = np.eye(2, dtype=complex) / 2


def test_apply_examples():
    rng = np.random.default_rng(0)
    rho = qm.random_density(2, rng)
    assert np.allclose(qm.apply_channel(qm.KrausChannel.identity(2), rho), rho)
    assert np.allclose(qm.apply_channel(qm.KrausChannel.bit_flip(), KET0), KET1)
    assert np.allclose(qm.apply_channel(qm.KrausChannel.depolarizing(2), rho), MIXED)
    with pytest.raises(ContractError):
        qm.apply_channel(qm.KrausChannel.identity(3), rho)


def test_invalid_inputs_name_the_invariant():
    with pytest.raises(InvariantViolation) as exc:
        qm.KrausChannel(np.eye(2) * 1.1)
    assert "completeness" in exc.value.invariant
    with pytest.raises(InvariantViolation):
        qm.validate_density(np.diag([1.5, -0.5]))
    with pytest.raises(InvariantViolation):
        qm.validate_density(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(InvariantViolation):
        qm.AcceptEffect(np.diag([1.2, 0.0]))


def test_distance_examples():
    assert qm.trace_distance(KET0, KET0) == 0
    assert qm.trace_distance(KET0, KET1) == pytest.approx(1)
    assert qm.trace_distance(KET0, MIXED) == pytest.approx(0.5)
    assert qm.vec_distance(KET0, KET1) == pytest.approx(math.sqrt(2))
    assert qm.vec_distance(KET0, KET0) == 0


def test_frobenius_exceeds_trace_distance_but_not_trace_norm():
    # vec distance <= trace *distance* fails for orthogonal pure states
    assert qm.vec_distance(KET0, KET1) > qm.trace_distance(KET0, KET1)
    assert qm.check_trlb(KET0, KET1)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_contraction_and_trlb(dim, n_kraus, seed):
    rng = np.random.default_rng(seed)
    ch = qm.random_channel(dim, rng, n_kraus)
    rho, sigma = qm.random_density(dim, rng), qm.random_density(dim, rng)
    assert qm.trace_distance(ch(rho), ch(sigma)) <= qm.trace_distance(rho, sigma) + qm.SLACK
    assert qm.check_trlb(rho, sigma)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_trub(k, seed):
    rng = np.random.default_rng(seed)
    big = qm.level_size(k + 1)
    sigma = qm.embed(qm.random_density(qm.level_size(k), rng, rank=1), big)
    rho = qm.random_density(big, rng)
    assert qm.check_trub(rho, k, sigma)
    assert qm.check_trub(sigma, k, sigma)


def test_trub_adversarial_probe():
    # push rho towards sigma along a single direction and keep the worst ratio
    rng = np.random.default_rng(3)
    k = 1
    m = qm.level_size(k)
    sigma = qm.embed(qm.random_density(m, rng, rank=1), m + 2)
    worst = 0.0
    for _ in range(200):
        rho = qm.random_density(m + 2, rng, rank=1)
        for s in np.linspace(0.0, 1.0, 21)[1:]:
            mix = (1 - s) * sigma + s * rho
            bound = qm.trub_bound(k, mix, sigma)
            worst = max(worst, qm.trace_norm(sigma - mix) / bound)
            assert qm.check_trub(mix, k, sigma)
    assert worst < 1


def test_trub_rejects_unsupported_sigma():
    with pytest.raises(ContractError):
        qm.check_trub(np.eye(4) / 4, 1, np.eye(4) / 4)


def test_cesaro_examples():
    rng = np.random.default_rng(1)
    rho = qm.random_density(3, rng)
    r = qm.cesaro_fixpoint(qm.KrausChannel.identity(3), rho, 7)
    assert np.allclose(r.rho, rho) and r.residual < 1e-12
    bf = qm.KrausChannel.bit_flip()
    for T in (2, 10, 1000):
        r = qm.cesaro_fixpoint(bf, KET0, T)
        assert r.residual <= 1e-12 and np.allclose(r.rho, MIXED)
    for T in (1, 3, 11, 999):
        r = qm.cesaro_fixpoint(bf, KET0, T)
        assert r.residual == pytest.approx(1 / T, abs=1e-12)
        assert r.residual <= 2 / T + 1e-9


def test_cesaro_curve_is_recorded():
    r = qm.cesaro_fixpoint(qm.KrausChannel.bit_flip(), KET0, 100)
    ts = [t for t, _ in r.curve]
    assert ts == sorted(ts) and ts[-1] == 100 and 64 in ts


def test_cesaro_unitary_bound():
    rng = np.random.default_rng(5)
    for dim in (2, 3, 5):
        ch = qm.KrausChannel.unitary(qm.random_unitary(dim, rng))
        for T in (1, 7, 50, 333):
            r = qm.cesaro_fixpoint(ch, qm.random_density(dim, rng), T)
            assert r.residual <= 2 / T + 1e-9
            qm.validate_density(r.rho)


def test_grid_states_are_states():
    for g in (qm.GridSpec(1, 1), qm.GridSpec(1, 3), qm.GridSpec(2, 2)):
        states = list(qm.grid_states(4, g))
        assert states
        for s in states:
            qm.validate_density(s)
            assert np.allclose(s * g.denom, np.round((s * g.denom).real))


def test_grid_schedule_order():
    sched = qm.grid_schedule(4, 3)
    assert sched[0] == qm.GridSpec(1, 1)
    assert {g.k for g in sched} == {1, 2}
    keys = [(g.k + g.denom, g.k) for g in sched]
    assert keys == sorted(keys)


def test_search_identity_accepts():
    r = qm.fixed_point_search_A(qm.KrausChannel.identity(2), qm.AcceptEffect(KET0), [qm.GridSpec(1, 1)], 10)
    assert r.verdict == Verdict.ACCEPT
    assert np.allclose(r.state, KET0)


def test_search_bitflip_half_effect_exhausts():
    r = qm.fixed_point_search_A(qm.KrausChannel.bit_flip(), qm.AcceptEffect(MIXED), qm.grid_schedule(2, 6), 50)
    assert r.verdict == Verdict.EXHAUSTED
    assert r.states_tried > 0


def test_search_depolarizing_accepts():
    eff = qm.AcceptEffect(np.diag([0.9, 0.9]))
    r = qm.fixed_point_search_A(qm.KrausChannel.depolarizing(2), eff, qm.grid_schedule(2, 4), 100)
    assert r.verdict == Verdict.ACCEPT
    assert qm.trace_distance(r.state, MIXED) <= qm.search_threshold(r.grid.k)


def test_search_empty_schedule():
    with pytest.raises(ContractError):
        qm.fixed_point_search_A(qm.KrausChannel.identity(2), qm.AcceptEffect(KET0), [], 10)


def test_planted_channel_has_planted_fixed_point():
    rng = np.random.default_rng(2)
    rho = np.array([[0.5, 0.25, 0], [0.25, 0.25, 0], [0, 0, 0.25]], dtype=complex)
    ch = qm.planted_channel(rho, 0.2, rng)
    assert qm.trace_distance(ch(rho), rho) < 1e-14
    far = qm.random_density(3, rng)
    assert qm.trace_distance(ch.power(far, 200), rho) < 1e-12


def test_json_round_trip(tmp_path):
    ch = qm.KrausChannel.depolarizing(2)
    p = tmp_path / "ch.json"
    p.write_text(json.dumps(qm.channel_to_json(ch)))
    back = qm.channel_from_json(qm.load_json(p))
    assert np.allclose(back.ops, ch.ops)
    e = qm.AcceptEffect(np.diag([0.25, 1.0]))
    assert np.allclose(qm.effect_from_json(qm.effect_to_json(e)).q, e.q)
    with pytest.raises(ContractError):
        qm.channel_from_json({"dim": 2, "kraus": [[[1, 0]]]})
