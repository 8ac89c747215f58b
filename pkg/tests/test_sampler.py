import math

import numpy as np
import pytest

from conftest import random_state
from ttess import operators as ops
from ttess import sampler
from ttess.geom import Polygon
from ttess.lines import pattern_from_points
from ttess.models import AreaModel, CrttModel
from ttess.sampler import ChainState, GnzReport, ProposalConfig
from ttess.tessellation import TTessellation

SQ = Polygon.square()
THIRDS = ProposalConfig()


def test_proposal_config_validation():
    with pytest.raises(ValueError):
        ProposalConfig(0.6, 0.6, 0.0)
    with pytest.raises(ValueError):
        ProposalConfig(-0.1, 0.5, 0.5)
    ProposalConfig(0.2, 0.2, 0.2)  # remaining mass is a no-op


def test_split_ratio_on_empty_square():
    t = TTessellation.new_empty(SQ)
    rec = ops.apply(t, ops.split_through(t, (0.2, 0), (0.9, 1)))
    for tau in (0.3, 1.0, 4.0):
        lr = sampler.log_hastings_ratio(CrttModel(tau), THIRDS, SQ, rec)
        assert math.exp(lr) == pytest.approx(4 * tau / math.pi)


def test_merge_ratio_back_to_empty():
    t = TTessellation.new_empty(SQ)
    ops.apply(t, ops.split_through(t, (0.2, 0), (0.9, 1)))
    rec = ops.apply(t, ops.enumerate_merges(t)[0])
    lr = sampler.log_hastings_ratio(CrttModel(2.0), THIRDS, SQ, rec)
    assert math.exp(lr) == pytest.approx(math.pi / 8)


def test_ratio_respects_proposal_weights():
    t = TTessellation.new_empty(SQ)
    rec = ops.apply(t, ops.split_through(t, (0.2, 0), (0.9, 1)))
    lr = sampler.log_hastings_ratio(CrttModel(1.0), ProposalConfig(0.2, 0.6, 0.2), SQ, rec)
    assert math.exp(lr) == pytest.approx(3 * 4 / math.pi)
    assert sampler.log_hastings_ratio(CrttModel(1.0), ProposalConfig(0.5, 0.0, 0.5), SQ, rec) == -math.inf


@pytest.mark.parametrize("seed", range(5))
def test_reverse_pairs_multiply_to_one(seed):
    rng = np.random.default_rng(seed)
    model = AreaModel(1.5, 20.0)
    t = random_state(seed)
    for _ in range(100):
        kind = rng.integers(3)
        try:
            u = (ops.sample_uniform_split, ops.sample_uniform_merge, ops.sample_uniform_flip)[kind](t, rng)
            rec = ops.apply(t, u)
        except ops.InapplicableUpdate:
            continue
        fwd = sampler.log_hastings_ratio(model, THIRDS, SQ, rec)
        back = ops.apply(t, rec.inverse)
        assert fwd + sampler.log_hastings_ratio(model, THIRDS, SQ, back) == pytest.approx(0.0, abs=1e-10)
        if rng.random() < 0.5:
            ops.apply(t, back.inverse)


def test_flip_on_empty_is_a_counted_noop():
    st = ChainState.new(SQ, CrttModel(1.0), ProposalConfig(0.0, 0.0, 1.0), seed=1)
    for _ in range(10):
        assert not sampler.step(st)
    assert st.proposed["flip"] == 10 and st.accepted["flip"] == 0
    assert st.iteration == 10
    assert st.tessellation.stats.nseint == 0


def test_leftover_probability_is_a_noop():
    st = ChainState.new(SQ, CrttModel(1.0), ProposalConfig(0.0, 0.0, 0.0), seed=1)
    sampler.run(st, 50)
    assert sum(st.proposed.values()) == 0
    assert st.iteration == 50


def test_empirical_split_acceptance_on_empty():
    tau = 0.5
    expect = min(1.0, 4 * tau / math.pi)
    st = ChainState.new(SQ, CrttModel(tau), ProposalConfig(1 / 3, 1 / 3, 1 / 3), seed=2)
    n = 10_000
    acc = 0
    for _ in range(n):
        st.tessellation = TTessellation.new_empty(SQ)
        st.proposed["split"] = 0
        while st.proposed["split"] == 0:
            accepted = sampler.step(st)
        acc += accepted
    assert abs(acc / n - expect) < 3 * math.sqrt(expect * (1 - expect) / n)


def test_energy_is_tracked_incrementally():
    model = AreaModel(2.0, 30.0)
    st = ChainState.new(SQ, model, seed=3)
    sampler.run(st, 3000, validate_every=500)
    assert st.energy == pytest.approx(model.energy(st.tessellation), abs=1e-8)
    assert len(st.trace) == 3000


def test_same_seed_same_chain():
    a = sampler.run(ChainState.new(SQ, CrttModel(1.9), seed=9), 2000)
    b = sampler.run(ChainState.new(SQ, CrttModel(1.9), seed=9), 2000)
    assert list(a.trace) == list(b.trace)
    assert a.tessellation.same_geometry(b.tessellation)


def test_crtt_acceptance_rates_are_high():
    st = sampler.run(ChainState.new(SQ, CrttModel(1.0), seed=4), 20_000, record_trace=False)
    assert st.acceptance_rate("split") > 0.5
    assert st.acceptance_rate("merge") > 0.5


def test_callbacks_fire_at_their_period():
    seen = []
    st = ChainState.new(SQ, CrttModel(1.0), seed=5)
    sampler.run(st, 100, callbacks=[(25, lambda s: seen.append(s.iteration))])
    assert seen == [25, 50, 75, 100]
    with pytest.raises(ValueError):
        sampler.run(st, -1)


def test_samples_generator():
    st = ChainState.new(SQ, CrttModel(1.0), seed=6)
    its = [st.iteration for _ in sampler.samples(st, 5, 10, burn_in=100)]
    assert its == [110, 120, 130, 140, 150]


def test_default_burn_in():
    assert sampler.default_burn_in(CrttModel(1.0), SQ) == 1000
    assert sampler.default_burn_in(CrttModel(100.0), SQ) == int(100 * 100 * 4 / math.pi)


def test_convergence_conditions():
    assert sampler.check_convergence_conditions(CrttModel(1.0), THIRDS).verdict == "convergent"
    r = sampler.check_convergence_conditions(CrttModel(1.0), ProposalConfig(0.5, 0.5, 0.0))
    assert r.verdict == "not established" and r.aperiodic and not r.irreducible

    class Hard(CrttModel):
        strictly_positive = False

    assert sampler.check_convergence_conditions(Hard(1.0), THIRDS).verdict == "unknown"


def test_batch_means_se_iid():
    x = np.random.default_rng(0).normal(size=10_000)
    assert sampler.batch_means_se(x) == pytest.approx(0.01, rel=0.3)


def test_batch_means_se_grows_with_correlation():
    rng = np.random.default_rng(1)
    e = rng.normal(size=20_000)
    ar = np.empty_like(e)
    ar[0] = e[0]
    for i in range(1, len(e)):
        ar[i] = 0.9 * ar[i - 1] + e[i]
    naive = ar.std(ddof=1) / math.sqrt(len(ar))
    assert sampler.batch_means_se(ar) > 2.5 * naive


def test_gnz_report_arithmetic():
    r = GnzReport(1.0, 1.5, 0.3, 0.4, 100, "x")
    assert r.combined_se == pytest.approx(0.5)
    assert r.z == pytest.approx(-1.0)
    assert r.agrees(1.0) and not r.agrees(0.9)
    assert "z=-1.00" in r.summary()


def test_gnz_split_small_run():
    r = sampler.verify_gnz_split(CrttModel(1.0), 1.0, 600, 10, np.random.default_rng(2), burn_in=500)
    assert r.agrees(4.0), r.summary()


def test_gnz_flip_small_run():
    r = sampler.verify_gnz_flip(
        CrttModel(1.0), sampler.added_edge_length, 600, 10, np.random.default_rng(3), burn_in=500
    )
    assert r.agrees(4.0), r.summary()


def test_gnz_zero_functional():
    r = sampler.verify_gnz_split(CrttModel(1.0), 0.0, 20, 5, np.random.default_rng(0), burn_in=0)
    assert r.lhs_estimate == r.rhs_estimate == 0.0


def test_uniformity_single_state():
    pat = pattern_from_points(SQ, [((0.0, 0.3), (1.0, 0.4))])
    r = sampler.conditional_uniformity_test(pat, 50, np.random.default_rng(0))
    assert r.n_classes == 1 and r.p_value == 1.0


def test_uniformity_two_lines_small():
    pat = pattern_from_points(SQ, [((0.0, 0.3), (1.0, 0.4)), ((0.6, 0.0), (0.5, 1.0))])
    r = sampler.conditional_uniformity_test(pat, 4000, np.random.default_rng(1))
    assert r.n_classes == 4
    assert sum(r.counts.values()) == 4000
    assert r.p_value > 0.001
