import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from opser.analysis import (
    HopLinkProfile,
    best_link_unicast_prob,
    cid_energy_bound,
    cid_energy_cost,
    delivery_prob_dominance_check,
    opportunistic_delivery_prob,
    unicast_delivery_prob,
)

probs = st.floats(0.0, 0.999)


def test_single_candidate_reduces_to_power():
    assert opportunistic_delivery_prob(HopLinkProfile.uniform([0.8], 3)) == pytest.approx(0.512)


def test_two_even_candidates_one_hop():
    assert opportunistic_delivery_prob(HopLinkProfile.uniform([0.5, 0.5], 1)) == 0.75


def test_three_candidates_two_hops_against_sampling():
    profile = HopLinkProfile.uniform([0.3, 0.4, 0.5], 2)
    closed = opportunistic_delivery_prob(profile)
    assert closed == pytest.approx(0.6241)
    rng = np.random.default_rng(2024)
    n = 1_000_000
    ok = np.ones(n, dtype=bool)
    for hop in profile.per_hop_link_probs:
        ok &= (rng.random((n, len(hop))) < np.array(hop)).any(axis=1)
    se = math.sqrt(closed * (1 - closed) / n)
    assert abs(ok.mean() - closed) <= 3 * se


def test_unicast_examples():
    assert unicast_delivery_prob(0.9, 1) == 0.9
    assert unicast_delivery_prob(0.9, 5) == pytest.approx(0.59049)
    assert unicast_delivery_prob(0.9, 5) == pytest.approx(
        opportunistic_delivery_prob(HopLinkProfile.uniform([0.9], 5)))
    assert unicast_delivery_prob(0.0, 4) == 0.0


@pytest.mark.parametrize("bad", [[1.0], [0.5, 1.0], [-0.1], []])
def test_invalid_profiles_are_rejected(bad):
    with pytest.raises(ValueError):
        HopLinkProfile.uniform(bad, 2)


def test_invalid_unicast_inputs():
    with pytest.raises(ValueError):
        unicast_delivery_prob(1.0, 2)
    with pytest.raises(ValueError):
        unicast_delivery_prob(0.5, 0)


def test_dominance_examples():
    profile = HopLinkProfile.uniform([0.5, 0.5], 3)
    assert opportunistic_delivery_prob(profile) == 0.421875
    assert best_link_unicast_prob(profile) == 0.125
    assert delivery_prob_dominance_check(profile)
    single = HopLinkProfile.uniform([0.6], 4)
    assert opportunistic_delivery_prob(single) == best_link_unicast_prob(single)
    padded = HopLinkProfile.uniform([0.6, 0.0], 4)
    assert opportunistic_delivery_prob(padded) == opportunistic_delivery_prob(single)


@given(st.lists(st.lists(probs, min_size=1, max_size=5), min_size=1, max_size=8), probs)
def test_adding_a_candidate_never_hurts(hops, extra):
    base = HopLinkProfile(tuple(map(tuple, hops)))
    grown = HopLinkProfile((tuple(hops[0]) + (extra,),) + tuple(map(tuple, hops[1:])))
    assert opportunistic_delivery_prob(grown) >= opportunistic_delivery_prob(base)
    assert delivery_prob_dominance_check(base)


@given(st.lists(probs, min_size=1, max_size=5), st.integers(1, 10))
def test_longer_routes_never_deliver_more(candidates, n):
    shorter = opportunistic_delivery_prob(HopLinkProfile.uniform(candidates, n))
    longer = opportunistic_delivery_prob(HopLinkProfile.uniform(candidates, n + 1))
    assert longer <= shorter


def test_cid_cost_examples():
    assert cid_energy_cost(1, [0], 66.19e-6, 57.12e-6).total_j == 66.19e-6
    cost = cid_energy_cost(5, [4, 0, 0, 0, 0], 66.19e-6, 57.12e-6)
    assert cost.per_node_j[0] == pytest.approx(294.67e-6, abs=1e-12)
    assert cid_energy_cost(2, [1, 1], 1.0, 1.0, rounds=3).total_j == 12.0


def test_cid_bound_uses_log_degree():
    assert cid_energy_bound(1, 2.0, 3.0) == 2.0
    assert cid_energy_bound(100, 1.0, 1.0, log_base=10) == pytest.approx(300.0)
    n = 121
    log_deg = [math.log(n)] * n
    assert sum(1.0 + d for d in log_deg) == pytest.approx(cid_energy_bound(n, 1.0, 1.0))


def test_cid_cost_validation():
    with pytest.raises(ValueError):
        cid_energy_cost(2, [1], 1.0, 1.0)
    with pytest.raises(ValueError):
        cid_energy_cost(1, [0], 1.0, 1.0, rounds=0)
    with pytest.raises(ValueError):
        cid_energy_bound(0, 1.0, 1.0)
