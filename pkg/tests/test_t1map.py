import random

import pytest

from sfqmap.cuts import enumerate_cuts
from sfqmap.netlist import (CostTable, GateKind, Netlist, T1Role, area,
                            exhaustive_pi_words, materialize_inverters,
                            replace_cone)
from sfqmap.t1map import (DegenerateSupportError, T1Candidate, area_gain,
                          group_candidates, map_t1, match_t1_family,
                          select_and_rewrite)

from netgen import random_net
from oracles import family_oracle


def flat_costs():
    """MAJ3 priced at 26 and free splitters, so cone areas are easy to read."""
    c = CostTable()
    c.kinds[GateKind.MAJ3] = 26
    c.kinds[GateKind.SPLITTER] = 0
    return c


def adder_cell(neg_a=False):
    net = Netlist()
    a, b, c = (net.add_pi() for _ in range(3))
    a = ~a if neg_a else a
    s = net.XOR(net.XOR(a, b), c)
    m = net.MAJ(a, b, c)
    net.add_po(s)
    net.add_po(m)
    return net, s, m


def as_set(tt):
    return {(m.role.value, m.polarity, m.out_complement) for m in match_t1_family(tt)}


def test_match_examples():
    assert ("SUM", (False,) * 3, False) in as_set(0x96)
    got = as_set(0xE8)
    assert ("CARRY", (False,) * 3, False) in got
    assert ("NCARRY", (True,) * 3, False) in got
    with pytest.raises(DegenerateSupportError):
        match_t1_family(0xFF)
    with pytest.raises(DegenerateSupportError):
        match_t1_family(0xAA)


def test_match_positive_family():
    pos = {tt for tt in range(256)
           if any(p == (False,) * 3 and not oc for _, p, oc in family_oracle(tt))}
    assert pos == {0x96, 0xE8, 0xFE, 0x17, 0x01}


def test_area_gain_examples():
    net, s, m = adder_cell()
    cands = group_candidates(net, enumerate_cuts(net), flat_costs())
    best = cands[0]
    assert best.matches == {T1Role.SUM: s.node, T1Role.CARRY: m.node}
    assert best.delta_area == 13
    assert best.gain.mffc_areas == {T1Role.SUM: 16, T1Role.CARRY: 26}

    net = Netlist()
    a, b, c = (net.add_pi() for _ in range(3))
    o = net.OR(net.OR(a, b), c)
    net.add_po(o)
    cand = T1Candidate((a.node, b.node, c.node), (False,) * 3, {T1Role.ORQ: o.node})
    assert area_gain(net, cand, flat_costs()) == -13
    assert group_candidates(net, enumerate_cuts(net), flat_costs()) == []

    net, s, m = adder_cell(neg_a=True)
    cands = group_candidates(net, enumerate_cuts(net), flat_costs())
    best = cands[0]
    assert best.polarity == (True, False, False)
    assert best.delta_area == 4


def test_area_gain_matches_rewrite():
    rng = random.Random(21)
    costs = CostTable()
    checked = 0
    for _ in range(60):
        net = random_net(rng, 5, 6, fa_blocks=2)
        materialize_inverters(net)
        for cand in group_candidates(net, enumerate_cuts(net), costs):
            after = replace_cone(net, cand, costs)
            assert cand.delta_area == area(net, costs) - area(after, costs)
            checked += 1
    assert checked > 20


def test_grouping_full_adder_and_two_adders():
    net, s, m = adder_cell()
    cands = group_candidates(net, enumerate_cuts(net))
    assert len([c for c in cands if len(c.matches) >= 2 and c.delta_area > 0]) == 1
    net = Netlist()
    leaves = []
    for _ in range(2):
        a, b, c = (net.add_pi() for _ in range(3))
        net.add_po(net.XOR(net.XOR(a, b), c))
        net.add_po(net.MAJ(a, b, c))
        leaves.append((a.node, b.node, c.node))
    cands = [c for c in group_candidates(net, enumerate_cuts(net)) if c.delta_area > 0]
    assert sorted(c.leaves for c in cands) == leaves


def test_conflict_one_applied():
    net, s, m = adder_cell()
    leaves = (0, 1, 2)
    c1 = T1Candidate(leaves, (False,) * 3, {T1Role.SUM: s.node, T1Role.CARRY: m.node},
                     delta_area=19)
    c2 = T1Candidate(leaves, (False,) * 3, {T1Role.SUM: s.node}, delta_area=5)
    out, found, used = select_and_rewrite(net, [c1, c2])
    assert (found, used) == (1, 1)
    assert sum(n.kind is GateKind.T1 for n in out.nodes.values()) == 1


def test_mapping_properties_random():
    rng = random.Random(4)
    costs = CostTable()
    for _ in range(40):
        net = random_net(rng, 5, 8, fa_blocks=rng.randint(0, 3))
        materialize_inverters(net)
        res = map_t1(net, costs)
        assert res.found >= res.used
        assert area(res.net, costs) <= area(net, costs)
        words, width = exhaustive_pi_words(len(net.pis))
        assert res.net.output_words(words, width) == net.output_words(words, width)
