import random

import pytest

from sfqmap.netlist import (ArityError, CostTable, CycleError, DanglingFaninError,
                            GateKind, MissingCostError, Netlist, Signal,
                            StaleCandidateError, T1Role, area,
                            exhaustive_pi_words, logic_depth,
                            materialize_inverters, mffc, replace_cone)
from sfqmap.t1map import T1Candidate, map_t1

from netgen import random_net


def full_adder():
    net = Netlist("fa")
    a, b, c = (net.add_pi(x) for x in "abc")
    x1 = net.XOR(a, b)
    s = net.XOR(x1, c)
    m = net.MAJ(a, b, c)
    net.add_po(s, "s")
    net.add_po(m, "co")
    return net, (a, b, c), x1, s, m


def same_function(n1, n2):
    words, width = exhaustive_pi_words(len(n1.pis))
    return n1.output_words(words, width) == n2.output_words(words, width)


def test_first_node_is_zero():
    net = Netlist()
    assert net.add_gate(GateKind.PI, []) == 0


def test_xor_depth_one():
    net = Netlist()
    a, b = net.add_pi(), net.add_pi()
    x = net.XOR(a, b)
    net.add_po(x)
    assert logic_depth(net) == 1


def test_arity_mismatch():
    net = Netlist()
    a = net.add_pi()
    with pytest.raises(ArityError):
        net.add_gate(GateKind.AND2, [a])


def test_dangling_fanin():
    net = Netlist()
    with pytest.raises(DanglingFaninError):
        net.add_gate(GateKind.NOT, [Signal(7)])


def test_clocked_kinds():
    assert not GateKind.PI.clocked and not GateKind.PO.clocked
    assert not GateKind.SPLITTER.clocked
    for k in (GateKind.AND2, GateKind.OR2, GateKind.XOR2, GateKind.NOT,
              GateKind.BUF, GateKind.MAJ3, GateKind.DFF, GateKind.T1):
        assert k.clocked


def test_depth_examples():
    net = Netlist()
    a = net.add_pi()
    net.add_po(a)
    assert logic_depth(net) == 0
    net = Netlist()
    p = [net.add_pi() for _ in range(4)]
    net.add_po(net.XOR(net.XOR(p[0], p[1]), net.XOR(p[2], p[3])))
    assert logic_depth(net) == 2
    # full adder with MAJ as an AND/OR tree: both paths two levels deep
    net = Netlist()
    a, b, c = (net.add_pi() for _ in range(3))
    net.add_po(net.XOR(net.XOR(a, b), c))
    net.add_po(net.OR(net.AND(a, b), net.AND(c, net.OR(a, b))))
    assert logic_depth(net) == 3
    net = Netlist()
    a, b, c = (net.add_pi() for _ in range(3))
    net.add_po(net.XOR(net.XOR(a, b), c))
    net.add_po(net.MAJ(a, b, c))
    assert logic_depth(net) == 2


def test_cycle_detected():
    net = Netlist()
    a = net.add_pi()
    g = net.NOT(a)
    h = net.NOT(g)
    net.set_fanin(g.node, 0, h)
    with pytest.raises(CycleError):
        net.topo_order()


def t1_net(roles):
    net = Netlist()
    ins = [net.add_pi() for _ in range(3)]
    t = net.add_gate(GateKind.T1, ins, t1_outputs=roles)
    for r in roles:
        net.add_po(Signal(t, False, r))
    return net


def test_area_examples():
    assert area(Netlist()) == 0
    assert area(t1_net([T1Role.SUM, T1Role.CARRY])) == 29
    assert area(t1_net([T1Role.SUM, T1Role.CARRY, T1Role.NCARRY])) == 38


def test_area_counts_splitters():
    net = Netlist()
    a, b = net.add_pi(), net.add_pi()
    g = net.AND(a, b)
    for _ in range(3):
        net.add_po(g)
    assert area(net) == 10 + 2 * 3


def test_area_additive_random():
    rng = random.Random(3)
    costs = CostTable()
    for _ in range(30):
        net = random_net(rng, 4, 10)
        materialize_inverters(net)
        per_node = sum(costs.node_cost(n) for n in net.nodes.values())
        spl = sum(f - 1 for f in net.source_fanout_counts().values() if f > 1)
        assert area(net, costs) == per_node + 3 * spl


def test_missing_cost():
    net = Netlist()
    buf = net.add_gate(GateKind.BUF, [net.add_pi()])
    net.add_po(Signal(buf))
    with pytest.raises(MissingCostError):
        area(net)


def test_cost_table_roundtrip():
    t = CostTable.from_text("AND2 = 12\n# comment\nt1_base=31\n")
    assert t.kinds[GateKind.AND2] == 12 and t.t1_base == 31
    assert CostTable.from_text(t.to_text()) == t
    with pytest.raises(ValueError):
        CostTable.from_text("AND2=-1")
    with pytest.raises(ValueError):
        CostTable.from_text("FOO=1")


def test_mffc_chain():
    net = Netlist()
    a = net.add_pi()
    g1 = net.NOT(a)
    g2 = net.NOT(g1)
    g3 = net.NOT(g2)
    root = net.NOT(g3)
    net.add_po(root)
    assert mffc(net, root.node) == {g1.node, g2.node, g3.node, root.node}


def test_mffc_shared_fanin_excluded():
    net = Netlist()
    a, b = net.add_pi(), net.add_pi()
    shared = net.AND(a, b)
    root = net.NOT(shared)
    other = net.OR(shared, a)
    net.add_po(root)
    net.add_po(other)
    assert mffc(net, root.node) == {root.node}


def test_mffc_xor3():
    net, _, x1, s, m = full_adder()
    assert mffc(net, s.node) == {x1.node, s.node}


def test_mffc_rejects_pi():
    net, (a, _, _), *_ = full_adder()
    with pytest.raises(ValueError):
        mffc(net, a.node)


def _reaches_po_avoiding(net, v, root):
    fo = net.fanouts()
    stack, seen = [v], set()
    while stack:
        u = stack.pop()
        if u == root or u in seen:
            continue
        seen.add(u)
        if net.nodes[u].kind is GateKind.PO:
            return True
        stack.extend(c for c, _ in fo.get(u, ()))
    return False


def test_mffc_paths_brute_force():
    rng = random.Random(11)
    for _ in range(40):
        net = random_net(rng, 4, 12)
        for root in net.topo_order():
            if not net.nodes[root].kind.clocked:
                continue
            cone = mffc(net, root)
            assert root in cone
            for v in cone - {root}:
                assert not _reaches_po_avoiding(net, v, root)


def test_replace_cone_full_adder():
    net, (a, b, c), x1, s, m = full_adder()
    before = len(net.nodes)
    cand = T1Candidate((a.node, b.node, c.node), (False,) * 3,
                       {T1Role.SUM: s.node, T1Role.CARRY: m.node})
    out = replace_cone(net, cand)
    kinds = [n.kind for n in out.nodes.values()]
    assert kinds.count(GateKind.T1) == 1
    assert len(out.nodes) == before - (2 + 1) + 1
    assert same_function(net, out)


def test_replace_cone_stale():
    net, (a, b, c), x1, s, m = full_adder()
    cand = T1Candidate((a.node, b.node, c.node), (False,) * 3,
                       {T1Role.SUM: s.node, T1Role.CARRY: m.node})
    replace_cone(net, cand, in_place=True)
    with pytest.raises(StaleCandidateError):
        replace_cone(net, cand)


def test_replace_cone_single_or3():
    net = Netlist()
    a, b, c = (net.add_pi() for _ in range(3))
    o = net.OR(net.OR(a, b), c)
    net.add_po(o)
    cand = T1Candidate((a.node, b.node, c.node), (False,) * 3, {T1Role.ORQ: o.node})
    out = replace_cone(net, cand)
    t1 = [n for n in out.nodes.values() if n.kind is GateKind.T1]
    assert len(t1) == 1 and t1[0].t1_outputs == frozenset({T1Role.ORQ})
    assert same_function(net, out)


def test_materialize_inverters_shares_not():
    net = Netlist()
    a, b, c = (net.add_pi() for _ in range(3))
    m1 = net.MAJ(~a, b, c)
    m2 = net.MAJ(~a, c, b)
    x = net.XOR(~a, b)
    net.add_po(m1)
    net.add_po(m2)
    net.add_po(~x)
    ref = net.copy()
    assert materialize_inverters(net) == 2
    for node in net.nodes.values():
        if not node.kind.absorbs_inversion:
            assert not any(s.complemented for s in node.fanins)
    assert same_function(ref, net)


def test_topological_invariant_after_rewrites():
    rng = random.Random(5)
    for _ in range(20):
        net = random_net(rng, 5, 6, fa_blocks=2)
        out = map_t1(net).net
        rank = {v: i for i, v in enumerate(out.topo_order())}
        for v, node in out.nodes.items():
            assert all(rank[s.node] < rank[v] for s in node.fanins)
        assert same_function(net, out)
