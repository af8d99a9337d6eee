import random

import pytest

from sfqmap.balancing import (BalancingError, build_csp, greedy_baseline,
                              min_dff_stages, solve_balancing)
from sfqmap.netlist import GateKind, Netlist, Signal, T1Role, materialize_inverters
from sfqmap.staging import StageAssignment, build_ilp, solve_stages
from sfqmap.verify import check_equivalence, validate_schedule

from netgen import random_net
from oracles import brute_force_balancing


def balance(net, sigma, n):
    st = StageAssignment(n, sigma)
    return solve_balancing(build_csp(net, st)), greedy_baseline(net, st)


def t1_design(producer_stages, sigma_t1, n=4):
    """T1 fed by NOT gates at the given stages (None = a PI directly)."""
    net = Netlist()
    sigma = {}
    ins = []
    for k, s in enumerate(producer_stages):
        p = net.add_pi(f"x{k}")
        if s is None:
            ins.append(p)
        else:
            g = net.NOT(p)
            sigma[g.node] = s
            ins.append(g)
    t = net.add_gate(GateKind.T1, ins, t1_outputs=[T1Role.SUM, T1Role.CARRY])
    sigma[t] = sigma_t1
    net.add_po(Signal(t, False, T1Role.SUM), "s")
    net.add_po(Signal(t, False, T1Role.CARRY), "c")
    return net, sigma


def test_min_dff_stages():
    # windows are [sink - n, sink - 1]
    assert min_dff_stages(0, 4, [(1, 4)]) == [4]
    assert min_dff_stages(0, 4, [(5, 8)]) == [4, 8]
    assert min_dff_stages(1, 4, [(0, 3)]) == []
    assert min_dff_stages(0, 4, [(1, 4), (2, 5)]) == [4]
    assert min_dff_stages(0, 4, [(9, 9), (1, 4)]) == [4, 8, 9]
    with pytest.raises(BalancingError):
        min_dff_stages(5, 4, [(1, 3)])


def test_chain_d9():
    net = Netlist()
    a = net.add_pi()
    g = net.NOT(a)
    net.add_po(g)
    opt, greedy = balance(net, {g.node: 9}, 4)
    assert opt.dff_count == 2 == greedy.dff_count
    assert validate_schedule(opt).ok


def test_single_edge_d5_domain():
    net = Netlist()
    a = net.add_pi()
    g1 = net.NOT(a)
    g2 = net.NOT(g1)
    net.add_po(g2)
    opt, greedy = balance(net, {g1.node: 1, g2.node: 6}, 4)
    dffs = [v for v, nd in opt.net.nodes.items() if nd.kind is GateKind.DFF]
    assert len(dffs) == 1 == greedy.dff_count
    assert 2 <= opt.sigma[dffs[0]] <= 5


def test_shared_fanout():
    net = Netlist()
    a, b = net.add_pi(), net.add_pi()
    src = net.AND(a, b)
    s1, s2 = net.NOT(src), net.NOT(src)
    net.add_po(s1)
    net.add_po(s2)
    opt, greedy = balance(net, {src.node: 1, s1.node: 6, s2.node: 6}, 4)
    assert opt.dff_count == 1 and greedy.dff_count == 2
    assert validate_schedule(opt).ok and validate_schedule(greedy).ok


def test_balanced_fanout_zero():
    net = Netlist()
    a, b = net.add_pi(), net.add_pi()
    src = net.AND(a, b)
    sig = {src.node: 1}
    for k in range(4):
        g = net.NOT(src)
        sig[g.node] = 2 + k
        net.add_po(g)
    opt, _ = balance(net, sig, 4)
    assert opt.dff_count == 0


def test_full_adder_t1_two_dffs():
    net, sigma = t1_design([None, None, None], 3)
    opt, greedy = balance(net, sigma, 4)
    assert opt.dff_count == 2
    assert greedy.dff_count >= 2
    assert brute_force_balancing(net, sigma, 4) == 2
    assert validate_schedule(opt).ok and validate_schedule(greedy).ok
    assert check_equivalence(net, opt).equal
    assert check_equivalence(net, greedy).equal


def test_same_stage_producers_forced_dff():
    net, sigma = t1_design([1, 1, 2], 4)
    opt, greedy = balance(net, sigma, 4)
    assert opt.dff_count == 1 == brute_force_balancing(net, sigma, 4)
    assert greedy.dff_count >= 1
    assert validate_schedule(opt).ok
    assert check_equivalence(net, opt).equal


def test_rejects_bad_stages():
    net, sigma = t1_design([None, None, None], 2)
    with pytest.raises(BalancingError):
        build_csp(net, StageAssignment(4, sigma))


def test_pipeline_legal_and_bounded_random():
    rng = random.Random(15)
    for _ in range(30):
        net = random_net(rng, 4, 10, t1=True)
        materialize_inverters(net)
        n = rng.choice((3, 4))
        st = solve_stages(build_ilp(net, n), max_nodes=5000)
        model = build_csp(net, st)
        opt = solve_balancing(model)
        greedy = greedy_baseline(net, st)
        assert opt.dff_count <= greedy.dff_count
        assert validate_schedule(opt).ok and validate_schedule(greedy).ok
        assert check_equivalence(net, opt).equal
        assert check_equivalence(net, greedy).equal


def test_single_phase_identity():
    rng = random.Random(16)
    for _ in range(20):
        net = random_net(rng, 4, 8)
        materialize_inverters(net)
        st = solve_stages(build_ilp(net, 1), max_nodes=5000)
        model = build_csp(net, st)
        opt = solve_balancing(model)
        expect = sum(max(s.stage for s in t.sinks) - t.stage - 1 for t in model.trees)
        assert opt.dff_count == expect
