"""Path-balancing DFF insertion under multiphase timing rules.

Each output net (a *fanout tree*) carries one signal, so any DFF placed on it
can serve every later element on the same net.  For a net released at stage
``s`` a set of DFF stages ``P`` is legal iff

* consecutive elements of ``{s} | P`` are at most ``n`` stages apart,
* every ordinary sink at stage ``v`` has an element in ``[v - n, v - 1]``,
* every T1 input pin has an element exactly at its chosen release stage.

The release stages of the three inputs of a T1 must be pairwise distinct and
lie in ``[sigma_T1 - n, sigma_T1 - 1]``.  For fixed release stages the minimum
``P`` is found greedily (:func:`min_dff_stages`); the release stages of T1
pins are searched exhaustively with branch and bound, one coupled component of
nets at a time.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from .netlist import (CostTable, GateKind, Netlist, Signal, SOURCES, T1Role,
                      area)
from .staging import StageAssignment, t1_min_stage

log = logging.getLogger(__name__)


class BalancingError(Exception):
    pass


class BalancingTimeout(BalancingError):
    pass


@dataclass
class Sink:
    node: int
    pin: int
    stage: int
    t1: bool


@dataclass
class FanoutTree:
    source: tuple[int, T1Role | None]
    stage: int
    sinks: list[Sink]


@dataclass
class BalancingModel:
    net: Netlist
    stages: StageAssignment
    trees: list[FanoutTree]
    # T1 node -> [(tree index, sink index)] for its three pins
    t1_pins: dict[int, list[tuple[int, int]]]
    components: list[list[int]]

    @property
    def n(self) -> int:
        return self.stages.n


@dataclass
class BalancedDesign:
    net: Netlist
    n: int
    sigma: dict[int, int]
    phase: dict[int, int] = field(default_factory=dict)
    epoch: dict[int, int] = field(default_factory=dict)
    optimal: bool = True
    costs: CostTable = field(default_factory=CostTable)
    t1_found: int = 0
    t1_used: int = 0

    def __post_init__(self):
        if not self.phase:
            self.phase = {v: s % self.n for v, s in self.sigma.items()}
        if not self.epoch:
            self.epoch = {v: s // self.n for v, s in self.sigma.items()}

    def stage(self, nid: int) -> int:
        if self.net.nodes[nid].kind in SOURCES:
            return 0
        return self.sigma[nid]

    @property
    def dff_count(self) -> int:
        return sum(1 for n in self.net.nodes.values() if n.kind is GateKind.DFF)

    @property
    def t1_count(self) -> int:
        return sum(1 for n in self.net.nodes.values() if n.kind is GateKind.T1)

    @property
    def jj_area(self) -> int:
        return area(self.net, self.costs)

    @property
    def depth_cycles(self) -> int:
        top = max(self.sigma.values(), default=0)
        return math.ceil(top / self.n)

    def metrics(self) -> dict:
        return {"dff_count": self.dff_count, "jj_area": self.jj_area,
                "depth_cycles": self.depth_cycles, "t1_count": self.t1_count}


# ---------------------------------------------------------------------------
# model construction

def _flatten_splitters(net: Netlist) -> Netlist:
    if not any(n.kind is GateKind.SPLITTER for n in net.nodes.values()):
        return net.copy()
    work = net.copy()
    for nid in work.topo_order():
        node = work.nodes[nid]
        for pin, s in enumerate(node.fanins):
            src = s
            while work.nodes[src.node].kind is GateKind.SPLITTER:
                inner = work.nodes[src.node].fanins[0]
                src = Signal(inner.node, inner.complemented ^ src.complemented,
                             inner.port)
            if src != s:
                work.set_fanin(nid, pin, src)
    work.remove_nodes([i for i, n in work.nodes.items()
                       if n.kind is GateKind.SPLITTER])
    return work


def build_csp(net: Netlist, stages: StageAssignment) -> BalancingModel:
    """Collect fanout trees, T1 pin groups and coupled components."""
    net = _flatten_splitters(net)
    n = stages.n

    def st(nid):
        return 0 if net.nodes[nid].kind in SOURCES else stages.sigma[nid]

    trees: dict[tuple, FanoutTree] = {}
    for nid in net.topo_order():
        node = net.nodes[nid]
        if not node.kind.clocked:
            continue
        sv = stages.sigma[nid]
        for pin, s in enumerate(node.fanins):
            key = s.source
            if key not in trees:
                trees[key] = FanoutTree(key, st(s.node), [])
            if sv - st(s.node) < 1:
                raise BalancingError(
                    f"node {nid} at stage {sv} reads node {s.node} at {st(s.node)}")
            trees[key].sinks.append(Sink(nid, pin, sv, node.kind is GateKind.T1))
        if node.kind is GateKind.T1:
            if sv < t1_min_stage([st(s.node) for s in node.fanins]):
                raise BalancingError(f"T1 {nid} violates the input spacing rule")
            if n < 3:
                raise BalancingError("T1 cells need at least 3 phases")
    tree_list = [trees[k] for k in sorted(trees, key=_source_key)]
    t1_pins: dict[int, list[tuple[int, int]]] = {}
    for ti, tree in enumerate(tree_list):
        for si, sink in enumerate(tree.sinks):
            if sink.t1:
                t1_pins.setdefault(sink.node, []).append((ti, si))
    for pins in t1_pins.values():
        pins.sort(key=lambda p: tree_list[p[0]].sinks[p[1]].pin)

    parent = list(range(len(tree_list)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for pins in t1_pins.values():
        for ti, _ in pins[1:]:
            parent[find(ti)] = find(pins[0][0])
    groups: dict[int, list[int]] = {}
    for ti in range(len(tree_list)):
        groups.setdefault(find(ti), []).append(ti)
    components = sorted(groups.values())
    return BalancingModel(net, stages, tree_list, t1_pins, components)


def _source_key(key):
    nid, port = key
    return (nid, port.value if port else "")


# ---------------------------------------------------------------------------
# exact cover of one net for fixed release stages

def min_dff_stages(src: int, n: int, windows: list[tuple[int, int]]) -> list[int]:
    """Fewest DFF stages covering every window, chained from ``src``.

    ``windows`` are inclusive stage intervals that must each contain the
    source stage or a DFF stage.  Consecutive elements are at most ``n``
    stages apart.  Placing each DFF as late as possible is optimal.
    """
    pending = [w for w in windows if not w[0] <= src <= w[1]]
    pts: list[int] = []
    p = src
    while pending:
        rmin = min(w[1] for w in pending)
        q = min(p + n, rmin)
        if q <= p:
            raise BalancingError(f"window ending at {rmin} lies before stage {p}")
        pts.append(q)
        p = q
        pending = [w for w in pending if not w[0] <= q <= w[1]]
    return pts


def _windows(tree: FanoutTree, n: int, release: dict[int, int]) -> list[tuple[int, int]]:
    out = []
    for si, sink in enumerate(tree.sinks):
        if sink.t1:
            r = release.get(si)
            if r is not None:
                out.append((r, r))
        else:
            out.append((sink.stage - n, sink.stage - 1))
    return out


def _tree_cost(tree: FanoutTree, n: int, release: dict[int, int]) -> int:
    return len(min_dff_stages(tree.stage, n, _windows(tree, n, release)))


# ---------------------------------------------------------------------------
# search

@dataclass
class BalancingSolution:
    dff_stages: list[list[int]]
    release: dict[tuple[int, int], int]
    optimal: bool
    explored: int = 0

    @property
    def count(self) -> int:
        return sum(len(p) for p in self.dff_stages)


def _baseline_release(model: BalancingModel) -> dict[tuple[int, int], int]:
    """Feasible release stages: latest-source pin takes the latest free slot."""
    n = model.n
    release = {}
    for t1 in sorted(model.t1_pins):
        pins = model.t1_pins[t1]
        s_t1 = model.stages.sigma[t1]
        lo_win = s_t1 - n
        taken: set[int] = set()
        order = sorted(pins, key=lambda p: (-model.trees[p[0]].stage,
                                            model.trees[p[0]].sinks[p[1]].pin))
        for ti, si in order:
            src = model.trees[ti].stage
            if lo_win <= src and src not in taken:
                r = src
            else:
                free = [r for r in range(s_t1 - 1, max(src + 1, lo_win) - 1, -1)
                        if r not in taken]
                if not free:
                    raise BalancingError(f"no free release stage for T1 {t1}")
                r = free[0]
            taken.add(r)
            release[(ti, si)] = r
    return release


def _solve_component(model: BalancingModel, comp: list[int],
                     init: dict[tuple[int, int], int], max_nodes: int | None,
                     deadline: float | None):
    n = model.n
    pins = []
    for ti in comp:
        for si, sink in enumerate(model.trees[ti].sinks):
            if sink.t1:
                pins.append((sink.node, ti, si))
    pins.sort(key=lambda p: (p[0], model.trees[p[1]].sinks[p[2]].pin))
    if not pins:
        cost = sum(_tree_cost(model.trees[ti], n, {}) for ti in comp)
        return {}, cost, True, 0

    domains = []
    for t1, ti, si in pins:
        s_t1 = model.stages.sigma[t1]
        src = model.trees[ti].stage
        lo = max(src, s_t1 - n)
        vals = list(range(s_t1 - 1, lo - 1, -1))
        if src in vals:
            vals.remove(src)
            vals.insert(0, src)
        domains.append(vals)

    def full_cost(assign):
        per_tree: dict[int, dict[int, int]] = {ti: {} for ti in comp}
        for (t1, ti, si), r in zip(pins, assign):
            per_tree[ti][si] = r
        return sum(_tree_cost(model.trees[ti], n, per_tree[ti]) for ti in comp)

    best_assign = [init[(ti, si)] for _, ti, si in pins]
    best = [full_cost(best_assign), best_assign]
    explored = 0
    complete = True
    release_by_tree: dict[int, dict[int, int]] = {ti: {} for ti in comp}
    tree_cost = {ti: _tree_cost(model.trees[ti], n, {}) for ti in comp}
    used: dict[int, set[int]] = {}
    assign: list[int] = []

    # iterative DFS; frame = index into domain of pin len(assign)
    frames = [0]
    current = [sum(tree_cost.values())]
    while frames:
        if max_nodes is not None and explored >= max_nodes:
            complete = False
            break
        if deadline is not None and explored % 256 == 0 and time.monotonic() > deadline:
            complete = False
            break
        k = len(assign)
        idx = frames[-1]
        t1, ti, si = pins[k]
        if idx >= len(domains[k]):
            frames.pop()
            if assign:
                # undo pin k-1
                pt1, pti, psi = pins[k - 1]
                r = assign.pop()
                used[pt1].discard(r)
                del release_by_tree[pti][psi]
                tree_cost[pti] = _tree_cost(model.trees[pti], n, release_by_tree[pti])
                current.pop()
            continue
        frames[-1] = idx + 1
        r = domains[k][idx]
        if r in used.setdefault(t1, set()):
            continue
        explored += 1
        release_by_tree[ti][si] = r
        new_tree = _tree_cost(model.trees[ti], n, release_by_tree[ti])
        cost = current[-1] - tree_cost[ti] + new_tree
        if cost >= best[0]:
            del release_by_tree[ti][si]
            continue
        if k + 1 == len(pins):
            best[0], best[1] = cost, assign + [r]
            del release_by_tree[ti][si]
            continue
        used[t1].add(r)
        assign.append(r)
        tree_cost[ti] = new_tree
        current.append(cost)
        frames.append(0)
    release = {(ti, si): r for (_, ti, si), r in zip(pins, best[1])}
    return release, best[0], complete, explored


def solve_balancing(model: BalancingModel, time_limit: float | None = None,
                    max_nodes: int | None = 200_000) -> BalancedDesign:
    sol = solve_balancing_stages(model, time_limit, max_nodes)
    return materialize(model, sol)


def solve_balancing_stages(model: BalancingModel, time_limit: float | None = None,
                           max_nodes: int | None = 200_000) -> BalancingSolution:
    deadline = None if time_limit is None else time.monotonic() + time_limit
    init = _baseline_release(model)
    release: dict[tuple[int, int], int] = {}
    optimal = True
    explored = 0
    for comp in model.components:
        rel, _, complete, nodes = _solve_component(model, comp, init, max_nodes,
                                                   deadline)
        release.update(rel)
        optimal &= complete
        explored += nodes
    stages = []
    for ti, tree in enumerate(model.trees):
        rel = {si: r for (t, si), r in release.items() if t == ti}
        stages.append(min_dff_stages(tree.stage, model.n, _windows(tree, model.n, rel)))
    log.info("balancing: %d DFFs over %d nets (%s)", sum(map(len, stages)),
             len(stages), "optimal" if optimal else "incumbent")
    return BalancingSolution(stages, release, optimal, explored)


# ---------------------------------------------------------------------------
# materialisation

def materialize(model: BalancingModel, sol: BalancingSolution,
                costs: CostTable | None = None) -> BalancedDesign:
    """Insert DFF nodes and rewire sinks; returns the balanced design."""
    net = model.net.copy()
    n = model.n
    sigma = dict(model.stages.sigma)
    for ti, tree in enumerate(model.trees):
        src_node, port = tree.source
        base = Signal(src_node, False, port)
        elems = [(tree.stage, base)]
        for t in sol.dff_stages[ti]:
            parent = max((e for e in elems if e[0] < t), key=lambda e: e[0])
            if t - parent[0] > n:
                raise BalancingError(f"DFF chain gap too large at stage {t}")
            d = net.add_gate(GateKind.DFF, [parent[1]])
            sigma[d] = t
            elems.append((t, Signal(d)))
        for si, sink in enumerate(tree.sinks):
            if sink.t1:
                r = sol.release[(ti, si)]
                pick = [e for e in elems if e[0] == r]
                if not pick:
                    raise BalancingError(f"no element at release stage {r}")
                elem = pick[0]
            else:
                ok = [e for e in elems if sink.stage - n <= e[0] <= sink.stage - 1]
                if not ok:
                    raise BalancingError(f"sink {sink.node} not covered")
                elem = max(ok, key=lambda e: e[0])
            old = net.nodes[sink.node].fanins[sink.pin]
            net.set_fanin(sink.node, sink.pin, elem[1] ^ old.complemented)
    return BalancedDesign(net, n, sigma, optimal=sol.optimal,
                          costs=costs or CostTable())


def greedy_baseline(net: Netlist, stages: StageAssignment,
                    costs: CostTable | None = None) -> BalancedDesign:
    """Per-edge DFF chains without sharing; always feasible upper bound."""
    model = build_csp(net, stages)
    n = model.n
    release = _baseline_release(model)
    work = model.net.copy()
    sigma = dict(stages.sigma)
    for ti, tree in enumerate(model.trees):
        src_node, port = tree.source
        for si, sink in enumerate(tree.sinks):
            if sink.t1:
                r = release[(ti, si)]
                k = math.ceil((r - tree.stage) / n) if r > tree.stage else 0
                chain = [r - (k - 1 - j) * n for j in range(k)]
            else:
                k = (sink.stage - tree.stage - 1) // n
                chain = [tree.stage + n * (j + 1) for j in range(k)]
            prev = Signal(src_node, False, port)
            for t in chain:
                d = work.add_gate(GateKind.DFF, [prev])
                sigma[d] = t
                prev = Signal(d)
            old = work.nodes[sink.node].fanins[sink.pin]
            work.set_fanin(sink.node, sink.pin, prev ^ old.complemented)
    return BalancedDesign(work, n, sigma, optimal=False, costs=costs or CostTable())
