"""3-feasible cut enumeration with 8-bit truth tables.

Truth tables use leaf 0 as the least significant input: the projection of
leaf ``i`` is ``PROJ[i]`` (0xAA, 0xCC, 0xF0).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from .netlist import GateKind, Netlist, NetlistError, Signal, SOURCES, t1_eval

PROJ = (0xAA, 0xCC, 0xF0)
MASK8 = 0xFF


class CutError(NetlistError):
    pass


@dataclass(frozen=True)
class Cut:
    root: int
    leaves: tuple[int, ...]
    tt: int
    cone: frozenset[int] = field(default=frozenset(), compare=False, repr=False)

    @property
    def trivial(self) -> bool:
        return self.leaves == (self.root,)

    def priority(self) -> tuple:
        return (len(self.leaves), len(self.cone), self.leaves)


@lru_cache(maxsize=None)
def _expand_table(positions: tuple[int, ...]) -> tuple[int, ...]:
    """For each 3-var minterm, the minterm index of a sub-function whose
    j-th variable sits at ``positions[j]``."""
    out = []
    for m in range(8):
        sub = 0
        for j, p in enumerate(positions):
            sub |= ((m >> p) & 1) << j
        out.append(sub)
    return tuple(out)


@lru_cache(maxsize=65536)
def expand_tt(tt: int, positions: tuple[int, ...]) -> int:
    """Re-express ``tt`` (over len(positions) vars) over 3 variables."""
    table = _expand_table(positions)
    res = 0
    for m in range(8):
        res |= ((tt >> table[m]) & 1) << m
    return res


def _gate_tt(kind: GateKind, ins: list[int]) -> int:
    if kind is GateKind.AND2:
        return ins[0] & ins[1]
    if kind is GateKind.OR2:
        return ins[0] | ins[1]
    if kind is GateKind.XOR2:
        return ins[0] ^ ins[1]
    if kind is GateKind.NOT:
        return ~ins[0] & MASK8
    if kind is GateKind.MAJ3:
        a, b, c = ins
        return (a & b) | (a & c) | (b & c)
    if kind in (GateKind.BUF, GateKind.DFF, GateKind.SPLITTER):
        return ins[0]
    raise CutError(f"no cut semantics for {kind.value}")


def _trivial(nid: int) -> Cut:
    return Cut(nid, (nid,), PROJ[0], frozenset())


class CutSet(dict):
    """node id -> list of cuts, trivial cut first."""

    def __init__(self, c_max: int | None):
        super().__init__()
        self.c_max = c_max

    def all_cuts(self):
        for nid in sorted(self):
            yield from self[nid]


def enumerate_cuts(net: Netlist, k: int = 3, c_max: int | None = 16) -> CutSet:
    """Bottom-up cut enumeration.

    Per node, merged fanin cuts with at most ``k`` leaves are kept after
    removing duplicates and dominated cuts, sorted by (leaf count, cone size,
    leaves) and truncated to ``c_max`` entries including the trivial cut.
    ``c_max=None`` disables truncation.
    """
    if k != 3:
        raise ValueError("only k=3 cuts are supported")
    if c_max is not None and c_max < 1:
        raise ValueError("c_max must be >= 1")
    cuts = CutSet(c_max)
    for nid in net.topo_order():
        node = net.nodes[nid]
        triv = _trivial(nid)
        if (node.kind in SOURCES or node.kind is GateKind.PO
                or node.kind is GateKind.T1
                or any(s.port is not None for s in node.fanins)):
            cuts[nid] = [triv]
            continue
        merged: dict[tuple[int, ...], Cut] = {}
        for combo in itertools.product(*(cuts[s.node] for s in node.fanins)):
            leaves = sorted(set().union(*(c.leaves for c in combo)))
            if len(leaves) > k:
                continue
            leaves = tuple(leaves)
            if leaves in merged:
                continue
            pos = {l: i for i, l in enumerate(leaves)}
            ins = []
            for s, c in zip(node.fanins, combo):
                t = expand_tt(c.tt, tuple(pos[l] for l in c.leaves))
                ins.append((~t & MASK8) if s.complemented else t)
            cone = frozenset().union(*(c.cone for c in combo)) | {nid}
            merged[leaves] = Cut(nid, leaves, _gate_tt(node.kind, ins), cone)
        found = _drop_dominated(list(merged.values()))
        found.sort(key=Cut.priority)
        if c_max is not None:
            found = found[:c_max - 1]
        cuts[nid] = [triv] + found
    return cuts


def _drop_dominated(cands: list[Cut]) -> list[Cut]:
    sets = [frozenset(c.leaves) for c in cands]
    keep = []
    for i, c in enumerate(cands):
        if not any(j != i and sets[j] < sets[i] for j in range(len(cands))):
            keep.append(c)
    return keep


def cut_function(net: Netlist, cut: Cut) -> int:
    """Truth table of ``cut.root`` over ``cut.leaves`` by exhaustive evaluation.

    Raises :class:`CutError` when a path into the root bypasses the leaves.
    """
    if len(cut.leaves) > 3:
        raise CutError("more than 3 leaves")
    leafpos = {l: i for i, l in enumerate(cut.leaves)}
    memo: dict[int, object] = {}

    def ev(v: int, port=None) -> int:
        if v in leafpos:
            return PROJ[leafpos[v]]
        node = net.nodes[v]
        if node.kind is GateKind.CONST0:
            return 0
        if node.kind is GateKind.PI:
            raise CutError(f"PI {v} reaches root {cut.root} outside the leaves")
        if v not in memo:
            ins = [rd(s) for s in node.fanins]
            if node.kind is GateKind.T1:
                memo[v] = t1_eval(ins[0], ins[1], ins[2], MASK8)
            else:
                memo[v] = _gate_tt(node.kind, ins)
        val = memo[v]
        return val[port] if isinstance(val, dict) else val

    def rd(s: Signal) -> int:
        t = ev(s.node, s.port)
        return (~t & MASK8) if s.complemented else t

    return ev(cut.root)
