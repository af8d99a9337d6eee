"""Gate-level netlist for SFQ technology mapping.

A :class:`Netlist` is a DAG of typed gates connected by :class:`Signal`
edges.  Edges may be complemented; a complemented edge is free on the
inputs of AND2/OR2/XOR2 and must otherwise be realised by an explicit NOT
(see :func:`materialize_inverters`).  T1 cells are multi-output nodes whose
outputs are selected through ``Signal.port``.

Fanout is never represented explicitly: a source driving ``f > 1`` sink pins
is charged ``f - 1`` splitters by :func:`area`.
"""
from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping


class NetlistError(Exception):
    pass


class ArityError(NetlistError):
    pass


class DanglingFaninError(NetlistError):
    pass


class CycleError(NetlistError):
    pass


class StaleCandidateError(NetlistError):
    pass


class MissingCostError(NetlistError):
    pass


class GateKind(enum.Enum):
    PI = "PI"
    PO = "PO"
    CONST0 = "CONST0"
    AND2 = "AND2"
    OR2 = "OR2"
    XOR2 = "XOR2"
    NOT = "NOT"
    BUF = "BUF"
    MAJ3 = "MAJ3"
    DFF = "DFF"
    SPLITTER = "SPLITTER"
    T1 = "T1"

    @property
    def arity(self) -> int:
        return ARITY[self]

    @property
    def clocked(self) -> bool:
        return self in CLOCKED

    @property
    def absorbs_inversion(self) -> bool:
        return self in ABSORBING


ARITY = {
    GateKind.PI: 0,
    GateKind.CONST0: 0,
    GateKind.PO: 1,
    GateKind.NOT: 1,
    GateKind.BUF: 1,
    GateKind.DFF: 1,
    GateKind.SPLITTER: 1,
    GateKind.AND2: 2,
    GateKind.OR2: 2,
    GateKind.XOR2: 2,
    GateKind.MAJ3: 3,
    GateKind.T1: 3,
}

CLOCKED = frozenset({
    GateKind.AND2, GateKind.OR2, GateKind.XOR2, GateKind.NOT,
    GateKind.BUF, GateKind.MAJ3, GateKind.DFF, GateKind.T1,
})

# complemented input edges are folded into these gates at no cost
ABSORBING = frozenset({GateKind.AND2, GateKind.OR2, GateKind.XOR2})

# stage-0 sources: never clocked, pinned at the input reference
SOURCES = frozenset({GateKind.PI, GateKind.CONST0})


class T1Role(enum.Enum):
    SUM = "SUM"
    CARRY = "CARRY"
    ORQ = "ORQ"
    NCARRY = "NCARRY"
    NORQ = "NORQ"

    @property
    def inverted(self) -> bool:
        return self in (T1Role.NCARRY, T1Role.NORQ)


@dataclass(frozen=True, order=True)
class Signal:
    node: int
    complemented: bool = False
    port: T1Role | None = None

    def __invert__(self) -> Signal:
        return replace(self, complemented=not self.complemented)

    def __xor__(self, flip: bool) -> Signal:
        return replace(self, complemented=self.complemented ^ bool(flip))

    @property
    def source(self) -> tuple[int, T1Role | None]:
        return (self.node, self.port)

    def positive(self) -> Signal:
        return replace(self, complemented=False)


@dataclass
class Node:
    id: int
    kind: GateKind
    fanins: list[Signal] = field(default_factory=list)
    t1_outputs: frozenset[T1Role] | None = None
    name: str | None = None


def t1_eval(a: int, b: int, c: int, mask: int) -> dict[T1Role, int]:
    """Bit-parallel T1 outputs for input words ``a, b, c``."""
    maj = (a & b) | (a & c) | (b & c)
    orq = a | b | c
    return {
        T1Role.SUM: a ^ b ^ c,
        T1Role.CARRY: maj,
        T1Role.ORQ: orq,
        T1Role.NCARRY: ~maj & mask,
        T1Role.NORQ: ~orq & mask,
    }


class Netlist:
    """Mutable combinational gate graph.

    Node ids are never reused.  Topological order is recomputed lazily after
    mutations; ties are broken by node id so every traversal is deterministic.
    """

    def __init__(self, name: str = "top"):
        self.name = name
        self.nodes: dict[int, Node] = {}
        self.pis: list[int] = []
        self.pos: list[int] = []
        # replaced root id -> signal now carrying its function
        self.substitutions: dict[int, Signal] = {}
        self._next_id = 0
        self._const0: int | None = None
        self._order: list[int] | None = None
        self._fanouts: dict[int, list[tuple[int, int]]] | None = None

    # -- construction ---------------------------------------------------

    def add_gate(self, kind: GateKind, fanins: Iterable[Signal] = (),
                 name: str | None = None,
                 t1_outputs: Iterable[T1Role] | None = None) -> int:
        fanins = [s if isinstance(s, Signal) else Signal(s) for s in fanins]
        if len(fanins) != kind.arity:
            raise ArityError(
                f"{kind.value} takes {kind.arity} fanins, got {len(fanins)}")
        for s in fanins:
            src = self.nodes.get(s.node)
            if src is None:
                raise DanglingFaninError(f"fanin node {s.node} does not exist")
            if src.kind is GateKind.PO:
                raise NetlistError(f"node {s.node} is a PO and drives nothing")
            if (src.kind is GateKind.T1) != (s.port is not None):
                raise NetlistError(f"bad port {s.port} on fanin {s.node}")
            if s.port is not None and s.port not in (src.t1_outputs or ()):
                raise NetlistError(f"T1 {s.node} has no {s.port.value} output")
        outs = None
        if kind is GateKind.T1:
            outs = frozenset(t1_outputs or ())
            if not 1 <= len(outs) <= 5:
                raise NetlistError("a T1 cell needs 1..5 used outputs")
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = Node(nid, kind, fanins, outs, name)
        if kind is GateKind.PI:
            self.pis.append(nid)
        elif kind is GateKind.PO:
            self.pos.append(nid)
        self._touch()
        return nid

    def add_pi(self, name: str | None = None) -> Signal:
        return Signal(self.add_gate(GateKind.PI, (), name=name))

    def add_po(self, sig: Signal, name: str | None = None) -> int:
        return self.add_gate(GateKind.PO, [sig], name=name)

    def const0(self) -> Signal:
        if self._const0 is None or self._const0 not in self.nodes:
            self._const0 = self.add_gate(GateKind.CONST0, ())
        return Signal(self._const0)

    # convenience constructors used by parsers and generators
    def AND(self, a: Signal, b: Signal) -> Signal:
        return Signal(self.add_gate(GateKind.AND2, [a, b]))

    def OR(self, a: Signal, b: Signal) -> Signal:
        return Signal(self.add_gate(GateKind.OR2, [a, b]))

    def XOR(self, a: Signal, b: Signal) -> Signal:
        return Signal(self.add_gate(GateKind.XOR2, [a, b]))

    def NOT(self, a: Signal) -> Signal:
        return Signal(self.add_gate(GateKind.NOT, [a]))

    def MAJ(self, a: Signal, b: Signal, c: Signal) -> Signal:
        return Signal(self.add_gate(GateKind.MAJ3, [a, b, c]))

    # -- queries --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, nid: int) -> bool:
        return nid in self.nodes

    def __getitem__(self, nid: int) -> Node:
        return self.nodes[nid]

    def kind(self, nid: int) -> GateKind:
        return self.nodes[nid].kind

    def pi_names(self) -> list[str]:
        return [self.nodes[i].name or f"pi{k}" for k, i in enumerate(self.pis)]

    def po_names(self) -> list[str]:
        return [self.nodes[i].name or f"po{k}" for k, i in enumerate(self.pos)]

    def fanouts(self) -> dict[int, list[tuple[int, int]]]:
        """Map node id -> list of (consumer id, pin index)."""
        if self._fanouts is None:
            fo: dict[int, list[tuple[int, int]]] = {i: [] for i in self.nodes}
            for nid in sorted(self.nodes):
                for pin, s in enumerate(self.nodes[nid].fanins):
                    fo[s.node].append((nid, pin))
            self._fanouts = fo
        return self._fanouts

    def source_fanout_counts(self) -> dict[tuple[int, T1Role | None], int]:
        """Number of sink pins per output net (node, port)."""
        counts: dict[tuple[int, T1Role | None], int] = {}
        for node in self.nodes.values():
            if node.kind is GateKind.PO:
                continue
            if node.kind is GateKind.T1:
                for r in node.t1_outputs:
                    counts[(node.id, r)] = 0
            else:
                counts[(node.id, None)] = 0
        for node in self.nodes.values():
            for s in node.fanins:
                counts[s.source] += 1
        return counts

    def topo_order(self) -> list[int]:
        if self._order is None:
            indeg = {i: 0 for i in self.nodes}
            fo = self.fanouts()
            for nid, node in self.nodes.items():
                indeg[nid] = len(node.fanins)
            heap = [i for i, d in indeg.items() if d == 0]
            heapq.heapify(heap)
            order = []
            while heap:
                v = heapq.heappop(heap)
                order.append(v)
                for w, _ in fo[v]:
                    indeg[w] -= 1
                    if indeg[w] == 0:
                        heapq.heappush(heap, w)
            if len(order) != len(self.nodes):
                raise CycleError("netlist contains a combinational cycle")
            self._order = order
        return self._order

    def clocked_nodes(self) -> list[int]:
        return [i for i in self.topo_order() if self.nodes[i].kind.clocked]

    def resolve(self, nid: int) -> Signal:
        """Follow rewrite substitutions for an original node id."""
        sig = Signal(nid)
        seen = 0
        while sig.node in self.substitutions:
            sub = self.substitutions[sig.node]
            sig = replace(sub, complemented=sub.complemented ^ sig.complemented)
            seen += 1
            if seen > len(self.substitutions) + 1:
                raise NetlistError("substitution loop")
        return sig

    def check(self) -> None:
        """Raise if any structural invariant is violated."""
        for node in self.nodes.values():
            if len(node.fanins) != node.kind.arity:
                raise ArityError(f"node {node.id} arity mismatch")
            for s in node.fanins:
                if s.node not in self.nodes:
                    raise DanglingFaninError(
                        f"node {node.id} reads missing node {s.node}")
        rank = {v: k for k, v in enumerate(self.topo_order())}
        for node in self.nodes.values():
            for s in node.fanins:
                if rank[s.node] >= rank[node.id]:
                    raise CycleError(f"fanin {s.node} after node {node.id}")

    # -- mutation -------------------------------------------------------

    def _touch(self) -> None:
        self._order = None
        self._fanouts = None

    def set_fanin(self, nid: int, pin: int, sig: Signal) -> None:
        self.nodes[nid].fanins[pin] = sig
        self._touch()

    def remove_nodes(self, ids: Iterable[int]) -> None:
        ids = set(ids)
        for i in ids:
            node = self.nodes.pop(i)
            if node.kind is GateKind.PI:
                self.pis.remove(i)
            elif node.kind is GateKind.PO:
                self.pos.remove(i)
        self._touch()

    def sweep(self) -> int:
        """Delete gates with no path to a PO.  Returns the count removed."""
        live = set(self.pis) | set(self.pos)
        stack = list(self.pos)
        while stack:
            v = stack.pop()
            for s in self.nodes[v].fanins:
                if s.node not in live:
                    live.add(s.node)
                    stack.append(s.node)
        dead = [i for i in self.nodes if i not in live]
        if dead:
            self.remove_nodes(dead)
        return len(dead)

    def copy(self) -> Netlist:
        other = Netlist(self.name)
        other.nodes = {
            i: Node(n.id, n.kind, list(n.fanins), n.t1_outputs, n.name)
            for i, n in self.nodes.items()
        }
        other.pis = list(self.pis)
        other.pos = list(self.pos)
        other.substitutions = dict(self.substitutions)
        other._next_id = self._next_id
        other._const0 = self._const0
        return other

    # -- evaluation -----------------------------------------------------

    def simulate(self, pi_words: list[int], width: int
                 ) -> dict[tuple[int, T1Role | None], int]:
        """Untimed bit-parallel evaluation with Python integers.

        ``pi_words[k]`` holds ``width`` input patterns for the k-th PI.
        Returns the value word of every output net keyed by (node, port).
        PO nodes are keyed as (po_id, None).
        """
        mask = (1 << width) - 1
        val: dict[tuple[int, T1Role | None], int] = {}
        for k, pi in enumerate(self.pis):
            val[(pi, None)] = pi_words[k] & mask

        def rd(s: Signal) -> int:
            v = val[s.source]
            return (~v & mask) if s.complemented else v

        for nid in self.topo_order():
            node = self.nodes[nid]
            k = node.kind
            if k is GateKind.PI:
                continue
            if k is GateKind.CONST0:
                val[(nid, None)] = 0
                continue
            ins = [rd(s) for s in node.fanins]
            if k is GateKind.T1:
                outs = t1_eval(ins[0], ins[1], ins[2], mask)
                for r in node.t1_outputs:
                    val[(nid, r)] = outs[r]
                continue
            if k is GateKind.AND2:
                v = ins[0] & ins[1]
            elif k is GateKind.OR2:
                v = ins[0] | ins[1]
            elif k is GateKind.XOR2:
                v = ins[0] ^ ins[1]
            elif k is GateKind.NOT:
                v = ~ins[0] & mask
            elif k is GateKind.MAJ3:
                a, b, c = ins
                v = (a & b) | (a & c) | (b & c)
            else:  # PO, BUF, DFF, SPLITTER
                v = ins[0]
            val[(nid, None)] = v
        return val

    def output_words(self, pi_words: list[int], width: int) -> list[int]:
        val = self.simulate(pi_words, width)
        return [val[(po, None)] for po in self.pos]


def exhaustive_pi_words(num_pis: int) -> tuple[list[int], int]:
    """Truth-table style input words enumerating all 2**num_pis patterns."""
    width = 1 << num_pis
    words = []
    for k in range(num_pis):
        block = 1 << k
        w = 0
        for start in range(block, width, 2 * block):
            w |= ((1 << block) - 1) << start
        words.append(w)
    return words, width


# ---------------------------------------------------------------------------
# depth and area

def logic_depth(net: Netlist) -> int:
    """Maximum number of clocked elements on any PI -> PO path."""
    depth: dict[int, int] = {}
    for nid in net.topo_order():
        node = net.nodes[nid]
        d = max((depth[s.node] for s in node.fanins), default=0)
        depth[nid] = d + (1 if node.kind.clocked else 0)
    return max((depth[po] for po in net.pos), default=0)


@dataclass
class CostTable:
    """JJ count per gate kind plus T1 configuration costs."""

    kinds: dict[GateKind, int] = field(default_factory=lambda: {
        GateKind.AND2: 10, GateKind.OR2: 8, GateKind.XOR2: 8,
        GateKind.NOT: 9, GateKind.MAJ3: 23, GateKind.DFF: 6,
        GateKind.SPLITTER: 3,
    })
    t1_base: int = 29
    inverter_out: int = 9
    inverter_in: int = 9

    def __post_init__(self):
        for k, v in self.kinds.items():
            if v < 0:
                raise ValueError(f"negative cost for {k.value}")
        if min(self.t1_base, self.inverter_out, self.inverter_in) < 0:
            raise ValueError("negative T1 cost")

    def cost(self, kind: GateKind) -> int:
        if kind in SOURCES or kind is GateKind.PO:
            return 0
        if kind is GateKind.T1:
            return self.t1_base
        try:
            return self.kinds[kind]
        except KeyError:
            raise MissingCostError(f"no cost entry for {kind.value}") from None

    def node_cost(self, node: Node) -> int:
        if node.kind is GateKind.T1:
            inv = sum(1 for r in node.t1_outputs if r.inverted)
            return self.t1_base + self.inverter_out * inv
        return self.cost(node.kind)

    def splitters(self, fanout: int, kind: GateKind = GateKind.AND2) -> int:
        # an explicit SPLITTER node already provides two branches
        spare = 2 if kind is GateKind.SPLITTER else 1
        return max(fanout - spare, 0)

    @classmethod
    def from_text(cls, text: str) -> CostTable:
        """Parse ``key=value`` lines (``#`` comments allowed)."""
        table = cls()
        kinds = dict(table.kinds)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            try:
                num = int(value)
            except ValueError:
                raise ValueError(f"line {lineno}: {value!r} is not an integer") from None
            if key in ("t1_base", "inverter_out", "inverter_in"):
                setattr(table, key, num)
            else:
                try:
                    kinds[GateKind[key.upper()]] = num
                except KeyError:
                    raise ValueError(f"line {lineno}: unknown gate kind {key!r}") from None
        table.kinds = kinds
        table.__post_init__()
        return table

    def to_text(self) -> str:
        lines = [f"{k.value}={v}" for k, v in sorted(self.kinds.items(),
                                                       key=lambda kv: kv[0].value)]
        lines += [f"t1_base={self.t1_base}", f"inverter_out={self.inverter_out}",
                  f"inverter_in={self.inverter_in}"]
        return "\n".join(lines) + "\n"


def splitter_count(net: Netlist) -> int:
    counts = net.source_fanout_counts()
    dummy = CostTable()
    return sum(dummy.splitters(f, net.nodes[nid].kind)
               for (nid, _), f in counts.items())


def area(net: Netlist, costs: CostTable | None = None) -> int:
    """Total JJ count: configured gate costs plus implicit splitter trees."""
    costs = costs or CostTable()
    total = sum(costs.node_cost(node) for node in net.nodes.values())
    counts = net.source_fanout_counts()
    nspl = sum(costs.splitters(f, net.nodes[nid].kind)
               for (nid, _), f in counts.items())
    if nspl:
        total += nspl * costs.cost(GateKind.SPLITTER)
    return total


# ---------------------------------------------------------------------------
# maximum fanout-free cones

def mffc_multi(net: Netlist, roots: Iterable[int],
               stop: Iterable[int] = ()) -> set[int]:
    """Nodes that die once every root loses its consumers.

    ``stop`` nodes are treated as externally referenced (they survive), which
    bounds the cone at a cut frontier.
    """
    fo = net.fanouts()
    refs = {i: len(v) for i, v in fo.items()}
    stop = set(stop)
    cone: set[int] = set()
    stack = []
    for r in roots:
        if net.nodes[r].kind in SOURCES:
            raise ValueError(f"MFFC root {r} is a primary input")
        if r not in cone:
            cone.add(r)
            stack.append(r)
    while stack:
        v = stack.pop()
        for s in net.nodes[v].fanins:
            u = s.node
            refs[u] -= 1
            if (refs[u] == 0 and u not in cone and u not in stop
                    and net.nodes[u].kind not in SOURCES):
                cone.add(u)
                stack.append(u)
    return cone


def mffc(net: Netlist, root: int, stop: Iterable[int] = ()) -> set[int]:
    """Maximum fanout-free cone of ``root`` (root included)."""
    return mffc_multi(net, [root], stop)


def cone_area(net: Netlist, nodes: Iterable[int], costs: CostTable) -> int:
    return sum(costs.node_cost(net.nodes[i]) for i in nodes)


# ---------------------------------------------------------------------------
# inverter materialisation

def materialize_inverters(net: Netlist) -> int:
    """Replace complemented edges into non-absorbing sinks by NOT gates.

    One NOT is shared per complemented source net.  Returns the number of
    NOT gates inserted.  Operates in place.
    """
    inverters: dict[tuple[int, T1Role | None], int] = {}
    pending = []
    for nid in net.topo_order():
        node = net.nodes[nid]
        if node.kind.absorbs_inversion:
            continue
        for pin, s in enumerate(node.fanins):
            if s.complemented:
                pending.append((nid, pin, s))
    for nid, pin, s in pending:
        key = s.source
        if key not in inverters:
            inverters[key] = net.add_gate(GateKind.NOT, [s.positive()])
        net.set_fanin(nid, pin, Signal(inverters[key]))
    return len(inverters)


# ---------------------------------------------------------------------------
# cone replacement by a T1 cell

@dataclass
class ReplacementPlan:
    """Bookkeeping for replacing a set of root cones by one T1 cell.

    Everything area-related is computed here so that the gain estimate and the
    actual rewrite use identical accounting.
    """

    roots: dict[T1Role, int]
    inputs: list[Signal]            # resolved, polarity applied, may be complemented
    removed: set[int]
    per_root_area: dict[T1Role, int]
    removed_area: int
    splitters_before: int
    splitters_after: int
    t1_cost: int
    input_inverters: int
    output_inverters: int           # NOTs for complemented non-absorbing sinks
    out_complement: dict[T1Role, bool]

    @property
    def gain(self) -> int:
        return (self.removed_area + self.splitters_before
                - self.splitters_after - self.t1_cost)


def plan_replacement(net: Netlist, leaves: Iterable[int],
                     polarity: Iterable[bool], matches: Mapping[T1Role, int],
                     out_complement: Mapping[T1Role, bool] | None,
                     costs: CostTable) -> ReplacementPlan:
    leaves = list(leaves)
    polarity = list(polarity)
    out_complement = dict(out_complement or {})
    roots = dict(matches)
    for role, r in roots.items():
        if r not in net.nodes:
            raise StaleCandidateError(f"root {r} ({role.value}) no longer exists")
    inputs = []
    for leaf, neg in zip(leaves, polarity):
        sig = net.resolve(leaf)
        if sig.node not in net.nodes:
            raise StaleCandidateError(f"leaf {leaf} no longer exists")
        inputs.append(sig ^ neg)
    leaf_nodes = {s.node for s in inputs}
    if leaf_nodes & set(roots.values()):
        raise StaleCandidateError("a leaf coincides with a root")
    # the new cell reads the leaves; a leaf depending on a root would loop
    _check_no_leaf_depends_on_roots(net, leaf_nodes, set(roots.values()))

    removed = mffc_multi(net, roots.values(), stop=leaf_nodes)
    per_root = {}
    for role, r in roots.items():
        per_root[role] = cone_area(net, mffc(net, r, stop=leaf_nodes), costs)
    removed_area = cone_area(net, removed, costs)

    fo = net.fanouts()
    counts = net.source_fanout_counts()
    spl_cost = costs.kinds.get(GateKind.SPLITTER, 0)

    def spl(nid: int, f: int) -> int:
        return costs.splitters(f, net.nodes[nid].kind) * spl_cost

    before: dict[tuple, int] = {}
    after: dict[tuple, int] = {}
    # sources losing sink pins because removed gates disappear
    for v in removed:
        node = net.nodes[v]
        keys = ([(v, r) for r in node.t1_outputs] if node.kind is GateKind.T1
                else [(v, None)])
        for key in keys:
            before[key] = counts[key]
            after[key] = 0
        for s in node.fanins:
            if s.node in removed:
                continue
            before.setdefault(s.source, counts[s.source])
            after.setdefault(s.source, counts[s.source])
            after[s.source] -= 1
    # the T1 (or its input inverters) reads every leaf once
    n_in_inv = 0
    for s in inputs:
        before.setdefault(s.source, counts[s.source])
        after.setdefault(s.source, counts[s.source])
        after[s.source] += 1
        if s.complemented:
            n_in_inv += 1
    # root consumers move to T1 ports
    port_fo: dict[T1Role, int] = {r: 0 for r in roots}
    inv_fo: dict[T1Role, int] = {}
    for role, r in roots.items():
        flip = out_complement.get(role, False)
        for c, pin in fo[r]:
            if c in removed:
                continue
            edge = net.nodes[c].fanins[pin]
            if (edge.complemented ^ flip) and not net.nodes[c].kind.absorbs_inversion:
                inv_fo[role] = inv_fo.get(role, 0) + 1
            else:
                port_fo[role] += 1
    for role, f in inv_fo.items():
        port_fo[role] += 1          # port drives the inverter
    spl_before = sum(spl(k[0], f) for k, f in before.items())
    spl_after = sum(spl(k[0], f) for k, f in after.items())
    spl_after += sum(costs.splitters(f) * spl_cost for f in port_fo.values())
    spl_after += sum(costs.splitters(f) * spl_cost for f in inv_fo.values())

    n_out_inv_roles = sum(1 for r in roots if r.inverted)
    t1_cost = (costs.t1_base + costs.inverter_out * n_out_inv_roles
               + costs.inverter_in * n_in_inv)
    if inv_fo:
        t1_cost += costs.cost(GateKind.NOT) * len(inv_fo)
    return ReplacementPlan(
        roots=roots, inputs=inputs, removed=removed, per_root_area=per_root,
        removed_area=removed_area, splitters_before=spl_before,
        splitters_after=spl_after, t1_cost=t1_cost, input_inverters=n_in_inv,
        output_inverters=len(inv_fo), out_complement=out_complement)


def _check_no_leaf_depends_on_roots(net: Netlist, leaves: set[int],
                                    roots: set[int]) -> None:
    seen = set()
    stack = list(leaves)
    while stack:
        v = stack.pop()
        if v in roots:
            raise StaleCandidateError("leaf lies in the fanout of a root")
        for s in net.nodes[v].fanins:
            if s.node not in seen:
                seen.add(s.node)
                stack.append(s.node)


def apply_replacement(net: Netlist, plan: ReplacementPlan) -> int:
    """Rewrite ``net`` in place according to ``plan``; returns the T1 id."""
    fo = net.fanouts()
    t1_inputs = []
    for s in plan.inputs:
        if s.complemented:
            t1_inputs.append(Signal(net.add_gate(GateKind.NOT, [s.positive()])))
        else:
            t1_inputs.append(s)
    consumers = {role: [(c, pin) for c, pin in fo[r] if c not in plan.removed]
                 for role, r in plan.roots.items()}
    t1 = net.add_gate(GateKind.T1, t1_inputs, t1_outputs=plan.roots.keys())
    for role, r in plan.roots.items():
        flip = plan.out_complement.get(role, False)
        port = Signal(t1, False, role)
        inverter = None
        for c, pin in consumers[role]:
            edge = net.nodes[c].fanins[pin]
            compl = edge.complemented ^ flip
            if compl and not net.nodes[c].kind.absorbs_inversion:
                if inverter is None:
                    inverter = net.add_gate(GateKind.NOT, [port])
                net.set_fanin(c, pin, Signal(inverter))
            else:
                net.set_fanin(c, pin, port ^ compl)
        net.substitutions[r] = port ^ flip
    net.remove_nodes(plan.removed)
    return t1


def replace_cone(net: Netlist, candidate, costs: CostTable | None = None,
                 in_place: bool = False) -> Netlist:
    """Replace the candidate's root cones by a T1 cell.

    ``candidate`` is a :class:`sfqmap.t1map.T1Candidate`.  Raises
    :class:`StaleCandidateError` when the candidate no longer applies.
    """
    costs = costs or CostTable()
    target = net if in_place else net.copy()
    plan = plan_replacement(target, candidate.leaves, candidate.polarity,
                            candidate.matches, candidate.out_complement, costs)
    apply_replacement(target, plan)
    return target
