"""T1 pulse model, timed simulation, equivalence checking and schedule checks."""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import simcore
from .balancing import BalancedDesign
from .netlist import GateKind, Netlist, Signal, SOURCES, T1Role
from .staging import t1_min_stage

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 20
DEFAULT_RANDOM_VECTORS = 100_000


class VerifyError(Exception):
    pass


class InterfaceMismatch(VerifyError):
    pass


class T1HazardError(VerifyError):
    pass


# ---------------------------------------------------------------------------
# pulse-level T1 cell

class Pulse(enum.Enum):
    T = "T"
    R = "R"


class T1Out(enum.Enum):
    Q = "Q*"
    C = "C*"
    S = "S"


@dataclass(frozen=True)
class T1State:
    loop: int = 0
    fired: frozenset[T1Out] = frozenset()


def t1_pulse_step(state: T1State, pulse: Pulse) -> tuple[T1State, tuple[T1Out, ...]]:
    """One input pulse into the T1 storage loop."""
    if pulse is Pulse.T:
        out = T1Out.Q if state.loop == 0 else T1Out.C
        return T1State(1 - state.loop, state.fired | {out}), (out,)
    if state.loop == 1:
        return T1State(0, state.fired | {T1Out.S}), (T1Out.S,)
    return T1State(0, state.fired), ()


def t1_truth(bits, arrivals, reset: int) -> tuple[int, int, int]:
    """(S, C, Q) read out after feeding present inputs in arrival order."""
    bits = tuple(int(b) for b in bits)
    arrivals = tuple(arrivals)
    if len(bits) != 3 or len(arrivals) != 3:
        raise ValueError("T1 has exactly three data inputs")
    if len(set(arrivals)) != 3:
        raise T1HazardError(f"simultaneous arrivals {arrivals}")
    if max(arrivals) >= reset:
        raise ValueError("every arrival must precede the reset stage")
    st = T1State()
    for _, b in sorted(zip(arrivals, bits)):
        if b:
            st, _ = t1_pulse_step(st, Pulse.T)
    st, _ = t1_pulse_step(st, Pulse.R)
    return (int(T1Out.S in st.fired), int(T1Out.C in st.fired),
            int(T1Out.Q in st.fired))


_PORT_FROM_STATE = {
    T1Role.SUM: lambda f: T1Out.S in f,
    T1Role.CARRY: lambda f: T1Out.C in f,
    T1Role.ORQ: lambda f: T1Out.Q in f,
    T1Role.NCARRY: lambda f: T1Out.C not in f,
    T1Role.NORQ: lambda f: T1Out.Q not in f,
}


# ---------------------------------------------------------------------------
# helpers

def _stage_map(design: BalancedDesign):
    net = design.net

    def stage(nid: int) -> int:
        if net.nodes[nid].kind in SOURCES:
            return 0
        return design.sigma[nid]
    return stage


def _effective(net: Netlist, s: Signal) -> Signal:
    while net.nodes[s.node].kind is GateKind.SPLITTER:
        inner = net.nodes[s.node].fanins[0]
        s = Signal(inner.node, inner.complemented ^ s.complemented, inner.port)
    return s


# ---------------------------------------------------------------------------
# bit-parallel program compilation

_OPS = {
    GateKind.AND2: simcore.OP_AND, GateKind.OR2: simcore.OP_OR,
    GateKind.XOR2: simcore.OP_XOR, GateKind.NOT: simcore.OP_NOT,
    GateKind.MAJ3: simcore.OP_MAJ, GateKind.BUF: simcore.OP_COPY,
    GateKind.DFF: simcore.OP_COPY, GateKind.SPLITTER: simcore.OP_COPY,
    GateKind.PO: simcore.OP_COPY, GateKind.CONST0: simcore.OP_CONST0,
    GateKind.T1: simcore.OP_T1,
}
_PORT_ROW = {T1Role.SUM: 0, T1Role.CARRY: 1, T1Role.ORQ: 2,
             T1Role.NCARRY: 3, T1Role.NORQ: 4}


@dataclass
class Program:
    code: np.ndarray
    rows: int
    pi_rows: list[int]
    po_rows: list[int]
    hazard_rows: dict[int, int]


def compile_program(net: Netlist, design: BalancedDesign | None = None) -> Program:
    """Lower a netlist to the runner's instruction format.

    With ``design`` the program is timed: a clocked pin whose source is
    released outside its window reads nothing, and T1 inputs released at the
    same stage merge (and raise the hazard row).
    """
    rows: dict[tuple[int, T1Role | None], int] = {}
    nrows = 0
    pi_rows = []
    for pi in net.pis:
        rows[(pi, None)] = nrows
        pi_rows.append(nrows)
        nrows += 1
    stage = _stage_map(design) if design is not None else None
    n = design.n if design is not None else 0
    code = []
    hazard_rows = {}
    for nid in net.topo_order():
        node = net.nodes[nid]
        if node.kind is GateKind.PI:
            continue
        ins = [0, 0, 0]
        flags = 0
        groups = [0, 1, 2]
        releases = []
        for k, s in enumerate(node.fanins):
            ins[k] = rows[s.source]
            if s.complemented:
                flags |= 1 << k
            if stage is not None and node.kind.clocked:
                src = _effective(net, s).node
                r = stage(src)
                sv = design.sigma[nid]
                if not sv - n <= r <= sv - 1:
                    flags |= 1 << (3 + k)
                releases.append(r)
        if node.kind is GateKind.T1 and stage is not None:
            for k in range(3):
                groups[k] = next(j for j in range(3) if releases[j] == releases[k])
        out = nrows
        if node.kind is GateKind.T1:
            for role, off in _PORT_ROW.items():
                rows[(nid, role)] = out + off
            hazard_rows[nid] = out + 5
            nrows += 6
        else:
            rows[(nid, None)] = out
            nrows += 1
        code.append([_OPS[node.kind], out, *ins, flags, *groups])
    arr = np.array(code, dtype=np.int32).reshape(-1, 9)
    return Program(np.ascontiguousarray(arr), nrows, pi_rows,
                   [rows[(po, None)] for po in net.pos], hazard_rows)


def run(program: Program, pi_words: np.ndarray, runner=None) -> np.ndarray:
    width = pi_words.shape[1] if pi_words.ndim == 2 else 1
    val = np.zeros((max(program.rows, 1), width), dtype=np.uint64)
    for k, r in enumerate(program.pi_rows):
        val[r] = pi_words[k]
    (runner or simcore.run_program)(program.code, val)
    return val


def exhaustive_words(num_pis: int) -> tuple[np.ndarray, int]:
    """Input words enumerating all ``2**num_pis`` vectors (vector = bit index)."""
    total = 1 << num_pis
    width = max(1, total // 64)
    words = np.zeros((num_pis, width), dtype=np.uint64)
    idx = np.arange(width, dtype=np.uint64)
    for k in range(num_pis):
        if k < 6:
            pat = 0
            for b in range(64):
                if b >> k & 1:
                    pat |= 1 << b
            words[k, :] = np.uint64(pat)
        else:
            on = (idx >> np.uint64(k - 6)) & np.uint64(1)
            words[k, :] = np.where(on == 1, np.uint64(0xFFFFFFFFFFFFFFFF),
                                   np.uint64(0))
    return words, total


def random_words(num_pis: int, count: int, seed: int) -> tuple[np.ndarray, int]:
    rng = np.random.default_rng(seed)
    width = max(1, -(-count // 64))
    words = rng.integers(0, 2**64, size=(num_pis, width), dtype=np.uint64,
                         endpoint=False)
    return words, count


def _valid_mask(width: int, count: int) -> np.ndarray:
    mask = np.full(width, 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    rem = count - 64 * (width - 1)
    if rem < 64:
        mask[-1] = np.uint64((1 << rem) - 1)
    return mask


# ---------------------------------------------------------------------------
# equivalence

@dataclass
class EquivalenceResult:
    equal: bool
    mode: str
    vectors: int
    hazards: int = 0
    counterexample: dict | None = None
    mismatched_outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "equal": self.equal, "mode": self.mode, "vectors": self.vectors,
            "hazards": self.hazards, "counterexample": self.counterexample,
            "mismatched_outputs": self.mismatched_outputs}, sort_keys=True)


def parse_verify_mode(mode) -> tuple[str, int | None]:
    if isinstance(mode, tuple):
        return mode[0], mode[1]
    if mode == "exhaustive":
        return "exhaustive", None
    if isinstance(mode, str) and mode.startswith("random"):
        _, _, count = mode.partition(":")
        return "random", int(count) if count else DEFAULT_RANDOM_VECTORS
    raise ValueError(f"unknown verify mode {mode!r}")


def _bit(words: np.ndarray, row: int, vec: int) -> int:
    return int(words[row, vec // 64] >> np.uint64(vec % 64) & np.uint64(1))


def check_equivalence(ref: Netlist, design: BalancedDesign | Netlist,
                      mode="exhaustive", seed: int = 0) -> EquivalenceResult:
    """Compare ``ref`` against ``design`` over exhaustive or seeded random vectors.

    A :class:`BalancedDesign` is simulated with stage timing; hazards at T1
    inputs count as failures.  Exhaustive mode falls back to
    ``DEFAULT_RANDOM_VECTORS`` random vectors above ``EXHAUSTIVE_LIMIT`` PIs.
    """
    timed = isinstance(design, BalancedDesign)
    dnet = design.net if timed else design
    if ref.pi_names() != dnet.pi_names() or ref.po_names() != dnet.po_names():
        raise InterfaceMismatch("PI/PO names or order differ")
    kind, count = parse_verify_mode(mode)
    npi = len(ref.pis)
    if kind == "exhaustive" and npi > EXHAUSTIVE_LIMIT:
        kind, count = "random", DEFAULT_RANDOM_VECTORS
    if kind == "exhaustive":
        words, total = exhaustive_words(npi)
        label = "exhaustive"
    else:
        words, total = random_words(npi, count, seed)
        label = f"random:{count}"
    mask = _valid_mask(words.shape[1], total)
    if npi == 0:
        words = np.zeros((0, 1), dtype=np.uint64)
    pref = compile_program(ref)
    pdes = compile_program(dnet, design if timed else None)
    vr = run(pref, words)
    vd = run(pdes, words)
    diff = np.zeros(words.shape[1], dtype=np.uint64)
    bad = []
    for k, (a, b) in enumerate(zip(pref.po_rows, pdes.po_rows)):
        d = (vr[a] ^ vd[b]) & mask
        if d.any():
            bad.append(ref.po_names()[k])
        diff |= d
    haz = np.zeros(words.shape[1], dtype=np.uint64)
    for r in pdes.hazard_rows.values():
        haz |= vd[r]
    haz &= mask
    nhaz = int(sum(bin(int(x)).count("1") for x in haz))
    result = EquivalenceResult(not diff.any() and nhaz == 0, label, total, nhaz,
                               None, bad)
    fail = diff | haz
    if fail.any():
        w = int(np.nonzero(fail)[0][0])
        x = int(fail[w])
        vec = w * 64 + ((x & -x).bit_length() - 1)
        pos = ref.po_names()
        result.counterexample = {
            "inputs": {name: _bit(words, k, vec) for k, name in enumerate(ref.pi_names())},
            "expected": {pos[k]: _bit(vr, r, vec) for k, r in enumerate(pref.po_rows)},
            "actual": {pos[k]: _bit(vd, r, vec) for k, r in enumerate(pdes.po_rows)},
            "hazard": bool(_bit(haz.reshape(1, -1), 0, vec)),
        }
    log.info("equivalence %s over %d vectors: %s", label, total,
             "equal" if result.equal else "DIFFERENT")
    return result


# ---------------------------------------------------------------------------
# streaming pulse simulation

@dataclass(frozen=True)
class HazardEvent:
    node: int
    stage: int
    kind: str


@dataclass
class SimulationResult:
    outputs: list[tuple[int, ...]]
    hazards: list[HazardEvent]
    latency: int


def simulate(design: BalancedDesign, vectors) -> SimulationResult:
    """Event-driven multiphase simulation of a stream of input vectors.

    Vector ``k`` is released by the PIs at stage ``k * n``; a clocked element
    at stage ``s`` fires at every ``s + j * n`` and consumes the pulses that
    arrived since its previous firing.  Output ``k`` of a PO is sampled from
    its driver's firing for vector ``k``.
    """
    net = design.net
    n = design.n
    vectors = [tuple(int(b) for b in v) for v in vectors]
    for v in vectors:
        if len(v) != len(net.pis):
            raise VerifyError(f"vector width {len(v)} != {len(net.pis)} PIs")
    stage = _stage_map(design)
    clocked = [nid for nid in net.topo_order() if net.nodes[nid].kind.clocked]
    for nid in clocked:
        if nid not in design.sigma:
            raise VerifyError(f"clocked node {nid} has no stage")
    consumers: dict[tuple, list[tuple[int, int]]] = {}
    for nid in clocked:
        for pin, s in enumerate(net.nodes[nid].fanins):
            consumers.setdefault(_effective(net, s).source, []).append((nid, pin))
    m = len(vectors)
    top = max((design.sigma[v] for v in clocked), default=0)
    t_end = (m - 1) * n + top if m else -1
    pending: dict[tuple[int, int], list[int]] = {}
    emitted: dict[tuple, set[int]] = {}
    hazards: list[HazardEvent] = []
    by_phase: dict[int, list[int]] = {}
    for v in clocked:
        by_phase.setdefault(design.sigma[v] % n, []).append(v)

    def emit(src, t):
        emitted.setdefault(src, set()).add(t)
        for c in consumers.get(src, ()):
            pending.setdefault(c, []).append(t)

    for t in range(t_end + 1):
        fired = []
        for v in by_phase.get(t % n, ()):
            if t < 0:
                continue
            node = net.nodes[v]
            arr = []
            for pin in range(len(node.fanins)):
                got = pending.pop((v, pin), [])
                if len(got) > 1:
                    hazards.append(HazardEvent(v, t, "merge"))
                arr.append(got)
            fired.append((v, _fire(node, arr, t, hazards)))
        if t % n == 0 and t // n < m:
            k = t // n
            for i, pi in enumerate(net.pis):
                if vectors[k][i]:
                    emit((pi, None), t)
        for v, outs in fired:
            for port in outs:
                emit((v, port), t)

    outputs = []
    for k in range(m):
        row = []
        for po in net.pos:
            s = _effective(net, net.nodes[po].fanins[0])
            drv = net.nodes[s.node]
            if drv.kind is GateKind.CONST0:
                bit = 0
            else:
                bit = int(stage(s.node) + k * n in emitted.get(s.source, ()))
            row.append(bit ^ int(s.complemented))
        outputs.append(tuple(row))
    return SimulationResult(outputs, hazards, design.depth_cycles)


def _fire(node, arr, t, hazards) -> list:
    """Output ports (None for single-output gates) pulsing at this firing."""
    kind = node.kind
    if kind is GateKind.T1:
        times = []
        for pin, got in enumerate(arr):
            present = bool(got) ^ node.fanins[pin].complemented
            if present:
                times.append(min(got) if got else t - 1)
        if len(set(times)) != len(times):
            hazards.append(HazardEvent(node.id, t, "t1-simultaneous"))
        st = T1State()
        for _ in sorted(set(times)):
            st, _ = t1_pulse_step(st, Pulse.T)
        st, _ = t1_pulse_step(st, Pulse.R)
        roles = node.t1_outputs or frozenset(T1Role)
        return [r for r in sorted(roles, key=lambda r: r.value)
                if _PORT_FROM_STATE[r](st.fired)]
    bits = [int(bool(got) ^ node.fanins[p].complemented) for p, got in enumerate(arr)]
    if kind is GateKind.AND2:
        v = bits[0] & bits[1]
    elif kind is GateKind.OR2:
        v = bits[0] | bits[1]
    elif kind is GateKind.XOR2:
        v = bits[0] ^ bits[1]
    elif kind is GateKind.NOT:
        v = 1 - bits[0]
    elif kind is GateKind.MAJ3:
        v = int(sum(bits) >= 2)
    elif kind in (GateKind.DFF, GateKind.BUF):
        v = bits[0]
    else:
        raise VerifyError(f"cannot fire {kind.value}")
    return [None] if v else []


# ---------------------------------------------------------------------------
# schedule validation

@dataclass(frozen=True)
class Violation:
    kind: str
    location: int
    details: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def to_json(self) -> str:
        return json.dumps([v.__dict__ for v in self.violations], sort_keys=True)


def validate_schedule(design: BalancedDesign, n: int | None = None) -> ValidationReport:
    """Check ordering, window, T1 spacing, release distinctness and
    stage/phase/epoch consistency of every clocked element."""
    n = design.n if n is None else n
    net = design.net
    stage = _stage_map(design)
    rep = ValidationReport()
    add = rep.violations.append
    for nid in net.topo_order():
        node = net.nodes[nid]
        if not node.kind.clocked:
            continue
        if nid not in design.sigma:
            add(Violation("ordering", nid, "clocked element without a stage"))
            continue
        sv = design.sigma[nid]
        ph, ep = design.phase.get(nid), design.epoch.get(nid)
        if ph is not None and ep is not None and (sv != n * ep + ph or not 0 <= ph < n):
            add(Violation("stage", nid, f"sigma {sv} != {n}*{ep}+{ph}"))
        releases = []
        for pin, s in enumerate(node.fanins):
            src = _effective(net, s).node
            if net.nodes[src].kind.clocked and src not in design.sigma:
                add(Violation("ordering", nid, f"fanin {src} has no stage"))
                releases.append(None)
                continue
            r = stage(src)
            releases.append(r)
            d = sv - r
            if d < 1:
                add(Violation("ordering", nid, f"pin {pin}: fanin {src} at {r}, node at {sv}"))
            elif d > n:
                add(Violation("gap", nid, f"pin {pin}: gap {d} exceeds {n} from {src}"))
        if node.kind is GateKind.T1 and None not in releases:
            if sv < t1_min_stage(releases):
                add(Violation("t1-separation", nid,
                              f"stage {sv} below spacing bound for inputs {sorted(releases)}"))
            if len(set(releases)) != 3:
                add(Violation("t1-separation", nid,
                              f"release stages {releases} not pairwise distinct"))
    return rep
