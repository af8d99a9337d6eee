"""Readers and writers: AIGER, BLIF subset, design JSON, stats CSV, manifests."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

from .balancing import BalancedDesign
from .netlist import (CostTable, GateKind, Netlist, NetlistError, Node, Signal,
                      T1Role, t1_eval)
from .t1map import POLARITIES

FORMAT_VERSION = 1
STATS_COLUMNS = ("benchmark", "t1_found", "t1_used", "dff_count", "jj_area",
                 "depth_cycles", "phases", "runtime_ms")
FORMATS = {"aag": "aiger-ascii", "aiger-ascii": "aiger-ascii",
           "aig": "aiger-binary", "aiger-binary": "aiger-binary",
           "blif": "blif"}


class ParseError(NetlistError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class UnsupportedConstruct(ParseError):
    pass


def guess_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lstrip(".").lower()
    if ext not in FORMATS:
        raise ValueError(f"cannot infer format from {path!r}")
    return FORMATS[ext]


def parse_netlist(data: bytes | str, fmt: str) -> Netlist:
    """Parse a combinational netlist; ``fmt`` is aag, aig or blif."""
    try:
        kind = FORMATS[fmt.lower()]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None
    if isinstance(data, str):
        data = data.encode()
    if kind == "aiger-ascii":
        return _parse_aiger(data, binary=False)
    if kind == "aiger-binary":
        return _parse_aiger(data, binary=True)
    return _parse_blif(data.decode("utf-8", errors="replace"))


# ---------------------------------------------------------------------------
# AIGER

def _parse_aiger(data: bytes, binary: bool) -> Netlist:
    pos = 0
    lineno = 0

    def next_line() -> str:
        nonlocal pos, lineno
        end = data.find(b"\n", pos)
        if end < 0:
            if pos >= len(data):
                raise ParseError("unexpected end of file", lineno + 1)
            end = len(data)
        line = data[pos:end].decode("ascii", errors="replace").strip()
        pos = end + 1
        lineno += 1
        return line

    def ints(line: str, count: int | None = None) -> list[int]:
        try:
            vals = [int(t) for t in line.split()]
        except ValueError:
            raise ParseError(f"expected integers, got {line!r}", lineno) from None
        if count is not None and len(vals) != count:
            raise ParseError(f"expected {count} fields, got {len(vals)}", lineno)
        if any(v < 0 for v in vals):
            raise ParseError("negative literal", lineno)
        return vals

    header = next_line().split()
    magic = "aig" if binary else "aag"
    if not header or header[0] != magic:
        raise ParseError(f"expected '{magic}' header", 1)
    nums = ints(" ".join(header[1:]))
    if len(nums) < 5:
        raise ParseError("header needs M I L O A", 1)
    m, ni, nl, no, na = nums[:5]
    if nl:
        raise UnsupportedConstruct("latches are not supported", 1)
    if any(nums[5:]):
        raise UnsupportedConstruct("bad-state, constraint, justice or fairness "
                                   "sections are not supported", 1)
    if m < ni + na:
        raise ParseError("M smaller than I + A", 1)

    inputs = []
    if binary:
        inputs = [2 * (i + 1) for i in range(ni)]
    else:
        for _ in range(ni):
            (lit,) = ints(next_line(), 1)
            if lit & 1 or lit < 2:
                raise ParseError(f"bad input literal {lit}", lineno)
            inputs.append(lit)
    outputs = []
    out_lines = []
    for _ in range(no):
        (lit,) = ints(next_line(), 1)
        outputs.append(lit)
        out_lines.append(lineno)
    ands: dict[int, tuple[int, int, int]] = {}
    if binary:
        for i in range(na):
            lhs = 2 * (ni + i + 1)
            d0, pos = _read_varint(data, pos)
            d1, pos = _read_varint(data, pos)
            r0 = lhs - d0
            r1 = r0 - d1
            if r0 < 0 or r1 < 0:
                raise ParseError(f"bad delta encoding in AND {i}", lineno + 1)
            ands[lhs >> 1] = (r0, r1, lineno + 1)
    else:
        for _ in range(na):
            lhs, r0, r1 = ints(next_line(), 3)
            if lhs & 1 or lhs < 2:
                raise ParseError(f"bad AND literal {lhs}", lineno)
            if lhs >> 1 in ands:
                raise ParseError(f"AND {lhs} defined twice", lineno)
            ands[lhs >> 1] = (r0, r1, lineno)

    names_in: dict[int, str] = {}
    names_out: dict[int, str] = {}
    while pos < len(data):
        line = next_line()
        if not line:
            continue
        if line == "c":
            break
        tag, _, name = line.partition(" ")
        kind, idx = tag[:1], tag[1:]
        if kind in "il" and idx.isdigit() and name:
            if kind == "l":
                raise UnsupportedConstruct("latch symbol", lineno)
            names_in[int(idx)] = name
        elif kind == "o" and idx.isdigit() and name:
            names_out[int(idx)] = name
        elif kind in "bcjf":
            raise UnsupportedConstruct(f"unsupported symbol '{tag}'", lineno)
        else:
            raise ParseError(f"bad symbol line {line!r}", lineno)

    net = Netlist()
    var_sig: dict[int, Signal] = {}
    for k, lit in enumerate(inputs):
        if lit >> 1 in var_sig:
            raise ParseError(f"input {lit} declared twice")
        var_sig[lit >> 1] = net.add_pi(names_in.get(k, f"i{k}"))

    def lit_sig(lit: int) -> Signal:
        var = lit >> 1
        if var == 0:
            s = net.const0()
        else:
            if var not in var_sig:
                _build(var)
            s = var_sig[var]
        return s ^ bool(lit & 1)

    def _build(root: int) -> None:
        stack = [root]
        onpath = set()
        while stack:
            var = stack[-1]
            if var in var_sig:
                stack.pop()
                continue
            if var not in ands:
                raise ParseError(f"literal {2 * var} is undefined")
            r0, r1, ln = ands[var]
            todo = [r >> 1 for r in (r0, r1) if r >> 1 and r >> 1 not in var_sig]
            if todo:
                if var in onpath:
                    raise ParseError(f"combinational cycle through {2 * var}", ln)
                onpath.add(var)
                stack.extend(todo)
                continue
            onpath.discard(var)
            stack.pop()
            var_sig[var] = net.AND(lit_sig(r0), lit_sig(r1))

    for var in sorted(ands):
        if var not in var_sig:
            _build(var)
    for k, lit in enumerate(outputs):
        if lit >> 1 > m:
            raise ParseError(f"output literal {lit} exceeds M", out_lines[k])
        net.add_po(lit_sig(lit), names_out.get(k, f"o{k}"))
    return net


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    val = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise ParseError("truncated binary AND section")
        b = data[pos]
        pos += 1
        val |= (b & 0x7F) << shift
        if not b & 0x80:
            return val, pos
        shift += 7


def _write_varint(x: int) -> bytes:
    out = bytearray()
    while x >= 0x80:
        out.append((x & 0x7F) | 0x80)
        x >>= 7
    out.append(x)
    return bytes(out)


class _AigBuilder:
    def __init__(self, first_var: int):
        self.next_var = first_var
        self.ands: list[tuple[int, int, int]] = []
        self.cache: dict[tuple[int, int], int] = {}

    def AND(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a
        if a == 0:
            return 0
        if a == 1:
            return b
        if a == b:
            return a
        if a ^ 1 == b:
            return 0
        key = (a, b)
        if key not in self.cache:
            lhs = 2 * self.next_var
            self.next_var += 1
            self.ands.append((lhs, b, a))
            self.cache[key] = lhs
        return self.cache[key]

    def OR(self, a, b):
        return self.AND(a ^ 1, b ^ 1) ^ 1

    def XOR(self, a, b):
        return self.OR(self.AND(a, b ^ 1), self.AND(a ^ 1, b))

    def MAJ(self, a, b, c):
        return self.OR(self.AND(a, b), self.AND(c, self.OR(a, b)))


def _to_aig(net: Netlist):
    lits: dict[tuple[int, T1Role | None], int] = {}
    for k, pi in enumerate(net.pis):
        lits[(pi, None)] = 2 * (k + 1)
    aig = _AigBuilder(len(net.pis) + 1)

    def rd(s: Signal) -> int:
        return lits[s.source] ^ int(s.complemented)

    for nid in net.topo_order():
        node = net.nodes[nid]
        k = node.kind
        if k is GateKind.PI:
            continue
        ins = [rd(s) for s in node.fanins]
        if k is GateKind.CONST0:
            v = 0
        elif k is GateKind.AND2:
            v = aig.AND(*ins)
        elif k is GateKind.OR2:
            v = aig.OR(*ins)
        elif k is GateKind.XOR2:
            v = aig.XOR(*ins)
        elif k is GateKind.NOT:
            v = ins[0] ^ 1
        elif k is GateKind.MAJ3:
            v = aig.MAJ(*ins)
        elif k is GateKind.T1:
            a, b, c = ins
            maj = aig.MAJ(a, b, c)
            orq = aig.OR(aig.OR(a, b), c)
            ports = {T1Role.SUM: aig.XOR(aig.XOR(a, b), c), T1Role.CARRY: maj,
                     T1Role.ORQ: orq, T1Role.NCARRY: maj ^ 1, T1Role.NORQ: orq ^ 1}
            for role in node.t1_outputs or ():
                lits[(nid, role)] = ports[role]
            continue
        else:
            v = ins[0]
        lits[(nid, None)] = v
    outs = [lits[(po, None)] for po in net.pos]
    return aig, outs


def _aiger_symbols(net: Netlist) -> str:
    lines = [f"i{k} {name}" for k, name in enumerate(net.pi_names())]
    lines += [f"o{k} {name}" for k, name in enumerate(net.po_names())]
    return "".join(line + "\n" for line in lines)


def write_aiger(net: Netlist, binary: bool = False) -> bytes:
    """Emit the netlist as an AND-inverter graph (ASCII or binary AIGER)."""
    aig, outs = _to_aig(net)
    ni, na = len(net.pis), len(aig.ands)
    m = ni + na
    if binary:
        buf = bytearray(f"aig {m} {ni} 0 {len(outs)} {na}\n".encode())
        for o in outs:
            buf += f"{o}\n".encode()
        for lhs, r0, r1 in aig.ands:
            buf += _write_varint(lhs - r0) + _write_varint(r0 - r1)
        buf += _aiger_symbols(net).encode()
        return bytes(buf)
    lines = [f"aag {m} {ni} 0 {len(outs)} {na}"]
    lines += [str(2 * (k + 1)) for k in range(ni)]
    lines += [str(o) for o in outs]
    lines += [f"{lhs} {r0} {r1}" for lhs, r0, r1 in aig.ands]
    return ("\n".join(lines) + "\n" + _aiger_symbols(net)).encode()


# ---------------------------------------------------------------------------
# BLIF subset

def _blif_lines(text: str):
    """Logical lines with continuation joined, comments removed."""
    buf, start = "", None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if start is None:
            start = no
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        if buf.strip():
            yield start, buf.strip()
        buf, start = "", None
    if buf.strip():
        yield start, buf.strip()


@dataclass
class _Names:
    inputs: list[str]
    output: str
    line: int
    cubes: list[tuple[str, str, int]] = field(default_factory=list)


def _cover_tt(node: _Names) -> int:
    k = len(node.inputs)
    on, off = 0, 0
    values = set()
    for pattern, val, ln in node.cubes:
        if len(pattern) != k:
            raise ParseError(f"cube width {len(pattern)} != {k} inputs", ln)
        if any(ch not in "01-" for ch in pattern) or val not in ("0", "1"):
            raise ParseError(f"bad cube {pattern!r} {val!r}", ln)
        values.add(val)
        for m in range(1 << k):
            if all(ch == "-" or int(ch) == (m >> i & 1) for i, ch in enumerate(pattern)):
                if val == "1":
                    on |= 1 << m
                else:
                    off |= 1 << m
    if len(values) > 1:
        raise UnsupportedConstruct("cover mixes on-set and off-set cubes",
                                   node.cubes[0][2])
    full = (1 << (1 << k)) - 1
    if values == {"0"}:
        return full & ~off
    return on


def _parse_blif(text: str) -> Netlist:
    model = None
    inputs: list[str] = []
    outputs: list[str] = []
    names: dict[str, _Names] = {}
    current: _Names | None = None
    ended = False
    for ln, line in _blif_lines(text):
        tok = line.split()
        head = tok[0]
        if ended:
            if head == ".model":
                raise UnsupportedConstruct("multiple models", ln)
            continue
        if head.startswith("."):
            current = None
            if head == ".model":
                model = tok[1] if len(tok) > 1 else "top"
            elif head == ".inputs":
                inputs += tok[1:]
            elif head == ".outputs":
                outputs += tok[1:]
            elif head == ".names":
                if len(tok) < 2:
                    raise ParseError(".names without an output", ln)
                if len(tok) - 2 > 3:
                    raise UnsupportedConstruct(
                        f".names with {len(tok) - 2} inputs (at most 3)", ln)
                out = tok[-1]
                if out in names or out in inputs:
                    raise ParseError(f"signal {out!r} defined twice", ln)
                current = _Names(tok[1:-1], out, ln)
                names[out] = current
            elif head == ".end":
                ended = True
            elif head in (".latch", ".subckt", ".gate", ".mlatch", ".clock",
                          ".exdc", ".search", ".default_input_arrival"):
                raise UnsupportedConstruct(f"unsupported construct {head}", ln)
            else:
                raise ParseError(f"unknown directive {head}", ln)
        else:
            if current is None:
                raise ParseError(f"cube outside .names: {line!r}", ln)
            if not current.inputs:
                if len(tok) != 1:
                    raise ParseError("constant cover takes one value", ln)
                current.cubes.append(("", tok[0], ln))
            else:
                if len(tok) != 2:
                    raise ParseError(f"bad cube line {line!r}", ln)
                current.cubes.append((tok[0], tok[1], ln))
    if model is None:
        raise ParseError("missing .model", 1)
    if len(set(inputs)) != len(inputs):
        raise ParseError("duplicate input name")

    net = Netlist(model)
    sig: dict[str, Signal] = {name: net.add_pi(name) for name in inputs}

    def build(root: str) -> None:
        stack = [root]
        onpath: set[str] = set()
        while stack:
            name = stack[-1]
            if name in sig:
                stack.pop()
                continue
            if name not in names:
                raise ParseError(f"signal {name!r} is never defined")
            node = names[name]
            todo = [i for i in node.inputs if i not in sig]
            if todo:
                if name in onpath:
                    raise ParseError(f"combinational cycle through {name!r}", node.line)
                onpath.add(name)
                stack.extend(todo)
                continue
            onpath.discard(name)
            stack.pop()
            sig[name] = synthesize(net, _cover_tt(node), [sig[i] for i in node.inputs])

    for name in sorted(names, key=lambda x: names[x].line):
        build(name)
    for name in outputs:
        if name not in sig:
            build(name)
        net.add_po(sig[name], name)
    return net


# ---------------------------------------------------------------------------
# small-function synthesis

def _restrict(tt: int, k: int, keep: list[int]) -> int:
    """Truth table over the variables in ``keep`` (others fixed to 0)."""
    out = 0
    for m in range(1 << len(keep)):
        full = 0
        for j, v in enumerate(keep):
            full |= (m >> j & 1) << v
        out |= (tt >> full & 1) << m
    return out


def _cofactors(tt: int, k: int, var: int) -> tuple[int, int]:
    f0 = f1 = 0
    j = 0
    for m in range(1 << k):
        if m >> var & 1:
            continue
        f0 |= (tt >> m & 1) << j
        f1 |= (tt >> (m | 1 << var) & 1) << j
        j += 1
    return f0, f1


def synthesize(net: Netlist, tt: int, ins: list[Signal]) -> Signal:
    """Build gates for a function of at most three inputs."""
    k = len(ins)
    full = (1 << (1 << k)) - 1
    tt &= full
    if k == 0 or tt in (0, full):
        return net.const0() ^ (tt != 0 and tt == full)
    # support over the first k inputs
    sup = [v for v in range(k) if _cofactors(tt, k, v)[0] != _cofactors(tt, k, v)[1]]
    if len(sup) < k:
        return synthesize(net, _restrict(tt, k, sup), [ins[v] for v in sup])
    if k == 1:
        return ins[0] ^ (tt == 0b01)
    if k == 2:
        if tt in (0x6, 0x9):
            return net.XOR(ins[0], ins[1]) ^ (tt == 0x9)
        ones = [m for m in range(4) if tt >> m & 1]
        if len(ones) == 1:
            m = ones[0]
            return net.AND(ins[0] ^ (not m & 1), ins[1] ^ (not m >> 1 & 1))
        zeros = [m for m in range(4) if not tt >> m & 1]
        m = zeros[0]
        return net.OR(ins[0] ^ bool(m & 1), ins[1] ^ bool(m >> 1 & 1))
    if tt in (0x96, 0x69):
        return net.XOR(net.XOR(ins[0], ins[1]), ins[2]) ^ (tt == 0x69)
    for pol in POLARITIES:
        a, b, c = (s ^ p for s, p in zip(ins, pol))
        lits = [(~x & 0xFF) if p else x for x, p in zip((0xAA, 0xCC, 0xF0), pol)]
        maj = (lits[0] & lits[1]) | (lits[0] & lits[2]) | (lits[1] & lits[2])
        if tt == maj:
            return net.MAJ(a, b, c)
        if tt == ~maj & 0xFF:
            return ~net.MAJ(a, b, c)
    # Shannon expansion on the last input
    f0, f1 = _cofactors(tt, 3, 2)
    x = ins[2]
    if f1 == 0:
        return net.AND(~x, synthesize(net, f0, ins[:2]))
    if f0 == 0:
        return net.AND(x, synthesize(net, f1, ins[:2]))
    if f1 == 0xF:
        return net.OR(x, synthesize(net, f0, ins[:2]))
    if f0 == 0xF:
        return net.OR(~x, synthesize(net, f1, ins[:2]))
    if f1 == f0 ^ 0xF:
        return net.XOR(x, synthesize(net, f0, ins[:2]))
    return net.OR(net.AND(x, synthesize(net, f1, ins[:2])),
                  net.AND(~x, synthesize(net, f0, ins[:2])))


# ---------------------------------------------------------------------------
# BLIF writer

def _gate_cover(kind: GateKind, comp: list[bool]) -> list[str]:
    k = len(comp)
    rows = []
    for m in range(1 << k):
        bits = [(m >> i & 1) ^ int(c) for i, c in enumerate(comp)]
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
        else:
            v = bits[0]
        if v:
            rows.append("".join(str(m >> i & 1) for i in range(k)) + " 1")
    return rows


def write_blif(net: Netlist) -> bytes:
    """Emit the netlist as BLIF with one ``.names`` per gate or T1 port."""
    def nm(s: Signal) -> str:
        node = net.nodes[s.node]
        if node.kind is GateKind.PI:
            return node.name or f"pi{net.pis.index(s.node)}"
        return f"$n{s.node}" + (f"_{s.port.value}" if s.port else "")

    out = [f".model {net.name}", ".inputs " + " ".join(net.pi_names()),
           ".outputs " + " ".join(net.po_names())]
    for nid in net.topo_order():
        node = net.nodes[nid]
        k = node.kind
        if k in (GateKind.PI, GateKind.PO):
            continue
        if k is GateKind.CONST0:
            out.append(f".names $n{nid}")
            continue
        ins = [nm(s) for s in node.fanins]
        comp = [s.complemented for s in node.fanins]
        if k is GateKind.T1:
            for role in sorted(node.t1_outputs or (), key=lambda r: r.value):
                out.append(".names " + " ".join(ins) + f" $n{nid}_{role.value}")
                for m in range(8):
                    bits = [(m >> i & 1) ^ int(c) for i, c in enumerate(comp)]
                    if t1_eval(*bits, 1)[role]:
                        out.append("".join(str(m >> i & 1) for i in range(3)) + " 1")
            continue
        out.append(".names " + " ".join(ins) + f" $n{nid}")
        out += _gate_cover(k, comp)
    for po, name in zip(net.pos, net.po_names()):
        s = net.nodes[po].fanins[0]
        if nm(s) == name and not s.complemented:
            continue
        out.append(f".names {nm(s)} {name}")
        out.append(("0" if s.complemented else "1") + " 1")
    out.append(".end")
    return ("\n".join(out) + "\n").encode()


# ---------------------------------------------------------------------------
# design JSON

def _sig_json(s: Signal) -> dict:
    d = {"node": s.node}
    if s.complemented:
        d["complemented"] = True
    if s.port is not None:
        d["port"] = s.port.value
    return d


def _dff_chains(net: Netlist) -> list[list[int]]:
    fo = net.fanouts()
    chains = []
    for nid in sorted(net.nodes):
        node = net.nodes[nid]
        if node.kind is not GateKind.DFF:
            continue
        if net.nodes[node.fanins[0].node].kind is GateKind.DFF:
            continue
        chain = [nid]
        while True:
            nxt = [c for c, _ in fo.get(chain[-1], ())
                   if net.nodes[c].kind is GateKind.DFF]
            if len(nxt) != 1:
                break
            chain.append(nxt[0])
        chains.append(chain)
    return chains


def write_design(design: BalancedDesign) -> bytes:
    """Serialise a balanced design as versioned JSON (deterministic bytes)."""
    net = design.net
    nodes = []
    for nid in sorted(net.nodes):
        node = net.nodes[nid]
        d = {"id": nid, "kind": node.kind.value,
             "fanins": [_sig_json(s) for s in node.fanins]}
        if node.name is not None:
            d["name"] = node.name
        if nid in design.sigma:
            d["stage"] = design.sigma[nid]
            d["phase"] = design.phase[nid]
            d["epoch"] = design.epoch[nid]
        if node.kind is GateKind.T1:
            d["t1_outputs"] = sorted(r.value for r in node.t1_outputs or ())
            d["input_stages"] = [design.stage(s.node) for s in node.fanins]
        nodes.append(d)
    doc = {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "phases": design.n,
        "pis": list(net.pis),
        "pos": list(net.pos),
        "nodes": nodes,
        "dff_chains": _dff_chains(net),
        "optimal": design.optimal,
        "t1_found": design.t1_found,
        "t1_used": design.t1_used,
        "costs": design.costs.to_text(),
        "metrics": design.metrics(),
    }
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()


def read_design(data: bytes | str) -> BalancedDesign:
    """Inverse of :func:`write_design`."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {doc.get('format_version')!r}")
    net = Netlist(doc.get("name", "top"))
    sigma: dict[int, int] = {}
    phase: dict[int, int] = {}
    epoch: dict[int, int] = {}
    for d in doc["nodes"]:
        kind = GateKind(d["kind"])
        fanins = [Signal(f["node"], f.get("complemented", False),
                         T1Role(f["port"]) if "port" in f else None)
                  for f in d["fanins"]]
        outs = frozenset(T1Role(r) for r in d["t1_outputs"]) if "t1_outputs" in d else None
        net.nodes[d["id"]] = Node(d["id"], kind, fanins, outs, d.get("name"))
        if kind is GateKind.CONST0:
            net._const0 = d["id"]
        if "stage" in d:
            sigma[d["id"]] = d["stage"]
            phase[d["id"]] = d["phase"]
            epoch[d["id"]] = d["epoch"]
    net.pis = list(doc["pis"])
    net.pos = list(doc["pos"])
    net._next_id = max(net.nodes, default=-1) + 1
    net._touch()
    net.check()
    return BalancedDesign(net, doc["phases"], sigma, phase, epoch,
                          optimal=doc.get("optimal", True),
                          costs=CostTable.from_text(doc.get("costs", "")),
                          t1_found=doc.get("t1_found", 0),
                          t1_used=doc.get("t1_used", 0))


# ---------------------------------------------------------------------------
# stats CSV and manifests

def write_stats(rows) -> bytes:
    """CSV with the fixed leading columns, then any extra keys in first-seen order."""
    rows = [dict(r) for r in rows]
    cols = list(STATS_COLUMNS)
    for r in rows:
        for key in r:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue().encode()


def read_stats(data: bytes | str) -> list[dict]:
    if isinstance(data, bytes):
        data = data.decode()
    return list(csv.DictReader(io.StringIO(data)))


@dataclass
class BenchmarkCase:
    name: str
    path: str | None = None
    format: str | None = None
    generator: str | None = None
    expected: dict | None = None


def read_manifest(data: bytes | str, base_dir: str = ".") -> list[BenchmarkCase]:
    """JSON manifest: ``{"cases": [{"name", "path" | "generator", ...}]}``.

    Relative paths resolve against ``base_dir``; generators are
    ``adder:<bits>`` or ``multiplier:<bits>``.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid manifest JSON: {exc.msg}", exc.lineno) from None
    cases = []
    seen = set()
    for entry in doc.get("cases", []):
        name = entry.get("name")
        if not name:
            raise ParseError("manifest case without a name")
        if name in seen:
            raise ParseError(f"duplicate case name {name!r}")
        seen.add(name)
        path = entry.get("path")
        if path is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if (path is None) == (entry.get("generator") is None):
            raise ParseError(f"case {name!r} needs exactly one of path/generator")
        fmt = entry.get("format")
        if path is not None and fmt is None:
            fmt = guess_format(path)
        cases.append(BenchmarkCase(name, path, fmt, entry.get("generator"),
                                   entry.get("expected")))
    return cases
