"""Clock-stage assignment for multiphase SFQ netlists.

Every clocked element ``g`` gets an integer stage ``sigma(g) = n*S(g) + phi(g)``
where ``n`` is the number of clock phases, ``phi`` the phase and ``S`` the
epoch.  The optimisation minimises an estimate of path-balancing DFFs:

* an edge spanning ``d`` stages needs ``(d - 1) // n`` DFFs, and
* a T1 cell pays one extra DFF for each pair of adjacent (sorted) inputs that
  would otherwise be released in the same stage.

The embedded solver is a depth-first branch and bound over the stages in
topological order.  The same model can be linearised and exported in CPLEX LP
format, or handed to HiGHS through :func:`scipy.optimize.milp`.
"""
from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

from .netlist import GateKind, Netlist, SOURCES, logic_depth

log = logging.getLogger(__name__)


class StagingError(Exception):
    pass


class OrderingError(StagingError, ValueError):
    pass


class InfeasibleError(StagingError):
    pass


class SolverTimeout(StagingError):
    pass


# ---------------------------------------------------------------------------
# stage arithmetic

def stage_of(n: int, epoch: int, phase: int) -> int:
    if n < 1:
        raise ValueError("phase count must be >= 1")
    if not 0 <= phase < n:
        raise ValueError(f"phase {phase} out of range for n={n}")
    return n * epoch + phase


def phase_of(sigma: int, n: int) -> int:
    return sigma % n


def epoch_of(sigma: int, n: int) -> int:
    return sigma // n


def edge_dff_bound(d: int, n: int) -> int:
    """Fewest DFFs splitting a ``d``-stage gap into hops of at most ``n``."""
    if d < 1:
        raise OrderingError(f"consumer must be at least one stage later (d={d})")
    return (d - 1) // n


def t1_min_stage(fanin_stages) -> int:
    """Earliest legal T1 stage given the stages of its three fanins."""
    s1, s2, s3 = sorted(fanin_stages)
    return max(s1 + 3, s2 + 2, s3 + 1)


def t1_separation_cost(sigmas, sigma_t1: int, n: int) -> int:
    """Extra DFFs a T1 needs so its inputs arrive in distinct stages.

    ``sigmas`` are the fanin stages in ascending order.
    """
    s1, s2, s3 = sigmas
    if not s1 <= s2 <= s3:
        raise ValueError("fanin stages must be sorted ascending")
    if sigma_t1 < t1_min_stage(sigmas):
        raise OrderingError(f"T1 stage {sigma_t1} violates the input spacing rule")
    cost = 0
    if s1 % n == s2 % n and sigma_t1 - s1 <= n:
        cost += 1
    if s2 % n == s3 % n and sigma_t1 - s2 <= n:
        cost += 1
    return cost


# ---------------------------------------------------------------------------
# model

@dataclass
class StageAssignment:
    n: int
    sigma: dict[int, int]
    objective: int | None = None
    optimal: bool = False
    explored: int = 0

    def stage(self, nid: int) -> int:
        return self.sigma.get(nid, 0)

    def phase(self, nid: int) -> int:
        return self.stage(nid) % self.n

    def epoch(self, nid: int) -> int:
        return self.stage(nid) // self.n


@dataclass
class IlpModel:
    """Structured stage-assignment model.

    ``edges`` lists (source, sink) node pairs, one per sink pin; a source in
    ``pinned`` has a fixed stage.  ``t1s`` maps each T1 node to its three
    fanin sources.  ``lower``/``upper`` are per-variable stage bounds.
    """

    n: int
    horizon: int
    variables: list[int]
    pinned: dict[int, int]
    edges: list[tuple[int, int]]
    t1s: dict[int, tuple[int, int, int]]
    lower: dict[int, int] = field(default_factory=dict)
    upper: dict[int, int] = field(default_factory=dict)

    def stage(self, sigma: dict[int, int], nid: int) -> int:
        return self.pinned[nid] if nid in self.pinned else sigma[nid]

    def violations(self, sigma: dict[int, int]) -> list[str]:
        out = []
        for v in self.variables:
            s = sigma[v]
            if not self.lower.get(v, 0) <= s <= self.upper.get(v, self.horizon):
                out.append(f"node {v}: stage {s} outside bounds")
        for u, v in self.edges:
            if self.stage(sigma, v) - self.stage(sigma, u) < 1:
                out.append(f"edge {u}->{v}: ordering")
        for t, fan in self.t1s.items():
            if sigma[t] < t1_min_stage([self.stage(sigma, u) for u in fan]):
                out.append(f"T1 {t}: input spacing")
        return out

    def objective(self, sigma: dict[int, int]) -> int:
        total = 0
        for u, v in self.edges:
            total += edge_dff_bound(self.stage(sigma, v) - self.stage(sigma, u), self.n)
        for t, fan in self.t1s.items():
            ins = sorted(self.stage(sigma, u) for u in fan)
            total += t1_separation_cost(ins, sigma[t], self.n)
        return total


def effective_source(net: Netlist, nid: int) -> int:
    """Skip passive splitters to the node that actually releases the pulse."""
    while net.nodes[nid].kind is GateKind.SPLITTER:
        nid = net.nodes[nid].fanins[0].node
    return nid


def build_ilp(net: Netlist, n: int, horizon: int | None = None) -> IlpModel:
    if n < 1:
        raise ValueError("phase count must be >= 1")
    order = net.topo_order()
    variables = [v for v in order if net.nodes[v].kind.clocked]
    t1_count = sum(1 for v in variables if net.nodes[v].kind is GateKind.T1)
    if t1_count and n < 3:
        raise ValueError("T1 cells need at least 3 clock phases")
    if horizon is None:
        horizon = n * (logic_depth(net) + 3 * t1_count + 1)
    pinned = {v: 0 for v in order if net.nodes[v].kind in SOURCES}
    edges = []
    t1s = {}
    for v in variables:
        node = net.nodes[v]
        srcs = [effective_source(net, s.node) for s in node.fanins]
        edges.extend((u, v) for u in srcs)
        if node.kind is GateKind.T1:
            t1s[v] = tuple(srcs)
    model = IlpModel(n, horizon, variables, pinned, edges, t1s)
    _compute_bounds(model)
    return model


def _compute_bounds(model: IlpModel) -> None:
    preds: dict[int, list[int]] = {v: [] for v in model.variables}
    succs: dict[int, list[int]] = {v: [] for v in model.variables}
    for u, v in model.edges:
        preds[v].append(u)
        if u in succs:
            succs[u].append(v)
    lo = {}
    for v in model.variables:
        st = [model.pinned[u] if u in model.pinned else lo[u] for u in preds[v]]
        if v in model.t1s:
            lo[v] = t1_min_stage(st)
        else:
            lo[v] = max(st, default=-1) + 1
    hi = {}
    for v in reversed(model.variables):
        hi[v] = min([model.horizon] + [hi[w] - 1 for w in succs[v]])
    for v in model.variables:
        if lo[v] > hi[v]:
            raise InfeasibleError(
                f"node {v} needs stage >= {lo[v]} but horizon allows {hi[v]}")
    model.lower = lo
    model.upper = hi


# ---------------------------------------------------------------------------
# branch and bound

class _Compiled:
    """Index-based view of an IlpModel for the search loops."""

    def __init__(self, model: IlpModel):
        self.model = model
        self.n = model.n
        self.vars = list(model.variables)
        idx = {v: i for i, v in enumerate(self.vars)}
        self.idx = idx
        m = len(self.vars)
        # in-edges: list of (is_var, ref) where ref is var index or constant stage
        self.ins: list[list[tuple[bool, int]]] = [[] for _ in range(m)]
        self.outs: list[list[int]] = [[] for _ in range(m)]
        for u, v in model.edges:
            j = idx[v]
            if u in model.pinned:
                self.ins[j].append((False, model.pinned[u]))
            else:
                self.ins[j].append((True, idx[u]))
                self.outs[idx[u]].append(j)
        self.is_t1 = [v in model.t1s for v in self.vars]
        self.t1_fan = [None] * m
        for t, fan in model.t1s.items():
            self.t1_fan[idx[t]] = [((False, model.pinned[u]) if u in model.pinned
                                    else (True, idx[u])) for u in fan]
        self.lo = [model.lower[v] for v in self.vars]
        self.hi = [model.upper[v] for v in self.vars]

    def val(self, ref, sig):
        return sig[ref[1]] if ref[0] else ref[1]

    def min_stage(self, j, sig) -> int:
        if self.is_t1[j]:
            return t1_min_stage([self.val(r, sig) for r in self.t1_fan[j]])
        return max((self.val(r, sig) for r in self.ins[j]), default=-1) + 1

    def in_cost(self, j, s, sig) -> int:
        n = self.n
        c = 0
        for r in self.ins[j]:
            c += (s - self.val(r, sig) - 1) // n
        if self.is_t1[j]:
            ins = sorted(self.val(r, sig) for r in self.t1_fan[j])
            c += t1_separation_cost(ins, s, n)
        return c

    def total(self, sig) -> int:
        return sum(self.in_cost(j, sig[j], sig) for j in range(len(sig)))


def _asap(cm: _Compiled) -> list[int]:
    sig = []
    for j in range(len(cm.vars)):
        sig.append(max(cm.lo[j], cm.min_stage(j, sig)))
    return sig


def _local_search(cm: _Compiled, sig: list[int], rounds: int = 20) -> list[int]:
    """Coordinate descent: move one stage at a time while the estimate drops."""
    n = cm.n
    sig = list(sig)
    m = len(sig)

    def local(j, s):
        old = sig[j]
        sig[j] = s
        try:
            c = cm.in_cost(j, s, sig)
            for w in set(cm.outs[j]):
                if sig[w] < cm.min_stage(w, sig):
                    return None
                c += cm.in_cost(w, sig[w], sig)
            return c
        except ValueError:
            return None
        finally:
            sig[j] = old

    for _ in range(rounds):
        improved = False
        for j in reversed(range(m)):
            lo = max(cm.lo[j], cm.min_stage(j, sig))
            hi = min([cm.hi[j]] + [sig[w] - 1 for w in cm.outs[j]])
            hi = min(hi, lo + 3 * n)
            cur = local(j, sig[j])
            best_s, best_c = sig[j], cur
            for s in range(lo, hi + 1):
                c = local(j, s)
                if c is not None and (best_c is None or c < best_c):
                    best_s, best_c = s, c
            if best_s != sig[j]:
                sig[j] = best_s
                improved = True
        if not improved:
            break
    return sig


def _solve_bnb(cm: _Compiled, max_nodes: int | None, time_limit: float | None
               ) -> tuple[list[int], int, bool, int]:
    m = len(cm.vars)
    n = cm.n
    deadline = None if time_limit is None else time.monotonic() + time_limit
    if m == 0:
        return [], 0, True, 0
    inc = _local_search(cm, _asap(cm))
    best = [cm.total(inc), inc]
    explored = 0
    complete = True

    def rest_bound(i, sig) -> int | None:
        # lower bound on in-edge cost of vars i.. given the assigned prefix
        lo = list(sig)
        lb = 0
        for j in range(i, m):
            s = max(cm.lo[j], cm.min_stage(j, lo))
            if s > cm.hi[j]:
                return None
            lo.append(s)
            for r in cm.ins[j]:
                if not r[0] or r[1] < i:
                    lb += (s - cm.val(r, lo) - 1) // n
                else:
                    lb += max(0, (s - cm.hi[r[1]] - 1) // n)
        return lb

    sig: list[int] = []
    costs: list[int] = [0]
    # stack entries: next candidate stage for depth len(sig)
    stack = [max(cm.lo[0], cm.min_stage(0, sig))]
    while stack:
        if max_nodes is not None and explored >= max_nodes:
            complete = False
            break
        if deadline is not None and explored % 256 == 0 and time.monotonic() > deadline:
            complete = False
            break
        i = len(sig)
        s = stack[-1]
        if s > cm.hi[i]:
            stack.pop()
            if sig:
                sig.pop()
                costs.pop()
            continue
        stack[-1] = s + 1
        explored += 1
        c = costs[-1] + cm.in_cost(i, s, sig)
        prefix = sig + [s]
        if c > best[0]:
            # in-edge costs only grow with s, but outgoing gaps shrink; no break
            continue
        lb = rest_bound(i + 1, prefix)
        if lb is None:
            continue
        bound = c + lb
        if bound > best[0] or (bound == best[0] and prefix > best[1][:i + 1]):
            continue
        if i + 1 == m:
            if c < best[0] or prefix < best[1]:
                best[0], best[1] = c, prefix
            continue
        sig.append(s)
        costs.append(c)
        stack.append(max(cm.lo[i + 1], cm.min_stage(i + 1, sig)))
    return best[1], best[0], complete, explored


def solve_stages(model: IlpModel, time_limit: float | None = None,
                 max_nodes: int | None = 50_000, backend: str = "bnb"
                 ) -> StageAssignment:
    """Solve the stage model.

    ``backend="bnb"`` runs the embedded branch and bound (deterministic for a
    fixed ``max_nodes``; ties broken towards the lexicographically smallest
    stage vector in topological order).  ``backend="highs"`` solves the
    linearised model with HiGHS.  The result is flagged ``optimal`` only when
    optimality was proven.
    """
    if backend == "highs":
        return solve_highs(model, time_limit)
    if backend != "bnb":
        raise ValueError(f"unknown backend {backend!r}")
    cm = _Compiled(model)
    sig, obj, complete, explored = _solve_bnb(cm, max_nodes, time_limit)
    sigma = {v: sig[i] for i, v in enumerate(cm.vars)}
    if model.violations(sigma):
        raise InfeasibleError("; ".join(model.violations(sigma)))
    log.info("stages: %d vars, objective %d (%s, %d nodes)", len(sigma), obj,
             "optimal" if complete else "incumbent", explored)
    return StageAssignment(model.n, sigma, obj, complete, explored)


# ---------------------------------------------------------------------------
# linearisation, LP export and the HiGHS route

@dataclass
class LinearProgram:
    names: list[str]
    lb: list[float]
    ub: list[float]
    integer: list[bool]
    binary: list[bool]
    objective: dict[int, float]
    rows: list[tuple[dict[int, float], float, float, str]]  # coefs, lo, hi, name

    def index(self, name: str) -> int:
        return self.names.index(name)


def linearize(model: IlpModel) -> LinearProgram:
    names: list[str] = []
    lb: list[float] = []
    ub: list[float] = []
    integer: list[bool] = []
    binary: list[bool] = []
    col: dict[str, int] = {}

    def add(name, lo, hi, is_bin=False):
        col[name] = len(names)
        names.append(name)
        lb.append(lo)
        ub.append(hi)
        integer.append(True)
        binary.append(is_bin)
        return col[name]

    n = model.n
    big = model.horizon + n + 4
    for v in model.variables:
        add(f"s_{v}", model.lower[v], model.upper[v])
    rows = []
    obj: dict[int, float] = {}

    def term(node):
        """(coefs, constant) for the stage of ``node``."""
        if node in model.pinned:
            return {}, model.pinned[node]
        return {col[f"s_{node}"]: 1.0}, 0

    def row(coefs: dict, lo, hi, name):
        rows.append((coefs, lo, hi, name))

    def combine(*parts):
        out: dict[int, float] = {}
        const = 0.0
        for sign, (coefs, c) in parts:
            for k, a in coefs.items():
                out[k] = out.get(k, 0.0) + sign * a
            const += sign * c
        return {k: a for k, a in out.items() if a}, const

    inf = float("inf")
    for e, (u, v) in enumerate(model.edges):
        k = add(f"k_{e}", 0, model.horizon)
        obj[k] = 1.0
        dv, du = term(v), term(u)
        diff, const = combine((1, dv), (-1, du))        # s_v - s_u = diff + const
        if v not in model.t1s:
            row(dict(diff), 1 - const, inf, f"ord_{e}")
        # n*k_e - (s_v - s_u) >= -n
        coefs = {kk: -a for kk, a in diff.items()}
        coefs[k] = coefs.get(k, 0.0) + n
        row(coefs, -n + const, inf, f"dff_{e}")
    for j, (t, fan) in enumerate(sorted(model.t1s.items())):
        st = col[f"s_{t}"]
        perms = list(itertools.permutations(range(3)))
        p = [add(f"p_{j}_{q}", 0, 1, True) for q in range(len(perms))]
        y = [add(f"y_{j}_{q}", 0, model.horizon) for q in range(3)]
        row({pq: 1.0 for pq in p}, 1, 1, f"perm_{j}")
        for q, perm in enumerate(perms):
            for pos in range(3):
                x, xc = term(fan[perm[pos]])
                # y - x <= M(1-p)  and  x - y <= M(1-p)
                c1 = {y[pos]: 1.0, p[q]: float(big)}
                for kk, a in x.items():
                    c1[kk] = c1.get(kk, 0.0) - a
                row(c1, -inf, big + xc, f"ysel_{j}_{q}_{pos}a")
                c2 = {y[pos]: -1.0, p[q]: float(big)}
                for kk, a in x.items():
                    c2[kk] = c2.get(kk, 0.0) + a
                row(c2, -inf, big - xc, f"ysel_{j}_{q}_{pos}b")
        row({y[1]: 1.0, y[0]: -1.0}, 0, inf, f"sort_{j}_a")
        row({y[2]: 1.0, y[1]: -1.0}, 0, inf, f"sort_{j}_b")
        for pos, gap in enumerate((3, 2, 1)):
            row({st: 1.0, y[pos]: -1.0}, gap, inf, f"space_{j}_{pos}")
        for pair in (0, 1):
            w = add(f"w_{j}_{pair}", 0, 1, True)
            z = add(f"z_{j}_{pair}", 0, 1, True)
            obj[z] = 1.0
            # w = 1 only if the earlier input is outside the window
            row({st: -1.0, y[pair]: 1.0, w: float(big)}, -inf, big - n - 1,
                f"win_{j}_{pair}")
            # z >= 1 - (y_next - y) - w
            row({z: 1.0, y[pair + 1]: 1.0, y[pair]: -1.0, w: 1.0}, 1, inf,
                f"sep_{j}_{pair}")
    return LinearProgram(names, lb, ub, integer, binary, obj, rows)


def _fmt_terms(coefs: dict[int, float], names: list[str]) -> str:
    parts = []
    for k in sorted(coefs):
        a = coefs[k]
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        coef = "" if mag == 1 else f"{mag:g} "
        parts.append(f"{sign} {coef}{names[k]}")
    text = " ".join(parts) if parts else "0 " + names[0]
    return text[2:] if text.startswith("+ ") else text


def export_lp(model: IlpModel) -> str:
    """CPLEX LP text of the linearised model."""
    lp = linearize(model)
    out = [f"\\ sfqmap stage assignment, n={model.n}, horizon={model.horizon}",
           "Minimize", " obj: " + _fmt_terms(lp.objective, lp.names),
           "Subject To"]
    for coefs, lo, hi, name in lp.rows:
        body = _fmt_terms(coefs, lp.names)
        if lo == hi:
            out.append(f" {name}: {body} = {lo:g}")
        else:
            if lo != float("-inf"):
                out.append(f" {name}: {body} >= {lo:g}")
            if hi != float("inf"):
                suffix = "_u" if lo != float("-inf") else ""
                out.append(f" {name}{suffix}: {body} <= {hi:g}")
    out.append("Bounds")
    for k, name in enumerate(lp.names):
        if not lp.binary[k]:
            out.append(f" {lp.lb[k]:g} <= {name} <= {lp.ub[k]:g}")
    gens = [nm for k, nm in enumerate(lp.names) if not lp.binary[k]]
    bins = [nm for k, nm in enumerate(lp.names) if lp.binary[k]]
    if gens:
        out.append("Generals")
        out.extend(" " + " ".join(gens[i:i + 8]) for i in range(0, len(gens), 8))
    if bins:
        out.append("Binaries")
        out.extend(" " + " ".join(bins[i:i + 8]) for i in range(0, len(bins), 8))
    out.append("End")
    return "\n".join(out) + "\n"


def import_solution(model: IlpModel, text: str) -> StageAssignment:
    """Read ``name value`` lines from an external solver's solution file."""
    sigma = {}
    wanted = {f"s_{v}": v for v in model.variables}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0] in wanted:
            try:
                sigma[wanted[parts[0]]] = int(round(float(parts[1])))
            except ValueError:
                continue
    missing = [v for v in model.variables if v not in sigma]
    if missing:
        raise StagingError(f"solution lacks stages for nodes {missing[:5]}")
    bad = model.violations(sigma)
    if bad:
        raise InfeasibleError("; ".join(bad[:5]))
    return StageAssignment(model.n, sigma, model.objective(sigma), False, 0)


def solve_highs(model: IlpModel, time_limit: float | None = None
                ) -> StageAssignment:
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    lp = linearize(model)
    if not model.variables:
        return StageAssignment(model.n, {}, 0, True, 0)
    nv = len(lp.names)
    c = np.zeros(nv)
    for k, a in lp.objective.items():
        c[k] = a
    A = lil_matrix((len(lp.rows), nv))
    lo = np.empty(len(lp.rows))
    hi = np.empty(len(lp.rows))
    for r, (coefs, rl, rh, _) in enumerate(lp.rows):
        for k, a in coefs.items():
            A[r, k] = a
        lo[r], hi[r] = rl, rh
    options = {"disp": False}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo, hi),
               integrality=np.ones(nv), bounds=Bounds(lp.lb, lp.ub),
               options=options)
    if res.x is None:
        if res.status == 1:
            raise SolverTimeout(res.message)
        raise InfeasibleError(res.message)
    sigma = {v: int(round(res.x[lp.index(f"s_{v}")])) for v in model.variables}
    obj = model.objective(sigma)
    return StageAssignment(model.n, sigma, obj, res.status == 0, 0)
