"""Boolean matching against the T1 output family and greedy cone rewriting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .cuts import CutSet, MASK8, PROJ, enumerate_cuts
from .netlist import (CostTable, GateKind, Netlist, StaleCandidateError,
                      T1Role, apply_replacement, plan_replacement)

log = logging.getLogger(__name__)

ROLE_ORDER = (T1Role.SUM, T1Role.CARRY, T1Role.ORQ, T1Role.NCARRY, T1Role.NORQ)
POLARITIES = tuple(tuple(bool(p >> i & 1) for i in range(3)) for p in range(8))


class DegenerateSupportError(ValueError):
    pass


def _family_tt(role: T1Role, pol: tuple[bool, bool, bool]) -> int:
    a, b, c = ((~PROJ[i] & MASK8) if pol[i] else PROJ[i] for i in range(3))
    maj = (a & b) | (a & c) | (b & c)
    orq = a | b | c
    return {
        T1Role.SUM: a ^ b ^ c,
        T1Role.CARRY: maj,
        T1Role.ORQ: orq,
        T1Role.NCARRY: ~maj & MASK8,
        T1Role.NORQ: ~orq & MASK8,
    }[role]


def _build_match_table() -> dict[int, list[tuple[T1Role, tuple, bool]]]:
    table: dict[int, list] = {}
    for pol in POLARITIES:
        for role in ROLE_ORDER:
            f = _family_tt(role, pol)
            table.setdefault(f, []).append((role, pol, False))
            if role is T1Role.SUM:
                table.setdefault(~f & MASK8, []).append((role, pol, True))
    return table


_MATCHES = _build_match_table()

FAMILY_TT = {r: _family_tt(r, (False, False, False)) for r in ROLE_ORDER}


def support(tt: int) -> tuple[int, ...]:
    tt &= MASK8
    out = []
    for i in range(3):
        shift = 1 << i
        lo = tt & (~PROJ[i] & MASK8)
        hi = (tt & PROJ[i]) >> shift
        if lo != hi:
            out.append(i)
    return tuple(out)


@dataclass(frozen=True)
class T1Match:
    role: T1Role
    polarity: tuple[bool, bool, bool]
    out_complement: bool


def match_t1_family(tt: int) -> list[T1Match]:
    """All (role, leaf polarity, output complement) realising ``tt``.

    Only the SUM role may carry an output complement (XOR absorbs negation
    parity).  Constant or degenerate-support functions raise.
    """
    if len(support(tt)) != 3:
        raise DegenerateSupportError(f"tt 0x{tt & MASK8:02X} does not depend on 3 inputs")
    return [T1Match(r, p, oc) for r, p, oc in _MATCHES.get(tt & MASK8, ())]


@dataclass
class AreaGain:
    mffc_areas: dict[T1Role, int]
    shared_area: int
    splitter_delta: int
    t1_cost: int
    delta_area: int


@dataclass
class T1Candidate:
    leaves: tuple[int, int, int]
    polarity: tuple[bool, bool, bool]
    matches: dict[T1Role, int]
    out_complement: dict[T1Role, bool] = field(default_factory=dict)
    delta_area: int = 0
    gain: AreaGain | None = field(default=None, repr=False, compare=False)

    def roots(self) -> set[int]:
        return set(self.matches.values())

    def sort_key(self):
        return (-self.delta_area, self.leaves, self.polarity,
                tuple(sorted((r.value, v) for r, v in self.matches.items())))


def area_gain(net: Netlist, cand: T1Candidate, costs: CostTable | None = None
              ) -> int:
    """Area reclaimed by the root cones minus the configured T1 cost.

    The returned value equals ``area(net) - area(net after replace_cone)``;
    splitters released or added at the leaves and root outputs are included.
    Raises :class:`StaleCandidateError` if the candidate no longer applies.
    """
    costs = costs or CostTable()
    plan = plan_replacement(net, cand.leaves, cand.polarity, cand.matches,
                            cand.out_complement, costs)
    per_root = sum(plan.per_root_area.values())
    cand.gain = AreaGain(
        mffc_areas=dict(plan.per_root_area),
        shared_area=plan.removed_area - per_root,
        splitter_delta=plan.splitters_before - plan.splitters_after,
        t1_cost=plan.t1_cost,
        delta_area=plan.gain,
    )
    return plan.gain


def group_candidates(net: Netlist, cutset: CutSet,
                     costs: CostTable | None = None) -> list[T1Candidate]:
    """Bucket matched 3-leaf cuts by (leaves, polarity) into T1 candidates.

    Buckets with two or more roles are always reported; single-role buckets
    only when their gain is positive.  Sorted by gain, best first.
    """
    costs = costs or CostTable()
    buckets: dict[tuple, dict[T1Role, list[tuple[int, bool]]]] = {}
    for cut in cutset.all_cuts():
        if len(cut.leaves) != 3:
            continue
        if any(net.nodes[l].kind is GateKind.CONST0 for l in cut.leaves):
            continue
        if len(support(cut.tt)) != 3:
            continue
        for m in match_t1_family(cut.tt):
            slot = buckets.setdefault((cut.leaves, m.polarity), {})
            slot.setdefault(m.role, []).append((cut.root, m.out_complement))

    cands = []
    for (leaves, pol), roles in sorted(buckets.items()):
        matches = {}
        oc = {}
        used_roots: set[int] = set()
        for role in ROLE_ORDER:
            if role not in roles:
                continue
            # deterministic: lowest root id wins the role
            options = sorted(roles[role], key=lambda ro: ro[0])
            options = [o for o in options if o[0] not in used_roots]
            if not options:
                continue
            root, flip = options[0]
            matches[role] = root
            used_roots.add(root)
            if flip:
                oc[role] = True
        cand = T1Candidate(leaves, pol, matches, oc)
        try:
            cand.delta_area = area_gain(net, cand, costs)
        except StaleCandidateError:
            continue
        if len(matches) >= 2 or cand.delta_area > 0:
            cands.append(cand)
    cands.sort(key=T1Candidate.sort_key)
    return cands


def count_found(cands: list[T1Candidate]) -> int:
    """Distinct leaf triples with at least one beneficial candidate."""
    return len({c.leaves for c in cands if c.delta_area > 0})


def select_and_rewrite(net: Netlist, cands: list[T1Candidate],
                       costs: CostTable | None = None
                       ) -> tuple[Netlist, int, int]:
    """Greedily apply candidates in order of decreasing gain.

    A candidate is applied iff its gain, recomputed on the current netlist,
    is positive and none of its roots were consumed by an earlier rewrite.
    Returns ``(rewritten copy, found, used)``.
    """
    costs = costs or CostTable()
    work = net.copy()
    found = count_found(cands)
    used = 0
    for cand in sorted(cands, key=T1Candidate.sort_key):
        if cand.delta_area <= 0:
            continue
        if any(r not in work.nodes for r in cand.matches.values()):
            continue
        try:
            plan = plan_replacement(work, cand.leaves, cand.polarity,
                                    cand.matches, cand.out_complement, costs)
        except StaleCandidateError as exc:
            log.debug("skip candidate %s: %s", cand.leaves, exc)
            continue
        if plan.gain <= 0:
            continue
        apply_replacement(work, plan)
        used += 1
    return work, found, used


@dataclass
class MappingResult:
    net: Netlist
    found: int
    used: int
    candidates: list[T1Candidate]


def map_t1(net: Netlist, costs: CostTable | None = None,
           c_max: int | None = 16) -> MappingResult:
    cutset = enumerate_cuts(net, 3, c_max)
    cands = group_candidates(net, cutset, costs)
    mapped, found, used = select_and_rewrite(net, cands, costs)
    log.info("T1 mapping: %d candidates, %d found, %d used", len(cands), found, used)
    return MappingResult(mapped, found, used, cands)
