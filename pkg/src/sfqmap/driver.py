"""Command-line flow: parse, map T1 cells, assign stages, balance, verify, report."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .balancing import BalancedDesign, build_csp, solve_balancing
from .formats import (BenchmarkCase, ParseError, guess_format, parse_netlist,
                      read_manifest, write_design, write_stats)
from .netlist import CostTable, Netlist, NetlistError, Signal, materialize_inverters
from .staging import InfeasibleError, SolverTimeout, build_ilp, solve_stages
from .t1map import map_t1
from .verify import (EquivalenceResult, ValidationReport, check_equivalence,
                     parse_verify_mode, validate_schedule)

log = logging.getLogger("sfqmap")

MODES = ("1phase", "multiphase", "multiphase+t1")
EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_TIMEOUT, EXIT_VERIFY = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str | None = None
    format: str | None = None
    phases: int = 4
    mode: str = "multiphase+t1"
    cost_table: str | None = None
    seed: int = 0
    verify: str = "exhaustive"
    ilp_timeout: float | None = None
    csp_timeout: float | None = None
    out_design: str | None = None
    out_stats: str | None = None
    name: str | None = None
    c_max: int | None = 16
    ilp_max_nodes: int | None = 50_000
    csp_max_nodes: int | None = 200_000
    ilp_backend: str = "bnb"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.phases < 1:
            raise ConfigError("phases must be >= 1")
        if self.mode == "multiphase+t1" and self.phases < 3:
            raise ConfigError("T1 mapping needs at least 3 phases")
        try:
            parse_verify_mode(self.verify)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def effective_phases(self) -> int:
        return 1 if self.mode == "1phase" else self.phases

    def load_costs(self) -> CostTable:
        if not self.cost_table:
            return CostTable()
        try:
            with open(self.cost_table, encoding="utf-8") as fh:
                return CostTable.from_text(fh.read())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cost table: {exc}") from None


@dataclass
class RunResult:
    status: int
    row: dict
    design: BalancedDesign | None = None
    report: ValidationReport | None = None
    equivalence: EquivalenceResult | None = None
    messages: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# generators

def _full_adder(net: Netlist, a: Signal, b: Signal, c: Signal) -> tuple[Signal, Signal]:
    return net.XOR(net.XOR(a, b), c), net.MAJ(a, b, c)


def gen_ripple_adder(bits: int) -> Netlist:
    """``bits``-wide ripple-carry adder with carry-in; one full adder per bit."""
    if not 1 <= bits <= 256:
        raise ValueError("bits must be in [1, 256]")
    net = Netlist(f"adder{bits}")
    a = [net.add_pi(f"a{i}") for i in range(bits)]
    b = [net.add_pi(f"b{i}") for i in range(bits)]
    carry = net.add_pi("cin")
    for i in range(bits):
        s, carry = _full_adder(net, a[i], b[i], carry)
        net.add_po(s, f"s{i}")
    net.add_po(carry, "cout")
    return net


def _add_column(net: Netlist, terms: list[Signal]) -> tuple[Signal | None, Signal | None]:
    if not terms:
        return None, None
    if len(terms) == 1:
        return terms[0], None
    if len(terms) == 2:
        return net.XOR(*terms), net.AND(*terms)
    return _full_adder(net, *terms)


def gen_array_multiplier(bits: int) -> Netlist:
    """Unsigned array multiplier of ripple rows (2*bits PIs and POs)."""
    if not 1 <= bits <= 64:
        raise ValueError("bits must be in [1, 64]")
    net = Netlist(f"mult{bits}")
    a = [net.add_pi(f"a{i}") for i in range(bits)]
    b = [net.add_pi(f"b{i}") for i in range(bits)]
    out: list[Signal] = []
    acc: list[Signal | None] = [net.AND(a[i], b[0]) for i in range(bits)] + [None]
    out.append(acc[0])
    for j in range(1, bits):
        x = acc[1:]
        y = [net.AND(a[i], b[j]) for i in range(bits)]
        new: list[Signal | None] = []
        carry = None
        for i in range(bits):
            terms = [t for t in (x[i], y[i], carry) if t is not None]
            s, carry = _add_column(net, terms)
            new.append(s)
        new.append(carry)
        acc = new
        out.append(acc[0])
    for s in acc[1:]:
        out.append(s if s is not None else net.const0())
    for k, s in enumerate(out):
        net.add_po(s, f"p{k}")
    return net


def generate(spec: str) -> Netlist:
    kind, _, arg = spec.partition(":")
    try:
        bits = int(arg)
    except ValueError:
        raise ConfigError(f"bad generator {spec!r}") from None
    gens = {"adder": gen_ripple_adder, "multiplier": gen_array_multiplier,
            "mult": gen_array_multiplier}
    if kind not in gens:
        raise ConfigError(f"unknown generator {kind!r}")
    try:
        return gens[kind](bits)
    except ValueError as exc:
        raise ConfigError(f"{spec}: {exc}") from None


# ---------------------------------------------------------------------------
# pipeline

def _load(cfg: RunConfig) -> Netlist:
    if cfg.input is None:
        raise ConfigError("no input given")
    if cfg.input.startswith("gen:"):
        return generate(cfg.input[4:])
    fmt = cfg.format or guess_format(cfg.input)
    try:
        with open(cfg.input, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {cfg.input}: {exc}") from None
    return parse_netlist(data, fmt)


def _write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def run_pipeline(cfg: RunConfig, net: Netlist | None = None) -> RunResult:
    """Run one configuration; outputs are written only for verified designs."""
    t0 = time.perf_counter()
    name = cfg.name or (os.path.basename(cfg.input) if cfg.input else "design")
    row = {"benchmark": name, "mode": cfg.mode,
           "phases": cfg.effective_phases if cfg.mode in MODES else cfg.phases}

    def done(status, msg=None, **kw):
        row["runtime_ms"] = round((time.perf_counter() - t0) * 1000)
        row["status"] = "ok" if status == EXIT_OK else (msg or f"exit {status}")
        res = RunResult(status, row, **kw)
        if msg:
            res.messages.append(msg)
            log.error("%s: %s", name, msg)
        return res

    try:
        cfg.validate()
        costs = cfg.load_costs()
        ref = net if net is not None else _load(cfg)
    except ConfigError as exc:
        return done(EXIT_CONFIG, f"config error: {exc}")
    except (ParseError, NetlistError, ValueError) as exc:
        return done(EXIT_PARSE, f"parse error: {exc}")

    n = cfg.effective_phases
    work = ref.copy()
    materialize_inverters(work)
    found = used = 0
    if cfg.mode == "multiphase+t1":
        mapping = map_t1(work, costs, cfg.c_max)
        work = mapping.net
        materialize_inverters(work)
        found, used = mapping.found, mapping.used
    try:
        stages = solve_stages(build_ilp(work, n), time_limit=cfg.ilp_timeout,
                              max_nodes=cfg.ilp_max_nodes, backend=cfg.ilp_backend)
        design = solve_balancing(build_csp(work, stages), cfg.csp_timeout,
                                 cfg.csp_max_nodes)
    except SolverTimeout as exc:
        return done(EXIT_TIMEOUT, f"solver timeout: {exc}")
    except InfeasibleError as exc:
        return done(EXIT_TIMEOUT, f"no feasible schedule: {exc}")
    design.costs = costs
    design.t1_found, design.t1_used = found, used
    row.update({"t1_found": found, "t1_used": used, **design.metrics(),
                "stages_optimal": stages.optimal, "balancing_optimal": design.optimal})

    report = validate_schedule(design)
    eq = check_equivalence(ref, design, cfg.verify, cfg.seed)
    row["verify"] = eq.mode
    if report.violations or not eq.equal:
        what = []
        if report.violations:
            what.append(f"{len(report.violations)} schedule violations")
        if not eq.equal:
            what.append(f"inequivalent ({eq.counterexample})")
        return done(EXIT_VERIFY, "verification failed: " + "; ".join(what),
                    design=design, report=report, equivalence=eq)
    if cfg.out_design:
        _write(cfg.out_design, write_design(design))
    res = done(EXIT_OK, design=design, report=report, equivalence=eq)
    if cfg.out_stats:
        _write(cfg.out_stats, write_stats([res.row]))
    return res


# ---------------------------------------------------------------------------
# suite

RATIO_KEYS = ("dff_count", "jj_area", "depth_cycles")


def _ratio(a, b):
    if not isinstance(a, (int, float)) or not isinstance(b, (int, float)) or not b:
        return ""
    return round(a / b, 4)


def _run_case(args) -> list[dict]:
    case, base = args
    rows = []
    try:
        net = generate(case.generator) if case.generator else None
    except ConfigError as exc:
        net = None
        err = str(exc)
    else:
        err = None
    by_mode = {}
    for mode in MODES:
        cfg = replace(base, input=case.path, format=case.format, mode=mode,
                      name=case.name, out_design=None, out_stats=None)
        if err:
            row = {"benchmark": case.name, "mode": mode, "status": f"config error: {err}",
                   "phases": cfg.effective_phases}
        elif net is None and case.path is None:
            row = {"benchmark": case.name, "mode": mode, "status": "no input"}
        else:
            row = run_pipeline(cfg, net.copy() if net is not None else None).row
        by_mode[mode] = row
        rows.append(row)
    t1 = by_mode["multiphase+t1"]
    for base_mode, tag in (("1phase", "1phase"), ("multiphase", "multiphase")):
        for key in RATIO_KEYS:
            t1[f"{key}_ratio_vs_{tag}"] = _ratio(t1.get(key), by_mode[base_mode].get(key))
    return rows


def run_suite(cases: list[BenchmarkCase], base: RunConfig | None = None,
              workers: int = 1) -> list[dict]:
    """Run every case in all three modes; rows follow manifest order."""
    base = base or RunConfig()
    jobs = [(c, base) for c in cases]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_case, jobs))
    else:
        results = [_run_case(j) for j in jobs]
    return [row for rows in results for row in rows]


# ---------------------------------------------------------------------------
# CLI

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfqmap", description=__doc__)
    p.add_argument("--input", help="netlist file, or gen:adder:<bits> / gen:multiplier:<bits>")
    p.add_argument("--format", choices=["aag", "aig", "blif"])
    p.add_argument("--phases", type=int, default=4)
    p.add_argument("--mode", choices=MODES, default="multiphase+t1")
    p.add_argument("--cost-table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", default="exhaustive", help="exhaustive | random:N")
    p.add_argument("--ilp-timeout", type=float)
    p.add_argument("--csp-timeout", type=float)
    p.add_argument("--ilp-backend", choices=["bnb", "highs"], default="bnb")
    p.add_argument("--out-design")
    p.add_argument("--out-stats")
    p.add_argument("--manifest", help="JSON suite manifest; runs all three modes per case")
    p.add_argument("--workers", type=int, default=1)
    return p


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SFQMAP_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _parser()
    parser.__class__ = _Parser
    try:
        args = parser.parse_args(argv)
    except _ArgError as exc:
        print(f"sfqmap: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = RunConfig(input=args.input, format=args.format, phases=args.phases,
                    mode=args.mode, cost_table=args.cost_table, seed=args.seed,
                    verify=args.verify, ilp_timeout=args.ilp_timeout,
                    csp_timeout=args.csp_timeout, out_design=args.out_design,
                    out_stats=args.out_stats, ilp_backend=args.ilp_backend)
    if args.manifest:
        try:
            cfg.validate()
            with open(args.manifest, "rb") as fh:
                cases = read_manifest(fh.read(), os.path.dirname(os.path.abspath(args.manifest)))
        except ConfigError as exc:
            print(f"sfqmap: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"sfqmap: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ParseError as exc:
            print(f"sfqmap: {exc}", file=sys.stderr)
            return EXIT_PARSE
        rows = run_suite(cases, cfg, args.workers)
        data = write_stats(rows)
        if args.out_stats:
            _write(args.out_stats, data)
        else:
            sys.stdout.write(data.decode())
        return EXIT_OK
    res = run_pipeline(cfg)
    for msg in res.messages:
        print(f"sfqmap: {msg}", file=sys.stderr)
    if res.status == EXIT_OK and not args.out_stats:
        sys.stdout.write(write_stats([res.row]).decode())
    return res.status
