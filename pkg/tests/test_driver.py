import json

import pytest

from sfqmap import driver
from sfqmap.driver import (EXIT_CONFIG, EXIT_OK, EXIT_PARSE, EXIT_TIMEOUT,
                           EXIT_VERIFY, RunConfig, gen_array_multiplier,
                           gen_ripple_adder, main, run_pipeline, run_suite)
from sfqmap.formats import (BenchmarkCase, STATS_COLUMNS, read_stats,
                            write_blif)
from sfqmap.netlist import exhaustive_pi_words
from sfqmap.staging import SolverTimeout
from sfqmap.verify import EquivalenceResult

FA_BLIF = """.model fa
.inputs a b c
.outputs s co
.names a b c s
100 1
010 1
001 1
111 1
.names a b c co
11- 1
1-1 1
-11 1
.end
"""


@pytest.fixture
def fa_file(tmp_path):
    p = tmp_path / "fa.blif"
    p.write_text(FA_BLIF)
    return p


def test_full_adder_t1(fa_file, tmp_path):
    out = tmp_path / "fa.json"
    stats = tmp_path / "fa.csv"
    rc = main(["--input", str(fa_file), "--mode", "multiphase+t1", "--phases", "4",
               "--out-design", str(out), "--out-stats", str(stats)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert sum(d["kind"] == "T1" for d in doc["nodes"]) == 1
    row = read_stats(stats.read_text())[0]
    assert (row["t1_found"], row["t1_used"], row["phases"]) == ("1", "1", "4")


def test_full_adder_1phase(fa_file):
    res = run_pipeline(RunConfig(input=str(fa_file), mode="1phase"))
    assert res.status == EXIT_OK
    assert res.design.t1_count == 0 and res.design.n == 1
    assert res.row["phases"] == 1


def test_t1_needs_three_phases(fa_file, tmp_path):
    out = tmp_path / "x.json"
    rc = main(["--input", str(fa_file), "--phases", "2", "--out-design", str(out)])
    assert rc == EXIT_CONFIG and not out.exists()
    assert main(["--bogus"]) == EXIT_CONFIG
    assert main(["--input", str(fa_file), "--verify", "maybe"]) == EXIT_CONFIG
    assert main(["--input", str(tmp_path / "missing.blif")]) == EXIT_CONFIG


def test_parse_error(tmp_path):
    bad = tmp_path / "bad.blif"
    bad.write_text(".model m\n.inputs a b c d\n.outputs y\n.names a b c d y\n1111 1\n.end\n")
    assert main(["--input", str(bad)]) == EXIT_PARSE


def test_timeout_exit(fa_file, monkeypatch):
    def boom(*a, **k):
        raise SolverTimeout("no incumbent")
    monkeypatch.setattr(driver, "solve_stages", boom)
    assert main(["--input", str(fa_file)]) == EXIT_TIMEOUT


def test_verify_failure_writes_nothing(fa_file, tmp_path, monkeypatch):
    monkeypatch.setattr(driver, "check_equivalence",
                        lambda *a, **k: EquivalenceResult(False, "exhaustive", 8, 0, {}))
    out = tmp_path / "x.json"
    rc = main(["--input", str(fa_file), "--out-design", str(out)])
    assert rc == EXIT_VERIFY and not out.exists()


def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        d, s = tmp_path / f"d{k}.json", tmp_path / f"s{k}.csv"
        assert main(["--input", "gen:adder:6", "--out-design", str(d),
                     "--out-stats", str(s), "--seed", "7"]) == EXIT_OK
        rows = read_stats(s.read_text())
        for r in rows:
            r.pop("runtime_ms")
        outs.append((d.read_bytes(), rows))
    assert outs[0] == outs[1]


def test_empty_manifest(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text('{"cases": []}')
    assert main(["--manifest", str(m)]) == EXIT_OK
    assert capsys.readouterr().out == ",".join(STATS_COLUMNS) + "\n"


def test_suite_adders_and_ratios(tmp_path):
    cases = [BenchmarkCase(f"adder{b}", generator=f"adder:{b}") for b in (8, 16, 32)]
    rows = run_suite(cases, RunConfig(verify="random:2000"))
    assert [r["benchmark"] for r in rows] == [c.name for c in cases for _ in range(3)]
    for i, bits in enumerate((8, 16, 32)):
        one, multi, t1 = rows[3 * i: 3 * i + 3]
        assert all(r["status"] == "ok" for r in (one, multi, t1))
        assert t1["t1_used"] == bits == t1["t1_found"]
        assert t1["jj_area"] < multi["jj_area"] < one["jj_area"]
        assert t1["jj_area_ratio_vs_multiphase"] < 1


def test_suite_records_failures():
    cases = [BenchmarkCase("bad", generator="adder:0"),
             BenchmarkCase("ok", generator="adder:2")]
    rows = run_suite(cases, RunConfig())
    assert rows[0]["status"] != "ok"
    assert rows[-1]["status"] == "ok"


def test_manifest_file_case(fa_file, tmp_path):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"cases": [{"name": "fa", "path": fa_file.name}]}))
    s = tmp_path / "s.csv"
    assert main(["--manifest", str(m), "--out-stats", str(s)]) == EXIT_OK
    rows = read_stats(s.read_text())
    assert [r["mode"] for r in rows] == ["1phase", "multiphase", "multiphase+t1"]
    assert rows[2]["t1_used"] == "1"


def test_generators():
    assert gen_ripple_adder(1).po_names() == ["s0", "cout"]
    for bits in (2, 3):
        net = gen_array_multiplier(bits)
        words, width = exhaustive_pi_words(2 * bits)
        outs = net.output_words(words, width)
        for v in range(1 << (2 * bits)):
            a = v & ((1 << bits) - 1)
            b = v >> bits
            got = sum(((outs[k] >> v) & 1) << k for k in range(2 * bits))
            assert got == a * b
    with pytest.raises(ValueError):
        gen_ripple_adder(0)


def test_adder_blif_file(tmp_path):
    p = tmp_path / "a4.blif"
    p.write_bytes(write_blif(gen_ripple_adder(4)))
    res = run_pipeline(RunConfig(input=str(p)))
    assert res.status == EXIT_OK and res.design.t1_count == 4
