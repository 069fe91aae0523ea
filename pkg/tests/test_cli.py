import csv
import json

from opser.cli import main

SMALL = """\
[scenario]
name = small
sim_duration_s = 4.0
seeds = 1
[topology]
rows = 4
cols = 4
[traffic]
source_count = 2
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_results_and_traces(tmp_path, capsys):
    scen = tmp_path / "small.ini"
    scen.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run", str(scen), "--seed", "1,2", "--out-dir", str(out), "--trace"]) == 0
    rows = _rows(out / "small_results.csv")
    assert [r["seed"] for r in rows] == ["1", "2"]
    traces = sorted(out.glob("*.trace.jsonl"))
    assert len(traces) == 2
    first = json.loads(traces[0].read_text().splitlines()[0])
    assert first["ev"] == "meta"
    assert main(["validate", str(traces[0])]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_reports_violations(tmp_path):
    scen = tmp_path / "small.ini"
    scen.write_text(SMALL)
    main(["run", str(scen), "--out-dir", str(tmp_path), "--trace"])
    trace = next(tmp_path.glob("*.trace.jsonl"))
    lines = trace.read_text().splitlines()
    cid = next(line for line in lines if '"frame":"CID"' in line)
    trace.write_text("\n".join(lines + [cid]) + "\n")
    assert main(["validate", str(trace)]) == 1


def test_protocol_flag_overrides_file(tmp_path):
    scen = tmp_path / "small.ini"
    scen.write_text(SMALL)
    assert main(["run", str(scen), "--protocol", "oppbcast", "--out-dir", str(tmp_path)]) == 0
    assert _rows(tmp_path / "small_results.csv")[0]["protocol"] == "oppbcast"


def test_sweep_file_writes_rows_and_aggregates(tmp_path):
    sw = tmp_path / "rates.ini"
    sw.write_text(SMALL + "[sweep]\nname = rates\nseeds = 1..2\ntraffic.packet_rate_pps = 1.0, 2.0\n")
    assert main(["sweep", str(sw), "--out-dir", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "rates_results.csv")
    assert len(rows) == 4
    assert len({(r["scenario_id"], r["seed"]) for r in rows}) == 4
    agg = _rows(tmp_path / "rates_aggregate.csv")
    assert len(agg) == 2


def test_analyze_tables(tmp_path):
    assert main(["analyze", "--out-dir", str(tmp_path), "--max-hops", "2", "--grid-sides", "11"]) == 0
    probs = _rows(tmp_path / "delivery_probability.csv")
    assert abs(float(probs[1]["p_opportunistic"]) - 0.6241) < 1e-12
    assert len(_rows(tmp_path / "cid_energy_bound.csv")) == 1


def test_bad_inputs_exit_with_code_two(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[traffic]\nwhatever = 1\n")
    assert main(["run", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert main(["run", str(tmp_path / "missing.ini")]) == 2
    assert main(["analyze", "--candidates", "1.0", "--out-dir", str(tmp_path)]) == 2
