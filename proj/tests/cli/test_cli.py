import csv
import io
import json
import os
import struct
import subprocess
from pathlib import Path

import pytest

BENCH = os.environ.get("HSSULV_BENCH")
GOLDEN = Path(os.environ.get("HSSULV_GOLDEN_DIR", Path(__file__).resolve().parents[1] / "golden"))

pytestmark = pytest.mark.skipif(not BENCH, reason="HSSULV_BENCH not set")

SMALL = ["--N", "512", "--nleaf", "128", "--max-rank", "32", "--reps", "2"]


def bench(*args, check=True):
    proc = subprocess.run([BENCH, *args], capture_output=True, text=True, timeout=300)
    if check:
        assert proc.returncode == 0, proc.stderr
    return proc


def golden(name):
    return (GOLDEN / name).read_text().splitlines()[0]


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_single_run_csv_matches_golden_header():
    out = bench(*SMALL).stdout
    assert out.splitlines()[0] == golden("single_header.csv")
    (row,) = rows(out)
    assert row["schema_version"] == "1"
    assert row["kernel"] == "laplace2d"
    assert int(row["tasks"]) == 5 * 4 - 4
    assert float(row["solve_error"]) < 1e-10
    assert row["build_s_ci95"] != ""


def test_single_rep_has_empty_ci():
    (row,) = rows(bench("--N", "512", "--nleaf", "256", "--max-rank", "256", "--reps", "1").stdout)
    assert row["factor_s_ci95"] == ""
    assert float(row["dense_solve_error"]) < 1e-10


def test_config_file_values_are_overridden_by_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "kernel": "yukawa",
        "constants": {"alpha": 2.0},
        "N": 512,
        "nleaf": 128,
        "max_rank": 16,
        "reps": 1,
        "seed": 5,
    }))
    report = json.loads(bench("--config", str(cfg), "--max-rank", "24", "--format", "json").stdout)
    c = report["config"]
    assert c["kernel"] == "yukawa"
    assert c["constants"]["alpha"] == 2.0
    assert c["max_rank"] == 24
    assert c["seed"] == 5
    assert c["N"] == 512


def test_embedded_config_reproduces_errors(tmp_path):
    first = json.loads(bench(*SMALL, "--kernel", "matern", "--seed", "11", "--format", "json").stdout)
    cfg = tmp_path / "again.json"
    cfg.write_text(json.dumps(first["config"]))
    again = json.loads(bench("--config", str(cfg)).stdout)
    for key in ("construct_error", "solve_error", "dense_solve_error"):
        assert again[key] == first[key]


@pytest.mark.parametrize("args", [
    ["--N", "1000"],
    ["--N", "512", "--nleaf", "256", "--max-rank", "300"],
    ["--N", "512", "--nleaf", "1024"],
    ["--N", "512", "--reps", "0"],
])
def test_invalid_configuration_reports_json_error(args):
    proc = bench(*args, check=False)
    assert proc.returncode != 0
    err = json.loads(proc.stderr)
    assert err["status"] == "error"
    assert err["message"]
    assert "config" in err


def test_unknown_config_key_is_rejected(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"N": 512, "rank": 3}))
    proc = bench("--config", str(cfg), check=False)
    assert proc.returncode != 0
    assert json.loads(proc.stderr)["status"] == "error"


def test_rank_sweep_csv(tmp_path):
    out = tmp_path / "rank.csv"
    bench("--sweep", "rank", "--N", "1024", "--grid", "20:128,40:128,600:256", "--reps", "1", "--out", str(out),
          check=False)
    text = out.read_text()
    assert text.splitlines()[0] == golden("rank_header.csv")
    r = rows(text)
    assert len(r) == 3
    assert float(r[1]["construct_error"]) <= float(r[0]["construct_error"])
    assert "error" in text.splitlines()[3]


def test_scaling_sweep_json():
    report = json.loads(bench("--sweep", "scaling", "--sizes", "512", "1024", "2048", "--nleaf", "128",
                              "--max-rank", "32", "--reps", "2", "--format", "json").stdout)
    assert [r["N"] for r in report["rows"]] == [512, 1024, 2048]
    assert [r["tasks"] for r in report["rows"]] == [16, 36, 76]
    assert report["loglog_exponent"] is not None


def test_scaling_sweep_csv_header():
    out = bench("--sweep", "scaling", "--sizes", "512", "--nleaf", "128", "--max-rank", "16", "--reps", "1").stdout
    assert out.splitlines()[0] == golden("scaling_header.csv")


def test_breakdown_sweep():
    out = bench("--sweep", "breakdown", *SMALL, "--workers", "2").stdout
    assert out.splitlines()[0] == golden("breakdown_header.csv")
    assert len(rows(out)) >= 2


def test_schedule_trace_and_comm_csv(tmp_path):
    trace = tmp_path / "trace.jsonl"
    comm = tmp_path / "comm.csv"
    bench(*SMALL, "--workers", "2", "--procs", "2", "--trace", str(trace), "--comm-csv", str(comm))
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert len(records) == 16
    assert set(records[0]) == {"id", "kind", "level", "node", "owner", "start_ns", "end_ns", "worker"}
    assert sorted(r["id"] for r in records) == list(range(16))
    assert all(r["end_ns"] >= r["start_ns"] for r in records)
    assert {r["kind"] for r in records} == {"DiagProduct", "PartialFactor", "Merge", "RootFactor"}
    text = comm.read_text()
    assert text.splitlines()[0] == golden("comm_header.csv")
    pairs = rows(text)
    assert pairs
    assert all(p["src"] != p["dst"] for p in pairs)
    assert sum(int(p["events"]) for p in pairs) > 0


def test_saved_hss_container_header(tmp_path):
    path = tmp_path / "h.hss"
    bench(*SMALL, "--save-hss", str(path))
    data = path.read_bytes()
    assert data[:8] == b"HSSULV\0\0"
    version, _ = struct.unpack_from("<II", data, 8)
    n, nleaf, levels = struct.unpack_from("<qqq", data, 16)
    assert (version, n, nleaf, levels) == (1, 512, 128, 2)
