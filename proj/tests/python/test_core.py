import json
import math
from pathlib import Path

import pytest

import splitbench

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

SYNTH = {
    "paradigm": "psl",
    "dataset": {"name": "synth", "n": 300, "dims": 6, "k": 3, "spread": 0.7, "seed": 2, "test_n": 90},
    "n_clients": 3,
    "epochs": 3,
    "batch_size": 32,
    "seed": 5,
}


def test_minimal_config_defaults():
    cfg = splitbench.parse_config({"paradigm": "psl", "dataset": "synth", "n_clients": 3})
    assert cfg["lr_client"] == 0.01
    assert cfg["batch_size"] == 64
    assert splitbench.parse_config(cfg) == cfg


def test_config_error_names_field():
    with pytest.raises(splitbench.Error) as info:
        splitbench.parse_config({"paradigm": "psl", "dataset": "synth", "partition": {"alpha": -1}})
    assert info.value.code == "invalid_config"
    assert "partition.alpha" in str(info.value)


def test_run_log_shape(tmp_path):
    out = tmp_path / "run.jsonl"
    trace = tmp_path / "trace.jsonl"
    log = splitbench.run_experiment(dict(SYNTH, out_path=str(out)), trace_path=trace)
    records = log["records"]
    assert [r["epoch"] for r in records] == [0, 1, 2]
    cumulative = [r["cumulative_bytes"] for r in records]
    assert cumulative == sorted(cumulative)
    for r in records:
        sent = sum(p["sent_bytes"] for p in r["participants"].values())
        received = sum(p["received_bytes"] for p in r["participants"].values())
        assert sent == received == r["epoch_bytes"]
    assert log["summary"]["total_bytes"] == cumulative[-1]
    assert 0.0 <= log["summary"]["final_accuracy"] <= 1.0

    # The file on disk carries the same log.
    back = splitbench.read_jsonl(out)
    assert back["records"] == records
    assert back["summary"] == log["summary"]

    lines = [json.loads(l) for l in trace.read_text().splitlines()]
    assert sum(l["bytes"] for l in lines) == cumulative[-1]
    assert {"seq", "round", "batch", "from", "to", "tag", "bytes", "labels"} <= set(lines[0])


def test_header_line_is_schema_versioned(tmp_path):
    out = tmp_path / "run.jsonl"
    splitbench.run_experiment(dict(SYNTH, epochs=1, out_path=str(out)))
    header = json.loads(out.read_text().splitlines()[0])
    assert header["type"] == "header"
    assert header["schema"] == splitbench.LOG_SCHEMA
    assert header["version"] == splitbench.LOG_SCHEMA_VERSION


def test_deterministic():
    a = splitbench.run_experiment(SYNTH)
    b = splitbench.run_experiment(SYNTH)
    for r in a["records"] + b["records"]:
        r.pop("wall_ms")
    a["summary"].pop("wall_ms")
    b["summary"].pop("wall_ms")
    assert a == b


def test_local_only_sends_nothing():
    log = splitbench.run_experiment(dict(SYNTH, paradigm="local"))
    assert all(r["epoch_bytes"] == 0 for r in log["records"])
    assert log["summary"]["total_bytes"] == 0


def test_config_file_with_relative_paths():
    log = splitbench.run_experiment(FIXTURES / "adult-tiny.json")
    assert len(log["records"]) == 3
    assert log["summary"]["final_auc"] is not None


def test_read_fixture_log():
    log = splitbench.read_jsonl(FIXTURES / "runlog-two-epochs.jsonl")
    first, second = log["records"]
    assert first["train_loss"] is None or math.isnan(first["train_loss"])
    assert second["auc"] == 0.8
    assert second["client_states"] == ["C"]
    assert log["summary"]["bytes_by_tag"] == {"SmashedBatch": 100, "CutGrad": 60}


def test_malformed_log_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    lines = (FIXTURES / "runlog-two-epochs.jsonl").read_text().splitlines()
    lines[2] = "{not json"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(splitbench.Error) as info:
        splitbench.read_jsonl(path)
    assert "line 3" in str(info.value)


def test_gradcheck():
    results = splitbench.gradcheck(seeds=2)
    assert {r["case"] for r in results} >= {"dense", "conv2d", "maxpool"}
    assert max(max(r["param_error"], r["input_error"]) for r in results) < 1e-4


def test_partition_stats_strict_split():
    stats = splitbench.partition_stats(
        {"paradigm": "psl", "dataset": {"name": "synth", "n": 400, "k": 4}, "n_clients": 2, "partition": {"alpha": 0}}
    )
    assert stats["scheme"] == "strict_label"
    assert sum(stats["sizes"]) == 400
    for hist in stats["class_histograms"]:
        assert sum(1 for n in hist if n > 0) == 2


def test_tensor_message_size():
    assert splitbench.tensor_message_size([64, 6, 12, 12]) == 221220
