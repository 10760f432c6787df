import json
import math
import os
import subprocess
from pathlib import Path

import pytest

import apidrift

APIS = ["frontend", "cartservice", "currencyservice"]


def small_prior():
    space = apidrift.CategorySpace(APIS, "pair")
    counts = [0] * len(space)
    counts[space.encode("frontend", "cartservice")] = 9
    counts[space.encode("frontend", "currencyservice")] = 17
    counts[space.encode(None, "frontend")] = 4
    return space, apidrift.build_prior(apidrift.FrequencyTable(space, counts))


def test_space_layout():
    space = apidrift.CategorySpace(APIS, "pair")
    assert len(space) == 16
    assert space.encode(None, "frontend") == 12
    assert space.decode(space.encode("frontend", None)) == ("frontend", None)
    with pytest.raises(apidrift.UnknownCategory):
        space.encode("frontend", "paymentservice")
    with pytest.raises(apidrift.ValidationError):
        space.encode(None, None)


def test_detector_matches_closed_form():
    space, prior = small_prior()
    assert math.isclose(sum(prior.theta0), 1.0)
    stream = [space.encode("frontend", "currencyservice")] * 30 + [space.encode("frontend", None)] * 3
    det = apidrift.SequentialDetector(prior, keep_history=True)
    trajectory = det.run(stream)
    assert len(trajectory) == det.t == 33
    assert math.isclose(det.log_bf, apidrift.log_bf_closed_form(prior, det.data_counts), rel_tol=1e-9)
    assert det.alarmed_at
    restored = apidrift.SequentialDetector.restore(det.snapshot())
    assert restored.log_bf == det.log_bf

    report = apidrift.top_k_report(det, k=2)
    assert len(report["top_k"]) == 2
    assert space.label(space.encode("frontend", None)) in {r["category"] for r in report["top_k"]}
    assert math.isclose(sum(report["delta"]), det.log_bf, abs_tol=1e-9)


def test_thresholds_and_chi2():
    assert math.isclose(apidrift.log_threshold(0.05), math.log(20))
    assert math.isclose(apidrift.chi2_sf(5.991, 2), math.exp(-5.991 / 2), rel_tol=1e-12)
    stat, dof, p = apidrift.pearson_gof([10, 10], [0.5, 0.5])
    assert (stat, dof, p) == (0.0, 1, 1.0)
    with pytest.raises(apidrift.Error):
        apidrift.log_threshold(1.5)


def test_run_experiment():
    config = {
        "pi_values": [0.0, 1.0],
        "reps": 20,
        "draws": 200,
        "master_seed": 3,
        "space": {"mode": "single", "apis": ["a", "b", "c"]},
        "baseline": {"counts": [10, 5, 1]},
        "alternate": {"counts": [1, 5, 10]},
    }
    first = apidrift.run_experiment(config, jobs=1)
    assert first == apidrift.run_experiment(config, jobs=4)
    rows = first["rows"]
    assert len(rows) == 2
    assert rows[1]["detection_rate"] == [1.0, 1.0, 1.0]


@pytest.mark.skipif("APIDRIFT_CLI" not in os.environ, reason="CLI binary not provided")
def test_cli_round_trip(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    cli = os.environ["APIDRIFT_CLI"]
    schema = json.loads(
        (Path(os.environ.get("APIDRIFT_SOURCE_DIR", Path(__file__).parents[2])) / "schemas" / "manifest.schema.json").read_text()
    )
    logs = tmp_path / "base.jsonl"
    logs.write_text(
        "".join(json.dumps({"ts": i, "api": "b", "parent": "a"}) + "\n" for i in range(20))
        + json.dumps({"ts": 21, "api": "a"})
        + "\n"
    )
    subprocess.run([cli, "baseline", str(logs), "-o", str(tmp_path / "base")], check=True)
    live = "".join(json.dumps({"ts": i, "api": "a", "parent": "b"}) + "\n" for i in range(10))
    done = subprocess.run(
        [cli, "monitor", "-b", str(tmp_path / "base"), "-o", str(tmp_path / "run")], input=live, text=True
    )
    assert done.returncode == 2
    subprocess.run([cli, "attribute", str(tmp_path / "run")], check=True)
    for d in ("base", "run"):
        jsonschema.validate(json.loads((tmp_path / d / "manifest.json").read_text()), schema)
    bad = subprocess.run([cli, "attribute", str(tmp_path / "run"), "-k", "0"], capture_output=True, text=True)
    assert bad.returncode == 1
