from __future__ import annotations

import json
import subprocess
import sys

import pytest

from dlas.cli import main


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(*args):
    return main(list(args))


EXAMPLE = {"schema_version": 1, "preset": "example-line", "seed": 3,
           "params": {"T": 10, "replicas": 3000}}


def test_example_line_run_and_rerun(tmp_path):
    cfg = write(tmp_path, "c.json", EXAMPLE)
    assert run("run", "--config", cfg, "--out", str(tmp_path / "a")) == 0
    assert run("run", "--config", cfg, "--out", str(tmp_path / "b")) == 0
    for name in ("summary.json", "replicas.csv", "stoploss.tsv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 3 and set(manifest["files"]) == {
        "summary.json", "replicas.csv", "stoploss.tsv"}
    assert manifest["config"]["params"]["window"] == [-12, 22]
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["spec_hash"] == manifest["spec_hash"]


def test_seed_override_changes_hash(tmp_path):
    cfg = write(tmp_path, "c.json", EXAMPLE)
    run("run", "--config", cfg, "--out", str(tmp_path / "a"))
    run("run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "4")
    ha = json.loads((tmp_path / "a" / "manifest.json").read_text())["spec_hash"]
    hb = json.loads((tmp_path / "b" / "manifest.json").read_text())["spec_hash"]
    assert ha != hb


def test_worker_count_does_not_change_output(tmp_path):
    cfg = write(tmp_path, "c.json", {"schema_version": 1, "preset": "coupling-sweep", "seed": 1,
                                     "params": {"runs": 600}})
    assert run("run", "--config", cfg, "--out", str(tmp_path / "a")) == 0
    assert run("run", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2") == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == \
        (tmp_path / "b" / "summary.json").read_bytes()


@pytest.mark.parametrize("data, needle", [
    ({"schema_version": 1, "preset": "minimal-config",
      "params": {"graph": {"kind": "path", "n": 5}, "alpha": {"0": 0.4, "2": 0.5}}},
     "params.alpha: pmf sums to 0.9"),
    ({"schema_version": 1, "preset": "example-line", "params": {"T": 20, "window": [-5, 30]}},
     "params.window: window [-5, 30] too small"),
    ({"schema_version": 1, "preset": "idla", "params": {"graph": {"kind": "star", "n": 5},
                                                        "extra": 1}},
     "params.extra: unknown field"),
    ({"schema_version": 1, "preset": "example-line", "colour": "red"}, "colour: unknown field"),
    ({"schema_version": 2, "preset": "example-line"}, "schema_version"),
    ({"schema_version": 1, "preset": "nope"}, "preset: must be one of"),
    ({"schema_version": 1, "preset": "example-line", "significance": 0.5}, "significance"),
    ({"schema_version": 1, "preset": "idla", "params": {"graph": {"kind": "path", "n": 4},
                                                        "eta": 7}}, "params.eta"),
])
def test_config_errors_exit_1(tmp_path, capsys, data, needle):
    cfg = write(tmp_path, "bad.json", data)
    assert run("run", "--config", cfg, "--out", str(tmp_path / "o")) == 1
    err = capsys.readouterr().err
    assert needle in err and "bad.json" in err


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("run")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1
    assert run("run", "--config", str(tmp_path / "missing.json")) == 1
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert run("run", "--config", str(bad)) == 1


def test_sweep_violation_exit_2(tmp_path):
    cfg = write(tmp_path, "c.json", {"schema_version": 1, "preset": "coupling-sweep",
                                     "params": {"runs": 300, "invert_priority": True}})
    assert run("run", "--config", cfg, "--out", str(tmp_path / "o")) == 2


def test_verify_mutation_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "v.json", {"params": {"scale": "smoke", "criteria": [3],
                                                "debug": {"invert_priority": True}}})
    assert run("verify", "--config", cfg) == 2
    assert "[FAIL] 3." in capsys.readouterr().out


def test_verify_report_hash_is_stable(tmp_path, capsys):
    cfg = write(tmp_path, "v.json", {"params": {"scale": "smoke", "criteria": [5, 7]}})
    hashes = []
    for _ in range(2):
        assert run("verify", "--config", cfg, "--seed", "9") == 0
        line = capsys.readouterr().out.strip().splitlines()[-1]
        hashes.append(line.split("report hash ")[1].split(";")[0])
    assert hashes[0] == hashes[1]


def test_enumerate_prints_exact_law(tmp_path, capsys):
    cfg = write(tmp_path, "e.json", {"params": {"graph": {"kind": "interval", "lo": 0, "hi": 2},
                                                "xi0": {"1": 1}, "T": 2}})
    assert run("enumerate", "--config", cfg, "--out", str(tmp_path / "o")) == 0
    assert capsys.readouterr().out.splitlines() == ["value,probability", "2,1"]
    assert (tmp_path / "o" / "law.csv").exists()
    cfg = write(tmp_path, "e2.json", {"params": {"graph": {"kind": "star", "n": 6},
                                                 "xi0": {"0": 2}, "T": 3, "method": "worlds"}})
    assert run("enumerate", "--config", cfg) == 1


def test_orders_on_csv(tmp_path, capsys):
    x = tmp_path / "x.csv"
    y = tmp_path / "y.csv"
    x.write_text("v\n" + "1\n" * 400)
    y.write_text("v\n" + "0\n2\n" * 200)
    assert run("orders", "--x", str(x), "--y", str(y)) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "not_falsified"
    assert run("orders", "--x", str(y), "--y", str(x), "--relation", "sd") == 3
    assert run("orders", "--x", str(x), "--y", str(y), "--column", "w") == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dlas", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify" in out.stdout
