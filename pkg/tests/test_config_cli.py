import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from fockbridge import __version__
from fockbridge.cli import main
from fockbridge.config import ConfigError, load_config, parse_config

CATALOG = Path(__file__).resolve().parents[1] / "src" / "fockbridge" / "catalog"

PASSING = {
    "kind": "eq10-gap", "name": "flow-ok", "modes": 1, "cutoff": 16,
    "hamiltonian": "(phi[1]^2 + pi[1]^2)/2", "observables": ["phi[1]^2"],
    "distribution": {"kind": "delta", "state": [0.6, 0.2]}, "times": [0.7], "dt": 1e-3,
}
# same dynamics, but claims the two sides differ: must fail
FAILING = dict(PASSING, name="flow-bad", expect="differ")


def _write(directory: Path, name: str, cfg) -> Path:
    p = directory / name
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg, indent=2))
    return p


def _strip_timestamp(obj):
    if isinstance(obj, dict):
        return {k: _strip_timestamp(v) for k, v in obj.items() if k != "timestamp"}
    if isinstance(obj, list):
        return [_strip_timestamp(v) for v in obj]
    return obj


def test_parse_defaults_name_from_source():
    cfg = parse_config(json.dumps({k: v for k, v in PASSING.items() if k != "name"}), "x.json", "x")
    assert cfg.name == "x" and cfg.cutoff == 16 and cfg.times == (0.7,)


def test_invalid_json_reports_line_and_column():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "kind": "zero-point",\n  "modes": 1,,\n}', "bad.json")
    assert str(info.value).startswith("bad.json:3:")


def test_bad_value_points_at_its_key():
    text = json.dumps(dict(PASSING, hamiltonian="phi[1]^^2"), indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text, "h.json")
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"hamiltonian"' in s)
    assert str(info.value).startswith(f"h.json:{line}:")


@pytest.mark.parametrize("patch", [
    {"kind": "nonsense"},
    {"modes": 0},
    {"dt": -1},
    {"method": "euler"},
    {"cutoff": "huge"},
    {"expect": "maybe"},
    {"unknown_key": 1},
    {"distribution": {"kind": "gaussian", "mean": [0, 0], "std": [1]}},
])
def test_invalid_fields_rejected(patch):
    with pytest.raises(ConfigError):
        parse_config(json.dumps(dict(PASSING, **patch)), "p.json")


def test_missing_required_field():
    cfg = {k: v for k, v in PASSING.items() if k != "hamiltonian"}
    with pytest.raises(ConfigError):
        parse_config(json.dumps(cfg), "m.json")


def test_catalog_configs_all_load():
    names = sorted(p.name for p in CATALOG.glob("*.json"))
    assert len(names) >= 12
    for n in names:
        load_config(str(CATALOG / n))


def test_run_writes_report(tmp_path, capsys):
    cfg = _write(tmp_path, "ok.json", PASSING)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--output", str(out)]) == 0
    record = json.loads((out / "flow-ok.json").read_text())
    assert record["experiment"] == "flow-ok" and record["checks"]
    assert (out / "summary.csv").read_text().startswith("experiment,")
    assert "PASS flow-ok" in capsys.readouterr().out


def test_run_failing_check_exits_one(tmp_path):
    cfg = _write(tmp_path, "bad.json", FAILING)
    assert main(["run", str(cfg), "--output", str(tmp_path / "out")]) == 1


def test_run_config_error_exits_two(tmp_path):
    cfg = _write(tmp_path, "broken.json", "{")
    assert main(["run", str(cfg), "--output", str(tmp_path / "out")]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_suite_empty_directory(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    out = tmp_path / "out"
    assert main(["suite", str(empty), "--output", str(out)]) == 0
    agg = json.loads((out / "suite.json").read_text())
    assert agg["total"] == 0


def test_suite_counts_and_exit_codes(tmp_path):
    d = tmp_path / "cfg"
    d.mkdir()
    _write(d, "a.json", PASSING)
    out = tmp_path / "out"
    assert main(["suite", str(d), "--output", str(out)]) == 0
    assert json.loads((out / "suite.json").read_text())["passed"] == 1
    _write(d, "b.json", FAILING)
    assert main(["suite", str(d), "--output", str(out)]) == 1
    agg = json.loads((out / "suite.json").read_text())
    assert (agg["total"], agg["passed"], agg["failed"]) == (2, 1, 1)


def test_suite_missing_directory(tmp_path):
    assert main(["suite", str(tmp_path / "nope")]) == 2


def test_output_env_var(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "ok.json", PASSING)
    monkeypatch.setenv("FOCKBRIDGE_OUTPUT", str(tmp_path / "env-out"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "env-out" / "flow-ok.json").exists()


def test_reduce_and_version(capsys):
    assert main(["reduce", "a[1]*ad[1]"]) == 0
    assert capsys.readouterr().out.strip() == "(1+0i) + (1+0i)*ad[1]*a[1]"
    assert main(["reduce", "a[1]*ad[1]", "--normal-product"]) == 0
    assert capsys.readouterr().out.strip() == "(1+0i)*ad[1]*a[1]"
    assert main(["reduce", "a[1]*"]) == 2
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out
    assert main([]) == 2


def test_reports_deterministic_modulo_timestamp(tmp_path):
    d = tmp_path / "cfg"
    d.mkdir()
    for n in ("09-flow-harmonic.json", "11-zero-point-n1.json", "14-extended-survey.json"):
        shutil.copy(CATALOG / n, d / n)
    runs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(["suite", str(d), "--output", str(out)]) == 0
        runs.append({p.name: p.read_text() for p in sorted(out.iterdir())})
    assert runs[0].keys() == runs[1].keys()
    for name, text in runs[0].items():
        if name.endswith(".json"):
            assert _strip_timestamp(json.loads(text)) == _strip_timestamp(json.loads(runs[1][name]))
        else:
            assert text == runs[1][name]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "fockbridge", "version"], capture_output=True, text=True,
                       env=dict(os.environ))
    assert r.returncode == 0 and __version__ in r.stdout
