import json
import subprocess
import sys

import pytest

from fracball.cli import EXPERIMENT_DEFAULTS, Experiment, main, render
from fracball.errors import ConfigError, ParseError


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return str(path)


def test_kernel_eval_json(tmp_path, capsys):
    cfg = {"params": {"n": 2, "s": 0.75},
           "experiment": {"kernel": "green", "x": [[0.1, 0.2]], "y": [[-0.3, 0.4]]}}
    assert main(["kernel-eval", "--config", write(tmp_path, cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["schema_version"] == 1
    assert out["rows"][0]["value"] == pytest.approx(0.1875342697359595, rel=1e-12)


def test_kernel_eval_csv_to_directory(tmp_path):
    cfg = {"experiment": {"kernel": "poisson", "x": [[0.0, 0.0]], "y": [[2.0, 0.0]]}}
    out = tmp_path / "out"
    assert main(["kernel-eval", "--config", write(tmp_path, cfg), "--out", str(out),
                 "--format", "csv"]) == 0
    text = (out / "report.csv").read_text().splitlines()
    assert text[0] == "x,y,value"


@pytest.mark.parametrize("cfg", [
    {"bogus": 1},
    {"params": {"n": 2, "t": 1}},
    {"quadrature": {"radial_pts": 3}},
    {"experiment": {"nope": 1}},
    {"fields": {"h": "1"}},
    {"output": {"where": "x"}},
    {"inject_fault": {"c_scale": 1.1}},
    {"params": {"s": 1.5}},
    {"experiment": {"expect": "maybe"}},
    "[1, 2",
])
def test_malformed_configs_exit_2(tmp_path, cfg, capsys):
    assert main(["trace", "--config", write(tmp_path, cfg)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_file_exit_2(tmp_path):
    assert main(["trace", "--config", str(tmp_path / "absent.json")]) == 2


def test_parse_error_exit_2_without_partial_files(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = {"fields": {"f": "1 + (x1 *"}}
    assert main(["solve", "--config", write(tmp_path, cfg), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "position 9" in err and err.rstrip().endswith("^")
    assert not out.exists()


def test_expressions_validated_before_computation():
    with pytest.raises(ParseError):
        Experiment("solve", {"fields": {"c": "exp("}})
    with pytest.raises(ConfigError):
        Experiment("kernel-eval", {"experiment": {"x": [[0.1, 0.2, 0.3]]}})


def test_zero_forcing_writes_zero_solution(tmp_path):
    out = tmp_path / "sol"
    cfg = {"fields": {"f": "0"}}
    assert main(["solve", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["schema_version"] == 1
    assert all(v == 0.0 for v in sol["values"])
    assert (out / "solution.csv").exists()
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["apriori_ratio"] == 0.0


def test_trace_expectation_sets_exit_code(tmp_path):
    ok = {"fields": {"u": "delta^0.5"}, "experiment": {"expect": "zero"}}
    bad = {"fields": {"u": "delta^0.5"}, "experiment": {"expect": "positive"}}
    assert main(["trace", "--config", write(tmp_path, ok, "a.json")]) == 0
    assert main(["trace", "--config", write(tmp_path, bad, "b.json")]) == 1


def test_properties_fault_injection_exit_1(tmp_path):
    small = {"lemma_samples": 500, "green_samples": 500, "gradient_samples": 500,
             "fd_samples": 20}
    cfg = {"experiment": small, "inject_fault": {"c_ns_scale": 1.1}}
    out = tmp_path / "p"
    assert main(["properties", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    rep = json.loads((out / "report.json").read_text())
    assert any(name.startswith("poisson_normalization") for name in rep["failed"])
    bad = [r for r in rep["results"] if not r["passed"]]
    assert all(r["counterexamples"] for r in bad)
    cfg = {"experiment": small}
    assert main(["properties", "--config", write(tmp_path, cfg, "ok.json"), "--seed", "3"]) == 0


def test_embedding_rejects_endpoint_exponent(tmp_path):
    cfg = {"params": {"n": 2, "s": 0.75, "r": 0.5, "p": 1, "q": 4.0}}
    assert main(["embedding-table", "--config", write(tmp_path, cfg)]) == 2


def test_numerical_failure_exit_3(tmp_path):
    cfg = {"params": {"n": 2, "s": 0.75, "r": 0.5},
           "solver": {"radial_levels": 3, "radial_order": 2, "angular_nodes": 14,
                      "tau_steps": 1},
           "fields": {"f": "1", "b": ["60", "0"], "c": "60"}}
    assert main(["solve", "--config", write(tmp_path, cfg)]) == 3


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_every_command_has_defaults():
    assert set(EXPERIMENT_DEFAULTS) == {"verify-nonuniqueness", "trace", "embedding-table",
                                        "solve", "properties", "kernel-eval"}


def test_render_handles_infinities():
    text = render({"a": float("inf"), "rows": [{"q": float("inf")}]}, "json")
    assert json.loads(text)["a"] == "inf"


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"experiment": {"kernel": "rho", "x": [[0.5, 0]], "y": [[0, 0.5]]}})
    res = subprocess.run([sys.executable, "-m", "fracball", "kernel-eval", "--config", cfg],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["rows"][0]["value"] == pytest.approx(1.125)
