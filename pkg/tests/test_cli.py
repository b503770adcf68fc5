import json
import subprocess
import sys

import pytest

from halfplane.cli import format_result, load_config, main, sweep
from halfplane.experiments import ExperimentConfig, parse_list, run
from halfplane.weights import DomainError


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_parse_list():
    assert parse_list("1,2.5,-3") == [1.0, 2.5, -3.0]
    assert parse_list("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_list("") == []


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nexperiment = hilbert-norm\np = 3\nbeta = 0.5\n")
    cfg = load_config(str(path), ["beta=1"], "hilbert-norm", seed=7)
    assert (cfg.p, cfg.beta, cfg.seed) == (3.0, 1.0, 7)


@pytest.mark.parametrize("data, field", [
    ({"experiment": "forelli-rudin", "p": "x"}, "p"),
    ({"experiment": "forelli-rudin", "bogus": "1"}, "bogus"),
    ({"experiment": "nope"}, "experiment"),
    ({"experiment": "forelli-rudin", "trend": "maybe"}, "trend"),
    ({"experiment": "forelli-rudin", "z_points": "1+"}, "z_points"),
])
def test_config_errors_name_the_field(data, field):
    with pytest.raises(DomainError, match=f"^{field}:"):
        ExperimentConfig.from_mapping(data)


def test_experiment_mismatch(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("experiment = hilbert-norm\n")
    with pytest.raises(DomainError, match="experiment"):
        load_config(str(path), [], "forelli-rudin")


def test_forelli_output(capsys):
    code, out, _ = run_cli(capsys, "forelli-rudin")
    assert code == 0
    assert "# experiment = forelli-rudin" in out and "# passed = true" in out
    rows = table(out)
    header = rows[0].split(",")
    i = header.index("rel_err")
    assert len(rows) == 1 + 125
    assert max(float(r.split(",")[i]) for r in rows[1:]) <= 1e-6


def test_threshold_map_example(capsys):
    code, out, _ = run_cli(capsys, "threshold-map", "--set", "p=2", "--set", "alpha=0")
    assert code == 0
    rows = table(out)
    hdr = rows[0].split(",")
    for r in rows[1:]:
        cells = dict(zip(hdr, r.split(",")))
        beta = float(cells["beta"])
        assert cells["predicate"] == ("true" if 1 < 2 * (beta + 1) else "false")


def test_exit_codes(capsys, tmp_path):
    assert run_cli(capsys, "lattice-audit")[0] == 1
    assert run_cli(capsys, "lattice-audit", "--set", "bounds=consistent")[0] == 0
    code, _, err = run_cli(capsys, "forelli-rudin", "--set", "p=abc")
    assert code == 2 and "p:" in err
    assert run_cli(capsys, "forelli-rudin", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-experiment"])
    assert exc.value.code == 2


def test_out_dir(capsys, tmp_path):
    assert run_cli(capsys, "weights-check", "--out", str(tmp_path), "--format", "json")[0] == 0
    doc = json.loads((tmp_path / "weights-check.json").read_text())
    assert doc["passed"] is True and doc["config"]["experiment"] == "weights-check"
    assert doc["rows"]


def test_json_handles_nonfinite(capsys):
    code, out, _ = run_cli(capsys, "threshold-map", "--format", "json")
    doc = json.loads(out)
    assert doc["summary"]["misclassified"] == 0
    assert any(r["norm_estimate"] == "nan" for r in doc["rows"])


def test_byte_identical_with_seed(capsys):
    a = run_cli(capsys, "reconstruct", "--seed", "3")[1]
    b = run_cli(capsys, "reconstruct", "--seed", "3")[1]
    c = run_cli(capsys, "reconstruct", "--seed", "4")[1]
    assert a == b
    assert a != c


def test_sweep_order_and_workers(capsys):
    argv = ["sweep", "forelli-rudin", "--axis", "k", "--values", "1,-1,0",
            "--set", "a_values=1,2", "--set", "x_values=1", "--set", "beta_values=0"]
    code, serial, _ = run_cli(capsys, *argv)
    assert code == 0
    rows = table(serial)
    assert rows[0].startswith("k,")
    assert [r.split(",")[0] for r in rows[1:]] == ["1.0"] * 2 + ["-1.0"] * 2 + ["0.0"] * 2
    assert run_cli(capsys, *argv, "--workers", "2")[1] == serial


def test_sweep_range_and_empty(capsys):
    code, out, _ = run_cli(capsys, "sweep", "threshold-map", "--axis", "p", "--values", "2:3:1")
    assert code == 0 and "# sweep_values = 2.0,3.0" in out
    code, out, _ = run_cli(capsys, "sweep", "threshold-map", "--axis", "p", "--values", "")
    assert code == 0 and len(table(out)) == 0


def test_sweep_rejects_unknown_axis():
    with pytest.raises(DomainError):
        sweep(ExperimentConfig("forelli-rudin"), "bogus", ["1"])


def test_format_result_echoes_full_config():
    cfg = ExperimentConfig("weights-check")
    text = format_result(cfg, run(cfg))
    for key in cfg.to_dict():
        assert f"# {key} = " in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "halfplane.cli", "weights-check"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "# passed = true" in proc.stdout
