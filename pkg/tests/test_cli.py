import json
import subprocess
import sys

from cli_cases import run_all
from universality_lab.cli import main, parse_config


def test_parse_classify():
    cfg = parse_config(["classify", "--symbol", "blaschke:0.6", "--guess", "0.1,0.0"])
    assert cfg.command == "classify"
    assert cfg.params["guess"] == 0.1 + 0j
    assert cfg.params["symbol"].alpha == 0.6
    assert cfg.raw["symbol"]["kind"] == "blaschke"


def test_defaults_file_and_flag_precedence(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"res": 128, "clearance": 0.01}))
    cfg = parse_config(["render-g0", "--config", str(path), "--res", "256"])
    assert cfg.params["res"] == 256           # flag beats file
    assert cfg.params["clearance"] == 0.01    # file beats default
    assert cfg.params["alpha"] == 0.6 + 0j    # default
    assert parse_config(["render-g0"]).params["res"] == 512


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    err = capsys.readouterr().err
    assert "usage" in err.lower()
    assert main(["classify", "--bogus", "1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["classify", "--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"colour": "red"}))
    assert main(["classify", "--config", str(unknown)]) == 2
    assert "colour" in capsys.readouterr().err
    assert main(["boxdim"]) == 2  # --mask is required


def test_domain_error_is_json(tmp_path, capsys):
    cfg = tmp_path / "fin.json"
    cfg.write_text(json.dumps({"symbol": "poly:0;0;1", "guess": "0.1,0",
                               "finite": {"E": [[0.3, 0], [-0.3, 0]], "vectors": [[[0, 0], [1, 0]]],
                                          "eps": 1e-6}}))
    assert main(["universal-build", "--config", str(cfg), "--out", str(tmp_path / "o.json")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "injectivity_violated" and err["pair"] == [0, 1] and err["n"] == 1
    assert not (tmp_path / "o.json").exists()


def test_unwritable_output_exits_3(tmp_path):
    assert main(["classify", "--out", str(tmp_path / "missing" / "x.json")]) == 3


def test_report_embeds_config(tmp_path):
    out = tmp_path / "c.json"
    assert main(["classify", "--guess", "0.1,0", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["class"] == "attracting"
    assert rep["config"]["command"] == "classify" and rep["config"]["guess"] == [0.1, 0.0]


def test_every_command_is_deterministic(tmp_path):
    codes_a, files_a = run_all(str(tmp_path / "a"))
    codes_b, files_b = run_all(str(tmp_path / "b"))
    assert all(code == 0 for _, code in codes_a), codes_a
    assert files_a == files_b
    stats = files_a["g0.csv"].decode().splitlines()
    assert stats[0] == "basin_pixels,complement_pixels,complement_fraction,box_dimension"


def test_thread_count_does_not_change_render(tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("UNIVERSALITY_LAB_THREADS", threads)
        out = tmp_path / f"g{threads}.pgm"
        assert main(["render-g0", "--res", "96", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    run = subprocess.run([sys.executable, "-m", "universality_lab", "classify", "--symbol", "poly:0;0;1",
                          "--guess", "0.2,0"], capture_output=True, text=True, check=False)
    assert run.returncode == 0
    assert json.loads(run.stdout)["class"] == "superattracting"
