import json

import pytest

from isl.cli import ExperimentConfig, load_config, main, parse_config_text
from isl.errors import ValidationError


def write_cfg(path, text):
    path.write_text(text)
    return path


def test_parse_config_text():
    d = parse_config_text("# header\npotential = zero  # inline\nout = res\nx-step = 0.02\nexact = true\n")
    assert d == {"potential": "zero", "output_dir": "res", "x_step": 0.02, "exact": True}
    with pytest.raises(ValidationError):
        parse_config_text("bogus = 1\n")
    with pytest.raises(ValidationError):
        parse_config_text("x_step 0.1\n")


def test_flags_override_file_and_paths_are_relative(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", "potential = q.csv\nseed = 3\nx_max = 1.5\n")
    c = load_config("roundtrip", cfg, {"seed": 7, "x_max": None})
    assert c.seed == 7 and c.x_max == 1.5
    assert c.potential == str(tmp_path / "q.csv")


def test_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(command="roundtrip", potential="zero", x_step=-1).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(command="roundtrip").validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(command="roundtrip", potential="zero", methods="marchenko,nope").validate()


def test_zero_roundtrip(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", "potential = zero\nk_max = 20\n")
    assert main(["roundtrip", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "roundtrip.json").read_text())
    assert rep["command"] == "roundtrip"
    assert rep["config"]["potential"] == "zero" and rep["config"]["k_max"] == 20
    for m in ("marchenko", "gl", "krein"):
        assert rep["result"]["methods"][m]["sup_error"] <= 1e-8
    assert (tmp_path / "o" / "q_gl.csv").is_file()


def test_krein_gate_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.cfg", "potential = square:-4:1\nx_max = 1\nk_max = 20\n")
    assert main(["invert-krein", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "ind S = 0" in err and "bound state" in err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # a measure cut at Λ = 4 leaves a large tail of the L integral
    cfg = write_cfg(tmp_path / "c.cfg", "potential = square:1:1\nlambda_max = 4\nx_max = 1\n")
    assert main(["invert-gl", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "TailTooLarge" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", "potential = zero\nwhat = 1\n")
    assert main(["roundtrip", "--config", str(cfg)]) == 2
    assert main(["forward", "--config", str(tmp_path / "missing.cfg")]) == 2
    cfg = write_cfg(tmp_path / "d.cfg", "potential = nowhere.csv\n")
    assert main(["forward", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_forward_and_resonances(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", "potential = square:-4:1\nk_max = 20\nk_step = 0.05\n")
    out = tmp_path / "o"
    assert main(["forward", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "forward.json").read_text())["result"]
    assert rep["J"] == 1 and rep["index"] == rep["index_expected"] == -2
    assert main(["resonances", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "resonances.json").read_text())["result"]
    assert rep["count_by_argument_principle"] == len(rep["zeros"])


@pytest.mark.parametrize("command,text", [
    ("ambiguity", "budget = 600\n"),
    ("born-demo", "potential = square:1:1\ncutoffs = 5,10,20\n"),
])
def test_deterministic_reports(tmp_path, command, text):
    cfg = write_cfg(tmp_path / "c.cfg", text + "seed = 5\n")
    out = tmp_path / "o"
    blobs = []
    for _ in range(2):
        assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
        blobs.append((out / f"{command}.json").read_bytes())
    assert blobs[0] == blobs[1]
