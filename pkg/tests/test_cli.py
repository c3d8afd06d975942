import json

from onlinecover.cli import main


def test_gen_to_file_and_frac(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert main(["gen", "--m", "3", "--n", "3", "--seed", "4", "--out", str(inst)]) == 0
    assert json.loads(inst.read_text())["n"] == 3
    out = tmp_path / "run"
    assert main(["frac", "--instance", str(inst), "--out", str(out)]) == 0
    assert (out / "report.json").exists() and (out / "fractional.csv").exists()
    assert main(["report", str(out / "report.json")]) == 0
    assert "cost_le_phi" in capsys.readouterr().out


def test_round_lp_stdout(capsys):
    assert main(["round-lp", "--m", "4", "--n", "3", "--trials", "20", "--alpha", "4"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["config"]["trials"] == 20


def test_other_subcommands(tmp_path):
    assert main(["round-l1", "--trials", "10", "--alpha", "3", "--out", str(tmp_path / "a")]) == 0
    assert main(["ocg", "--kind", "lp-violation", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "duals.csv").exists()
    assert main(["adversary", "--d", "4", "--r", "4", "--out", str(tmp_path / "c")]) == 0
    assert main(["brute", "--m", "2", "--n", "3", "--out", str(tmp_path / "d")]) == 0
    assert main(["frac", "--doubling", "--out", str(tmp_path / "e")]) == 0


def test_usage_error(tmp_path, capsys):
    assert main(["frac", "--instance", str(tmp_path / "none.json")]) == 2
    assert "error" in capsys.readouterr().err
