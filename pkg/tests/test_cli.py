import csv
import json

import pytest

from biofilm_inverse.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_convergence_table(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    code, stdout, _ = run(capsys, "convergence", "--case", "example1", "--meshes", "0.1,0.05,0.01", "--out", str(out))
    assert code == 0 and str(out) in stdout
    table = rows(out)
    assert list(table[0]) == ["dx", "dt", "errS", "errM", "order"]
    assert float(table[-1]["errM"]) == pytest.approx(4.52e-5, rel=0.2)


def test_synth_exact(tmp_path, capsys):
    out = tmp_path / "m.csv"
    code, _, _ = run(capsys, "synth", "--case", "example1", "--mesh", "0.01", "--exact", "--out", str(out))
    assert code == 0
    data = rows(out)
    assert float(data[0]["q0"]) == -1.0 and float(data[0]["EM"]) == pytest.approx(1 / 6, abs=1e-15)
    assert len(data) == 101


def test_synth_noise_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(capsys, "synth", "--mesh", "0.1", "--noise", "0.01", "--seed", "4", "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_bad_grid_exit_2(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[forward]\nI = 2\nN = 10\n")
    code, _, err = run(capsys, "forward", "--config", str(cfg), "--out", str(tmp_path / "f.csv"))
    assert code == 2
    payload = json.loads(err)
    assert payload["exit_code"] == 2 and "I must be" in payload["message"]


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[forward]\nmesh = 0.1\nflavour = flux\n")
    assert run(capsys, "forward", "--config", str(cfg))[0] == 2


def test_missing_config_file(capsys):
    assert run(capsys, "forward", "--config", "/nonexistent/run.ini")[0] == 2


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    out = tmp_path / "f.csv"
    cfg.write_text(f"[DEFAULT]\ncase = example1\n[forward]\nmesh = 0.5\nout = {out}\n")
    assert run(capsys, "forward", "--config", str(cfg), "--mesh", "0.25")[0] == 0
    data = rows(out)
    assert list(data[0]) == ["x", "t", "S", "M"]
    assert len(data) == 5 * 5


def test_recover_stated_points_assumption_failure(tmp_path, capsys):
    code, _, err = run(capsys, "recover", "--case", "example2", "--stated-points", "--out", str(tmp_path / "r.json"))
    assert code == 4
    assert json.loads(err)["clause"] == "ii"
    assert not (tmp_path / "r.json").exists()


def test_recover_with_points_file(tmp_path, capsys):
    pts = {"p0": [0.5, 1.0], "p1": [0.5, 0.5], "p2": [0.5, 0.75], "t3": 0.5, "t4": 1.0,
           "p5": [0.5, 1 / 3], "p6": [0.5, 0.5], "p7": [0.5, 2 / 3]}
    pfile = tmp_path / "pts.json"
    pfile.write_text(json.dumps(pts))
    out = tmp_path / "r.json"
    assert run(capsys, "recover", "--case", "example2", "--points", str(pfile), "--out", str(out))[0] == 0
    report = json.loads(out.read_text())
    assert report["values"]["d1"] == pytest.approx(1.0) and report["values"]["a"] == pytest.approx(0.0, abs=1e-10)
    assert report["all_admissible"] and report["probe"] == "analytic"


def test_recover_by_scan(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run(capsys, "recover", "--case", "example1", "--lattice", "21,21", "--out", str(out))[0] == 0
    assert json.loads(out.read_text())["values"]["b"] == pytest.approx(2.0, abs=1e-6)


def test_scan_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, stdout, _ = run(capsys, "scan", "--mesh", "0.05", "--counts", "9,7", "--out", str(out))
    assert code == 0 and "argmin" in stdout
    assert len(rows(out)) == 63


def test_fit_command_idempotent(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name / "fit.json"
        code, _, _ = run(capsys, "fit", "--mesh", "0.1", "--guess", "a=2,b=1", "--out", str(out))
        assert code == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    trace = rows(tmp_path / "a" / "fit_trace.csv")
    assert list(trace[0]) == ["iter", "J"]
    report = json.loads(outs[0].read_text())
    assert report["iterations"] == len(trace) - 1


def test_fit_with_measurement_file_and_reduction(tmp_path, capsys):
    m = tmp_path / "m.csv"
    assert run(capsys, "synth", "--mesh", "0.1", "--out", str(m))[0] == 0
    out = tmp_path / "fit.json"
    code, _, _ = run(capsys, "fit", "--mesh", "0.1", "--measurements", str(m), "--unknowns", "K3,K4",
                     "--reduce-k2", "--guess", "K3=0.8,K4=1.2", "--flavor", "flux+biomass", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["params"]["K3"] == pytest.approx(1.0, abs=1e-3) and rep["settings"]["reduce_k2"]


def test_fit_missing_guess(capsys):
    assert run(capsys, "fit", "--mesh", "0.1", "--unknowns", "a,b,d2", "--guess", "a=1,b=2")[0] == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    code, _, err = run(capsys, "forward", "--mesh", "0.1", "--params", "d2=100000,a=0", "--out",
                       str(tmp_path / "f.csv"))
    assert code == 3
    assert "error" in json.loads(err)


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        main(["fit", "--help"])
    out = capsys.readouterr().out
    for flag in ("--unknowns", "--guess", "--flavor", "--reduce-k2", "--noise", "--lower", "--upper"):
        assert flag in out


def test_convergence_dt_ratio(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert run(capsys, "convergence", "--case", "example2", "--meshes", "0.1,0.05", "--dt-ratio", "0.5",
               "--out", str(out))[0] == 0
    table = rows(out)
    assert float(table[0]["dt"]) == pytest.approx(0.05)
    assert float(table[1]["order"]) > 1.7


def test_reproduction_script_scenarios_parse(tmp_path):
    import importlib.util
    from pathlib import Path

    from biofilm_inverse.cli import build_parser, merge_config

    path = Path(__file__).resolve().parent.parent / "scripts" / "reproduce_all.py"
    spec = importlib.util.spec_from_file_location("reproduce_all", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    parser = build_parser()
    names = []
    for name, argv in mod.scenarios(str(tmp_path)):
        merge_config(parser.parse_args(argv), parser)
        names.append(name)
    assert any("convergence" in n for n in names) and any("reduced" in n for n in names)
    assert sum("eight-parameter" in n for n in names) == 4
