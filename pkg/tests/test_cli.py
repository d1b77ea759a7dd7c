import json

import pytest

from echopanel.cli import build_parser, main

SUBCOMMANDS = ["sweep", "process", "fb", "energy", "grid", "surface", "synth", "dataset", "plot", "report"]


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_every_subcommand_has_help(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        main([cmd, "--help"])
    assert e.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["bogus"])
    assert e.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_grid_plan_default_output(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["grid", "plan"]) == 0
    assert len(json.loads((tmp_path / "grid.json").read_text())["points"]) == 78


def test_grid_fresnel_stdout(capsys):
    assert main(["grid", "fresnel", "--freq", "2000"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["min_minor_diameter_mm"] < res["max_minor_diameter_mm"]


def test_grid_coverage(tmp_path):
    out = tmp_path / "cov.pgm"
    assert main(["grid", "coverage", "--layer", "1", "--freq", "40000", "--resolution", "5", "-o", str(out)]) == 0
    assert out.read_bytes().startswith(b"P5\n")


def test_processing_error_exit_code(tmp_path, capsys):
    rc = main(["process", "--recording", str(tmp_path / "no.f32"), "--sweep", str(tmp_path / "s.f32"),
               "--foam", str(tmp_path / "f.f32"), "-o", str(tmp_path / "ir.f32")])
    assert rc == 1
    assert "echopanel:" in capsys.readouterr().err


def test_surface_gen_needs_seed(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["surface", "gen", "-o", str(tmp_path / "p")])
    assert e.value.code == 2


def test_surface_gen_deterministic(tmp_path, capsys):
    args = ["--seed", "7", "surface", "gen", "--typology", "stretcher_bond", "--resolution", "15"]
    assert main(args + ["-o", str(tmp_path / "0031")]) == 0
    assert "seed=7" in capsys.readouterr().err
    assert main(args + ["-o", str(tmp_path / "b" / "0031")]) == 0
    a = (tmp_path / "0031" / "mesh.obj").read_bytes()
    assert a == (tmp_path / "b" / "0031" / "mesh.obj").read_bytes()
    meta = json.loads((tmp_path / "0031" / "params.json").read_text())
    assert set(meta["sides"]) == {"0031_0", "0031_1"}


def test_surface_adapt(tmp_path, capsys):
    hist = tmp_path / "runs.json"
    hist.write_text(json.dumps({"steps": {"depth": 4.0},
                                "runs": [{"tnce": [1, 1, 1, 1, 1]}, {"tnce": [1, 1, 1, 1, 1]}]}))
    assert main(["surface", "adapt", "--history", str(hist)]) == 0
    assert json.loads(capsys.readouterr().out)["steps"] == {"depth": 8.0}


def test_sweep_and_fb(tmp_path):
    assert main(["sweep", "--duration", "0.05", "-o", str(tmp_path / "s.f32")]) == 0
    assert (tmp_path / "s.json").exists()
    assert main(["fb", "build", "--n", "1024", "-o", str(tmp_path / "fb.json")]) == 0
    assert len(json.loads((tmp_path / "fb.json").read_text())["bands"]) == 5
    assert main(["fb", "plot", "--fb", str(tmp_path / "fb.json"), "-o", str(tmp_path / "fb.svg")]) == 0
    assert main(["fb", "apply", "--ir", str(tmp_path / "s.f32"), "-o", str(tmp_path / "bands")]) == 0
    assert len(list((tmp_path / "bands").glob("*.f32"))) == 5


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds") / "root"
    lim = ["--max-combinations", "40"]
    assert main(["synth", "--panel", "flat", "-o", str(root)] + lim) == 0
    assert main(["synth", "--panel", "flat", "--r", "0.5", "--id", "0015_1", "-o", str(root)] + lim) == 0
    assert main(["synth", "--panel", "flat", "--r", "0.8", "--id", "0012_1", "-o", str(root)] + lim) == 0
    assert main(["synth", "--panel", "absorber", "--id", "0011_1", "-o", str(root)] + lim) == 0
    assert main(["--threads", "2", "dataset", "process", "--root", str(root)]) == 0
    assert main(["dataset", "profile", "--root", str(root)]) == 0
    return root


def test_dataset_ls_and_verify(dataset, capsys):
    assert main(["dataset", "ls", "--root", str(dataset)]) == 0
    out = capsys.readouterr().out
    assert "Flat,40,40" in out and "Foam,40,40" in out
    assert main(["dataset", "verify", "--root", str(dataset)]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]


def test_dataset_verify_fails_nonzero(tmp_path, capsys):
    assert main(["dataset", "verify", "--root", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().out)["ok"] is False


def test_dataset_augment(dataset, capsys):
    assert main(["dataset", "augment", "--root", str(dataset), "--panel", "0015_1"]) == 0
    views = json.loads(capsys.readouterr().out)["views"]
    assert len(views) == 8 and len(views[0]["mapping"]) == 40


def test_flat_grid_is_black(dataset, tmp_path):
    out = tmp_path / "grid.svg"
    assert main(["plot", "grid", "--root", str(dataset), "--panel", "Flat", "--mic", "1",
                 "--floor", "-20", "--ceil", "6", "-o", str(out)]) == 0
    svg = out.read_text()
    cells = [l for l in svg.splitlines() if "data-db" in l]
    assert cells and all('fill="#000000"' in l and 'data-db="0.00"' in l for l in cells)
    assert svg.count(">M<") == 5
    again = tmp_path / "grid2.svg"
    main(["plot", "grid", "--root", str(dataset), "--panel", "Flat", "--mic", "1", "-o", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_report_compare(dataset, tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    assert main(["report", "compare", "--root", str(dataset), "--panels", "0015_1,0012_1",
                 "--percentile", "90", "-o", str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed[0].split(",") == ["panel", "2.5 kHz 90%", "5 kHz 90%", "10 kHz 90%", "20 kHz 90%",
                                     "40 kHz 90%", "Total 90%"]
    total_05 = float(printed[1].split(",")[-1])
    assert total_05 == pytest.approx(-6.0, abs=0.1)
    full = out.read_text().splitlines()
    assert float(full[1].split(",")[-1]) == pytest.approx(total_05, abs=0.05)


def test_absorber_panel_is_silent(dataset):
    from echopanel import store
    rec = store.load_panel(dataset, "0011_1")
    assert all(v.sum() <= 1e-6 for v in rec.profiles.values())


def test_energy_command(dataset, tmp_path):
    out = tmp_path / "e.csv"
    panels = dataset / "panels"
    assert main(["energy", "--panel", str(panels / "0015_1"), "--flat", str(panels / "Flat"), "-o", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0].startswith("combination,") and len(rows) == 41


def test_parser_global_flags_anywhere():
    a = build_parser().parse_args(["--seed", "3", "grid", "plan"])
    b = build_parser().parse_args(["grid", "plan", "--seed", "3"])
    assert a.seed == b.seed == 3
