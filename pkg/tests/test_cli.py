import csv
import filecmp

import pytest

from gpata import cli
from gpata.cli import RunSpec, cell_name, main, parse_sweep, run
from gpata.scenario import ConfigError, dump_scenario, reference_scenario


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "ref.yaml"
    dump_scenario(reference_scenario().with_cycles(4), path)
    return str(path)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_two_by_two_grid_writes_four_sets_and_a_summary(scenario_file, tmp_path):
    assert main(["--scenario", scenario_file, "--scheme", "gpata", "--scheme", "gmxr", "--seed", "1", "--seed", "2",
                 "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert len(files) == 4 * 4 + 1
    assert "summary.csv" in files
    assert {f.rsplit("_", 1)[0] for f in files if f != "summary.csv"} == {
        "gpata_seed1", "gpata_seed2", "gmxr_seed1", "gmxr_seed2"}
    assert len(rows(tmp_path / "summary.csv")) == 4


def test_deadline_sweep_gives_one_point_per_value(scenario_file, tmp_path):
    assert main(["--scenario", scenario_file, "--scheme", "gpata", "--scheme", "random",
                 "--sweep", "deadline=0.5,1,2,4,8", "--out", str(tmp_path)]) == 0
    summary = rows(tmp_path / "summary.csv")
    for scheme in ("gpata", "random"):
        pts = [r for r in summary if r["scheme"] == scheme]
        assert [r["value"] for r in pts] == ["0.5", "1", "2", "4", "8"]


def test_same_spec_twice_is_byte_identical(scenario_file, tmp_path):
    args = ["--scenario", scenario_file, "--scheme", "gpata", "--scheme", "tda", "--seed", "3",
            "--sweep", "privacy=high,low"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == [] and len(match) == len(names)


def test_cell_names_are_pure():
    assert cell_name("gpata", 4) == "gpata_seed4"
    assert cell_name("cog", 1, "deadline", "2.5") == "cog_seed1_deadline-2.5"


def test_validate_mode(scenario_file, capsys):
    assert main(["--validate", "--scenario", scenario_file]) == 0
    assert "ok" in capsys.readouterr().out


def test_bad_scenario_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("servers: []\n")
    assert main(["--validate", "--scenario", str(bad)]) != 0
    assert "hierarchy" in capsys.readouterr().err


@pytest.mark.parametrize("sweep", ["deadline=-1", "privacy=extreme", "devices=x", "colour=red", "deadline"])
def test_bad_sweeps_are_rejected(sweep):
    with pytest.raises(ConfigError):
        axis, values = parse_sweep(sweep)
        RunSpec(None, ["gpata"], [0], axis=axis, values=values)


def test_cell_failure_sets_exit_status_and_keeps_other_outputs(scenario_file, tmp_path, monkeypatch):
    real = cli.run_scheme

    def flaky(cfg, scheme):
        if scheme == "cog":
            raise RuntimeError("boom")
        return real(cfg, scheme)

    monkeypatch.setattr(cli, "run_scheme", flaky)
    spec = RunSpec(scenario_file, ["gpata", "cog"], [0], str(tmp_path))
    assert run(spec) == 1
    assert (tmp_path / "gpata_seed0_tasks.csv").exists()
    assert len(rows(tmp_path / "summary.csv")) == 1


def test_overrides_reach_the_run(scenario_file, tmp_path):
    assert main(["--scenario", scenario_file, "--cycles", "2", "--estimation", "anchor", "--loss-pairing", "swapped",
                 "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "summary.csv")[0]["cycles"] == "2"


def test_write_reference(tmp_path):
    path = tmp_path / "ref.yaml"
    assert main(["--write-reference", str(path)]) == 0
    assert main(["--validate", "--scenario", str(path)]) == 0
