import json
from types import SimpleNamespace

import numpy as np
import pytest

from coherent_collapse import field_lattice as fl
from coherent_collapse.harness import (ConfigError, PRESETS, load_preset, parse_config,
                                       preset_names, run, summarize)
from coherent_collapse.harness.cli import main
from coherent_collapse.harness.runner import parse_field_initial

SMALL_OSC = """
[run]
experiment = oscillator
seed = 4
n_paths = 3
T = 0.2
dt = 0.01
observables = H, N, Va, a   # a is complex

[oscillator]
omega = 1.0
lam = 1.0
n_max = 40
branches = 0, 4
weights = 1, 1
"""

# too short a horizon for any branch to be reached: the Born audit must fail
UNREDUCED_OSC = SMALL_OSC.replace("n_paths = 3", "n_paths = 100").replace(
    "T = 0.2", "T = 0.02")


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# --- configuration -----------------------------------------------------------

def test_parse_small_config():
    cfg = parse_config(SMALL_OSC)
    assert cfg.experiment == "oscillator" and cfg.seed == 4
    assert cfg.oscillator.branches == (0, 4)
    assert cfg.observables == ("H", "N", "Va", "a")


@pytest.mark.parametrize("edit, path", [
    (("lam = 1.0", "lam = fast"), "oscillator.lam"),
    (("n_paths = 3", "n_paths = 0"), "run.n_paths"),
    (("seed = 4\n", ""), "run.seed"),
    (("dt = 0.01", "dt = 0.03"), "run.dt"),
    (("observables = H, N, Va, a", "observables = H, Q"), "run.observables"),
    (("n_max = 40", "n_max = 40\ncolour = red"), "oscillator.colour"),
    (("weights = 1, 1", "weights = 1"), "oscillator.weights"),
    (("experiment = oscillator", "experiment = laser"), "run.experiment"),
])
def test_config_errors_name_the_field(edit, path):
    with pytest.raises(ConfigError) as info:
        parse_config(SMALL_OSC.replace(*edit))
    assert info.value.path == path


def test_unknown_section_and_missing_run():
    with pytest.raises(ConfigError) as info:
        parse_config(SMALL_OSC + "\n[extras]\nx = 1\n")
    assert info.value.path == "extras"
    with pytest.raises(ConfigError):
        parse_config("[oscillator]\nomega = 1\n")


def test_overrides():
    cfg = parse_config(SMALL_OSC).with_overrides(seed=9, n_paths=2, workers=2)
    assert (cfg.seed, cfg.n_paths, cfg.workers) == (9, 2, 2)
    with pytest.raises(ConfigError):
        parse_config(SMALL_OSC).with_overrides(n_paths=0)


def test_field_initial_grammar():
    c = fl.LatticeConfig(L=2, modes=(0, 1), n_max=4)
    vac = parse_field_initial("vacuum", c)
    assert vac.amplitudes[0] == 1
    mix = parse_field_initial("fock: 0, 0 & fock: 2, 0", c)
    assert abs(mix.amplitudes[0]) ** 2 == pytest.approx(0.5)
    coh = parse_field_initial("coherent: 0.5, 0.1j", c)
    assert coh.is_normalized
    for bad in ("fock: 1", "fock: 9, 0", "squeezed: 1, 1", ""):
        with pytest.raises(ConfigError):
            parse_field_initial(bad, c)


def test_every_preset_parses():
    assert set(preset_names()) == set(PRESETS)
    for name in preset_names():
        cfg = load_preset(name)
        assert cfg.name == name
    with pytest.raises(KeyError):
        load_preset("nope")


# --- summaries ---------------------------------------------------------------

def rec(t, **series):
    return SimpleNamespace(times=np.asarray(t, float),
                           series={k: np.asarray(v) for k, v in series.items()})


def test_single_record_has_no_standard_error():
    s = summarize([rec([0, 1], x=[1.0, 2.0])])
    np.testing.assert_array_equal(s.means["x"], [1, 2])
    assert s.standard_errors["x"] is None
    assert json.loads(s.to_json())["standard_errors"]["x"] is None


def test_identical_records_have_zero_error():
    s = summarize([rec([0, 1], x=[1.0, 2.0])] * 4)
    np.testing.assert_array_equal(s.standard_errors["x"], 0)


def test_known_mean_and_complex_split():
    rs = [rec([0, 1], x=[v, -v], z=[v * 1j, v]) for v in (1.0, 2.0, 3.0)]
    s = summarize(rs)
    np.testing.assert_allclose(s.means["x"], [2, -2])
    np.testing.assert_allclose(s.standard_errors["x"], [1 / np.sqrt(3)] * 2)
    np.testing.assert_allclose(s.means["z.im"], [2, 0])
    assert "z" not in s.means


def test_misaligned_grids_are_an_error():
    with pytest.raises(ValueError):
        summarize([rec([0, 1], x=[1, 2]), rec([0, 2], x=[1, 2])])
    with pytest.raises(ValueError):
        summarize([])


# --- runs and artifacts ------------------------------------------------------

def artifacts(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_run_writes_expected_artifacts(tmp_path):
    summary = run(parse_config(SMALL_OSC), tmp_path / "out")
    files = artifacts(tmp_path / "out")
    assert "summary.json" in files
    assert sorted(k for k in files if k.startswith("trajectories/")) == [
        f"trajectories/path_{i:05d}.csv" for i in range(3)]
    header = files["trajectories/path_00000.csv"].decode().splitlines()[0]
    assert header == "t,H,N,Va,a.re,a.im"
    assert any(k.startswith("figures/") and k.endswith(".svg") for k in files)
    data = json.loads(files["summary.json"])
    assert data["verdict"] == summary.verdict
    assert data["completed_paths"] == 3


def test_reruns_are_byte_identical_across_worker_counts(tmp_path):
    cfg = parse_config(SMALL_OSC)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    run(cfg.with_overrides(workers=2), tmp_path / "c")
    a, b, c = (artifacts(tmp_path / k) for k in "abc")
    assert a == b == c


def test_seed_changes_trajectories(tmp_path):
    cfg = parse_config(SMALL_OSC)
    run(cfg, tmp_path / "a", figures=False)
    run(cfg.with_overrides(seed=5), tmp_path / "b", figures=False)
    assert artifacts(tmp_path / "a") != artifacts(tmp_path / "b")


# --- command line ------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, SMALL_OSC)
    assert main(["run", "--config", good, "--out", str(tmp_path / "o"), "--no-figures"]) == 0
    assert main(["audit", "--config", good]) == 0
    out = capsys.readouterr().out
    assert "overall:" in out
    bad = write(tmp_path, SMALL_OSC.replace("n_paths = 3", "n_paths = 0"), "bad.ini")
    assert main(["run", "--config", bad]) == 2
    assert "run.n_paths" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["audit", "--config", good, "--paths", "0"]) == 2
    assert main(["repro", "no-such-preset"]) == 2
    assert main(["frobnicate"]) == 2


def test_cli_reports_audit_failure(tmp_path, capsys):
    cfg = write(tmp_path, UNREDUCED_OSC)
    assert main(["audit", "--config", cfg, "--workers", "2"]) == 1
    assert "Born-rule frequencies: FAIL" in capsys.readouterr().out


def test_audit_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, SMALL_OSC)
    before = set(tmp_path.rglob("*"))
    assert main(["audit", "--config", cfg]) == 0
    assert set(tmp_path.rglob("*")) == before


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in ("fig1-fig2", "born-100", "foliation", "convergence"):
        assert name in out


def test_fig1_fig2_preset_reproduces_energy_split(tmp_path):
    summary = run(load_preset("fig1-fig2"), tmp_path / "fig")
    final = [r for r in (tmp_path / "fig" / "trajectories").iterdir()]
    assert len(final) == 5
    energies = []
    for path in final:
        lines = path.read_text().splitlines()
        cols = lines[0].split(",")
        energies.append(float(lines[-1].split(",")[cols.index("H")]))
    # every path ends near one branch: the vacuum (0.5) or a decayed |alpha=8>
    top = 0.5 + 64 * np.exp(-0.25 * 8.0)
    for e in energies:
        assert min(abs(e - 0.5), abs(e - top)) < 0.05 * top
    assert summary.verdict != "fail"
    assert (tmp_path / "fig" / "figures").is_dir()
