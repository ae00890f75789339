import math

import pytest

from otfs_sensing.cli import main
from otfs_sensing.config import ExperimentConfig, config_from_dict, load_config
from otfs_sensing.errors import ConfigError


def test_presets_load():
    desk, paper = load_config("desk"), load_config("paper")
    assert (desk.comm.M, desk.comm.N, desk.comm.A, desk.M_g, desk.radar.B) == (64, 8, 8, 8, 8)
    assert (paper.comm.M, paper.comm.N, paper.comm.A, paper.M_g) == (256, 14, 32, 20)
    assert desk.processing.leakage_margin_db is None
    assert desk.plain_k_max == 8


def test_partial_file_keeps_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("estimator: {rho: 3}\nprocessing: {cfar2d: {pfa: 1.0e-4}, leakage_margin_db: 10}\n")
    cfg = load_config(path)
    assert cfg.estimator.rho == 3.0 and cfg.processing.cfar2d.pfa == 1e-4
    assert cfg.processing.cfar2d.train == 8 and cfg.processing.leakage_margin_db == 10.0
    assert cfg.comm == ExperimentConfig().comm


@pytest.mark.parametrize("doc", [
    {"comm": {"Q": 1}},
    {"bogus": {}},
    {"layout": {"eta": 0.2, "x": 1}},
    {"estimator": {"rho": 0.5}},
    {"experiment": {"scenes": 0}},
    {"comm": {"M": 64.5}},
    {"processing": {"clutter_removal": "yes"}},
    {"layout": {"eta": 0.001}},
])
def test_bad_configs_rejected(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.yaml")]) != 0
    assert "config file not found" in capsys.readouterr().err


def test_unparseable_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("comm: [1, 2\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "cannot parse" in capsys.readouterr().err


def test_psi_check_output(capsys):
    assert main(["psi-check"]) == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if "max deviation" in ln]
    assert len(lines) == 2
    assert lines[0].rstrip().endswith("FAIL (tol 1e-06)")
    assert lines[1].rstrip().endswith("PASS (tol 1e-06)")
    dev = float(lines[1].split("max deviation")[1].split()[0])
    assert dev <= 1e-6


def test_psi_dump(tmp_path, capsys):
    path = tmp_path / "psi.bin"
    assert main(["psi-check", "--eta", "0.1", "--dump", str(path)]) == 0
    out = capsys.readouterr().out
    rows, cols = 6 * 8, 8 * 8 * 8  # M_p = 6 rows of N = 8; A * M_g * N columns
    assert f"{rows}x{cols}" in out and path.stat().st_size == rows * cols * 8


def test_seed_twice_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--seed", "7", "--scenes", "3", "--no-timing", "--out", str(out)]) == 0
        outs.append(((out / "scenes.csv").read_text(), (out / "aggregate.csv").read_text()))
    assert outs[0] == outs[1]
    assert outs[0][1].count("\n") == 4  # header + three estimators


def test_sweep_with_threads_and_support_noise(tmp_path):
    args = ["sweep-snr", "--scenes", "3", "--no-timing", "--support-noise", "0.5"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "s")]) == 0
    assert main(args + ["--threads", "2", "--out", str(tmp_path / "p")]) == 0
    for name in ("scenes.csv", "aggregate.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_radar_debug_files(tmp_path, capsys):
    out = tmp_path / "rd"
    assert main(["radar-debug", "--scene-id", "2", "--out", str(out)]) == 0
    assert "path recall" in capsys.readouterr().out
    for name in ("range_angle.csv", "peaks.csv", "support.csv"):
        assert (out / name).is_file()
    assert any(p.name.startswith("doppler_r") for p in out.iterdir())
    header = (out / "peaks.csv").read_text().splitlines()[0]
    assert header == "tau_s,v_mps,cos_theta,magnitude"


def test_scene_dump(tmp_path, capsys):
    assert main(["scene-dump", "--scene-id", "4"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# scene 4, seed 0") and "comm_paths:" in text
    dest = tmp_path / "scene.yaml"
    assert main(["scene-dump", "--scene-id", "4", "--out", str(dest)]) == 0
    assert dest.read_text() == text


def test_aggregate_values_are_parseable(tmp_path):
    out = tmp_path / "r"
    assert main(["run", "--scenes", "2", "--no-timing", "--out", str(out)]) == 0
    for line in (out / "aggregate.csv").read_text().splitlines()[1:]:
        assert math.isfinite(float(line.split(",")[5]))
