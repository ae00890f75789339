import dataclasses

import numpy as np
import pytest
import yaml
from scipy.constants import c

from otfs_sensing.config import load_config
from otfs_sensing.errors import ConfigError
from otfs_sensing.radar import clutter_removal, synthesize_cube
from otfs_sensing.scenario import (Scene, ScenarioConfig, check_scene, comm_paths, radar_paths,
                                   sample_scene, sample_valid_scene, scene_to_text)

DESK = load_config("desk")
SCFG = DESK.scenario


def test_same_seed_same_scene():
    a = sample_scene(np.random.default_rng(5), SCFG)
    b = sample_scene(np.random.default_rng(5), SCFG)
    assert np.array_equal(a.ue_position, b.ue_position) and np.array_equal(a.ue_velocity, b.ue_velocity)
    assert all(np.array_equal(x, y) for x, y in zip(a.reflectors, b.reflectors))
    assert scene_to_text(a, DESK.comm, DESK.radar) == scene_to_text(b, DESK.comm, DESK.radar)


def test_zero_reflectors_los_only(rng):
    scene = sample_scene(rng, dataclasses.replace(SCFG, n_reflectors=0))
    assert scene.L == 1 and len(comm_paths(scene, DESK.comm)) == 1


def test_speed_and_position_ranges():
    rng = np.random.default_rng(0)
    speeds, pos = [], []
    for _ in range(1000):
        s = sample_scene(rng, SCFG)
        speeds.append(np.linalg.norm(s.ue_velocity))
        pos.append(s.ue_position)
    pos = np.array(pos)
    assert 50 <= min(speeds) and max(speeds) <= 90
    assert pos[:, 0].min() >= -30 and pos[:, 0].max() <= 30
    assert pos[:, 1].min() >= 10 and pos[:, 1].max() <= 50


def test_visibility_fraction():
    rng = np.random.default_rng(1)
    kept = sum(len(sample_scene(rng, SCFG).reflectors) for _ in range(1000))
    assert kept / 3000 == pytest.approx(0.7, abs=0.03)


def test_broadside_stationary():
    (p,) = comm_paths(Scene(np.array([0.0, 20.0]), np.zeros(2), []), DESK.comm)
    assert p.nu == 0.0 and p.psi == 0.0
    assert p.tau == pytest.approx(20 / c)
    assert abs(p.alpha) == pytest.approx(1.0)


def test_receding_doppler():
    (p,) = comm_paths(Scene(np.array([0.0, 20.0]), np.array([0.0, 70.0]), []), DESK.comm)
    assert p.nu == pytest.approx(-70 * DESK.comm.f_c / c)


def test_reflector_behind_ue_adds_delay():
    scene = Scene(np.array([0.0, 20.0]), np.zeros(2), [np.array([0.0, 40.0])])
    los, nlos = comm_paths(scene, DESK.comm)
    assert nlos.tau > los.tau
    assert nlos.tau == pytest.approx(60 / c)


def test_path_gains_normalized_with_nlos_loss():
    scene = Scene(np.array([10.0, 20.0]), np.zeros(2), [np.array([-10.0, 30.0])])
    los, nlos = comm_paths(scene, DESK.comm, SCFG)
    assert abs(los.alpha) ** 2 + abs(nlos.alpha) ** 2 == pytest.approx(1.0)
    D_los, D_nlos = los.tau * c, nlos.tau * c
    assert abs(nlos.alpha) / abs(los.alpha) == pytest.approx(D_los / D_nlos * 10 ** (-10 / 20))


def test_radar_twice_comm():
    rng = np.random.default_rng(3)
    for _ in range(20):
        scene = sample_scene(rng, SCFG)
        cps = comm_paths(scene, DESK.comm)
        rps = radar_paths(scene, DESK.radar, include_clutter=False)
        for cp, rp in zip(cps, rps):
            assert rp.tau == pytest.approx(2 * cp.tau, rel=1e-12)
            assert rp.theta == cp.psi
            # comm Doppler is -rate * f_c / c; radar velocity is twice the rate
            assert rp.v == pytest.approx(-2 * cp.nu * c / DESK.comm.f_c)


def test_los_half_microsecond_example():
    D = 0.5e-6 * c
    scene = Scene(np.array([0.0, D]), np.zeros(2), [])
    (cp,) = comm_paths(scene, DESK.comm)
    (rp,) = radar_paths(scene, DESK.radar)
    assert cp.tau == pytest.approx(0.5e-6) and rp.tau == pytest.approx(1.0e-6)


def test_radar_amplitude_law():
    scene = Scene(np.array([0.0, 20.0]), np.zeros(2), [np.array([0.0, 40.0])])
    los, nlos, clutter = radar_paths(scene, DESK.radar, SCFG)
    assert abs(los.beta) == pytest.approx(1 / 20 ** 2)
    assert abs(nlos.beta) == pytest.approx(0.1 / 60 ** 2)
    assert clutter.is_static and clutter.v == 0 and abs(clutter.beta) == pytest.approx(1 / 40 ** 2)


def test_static_clutter_removed_downstream():
    scene = Scene(np.array([5.0, 20.0]), np.array([0.0, 60.0]), [np.array([-10.0, 30.0])])
    clutter = [p for p in radar_paths(scene, DESK.radar, SCFG) if p.is_static]
    X = synthesize_cube(clutter, DESK.radar)
    assert np.linalg.norm(clutter_removal(X)) <= 1e-9 * np.linalg.norm(X)


def test_delay_jitter_bounded():
    scfg = dataclasses.replace(SCFG, delay_jitter=2e-9)
    rng = np.random.default_rng(4)
    for _ in range(20):
        scene = sample_scene(rng, scfg)
        ref = radar_paths(scene, DESK.radar, SCFG, include_clutter=False)
        jit = radar_paths(scene, DESK.radar, scfg, include_clutter=False)
        for a, b in zip(ref, jit):
            assert abs(a.tau - b.tau) <= 2e-9 + 1e-18


def test_valid_scene_passes_checks():
    rng = np.random.default_rng(9)
    for i in range(20):
        scene, _ = sample_valid_scene(rng, SCFG, DESK.comm, DESK.M_g, DESK.radar, rng_seed=i)
        check_scene(scene, DESK.comm, DESK.M_g, DESK.radar, SCFG)


def test_impossible_scene_config():
    # every UE is faster than the radar can measure
    scfg = dataclasses.replace(SCFG, speed=(400.0, 500.0), max_resample=5)
    with pytest.raises(ConfigError):
        sample_valid_scene(np.random.default_rng(0), scfg, DESK.comm, DESK.M_g, DESK.radar)


def test_bad_config_values():
    with pytest.raises(ConfigError):
        ScenarioConfig(speed=(90.0, 50.0))
    with pytest.raises(ConfigError):
        ScenarioConfig(p_visible=1.5)


def test_ue_at_origin_rejected():
    with pytest.raises(ConfigError):
        comm_paths(Scene(np.zeros(2), np.zeros(2), []), DESK.comm)


def test_scene_text_is_plain_yaml(rng):
    scene = sample_scene(rng, SCFG, rng_seed=11)
    doc = yaml.safe_load(scene_to_text(scene, DESK.comm, DESK.radar, SCFG))
    assert doc["rng_seed"] == 11
    assert len(doc["comm_paths"]) == scene.L
    assert len(doc["radar_paths"]) == scene.L + len(scene.reflectors)
    assert isinstance(doc["radar_paths"][0]["tau_s"], float)
