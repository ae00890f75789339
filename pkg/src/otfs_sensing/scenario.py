"""Synthetic 2-D street scene producing matched comm and radar paths.

The BS sits at the origin with its ULA along the x axis (broadside +y). A
path's angle is the directional cosine ``x / distance`` of the first hop.
Comm and backscatter radar paths share geometry: radar delay is twice the
comm delay, radar velocity twice the comm path-length rate, same angle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.constants import c as SPEED_OF_LIGHT

from .dd_channel import PathParams, align_to_first_arrival, paths_to_taps
from .errors import ConfigError, OutOfRangeError
from .otfs_modem import CommConfig
from .radar import RadarConfig, RadarPath, check_path, derived_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioConfig:
    ue_x: tuple = (-30.0, 30.0)
    ue_y: tuple = (10.0, 50.0)
    reflector_x: tuple = (-30.0, 30.0)
    reflector_y: tuple = (10.0, 50.0)
    speed: tuple = (50.0, 90.0)
    n_reflectors: int = 3
    p_visible: float = 0.7
    nlos_loss_db: float = 10.0
    rcs: float = 1.0
    clutter_rcs: float = 1.0
    radar_noise_var: float = 2e-6
    delay_jitter: float = 0.0  # s, uniform +-jitter on radar delays
    max_resample: int = 1000

    def __post_init__(self):
        for name in ("ue_x", "ue_y", "reflector_x", "reflector_y", "speed"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigError(f"{name} must be an increasing pair, got {(lo, hi)}")
        if self.speed[0] < 0:
            raise ConfigError("speed bounds must be nonnegative")
        if self.n_reflectors < 0 or not 0 <= self.p_visible <= 1:
            raise ConfigError("n_reflectors >= 0 and p_visible in [0, 1] required")
        if self.radar_noise_var < 0 or self.delay_jitter < 0:
            raise ConfigError("radar_noise_var and delay_jitter must be nonnegative")

    @property
    def expected_paths(self) -> int:
        """Path count budget used to size plain OMP: LoS plus every reflector."""
        return 1 + self.n_reflectors


@dataclass
class Scene:
    ue_position: np.ndarray
    ue_velocity: np.ndarray
    reflectors: list  # of 2-vectors
    rng_seed: int | None = None
    comm_phases: np.ndarray = field(default=None, repr=False)
    radar_phases: np.ndarray = field(default=None, repr=False)
    jitter: np.ndarray = field(default=None, repr=False)  # unit-interval draws in [-1, 1]

    @property
    def L(self) -> int:
        return 1 + len(self.reflectors)


def sample_scene(rng: np.random.Generator, scfg: ScenarioConfig, rng_seed=None) -> Scene:
    pos = np.array([rng.uniform(*scfg.ue_x), rng.uniform(*scfg.ue_y)])
    speed = rng.uniform(*scfg.speed)
    heading = rng.uniform(0, 2 * np.pi)
    vel = speed * np.array([np.cos(heading), np.sin(heading)])
    refl = []
    for _ in range(scfg.n_reflectors):
        r = np.array([rng.uniform(*scfg.reflector_x), rng.uniform(*scfg.reflector_y)])
        if rng.random() < scfg.p_visible:
            refl.append(r)
    L = 1 + len(refl)
    # every reflector also yields a static clutter return
    return Scene(pos, vel, refl, rng_seed,
                 comm_phases=rng.uniform(0, 2 * np.pi, L),
                 radar_phases=rng.uniform(0, 2 * np.pi, L + len(refl)),
                 jitter=rng.uniform(-1, 1, L))


def _geometry(scene: Scene):
    """(path length, path-length rate, first-hop directional cosine, is_los) per path."""
    u, v = scene.ue_position, scene.ue_velocity
    d = float(np.linalg.norm(u))
    if d == 0:
        raise ConfigError("UE at the BS position")
    out = [(d, float(u @ v) / d, float(u[0]) / d, True)]
    for r in scene.reflectors:
        d_br = float(np.linalg.norm(r))
        ru = u - r
        d_ru = float(np.linalg.norm(ru))
        if d_br == 0 or d_ru == 0:
            raise ConfigError("degenerate reflector position")
        out.append((d_br + d_ru, float(ru @ v) / d_ru, float(r[0]) / d_br, False))
    return out


def comm_paths(scene: Scene, cfg: CommConfig, scfg: ScenarioConfig = ScenarioConfig()) -> list[PathParams]:
    geo = _geometry(scene)
    loss = 10 ** (-scfg.nlos_loss_db / 20)
    amps = np.array([(1.0 if los else loss) / D for D, _, _, los in geo])
    amps /= np.linalg.norm(amps)
    phases = scene.comm_phases if scene.comm_phases is not None else np.zeros(len(geo))
    return [
        PathParams(complex(a * np.exp(1j * ph)), D / SPEED_OF_LIGHT,
                   -cfg.f_c / SPEED_OF_LIGHT * rate, psi)
        for a, ph, (D, rate, psi, _) in zip(amps, phases, geo)
    ]


def radar_paths(scene: Scene, rcfg: RadarConfig, scfg: ScenarioConfig = ScenarioConfig(),
                include_clutter: bool = True) -> list[RadarPath]:
    geo = _geometry(scene)
    loss = 10 ** (-scfg.nlos_loss_db / 20)
    phases = scene.radar_phases if scene.radar_phases is not None else np.zeros(2 * len(geo))
    jitter = scene.jitter if scene.jitter is not None else np.zeros(len(geo))
    out = []
    for i, (D, rate, psi, los) in enumerate(geo):
        # the bounce off the reflector happens on the way out and back
        amp = scfg.rcs * (1.0 if los else loss ** 2) / D ** 2
        tau = 2 * D / SPEED_OF_LIGHT + scfg.delay_jitter * jitter[i]
        out.append(RadarPath(complex(amp * np.exp(1j * phases[i])), max(tau, 0.0), 2 * rate, psi))
    if include_clutter:
        for j, r in enumerate(scene.reflectors):
            d_br = float(np.linalg.norm(r))
            amp = scfg.clutter_rcs / d_br ** 2
            out.append(RadarPath(complex(amp * np.exp(1j * phases[len(geo) + j])),
                                 2 * d_br / SPEED_OF_LIGHT, 0.0, float(r[0]) / d_br, is_static=True))
    return out


def check_scene(scene: Scene, cfg: CommConfig, M_g: int, rcfg: RadarConfig,
                scfg: ScenarioConfig = ScenarioConfig()) -> None:
    """Raise OutOfRangeError when any comm or radar path is unrepresentable."""
    paths_to_taps(align_to_first_arrival(comm_paths(scene, cfg, scfg)), cfg, M_g)
    lim = derived_params(rcfg)
    for p in radar_paths(scene, rcfg, scfg):
        check_path(p, rcfg, lim)


def sample_valid_scene(rng: np.random.Generator, scfg: ScenarioConfig, cfg: CommConfig,
                       M_g: int, rcfg: RadarConfig, rng_seed=None):
    """Draw scenes until one fits both configs. Returns ``(scene, resamples)``."""
    for attempt in range(scfg.max_resample + 1):
        scene = sample_scene(rng, scfg, rng_seed)
        try:
            check_scene(scene, cfg, M_g, rcfg, scfg)
        except OutOfRangeError as exc:
            log.debug("scene rejected: %s", exc)
            continue
        if attempt:
            log.info("scene %s accepted after %d resamples", rng_seed, attempt)
        return scene, attempt
    raise ConfigError(f"no valid scene after {scfg.max_resample} resamples; check the configs")


def scene_to_text(scene: Scene, cfg: CommConfig, rcfg: RadarConfig,
                  scfg: ScenarioConfig = ScenarioConfig()) -> str:
    """YAML dump of the geometry and both path tables."""

    def cplx(z):
        return {"re": float(z.real), "im": float(z.imag)}

    doc = {
        "rng_seed": scene.rng_seed,
        "ue_position_m": [float(x) for x in scene.ue_position],
        "ue_velocity_mps": [float(x) for x in scene.ue_velocity],
        "reflectors_m": [[float(x) for x in r] for r in scene.reflectors],
        "comm_paths": [
            {"alpha": cplx(p.alpha), "tau_s": float(p.tau), "nu_hz": float(p.nu), "psi": float(p.psi)}
            for p in comm_paths(scene, cfg, scfg)
        ],
        "radar_paths": [
            {"beta": cplx(p.beta), "tau_s": float(p.tau), "v_mps": float(p.v),
             "theta": float(p.theta), "static": bool(p.is_static)}
            for p in radar_paths(scene, rcfg, scfg)
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)
