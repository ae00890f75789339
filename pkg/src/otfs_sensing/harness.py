"""Monte-Carlo driver: scenes -> radar support -> estimates -> NMSE records.

Every random stream is keyed by ``(seed, purpose, scene_id, ...)`` through
``numpy.random.SeedSequence``, so results do not depend on worker count or
scheduling order.
"""
from __future__ import annotations

import csv
import functools
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .dd_channel import (align_to_first_arrival, apply_taps, complex_noise, dd_channel_tensor,
                         paths_to_taps, to_angle, vectorize_channel)
from .otfs_modem import FrameLayout, build_frame, demodulate, extract_observations, modulate, qpsk_pilots
from .radar import RadarResult, process_cube, synthesize_cube
from .recovery import ls_known_support, nmse, omp, radar_aided_omp
from .scenario import Scene, comm_paths, radar_paths, sample_valid_scene
from .sensing_bridge import SupportSet, path_indices, peaks_to_support, perturb_support
from .sparse_problem import audit_closed_form, psi_oracle, to_angle_domain

log = logging.getLogger(__name__)

ESTIMATORS = ("ls_oracle", "radar_omp", "omp")
SCENE_FIELDS = ("scene_id", "estimator", "snr_db", "eta", "nmse", "nmse_db",
                "support_size", "peaks_detected", "runtime_ms")
AGG_FIELDS = ("estimator", "axis", "snr_db", "eta", "mean_nmse", "nmse_db", "sem",
              "scenes", "failed")

# stream tags for SeedSequence keys
_SCENE, _RADAR, _PILOT, _LINK, _SUPPORT = range(1, 6)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


@dataclass
class Dictionary:
    layout: FrameLayout
    pilots: np.ndarray  # (M_p, N, A)
    psi_tilde: np.ndarray
    audit: dict


@functools.lru_cache(maxsize=16)
def _dictionary(comm, M_p: int, M_g: int, seed: int) -> Dictionary:
    layout = FrameLayout(comm.M, M_p, M_g)
    pilots = qpsk_pilots(rng_for(seed, _PILOT, M_p), M_p, comm.N, comm.A)
    frame = build_frame(pilots, None, layout, comm)
    psi = psi_oracle(frame, comm, layout)
    audit = audit_closed_form(frame, comm, layout, psi)
    if audit["textbook"] > 1e-6:
        log.debug("factorized dictionary deviates from the probed one by %.3g; using the probed one",
                  audit["textbook"])
    psi_tilde = to_angle_domain(psi, comm.A)
    psi_tilde.setflags(write=False)
    return Dictionary(layout, pilots, psi_tilde, audit)


def get_dictionary(ecfg: ExperimentConfig, eta: float) -> Dictionary:
    """Angle-domain dictionary for one pilot overhead; cached per (config, M_p, seed)."""
    layout = ecfg.layout(eta)
    return _dictionary(ecfg.comm, layout.M_p, layout.M_g, ecfg.seed)


@dataclass
class SceneContext:
    """Everything about a scene that does not depend on SNR or pilot overhead."""

    scene_id: int
    scene: Scene
    taps: list
    h_tilde: np.ndarray
    oracle_support: list[int]
    radar: RadarResult
    support: SupportSet
    resamples: int
    path_support: list[int]  # dominant-beam index of every comm path


def prepare_scene(scene_id: int, ecfg: ExperimentConfig, keep_spectrum: bool = False) -> SceneContext:
    comm, rcfg, scfg = ecfg.comm, ecfg.radar, ecfg.scenario
    scene, resamples = sample_valid_scene(rng_for(ecfg.seed, _SCENE, scene_id), scfg, comm,
                                          ecfg.M_g, rcfg, rng_seed=scene_id)
    paths = align_to_first_arrival(comm_paths(scene, comm, scfg))
    taps = paths_to_taps(paths, comm, ecfg.M_g)
    H = dd_channel_tensor(paths, comm, ecfg.layout())
    h_tilde = to_angle(vectorize_channel(H), comm.A)
    # every beam of an occupied (delay, Doppler) cell is in the support of h_tilde
    cells = np.flatnonzero(np.any(H.taps != 0, axis=2).reshape(-1))
    oracle = [int(c * comm.A + a) for c in cells for a in range(comm.A)]

    cube = synthesize_cube(radar_paths(scene, rcfg, scfg), rcfg, scfg.radar_noise_var,
                           rng_for(ecfg.seed, _RADAR, scene_id))
    radar = process_cube(cube, rcfg, ecfg.processing)
    support = peaks_to_support(radar.peaks, comm, ecfg.layout())
    if ecfg.support_noise > 0:
        support = perturb_support(support, ecfg.support_noise, rng_for(ecfg.seed, _SUPPORT, scene_id),
                                  comm, ecfg.layout())
    if not keep_spectrum:
        radar.spectrum = None  # large; not needed past this point
    return SceneContext(scene_id, scene, taps, h_tilde, oracle, radar, support, resamples,
                        path_indices(paths, comm, ecfg.M_g))


def simulate_observation(ctx: SceneContext, ecfg: ExperimentConfig, dic: Dictionary,
                         noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """Pilot + data frame through the time-domain channel, back to the pilot observations."""
    comm, layout = ecfg.comm, dic.layout
    data = qpsk_pilots(rng, layout.data_rows.size, comm.N, comm.A)
    frame = build_frame(dic.pilots, data, layout, comm)
    r = apply_taps(modulate(frame, comm), ctx.taps, comm)
    if noise_var > 0:
        r = r + complex_noise(rng, r.shape, noise_var)
    return extract_observations(demodulate(r, comm), layout)


def run_point(ctx: SceneContext, ecfg: ExperimentConfig, snr_db: float, eta: float,
              point: int = 0, timing: bool = True) -> list[dict]:
    """One (scene, SNR, eta) evaluation of all three estimators."""
    dic = get_dictionary(ecfg, eta)
    noise_var = 10 ** (-snr_db / 10)
    y = simulate_observation(ctx, ecfg, dic, noise_var, rng_for(ecfg.seed, _LINK, ctx.scene_id, point))
    psi = dic.psi_tilde
    est = ecfg.estimator
    eps = math.sqrt(noise_var * y.size) if est.noise_stop else 0.0
    runs = {
        "ls_oracle": lambda: ls_known_support(y, psi, ctx.oracle_support),
        "radar_omp": lambda: radar_aided_omp(y, psi, ctx.support, est.rho, eps, est.init,
                                             fallback_k=ecfg.plain_k_max),
        "omp": lambda: omp(y, psi, ecfg.plain_k_max, eps),
    }
    rows = []
    for name in ESTIMATORS:
        t0 = time.perf_counter()
        try:
            res = runs[name]()
            err = nmse(res.h_hat, ctx.h_tilde)
            size = len(res.support)
        except Exception:  # a failed estimate is recorded, the sweep continues
            log.exception("estimator %s failed on scene %d", name, ctx.scene_id)
            err, size = float("nan"), -1
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        rows.append({
            "scene_id": ctx.scene_id, "estimator": name, "snr_db": float(snr_db), "eta": float(eta),
            "nmse": err, "nmse_db": _db(err),
            "support_size": size, "peaks_detected": len(ctx.radar.peaks), "runtime_ms": ms,
        })
    return rows


def _db(x: float) -> float:
    if x > 0:
        return 10 * math.log10(x)
    return -math.inf if x == 0 else math.nan


def run_scene(scene_id: int, ecfg: ExperimentConfig, snr_db: float, eta: float,
              timing: bool = True) -> list[dict]:
    return run_point(prepare_scene(scene_id, ecfg), ecfg, snr_db, eta, 0, timing)


def axis_points(ecfg: ExperimentConfig, axis: str) -> list[tuple[float, float]]:
    if axis == "snr_db":
        return [(float(s), ecfg.eta) for s in ecfg.sweep_snr_db]
    if axis == "eta":
        return [(ecfg.snr_db, float(e)) for e in ecfg.sweep_eta]
    if axis == "point":
        return [(ecfg.snr_db, ecfg.eta)]
    raise ValueError(f"unknown axis {axis!r}")


def _scene_job(args) -> list[dict]:
    scene_id, ecfg, points, timing = args
    ctx = prepare_scene(scene_id, ecfg)
    rows = []
    for i, (snr_db, eta) in enumerate(points):
        rows.extend(run_point(ctx, ecfg, snr_db, eta, i, timing))
    log.info("scene %d done (%d peaks, |S_r|=%d, %d resamples)", scene_id, len(ctx.radar.peaks),
             len(ctx.support), ctx.resamples)
    return rows


def sweep(ecfg: ExperimentConfig, axis: str, threads: int | None = None,
          timing: bool = True) -> list[dict]:
    """Per-scene records for every axis point, ordered by (scene, point, estimator)."""
    points = axis_points(ecfg, axis)
    jobs = [(sid, ecfg, points, timing) for sid in range(ecfg.scenes)]
    threads = ecfg.threads if threads is None else threads
    if threads <= 1:
        chunks = map(_scene_job, jobs)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_scene_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    return [row for chunk in chunks for row in chunk]


def aggregate(rows: list[dict], axis: str) -> list[dict]:
    key_field = "snr_db" if axis == "snr_db" else "eta"
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["estimator"], r["snr_db"], r["eta"]), []).append(r["nmse"])
    out = []
    for est in ESTIMATORS:
        keys = sorted((k for k in groups if k[0] == est), key=lambda k: (k[1], k[2]))
        for k in keys:
            vals = np.array(groups[k], dtype=float)
            ok = vals[np.isfinite(vals)]
            mean = float(ok.mean()) if ok.size else math.nan
            sem = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else math.nan
            out.append({
                "estimator": est, "axis": key_field if axis != "point" else "point",
                "snr_db": k[1], "eta": k[2], "mean_nmse": mean,
                "nmse_db": _db(mean),
                "sem": sem, "scenes": int(ok.size), "failed": int(vals.size - ok.size),
            })
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict], fields) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r[f]) for f in fields])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def horizontal_gap(snrs, aided_db, plain_db, plain_at: float = 10.0) -> float:
    """SNR saving of the aided curve at the NMSE plain OMP reaches at ``plain_at`` dB.

    Linear interpolation of the aided curve (NMSE in dB vs SNR in dB).
    Returns NaN when the level is outside the aided curve's range.
    """
    snrs = np.asarray(snrs, dtype=float)
    aided_db = np.asarray(aided_db, dtype=float)
    target = float(np.interp(plain_at, snrs, np.asarray(plain_db, dtype=float)))
    for i in range(len(snrs) - 1):
        a, b = aided_db[i], aided_db[i + 1]
        if (a - target) * (b - target) <= 0 and a != b:
            s = snrs[i] + (target - a) * (snrs[i + 1] - snrs[i]) / (b - a)
            return float(plain_at - s)
    return math.nan
