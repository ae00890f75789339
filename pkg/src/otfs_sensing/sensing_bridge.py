"""Turn radar detections into a support hypothesis over the angle-domain channel."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .dd_channel import canonical_index, quantize_path, split_index
from .errors import OutOfRangeError
from .otfs_modem import CommConfig, FrameLayout

log = logging.getLogger(__name__)


@dataclass
class SupportSet:
    """Ordered unique column indices plus the peak each one came from."""

    indices: list[int] = field(default_factory=list)
    provenance: list[int] = field(default_factory=list)

    def add(self, index: int, peak_id: int) -> bool:
        if index in self.indices:
            return False
        self.indices.append(int(index))
        self.provenance.append(int(peak_id))
        return True

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def to_csv(self, N: int, A: int) -> str:
        buf = io.StringIO()
        buf.write("index,m,n,f,peak_id\n")
        for idx, pid in zip(self.indices, self.provenance):
            m, n, f = split_index(idx, N, A)
            buf.write(f"{idx},{m},{n},{f},{pid}\n")
        return buf.getvalue()


def normalize_delay(taus) -> np.ndarray:
    """Delays relative to the shortest one, halved to one-way."""
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        return taus
    return (taus - taus.min()) / 2


def to_doppler_freq(v_p, f_c: float):
    """Comm Doppler (Hz) from a radar round-trip velocity (m/s, positive = receding).

    The radar velocity counts the round trip, hence the halving. A receding
    target shortens the phase rate, so the Doppler is negative.
    """
    return -(np.asarray(v_p) / 2) * f_c / SPEED_OF_LIGHT


def angle_to_beam_index(theta_p: float, cfg: CommConfig) -> int:
    a = np.arange(cfg.A)
    s = np.exp(-2j * np.pi * cfg.antenna_spacing_ratio * a * theta_p)
    power = np.abs(np.fft.fft(s, norm="ortho")) ** 2
    # argmax takes the first (smallest) index among exact ties; round off fp noise
    return int(np.argmax(np.round(power, 12)))


def peaks_to_support(peaks, cfg: CommConfig, layout: FrameLayout) -> SupportSet:
    support = SupportSet()
    if len(peaks) == 0:
        return support
    taus = normalize_delay([p.tau for p in peaks])
    for j, (p, tau) in enumerate(zip(peaks, taus)):
        try:
            m, n = quantize_path(float(tau), float(to_doppler_freq(p.v, cfg.f_c)), cfg, layout.M_g)
        except OutOfRangeError as exc:
            log.warning("dropping radar peak %d: %s", j, exc)
            continue
        f = angle_to_beam_index(p.theta, cfg)
        support.add(int(canonical_index(m, n, f, cfg.N, cfg.A)), j)
    return support


def path_indices(paths, cfg: CommConfig, M_g: int) -> list[int]:
    """Canonical index of each (first-arrival aligned) comm path's dominant beam."""
    out = []
    for p in paths:
        m, n = quantize_path(p.tau, p.nu, cfg, M_g)
        out.append(int(canonical_index(m, n, angle_to_beam_index(p.psi, cfg), cfg.N, cfg.A)))
    return out


def support_recall(support, true_indices, cfg: CommConfig, radius: int = 1) -> float:
    """Fraction of ``true_indices`` with a support index within ``radius`` on every axis.

    Delay distance is linear; Doppler and beam distances wrap.
    """
    true_indices = list(true_indices)
    if not true_indices:
        return float("nan")
    got = np.array([split_index(i, cfg.N, cfg.A) for i in support], dtype=int).reshape(-1, 3)
    hits = 0
    for idx in true_indices:
        m, n, f = (int(x) for x in split_index(idx, cfg.N, cfg.A))
        dn = np.abs(got[:, 1] - n) % cfg.N
        df = np.abs(got[:, 2] - f) % cfg.A
        near = ((np.abs(got[:, 0] - m) <= radius) & (np.minimum(dn, cfg.N - dn) <= radius)
                & (np.minimum(df, cfg.A - df) <= radius))
        hits += bool(near.any())
    return hits / len(true_indices)


def perturb_support(support: SupportSet, prob: float, rng: np.random.Generator,
                    cfg: CommConfig, layout: FrameLayout) -> SupportSet:
    """Drop or shift indices to model an unreliable control channel.

    Each index is hit with probability ``prob``; a hit is a drop or a +-1 move
    along one of the delay / Doppler / angle axes (wrapping), equally likely.
    """
    out = SupportSet()
    for idx, pid in zip(support.indices, support.provenance):
        if rng.random() >= prob:
            out.add(idx, pid)
            continue
        if rng.random() < 0.5:
            continue
        m, n, f = (int(x) for x in split_index(idx, cfg.N, cfg.A))
        axis, step = int(rng.integers(3)), int(rng.choice([-1, 1]))
        if axis == 0:
            m = (m + step) % layout.M_g
        elif axis == 1:
            n = (n + step + cfg.N // 2) % cfg.N - cfg.N // 2
        else:
            f = (f + step) % cfg.A
        out.add(int(canonical_index(m, n, f, cfg.N, cfg.A)), pid)
    return out

