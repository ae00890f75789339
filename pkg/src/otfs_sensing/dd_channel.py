"""Integer-tap geometric multipath channel in the delay-Doppler domain."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, OutOfRangeError
from .otfs_modem import CommConfig, FrameLayout


@dataclass(frozen=True)
class PathParams:
    alpha: complex
    tau: float  # s
    nu: float  # Hz
    psi: float  # directional cosine


@dataclass(frozen=True)
class Tap:
    """One integer (delay, Doppler) tap with a per-antenna gain vector."""

    m: int
    n: int
    gains: np.ndarray  # shape (A,)


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(int)


def quantize_path(tau: float, nu: float, cfg: CommConfig, max_delay_tap: int | None = None):
    """Return integer ``(m, n)`` taps for a delay in seconds and a Doppler in Hz.

    Raises OutOfRangeError when the Doppler tap leaves ``[-N/2, N/2-1]`` or the
    delay tap reaches ``max_delay_tap`` (the guard length, when given).
    """
    if tau < 0:
        raise OutOfRangeError(f"negative delay {tau}")
    m = int(round_half_away(cfg.M * cfg.delta_f * tau))
    n = int(round_half_away(cfg.frame_time * nu))
    if max_delay_tap is not None and m >= max_delay_tap:
        raise OutOfRangeError(f"delay tap {m} >= {max_delay_tap}")
    if not -cfg.N // 2 <= n <= cfg.N // 2 - 1:
        raise OutOfRangeError(f"Doppler tap {n} outside [{-cfg.N // 2}, {cfg.N // 2 - 1}]")
    return m, n


def steering(psi: float, A: int, spacing_ratio: float) -> np.ndarray:
    return np.exp(-2j * np.pi * spacing_ratio * np.arange(A) * psi)


def align_to_first_arrival(paths: list[PathParams]) -> list[PathParams]:
    """Shift delays so the earliest path arrives at zero (receiver timing sync)."""
    if not paths:
        return []
    t0 = min(p.tau for p in paths)
    return [replace(p, tau=p.tau - t0) for p in paths]


def paths_to_taps(paths, cfg: CommConfig, max_delay_tap: int | None = None) -> list[Tap]:
    taps = []
    for p in paths:
        m, n = quantize_path(p.tau, p.nu, cfg, max_delay_tap)
        taps.append(Tap(m, n, p.alpha * steering(p.psi, cfg.A, cfg.antenna_spacing_ratio)))
    return taps


@dataclass
class DDChannel:
    """Dense tap tensor of shape ``(M_g, N, A)``; column ``k`` holds Doppler tap ``k - N/2``."""

    taps: np.ndarray

    @property
    def M_g(self) -> int:
        return self.taps.shape[0]

    @property
    def N(self) -> int:
        return self.taps.shape[1]

    @property
    def A(self) -> int:
        return self.taps.shape[2]

    def sparse(self) -> list[Tap]:
        out = []
        for m, k in zip(*np.nonzero(np.any(self.taps != 0, axis=2))):
            out.append(Tap(int(m), int(k) - self.N // 2, self.taps[m, k].copy()))
        return out

    def to_csv(self, antenna: int = 0) -> str:
        from .otfs_modem import grid_to_csv

        return grid_to_csv(self.taps[:, :, antenna])


def dd_channel_tensor(paths, cfg: CommConfig, layout: FrameLayout) -> DDChannel:
    H = np.zeros((layout.M_g, cfg.N, cfg.A), dtype=complex)
    for t in paths_to_taps(paths, cfg, layout.M_g):
        H[t.m, t.n + cfg.N // 2] += t.gains
    return DDChannel(H)


def apply_taps(s, taps: list[Tap], cfg: CommConfig) -> np.ndarray:
    """Noiseless time-domain channel for an explicit tap list.

    ``s`` has shape (A, L). Each tap delays by ``m`` samples and applies the
    phase ramp ``z**(n*(q-m))`` with ``z = exp(2j*pi/(N*(M+N_CP)))``.
    """
    s = np.asarray(s, dtype=complex)
    if s.ndim == 1:
        s = s[None]
    A, L = s.shape
    if L != cfg.frame_len:
        raise ConfigError(f"expected {cfg.frame_len} samples per antenna, got {L}")
    q = np.arange(L)
    r = np.zeros(L, dtype=complex)
    for t in taps:
        g = np.asarray(t.gains, dtype=complex)
        if g.shape != (A,):
            raise ConfigError(f"tap gains shape {g.shape} != ({A},)")
        mixed = g @ s  # combine antennas first, the delay is common
        delayed = np.zeros(L, dtype=complex)
        delayed[t.m:] = mixed[: L - t.m]
        r += delayed * np.exp(2j * np.pi * t.n * (q - t.m) / cfg.frame_len)
    return r


def apply_time_channel(s, paths, cfg: CommConfig, noise_var: float = 0.0,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    r = apply_taps(s, paths_to_taps(paths, cfg), cfg)
    if noise_var > 0:
        if rng is None:
            raise ConfigError("noise_var > 0 requires an rng")
        r = r + complex_noise(rng, r.shape, noise_var)
    return r


def complex_noise(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def canonical_index(m, n, a, N: int, A: int):
    """Column of tap ``(m, n)`` on antenna/beam ``a``; ``n`` is the signed Doppler tap."""
    return (np.asarray(m) * N + np.asarray(n) + N // 2) * A + np.asarray(a)


def split_index(idx, N: int, A: int):
    idx = np.asarray(idx)
    a = idx % A
    cell = idx // A
    return cell // N, cell % N - N // 2, a


def vectorize_channel(H: DDChannel | np.ndarray) -> np.ndarray:
    taps = H.taps if isinstance(H, DDChannel) else np.asarray(H)
    return taps.reshape(-1).copy()


def to_angle(h, A: int) -> np.ndarray:
    """Apply the unitary DFT to every contiguous A-block of ``h``."""
    h = np.asarray(h, dtype=complex)
    return np.fft.fft(h.reshape(-1, A), axis=1, norm="ortho").reshape(-1)


def from_angle(h_tilde, A: int) -> np.ndarray:
    h_tilde = np.asarray(h_tilde, dtype=complex)
    return np.fft.ifft(h_tilde.reshape(-1, A), axis=1, norm="ortho").reshape(-1)
