"""Observation vector and delay-Doppler-angle dictionary.

Rows follow ``obs(m, n) = m*N + n + N/2`` and columns follow
``idx(m', n', a) = (m'*N + n' + N/2)*A + a``. The impulse-probed matrix from
:func:`psi_oracle` is the exact operator of the simulated link and is what the
estimators use. :func:`build_Z` / :func:`build_P` give the textbook factorized
form for auditing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dd_channel import canonical_index
from .errors import ConfigError
from .otfs_modem import CommConfig, FrameLayout, modulate


@dataclass
class SparseProblem:
    y: np.ndarray
    psi: np.ndarray
    noise_var: float
    N: int
    A: int
    angle_domain: bool = True

    def __post_init__(self):
        if self.psi.shape[0] != self.y.size:
            raise ConfigError(f"dictionary rows {self.psi.shape[0]} != observations {self.y.size}")
        if self.psi.shape[1] % (self.N * self.A):
            raise ConfigError("dictionary column count is not a multiple of N*A")

    @property
    def M_g(self) -> int:
        return self.psi.shape[1] // (self.N * self.A)

    def index(self, m, n, a):
        return canonical_index(m, n, a, self.N, self.A)


def _grid_axes(layout: FrameLayout, cfg: CommConfig):
    """Broadcastable (row, column) index arrays for the (obs, idx) matrix."""
    N, A = cfg.N, cfg.A
    m = np.repeat(np.arange(layout.M_p), N)[:, None]
    n = np.tile(np.arange(N) - N // 2, layout.M_p)[:, None]
    cols = np.arange(layout.M_g * N * A)
    mp = (cols // A // N)[None, :]
    npr = (cols // A % N - N // 2)[None, :]
    a = (cols % A)[None, :]
    return m, n, mp, npr, a


def build_Z(layout: FrameLayout, cfg: CommConfig) -> np.ndarray:
    """Phase matrix with entries ``z**(n * ((m - m') mod M))``."""
    m, n, mp, _, _ = _grid_axes(layout, cfg)
    return np.exp(2j * np.pi * n * ((m - mp) % cfg.M) / cfg.frame_len)


def build_Z_exact(layout: FrameLayout, cfg: CommConfig) -> np.ndarray:
    """Phase matrix of the simulated link: ``z**(n' * (N_CP + m - m'))``.

    The ramp is indexed by the channel Doppler tap and the absolute sample
    position of the delayed symbol, which is what the time-domain channel does
    for taps no longer than the CP.
    """
    m, _, mp, npr, _ = _grid_axes(layout, cfg)
    return np.exp(2j * np.pi * npr * (cfg.N_CP + m - mp) / cfg.frame_len)


def build_P(frame, layout: FrameLayout, cfg: CommConfig) -> np.ndarray:
    """Shifted transmit symbols ``x[(m - m') mod M, (n - n') mod N, a]``."""
    X = np.asarray(frame)
    if X.shape != (cfg.M, cfg.N, cfg.A):
        raise ConfigError(f"frame shape {X.shape} != {(cfg.M, cfg.N, cfg.A)}")
    m, n, mp, npr, a = _grid_axes(layout, cfg)
    col = (n - npr + cfg.N // 2) % cfg.N  # storage column of Doppler index n - n'
    return X[(m - mp) % cfg.M, col, a]


def build_psi(Z, P) -> np.ndarray:
    Z = np.asarray(Z)
    P = np.asarray(P)
    if Z.shape != P.shape:
        raise ConfigError(f"Z shape {Z.shape} != P shape {P.shape}")
    return Z * P


def to_angle_domain(psi, A: int) -> np.ndarray:
    """``psi @ (I kron F_A)^H``, applied per A-column block."""
    psi = np.asarray(psi, dtype=complex)
    rows, cols = psi.shape
    if cols % A:
        raise ConfigError("column count is not a multiple of A")
    return np.fft.ifft(psi.reshape(rows, -1, A), axis=2, norm="ortho").reshape(rows, cols)


def from_angle_domain(psi_tilde, A: int) -> np.ndarray:
    psi_tilde = np.asarray(psi_tilde, dtype=complex)
    rows, cols = psi_tilde.shape
    return np.fft.fft(psi_tilde.reshape(rows, -1, A), axis=2, norm="ortho").reshape(rows, cols)


def _demod_rows(R: np.ndarray, cfg: CommConfig, M_p: int) -> np.ndarray:
    """Batched demodulate + extract_observations over the leading axis of R."""
    batch = R.shape[0]
    Y_dt = R.reshape(batch, cfg.N, cfg.symbol_len)[:, :, cfg.N_CP:]  # (batch, N, M)
    Y = np.fft.fft(np.fft.ifft(np.fft.fft(Y_dt, axis=2, norm="ortho"), axis=2, norm="ortho"),
                   axis=1, norm="ortho")
    return np.transpose(Y[:, :, :M_p], (0, 2, 1)).reshape(batch, -1)


def psi_oracle(frame, cfg: CommConfig, layout: FrameLayout) -> np.ndarray:
    """Tap-domain dictionary probed column by column through the simulated link.

    Column ``idx(m', n', a)`` is the noiseless observation produced by a unit
    tap at ``(m', n')`` that only drives antenna ``a``.
    """
    X = np.asarray(frame, dtype=complex)
    if X.shape != (cfg.M, cfg.N, cfg.A):
        raise ConfigError(f"frame shape {X.shape} != {(cfg.M, cfg.N, cfg.A)}")
    s = modulate(X, cfg)  # (A, L)
    L = cfg.frame_len
    q = np.arange(L)
    dopp = np.arange(cfg.N) - cfg.N // 2
    out = np.empty((layout.M_p * cfg.N, layout.M_g * cfg.N * cfg.A), dtype=complex)
    for mp in range(layout.M_g):
        delayed = np.zeros_like(s)
        delayed[:, mp:] = s[:, : L - mp]
        ramp = np.exp(2j * np.pi * np.outer(dopp, q - mp) / L)  # (N, L)
        probes = ramp[:, None, :] * delayed[None, :, :]  # (N, A, L)
        cols = _demod_rows(probes.reshape(-1, L), cfg, layout.M_p)
        start = mp * cfg.N * cfg.A
        out[:, start:start + cfg.N * cfg.A] = cols.T
    return out


def audit_closed_form(frame, cfg: CommConfig, layout: FrameLayout, oracle=None) -> dict:
    """Max elementwise deviation of the factorized forms from the oracle."""
    oracle = psi_oracle(frame, cfg, layout) if oracle is None else oracle
    P = build_P(frame, layout, cfg)
    textbook = np.max(np.abs(build_psi(build_Z(layout, cfg), P) - oracle), initial=0.0)
    exact = np.max(np.abs(build_psi(build_Z_exact(layout, cfg), P) - oracle), initial=0.0)
    return {"textbook": float(textbook), "exact_phase": float(exact)}


def dump_psi(psi, path) -> None:
    """Row-major little-endian complex64."""
    np.ascontiguousarray(psi, dtype="<c8").tofile(path)


def load_psi(path, rows: int, cols: int) -> np.ndarray:
    return np.fromfile(path, dtype="<c8").reshape(rows, cols)
