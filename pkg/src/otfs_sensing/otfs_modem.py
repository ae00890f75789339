"""OTFS modulation and demodulation plus the pilot/guard/data frame layout.

Grids are stored as ``(M, N)`` or ``(M, N, A)`` arrays. Row ``m`` is the delay
index, storage column ``k`` is Doppler index ``k - N/2``. All DFTs are unitary.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LayoutError


@dataclass(frozen=True)
class CommConfig:
    M: int = 64
    N: int = 8
    N_CP: int = 16
    delta_f: float = 15e3
    f_c: float = 6e9
    A: int = 8
    antenna_spacing_ratio: float = 0.5

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.A < 1:
            raise ConfigError("M, N and A must be positive")
        if self.N % 2:
            raise ConfigError(f"N must be even, got {self.N}")
        if self.N_CP < 0:
            raise ConfigError("N_CP must be nonnegative")
        if self.delta_f <= 0 or self.f_c <= 0 or self.antenna_spacing_ratio <= 0:
            raise ConfigError("delta_f, f_c and antenna_spacing_ratio must be positive")

    @property
    def symbol_len(self) -> int:
        """Samples per OTFS column including the cyclic prefix."""
        return self.M + self.N_CP

    @property
    def frame_len(self) -> int:
        return self.symbol_len * self.N

    @property
    def symbol_time(self) -> float:
        """Symbol duration T, CP included."""
        return self.symbol_len / (self.M * self.delta_f)

    @property
    def frame_time(self) -> float:
        return self.N * self.symbol_time

    def doppler_indices(self) -> np.ndarray:
        return np.arange(self.N) - self.N // 2


@dataclass(frozen=True)
class FrameLayout:
    """Delay-axis split: pilots ``[0, M_p)``, guards on both sides, data elsewhere."""

    M: int
    M_p: int
    M_g: int

    def __post_init__(self):
        if self.M_p < 0 or self.M_g < 0:
            raise LayoutError("M_p and M_g must be nonnegative")
        if self.M_p + 2 * self.M_g >= self.M:
            raise LayoutError(
                f"layout does not fit: M_p + 2*M_g = {self.M_p + 2 * self.M_g} >= M = {self.M}"
            )

    @classmethod
    def from_eta(cls, M: int, eta: float, M_g: int) -> "FrameLayout":
        # half-up rounding so e.g. 0.2 * 64 = 12.8 -> 13
        return cls(M=M, M_p=int(np.floor(eta * M + 0.5)), M_g=M_g)

    @property
    def eta(self) -> float:
        return self.M_p / self.M

    @property
    def pilot_rows(self) -> np.ndarray:
        return np.arange(self.M_p)

    @property
    def guard_rows(self) -> np.ndarray:
        return np.concatenate(
            [np.arange(self.M_p, self.M_p + self.M_g), np.arange(self.M - self.M_g, self.M)]
        )

    @property
    def data_rows(self) -> np.ndarray:
        return np.arange(self.M_p + self.M_g, self.M - self.M_g)


@dataclass
class DDGrid:
    """A grid together with the domain it lives in (``"DD"``, ``"FT"`` or ``"DT"``)."""

    values: np.ndarray
    domain: str = "DD"

    def to_csv(self, antenna: int = 0) -> str:
        return grid_to_csv(self.values if self.values.ndim == 2 else self.values[:, :, antenna])


def grid_to_csv(values: np.ndarray) -> str:
    """Rows are delay, columns Doppler, cells ``re+imj``."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ConfigError("grid_to_csv expects a 2-D grid")
    buf = io.StringIO()
    for row in values:
        buf.write(",".join(f"{float(z.real)!r}{float(z.imag):+}j" for z in row.astype(complex)))
        buf.write("\n")
    return buf.getvalue()


def _as_antenna_grid(X, cfg: CommConfig) -> np.ndarray:
    X = np.asarray(X.values if isinstance(X, DDGrid) else X, dtype=complex)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[:2] != (cfg.M, cfg.N):
        raise ConfigError(f"grid shape {X.shape} does not match M={cfg.M}, N={cfg.N}")
    return X


def modulate(X_dd, cfg: CommConfig) -> np.ndarray:
    """Map a DD grid to per-antenna time samples.

    Parameters
    ----------
    X_dd : array, shape (M, N) or (M, N, A)
    cfg : CommConfig

    Returns
    -------
    s : array, shape (A, (M + N_CP) * N)
        Column-major vectorization of the CP-extended delay-time grid.
    """
    X = _as_antenna_grid(X_dd, cfg)
    # F_M^H F_M cancels: the delay-time grid is X F_N^H (inverse DFT across Doppler)
    X_ft = np.fft.ifft(np.fft.fft(X, axis=0, norm="ortho"), axis=1, norm="ortho")
    X_dt = np.fft.ifft(X_ft, axis=0, norm="ortho")
    if cfg.N_CP:
        X_dt = np.concatenate([X_dt[cfg.M - cfg.N_CP:], X_dt], axis=0)
    # (M+N_CP, N, A) -> per antenna column-major vector
    return np.transpose(X_dt, (2, 1, 0)).reshape(X.shape[2], -1)


def demodulate(r, cfg: CommConfig) -> np.ndarray:
    """Recover the (M, N) DD grid from a received time vector."""
    r = np.asarray(r, dtype=complex)
    if r.ndim != 1 or r.size != cfg.frame_len:
        raise ConfigError(f"expected {cfg.frame_len} samples, got shape {r.shape}")
    R = r.reshape(cfg.N, cfg.symbol_len).T
    Y_dt = R[cfg.N_CP:]
    Y_ft = np.fft.fft(Y_dt, axis=0, norm="ortho")
    return np.fft.fft(np.fft.ifft(Y_ft, axis=0, norm="ortho"), axis=1, norm="ortho")


def qpsk_pilots(rng: np.random.Generator, M_p: int, N: int, A: int) -> np.ndarray:
    """Unit-modulus QPSK symbols, shape (M_p, N, A)."""
    bits = rng.integers(0, 2, size=(2, M_p, N, A))
    return ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1)) / np.sqrt(2)


def build_frame(pilots, data, layout: FrameLayout, cfg: CommConfig) -> np.ndarray:
    """Assemble an (M, N, A) grid. ``data`` may be None for a pilot-only frame."""
    if layout.M != cfg.M:
        raise LayoutError("layout M differs from config M")
    pilots = np.asarray(pilots, dtype=complex)
    if pilots.shape != (layout.M_p, cfg.N, cfg.A):
        raise LayoutError(f"pilot shape {pilots.shape} != {(layout.M_p, cfg.N, cfg.A)}")
    X = np.zeros((cfg.M, cfg.N, cfg.A), dtype=complex)
    X[: layout.M_p] = pilots
    rows = layout.data_rows
    if data is not None:
        data = np.asarray(data, dtype=complex)
        if data.shape != (rows.size, cfg.N, cfg.A):
            raise LayoutError(f"data shape {data.shape} != {(rows.size, cfg.N, cfg.A)}")
        X[rows] = data
    return X


def extract_observations(Y_dd, layout: FrameLayout) -> np.ndarray:
    """Pilot-row entries ordered by ``obs(m, n) = m*N + n + N/2``."""
    Y = np.asarray(Y_dd.values if isinstance(Y_dd, DDGrid) else Y_dd)
    if Y.ndim != 2 or Y.shape[0] != layout.M:
        raise ConfigError(f"grid shape {Y.shape} incompatible with layout M={layout.M}")
    # storage column already equals n + N/2, so row-major flattening is the map
    return Y[: layout.M_p].reshape(-1).copy()


def obs_index(m, n, N: int):
    return np.asarray(m) * N + np.asarray(n) + N // 2
