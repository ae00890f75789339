"""FMCW radar: data-cube synthesis and the detection chain.

Chain: clutter removal -> range/Doppler/angle DFTs -> Doppler-averaged
range-angle map -> 2D CA-CFAR + NMS -> 1D CA-CFAR along Doppler + NMS ->
physical units.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import betaincinv

from .errors import ConfigError, OutOfRangeError


@dataclass(frozen=True)
class RadarConfig:
    f_0: float = 28e9
    S: float = 30e12  # Hz/s
    f_s: float = 30e6
    N_s: int = 128
    N_loop: int = 64
    T_p: float = 10e-6
    B: int = 8
    antenna_spacing_ratio: float = 0.5
    zero_pad_angle: int = 64

    def __post_init__(self):
        if min(self.N_s, self.N_loop, self.B) < 1:
            raise ConfigError("N_s, N_loop and B must be positive")
        if min(self.f_0, self.S, self.f_s, self.T_p, self.antenna_spacing_ratio) <= 0:
            raise ConfigError("radar rates, times and spacing must be positive")
        if self.T_c > self.T_p:
            raise ConfigError(f"chirp duration {self.T_c:g} s exceeds repetition time {self.T_p:g} s")
        if self.zero_pad_angle < self.B:
            raise ConfigError("zero_pad_angle must be at least B")

    @property
    def T_c(self) -> float:
        return self.N_s / self.f_s

    @property
    def bandwidth(self) -> float:
        return self.S * self.T_c

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_0


def derived_params(rcfg: RadarConfig) -> dict:
    """Range/velocity limits and resolutions in m and m/s.

    The unambiguous range is the last usable range bin, (N_s - 1) bins of size
    c / (2 B_w).
    """
    range_res = SPEED_OF_LIGHT / (2 * rcfg.bandwidth)
    return {
        "max_range": (rcfg.N_s - 1) * range_res,
        "range_res": range_res,
        "max_vel": rcfg.wavelength / (4 * rcfg.T_p),
        "vel_res": rcfg.wavelength / (2 * rcfg.N_loop * rcfg.T_p),
    }


@dataclass(frozen=True)
class RadarPath:
    beta: complex
    tau: float  # round trip, s
    v: float  # m/s, positive = receding
    theta: float  # directional cosine
    is_static: bool = False


def check_path(p: RadarPath, rcfg: RadarConfig, limits: dict | None = None) -> None:
    lim = derived_params(rcfg) if limits is None else limits
    if not 0 <= p.tau < 2 * lim["max_range"] / SPEED_OF_LIGHT:
        raise OutOfRangeError(f"radar delay {p.tau:g} s outside unambiguous range")
    if abs(p.v) >= lim["max_vel"]:
        raise OutOfRangeError(f"radar velocity {p.v:g} m/s outside +-{lim['max_vel']:g}")
    if abs(p.theta) > 1:
        raise OutOfRangeError(f"directional cosine {p.theta} outside [-1, 1]")


def synthesize_cube(paths, rcfg: RadarConfig, noise_var: float = 0.0,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """IF samples of shape (N_s, N_loop, B) for a list of point-target paths."""
    q = np.arange(rcfg.N_s) / rcfg.f_s
    n = np.arange(rcfg.N_loop)
    b = np.arange(rcfg.B)
    X = np.zeros((rcfg.N_s, rcfg.N_loop, rcfg.B), dtype=complex)
    lim = derived_params(rcfg)
    for p in paths:
        check_path(p, rcfg, lim)
        tau_n = p.tau + 2 * p.v * n * rcfg.T_p / SPEED_OF_LIGHT
        phase = rcfg.f_0 * tau_n[None, :] + rcfg.S * np.outer(q, tau_n)
        steer = np.exp(-2j * np.pi * rcfg.antenna_spacing_ratio * b * p.theta)
        X += p.beta * np.exp(2j * np.pi * phase)[:, :, None] * steer[None, None, :]
    if noise_var > 0:
        if rng is None:
            raise ConfigError("noise_var > 0 requires an rng")
        X += np.sqrt(noise_var / 2) * (rng.standard_normal(X.shape) + 1j * rng.standard_normal(X.shape))
    return X


def noise_var_for_pnr(beta: complex, pnr_db: float, rcfg: RadarConfig) -> float:
    """Noise variance giving the stated coherent peak-to-noise ratio in the 3D spectrum."""
    gain = rcfg.N_s * rcfg.N_loop * rcfg.B
    return abs(beta) ** 2 * gain / 10 ** (pnr_db / 10)


def clutter_removal(X) -> np.ndarray:
    X = np.asarray(X)
    return X - X.mean(axis=1, keepdims=True)


def _window(kind, n):
    if kind is None or kind == "rect":
        return np.ones(n)
    if kind == "hann":
        return np.hanning(n + 2)[1:-1]  # no zero endpoints
    raise ConfigError(f"unknown window {kind!r}")


def dft3(Xr, rcfg: RadarConfig, window: str | None = None) -> np.ndarray:
    """Magnitude of the range / Doppler / angle spectrum.

    Doppler bin ``N_loop/2`` is zero velocity and angle bin ``K/2`` is
    broadside. The angle axis uses the conjugate-steering kernel so bin ``k``
    maps to directional cosine ``(k - K/2) / (K * d/lambda)``.
    """
    Xr = np.asarray(Xr)
    if window is not None:
        Xr = (Xr * _window(window, Xr.shape[0])[:, None, None]
              * _window(window, Xr.shape[1])[None, :, None]
              * _window(window, Xr.shape[2])[None, None, :])
    K = rcfg.zero_pad_angle
    Y = np.fft.fft(Xr, axis=0)
    Y = np.fft.fftshift(np.fft.fft(Y, axis=1), axes=1)
    Y = np.fft.fftshift(np.fft.ifft(Y, n=K, axis=2) * K, axes=2)
    return np.abs(Y)


def range_angle_map(X3d) -> np.ndarray:
    return np.asarray(X3d).mean(axis=1)


@dataclass(frozen=True)
class CfarParams:
    train: int = 8
    guard: int = 2
    pfa: float = 1e-3

    def __post_init__(self):
        if self.train < 1 or self.guard < 0 or not 0 < self.pfa < 1:
            raise ConfigError(f"bad CFAR parameters {self}")


def cfar_scale(pfa: float, n_train, looks: float = 1.0):
    """Multiplier on the training mean for a square-law CA-CFAR.

    Cells are means of ``looks`` exponential samples. With one look this is
    ``n_train * (pfa**(-1/n_train) - 1)``.
    """
    n_train = np.asarray(n_train, dtype=float)
    x = betaincinv(looks, looks * n_train, 1.0 - pfa)
    return n_train * x / (1.0 - x)


def _check_window(size: int, p: CfarParams):
    if 2 * (p.train + p.guard) + 1 > size:
        raise ConfigError(f"CFAR window {2 * (p.train + p.guard) + 1} exceeds axis length {size}")


def _ring_kernel(p: CfarParams, ndim: int) -> np.ndarray:
    outer = 2 * (p.train + p.guard) + 1
    k = np.ones((outer,) * ndim)
    inner = slice(p.train, p.train + 2 * p.guard + 1)
    k[(inner,) * ndim] = 0
    return k


def _ca_cfar(values: np.ndarray, p: CfarParams, looks: float, axes) -> np.ndarray:
    kernel = _ring_kernel(p, len(axes))
    shape = [1] * values.ndim
    for ax in axes:
        shape[ax] = kernel.shape[0]
    kernel = kernel.reshape(shape)
    total = ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    count = ndimage.correlate(np.ones_like(values), kernel, mode="constant", cval=0.0)
    count = np.rint(count)
    scale = np.zeros_like(count)
    for t in np.unique(count):
        scale[count == t] = cfar_scale(p.pfa, t, looks)
    return values > scale * total / count


def cfar_2d(power_map, params: CfarParams = CfarParams(), looks: float = 1.0) -> np.ndarray:
    """Boolean detection mask over a 2-D map of square-law cells."""
    power_map = np.asarray(power_map, dtype=float)
    for size in power_map.shape:
        _check_window(size, params)
    return _ca_cfar(power_map, params, looks, axes=(0, 1))


def cfar_1d(profiles, params: CfarParams = CfarParams(), looks: float = 1.0) -> np.ndarray:
    """CA-CFAR along the last axis of ``profiles``."""
    profiles = np.asarray(profiles, dtype=float)
    _check_window(profiles.shape[-1], params)
    return _ca_cfar(profiles, params, looks, axes=(profiles.ndim - 1,))


def nms(values, mask, window: int = 3, axes=None) -> np.ndarray:
    """Keep masked cells that equal the maximum of ``values`` in their window."""
    values = np.asarray(values, dtype=float)
    size = [1] * values.ndim
    for ax in range(values.ndim) if axes is None else axes:
        size[ax] = window
    local_max = ndimage.maximum_filter(values, size=size, mode="nearest")
    return np.asarray(mask, dtype=bool) & (values >= local_max)


def leakage_envelope(delta, n: int, pad: float = 1.0):
    """Upper bound on rect-window DFT leakage, as a power ratio to the peak cell.

    ``delta`` is the distance in output bins from the detected peak cell, ``n``
    the untransformed length and ``pad`` the output bins per native bin. The
    true peak may sit half an output bin off the cell, which both shifts the
    sidelobes and lowers the cell (scalloping); the bound covers both.
    Returns ``(envelope, in_mainlobe)``.
    """
    total = n * pad
    d = np.abs(np.asarray(delta, dtype=float)) % total
    x = np.minimum(d, total - d) / pad  # native bins, cyclic
    frac = 0.5 / pad
    scallop = _dirichlet(frac, n) ** 2
    y = np.maximum(x - frac, 1e-12)
    env = np.minimum(1.0, 1.0 / (n * np.sin(np.pi * y / n)) ** 2) / scallop
    return env, x <= 1.0


def _dirichlet(x, n: int):
    """Normalized magnitude of the n-point rect-window DFT kernel, x in native bins."""
    x = np.asarray(x, dtype=float)
    den = n * np.sin(np.pi * x / n)
    return np.where(np.abs(den) < 1e-12, 1.0, np.abs(np.sin(np.pi * x) / np.where(den == 0, 1, den)))


def reject_leakage(values, cells, axes, margin_db: float = 3.0) -> np.ndarray:
    """Drop detections that a stronger kept detection's sidelobes could explain.

    ``cells`` is (k, ndim) integer coordinates with power ``values``;
    ``axes[i] = (n, pad)`` describes axis i (see :func:`leakage_envelope`).
    A cell inside a stronger kept cell's mainlobe along every axis is the same
    response (this catches the cyclic wrap of the angle axis that NMS misses).
    Returns a boolean keep mask in the order of ``cells``.
    """
    values = np.asarray(values, dtype=float)
    cells = np.asarray(cells).reshape(len(values), -1)
    margin = 10 ** (margin_db / 10)
    keep = np.zeros(len(values), dtype=bool)
    kept: list[int] = []
    for i in np.argsort(-values, kind="stable"):
        explained = False
        for j in kept:
            env, main = 1.0, True
            for ax, (n, pad) in enumerate(axes):
                e, m = leakage_envelope(cells[i, ax] - cells[j, ax], n, pad)
                env, main = env * float(e), main and bool(m)
            if main or values[i] <= margin * values[j] * env:
                explained = True
                break
        if not explained:
            keep[i] = True
            kept.append(int(i))
    return keep


@dataclass(frozen=True)
class Peak:
    tau: float
    v: float
    theta: float
    magnitude: float
    cell: tuple = field(default=(), compare=False)


class PeakSet(list):
    """List of :class:`Peak`."""

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("tau_s,v_mps,cos_theta,magnitude\n")
        for p in self:
            buf.write(f"{p.tau!r},{p.v!r},{p.theta!r},{p.magnitude!r}\n")
        return buf.getvalue()


def bins_to_physical(cells, rcfg: RadarConfig, magnitudes=None) -> PeakSet:
    """Convert ``(range_bin, doppler_bin, angle_bin)`` cells to a PeakSet."""
    K = rcfg.zero_pad_angle
    out = PeakSet()
    for i, (r, d, k) in enumerate(np.asarray(cells, dtype=int).reshape(-1, 3)):
        rng_m = r * SPEED_OF_LIGHT * rcfg.f_s / (2 * rcfg.S * rcfg.N_s)
        v = (d - rcfg.N_loop / 2) * rcfg.wavelength / (2 * rcfg.N_loop * rcfg.T_p)
        theta = (k - K / 2) / (rcfg.antenna_spacing_ratio * K)
        mag = float(magnitudes[i]) if magnitudes is not None else float("nan")
        cell = (int(r), int(d), int(k))
        out.append(Peak(float(2 * rng_m / SPEED_OF_LIGHT), float(v), float(theta), mag, cell))
    return out


@dataclass(frozen=True)
class ProcessingParams:
    cfar2d: CfarParams = CfarParams(8, 2, 1e-3)
    cfar1d: CfarParams = CfarParams(8, 2, 1e-3)
    nms_window: int = 3
    clutter_removal: bool = True
    window: str | None = None
    leakage_margin_db: float | None = None  # e.g. 10.0 enables sidelobe rejection


def doppler_looks(rcfg: RadarConfig, params: ProcessingParams) -> float:
    """Effective number of independent noise looks in a Doppler-averaged power cell."""
    w2 = _window(params.window, rcfg.N_loop) ** 2
    looks = w2.sum() ** 2 / (w2 ** 2).sum()
    return looks - 1 if params.clutter_removal else looks


@dataclass
class RadarResult:
    peaks: PeakSet
    spectrum: np.ndarray  # |X3D|
    ra_map: np.ndarray  # mean |X3D| over Doppler
    candidates: np.ndarray  # (range, angle) cells after 2D CFAR + NMS
    cfar_mask: np.ndarray  # raw 2D CFAR mask before NMS


def process_cube(X, rcfg: RadarConfig, params: ProcessingParams = ProcessingParams()) -> RadarResult:
    """Run the full detection chain on a raw cube.

    Both CFAR stages operate on square-law (power) cells; the 2D stage sees the
    Doppler-averaged power, so its threshold accounts for the averaging.
    """
    X = np.asarray(X)
    if X.shape != (rcfg.N_s, rcfg.N_loop, rcfg.B):
        raise ConfigError(f"cube shape {X.shape} != {(rcfg.N_s, rcfg.N_loop, rcfg.B)}")
    Xr = clutter_removal(X) if params.clutter_removal else X
    spec = dft3(Xr, rcfg, params.window)
    power = spec ** 2
    ra_power = range_angle_map(power)
    mask = cfar_2d(ra_power, params.cfar2d, doppler_looks(rcfg, params))
    keep = nms(ra_power, mask, params.nms_window)
    cand = np.argwhere(keep)
    leak = params.leakage_margin_db is not None and params.window is None
    if leak and len(cand) > 1:
        axes = [(rcfg.N_s, 1.0), (rcfg.B, rcfg.zero_pad_angle / rcfg.B)]
        cand = cand[reject_leakage(ra_power[cand[:, 0], cand[:, 1]], cand, axes, params.leakage_margin_db)]
    cells, mags = [], []
    if cand.size:
        profiles = power[cand[:, 0], :, cand[:, 1]]  # (n_cand, N_loop)
        det = cfar_1d(profiles, params.cfar1d)
        det = nms(profiles, det, params.nms_window, axes=(1,))
        for ci, row in enumerate(det):
            ds = np.flatnonzero(row)
            if leak and len(ds) > 1:
                ds = ds[reject_leakage(profiles[ci, ds], ds[:, None], [(rcfg.N_loop, 1.0)],
                                       params.leakage_margin_db)]
            r, k = cand[ci]
            for d in ds:
                cells.append((r, d, k))
                mags.append(spec[r, d, k])
    peaks = bins_to_physical(np.array(cells, dtype=int).reshape(-1, 3), rcfg, mags)
    return RadarResult(peaks, spec, range_angle_map(spec), cand, mask)


def heatmap_csv(values) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(values, dtype=float), delimiter=",", fmt="%.9g")
    return buf.getvalue()
