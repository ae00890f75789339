"""Greedy and oracle-support sparse channel estimators."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError

log = logging.getLogger(__name__)

GRAM_COND_LIMIT = 1e10


@dataclass
class EstimatorResult:
    h_hat: np.ndarray
    support: list[int]
    iterations: int
    residual_norm: float
    residual_history: list[float] = field(default_factory=list)


def solve_ls(Psi_S: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares on the selected columns.

    Pivoted QR, falling back to the pseudoinverse when the Gram matrix
    condition number (estimated from the R diagonal) exceeds 1e10.
    """
    if Psi_S.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    Q, R, piv = scipy.linalg.qr(Psi_S, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d[-1] == 0 or (d[0] / d[-1]) ** 2 > GRAM_COND_LIMIT:
        return np.linalg.pinv(Psi_S) @ y
    z = scipy.linalg.solve_triangular(R, Q.conj().T @ y)
    x = np.empty_like(z)
    x[piv] = z
    return x


def _result(y, Psi, support, coef, iterations, history) -> EstimatorResult:
    h = np.zeros(Psi.shape[1], dtype=complex)
    if support:
        h[support] = coef
    res = float(np.linalg.norm(y - Psi @ h))
    return EstimatorResult(h, list(support), iterations, res, history)


def _greedy(y, Psi, support: list[int], budget: int, eps: float, fit_first: bool):
    """Grow ``support`` by correlation until ``budget`` atoms or residual <= eps."""
    support = list(support)
    if fit_first and support:
        coef = solve_ls(Psi[:, support], y)
        b = y - Psi[:, support] @ coef
    else:
        coef = np.zeros(len(support), dtype=complex)
        b = y.copy()
    history = [float(np.linalg.norm(b))]
    iterations = 0
    while len(support) < budget and history[-1] > eps:
        corr = np.abs(Psi.conj().T @ b)
        corr[support] = -1.0  # never reselect
        j = int(np.argmax(corr))  # first max = smallest index
        support.append(j)
        coef = solve_ls(Psi[:, support], y)
        b = y - Psi[:, support] @ coef
        history.append(float(np.linalg.norm(b)))
        iterations += 1
    if support and not fit_first and iterations == 0:
        coef = solve_ls(Psi[:, support], y)
    return support, coef, iterations, history


def omp(y, Psi, k_max: int, eps: float = 0.0) -> EstimatorResult:
    """Orthogonal matching pursuit with an atom budget and a residual stop.

    Parameters
    ----------
    y : (rows,) complex
    Psi : (rows, cols) complex
    k_max : int
        Maximum number of selected atoms.
    eps : float
        Stop once the residual norm is at or below this value.
    """
    y = np.asarray(y, dtype=complex)
    Psi = np.asarray(Psi)
    if k_max < 0 or k_max > Psi.shape[0]:
        raise ConfigError(f"k_max={k_max} must lie in [0, {Psi.shape[0]}]")
    support, coef, it, hist = _greedy(y, Psi, [], k_max, eps, fit_first=True)
    return _result(y, Psi, support, coef, it, hist)


def support_budget(n_support: int, rho: float) -> int:
    # guard against 1.2 * 5 = 6.000000000000001
    return math.ceil(round(rho * n_support, 9))


def radar_aided_omp(y, Psi, S_r, rho: float = 2.0, eps: float = 0.0, init: str = "ls",
                    fallback_k: int | None = None) -> EstimatorResult:
    """OMP seeded with a radar support, capped at ``ceil(rho * |S_r|)`` atoms.

    ``init="ls"`` fits the seed support before the first selection;
    ``init="zero"`` starts from a zero estimate with the seed support.
    An empty seed falls back to :func:`omp` with ``fallback_k`` atoms.
    """
    if rho < 1:
        raise ConfigError(f"rho must be >= 1, got {rho}")
    if init not in ("ls", "zero"):
        raise ConfigError(f"unknown init {init!r}")
    y = np.asarray(y, dtype=complex)
    Psi = np.asarray(Psi)
    seed = [int(i) for i in S_r]
    if len(set(seed)) != len(seed):
        raise ConfigError("seed support has duplicate indices")
    if not seed:
        if fallback_k is None:
            raise ConfigError("empty radar support and no fallback_k")
        log.info("empty radar support, falling back to plain OMP with k_max=%d", fallback_k)
        return omp(y, Psi, fallback_k, eps)
    budget = support_budget(len(seed), rho)
    support, coef, it, hist = _greedy(y, Psi, seed, budget, eps, fit_first=(init == "ls"))
    return _result(y, Psi, support, coef, it, hist)


def ls_known_support(y, Psi, support) -> EstimatorResult:
    """Minimum-norm least squares restricted to ``support``."""
    y = np.asarray(y, dtype=complex)
    Psi = np.asarray(Psi)
    support = [int(i) for i in support]
    coef = np.linalg.lstsq(Psi[:, support], y, rcond=None)[0] if support else np.zeros(0, complex)
    return _result(y, Psi, support, coef, 0, [])


def nmse(h_hat, h_true) -> float:
    h_true = np.asarray(h_true)
    denom = float(np.vdot(h_true, h_true).real)
    if denom == 0:
        raise ValueError("NMSE undefined for an all-zero reference channel")
    e = np.asarray(h_hat) - h_true
    return float(np.vdot(e, e).real) / denom


def to_db(x):
    return 10 * np.log10(x)
