"""
Sample covariances, systematic-sample covariance transformations and the
max-correlation difference statistics.

All covariance estimators divide by ``T``, never ``T - h``. Lags ``h`` are
0-based and counters ``k`` are 1-based throughout, matching ``B_k``.

The central object is :class:`DiffMatrix`, the ``(H + 1) x K`` array of
scaled correlation differences ``sqrt(T) * (rho_h^(k) - rho_h)``. Every
statistic variant is a maximum over that array after weights and penalties.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from covstat.basis import BasisKind, BasisMatrix
from covstat.exceptions import ConfigurationError, DegenerateSeriesError, InputError

__all__ = [
    "AddPowerPenalty",
    "DiffMatrix",
    "Grid",
    "HacVariance",
    "HacWeights",
    "LjungBoxWeights",
    "RegularizationWarning",
    "SqrtProdPenalty",
    "autocov",
    "bartlett",
    "center",
    "default_bandwidth",
    "diff_matrix",
    "hac_variance",
    "jww_quadratic_forms",
    "jww_stat",
    "lag_products",
    "max_max",
    "max_stat",
    "parzen",
    "penalty_matrix",
    "penalized_stat",
    "rho2_diff",
    "systematic_cov",
    "truncated",
    "weighted_penalized_stat",
    "white_noise_covariance",
]

MIN_LENGTH = 4
# gamma_0 below this fraction of max|X|**2 is treated as zero variance
_DEGENERATE_RTOL = 1e-14
HAC_FLOOR = 1e-8
JWW_RIDGE = 1e-8


class RegularizationWarning(UserWarning):
    """A variance or covariance estimate had to be floored or ridge-regularized."""


# --------------------------------------------------------------------------
# Sample moments
# --------------------------------------------------------------------------


def _as_series(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"series must be one-dimensional; got shape {arr.shape}")
    if arr.shape[0] < MIN_LENGTH:
        raise InputError(f"series must have at least {MIN_LENGTH} observations; got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError("series contains NaN or infinite values")
    return arr


def center(x) -> np.ndarray:
    """Subtract the sample mean.

    Parameters
    ----------
    x : array_like
        Raw series of length ``T >= 4``.

    Returns
    -------
    ndarray
        ``x - x.mean()`` as a new float array.
    """
    arr = _as_series(x)
    if np.ptp(arr) == 0:
        # the rounded mean of a constant series need not equal the constant
        return np.zeros_like(arr)
    return arr - arr.mean()


def _check_lag(T: int, h: int) -> None:
    if int(h) != h or not 0 <= h <= T - 2:
        raise InputError(f"lag must be an integer in 0..{T - 2}; got {h!r}")


def autocov(x, h: int) -> float:
    """``(1/T) * sum_{t=1}^{T-h} x_t x_{t+h}`` for an already centered series."""
    x = _as_series(x)
    T = x.shape[0]
    _check_lag(T, h)
    return float(x[: T - h] @ x[h:]) / T


def _row(b, T: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (T,):
        raise InputError(f"basis row must have length {T}; got shape {b.shape}")
    return b


def systematic_cov(x, h: int, b) -> float:
    """Covariance on a systematic sample, ``(1/T) sum x_t x_{t+h} (1 + b_t)``.

    ``b`` is one basis row ``B_k(1), ..., B_k(T)``.
    """
    x = _as_series(x)
    T = x.shape[0]
    _check_lag(T, h)
    b = _row(b, T)
    return float((x[: T - h] * x[h:]) @ (1.0 + b[: T - h])) / T


def _gamma0(x: np.ndarray) -> float:
    g0 = float(x @ x) / x.shape[0]
    scale = float(np.max(np.abs(x))) ** 2 if x.size else 0.0
    if not g0 > _DEGENERATE_RTOL * scale or g0 == 0.0:
        raise DegenerateSeriesError("degenerate series: zero sample variance")
    return g0


def lag_products(x: np.ndarray, max_lag: int) -> list[np.ndarray]:
    """``[x[:T-h] * x[h:] for h in 0..max_lag]``."""
    T = x.shape[0]
    return [x[: T - h] * x[h:] for h in range(max_lag + 1)]


# --------------------------------------------------------------------------
# Grid and difference matrix
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Search grid: lags ``h = 0..max_lag`` and counters ``k = 1..max_counter``."""

    max_lag: int
    max_counter: int

    def __post_init__(self):
        if int(self.max_lag) != self.max_lag or self.max_lag < 0:
            raise ConfigurationError(f"max_lag must be a nonnegative integer; got {self.max_lag!r}")
        if int(self.max_counter) != self.max_counter or self.max_counter < 1:
            raise ConfigurationError(
                f"max_counter must be a positive integer; got {self.max_counter!r}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.max_lag + 1, self.max_counter

    def validate(self, T: int, kind: BasisKind | str | None = None) -> None:
        if self.max_lag > T - 2:
            raise ConfigurationError(f"max_lag {self.max_lag} exceeds T-2={T - 2}")
        if kind is None:
            return
        kind = BasisKind.parse(kind)
        if kind is BasisKind.WALSH and self.max_counter > T - 1:
            raise ConfigurationError(f"Walsh max_counter {self.max_counter} exceeds T-1")
        if kind is BasisKind.HAAR and 2**self.max_counter > T:
            raise ConfigurationError(f"Haar max_counter {self.max_counter} exceeds log2(T)")


@dataclass(frozen=True, eq=False)
class DiffMatrix:
    """Scaled correlation differences over a grid.

    Attributes
    ----------
    entries : ndarray, shape (H + 1, K)
        ``sqrt(T) * (gamma_h^(k) - gamma_h) / gamma_0``.
    cross : ndarray, shape (H + 1, K)
        Unscaled covariance differences ``(1/T) sum x_t x_{t+h} B_k(t)``.
    gamma0 : float
        Full-sample variance.
    x : ndarray
        The centered series the matrix was computed from.
    basis : BasisMatrix
        The rows used, truncated to ``K``.
    """

    entries: np.ndarray
    cross: np.ndarray
    gamma0: float
    x: np.ndarray
    basis: BasisMatrix

    @property
    def T(self) -> int:
        return self.x.shape[0]

    @property
    def grid(self) -> Grid:
        H1, K = self.entries.shape
        return Grid(H1 - 1, K)


def diff_matrix(x, grid: Grid, basis: BasisMatrix) -> DiffMatrix:
    """Compute ``sqrt(T) (rho_h^(k) - rho_h)`` for all grid cells.

    ``x`` must already be centered; use :func:`center` first.

    Raises
    ------
    DegenerateSeriesError
        If the sample variance is zero.
    """
    x = _as_series(x)
    T = x.shape[0]
    grid.validate(T)
    if basis.T != T:
        raise ConfigurationError(f"basis has T={basis.T} but series has T={T}")
    if grid.max_counter > basis.K:
        raise ConfigurationError(f"grid needs {grid.max_counter} basis rows; basis has {basis.K}")
    g0 = _gamma0(x)
    B = basis.entries[: grid.max_counter].astype(float)
    cross = np.empty(grid.shape)
    for h, p in enumerate(lag_products(x, grid.max_lag)):
        cross[h] = B[:, : T - h] @ p / T
    entries = math.sqrt(T) * cross / g0
    return DiffMatrix(entries, cross, g0, x, basis.truncated(grid.max_counter))


def rho2_diff(x, h: int, k: int, basis: BasisMatrix) -> float:
    """``rho_{h,2}^(k) - rho_h``: the covariance difference scaled by ``gamma_0^(k)``."""
    x = _as_series(x)
    T = x.shape[0]
    _check_lag(T, h)
    b = basis.row(k).astype(float)
    g0k = systematic_cov(x, 0, b)
    scale = float(np.max(np.abs(x))) ** 2
    if not g0k > _DEGENERATE_RTOL * scale:
        raise DegenerateSeriesError(f"degenerate systematic sample k={k}: zero variance")
    return float((x[: T - h] * x[h:]) @ b[: T - h]) / T / g0k


# --------------------------------------------------------------------------
# Penalties and weights
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AddPowerPenalty:
    """``P(h, k) = (h + 1)**a / 2 + k**a / 2``."""

    a: float = 0.25

    def __post_init__(self):
        if not 0.125 <= self.a <= 0.5:
            raise ConfigurationError(f"penalty power must lie in [1/8, 1/2]; got {self.a}")

    def __call__(self, h, k):
        return (np.asarray(h, dtype=float) + 1.0) ** self.a / 2 + np.asarray(k, dtype=float) ** self.a / 2


@dataclass(frozen=True)
class SqrtProdPenalty:
    """``P(h, k) = sqrt((h + 1) k)``."""

    def __call__(self, h, k):
        return np.sqrt((np.asarray(h, dtype=float) + 1.0) * np.asarray(k, dtype=float))


Penalty = Union[AddPowerPenalty, SqrtProdPenalty, None]


def penalty_matrix(P: Penalty, shape: tuple[int, int]) -> np.ndarray | float:
    if P is None:
        return 0.0
    h = np.arange(shape[0])[:, None]
    k = np.arange(1, shape[1] + 1)[None, :]
    return np.broadcast_to(P(h, k), shape)


def bartlett(u):
    u = np.abs(np.asarray(u, dtype=float))
    return np.where(u <= 1.0, 1.0 - u, 0.0)


def truncated(u):
    return np.where(np.abs(np.asarray(u, dtype=float)) <= 1.0, 1.0, 0.0)


def parzen(u):
    u = np.abs(np.asarray(u, dtype=float))
    return np.where(u <= 0.5, 1 - 6 * u**2 + 6 * u**3, np.where(u <= 1.0, 2 * (1 - u) ** 3, 0.0))


# support radius in units of the bandwidth; kernels outside never evaluate
_KERNEL_SUPPORT = {bartlett: 1.0, truncated: 1.0, parzen: 1.0}


def default_bandwidth(T: int) -> int:
    """``ceil(T**(1/3))`` computed in integers."""
    b = max(1, int(round(T ** (1 / 3))))
    while b**3 < T:
        b += 1
    while b > 1 and (b - 1) ** 3 >= T:
        b -= 1
    return b


class HacVariance(NamedTuple):
    value: float
    floored: bool


def _hac_from_products(p: np.ndarray, b: np.ndarray, T: int, g0: float,
                       kernel: Callable, bandwidth: float) -> HacVariance:
    a = p * b
    z = a - a.sum() / T
    n = z.shape[0]
    total = float(z @ z)
    support = _KERNEL_SUPPORT.get(kernel)
    last = n - 1 if support is None else min(n - 1, int(math.floor(support * bandwidth)))
    if last >= 1:
        lags = np.arange(1, last + 1)
        w = kernel(lags / bandwidth)
        acf = np.array([z[: n - i] @ z[i:] for i in lags])
        total += 2.0 * float(w @ acf)
    total /= T
    limit = HAC_FLOOR * g0 * g0
    floored = not total > limit
    return HacVariance(max(total, limit) / (g0 * g0), floored)


def hac_variance(x, h: int, k: int, basis: BasisMatrix, kernel: Callable = bartlett,
                 bandwidth: float | None = None) -> HacVariance:
    """
    Kernel long-run variance of ``x_t x_{t+h} B_k(t)``, scaled by ``gamma_0**-2``.

    Parameters
    ----------
    x : array_like
        Centered series.
    h, k : int
        Grid cell.
    basis : BasisMatrix
        Basis supplying row ``k``.
    kernel : callable
        Symmetric kernel with ``kernel(0) == 1``; default Bartlett.
    bandwidth : float, optional
        Defaults to ``ceil(T**(1/3))``.

    Returns
    -------
    HacVariance
        ``value`` is floored at ``1e-8`` (the bracketed long-run variance at
        ``1e-8 * gamma_0**2``); ``floored`` reports whether the floor was hit.
    """
    x = _as_series(x)
    T = x.shape[0]
    _check_lag(T, h)
    beta = default_bandwidth(T) if bandwidth is None else float(bandwidth)
    if not beta >= 1:
        raise ConfigurationError(f"HAC bandwidth must be >= 1; got {bandwidth}")
    g0 = _gamma0(x)
    b = basis.row(k).astype(float)[: T - h]
    return _hac_from_products(x[: T - h] * x[h:], b, T, g0, kernel, beta)


@dataclass(frozen=True)
class HacWeights:
    """Inverse HAC standard deviation weights ``1 / V(h, k)``."""

    kernel: Callable = bartlett
    bandwidth: float | None = None

    def __call__(self, D: DiffMatrix) -> np.ndarray:
        T = D.T
        beta = default_bandwidth(T) if self.bandwidth is None else float(self.bandwidth)
        if not beta >= 1:
            raise ConfigurationError(f"HAC bandwidth must be >= 1; got {self.bandwidth}")
        B = D.basis.entries.astype(float)
        H1, K = D.entries.shape
        var = np.empty((H1, K))
        n_floored = 0
        for h, p in enumerate(lag_products(D.x, H1 - 1)):
            for k in range(K):
                v = _hac_from_products(p, B[k, : T - h], T, D.gamma0, self.kernel, beta)
                var[h, k] = v.value
                n_floored += v.floored
        if n_floored:
            warnings.warn(f"HAC variance floored on {n_floored} grid cells",
                          RegularizationWarning, stacklevel=2)
        return 1.0 / np.sqrt(var)


@dataclass(frozen=True)
class LjungBoxWeights:
    """Lag-only weights ``sqrt((T + 2) / (T - h))``."""

    def __call__(self, D: DiffMatrix) -> np.ndarray:
        T = D.T
        H1, K = D.entries.shape
        h = np.arange(H1, dtype=float)[:, None]
        return np.broadcast_to(np.sqrt((T + 2.0) / (T - h)), (H1, K)).copy()


WeightScheme = Union[HacWeights, LjungBoxWeights, np.ndarray, float, None]


def resolve_weights(W: WeightScheme, D: DiffMatrix) -> np.ndarray | float:
    """Evaluate a weight scheme on ``D``; plain arrays and scalars pass through."""
    if W is None:
        return 1.0
    w = W(D) if callable(W) else W
    w = np.broadcast_to(np.asarray(w, dtype=float), D.entries.shape)
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise ConfigurationError("weights must be finite and strictly positive on every cell")
    return w


# --------------------------------------------------------------------------
# Statistics
# --------------------------------------------------------------------------


def _argmax_cell(obj: np.ndarray) -> tuple[float, tuple[int, int]]:
    flat = int(np.argmax(obj))
    h, kk = divmod(flat, obj.shape[1])
    return float(obj.flat[flat]), (h, kk + 1)


def max_stat(D: DiffMatrix) -> tuple[float, tuple[int, int]]:
    """Largest ``|entry|`` and its first ``(h, k)`` location in row-major order."""
    return _argmax_cell(np.abs(D.entries))


def objective(D: DiffMatrix, W: WeightScheme = None, P: Penalty = None):
    """``W(h, k) |entry(h, k)| - P(h, k)`` over the grid."""
    w = resolve_weights(W, D)
    return w * np.abs(D.entries) - penalty_matrix(P, D.entries.shape)


def penalized_stat(D: DiffMatrix, P: Penalty) -> float:
    return _argmax_cell(objective(D, None, P))[0]


def weighted_penalized_stat(D: DiffMatrix, W: WeightScheme, P: Penalty = None) -> float:
    return _argmax_cell(objective(D, W, P))[0]


def max_max(values: Sequence[float]) -> float:
    """Combine per-basis statistics by taking their maximum."""
    values = list(values)
    if not values:
        raise InputError("max_max needs at least one statistic")
    return float(max(values))


# --------------------------------------------------------------------------
# Comparison Wald statistic
# --------------------------------------------------------------------------

GammaSupplier = Callable[[int, int], np.ndarray]


def white_noise_covariance(gamma0: float, T: int) -> GammaSupplier:
    """Null covariance of the scaled covariance differences for iid data.

    Under iid observations with zero excess kurtosis this is
    ``gamma0**2 * diag((T - j) / T)``, ``j = 1..h``, for every ``k``.
    """

    def supplier(h: int, k: int) -> np.ndarray:
        j = np.arange(1, h + 1)
        return np.diag(gamma0 * gamma0 * (T - j) / T)

    return supplier


def _regularized_cholesky(G: np.ndarray) -> tuple[np.ndarray, bool]:
    G = 0.5 * (G + G.T)
    h = G.shape[0]
    lam = JWW_RIDGE * float(np.trace(G)) / h
    ridge = False
    if float(np.linalg.eigvalsh(G)[0]) < lam:
        G = G + lam * np.eye(h)
        ridge = True
    try:
        return np.linalg.cholesky(G), ridge
    except np.linalg.LinAlgError:
        raise DegenerateSeriesError("covariance matrix is not positive definite") from None


def jww_quadratic_forms(diffs: np.ndarray, T: int, gamma: GammaSupplier) -> tuple[np.ndarray, int]:
    """
    ``T d' Gamma^{-1} d`` for stacked lag vectors ``d = diffs[..., :h, k]``.

    Parameters
    ----------
    diffs : ndarray, shape (..., H, K)
        Covariance differences at lags ``1..H``; leading axes are batched.
    T : int
        Sample length.
    gamma : callable
        ``gamma(h, k)`` returns the ``h x h`` covariance matrix (``k`` 1-based).

    Returns
    -------
    forms : ndarray, shape (..., H, K)
        Entry ``[..., h-1, k-1]`` is the quadratic form over lags ``1..h``.
    n_ridge : int
        Number of ``(h, k)`` matrices that needed ridge regularization.
    """
    diffs = np.asarray(diffs, dtype=float)
    H, K = diffs.shape[-2:]
    forms = np.empty(diffs.shape)
    n_ridge = 0
    for k in range(1, K + 1):
        for h in range(1, H + 1):
            G = np.asarray(gamma(h, k), dtype=float).reshape(h, h)
            L, ridge = _regularized_cholesky(G)
            n_ridge += ridge
            d = diffs[..., :h, k - 1]
            y = np.linalg.solve(L, d.reshape(-1, h).T)
            forms[..., h - 1, k - 1] = T * np.sum(y * y, axis=0).reshape(d.shape[:-1])
    return forms, n_ridge


def jww_reduce(forms: np.ndarray) -> np.ndarray:
    """``max_k [max_h (form - 2h) - sqrt(k - 1)]`` over the trailing two axes."""
    H, K = forms.shape[-2:]
    pen_h = 2.0 * np.arange(1, H + 1)[:, None]
    pen_k = np.sqrt(np.arange(K, dtype=float))
    return np.max(np.max(forms - pen_h, axis=-2) - pen_k, axis=-1)


def jww_stat(x, grid: Grid, basis: BasisMatrix, gamma: GammaSupplier) -> float:
    """
    Order-selection Wald statistic over lag vectors ``1..h`` and counters ``k``.

    ``x`` is centered; lag 0 of ``grid`` is ignored, so ``grid.max_lag >= 1``.
    """
    if grid.max_lag < 1:
        raise ConfigurationError("the Wald comparison statistic needs max_lag >= 1")
    D = diff_matrix(x, grid, basis)
    forms, n_ridge = jww_quadratic_forms(D.cross[1:], D.T, gamma)
    if n_ridge:
        warnings.warn(f"ridge-regularized {n_ridge} covariance matrices",
                      RegularizationWarning, stacklevel=2)
    return float(jww_reduce(forms))
