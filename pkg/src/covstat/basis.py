"""
Walsh and composite Haar bases on [0, 1) and their discretized versions.

Both families take values in {-1, +1}. Continuous evaluation is carried out in
exact rational arithmetic: a point ``x`` is represented as ``num / den`` with
integers, so a grid point ``(t - 1) / T`` is never misclassified at a dyadic
interval boundary, whatever ``T`` is.

Row ``k`` of a :class:`BasisMatrix` holds ``B_k(t) = b_k((t - 1) / T)`` for
``t = 1, ..., T`` and ``k = 1, ..., K``. The constant function (index 0) is
never stored; it enters the covariance transformations as the ``1 +`` term.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

from covstat.exceptions import ConfigurationError, DomainError, InputError

__all__ = [
    "BasisKind",
    "BasisMatrix",
    "SystematicSample",
    "basis_matrix",
    "haar_composite_eval",
    "systematic_sample",
    "walsh_eval",
]


class BasisKind(str, enum.Enum):
    WALSH = "walsh"
    HAAR = "haar"

    @classmethod
    def parse(cls, value: "BasisKind | str") -> "BasisKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"walsh": cls.WALSH, "haar": cls.HAAR, "haarcomposite": cls.HAAR,
                   "haar_composite": cls.HAAR}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown basis kind {value!r}") from None

    def eta(self, k: int) -> int:
        """Growth bound on ``|sum_t B_k(t)|``: ``k`` for Walsh, ``2**k`` for Haar."""
        return k if self is BasisKind.WALSH else 2**k


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (Rational, int)):
        return Fraction(x)
    if isinstance(x, Real):
        # binary floats are dyadic rationals, so this conversion is exact
        return Fraction(float(x))
    raise InputError(f"cannot evaluate a basis function at {x!r}")


def _check_unit_interval(x: Fraction) -> None:
    if not 0 <= x < 1:
        raise DomainError(f"basis functions are defined on [0, 1); got x={x}")


def _int_dtype(bound: int):
    # exact integer arithmetic: machine ints when safe, Python ints otherwise
    return np.int64 if bound < 2**62 else object


def _walsh_grid(i: int, num: np.ndarray, den: int) -> np.ndarray:
    # Unrolls W_{2n+p}(x) = W_n(2x) on [0, .5), (-1)^(n+p) W_n(2x-1) on [.5, 1).
    num = np.array(num, dtype=_int_dtype(2 * den), copy=True)
    sign = np.ones(num.shape, dtype=np.int64)
    while i > 1:
        n, p = divmod(i, 2)
        right = 2 * num >= den
        if (n + p) % 2:
            sign[right] = -sign[right]
        num = np.where(right, 2 * num - den, 2 * num)
        i = n
    if i == 1:
        sign = np.where(2 * num < den, sign, -sign)
    return sign


def _haar_grid(k: int, num: np.ndarray, den: int) -> np.ndarray:
    # psi_k is +1 on the left half of every dyadic cell of width 2**-(k-1)
    num = np.asarray(num, dtype=_int_dtype(den << k))
    frac = (num << (k - 1)) % den
    return np.where(2 * frac < den, 1, -1).astype(np.int64)


def walsh_eval(i: int, x) -> int:
    """
    Evaluate the sequency-ordered Walsh function ``W_i`` at ``x``.

    Parameters
    ----------
    i : int
        Nonnegative index; ``W_i`` has exactly ``i`` sign changes on [0, 1).
    x : float or Fraction
        Point in [0, 1).

    Returns
    -------
    int
        +1 or -1.
    """
    if int(i) != i or i < 0:
        raise InputError(f"Walsh index must be a nonnegative integer; got {i!r}")
    xf = _as_fraction(x)
    _check_unit_interval(xf)
    return int(_walsh_grid(int(i), np.array([xf.numerator]), xf.denominator)[0])


def haar_composite_eval(k: int, x) -> int:
    """
    Evaluate the composite Haar function ``psi_k`` at ``x``.

    ``psi_1`` is the mother wavelet; ``psi_{k+1}(x) = sum_m psi(2**k x - m)``
    over all shifts ``m = 0, ..., 2**k - 1``.
    """
    if int(k) != k or k < 1:
        raise InputError(f"composite Haar index must be a positive integer; got {k!r}")
    xf = _as_fraction(x)
    _check_unit_interval(xf)
    return int(_haar_grid(int(k), np.array([xf.numerator]), xf.denominator)[0])


def _validate(kind: BasisKind, K: int, T: int) -> None:
    if int(K) != K or K < 1:
        raise ConfigurationError(f"number of basis rows must be >= 1; got {K!r}")
    if int(T) != T or T < 2:
        raise ConfigurationError(f"sample length must be >= 2; got {T!r}")
    if kind is BasisKind.WALSH and K > T - 1:
        raise ConfigurationError(f"Walsh basis supports at most T-1={T - 1} rows; got K={K}")
    if kind is BasisKind.HAAR and 2**K > T:
        raise ConfigurationError(
            f"composite Haar rows beyond log2(T) repeat below the sampling resolution "
            f"(T={T}, K={K})"
        )


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """Discretized basis rows ``B_1, ..., B_K`` over ``t = 1, ..., T``.

    ``entries[k - 1, t - 1]`` is ``B_k(t)``; the array is read-only.
    """

    kind: BasisKind
    entries: np.ndarray

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def T(self) -> int:
        return self.entries.shape[1]

    def row(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.K:
            raise InputError(f"row index {k} outside 1..{self.K}")
        return self.entries[k - 1]

    def truncated(self, K: int) -> "BasisMatrix":
        """The first ``K`` rows as a new matrix."""
        if not 1 <= K <= self.K:
            raise InputError(f"cannot keep {K} of {self.K} rows")
        return BasisMatrix(self.kind, self.entries[:K])


@functools.lru_cache(maxsize=128)
def _cached_entries(kind: BasisKind, K: int, T: int) -> np.ndarray:
    num = np.arange(T, dtype=np.int64)
    evaluate = _walsh_grid if kind is BasisKind.WALSH else _haar_grid
    out = np.empty((K, T), dtype=np.int8)
    for k in range(1, K + 1):
        out[k - 1] = evaluate(k, num, T)
    out.setflags(write=False)
    return out


def basis_matrix(kind: BasisKind | str, K: int, T: int) -> BasisMatrix:
    """Rows ``k = 1..K`` of the discretized basis over a sample of length ``T``.

    Raises
    ------
    ConfigurationError
        If ``K`` exceeds ``T - 1`` (Walsh) or ``log2(T)`` (composite Haar).
    """
    kind = BasisKind.parse(kind)
    _validate(kind, K, T)
    return BasisMatrix(kind, _cached_entries(kind, int(K), int(T)))


@dataclass(frozen=True)
class SystematicSample:
    kind: BasisKind
    k: int
    indices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, t: object) -> bool:
        return t in self.indices


def systematic_sample(kind: BasisKind | str, k: int, T: int) -> SystematicSample:
    """Time points (1-based) selected by the ``k``-th basis function.

    For Walsh functions the selection is where ``(-1)**(k-1) W_k(t) = 1``; for
    composite Haar it is where ``Psi_k(t) = 1``. Note that the covariance
    transformations use ``1 + B_k(t)`` without the Walsh sign factor, so for
    even Walsh ``k`` they weight the complement of this set.
    """
    kind = BasisKind.parse(kind)
    _validate(kind, k, T)
    row = _cached_entries(kind, int(k), int(T))[k - 1].astype(np.int64)
    if kind is BasisKind.WALSH and (k - 1) % 2:
        row = -row
    idx = np.flatnonzero(row == 1) + 1
    return SystematicSample(kind, int(k), tuple(int(t) for t in idx))
