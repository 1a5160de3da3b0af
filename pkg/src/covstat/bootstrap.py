"""
Blockwise dependent wild (multiplier) bootstrap for the max-correlation test.

The sample ``1..T`` is cut into contiguous blocks of length ``b_T`` plus a
shorter remainder block when ``b_T`` does not divide ``T``. Every block gets
one iid standard normal multiplier. Replication ``i`` draws its multipliers
from its own substream keyed by ``(seed, i)``, so results do not depend on
evaluation order.
"""

from __future__ import annotations

import math
import re
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from covstat.basis import BasisKind, basis_matrix
from covstat.exceptions import ConfigurationError
from covstat.stats import (
    AddPowerPenalty,
    DiffMatrix,
    Grid,
    HacWeights,
    LjungBoxWeights,
    Penalty,
    SqrtProdPenalty,
    WeightScheme,
    center,
    diff_matrix,
    jww_quadratic_forms,
    jww_reduce,
    lag_products,
    objective,
    penalty_matrix,
    resolve_weights,
    RegularizationWarning,
)

__all__ = [
    "BlockPartition",
    "BootstrapConfig",
    "TestResult",
    "Variant",
    "block_partition",
    "bootstrap_deltas",
    "default_block_size",
    "delta_g",
    "multiplier_matrix",
    "multipliers",
    "replication_rng",
    "run_test",
]

Seed = Union[int, Sequence[int], None]


def default_block_size(T: int, eta: float = 1e-10) -> int:
    """``floor(T**(1/2 - eta))``; just below ``sqrt(T)`` for perfect squares."""
    return max(1, int(math.floor(T ** (0.5 - eta))))


@dataclass(frozen=True)
class BlockPartition:
    """Disjoint contiguous blocks covering ``0..T-1`` (0-based, half-open)."""

    T: int
    block_size: int
    blocks: tuple[range, ...]

    @property
    def starts(self) -> np.ndarray:
        return np.array([b.start for b in self.blocks], dtype=np.int64)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(b) for b in self.blocks], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.blocks)


def block_partition(T: int, block_size: int, allow_single_block: bool = False) -> BlockPartition:
    """Split ``T`` observations into blocks of ``block_size``.

    The last block holds the remaining ``T mod block_size`` observations when
    the division is not exact. A block size of ``T`` or more is rejected
    unless ``allow_single_block`` is set.
    """
    if int(block_size) != block_size or block_size < 1:
        raise ConfigurationError(f"block size must be a positive integer; got {block_size!r}")
    if block_size >= T:
        if not allow_single_block:
            raise ConfigurationError(
                f"block size {block_size} leaves a single block for T={T}"
            )
        return BlockPartition(T, int(T), (range(0, T),))
    b = int(block_size)
    blocks = tuple(range(s, min(s + b, T)) for s in range(0, T, b))
    return BlockPartition(T, b, blocks)


def replication_rng(seed: Seed, i: int) -> np.random.Generator:
    """Independent generator for bootstrap replication ``i``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))


def multipliers(partition: BlockPartition, rng: np.random.Generator) -> np.ndarray:
    """``phi_t``: one standard normal per block, repeated over the block."""
    xi = rng.standard_normal(len(partition))
    return np.repeat(xi, partition.sizes)


def multiplier_matrix(partition: BlockPartition, M: int, seed: Seed) -> np.ndarray:
    """Block-level multipliers for ``M`` replications, shape ``(M, n_blocks)``."""
    n = len(partition)
    return np.stack([replication_rng(seed, i).standard_normal(n) for i in range(M)])


def delta_g(x, h: int, k: int, basis, phi, centering: str = "product") -> float:
    """
    One bootstrapped covariance difference.

    With ``centering="own"`` this is
    ``(1/T) sum_{t<=T-h} phi_t (a_t - (1/T) sum_s a_s)`` where
    ``a_t = x_t x_{t+h} B_k(t)``. With ``centering="product"`` (the default)
    only ``x_t x_{t+h}`` is centered before multiplying by ``B_k(t)``.
    """
    x = np.asarray(x, dtype=float)
    T = x.shape[0]
    p = x[: T - h] * x[h:]
    b = basis.row(k).astype(float)[: T - h]
    phi = np.asarray(phi, dtype=float)[: T - h]
    # sum run by run over constant stretches of phi, so that one multiplier
    # shared by every observation cancels the centering term exactly
    starts = np.flatnonzero(np.r_[True, phi[1:] != phi[:-1]])
    counts = np.diff(np.r_[starts, phi.shape[0]])
    if centering == "own":
        raw = np.add.reduceat(p * b, starts)
        S = raw - raw.sum() * (counts / T)
    elif centering == "product":
        S = np.add.reduceat(p * b, starts) - (p.sum() / T) * np.add.reduceat(b, starts)
    else:
        raise ConfigurationError(f"unknown centering {centering!r}")
    return float(phi[starts] @ S) / T


def _centered_block_sums(x: np.ndarray, B: np.ndarray, max_lag: int,
                         partition: BlockPartition, centering: str) -> np.ndarray:
    # S[h, k, s] = sum over block s (t <= T-h) of the centered summand; the
    # centering term is (n_s / T) * total so a single block cancels exactly.
    T = x.shape[0]
    K = B.shape[0]
    starts = partition.starts
    stops = starts + partition.sizes
    S = np.zeros((max_lag + 1, K, len(partition)))
    for h, p in enumerate(lag_products(x, max_lag)):
        n = T - h
        live = starts < n
        counts = (np.minimum(stops, n) - starts).clip(min=0)
        frac = counts / T
        if centering == "own":
            a = B[:, :n] * p
            raw = np.add.reduceat(a, starts[live], axis=1)
            total = raw.sum(axis=1)
            S[h][:, live] = raw - total[:, None] * frac[live]
        elif centering == "product":
            raw = np.add.reduceat(B[:, :n] * p, starts[live], axis=1)
            bsum = np.add.reduceat(B[:, :n], starts[live], axis=1)
            S[h][:, live] = raw - (p.sum() / T) * bsum
        else:
            raise ConfigurationError(f"unknown centering {centering!r}")
    return S


def bootstrap_deltas(x, grid: Grid, basis, partition: BlockPartition, xi: np.ndarray,
                     centering: str = "product") -> np.ndarray:
    """
    Bootstrapped covariance differences for every replication and grid cell.

    Parameters
    ----------
    x : ndarray
        Centered series.
    grid : Grid
    basis : BasisMatrix
        At least ``grid.max_counter`` rows.
    partition : BlockPartition
    xi : ndarray, shape (M, n_blocks)
        Block multipliers.

    Returns
    -------
    ndarray, shape (M, H + 1, K)
    """
    x = np.asarray(x, dtype=float)
    B = basis.entries[: grid.max_counter].astype(float)
    S = _centered_block_sums(x, B, grid.max_lag, partition, centering)
    return np.einsum("mn,hkn->mhk", xi, S) / x.shape[0]


# --------------------------------------------------------------------------
# Statistic variants
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Variant:
    """Which statistic to compute: weights and/or penalty, or the Wald comparison."""

    name: str = "plain"
    penalty: Penalty = None
    weights: WeightScheme = None
    jww: bool = False

    @classmethod
    def parse(cls, spec: "Variant | str") -> "Variant":
        """Parse ``plain``, ``penalized[(a)]``, ``sqrtprod``, ``weighted``,
        ``weighted-penalized[(a)]``, ``ljungbox`` or ``jww``."""
        if isinstance(spec, Variant):
            return spec
        text = str(spec).strip().lower().replace("_", "-")
        m = re.fullmatch(r"([a-z-]+)(?:\(([^)]*)\))?", text)
        if not m:
            raise ConfigurationError(f"cannot parse statistic variant {spec!r}")
        head, arg = m.group(1), m.group(2)
        a = float(arg) if arg else 0.25
        if head == "plain":
            return PLAIN
        if head == "penalized":
            return cls(text, penalty=AddPowerPenalty(a))
        if head == "sqrtprod":
            return cls("sqrtprod", penalty=SqrtProdPenalty())
        if head == "weighted":
            return cls("weighted", weights=HacWeights())
        if head == "weighted-penalized":
            return cls(text, penalty=AddPowerPenalty(a), weights=HacWeights())
        if head == "ljungbox":
            return cls("ljungbox", weights=LjungBoxWeights())
        if head == "jww":
            return JWW
        raise ConfigurationError(f"unknown statistic variant {spec!r}")


PLAIN = Variant("plain")
PENALIZED = Variant("penalized", penalty=AddPowerPenalty(0.25))
WEIGHTED = Variant("weighted", weights=HacWeights())
WEIGHTED_PENALIZED = Variant("weighted-penalized", penalty=AddPowerPenalty(0.25),
                             weights=HacWeights())
JWW = Variant("jww", jww=True)


@dataclass(frozen=True)
class BootstrapConfig:
    """
    Settings for the dependent wild bootstrap.

    Attributes
    ----------
    M : int
        Number of bootstrap replications.
    seed : int, sequence of int or None
        Root entropy; replication ``i`` uses the substream keyed ``(seed, i)``.
    block_size : int, optional
        Defaults to ``floor(T**(1/2 - eta))``.
    eta : float
        Exponent offset in the default block size rule.
    centering : {"product", "own"}
        Center only ``x_t x_{t+h}`` (default), or ``x_t x_{t+h} B_k(t)`` by its
        own mean. The lag-zero summand ``x_t^2 B_k(t)`` has pointwise mean
        ``gamma_0 B_k(t)`` even under stationarity, so own-mean centering
        inflates the lag-zero draw variance by roughly the block size.
    allow_single_block : bool
        Permit ``block_size >= T`` (degenerate; for testing only).
    """

    M: int = 500
    seed: Seed = 0
    block_size: int | None = None
    eta: float = 1e-10
    centering: str = "product"
    allow_single_block: bool = False

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError(f"number of bootstrap replications must be >= 1; got {self.M}")
        if self.centering not in ("own", "product"):
            raise ConfigurationError(f"unknown centering {self.centering!r}")

    def resolve_block_size(self, T: int) -> int:
        return default_block_size(T, self.eta) if self.block_size is None else int(self.block_size)


@dataclass(frozen=True, eq=False)
class TestResult:
    """Outcome of one bootstrapped test.

    ``p_value`` is the share of bootstrap draws at least as large as
    ``statistic``; ``argmax`` is the maximizing ``(h, k)`` on basis ``basis``.
    """

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    draws: np.ndarray
    argmax: tuple[int, int]
    basis: BasisKind
    variant: Variant
    diffs: Mapping[BasisKind, DiffMatrix]
    grids: Mapping[BasisKind, Grid]
    config: BootstrapConfig
    block_size: int
    per_basis: Mapping[BasisKind, float] = field(default_factory=dict)

    @property
    def diff(self) -> DiffMatrix:
        return self.diffs[self.basis]

    def reject(self, alpha: float) -> bool:
        return self.p_value < alpha


def p_value(statistic: float, draws) -> float:
    draws = np.asarray(draws, dtype=float)
    return float(np.count_nonzero(draws >= statistic)) / draws.shape[0]


def _normalize_bases(basis, grid) -> dict[BasisKind, Grid]:
    if isinstance(basis, (str, BasisKind)):
        kinds = [BasisKind.parse(basis)]
    else:
        kinds = [BasisKind.parse(b) for b in basis]
    if not kinds:
        raise ConfigurationError("at least one basis is required")
    if len(set(kinds)) != len(kinds):
        raise ConfigurationError("duplicate basis in max-max combination")
    if isinstance(grid, Grid):
        return {k: grid for k in kinds}
    grids = {BasisKind.parse(k): g for k, g in dict(grid).items()}
    missing = [k.value for k in kinds if k not in grids]
    if missing:
        raise ConfigurationError(f"no grid given for basis {', '.join(missing)}")
    return {k: grids[k] for k in kinds}


def _bootstrap_covariance(scaled: np.ndarray):
    # scaled: (M, H, K) draws of sqrt(T) * delta_g at lags 1..H
    M, H, K = scaled.shape
    covs = []
    for k in range(K):
        c = np.atleast_2d(np.cov(scaled[:, :, k], rowvar=False)) if M > 1 else np.zeros((H, H))
        covs.append(c)

    def supplier(h: int, k: int) -> np.ndarray:
        return covs[k - 1][:h, :h]

    return supplier


def run_test(x, grid, basis="walsh", variant: Variant | str = "plain",
             config: BootstrapConfig | None = None) -> TestResult:
    """
    Bootstrapped max-correlation difference test of covariance stationarity.

    Parameters
    ----------
    x : array_like
        Raw series; it is centered internally.
    grid : Grid or mapping of basis kind to Grid
        Lags ``0..H`` and counters ``1..K`` to search over.
    basis : str, BasisKind or sequence of them
        Several bases give the max-max statistic over per-basis maxima; all
        bases share the same bootstrap multipliers.
    variant : Variant or str
        ``plain``, ``penalized``, ``weighted``, ``weighted-penalized``,
        ``ljungbox``, ``sqrtprod`` or ``jww``. Weights are estimated once on
        the sample and applied to every draw; penalties are subtracted from
        every draw.
    config : BootstrapConfig, optional

    Returns
    -------
    TestResult
    """
    config = BootstrapConfig() if config is None else config
    variant = Variant.parse(variant)
    xc = center(x)
    T = xc.shape[0]
    grids = _normalize_bases(basis, grid)
    b = config.resolve_block_size(T)
    partition = block_partition(T, b, allow_single_block=config.allow_single_block)
    if T < 4 * b:
        warnings.warn(f"only {T / b:.1f} blocks of size {b} for T={T}", stacklevel=2)
    xi = multiplier_matrix(partition, config.M, config.seed)

    diffs: dict[BasisKind, DiffMatrix] = {}
    stats: dict[BasisKind, float] = {}
    cells: dict[BasisKind, tuple[int, int]] = {}
    draws = np.full(config.M, -np.inf)
    for kind, g in grids.items():
        g.validate(T, kind)
        B = basis_matrix(kind, g.max_counter, T)
        D = diff_matrix(xc, g, B)
        deltas = bootstrap_deltas(xc, g, B, partition, xi, config.centering)
        if variant.jww:
            stat, cell, d = _jww_variant(D, deltas)
        else:
            stat, cell, d = _max_variant(D, deltas, variant)
        diffs[kind], stats[kind], cells[kind] = D, stat, cell
        draws = np.maximum(draws, d)

    best = max(stats, key=lambda k: stats[k])
    statistic = stats[best]
    return TestResult(
        statistic=statistic,
        p_value=p_value(statistic, draws),
        draws=draws,
        argmax=cells[best],
        basis=best,
        variant=variant,
        diffs=diffs,
        grids=grids,
        config=config,
        block_size=partition.block_size,
        per_basis=stats,
    )


def _max_variant(D: DiffMatrix, deltas: np.ndarray, variant: Variant):
    obj = objective(D, variant.weights, variant.penalty)
    flat = int(np.argmax(obj))
    h, k = divmod(flat, obj.shape[1])
    w = resolve_weights(variant.weights, D)
    boot = w * np.abs(deltas) * (math.sqrt(D.T) / D.gamma0)
    boot = boot - penalty_matrix(variant.penalty, D.entries.shape)
    draws = boot.reshape(boot.shape[0], -1).max(axis=1)
    return float(obj.flat[flat]), (h, k + 1), draws


def _jww_variant(D: DiffMatrix, deltas: np.ndarray):
    if D.grid.max_lag < 1:
        raise ConfigurationError("the Wald comparison statistic needs max_lag >= 1")
    T = D.T
    boot = deltas[:, 1:, :]
    gamma = _bootstrap_covariance(math.sqrt(T) * boot)
    forms, n_ridge = jww_quadratic_forms(D.cross[1:], T, gamma)
    boot_forms, _ = jww_quadratic_forms(boot, T, gamma)
    if n_ridge:
        warnings.warn(f"ridge-regularized {n_ridge} bootstrap covariance matrices",
                      RegularizationWarning, stacklevel=3)
    H, K = forms.shape
    inner = forms - 2.0 * np.arange(1, H + 1)[:, None] - np.sqrt(np.arange(K, dtype=float))
    flat = int(np.argmax(inner))
    h, k = divmod(flat, K)
    return float(inner.flat[flat]), (h + 1, k + 1), jww_reduce(boot_forms)
