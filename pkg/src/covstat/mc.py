"""
Monte Carlo harness: rejection frequencies of the bootstrapped tests across
models, innovation kinds, sample sizes and statistic variants.

Every replication is a self-contained task whose random streams are keyed by
``(seed, model, errors, T, replication)``, so the report does not depend on
the number of worker processes or the order in which tasks finish. All
variants in a replication share the same series and bootstrap multipliers.
"""

from __future__ import annotations

import enum
import io
import itertools
import logging
import math
import time
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from covstat.basis import BasisKind
from covstat.bootstrap import BootstrapConfig, Variant, run_test
from covstat.dgp import DgpSpec, ErrorKind, Model, generate
from covstat.exceptions import ConfigurationError, CovStatError
from covstat.stats import Grid

__all__ = [
    "Case",
    "McCell",
    "McConfig",
    "McReport",
    "Schedule",
    "jww_critical_values",
    "run_mc",
    "schedule_lookup",
]

logger = logging.getLogger(__name__)


class Case(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"

    @classmethod
    def parse(cls, value: "Case | str") -> "Case":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace(" ", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown schedule case {value!r}") from None


# (max_lag, max_counter) by sample size
TABLE1: dict[tuple[Case, BasisKind], dict[int, tuple[int, int]]] = {
    (Case.CASE1, BasisKind.WALSH): {64: (2, 4), 128: (3, 5), 256: (4, 6), 512: (5, 8)},
    (Case.CASE2, BasisKind.WALSH): {64: (14, 3), 128: (20, 5), 256: (30, 7), 512: (42, 10)},
    (Case.CASE1, BasisKind.HAAR): {64: (2, 4), 128: (3, 5), 256: (4, 5), 512: (5, 6)},
    (Case.CASE2, BasisKind.HAAR): {64: (14, 4), 128: (20, 5), 256: (30, 5), 512: (42, 6)},
}

_FLOOR_SLACK = 1e-9


def _floor(v: float) -> int:
    return int(math.floor(v + _FLOOR_SLACK))


def _formula(case: Case, basis: BasisKind, T: int) -> tuple[int, int]:
    if case is Case.CASE1:
        H = _floor(math.log2(T) ** 0.99 - 3)
    else:
        H = _floor(2 * T**0.49)
    if basis is BasisKind.HAAR:
        K = _floor(math.log(T) ** 0.99)
    elif case is Case.CASE1:
        K = _floor(T ** (1 / 3))
    else:
        K = _floor(0.5 * T**0.49)
    return max(H, 0), max(K, 1)


def schedule_lookup(case: Case | str, basis: BasisKind | str, T: int) -> Grid:
    """
    ``(H_T, K_T)`` for a sample size.

    The published table is returned verbatim for ``T`` in {64, 128, 256, 512};
    other sizes evaluate the column-head formulas with floor rounding. Haar
    counters above ``log2(T)`` are clipped with a warning.
    """
    case, basis = Case.parse(case), BasisKind.parse(basis)
    if int(T) != T or T < 16:
        raise ConfigurationError(f"schedules are defined for T >= 16; got {T!r}")
    table = TABLE1[(case, basis)]
    H, K = table[T] if T in table else _formula(case, basis, T)
    if basis is BasisKind.HAAR and 2**K > T:
        k_max = int(T).bit_length() - 1
        warnings.warn(f"Haar counter {K} clipped to log2(T)={k_max} for T={T}", stacklevel=2)
        K = k_max
    return Grid(H, K)


@dataclass(frozen=True)
class Schedule:
    case: Case
    bases: tuple[BasisKind, ...]

    def grids(self, T: int) -> dict[BasisKind, Grid]:
        return {b: schedule_lookup(self.case, b, T) for b in self.bases}

    @property
    def basis_label(self) -> str:
        return "+".join(b.value for b in self.bases)


@dataclass(frozen=True)
class McConfig:
    """
    Experiment definition.

    ``models`` pairs a model with an innovation kind; every pair is run at
    every sample size in ``Ts``. Several ``bases`` give the max-max statistic.
    """

    models: tuple[tuple[Model, ErrorKind], ...]
    Ts: tuple[int, ...] = (64, 128, 256, 512)
    case: Case = Case.CASE1
    bases: tuple[BasisKind, ...] = (BasisKind.WALSH,)
    reps: int = 500
    bootstrap: BootstrapConfig = field(default_factory=lambda: BootstrapConfig(M=200))
    levels: tuple[float, ...] = (0.01, 0.05, 0.10)
    variants: tuple[Variant, ...] = (Variant(),)
    seed: int = 0
    burn_in_alternatives: bool = False
    jww_cv_reps: int = 0

    def __post_init__(self):
        pairs = []
        for item in self.models:
            if isinstance(item, DgpSpec):
                m, e = item.model, item.errors
            elif isinstance(item, (str, Model)):
                m, e = Model.parse(item), ErrorKind.GAUSSIAN
            else:
                m, e = Model.parse(item[0]), ErrorKind.parse(item[1])
            if m is Model.NULL4:
                e = ErrorKind.GAUSSIAN
            if (m, e) not in pairs:
                pairs.append((m, e))
        object.__setattr__(self, "models", tuple(pairs))
        object.__setattr__(self, "Ts", tuple(int(T) for T in self.Ts))
        object.__setattr__(self, "case", Case.parse(self.case))
        bases = (self.bases,) if isinstance(self.bases, (str, BasisKind)) else self.bases
        object.__setattr__(self, "bases", tuple(BasisKind.parse(b) for b in bases))
        object.__setattr__(self, "variants", tuple(Variant.parse(v) for v in self.variants))
        object.__setattr__(self, "levels", tuple(float(a) for a in self.levels))
        if not self.models:
            raise ConfigurationError("no models configured")
        if not self.Ts:
            raise ConfigurationError("no sample sizes configured")
        if self.reps < 1:
            raise ConfigurationError(f"reps must be >= 1; got {self.reps}")
        if not all(0 < a < 1 for a in self.levels):
            raise ConfigurationError("significance levels must lie in (0, 1)")
        if not self.variants:
            raise ConfigurationError("no statistic variants configured")
        if len({v.name for v in self.variants}) != len(self.variants):
            raise ConfigurationError("duplicate statistic variant names")

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.case, self.bases)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "McConfig":
        """Build from a parsed TOML/JSON mapping (see README for keys)."""
        data = dict(data)
        models = data.pop("models", None)
        errors = data.pop("errors", ["gauss"])
        if models is None:
            raise ConfigurationError("config needs a 'models' list")
        if isinstance(errors, str):
            errors = [errors]
        pairs = []
        for m in models:
            if isinstance(m, (list, tuple)):
                pairs.append((m[0], m[1]))
            else:
                pairs.extend((m, e) for e in errors)
        boot = dict(data.pop("bootstrap", {}))
        kwargs: dict[str, Any] = {"models": tuple(pairs)}
        if "Ts" in data or "T" in data:
            Ts = data.pop("Ts", None) or data.pop("T")
            kwargs["Ts"] = tuple([Ts] if isinstance(Ts, int) else Ts)
        if "basis" in data:
            kwargs["bases"] = data.pop("basis")
        for key in ("case", "bases", "reps", "levels", "variants", "seed",
                    "burn_in_alternatives", "jww_cv_reps"):
            if key in data:
                kwargs[key] = data.pop(key)
        if isinstance(kwargs.get("bases"), str) and kwargs["bases"].lower() == "both":
            kwargs["bases"] = ("walsh", "haar")
        if isinstance(kwargs.get("variants"), str):
            kwargs["variants"] = (kwargs["variants"],)
        if data:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(data))}")
        try:
            kwargs["bootstrap"] = BootstrapConfig(**{"M": 200, **boot})
        except TypeError as exc:
            raise ConfigurationError(f"bad bootstrap settings: {exc}") from None
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class McCell:
    """All replications of one (model, errors, T, variant) combination.

    ``p_values`` holds NaN and ``argmax`` holds -1 for failed replications.
    """

    model: Model
    errors: ErrorKind
    T: int
    variant: str
    p_values: np.ndarray
    statistics: np.ndarray
    argmax: np.ndarray
    failures: tuple[str, ...] = ()

    @property
    def reps(self) -> int:
        return self.p_values.shape[0]

    @property
    def failed(self) -> int:
        return int(np.count_nonzero(np.isnan(self.p_values)))

    def rejections(self, level: float) -> int:
        with np.errstate(invalid="ignore"):
            return int(np.count_nonzero(self.p_values < level))

    def frequency(self, level: float) -> float:
        return self.rejections(level) / self.reps

    def modal_lag(self, level: float) -> int | None:
        """Most common ``h*`` among rejecting replications (smallest on ties)."""
        with np.errstate(invalid="ignore"):
            lags = self.argmax[self.p_values < level, 0]
        if lags.size == 0:
            return None
        counts = Counter(int(h) for h in lags)
        top = max(counts.values())
        return min(h for h, c in counts.items() if c == top)


TSV_COLUMNS = ("model", "errors", "T", "case", "basis", "variant", "level",
               "reps", "failed", "rejections", "frequency")


@dataclass(eq=False)
class McReport:
    config: McConfig
    cells: list[McCell]
    elapsed: float = 0.0
    critical_values: dict[int, dict[float, float]] = field(default_factory=dict)

    def cell(self, model, errors="gauss", T=None, variant="plain") -> McCell:
        model, errors = Model.parse(model), ErrorKind.parse(errors)
        for c in self.cells:
            if c.model is model and c.errors is errors and c.variant == variant \
                    and (T is None or c.T == T):
                return c
        raise KeyError((model.value, errors.value, T, variant))

    def frequency(self, model, errors="gauss", T=None, variant="plain", level=0.05) -> float:
        return self.cell(model, errors, T, variant).frequency(level)

    def rows(self):
        sched = self.config.schedule
        for c in self.cells:
            for a in self.config.levels:
                yield (c.model.value, c.errors.value, c.T, sched.case.value, sched.basis_label,
                       c.variant, a, c.reps, c.failed, c.rejections(a), c.frequency(a))

    def to_tsv(self) -> str:
        """One row per (cell, level); the column contract is ``TSV_COLUMNS``."""
        out = io.StringIO()
        out.write("\t".join(TSV_COLUMNS) + "\n")
        for row in self.rows():
            *head, a, reps, failed, rej, freq = row
            fields = [str(v) for v in head] + [f"{a:g}", str(reps), str(failed), str(rej),
                                               f"{freq:.6f}"]
            out.write("\t".join(fields) + "\n")
        return out.getvalue()

    def to_table(self) -> str:
        """Human-readable table with one column per significance level."""
        levels = self.config.levels
        head = f"{'model':<7}{'errors':<7}{'T':>5}  {'variant':<20}" + "".join(
            f"{f'{100 * a:g}%':>8}" for a in levels) + f"{'failed':>8}"
        lines = [f"case={self.config.case.value} basis={self.config.schedule.basis_label} "
                 f"reps={self.config.reps} M={self.config.bootstrap.M} "
                 f"elapsed={self.elapsed:.1f}s", head, "-" * len(head)]
        for c in self.cells:
            freqs = "".join(f"{c.frequency(a):>8.3f}" for a in levels)
            lines.append(f"{c.model.value:<7}{c.errors.value:<7}{c.T:>5}  {c.variant:<20}"
                         f"{freqs}{c.failed:>8}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------

_MODEL_ORD = {m: i for i, m in enumerate(Model)}
_ERROR_ORD = {e: i for i, e in enumerate(ErrorKind)}


def _task_key(cfg: McConfig, model: Model, errors: ErrorKind, T: int, r: int) -> list[int]:
    return [cfg.seed, _MODEL_ORD[model], _ERROR_ORD[errors], T, r]


def _replicate(args) -> list[tuple[float, float, int, int] | str]:
    cfg, model, errors, T, r = args
    key = _task_key(cfg, model, errors, T, r)
    spec = DgpSpec(model, errors, T, cfg.burn_in_alternatives)
    grids = cfg.schedule.grids(T)
    boot = replace(cfg.bootstrap, seed=key + [1])
    out: list[tuple[float, float, int, int] | str] = []
    try:
        x = generate(spec, np.random.default_rng(np.random.SeedSequence(key + [0])))
    except CovStatError as exc:  # pragma: no cover - generators do not raise for valid specs
        return [f"{type(exc).__name__}: {exc}"] * len(cfg.variants)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for v in cfg.variants:
            try:
                res = run_test(x, grids, list(grids), v, boot)
                out.append((res.p_value, res.statistic, res.argmax[0], res.argmax[1]))
            except (CovStatError, np.linalg.LinAlgError) as exc:
                out.append(f"{type(exc).__name__}: {exc}")
    return out


def _collect(cfg: McConfig, tasks, results) -> list[McCell]:
    by_cell: dict[tuple, list] = {}
    for (_, model, errors, T, r), res in zip(tasks, results):
        by_cell.setdefault((model, errors, T), []).append(res)
    cells = []
    for (model, errors, T), reps in by_cell.items():
        for j, v in enumerate(cfg.variants):
            p = np.full(len(reps), np.nan)
            s = np.full(len(reps), np.nan)
            am = np.full((len(reps), 2), -1, dtype=np.int64)
            failures = []
            for i, res in enumerate(reps):
                item = res[j]
                if isinstance(item, str):
                    failures.append(f"rep {i}: {item}")
                else:
                    p[i], s[i], am[i, 0], am[i, 1] = item
            if failures:
                logger.warning("%s/%s/T=%d/%s: %d failed replications",
                               model.value, errors.value, T, v.name, len(failures))
            cells.append(McCell(model, errors, T, v.name, p, s, am, tuple(failures)))
    return cells


def run_mc(cfg: McConfig, workers: int = 1) -> McReport:
    """
    Run every configured cell and tally ``p < level`` per replication.

    Failed replications are recorded in each cell's ``failures`` and counted
    in the ``failed`` column; they never count as rejections.
    """
    start = time.perf_counter()
    tasks = [(cfg, m, e, T, r) for (m, e), T in itertools.product(cfg.models, cfg.Ts)
             for r in range(cfg.reps)]
    if workers <= 1:
        results = [_replicate(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=chunk))
    cells = _collect(cfg, tasks, results)

    report = McReport(cfg, cells)
    if cfg.jww_cv_reps > 0 and any(v.jww for v in cfg.variants):
        _add_cv_cells(report, cfg)
    report.elapsed = time.perf_counter() - start
    return report


def jww_critical_values(T: int, grids: Mapping[BasisKind, Grid], reps: int,
                        levels: Sequence[float], bootstrap: BootstrapConfig,
                        seed: int = 0) -> dict[float, float]:
    """
    Approximate critical values of the Wald comparison statistic.

    Simulates ``reps`` iid N(0, 1) samples of length ``T`` and returns the
    empirical ``1 - level`` quantiles. The covariance matrix is the same
    bootstrap estimate the test uses, so this is a small-scale stand-in for
    a large parametric simulation, not a replacement for it.
    """
    stats = np.empty(reps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(reps):
            key = [seed, T, r]
            x = np.random.default_rng(np.random.SeedSequence(key + [0])).standard_normal(T)
            res = run_test(x, dict(grids), list(grids), "jww", replace(bootstrap, seed=key + [1]))
            stats[r] = res.statistic
    return {a: float(np.quantile(stats, 1 - a)) for a in levels}


def _add_cv_cells(report: McReport, cfg: McConfig) -> None:
    jww_name = next(v.name for v in cfg.variants if v.jww)
    for T in cfg.Ts:
        grids = cfg.schedule.grids(T)
        report.critical_values[T] = jww_critical_values(
            T, grids, cfg.jww_cv_reps, cfg.levels, cfg.bootstrap, seed=cfg.seed + 7919)
    for c in [c for c in report.cells if c.variant == jww_name]:
        cvs = report.critical_values[c.T]
        # encode the cv decision as a pseudo p-value just below each level beaten
        p = np.full(c.reps, np.nan)
        ok = ~np.isnan(c.statistics)
        p[ok] = 1.0
        levels = sorted(cfg.levels)
        lower = [0.0] + levels[:-1]
        for a, below in sorted(zip(levels, lower), reverse=True):
            p[ok & (c.statistics > cvs[a])] = (a + below) / 2
        report.cells.append(McCell(c.model, c.errors, c.T, f"{jww_name}-cv", p, c.statistics,
                                   c.argmax, c.failures))
