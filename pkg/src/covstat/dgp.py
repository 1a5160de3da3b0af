"""
Null and alternative data-generating processes for size and power studies.

Null models are simulated over ``2T`` periods and the last ``T`` are kept.
Alternative models have coefficients that move with rescaled time ``t/T``;
they are simulated directly on ``t = 1..T`` with zero initial state (an
optional burn-in simulates them over ``2T`` periods on that longer clock).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from covstat.exceptions import ConfigurationError, InputError

__all__ = ["DgpSpec", "ErrorKind", "Model", "garch11", "gen_errors", "generate", "simulate"]

GARCH_OMEGA, GARCH_ALPHA, GARCH_BETA = 1.0, 0.3, 0.6


class ErrorKind(str, enum.Enum):
    GAUSSIAN = "gauss"
    STUDENT_T5 = "t5"
    GARCH11 = "garch"

    @classmethod
    def parse(cls, value: "ErrorKind | str") -> "ErrorKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"gauss": cls.GAUSSIAN, "gaussian": cls.GAUSSIAN, "normal": cls.GAUSSIAN,
                   "t5": cls.STUDENT_T5, "student": cls.STUDENT_T5, "studentt5": cls.STUDENT_T5,
                   "garch": cls.GARCH11, "garch11": cls.GARCH11}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown error kind {value!r}") from None


class Model(str, enum.Enum):
    NULL1 = "null1"
    NULL2 = "null2"
    NULL3 = "null3"
    NULL4 = "null4"
    ALT1 = "alt1"
    ALT2 = "alt2"
    ALT3 = "alt3"
    ALT4 = "alt4"
    ALT5 = "alt5"
    ALT6 = "alt6"
    ALT7 = "alt7"
    ALT8 = "alt8"
    ALT9 = "alt9"

    @classmethod
    def parse(cls, value: "Model | str") -> "Model":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown model {value!r}") from None

    @property
    def is_null(self) -> bool:
        return self.value.startswith("null")

    @property
    def presample(self) -> int:
        """Number of innovations needed before ``t = 1``."""
        return _PRESAMPLE.get(self, 0)


_PRESAMPLE = {Model.ALT1: 1, Model.ALT2: 6, Model.ALT6: 1, Model.ALT9: 25}


def garch11(z: np.ndarray) -> np.ndarray:
    """``e_t = s_t z_t`` with ``s_t^2 = 1 + .3 e_{t-1}^2 + .6 s_{t-1}^2`` and ``s_1^2 = 1``."""
    z = np.asarray(z, dtype=float)
    e = np.empty_like(z)
    s2 = 1.0
    for t in range(z.shape[0]):
        if t:
            s2 = GARCH_OMEGA + GARCH_ALPHA * e[t - 1] ** 2 + GARCH_BETA * s2
        e[t] = np.sqrt(s2) * z[t]
    return e


def gen_errors(kind: ErrorKind | str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` innovations: iid N(0,1), iid raw t(5), or GARCH(1,1)."""
    kind = ErrorKind.parse(kind)
    if n < 1:
        raise InputError(f"need at least one innovation; got n={n}")
    if kind is ErrorKind.GAUSSIAN:
        return rng.standard_normal(n)
    if kind is ErrorKind.STUDENT_T5:
        return rng.standard_t(5, size=n)
    return garch11(rng.standard_normal(n))


def _ar(phi: np.ndarray, v: np.ndarray, x0: float) -> np.ndarray:
    x = np.empty_like(v)
    prev = x0
    for t in range(v.shape[0]):
        prev = phi[t] * prev + v[t]
        x[t] = prev
    return x


def simulate(model: Model | str, eps: np.ndarray, x0: float = 0.0) -> np.ndarray:
    """
    Run one model on given innovations.

    Parameters
    ----------
    model : Model or str
    eps : ndarray
        Innovations; the first ``model.presample`` entries are pre-sample
        values ``e_{1-p}, ..., e_0``. For ``null4`` these are the standard
        normal shocks ``z_t``.
    x0 : float
        Initial value ``X_0`` for autoregressive models.

    Returns
    -------
    ndarray
        ``X_1, ..., X_n`` with ``n = len(eps) - presample``; time-varying
        coefficients use the clock ``t / n``.
    """
    model = Model.parse(model)
    eps = np.asarray(eps, dtype=float)
    p = model.presample
    n = eps.shape[0] - p
    if n < 1:
        raise InputError(f"{model.value} needs more than {p} innovations")
    e = eps[p:]
    t = np.arange(1, n + 1)
    u = t / n

    if model is Model.NULL1:
        return e.copy()
    if model is Model.NULL2:
        return _ar(np.full(n, 0.5), e, x0)
    if model is Model.NULL3:
        x = np.empty(n)
        prev = x0
        for i in range(n):
            prev = 0.7 * prev - 1.4 * prev * (prev > 0) + e[i]
            x[i] = prev
        return x
    if model is Model.NULL4:
        return garch11(e)
    if model in (Model.ALT1, Model.ALT2, Model.ALT9):
        coef = {Model.ALT1: 1.1, Model.ALT2: 0.8, Model.ALT9: 0.8}[model]
        return coef * np.cos(1.5 - np.cos(4 * np.pi * u)) * eps[:n] + e
    if model is Model.ALT3:
        return _ar(0.6 * np.sin(4 * np.pi * u), e, x0)
    if model is Model.ALT4:
        outer = (4 * t <= n) | (4 * t > 3 * n)
        return _ar(np.where(outer, 0.5, -0.5), e, x0)
    if model is Model.ALT5:
        return _ar(np.where(2 * t <= n, 0.5, -0.5), e, x0)
    if model is Model.ALT6:
        return 2 * e - (1 + 0.5 * np.cos(2 * np.pi * u)) * eps[:n]
    if model is Model.ALT7:
        return _ar(-0.9 * np.sqrt(u), e, x0)
    if model is Model.ALT8:
        v = np.where(4 * t <= 3 * n, e, 2 * e)
        return _ar(np.full(n, 0.5), v, x0)
    raise ConfigurationError(f"unknown model {model!r}")  # pragma: no cover


@dataclass(frozen=True)
class DgpSpec:
    """A model, its innovation kind and the retained sample length.

    ``errors`` is ignored by ``null4``, whose GARCH innovation is built in.
    """

    model: Model
    errors: ErrorKind = ErrorKind.GAUSSIAN
    T: int = 128
    burn_in_alternatives: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        object.__setattr__(self, "errors", ErrorKind.parse(self.errors))
        if int(self.T) != self.T or self.T < 8:
            raise ConfigurationError(f"sample length must be an integer >= 8; got {self.T!r}")

    @property
    def label(self) -> str:
        return f"{self.model.value}/{self.errors.value}/T={self.T}"


def generate(spec: DgpSpec, rng: np.random.Generator) -> np.ndarray:
    """Simulate one raw series of length ``spec.T``."""
    model, T = spec.model, spec.T
    burn = model.is_null or spec.burn_in_alternatives
    n = 2 * T if burn else T
    size = n + model.presample
    if model is Model.NULL4:
        eps = rng.standard_normal(size)
    else:
        eps = gen_errors(spec.errors, size, rng)
    x = simulate(model, eps)
    return x[-T:].copy() if burn else x
