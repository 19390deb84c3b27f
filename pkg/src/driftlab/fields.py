"""Drift fields, rate fields, and jump-size laws of the walk model.

The walk moves by positive up-jumps and negative down-jumps whose
instantaneous rates are tied to a single scalar drift field phi:

    lambda(x, t) = 1/2 + phi(x, t)      up-jump rate
    mu(x, t)     = 1/2 - phi(x, t)      down-jump rate

so the total event rate is identically 1 and phi carries all state and
time dependence.  In-scope fields are nonnegative, non-increasing in t,
and clipped into [0, 1/2] so mu never goes negative (on the clip
boundary mu is exactly 0); the signed mean-reverting family is a
diagnostics-only extension (clipped symmetrically) that the recurrence
classifier refuses.

Space is regularized near the origin: fields evaluate at
max(|x|, x_floor) and extend to x < 0 through |x|, which keeps the
1/x-type families bounded without changing their tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "PHI_MAX",
    "DEFAULT_X_FLOOR",
    "DEFAULT_T_PROXY",
    "DriftField",
    "Zero",
    "CriticalLamperti",
    "PowerLaw",
    "MeanReverting",
    "Tabulated",
    "RateField",
    "JumpLaw",
    "Constant1",
    "ExponentialMean1",
    "GammaMean1",
    "UniformMean1",
    "eval_phi",
    "eval_rates",
    "sample_jump",
]

PHI_MAX = 0.5
DEFAULT_X_FLOOR = 1.0
DEFAULT_T_PROXY = 1e8

ArrayLike = Union[float, np.ndarray]

ScalarPhi = Callable[[float, float], float]


def _reg_abs(x: np.ndarray, x_floor: float) -> np.ndarray:
    return np.maximum(np.abs(x), x_floor)


def _as_result(v: np.ndarray) -> ArrayLike:
    return v if v.ndim else float(v)


class DriftField:
    """Base class for drift fields.

    Subclasses provide vectorized ``phi(x, t)`` and a scalar fast path
    ``scalar_phi()`` returning a plain-float closure for event loops.
    ``signed`` marks families whose phi may go negative.
    """

    signed: bool = False
    x_floor: float

    def phi(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def scalar_phi(self) -> ScalarPhi:
        raise NotImplementedError

    def _clip(self, v: np.ndarray) -> np.ndarray:
        lo = -PHI_MAX if self.signed else 0.0
        return np.clip(v, lo, PHI_MAX)


@dataclass(frozen=True)
class Zero(DriftField):
    """The driftless field, phi identically 0."""

    x_floor: float = DEFAULT_X_FLOOR

    def __post_init__(self) -> None:
        if self.x_floor <= 0:
            raise ValueError("x_floor must be positive")

    def phi(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        out = np.zeros(np.broadcast(np.asarray(x, float), np.asarray(t, float)).shape)
        return _as_result(out)

    def scalar_phi(self) -> ScalarPhi:
        return lambda x, t: 0.0


@dataclass(frozen=True)
class CriticalLamperti(DriftField):
    """phi(x, t) = c / (4 max(|x|, x_floor)), independent of t.

    Along the parabolic scale t = x^2 this family sits exactly on the
    recurrence/transience boundary: c < 1 recurrent, c > 1 transient.
    """

    c: float
    x_floor: float = DEFAULT_X_FLOOR

    def __post_init__(self) -> None:
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if self.x_floor <= 0:
            raise ValueError("x_floor must be positive")

    def phi(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        ax = _reg_abs(x, self.x_floor)
        v = np.broadcast_arrays(self.c / (4.0 * ax), t)[0]
        return _as_result(self._clip(np.array(v)))

    def scalar_phi(self) -> ScalarPhi:
        c4 = self.c / 4.0
        fl = self.x_floor
        hi = PHI_MAX

        def f(x: float, t: float) -> float:
            ax = x if x >= 0.0 else -x
            if ax < fl:
                ax = fl
            v = c4 / ax
            return hi if v > hi else v

        return f


@dataclass(frozen=True)
class PowerLaw(DriftField):
    """phi(x, t) = rho * max(|x|, x_floor)^alpha * t^(-beta).

    With alpha = 2*beta - 1 this is the critical-window family: along
    t = x^2 it collapses to rho / x.  t = 0 evaluates at the clip
    ceiling (the unclipped value diverges there for beta > 0).
    """

    rho: float
    alpha: float
    beta: float
    x_floor: float = DEFAULT_X_FLOOR

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.x_floor <= 0:
            raise ValueError("x_floor must be positive")

    def phi(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        ax = _reg_abs(x, self.x_floor)
        if self.beta == 0.0:
            tf = np.broadcast_arrays(np.ones(()), t)[0]
        else:
            with np.errstate(over="ignore"):
                tf = np.where(t > 0.0, t, 1.0) ** (-self.beta)
            tf = np.where(t > 0.0, tf, np.inf)
        with np.errstate(over="ignore"):
            v = self.rho * ax**self.alpha * tf
        return _as_result(self._clip(np.array(v)))

    def scalar_phi(self) -> ScalarPhi:
        rho, alpha, beta = self.rho, self.alpha, self.beta
        fl = self.x_floor
        hi = PHI_MAX

        def f(x: float, t: float) -> float:
            ax = x if x >= 0.0 else -x
            if ax < fl:
                ax = fl
            if beta != 0.0:
                if t <= 0.0:
                    return hi
                v = rho * ax**alpha * t**-beta
            else:
                v = rho * ax**alpha
            if v > hi:
                return hi
            return v

        return f


@dataclass(frozen=True)
class MeanReverting(DriftField):
    """Signed field pulling toward the origin:

        phi(x, t) = -(kappa/2) * sign(x) * min(1/2, |x| / x_floor)

    Positive x gets negative drift and vice versa, so the walk is
    ergodic for kappa > 0.  Diagnostics-only: the tail classifier
    rejects signed fields.
    """

    signed = True

    kappa: float
    x_floor: float = DEFAULT_X_FLOOR

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.x_floor <= 0:
            raise ValueError("x_floor must be positive")

    def phi(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        m = np.minimum(0.5, np.abs(x) / self.x_floor)
        v = -0.5 * self.kappa * np.sign(x) * m
        v = np.broadcast_arrays(v, t)[0]
        return _as_result(self._clip(np.array(v)))

    def scalar_phi(self) -> ScalarPhi:
        half_k = 0.5 * self.kappa
        fl = self.x_floor
        hi = PHI_MAX

        def f(x: float, t: float) -> float:
            if x == 0.0:
                return 0.0
            ax = x if x > 0.0 else -x
            m = ax / fl
            if m > 0.5:
                m = 0.5
            v = half_k * m
            if v > hi:
                v = hi
            return -v if x > 0.0 else v

        return f


@dataclass(frozen=True, eq=False)
class Tabulated(DriftField):
    """Bilinear interpolation of phi samples on a rectangular grid.

    ``values[i, j]`` is phi at (x_grid[i], t_grid[j]).  Queries are
    taken at max(|x|, x_floor) and clamped to the grid edges, so the
    field is constant beyond the tabulated range.  Construction rejects
    tables that are negative anywhere or increasing along t.
    """

    x_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    x_floor: float = DEFAULT_X_FLOOR

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_grid", np.asarray(self.x_grid, float))
        object.__setattr__(self, "t_grid", np.asarray(self.t_grid, float))
        object.__setattr__(self, "values", np.asarray(self.values, float))
        if self.x_floor <= 0:
            raise ValueError("x_floor must be positive")
        if self.x_grid.ndim != 1 or self.x_grid.size < 2:
            raise ValueError("x_grid must be 1-d with at least 2 points")
        if self.t_grid.ndim != 1 or self.t_grid.size < 2:
            raise ValueError("t_grid must be 1-d with at least 2 points")
        if np.any(np.diff(self.x_grid) <= 0) or np.any(self.x_grid < 0):
            raise ValueError("x_grid must be nonnegative and strictly increasing")
        if np.any(np.diff(self.t_grid) <= 0) or np.any(self.t_grid < 0):
            raise ValueError("t_grid must be nonnegative and strictly increasing")
        if self.values.shape != (self.x_grid.size, self.t_grid.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.x_grid.size}, {self.t_grid.size})"
            )
        if np.any(self.values < 0):
            raise ValueError("tabulated phi must be nonnegative")
        if np.any(np.diff(self.values, axis=1) > 1e-12):
            raise ValueError("tabulated phi must be non-increasing along t")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tabulated):
            return NotImplemented
        return (
            self.x_floor == other.x_floor
            and np.array_equal(self.x_grid, other.x_grid)
            and np.array_equal(self.t_grid, other.t_grid)
            and np.array_equal(self.values, other.values)
        )

    def phi(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        qx, qt = np.broadcast_arrays(_reg_abs(x, self.x_floor), t)
        qx = np.clip(qx, self.x_grid[0], self.x_grid[-1])
        qt = np.clip(qt, self.t_grid[0], self.t_grid[-1])
        ix = np.clip(np.searchsorted(self.x_grid, qx, side="right") - 1, 0, self.x_grid.size - 2)
        it = np.clip(np.searchsorted(self.t_grid, qt, side="right") - 1, 0, self.t_grid.size - 2)
        x0, x1 = self.x_grid[ix], self.x_grid[ix + 1]
        t0, t1 = self.t_grid[it], self.t_grid[it + 1]
        wx = (qx - x0) / (x1 - x0)
        wt = (qt - t0) / (t1 - t0)
        v = (
            self.values[ix, it] * (1 - wx) * (1 - wt)
            + self.values[ix + 1, it] * wx * (1 - wt)
            + self.values[ix, it + 1] * (1 - wx) * wt
            + self.values[ix + 1, it + 1] * wx * wt
        )
        return _as_result(self._clip(np.array(v)))

    def scalar_phi(self) -> ScalarPhi:
        def f(x: float, t: float) -> float:
            return float(self.phi(x, t))

        return f


@dataclass(frozen=True)
class RateField:
    """Pairs a drift field with the jump-rate map and a late-time proxy.

    ``limit_rates`` evaluates at t = t_proxy, a stand-in for the
    t -> infinity rates used when a time-homogeneous chain is read off
    the field.
    """

    drift: DriftField
    t_proxy: float = DEFAULT_T_PROXY

    def __post_init__(self) -> None:
        if self.t_proxy <= 0:
            raise ValueError("t_proxy must be positive")

    def rates(self, x: ArrayLike, t: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
        p = self.drift.phi(x, t)
        lam = 0.5 + np.asarray(p)
        mu = 1.0 - lam
        return _as_result(lam), _as_result(np.array(mu))

    def limit_rates(self, x: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
        return self.rates(x, self.t_proxy)

    def scalar_rates(self) -> Callable[[float, float], tuple[float, float]]:
        phi = self.drift.scalar_phi()

        def f(x: float, t: float) -> tuple[float, float]:
            lam = 0.5 + phi(x, t)
            return lam, 1.0 - lam

        return f


class JumpLaw:
    """Positive jump sizes with mean exactly 1 and finite variance."""

    variance: float

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_block(rng, 1)[0])

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant1(JumpLaw):
    """Unit jumps; the walk lives on the integer lattice."""

    variance = 0.0

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.ones(n)


@dataclass(frozen=True)
class ExponentialMean1(JumpLaw):
    variance = 1.0

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.exponential(1.0, n)


@dataclass(frozen=True)
class GammaMean1(JumpLaw):
    """Gamma(k, 1/k): mean 1, variance 1/k."""

    k: float

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError("shape k must be positive")

    @property
    def variance(self) -> float:  # type: ignore[override]
        return 1.0 / self.k

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.gamma(self.k, 1.0 / self.k, n)


@dataclass(frozen=True)
class UniformMean1(JumpLaw):
    """Uniform on [1 - d, 1 + d] with 0 <= d < 1, variance d^2/3."""

    d: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.d < 1.0:
            raise ValueError("half-width d must satisfy 0 <= d < 1")

    @property
    def variance(self) -> float:  # type: ignore[override]
        return self.d * self.d / 3.0

    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(1.0 - self.d, 1.0 + self.d, n)


def eval_phi(field: DriftField, x: ArrayLike, t: ArrayLike) -> ArrayLike:
    """Drift field value(s) at (x, t); t must be nonnegative."""
    if np.any(np.asarray(t, float) < 0):
        raise ValueError("t must be nonnegative")
    return field.phi(x, t)


def eval_rates(rf: RateField, x: ArrayLike, t: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """Up/down jump rates at (x, t).  Their sum is identically 1."""
    if np.any(np.asarray(t, float) < 0):
        raise ValueError("t must be nonnegative")
    return rf.rates(x, t)


def sample_jump(law: JumpLaw, rng: np.random.Generator, n: int = 1) -> np.ndarray:
    """Draw n jump sizes from the law using the supplied generator."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return law.sample_block(rng, n)
