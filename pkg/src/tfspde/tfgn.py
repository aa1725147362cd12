"""Tempered fractional Brownian motion: covariance, Cholesky factor, sampling.

The driving noise of the SPDE is a family of mutually independent tfBm paths,
one per spectral mode. All paths share the same increment covariance on a
given time grid, so a single Cholesky factor per ``(params, grid)`` serves
every mode and every Monte Carlo trajectory.

Random streams are keyed by ``(seed, trajectory, mode key)`` through
:class:`numpy.random.SeedSequence` spawn keys feeding a counter-based Philox
generator. A mode's increments therefore do not depend on which other modes
or trajectories are drawn, or in which order.
"""

from __future__ import annotations

import functools
import hashlib
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import specfun
from .errors import DomainError, FactorizationError, ShapeError

__all__ = [
    "TemperingParams",
    "TimeGrid",
    "IncrementCovariance",
    "CholeskyFactor",
    "IncrementTable",
    "c_t_squared",
    "variance",
    "covariance",
    "increment_covariance",
    "cholesky",
    "shared_factor",
    "standard_normals",
    "sample_increments",
    "coarsen",
    "block_sum",
    "dump_table",
    "load_table",
]

SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class TemperingParams:
    """Hurst exponent ``hurst`` (H > 0, H != 1/2) and tempering rate ``tempering`` (mu > 0)."""

    hurst: float
    tempering: float

    def __post_init__(self):
        h, mu = float(self.hurst), float(self.tempering)
        if not (h > 0.0 and math.isfinite(h)):
            raise DomainError(f"Hurst exponent must be positive, got {self.hurst!r}")
        if h == 0.5:
            raise DomainError(
                "Hurst exponent H = 1/2 is excluded: the tempered fractional "
                "Brownian motion is defined only for H != 1/2"
            )
        if not (mu > 0.0 and math.isfinite(mu)):
            raise DomainError(f"tempering rate mu must be positive, got {self.tempering!r}")
        object.__setattr__(self, "hurst", h)
        object.__setattr__(self, "tempering", mu)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, horizon]`` with ``steps`` increments."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (float(self.horizon) > 0.0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps!r}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        """Grid times ``t_0 = 0, ..., t_steps = horizon``."""
        return self.dt * np.arange(self.steps + 1)

    def coarsen(self, ratio: int) -> "TimeGrid":
        if ratio < 1 or self.steps % ratio:
            raise ShapeError(f"ratio {ratio} does not divide {self.steps} steps")
        return TimeGrid(self.horizon, self.steps // ratio)


def c_t_squared(params: TemperingParams, t):
    """The tfBm scale factor ``C_t^2`` by its closed form.

    ``C_t^2 = 2 Gamma(2H) / (2 mu |t|)^(2H)
              - 2 Gamma(H + 1/2) K_H(mu |t|) / (sqrt(pi) (2 mu |t|)^H)``
    and ``C_0^2 = 0``. Accepts scalars or arrays.

    The two terms cancel to leading order for ``mu |t| -> 0``; use
    :func:`variance` when ``C_t^2 |t|^(2H)`` itself is wanted.
    """
    h, mu = params.hurst, params.tempering
    g2h = math.exp(specfun.ln_gamma(2.0 * h))
    gh = math.exp(specfun.ln_gamma(h + 0.5))

    def scalar(tt):
        a = abs(float(tt))
        if a == 0.0:
            return 0.0
        y = mu * a
        return (2.0 * g2h / (2.0 * y) ** (2.0 * h)
                - 2.0 * gh * specfun.bessel_k(h, y) / (math.sqrt(math.pi) * (2.0 * y) ** h))

    if np.ndim(t) == 0:
        return scalar(t)
    t = np.asarray(t, dtype=float)
    return np.array([scalar(v) for v in t.ravel()]).reshape(t.shape)


def variance(params: TemperingParams, t):
    """``Var beta(t) = C_t^2 |t|^(2H)``, evaluated without cancellation.

    Writing ``y = mu |t|``,

        C_t^2 |t|^(2H) = 2**(1-H) Gamma(H + 1/2) / (sqrt(pi) mu^(2H))
                         * (2**(H-1) Gamma(H) - y^H K_H(y)),

    and the bracket comes from :func:`specfun.bessel_k_deficit`.
    """
    h, mu = params.hurst, params.tempering
    pref = 2.0 ** (1.0 - h) * math.exp(specfun.ln_gamma(h + 0.5)) / (
        math.sqrt(math.pi) * mu ** (2.0 * h))

    if np.ndim(t) == 0:
        return pref * specfun.bessel_k_deficit(h, mu * abs(float(t)))
    t = np.asarray(t, dtype=float)
    flat = [pref * specfun.bessel_k_deficit(h, mu * abs(v)) for v in t.ravel()]
    return np.array(flat).reshape(t.shape)


def covariance(params: TemperingParams, t, s):
    """``E[beta(t) beta(s)] = (V(t) + V(s) - V(t - s)) / 2`` with ``V = variance``."""
    return 0.5 * (variance(params, t) + variance(params, s)
                  - variance(params, np.subtract(t, s)))


@dataclass(frozen=True)
class IncrementCovariance:
    """Toeplitz covariance of the increment vector on ``grid``.

    Only the generator ``first_row`` is stored; :attr:`matrix` expands it.
    """

    grid: TimeGrid
    params: TemperingParams
    first_row: np.ndarray = field(repr=False)

    @property
    def matrix_dim(self) -> int:
        return self.grid.steps

    @property
    def matrix(self) -> np.ndarray:
        idx = np.arange(self.matrix_dim)
        return self.first_row[np.abs(idx[:, None] - idx[None, :])]


def increment_covariance(params: TemperingParams, grid: TimeGrid) -> IncrementCovariance:
    """Covariance of ``Z_i = beta(t_i) - beta(t_{i-1})``.

    Lag ``k`` entry: ``(V((k+1) dt) + V((k-1) dt) - 2 V(k dt)) / 2``.
    """
    n = grid.steps
    v = variance(params, grid.dt * np.arange(n + 1))
    row = np.empty(n)
    row[0] = v[1]
    if n > 1:
        k = np.arange(1, n)
        row[1:] = 0.5 * (v[k + 1] + v[k - 1] - 2.0 * v[k])
    row.setflags(write=False)
    return IncrementCovariance(grid, params, row)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``lower`` with ``lower @ lower.T`` equal to the covariance."""

    lower: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def cholesky(cov, pivot_tol: Optional[float] = None, ridge: float = 0.0) -> CholeskyFactor:
    """Cholesky factor by the column recurrence

        l_jj = sqrt(S_jj - sum_{k<j} l_jk^2)
        l_ij = (S_ij - sum_{k<j} l_ik l_jk) / l_jj,   i > j.

    Parameters
    ----------
    cov : IncrementCovariance or ndarray
        Symmetric matrix to factor.
    pivot_tol : float, optional
        A squared pivot ``<= pivot_tol`` raises. Defaults to
        ``dim * eps * max(diag)``.
    ridge : float
        Diagnostic only: adds ``ridge * I`` before factoring. No jitter is
        ever added implicitly.

    Raises
    ------
    FactorizationError
        Names the failing row.
    """
    a = cov.matrix if isinstance(cov, IncrementCovariance) else np.array(cov, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if ridge:
        a = a + ridge * np.eye(n)
    if pivot_tol is None:
        pivot_tol = n * np.finfo(float).eps * float(np.max(np.abs(np.diag(a))))
    low = np.zeros_like(a)
    for j in range(n):
        row_j = low[j, :j]
        pivot = a[j, j] - row_j @ row_j
        if not pivot > pivot_tol:
            raise FactorizationError(j, float(pivot), float(pivot_tol))
        d = math.sqrt(pivot)
        low[j, j] = d
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ row_j) / d
    low.setflags(write=False)
    return CholeskyFactor(low)


@functools.lru_cache(maxsize=16)
def shared_factor(params: TemperingParams, grid: TimeGrid) -> CholeskyFactor:
    """Cached factor for ``(params, grid)``; immutable and shared across threads."""
    return cholesky(increment_covariance(params, grid))


ModeKey = Tuple[int, ...]


def _check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= seed <= SEED_MAX:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def standard_normals(seed: int, trajectory: int, mode_keys: Sequence[ModeKey], steps: int) -> np.ndarray:
    """Independent N(0, 1) rows, one per mode key, from keyed Philox substreams."""
    seed = _check_seed(seed)
    out = np.empty((len(mode_keys), steps))
    for row, key in enumerate(mode_keys):
        ss = np.random.SeedSequence(seed, spawn_key=(int(trajectory), *map(int, key)))
        out[row] = np.random.Generator(np.random.Philox(ss)).standard_normal(steps)
    return out


@dataclass(frozen=True)
class IncrementTable:
    """Per-mode tfBm increments on ``grid``.

    ``data[m, k]`` is ``beta^m(t_{k+1}) - beta^m(t_k)`` for the mode with key
    ``mode_keys[m]``.
    """

    grid: TimeGrid
    params: TemperingParams
    data: np.ndarray = field(repr=False)
    seed: int
    trajectory: int = 0
    mode_keys: Tuple[ModeKey, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != self.grid.steps:
            raise ShapeError(
                f"data shape {self.data.shape} does not match {self.grid.steps} steps")
        if not self.mode_keys:
            object.__setattr__(self, "mode_keys", tuple((m,) for m in range(self.data.shape[0])))
        elif len(self.mode_keys) != self.data.shape[0]:
            raise ShapeError("one mode key per data row is required")

    @property
    def modes(self) -> int:
        return self.data.shape[0]

    def paths(self) -> np.ndarray:
        """Cumulative sums: ``beta^m(t_k)`` for ``k = 1..steps``."""
        return np.cumsum(self.data, axis=1)

    def rows_for(self, keys: Sequence[ModeKey]) -> np.ndarray:
        """Rows matching ``keys``; raises :class:`ShapeError` if one is missing."""
        index = {k: i for i, k in enumerate(self.mode_keys)}
        try:
            rows = [index[tuple(k)] for k in keys]
        except KeyError as exc:
            raise ShapeError(f"increment table has no row for mode {exc.args[0]}") from None
        return self.data[rows]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(struct.pack("<ddQq", self.params.hurst, self.params.tempering,
                             self.seed, self.trajectory))
        h.update(np.ascontiguousarray(self.data).tobytes())
        return h.hexdigest()[:16]


def sample_increments(factor: CholeskyFactor, modes, seed: int, *, grid: TimeGrid,
                      params: TemperingParams, trajectory: int = 0,
                      normals: Optional[np.ndarray] = None) -> IncrementTable:
    """Draw ``Z = L V`` for each mode.

    Parameters
    ----------
    factor : CholeskyFactor
        Factor of the increment covariance on ``grid``.
    modes : int or sequence of tuples
        Mode count (keys ``(0,), (1,), ...``) or explicit mode keys.
    seed, trajectory : int
        Stream identity; see :func:`standard_normals`.
    normals : ndarray, optional
        Replaces the random draws (shape ``(n_modes, steps)``); for testing.
    """
    if factor.dim != grid.steps:
        raise ShapeError(f"factor has dim {factor.dim}, grid has {grid.steps} steps")
    keys = tuple((m,) for m in range(modes)) if isinstance(modes, (int, np.integer)) \
        else tuple(tuple(k) for k in modes)
    if normals is None:
        normals = standard_normals(seed, trajectory, keys, grid.steps)
    elif normals.shape != (len(keys), grid.steps):
        raise ShapeError(f"normals shape {normals.shape} != {(len(keys), grid.steps)}")
    data = normals @ factor.lower.T
    return IncrementTable(grid, params, data, _check_seed(seed), int(trajectory), keys)


def coarsen(table: IncrementTable, ratio: int) -> IncrementTable:
    """Block-sum increments by ``ratio``; the horizon is unchanged.

    Blocks are summed strictly left to right, so the result is reproducible
    bit for bit.
    """
    if int(ratio) != ratio or ratio < 1 or table.grid.steps % ratio:
        raise ShapeError(f"ratio {ratio!r} does not divide {table.grid.steps} steps")
    ratio = int(ratio)
    if ratio == 1:
        return table
    return IncrementTable(table.grid.coarsen(ratio), table.params,
                          block_sum(table.data, ratio), table.seed,
                          table.trajectory, table.mode_keys)


def block_sum(data, ratio: int) -> np.ndarray:
    """Sum consecutive blocks of ``ratio`` entries along the last axis, left to right."""
    data = np.asarray(data, dtype=float)
    if data.shape[-1] % ratio:
        raise ShapeError(f"ratio {ratio} does not divide {data.shape[-1]} steps")
    blocks = data.reshape(data.shape[:-1] + (-1, ratio))
    acc = blocks[..., 0].copy()
    for r in range(1, ratio):
        acc += blocks[..., r]
    return acc


_TABLE_HEADER = struct.Struct("<dddQQQ")


def dump_table(table: IncrementTable, path: Union[str, Path]) -> None:
    """Write ``table`` as a little-endian header ``(H, mu, T, steps, modes, seed)``
    followed by row-major float64 data."""
    with open(path, "wb") as fh:
        fh.write(_TABLE_HEADER.pack(table.params.hurst, table.params.tempering,
                                    table.grid.horizon, table.grid.steps,
                                    table.modes, table.seed))
        fh.write(np.ascontiguousarray(table.data, dtype="<f8").tobytes())


def load_table(path: Union[str, Path]) -> IncrementTable:
    """Inverse of :func:`dump_table`. Mode keys come back positional."""
    raw = Path(path).read_bytes()
    hurst, mu, horizon, steps, modes, seed = _TABLE_HEADER.unpack_from(raw)
    payload = np.frombuffer(raw, dtype="<f8", offset=_TABLE_HEADER.size)
    if payload.size != steps * modes:
        raise ShapeError(f"payload holds {payload.size} values, header says {steps * modes}")
    return IncrementTable(TimeGrid(horizon, steps), TemperingParams(hurst, mu),
                          payload.reshape(modes, steps).astype(float), seed)
