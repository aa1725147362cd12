"""Time integration of the spectrally truncated SPDE

    du + A^alpha u dt = f(u) dt + dB_{H,mu},   A = -Laplacian (Dirichlet).

The main scheme removes the stochastic convolution ``conv(t) = int_0^t
S(t-s) dB(s)`` from ``u`` and advances the remainder ``z = u - conv`` by the
semi-implicit Euler method,

    z_{m+1} = (z_m + tau * f_hat(u_m)) / (1 + tau lambda^alpha),

while ``conv`` is a left-point sum over a sub-grid of step ``tau / ratio``,
computed mode by mode through the recurrence

    conv_{k+1} = exp(-lambda^alpha dt) (conv_k + sigma dB_k).

The naive semi-implicit scheme on ``u`` itself is kept for comparison.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from . import spectral
from .errors import ConfigurationError, DomainError, ShapeError
from .spectral import FractionalPower, ModalVector, SpectralBasis
from .tfgn import IncrementTable, coarsen

__all__ = [
    "Forcing",
    "NoiseSpec",
    "ModelConfig",
    "ModalState",
    "Trajectory",
    "apply_forcing",
    "convolution_step",
    "semi_implicit_step",
    "naive_step",
    "integrate",
    "noise_rows",
    "solve_path",
    "solve_naive_path",
    "load_trajectory",
]


@dataclass(frozen=True)
class Forcing:
    """Deterministic source term ``f(u)``.

    ``kind`` is ``"linear"`` (``f(u) = u``), ``"zero"``, or ``"pointwise"``
    (``f`` applied to field values; evaluated pseudo-spectrally on a tensor
    Gauss grid with ``quad_points`` points per dimension).
    """

    kind: str = "linear"
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    quad_points: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("linear", "zero", "pointwise"):
            raise ConfigurationError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "pointwise" and self.func is None:
            raise ConfigurationError("pointwise forcing needs a function")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def pointwise(cls, func, quad_points=None):
        return cls("pointwise", func, quad_points)


@dataclass(frozen=True)
class NoiseSpec:
    """Modal noise amplitudes ``sigma_m``.

    By default ``sigma_m = lambda_m ** -rho``. ``table`` overrides it with a
    callable ``table(basis) -> amplitudes``; every amplitude must still obey
    ``|sigma_m| <= lambda_m ** -rho``.
    """

    rho: float
    table: Optional[Callable[[SpectralBasis], np.ndarray]] = None

    def __post_init__(self):
        if not float(self.rho) >= 0.0:
            raise DomainError(f"rho must be nonnegative, got {self.rho!r}")

    @classmethod
    def silent(cls, rho=0.0):
        """All amplitudes zero (deterministic runs)."""
        return cls(rho, lambda basis: np.zeros(basis.size))

    def amplitudes(self, basis: SpectralBasis) -> np.ndarray:
        bound = basis.eigenvalues ** (-float(self.rho))
        if self.table is None:
            return bound
        sigma = np.asarray(self.table(basis), dtype=float)
        if sigma.shape != (basis.size,):
            raise ShapeError(f"noise table gave shape {sigma.shape}, need ({basis.size},)")
        if np.any(np.abs(sigma) > bound * (1.0 + 1e-12)):
            raise ConfigurationError("noise amplitudes exceed lambda^-rho")
        return sigma


@dataclass(frozen=True)
class ModelConfig:
    alpha: FractionalPower
    horizon: float
    forcing: Forcing = field(default_factory=Forcing.linear)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(0.0))
    conv_substep_ratio: int = 1

    def __post_init__(self):
        if not isinstance(self.alpha, FractionalPower):
            object.__setattr__(self, "alpha", FractionalPower(float(self.alpha)))
        if not (float(self.horizon) > 0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if int(self.conv_substep_ratio) != self.conv_substep_ratio or self.conv_substep_ratio < 1:
            raise ConfigurationError("conv_substep_ratio must be a positive integer")


@dataclass
class ModalState:
    """Solution coefficients at step ``time_index``; ``u = z + conv``."""

    time_index: int
    z: np.ndarray
    conv: np.ndarray
    u: np.ndarray


class _ForcingEvaluator:
    # Caches the quadrature grid for pointwise forcing.
    def __init__(self, forcing: Forcing, basis: Optional[SpectralBasis]):
        self.forcing = forcing
        self.grid = None
        if forcing.kind == "pointwise":
            if basis is None:
                raise ConfigurationError("pointwise forcing needs the spectral basis")
            self.grid = spectral.quadrature_grid(basis, forcing.quad_points)

    def __call__(self, u):
        kind = self.forcing.kind
        if kind == "linear":
            return u
        if kind == "zero":
            return np.zeros_like(u)
        values = spectral.synthesize(u, self.grid)
        return spectral.analyze(self.forcing.func(values), self.grid)


def apply_forcing(u, forcing: Forcing, basis: Optional[SpectralBasis] = None,
                  quad_points: Optional[int] = None) -> np.ndarray:
    """Modal coefficients of ``f(u)``.

    ``quad_points`` overrides ``forcing.quad_points`` for pointwise forcing.
    """
    if isinstance(u, ModalVector):
        basis = basis or u.basis
        u = u.coeffs
    if quad_points is not None and forcing.kind == "pointwise":
        forcing = Forcing("pointwise", forcing.func, quad_points)
    return _ForcingEvaluator(forcing, basis)(np.asarray(u, dtype=float))


def _same_shape(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise ShapeError(f"shape mismatch: {shape} vs {np.shape(a)}")


def convolution_step(conv_m, increment, frac_eigs, sigma, dt_conv: float) -> np.ndarray:
    """``exp(-lambda^alpha dt_conv) * (conv_m + sigma * increment)``, per mode."""
    _same_shape(conv_m, increment, frac_eigs, sigma)
    return np.exp(-np.asarray(frac_eigs) * dt_conv) * (conv_m + sigma * np.asarray(increment))


def semi_implicit_step(state: ModalState, conv_next, frac_eigs, tau: float,
                       forcing: Forcing, basis: Optional[SpectralBasis] = None) -> ModalState:
    """One step of the transformed scheme; returns the state at ``m + 1``."""
    _same_shape(state.z, conv_next, frac_eigs)
    fhat = apply_forcing(state.u, forcing, basis)
    z = (state.z + tau * fhat) / (1.0 + tau * np.asarray(frac_eigs))
    conv_next = np.asarray(conv_next, dtype=float)
    return ModalState(state.time_index + 1, z, conv_next, z + conv_next)


def naive_step(u_m, increment, frac_eigs, sigma, tau: float, forcing: Forcing,
               basis: Optional[SpectralBasis] = None) -> np.ndarray:
    """``(u_m + tau f_hat(u_m) + sigma dB) / (1 + tau lambda^alpha)``."""
    _same_shape(u_m, increment, frac_eigs, sigma)
    fhat = apply_forcing(u_m, forcing, basis)
    return (u_m + tau * fhat + sigma * np.asarray(increment)) / (1.0 + tau * np.asarray(frac_eigs))


def integrate(z0, noise, frac_eigs, tau: float, ratio: int, forcing: Forcing,
              basis: Optional[SpectralBasis] = None, record=None):
    """Run the transformed scheme over ``M = noise.shape[-1] // ratio`` steps.

    Parameters
    ----------
    z0 : ndarray, shape (n,) or (..., n)
        Initial coefficients.
    noise : ndarray, shape (..., n, M * ratio)
        Scaled increments ``sigma_m * dB`` on the sub-grid; leading axes index
        independent trajectories.
    record : None, "all", or sequence of int
        ``None`` returns the terminal ``(z, conv, u)``; ``"all"`` returns
        arrays with a time axis before the mode axis; a sequence of step
        indices returns a dict ``{m: (z, conv, u)}``.
    """
    noise = np.asarray(noise, dtype=float)
    n, sub = noise.shape[-2], noise.shape[-1]
    if sub % ratio:
        raise ShapeError(f"{sub} sub-steps not divisible by ratio {ratio}")
    steps = sub // ratio
    frac_eigs = np.asarray(frac_eigs, dtype=float)
    if frac_eigs.shape != (n,):
        raise ShapeError(f"{frac_eigs.shape[0]} eigenvalues for {n} noise rows")
    batch = noise.shape[:-2]
    z = np.broadcast_to(np.asarray(z0, dtype=float), batch + (n,)).copy()
    conv = np.zeros_like(z)
    # time-major copy so each sub-step reads a contiguous slab
    slabs = np.ascontiguousarray(np.moveaxis(noise, -1, 0))
    decay = np.exp(-frac_eigs * (tau / ratio))
    inv = 1.0 / (1.0 + tau * frac_eigs)
    f = _ForcingEvaluator(forcing, basis)

    full = record == "all"
    wanted = set() if record is None or full else {int(m) for m in record}
    if full:
        zs = np.empty((steps + 1,) + z.shape)
        cs = np.empty_like(zs)
        zs[0], cs[0] = z, conv
    picked = {}
    if 0 in wanted:
        picked[0] = (z.copy(), conv.copy(), z + conv)

    k = 0
    for m in range(steps):
        u = z + conv
        z = (z + tau * f(u)) * inv
        for _ in range(ratio):
            conv = decay * (conv + slabs[k])
            k += 1
        if full:
            zs[m + 1], cs[m + 1] = z, conv
        elif m + 1 in wanted:
            picked[m + 1] = (z.copy(), conv.copy(), z + conv)

    if full:
        return (np.moveaxis(zs, 0, -2), np.moveaxis(cs, 0, -2),
                np.moveaxis(zs + cs, 0, -2))
    if record is None:
        return z, conv, z + conv
    return picked


def noise_rows(table: IncrementTable, basis: SpectralBasis) -> np.ndarray:
    """Increment rows for the modes of ``basis``.

    Tables keyed by mode tuples are matched by tuple (nested bases share rows);
    tables with positional keys supply their first ``basis.size`` rows.
    """
    keys = basis.mode_tuples()
    if set(keys) <= set(table.mode_keys):
        return table.rows_for(keys)
    if table.modes < basis.size:
        raise ShapeError(f"table has {table.modes} modes, basis needs {basis.size}")
    return table.data[:basis.size]


@dataclass
class Trajectory:
    """Solution history ``z, conv, u`` with shape ``(M + 1, n_modes)``."""

    basis: SpectralBasis
    config: ModelConfig
    z: np.ndarray = field(repr=False)
    conv: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    noise_fingerprint: str = ""

    @property
    def steps(self) -> int:
        return self.u.shape[0] - 1

    @property
    def tau(self) -> float:
        return self.config.horizon / self.steps

    def state(self, m: int) -> ModalState:
        return ModalState(m, self.z[m], self.conv[m], self.u[m])

    @property
    def states(self):
        return [self.state(m) for m in range(self.steps + 1)]

    @property
    def terminal(self) -> ModalVector:
        return ModalVector(self.basis, self.u[-1])

    def to_csv(self, path: Union[str, Path]) -> None:
        """Columns: ``m, i1..id, z, conv, u``; one row per (step, mode)."""
        dims = [f"i{k + 1}" for k in range(self.basis.dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", *dims, "z", "conv", "u"])
            for m in range(self.steps + 1):
                for j, mode in enumerate(self.basis.mode_index):
                    w.writerow([m, *(int(i) for i in mode),
                                repr(float(self.z[m, j])), repr(float(self.conv[m, j])),
                                repr(float(self.u[m, j]))])

    def dump(self, path: Union[str, Path]) -> None:
        """Binary form: little-endian header ``(alpha, T, states, modes, dim)``,
        int64 mode indices, then float64 ``z``, ``conv``, ``u`` row-major."""
        with open(path, "wb") as fh:
            fh.write(_TRAJ_HEADER.pack(self.config.alpha.alpha, self.config.horizon,
                                       self.steps + 1, self.basis.size, self.basis.dim))
            fh.write(np.ascontiguousarray(self.basis.mode_index, dtype="<i8").tobytes())
            for arr in (self.z, self.conv, self.u):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


_TRAJ_HEADER = struct.Struct("<ddQQQ")


def load_trajectory(path: Union[str, Path]) -> dict:
    """Read a :meth:`Trajectory.dump` file into a dict of arrays."""
    raw = Path(path).read_bytes()
    alpha, horizon, states, modes, dim = _TRAJ_HEADER.unpack_from(raw)
    off = _TRAJ_HEADER.size
    index = np.frombuffer(raw, "<i8", modes * dim, off).reshape(modes, dim)
    off += index.nbytes
    out = {"alpha": alpha, "horizon": horizon, "mode_index": index}
    for name in ("z", "conv", "u"):
        arr = np.frombuffer(raw, "<f8", states * modes, off).reshape(states, modes)
        off += arr.nbytes
        out[name] = arr
    return out


def _initial(u0, basis):
    c = u0.coeffs if isinstance(u0, ModalVector) else np.asarray(u0, dtype=float)
    if c.shape != (basis.size,):
        raise ShapeError(f"initial coefficients have shape {c.shape}, need ({basis.size},)")
    return c


def _check_grid(config, increments, steps):
    if not math.isclose(increments.grid.horizon, config.horizon, rel_tol=1e-12):
        raise ShapeError(
            f"increments cover [0, {increments.grid.horizon}], model horizon is {config.horizon}")
    ratio = config.conv_substep_ratio
    if increments.grid.steps % ratio:
        raise ShapeError(f"{increments.grid.steps} increments not divisible by ratio {ratio}")
    m = increments.grid.steps // ratio
    if steps is not None and steps != m:
        raise ShapeError(f"expected {steps * ratio} increments, table has {increments.grid.steps}")
    return m


def solve_path(config: ModelConfig, basis: SpectralBasis, u0_coeffs,
               increments: IncrementTable, steps: Optional[int] = None) -> Trajectory:
    """Solve one trajectory with the transformed semi-implicit scheme.

    ``increments`` lives on the convolution sub-grid: ``M * conv_substep_ratio``
    steps over the model horizon. ``steps`` (``M``), when given, is checked.
    """
    m = _check_grid(config, increments, steps)
    z0 = _initial(u0_coeffs, basis)
    sigma = config.noise.amplitudes(basis)
    noise = sigma[:, None] * noise_rows(increments, basis)
    frac = spectral.fractional_eigenvalues(basis, config.alpha)
    z, conv, u = integrate(z0, noise, frac, config.horizon / m, config.conv_substep_ratio,
                           config.forcing, basis, record="all")
    return Trajectory(basis, config, z, conv, u, increments.fingerprint())


def solve_naive_path(config: ModelConfig, basis: SpectralBasis, u0_coeffs,
                     increments: IncrementTable, steps: Optional[int] = None) -> np.ndarray:
    """Naive semi-implicit scheme on ``u``; returns ``u`` with shape ``(M + 1, n)``.

    Sub-grid increments are block-summed onto the solver grid first.
    """
    m = _check_grid(config, increments, steps)
    table = coarsen(increments, config.conv_substep_ratio)
    u = _initial(u0_coeffs, basis).copy()
    sigma = config.noise.amplitudes(basis)
    rows = noise_rows(table, basis)
    frac = spectral.fractional_eigenvalues(basis, config.alpha)
    tau = config.horizon / m
    f = _ForcingEvaluator(config.forcing, basis)
    inv = 1.0 / (1.0 + tau * frac)
    out = np.empty((m + 1, basis.size))
    out[0] = u
    for k in range(m):
        u = (u + tau * f(u) + sigma * rows[:, k]) * inv
        out[k + 1] = u
    return out
