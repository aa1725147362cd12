"""Dirichlet sine basis on hyperrectangles and the spectral fractional Laplacian.

Modes are the full tensor set ``{1..N}^d`` in lexicographic order of the index
tuple, so a basis with ``N`` modes per dimension nests inside any larger one
and shared modes are matched by their tuple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError

__all__ = [
    "SpectralBasis",
    "ModalVector",
    "FractionalPower",
    "build_basis",
    "fractional_eigenvalues",
    "evaluate_eigenfunction",
    "QuadratureGrid",
    "quadrature_grid",
    "synthesize",
    "analyze",
    "evaluate",
    "project",
    "l2_norm",
    "sobolev_norm",
    "eigenvalue_lower_bound",
    "check_eigenvalue_bound",
]


@dataclass(frozen=True)
class SpectralBasis:
    """Tensor Dirichlet eigenpairs ``sum_k (i_k pi / L_k)^2`` on ``prod_k (0, L_k)``."""

    dim: int
    modes_per_dim: int
    domain_lengths: Tuple[float, ...]
    mode_index: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.mode_index.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.domain_lengths))

    def mode_tuples(self):
        return [tuple(int(i) for i in row) for row in self.mode_index]

    def position(self, mode: Sequence[int]) -> int:
        """Lexicographic position of ``mode`` (1-based indices)."""
        if len(mode) != self.dim or not all(1 <= i <= self.modes_per_dim for i in mode):
            raise ShapeError(f"mode {tuple(mode)} is not in this basis")
        pos = 0
        for i in mode:
            pos = pos * self.modes_per_dim + (int(i) - 1)
        return pos

    def positions_in(self, other: "SpectralBasis") -> np.ndarray:
        """Positions of this basis's modes inside the larger basis ``other``."""
        if other.dim != self.dim or other.modes_per_dim < self.modes_per_dim:
            raise ShapeError("basis is not nested in the other basis")
        pos = np.zeros(self.size, dtype=np.int64)
        for k in range(self.dim):
            pos = pos * other.modes_per_dim + (self.mode_index[:, k] - 1)
        return pos

    def sorted_eigenvalues(self) -> np.ndarray:
        return np.sort(self.eigenvalues, kind="stable")


@dataclass(frozen=True)
class FractionalPower:
    """Exponent ``alpha`` of ``(-Laplacian)^alpha``, with ``0 < alpha < 1``."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < float(self.alpha) < 1.0:
            raise DomainError(f"fractional power must lie in (0, 1), got {self.alpha!r}")


@dataclass
class ModalVector:
    """Coefficients ``<u, phi_m>`` of a field in ``basis``."""

    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape[-1] != self.basis.size:
            raise ShapeError(
                f"{self.coeffs.shape[-1]} coefficients for a basis of {self.basis.size} modes")


def build_basis(dim: int, modes_per_dim: int,
                domain_lengths: Optional[Sequence[float]] = None) -> SpectralBasis:
    """Sine basis with ``modes_per_dim`` modes along each of ``dim`` axes."""
    if dim not in (1, 2, 3):
        raise DomainError(f"dimension must be 1, 2 or 3, got {dim!r}")
    if int(modes_per_dim) != modes_per_dim or modes_per_dim < 1:
        raise DomainError(f"modes_per_dim must be a positive integer, got {modes_per_dim!r}")
    lengths = tuple(float(v) for v in (domain_lengths or (1.0,) * dim))
    if len(lengths) != dim or not all(v > 0 for v in lengths):
        raise DomainError(f"need {dim} positive domain lengths, got {lengths}")
    n = int(modes_per_dim)
    grids = np.meshgrid(*([np.arange(1, n + 1)] * dim), indexing="ij")
    index = np.stack([g.ravel() for g in grids], axis=1)
    lam = np.zeros(index.shape[0])
    for k in range(dim):
        lam += (index[:, k] / lengths[k]) ** 2
    lam *= math.pi ** 2
    index.setflags(write=False)
    lam.setflags(write=False)
    return SpectralBasis(dim, n, lengths, index, lam)


def fractional_eigenvalues(basis: SpectralBasis, power) -> np.ndarray:
    """Eigenvalues ``lambda_m ** alpha`` of the fractional operator."""
    alpha = power.alpha if isinstance(power, FractionalPower) else float(power)
    return basis.eigenvalues ** alpha


def _sine_factor(i, x, length):
    return math.sqrt(2.0 / length) * np.sin(i * math.pi * np.asarray(x, dtype=float) / length)


def evaluate_eigenfunction(basis: SpectralBasis, mode: Sequence[int], point) -> float:
    """``phi_mode(point) = prod_k sqrt(2/L_k) sin(i_k pi x_k / L_k)``."""
    point = np.asarray(point, dtype=float)
    if len(mode) != basis.dim or point.shape[-1] != basis.dim:
        raise ShapeError("mode and point must both have the basis dimension")
    val = 1.0
    for k in range(basis.dim):
        val = val * _sine_factor(mode[k], point[..., k], basis.domain_lengths[k])
    return val


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor Gauss-Legendre grid plus the sampled 1-D basis factors.

    ``factors[k]`` has shape ``(N, Q)`` with entries ``phi_i(x_q)`` along axis
    ``k``; ``weighted[k]`` multiplies in the quadrature weights.
    """

    basis: SpectralBasis
    points_per_dim: int
    nodes: Tuple[np.ndarray, ...]
    factors: Tuple[np.ndarray, ...] = field(repr=False)
    weighted: Tuple[np.ndarray, ...] = field(repr=False)

    def mesh(self):
        return np.meshgrid(*self.nodes, indexing="ij")


def quadrature_grid(basis: SpectralBasis, points_per_dim: Optional[int] = None) -> QuadratureGrid:
    """Tensor Gauss-Legendre grid for ``basis``.

    Default ``points_per_dim`` is ``max(2N + 16, 32)``: products of sines up to
    frequency ``2N pi`` then integrate to near machine precision. Fewer than
    ``2N`` points is refused.
    """
    n = basis.modes_per_dim
    q = max(2 * n + 16, 32) if points_per_dim is None else int(points_per_dim)
    if q < 2 * n:
        raise ConfigurationError(
            f"{q} quadrature points per dimension is below the 2N = {2 * n} floor")
    x, w = np.polynomial.legendre.leggauss(q)
    nodes, factors, weighted = [], [], []
    modes = np.arange(1, n + 1)[:, None]
    for length in basis.domain_lengths:
        xk = 0.5 * length * (x + 1.0)
        wk = 0.5 * length * w
        phi = _sine_factor(modes, xk[None, :], length)
        nodes.append(xk)
        factors.append(phi)
        weighted.append(phi * wk)
    return QuadratureGrid(basis, q, tuple(nodes), tuple(factors), tuple(weighted))


def _contract(tensor, mats, lead):
    # Apply mats[k] along axis lead + k of tensor.
    for k, mat in enumerate(mats):
        tensor = np.moveaxis(np.tensordot(tensor, mat, axes=([lead + k], [1])), -1, lead + k)
    return tensor


def synthesize(coeffs, grid: QuadratureGrid) -> np.ndarray:
    """Field values on the quadrature mesh; leading batch axes are kept."""
    coeffs = np.asarray(coeffs, dtype=float)
    basis = grid.basis
    lead = coeffs.ndim - 1
    shaped = coeffs.reshape(coeffs.shape[:-1] + (basis.modes_per_dim,) * basis.dim)
    # factors are (N, Q); contracting over N needs the transpose.
    return _contract(shaped, [f.T for f in grid.factors], lead)


def analyze(values, grid: QuadratureGrid) -> np.ndarray:
    """Quadrature of ``values * phi_m`` for every mode; inverse of :func:`synthesize`."""
    values = np.asarray(values, dtype=float)
    basis = grid.basis
    lead = values.ndim - basis.dim
    out = _contract(values, list(grid.weighted), lead)
    return out.reshape(out.shape[:lead] + (basis.size,))


def evaluate(v: ModalVector, points) -> np.ndarray:
    """Field represented by ``v`` at arbitrary ``points`` of shape ``(..., d)``."""
    basis = v.basis
    points = np.asarray(points, dtype=float)
    total = np.zeros(points.shape[:-1])
    for c, mode in zip(v.coeffs, basis.mode_index):
        if c != 0.0:
            total += c * evaluate_eigenfunction(basis, mode, points)
    return total


def project(f: Callable, basis: SpectralBasis, quad_points_per_dim: Optional[int] = None) -> ModalVector:
    """Galerkin projection of ``f(x_1, ..., x_d)`` onto ``basis``.

    ``f`` receives one broadcastable coordinate array per dimension.
    """
    grid = quadrature_grid(basis, quad_points_per_dim)
    values = np.broadcast_to(f(*grid.mesh()), (grid.points_per_dim,) * basis.dim)
    return ModalVector(basis, analyze(values, grid))


def _coeffs(v):
    return v.coeffs if isinstance(v, ModalVector) else np.asarray(v, dtype=float)


def l2_norm(v) -> float:
    """L2 norm by Parseval: Euclidean norm of the coefficients."""
    return float(np.linalg.norm(_coeffs(v)))


def sobolev_norm(v, basis: Optional[SpectralBasis] = None, order: float = 0.0) -> float:
    """``sqrt(sum_m lambda_m^order c_m^2)``."""
    if order < 0:
        raise DomainError("Sobolev order must be nonnegative")
    basis = basis or v.basis
    c = _coeffs(v)
    return float(np.sqrt(np.sum(basis.eigenvalues ** order * c * c)))


def eigenvalue_lower_bound(dim: int, count: int, volume: float = 1.0) -> np.ndarray:
    """Li-Yau bound ``4 d pi^2/(d+2) i^(2/d) |Omega|^(-2/d) B_d^(-2/d)`` for ``i = 1..count``."""
    ball = math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)
    i = np.arange(1, count + 1, dtype=float)
    return 4.0 * dim * math.pi ** 2 / (dim + 2.0) * i ** (2.0 / dim) * (volume * ball) ** (-2.0 / dim)


def check_eigenvalue_bound(basis: SpectralBasis, alpha: Optional[float] = None) -> np.ndarray:
    """Per sorted eigenvalue, whether it meets :func:`eigenvalue_lower_bound`.

    With ``alpha`` the powered eigenvalues ``lambda^alpha`` are tested instead;
    that variant is informational only.
    """
    lam = basis.sorted_eigenvalues()
    if alpha is not None:
        lam = lam ** alpha
    return lam >= eigenvalue_lower_bound(basis.dim, lam.size, basis.volume)
