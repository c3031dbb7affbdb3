"""Uniform cell-centered grids with homogeneous Neumann operators.

The domain is a 1D interval or 2D rectangle sampled at cell centers.
Neumann conditions are realized by mirroring ghost cells across each
boundary face, which makes the discrete Laplacian symmetric, negative
semidefinite, and exactly conservative (its output sums to zero).

The module also provides the functional-analytic machinery built on the
Laplacian: the inverse Neumann Laplacian on zero-mean fields, the dual
(V*) norm through the Riesz map I - Laplacian, and empirical estimates
of the Poincare and inclusion constants of the geometry.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, cg

from .errors import CompatibilityError, ConfigError, DimensionError, SolverError

CG_RTOL = 1e-10
CG_ITER_FACTOR = 50

_MAGIC = b"NLCHF1"


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid on [0, extent_1] x ... with cell-centered samples."""

    dim: int
    extent: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"grid dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        if len(self.extent) != self.dim or len(self.cells) != self.dim:
            raise ConfigError("extent and cells must have one entry per axis")
        if any(e <= 0 for e in self.extent):
            raise ConfigError(f"extents must be positive, got {self.extent}")
        if any(c < 4 for c in self.cells):
            raise ConfigError(f"need at least 4 cells per axis, got {self.cells}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        n = 1
        for c in self.cells:
            n *= c
        return n

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for h in self.spacing:
            v *= h
        return v

    @property
    def measure(self) -> float:
        m = 1.0
        for e in self.extent:
            m *= e
        return m

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = [self.axis_coordinates(k) for k in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))


class Field:
    """Scalar function sampled at the cell centers of a GridSpec.

    Values are stored as a flat float64 array in row-major order and are
    treated as immutable: all operations return new Fields.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values, check: bool = True):
        arr = np.asarray(values, dtype=float).reshape(-1).copy()
        if arr.size != grid.size:
            raise DimensionError(
                f"field has {arr.size} values but grid has {grid.size} cells"
            )
        if check and not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "Field":
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        return cls(grid, fn(*grid.meshgrid()))

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def __repr__(self):
        return f"Field(grid={self.grid.cells}, min={self.values.min():.3g}, max={self.values.max():.3g})"


def _check_same_grid(f: Field, g: Field):
    if f.grid != g.grid:
        raise DimensionError("fields live on different grids")


def mean(f: Field) -> float:
    """Generalised mean value: integral over the domain divided by its measure."""
    return float(np.sum(f.values)) * f.grid.cell_volume / f.grid.measure


def inner_h(f: Field, g: Field) -> float:
    """L2 inner product by the midpoint rule."""
    _check_same_grid(f, g)
    return float(np.dot(f.values, g.values)) * f.grid.cell_volume


def norm_h(f: Field) -> float:
    return float(np.sqrt(max(inner_h(f, f), 0.0)))


def _lap_array(vals: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Mirrored-ghost five/three point Laplacian on the reshaped array."""
    v = vals.reshape(grid.shape)
    out = np.zeros_like(v)
    for axis in range(grid.dim):
        h2 = grid.spacing[axis] ** 2
        d = np.empty_like(v)
        inner = [slice(None)] * grid.dim

        def sl(a, b):
            s = list(inner)
            s[axis] = slice(a, b)
            return tuple(s)

        d[sl(1, -1)] = v[sl(2, None)] - 2.0 * v[sl(1, -1)] + v[sl(None, -2)]
        d[sl(0, 1)] = v[sl(1, 2)] - v[sl(0, 1)]
        d[sl(-1, None)] = v[sl(-2, -1)] - v[sl(-1, None)]
        out += d / h2
    return out.reshape(-1)


def laplacian_neumann(f: Field) -> Field:
    """Second-order Laplacian with homogeneous Neumann (mirrored ghost) closure."""
    return Field(f.grid, _lap_array(f.values, f.grid))


def grad_sq_integral(f: Field) -> float:
    """Integral of |grad f|^2 from face-centered differences.

    Boundary faces contribute zero (Neumann mirror), interior faces carry
    the squared difference quotient; each face's contribution is split
    between its two cells, which makes the result identical to the
    summation-by-parts identity inner_h(-laplacian_neumann(f), f).
    """
    v = f.reshaped()
    total = 0.0
    for axis in range(f.grid.dim):
        h = f.grid.spacing[axis]
        d = np.diff(v, axis=axis) / h
        total += float(np.sum(d * d))
    return total * f.grid.cell_volume


def norm_h_grad(f: Field) -> float:
    return float(np.sqrt(max(grad_sq_integral(f), 0.0)))


def norm_v(f: Field) -> float:
    """Full H1 norm: (||f||_H^2 + ||grad f||_H^2)^(1/2)."""
    return float(np.sqrt(max(inner_h(f, f) + grad_sq_integral(f), 0.0)))


def _cg_solve(grid: GridSpec, apply_op, rhs: np.ndarray, rtol: float) -> np.ndarray:
    """Conjugate gradients with zero initial guess and a hard residual check."""
    op = LinearOperator((grid.size, grid.size), matvec=apply_op, dtype=float)
    maxiter = CG_ITER_FACTOR * max(grid.cells)
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs)
    x, info = cg(op, rhs, rtol=rtol * 1e-2, atol=0.0, maxiter=maxiter)
    res = float(np.linalg.norm(apply_op(x) - rhs))
    if res > rtol * bnorm:
        raise SolverError(
            f"CG stalled: relative residual {res / bnorm:.3e} > {rtol:.1e} "
            f"after cap {maxiter}",
            residual=res / bnorm,
        )
    return x


def solve_neumann_poisson(rhs: Field, rtol: float = CG_RTOL) -> Field:
    """Solve -lap(u) = rhs with Neumann conditions, both sides zero-mean.

    Raises CompatibilityError when the right-hand side carries mass, and
    SolverError when CG cannot reach the target residual.
    """
    m = mean(rhs)
    nh = norm_h(rhs)
    if abs(m) > 1e-10 * nh:
        raise CompatibilityError(
            f"poisson rhs must have zero mean, got mean {m:.3e} vs norm {nh:.3e}"
        )
    grid = rhs.grid

    def apply_op(x):
        return -_lap_array(x, grid)

    b = rhs.values - np.mean(rhs.values)
    x = _cg_solve(grid, apply_op, b, rtol)
    x -= np.mean(x)
    return Field(grid, x)


def solve_helmholtz(f: Field, alpha: float, beta: float, rtol: float = CG_RTOL) -> Field:
    """Solve (alpha*I - beta*lap) u = f with Neumann conditions (alpha > 0, beta >= 0)."""
    if alpha <= 0 or beta < 0:
        raise ConfigError(f"need alpha > 0 and beta >= 0, got {alpha}, {beta}")
    grid = f.grid
    if beta == 0.0:
        return Field(grid, f.values / alpha)

    def apply_op(x):
        return alpha * x - beta * _lap_array(x, grid)

    return Field(grid, _cg_solve(grid, apply_op, f.values, rtol))


def riesz_inverse(f: Field, rtol: float = CG_RTOL) -> Field:
    """Apply the inverse Riesz map (I - lap)^(-1)."""
    return solve_helmholtz(f, 1.0, 1.0, rtol)


def norm_vstar(f: Field, rtol: float = CG_RTOL) -> float:
    """Dual norm ||f||_* = inner_h(f, (I - lap)^(-1) f)^(1/2)."""
    u = riesz_inverse(f, rtol)
    return float(np.sqrt(max(inner_h(f, u), 0.0)))


def solve_shifted_diffusion(
    grid: GridSpec, diag: np.ndarray, lap_coeff: float, rhs: np.ndarray
) -> np.ndarray:
    """Solve (diag(d) - c*lap) u = rhs for d > 0 pointwise, c >= 0.

    1D uses a banded direct solve; 2D uses tightly converged CG. This is
    the workhorse for the implicit pieces of the time stepper, so it is
    solved to near machine precision.
    """
    d = np.asarray(diag, dtype=float).reshape(-1)
    if d.size == 1:
        d = np.full(grid.size, d[0])
    if np.min(d) <= 0:
        raise SolverError(f"diffusion system not positive definite: min diag {np.min(d):.3e}")
    if lap_coeff == 0.0:
        return rhs / d
    if grid.dim == 1:
        n = grid.cells[0]
        h2 = grid.spacing[0] ** 2
        c = lap_coeff / h2
        ab = np.zeros((3, n))
        ab[0, 1:] = -c
        ab[2, :-1] = -c
        ab[1, :] = d + 2.0 * c
        ab[1, 0] -= c
        ab[1, -1] -= c
        return solve_banded((1, 1), ab, rhs)

    def apply_op(x):
        return d * x - lap_coeff * _lap_array(x, grid)

    return _cg_solve(grid, apply_op, rhs, rtol=1e-13)


def estimate_poincare_constant(grid: GridSpec, seed: int = 0, samples: int = 6) -> float:
    """Empirical Poincare-Wirtinger constant of the geometry.

    Returns the largest observed ratio norm_v(v)^2 / (||grad v||^2 +
    mean(v)^2 * measure) over the lowest cosine mode of each axis plus
    seeded random probes. The cosine mode is near-extremal, so the value
    stabilizes under grid refinement.
    """
    probes = []
    for axis in range(grid.dim):
        x = grid.meshgrid()[axis]
        probes.append(Field(grid, np.cos(np.pi * x / grid.extent[axis])))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        probes.append(Field(grid, rng.standard_normal(grid.size)))
    best = 0.0
    for p in probes:
        denom = grad_sq_integral(p) + mean(p) ** 2 * grid.measure
        if denom > 1e-300:
            best = max(best, (inner_h(p, p) + grad_sq_integral(p)) / denom)
    return best


def estimate_inclusion_constant(grid: GridSpec, seed: int = 0, samples: int = 4) -> float:
    """Empirical norm of the inclusion H into V*: sup ||f||_* / ||f||_H.

    Constants attain the supremum (the Riesz map fixes them), so the
    estimate is 1 up to solver tolerance on any grid.
    """
    probes = [Field.constant(grid, 1.0)]
    x = grid.meshgrid()[0]
    probes.append(Field(grid, np.cos(np.pi * x / grid.extent[0])))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        probes.append(Field(grid, rng.standard_normal(grid.size)))
    best = 0.0
    for p in probes:
        nh = norm_h(p)
        if nh > 0:
            best = max(best, norm_vstar(p) / nh)
    return best


def write_field(path, f: Field):
    """Write a Field in the NLCHF1 little-endian binary snapshot format.

    Layout: magic "NLCHF1", uint32 dim, per-axis uint64 cell counts,
    per-axis float64 extents, then row-major float64 values.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", f.grid.dim))
        for c in f.grid.cells:
            fh.write(struct.pack("<Q", c))
        for e in f.grid.extent:
            fh.write(struct.pack("<d", e))
        fh.write(f.values.astype("<f8").tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != _MAGIC:
            raise ConfigError(f"bad field snapshot magic {magic!r}")
        (dim,) = struct.unpack("<I", fh.read(4))
        cells = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(dim))
        extent = tuple(struct.unpack("<d", fh.read(8))[0] for _ in range(dim))
        grid = GridSpec(dim=dim, extent=extent, cells=cells)
        data = np.frombuffer(fh.read(8 * grid.size), dtype="<f8")
        if data.size != grid.size:
            raise ConfigError("truncated field snapshot")
        return Field(grid, data)


def write_field_csv(path, f: Field):
    """CSV export with cell-center coordinates, for plotting."""
    coords = f.grid.meshgrid()
    with open(path, "w") as fh:
        if f.grid.dim == 1:
            fh.write("x,value\n")
            for x, v in zip(coords[0].reshape(-1), f.values):
                fh.write(f"{x:.17g},{v:.17g}\n")
        else:
            fh.write("x,y,value\n")
            xs = coords[0].reshape(-1)
            ys = coords[1].reshape(-1)
            for x, y, v in zip(xs, ys, f.values):
                fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")
