"""Spectral Faedo-Galerkin oracle on a 1D interval.

Projects the doubly regularized system (eps, tau > 0) onto the first n
Neumann-Laplacian eigenfunctions and integrates the resulting ODE system
with an adaptive embedded Runge-Kutta pair. It exists to cross-validate
the finite-difference stepper at fixed mode count and Yosida parameter.

All nonlinear integrals use the same cell-centered midpoint quadrature
as the finite-difference solver, so the two paths discretize identical
operators and can be compared directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, DimensionError, InapplicabilityError, StiffnessError
from .grid import Field, GridSpec
from .kernel import KernelBundle
from .model import ModelParams, _sigma_s_array
from .potential import PotentialSpec, f_prime_regularized


@dataclass(frozen=True)
class SpectralBasis:
    """Cosine eigenbasis of the Neumann Laplacian sampled at cell centers."""

    grid: GridSpec
    n: int
    functions: np.ndarray  # shape (cells, n)
    eigenvalues: np.ndarray  # shape (n,)

    @property
    def weight(self) -> float:
        return self.grid.cell_volume


def make_basis(grid: GridSpec, n: int) -> SpectralBasis:
    """First n modes: constant |Omega|^(-1/2), then sqrt(2/L) cos(j pi x / L).

    Midpoint quadrature is exact for products of these modes as long as
    n does not exceed the cell count, so discrete orthonormality holds to
    machine precision.
    """
    if grid.dim != 1:
        raise ConfigError("the spectral oracle is one-dimensional")
    if n < 1 or n > grid.cells[0]:
        raise ConfigError(f"mode count must lie in [1, cells]; got {n} with {grid.cells[0]} cells")
    L = grid.extent[0]
    x = grid.axis_coordinates(0)
    funcs = np.empty((grid.cells[0], n))
    eigs = np.empty(n)
    funcs[:, 0] = 1.0 / np.sqrt(grid.measure)
    eigs[0] = 0.0
    for j in range(1, n):
        funcs[:, j] = np.sqrt(2.0 / L) * np.cos(j * np.pi * x / L)
        eigs[j] = (j * np.pi / L) ** 2
    return SpectralBasis(grid=grid, n=n, functions=funcs, eigenvalues=eigs)


def project(f: Field, basis: SpectralBasis) -> np.ndarray:
    """H-orthogonal coefficients of a sampled field."""
    if f.grid != basis.grid:
        raise DimensionError("field grid does not match the basis quadrature grid")
    return basis.functions.T @ f.values * basis.weight


def reconstruct(coeffs: np.ndarray, basis: SpectralBasis) -> Field:
    return Field(basis.grid, basis.functions @ np.asarray(coeffs))


@dataclass(frozen=True)
class GalerkinOperator:
    """Precomputed matrices of the projected system."""

    basis: SpectralBasis
    bundle: KernelBundle
    spec: PotentialSpec
    params: ModelParams
    mat_a: np.ndarray  # int a e_i e_j
    mat_conv: np.ndarray  # int (J*e_j) e_i


def build_operator(basis: SpectralBasis, bundle: KernelBundle, spec: PotentialSpec,
                   params: ModelParams) -> GalerkinOperator:
    if params.eps <= 0 or params.tau <= 0:
        raise InapplicabilityError(
            "the spectral oracle integrates the doubly regularized system only "
            f"(eps, tau > 0); got eps = {params.eps}, tau = {params.tau}"
        )
    if bundle.grid != basis.grid:
        raise DimensionError("kernel bundle and basis live on different grids")
    E = basis.functions
    w = basis.weight
    a = bundle.a_field.values
    mat_a = E.T @ (a[:, None] * E) * w
    conv_cols = np.column_stack([bundle.convolve_array(E[:, j]) for j in range(basis.n)])
    mat_conv = E.T @ conv_cols * w
    return GalerkinOperator(
        basis=basis, bundle=bundle, spec=spec, params=params, mat_a=mat_a, mat_conv=mat_conv
    )


def split_coeffs(y: np.ndarray, n: int):
    return y[:n], y[n : 2 * n], y[2 * n :]


def ode_rhs(t: float, y: np.ndarray, op: GalerkinOperator) -> np.ndarray:
    """Time derivatives (alpha', beta', gamma') of the projected system.

    The mu-relation is algebraic in alpha' and is solved first; the
    result feeds the mass and nutrient equations.
    """
    basis, params, spec = op.basis, op.params, op.spec
    n = basis.n
    alpha, beta, gamma = split_coeffs(y, n)
    E, w, l = basis.functions, basis.weight, basis.eigenvalues

    phi = E @ alpha
    sig = E @ gamma
    h_phi = params.h(phi)

    nf = E.T @ np.asarray(f_prime_regularized(spec, params.lam_eff, phi)) * w
    alpha_dot = (
        beta - op.mat_a @ alpha + op.mat_conv @ alpha - nf + params.chi * gamma
    ) / params.tau

    source = E.T @ ((params.P * sig - params.A) * h_phi) * w
    beta_dot = (source - l * beta - alpha_dot) / params.eps

    sig_s = _sigma_s_array(params.sigma_s, basis.grid, t)
    ss_coeff = E.T @ sig_s * w
    consume = E.T @ (h_phi * sig) * w
    gamma_dot = (
        -l * gamma - params.B * (gamma - ss_coeff) - params.C * consume
        + params.eta * l * alpha
    )
    return np.concatenate([alpha_dot, beta_dot, gamma_dot])


def integrate(init_coeffs: np.ndarray, op: GalerkinOperator, T: float,
              t_eval=None, rtol: float = 1e-8, atol: float = 1e-10):
    """Adaptive RK45 integration; returns (times, coefficient matrix).

    The coefficient matrix has one row per output time. Integrator
    failure (step-size underflow on stiff regimes) raises StiffnessError
    suggesting larger eps/tau or fewer modes.
    """
    sol = solve_ivp(
        ode_rhs,
        (0.0, T),
        np.asarray(init_coeffs, dtype=float),
        args=(op,),
        method="RK45",
        rtol=rtol,
        atol=atol,
        t_eval=t_eval,
        dense_output=t_eval is None,
    )
    if not sol.success:
        raise StiffnessError(
            f"spectral integrator failed: {sol.message}; "
            "consider larger eps/tau or a smaller mode count"
        )
    return sol.t, sol.y.T


def project_initial_data(phi0: Field, mu0: Field, sigma0: Field,
                         basis: SpectralBasis) -> np.ndarray:
    return np.concatenate(
        [project(phi0, basis), project(mu0, basis), project(sigma0, basis)]
    )


def write_coefficients_csv(path, times, coeffs, n: int):
    """CSV export: t, alpha_0.., beta_0.., gamma_0.. one row per time."""
    header = (
        ["t"]
        + [f"alpha_{j}" for j in range(n)]
        + [f"beta_{j}" for j in range(n)]
        + [f"gamma_{j}" for j in range(n)]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for t, row in zip(times, coeffs):
            fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
