import numpy as np
import pytest

from nlch.errors import ConfigError, DimensionError
from nlch.grid import Field, GridSpec, inner_h, norm_h, norm_h_grad
from nlch.kernel import (
    KernelSpec,
    build,
    convolve,
    convolve_direct,
    epsilon_zero,
    nonlocal_energy_density,
)


def brute_force_convolve(spec, grid, values):
    """Independent oracle: explicit double loop over cell centers."""
    coords = np.stack([c.reshape(-1) for c in grid.meshgrid()], axis=1)
    out = np.zeros(grid.size)
    for i in range(grid.size):
        r = np.sqrt(np.sum((coords[i] - coords) ** 2, axis=1))
        out[i] = np.sum(spec.profile(r) * values) * grid.cell_volume
    return out


def brute_force_energy(spec, grid, values):
    coords = np.stack([c.reshape(-1) for c in grid.meshgrid()], axis=1)
    total = 0.0
    for i in range(grid.size):
        r = np.sqrt(np.sum((coords[i] - coords) ** 2, axis=1))
        total += np.sum(spec.profile(r) * (values[i] - values) ** 2) * grid.cell_volume**2
    return 0.25 * total


def test_a_field_is_convolved_one(grid64):
    spec = KernelSpec("gaussian", width=0.3, normalization=1.5)
    b = build(spec, grid64)
    ones = Field.constant(grid64, 1.0)
    assert np.max(np.abs(convolve(b, ones).values - b.a_field.values)) <= 1e-12


def test_zero_normalization(grid64):
    b = build(KernelSpec("gaussian", width=0.3, normalization=0.0), grid64)
    assert np.all(b.a_field.values == 0.0)
    assert b.a_star == 0.0 and b.a_sup == 0.0 and b.b_sup == 0.0
    assert b.c_a == 1.0


def test_fast_equals_direct_all_grids():
    rng = np.random.default_rng(0)
    for dim, cells in ((1, (16,)), (1, (32,)), (1, (64,)), (2, (16, 16)), (2, (32, 32))):
        grid = GridSpec(dim, (1.0,) * dim, cells)
        b = build(KernelSpec("gaussian", width=0.25, normalization=2.0), grid)
        v = Field(grid, rng.standard_normal(grid.size))
        fast = convolve(b, v).values
        direct = convolve_direct(b, v).values
        assert np.max(np.abs(fast - direct)) <= 1e-12


def test_omega_restriction_brute_force():
    # zero extension outside the domain, checked against a literal double sum
    for dim, cells in ((1, (16,)), (2, (8, 8))):
        grid = GridSpec(dim, (1.0,) * dim, cells)
        spec = KernelSpec("gaussian", width=0.3, normalization=1.3)
        b = build(spec, grid)
        rng = np.random.default_rng(1)
        v = rng.standard_normal(grid.size)
        expected = brute_force_convolve(spec, grid, v)
        got = convolve(b, Field(grid, v)).values
        assert np.max(np.abs(got - expected)) <= 1e-12


def test_convolve_basics(grid64):
    b = build(KernelSpec("gaussian", width=0.3, normalization=1.5), grid64)
    zero = Field.constant(grid64, 0.0)
    assert np.all(convolve(b, zero).values == 0.0)

    rng = np.random.default_rng(2)
    v = Field(grid64, rng.standard_normal(grid64.size))
    w = Field(grid64, rng.standard_normal(grid64.size))
    assert inner_h(convolve(b, v), w) == pytest.approx(inner_h(v, convolve(b, w)), abs=1e-11)

    c = Field.constant(grid64, -1.7)
    assert np.max(np.abs(convolve(b, c).values + 1.7 * b.a_field.values)) <= 1e-12

    other = GridSpec(1, (1.0,), (32,))
    with pytest.raises(DimensionError):
        convolve(b, Field.constant(other, 1.0))


def test_energy_density(grid64):
    spec = KernelSpec("gaussian", width=0.3, normalization=1.5)
    b = build(spec, grid64)
    assert nonlocal_energy_density(b, Field.constant(grid64, 2.0)) == pytest.approx(0.0, abs=1e-12)
    assert nonlocal_energy_density(b, Field.constant(grid64, 0.0)) == 0.0

    grid32 = GridSpec(1, (1.0,), (32,))
    b32 = build(spec, grid32)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(32)
    assert nonlocal_energy_density(b32, Field(grid32, v)) == pytest.approx(
        brute_force_energy(spec, grid32, v), abs=1e-10
    )
    # lower bound (a_* - a^*)/2 ||phi||^2
    f = Field(grid32, v)
    assert nonlocal_energy_density(b32, f) >= (b32.a_star - b32.a_sup) / 2 * norm_h(f) ** 2 - 1e-12


class _FakeBundle:
    def __init__(self, a_sup, b_sup, c_a):
        self.a_sup, self.b_sup, self.c_a = a_sup, b_sup, c_a


def test_epsilon_zero_formula():
    e = epsilon_zero(_FakeBundle(a_sup=1.0, b_sup=0.0, c_a=1.0), C0=1.0, K0=1.0)
    assert e.branch_ca == pytest.approx(0.25)
    assert e.branch_astar == pytest.approx(1.0)
    assert e.branch_k0 == pytest.approx(2.0 / 3.0)
    assert e.value == pytest.approx(0.25)

    # large C0: the c_a branch is the binding one
    big = epsilon_zero(_FakeBundle(a_sup=1.0, b_sup=0.0, c_a=1.0), C0=100.0, K0=1e-3)
    assert big.value == pytest.approx(big.branch_ca)

    # doubling K0 divides the third branch by 4, leaves the others alone
    e1 = epsilon_zero(_FakeBundle(a_sup=2.0, b_sup=1.0, c_a=1.5), C0=1.0, K0=1.0)
    e2 = epsilon_zero(_FakeBundle(a_sup=2.0, b_sup=1.0, c_a=1.5), C0=1.0, K0=2.0)
    assert e2.branch_k0 == pytest.approx(e1.branch_k0 / 4.0)
    assert e2.branch_ca == e1.branch_ca and e2.branch_astar == e1.branch_astar

    with pytest.raises(ConfigError):
        epsilon_zero(_FakeBundle(1.0, 0.0, 1.0), C0=0.0, K0=1.0)


def test_operator_norm_bounds():
    grid = GridSpec(1, (1.0,), (128,))
    b = build(KernelSpec("gaussian", width=0.2, normalization=2.0), grid)
    rng = np.random.default_rng(4)
    for _ in range(20):
        v = Field(grid, rng.standard_normal(grid.size))
        jv = convolve(b, v)
        assert norm_h(jv) <= b.a_sup * norm_h(v) * (1 + 1e-10)
        assert norm_h_grad(jv) <= 1.05 * b.b_sup * norm_h(v)


def test_kernel_families():
    grid = GridSpec(1, (1.0,), (64,))
    with pytest.raises(ConfigError):
        KernelSpec("newtonian", delta=0.0)
    newt = build(KernelSpec("newtonian", delta=0.05, cutoff=0.5, normalization=0.2), grid)
    assert np.isfinite(newt.a_sup) and newt.a_star >= 0.0
    assert newt.c_a >= 1.0

    radii = np.linspace(0.0, 1.5, 40)
    vals = np.exp(-radii)
    tab = KernelSpec("tabulated", table=(tuple(radii), tuple(vals)), normalization=1.0)
    assert tab.is_radially_nonincreasing()
    bt = build(tab, grid)
    ones = Field.constant(grid, 1.0)
    assert np.max(np.abs(convolve(bt, ones).values - bt.a_field.values)) <= 1e-12

    with pytest.raises(ConfigError):
        KernelSpec("tabulated", table=((0.0, 0.1), (1.0,)))
    with pytest.raises(ConfigError):
        KernelSpec("unknown-family")


def test_bundle_constants_sane(bundle_wide):
    assert bundle_wide.c_a == max(bundle_wide.a_sup - bundle_wide.a_star, 1.0)
    assert bundle_wide.a_star > 0
    assert bundle_wide.a_sup >= bundle_wide.a_star
