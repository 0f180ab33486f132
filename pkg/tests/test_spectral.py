from itertools import permutations

import numpy as np
import pytest

from gtflow.cost import HessianAggregate
from gtflow.graph import laplacian, make_khop_ring
from gtflow.spectral import (assemble, eigen_derivative_check, matching_distance,
                             spectral_report, stability_sweep, step_size_bounds)


def _identity_hessian(n, m):
    return HessianAggregate(tuple(np.eye(m) for _ in range(n)), 1.0)


def two_node_system(alpha=0.1):
    w = np.array([[0.0, 0.4], [0.4, 0.0]])
    lap = laplacian(w)
    return assemble(lap, lap, _identity_hessian(2, 1), None, alpha, 1)


def test_assemble_two_node_by_hand():
    mats = two_node_system()
    expected = np.array([
        [-0.4, 0.4, -0.1, 0.0],
        [0.4, -0.4, 0.0, -0.1],
        [-0.4, 0.4, -0.5, 0.4],
        [0.4, -0.4, 0.4, -0.5],
    ])
    assert np.allclose(mats.full, expected, atol=1e-15)


def test_assemble_reconstruction_identity():
    mats = two_node_system(alpha=0.37)
    assert (mats.full == mats.diffusion + 0.37 * mats.descent).all()
    assert (mats.diffusion == mats.diffusion_unit).all()


def test_assemble_alpha_zero_spectrum_is_laplacian_union():
    g = make_khop_ring(5, 1, 0.8)
    lap = laplacian(g)
    rng = np.random.default_rng(0)
    blocks = tuple(np.diag(rng.uniform(1, 3, size=2)) for _ in range(5))
    hess = HessianAggregate(blocks, 3.0)
    mats = assemble(lap, lap, hess, None, 0.0, 2)
    got = np.sort(np.linalg.eigvals(mats.full).real)
    lap_eigs = np.linalg.eigvals(np.kron(lap, np.eye(2))).real
    expected = np.sort(np.concatenate([lap_eigs, lap_eigs]))
    assert np.allclose(got, expected, atol=1e-10)


def test_assemble_uniform_gain_scales_diffusion():
    g = make_khop_ring(4, 1, 0.6)
    lap = laplacian(g)
    hess = _identity_hessian(4, 2)
    c = 1.37
    scaled = assemble(lap, lap, hess, np.full(8, c), 0.0, 2)
    unit = assemble(lap, lap, hess, None, 0.0, 2)
    assert np.allclose(scaled.diffusion, c * unit.diffusion, atol=1e-14)


def test_assemble_dimension_checks():
    lap = laplacian(make_khop_ring(3, 1, 0.5))
    hess = _identity_hessian(3, 1)
    with pytest.raises(ValueError):
        assemble(lap, lap, hess, np.ones(5), 0.1, 1)
    with pytest.raises(ValueError):
        assemble(lap, lap, _identity_hessian(4, 1), None, 0.1, 1)
    with pytest.raises(ValueError):
        assemble(lap, lap, hess, None, -0.1, 1)


def test_spectral_report_two_node_stable():
    rep = spectral_report(two_node_system())
    assert rep.zero_count == 1
    assert rep.max_nonzero_real < 0
    assert rep.stable


def test_spectral_report_alpha_zero_doubles_zeros():
    g = make_khop_ring(5, 1, 0.8)
    lap = laplacian(g)
    hess = _identity_hessian(5, 2)
    rep = spectral_report(assemble(lap, lap, hess, None, 0.0, 2))
    assert rep.zero_count == 4  # 2m zeros: both Laplacians contribute
    assert not rep.stable


def test_spectral_report_large_alpha_goes_unstable_on_directed_ring():
    # undirected weight-balanced fixtures stayed in the left half-plane at
    # every step size we probed (consistent with the symmetric contraction
    # argument); the genuine right-half-plane crossing shows on the directed
    # circulant, whose Laplacian spectrum is complex
    g = make_khop_ring(6, 1, 0.9, directed=True)
    lap = laplacian(g)
    rng = np.random.default_rng(12)
    hvals = rng.uniform(0.5, 8.0, size=6)
    hess = HessianAggregate(tuple(np.array([[h]]) for h in hvals), float(hvals.max()))
    base = spectral_report(assemble(lap, lap, hess, None, 0.0, 1))
    bounds = step_size_bounds(1.0, 1.0, hess.infinity_norm, base.slowest_decay,
                              base.spectral_radius, 6, 1)
    low = spectral_report(assemble(lap, lap, hess, None, 0.9 * bounds.tight, 1))
    assert low.stable
    rep = spectral_report(assemble(lap, lap, hess, None, 1.0, 1))
    assert not rep.stable
    assert rep.max_nonzero_real > 0


def test_eigen_derivative_identity_hessian():
    n = 6
    lap = laplacian(make_khop_ring(n, 1, 0.8))
    rep = eigen_derivative_check(lap, lap, _identity_hessian(n, 1))
    # display-convention reduced block carries -sum of unit Hessians
    assert np.allclose(rep.reduced_eigenvalues, [-n])
    assert rep.zero_block_norm < 1e-14
    assert np.allclose(rep.predicted, [-1.0])  # biorthonormal: -(1/n) sum = -1
    assert rep.ok


def test_eigen_derivative_quadratic_blocks():
    n, m = 4, 2
    lap = laplacian(make_khop_ring(n, 1, 0.7))
    rng = np.random.default_rng(2)
    blocks = []
    for _ in range(n):
        a = rng.normal(size=(m, m))
        blocks.append(a @ a.T + 2 * np.eye(m))
    hess = HessianAggregate(tuple(blocks), 1.0)
    rep = eigen_derivative_check(lap, lap, hess)
    total = sum(blocks)
    assert np.allclose(np.sort_complex(rep.reduced_eigenvalues),
                       np.sort_complex(np.linalg.eigvals(-total)), atol=1e-10)
    assert rep.max_rel_error < 1e-4


def test_matching_distance_examples():
    assert matching_distance([0, -1], [0, -1]) == 0.0
    assert matching_distance([0, -1], [0.1, -1.05]) == pytest.approx(0.1)
    spec = np.array([0.3 + 1j, -2.0, 5.0])
    shift = 0.7 - 0.2j
    assert matching_distance(spec, spec + shift) == pytest.approx(abs(shift))


def test_matching_distance_equals_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(30):
        size = int(rng.integers(1, 6))
        a = rng.normal(size=size) + 1j * rng.normal(size=size)
        b = rng.normal(size=size) + 1j * rng.normal(size=size)
        brute = min(max(abs(a[i] - b[p[i]]) for i in range(size))
                    for p in permutations(range(size)))
        assert matching_distance(a, b) == pytest.approx(brute, abs=1e-12)


def test_matching_distance_cardinality_mismatch():
    with pytest.raises(ValueError):
        matching_distance([1.0], [1.0, 2.0])


def test_step_size_bounds_linear_case():
    b = step_size_bounds(1.0, 1.0, 2.0, 1.0, 1.0, 3, 1)
    assert b.tight == pytest.approx(0.5)


def test_step_size_bounds_sector_case():
    b = step_size_bounds(0.5, 1.5, 2.0, 1.0, 1.0, 3, 1)
    assert b.tight == pytest.approx(0.25)  # min(0.25, 1/3)


def test_step_size_bounds_monotone_in_sector():
    base = step_size_bounds(0.5, 1.5, 2.0, 1.0, 1.0, 3, 1)
    wider_upper = step_size_bounds(0.5, 2.0, 2.0, 1.0, 1.0, 3, 1)
    higher_kappa = step_size_bounds(0.8, 1.5, 2.0, 1.0, 1.0, 3, 1)
    assert wider_upper.tight <= base.tight
    assert higher_kappa.tight >= base.tight


def test_step_size_bounds_all_positive_and_matching_hits_target():
    b = step_size_bounds(0.5, 1.5, 3.0, 0.8, 1.6, 5, 2)
    assert b.matching > 0 and b.spectral > 0 and b.tight > 0
    # the matching bound solves 4 base^(1-1/nm) pert^(1/nm) = kappa * slow
    nm = 10
    alpha = b.matching
    base_val = 4 * b.upper + b.gamma * (4 * b.upper + alpha)
    excess = 4 * base_val ** (1 - 1 / nm) * (alpha * b.gamma) ** (1 / nm)
    assert excess == pytest.approx(b.kappa * b.slowest_decay, rel=1e-6)


def test_step_size_bounds_rejects_bad_inputs():
    with pytest.raises(ValueError):
        step_size_bounds(0.0, 1.0, 1.0, 1.0, 1.0, 3, 1)
    with pytest.raises(ValueError):
        step_size_bounds(1.5, 1.0, 1.0, 1.0, 1.0, 3, 1)


def _sweep_fixture():
    n, m = 5, 1
    lap = laplacian(make_khop_ring(n, 1, 0.8))
    rng = np.random.default_rng(4)
    blocks = tuple(np.diag(rng.uniform(0.5, 2.0, size=m)) for _ in range(n))
    hess = HessianAggregate(blocks, max(float(b.max()) for b in blocks))
    base = spectral_report(assemble(lap, lap, hess, None, 0.0, m))
    kappa, upper = 0.5, 1.5
    bounds = step_size_bounds(kappa, upper, hess.infinity_norm,
                              base.slowest_decay, base.spectral_radius, n, m)
    return lap, hess, kappa, upper, bounds


def test_sweep_below_tight_bound_is_stable():
    lap, hess, kappa, upper, bounds = _sweep_fixture()
    rng = np.random.default_rng(5)
    regimes = {
        "lower": np.full(5, kappa),
        "upper": np.full(5, upper),
        "random": rng.uniform(kappa, upper, size=5),
    }
    alphas = np.linspace(0.05, 0.999, 8) * bounds.tight
    cells = stability_sweep(lap, lap, hess, alphas, regimes)
    assert all(c.stable for c in cells)


def test_sweep_alpha_zero_column_unstable():
    lap, hess, kappa, upper, _ = _sweep_fixture()
    cells = stability_sweep(lap, lap, hess, [0.0], {"unit": np.ones(5)})
    assert cells[0].zero_count == 2
    assert not cells[0].stable


def test_sweep_extreme_gains_bracket_unit_decay():
    # the slow decay under unit gains sits between the two sector-edge rows;
    # the observed ordering on this frozen fixture has the lower-gain row
    # decaying fastest (stronger step-size slaving at higher gain)
    lap, hess, kappa, upper, bounds = _sweep_fixture()
    alpha = 0.5 * bounds.tight
    cells = stability_sweep(lap, lap, hess, [alpha], {
        "lower": np.full(5, kappa),
        "unit": np.ones(5),
        "upper": np.full(5, upper),
    })
    by_label = {c.xi_label: c.max_nonzero_real for c in cells}
    assert by_label["lower"] <= by_label["unit"] <= by_label["upper"] < 0
