import numpy as np
import pytest
from scipy.spatial.distance import cdist

from mlqmc.errors import UnsupportedParameterError
from mlqmc.grid import grid_for_level
from mlqmc.random_field import (
    CoefficientField,
    MaternParams,
    build_kl_basis,
    coarsen_field,
    constant_field,
    inject_values,
    injected_points,
    kl_basis_at_points,
    load_kl_basis,
    matern_covariance,
    sample_log_field,
    save_kl_basis,
)

TABLE_PARAMS = [
    MaternParams(nu=0.5, corr_length=0.5, variance=1.0),
    MaternParams(nu=0.5, corr_length=1.0, variance=1.0),
    MaternParams(nu=1.0, corr_length=0.5, variance=1.0),
    MaternParams(nu=1.0, corr_length=1.0, variance=1.0),
]

# x*K1(x) evaluated with mpmath at 50 digits, for x = sqrt(2)*d (nu=1, lam=1)
BESSEL_ORACLE = {
    0.05: 0.9918309994814437287704,
    0.1: 0.9741974433181197875113,
    0.25: 0.8941580659108927988657,
    0.5: 0.7319144764614627553906,
    0.75: 0.5767068787494993042824,
    1.0: 0.4443425236322360413391,
    1.5: 0.2532906372828894905374,
    2.0: 0.1396674740152931428575,
}


class TestMaternCovariance:
    def test_zero_lag_returns_variance(self):
        for params in TABLE_PARAMS:
            assert matern_covariance(0.0, params) == params.variance
        params = MaternParams(nu=1.0, corr_length=0.5, variance=2.5)
        assert matern_covariance(0.0, params) == 2.5

    def test_exponential_closed_form(self):
        params = MaternParams(nu=0.5, corr_length=0.5, variance=1.0)
        assert matern_covariance(0.5, params) == pytest.approx(np.exp(-1.0), abs=1e-15)
        d = np.linspace(0.0, 3.0, 10_000)
        diff = matern_covariance(d, params) - np.exp(-d / 0.5)
        assert np.max(np.abs(diff)) < 1e-12

    def test_nu_one_matches_high_precision_oracle(self):
        params = MaternParams(nu=1.0, corr_length=1.0, variance=1.0)
        for d, expected in BESSEL_ORACLE.items():
            assert matern_covariance(d, params) == pytest.approx(expected, rel=1e-9)
        # correlation-length scaling reuses the same oracle point
        half = MaternParams(nu=1.0, corr_length=0.5, variance=1.0)
        assert matern_covariance(0.5, half) == pytest.approx(BESSEL_ORACLE[1.0], rel=1e-9)

    def test_monotone_decreasing_and_continuous_at_zero(self):
        d = np.linspace(0.0, 2.0, 10_000)
        for params in TABLE_PARAMS:
            vals = matern_covariance(d, params)
            assert np.all(np.diff(vals) < 0.0)
            assert abs(matern_covariance(1e-9, params) - params.variance) < 1e-6

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            matern_covariance(-0.1, TABLE_PARAMS[0])

    def test_unsupported_nu_rejected(self):
        with pytest.raises(UnsupportedParameterError):
            MaternParams(nu=1.5, corr_length=1.0, variance=1.0)

    def test_nonpositive_params_rejected(self):
        with pytest.raises(ValueError):
            MaternParams(nu=0.5, corr_length=0.0, variance=1.0)
        with pytest.raises(ValueError):
            MaternParams(nu=0.5, corr_length=1.0, variance=-1.0)


class TestKlBasis:
    def test_trace_identity_all_table_settings(self):
        g = grid_for_level(2)
        pts = g.cell_centers()
        weight = 1.0 / len(pts)
        dist = cdist(pts, pts)
        for params in TABLE_PARAMS:
            eigvals = np.linalg.eigvalsh(matern_covariance(dist, params) * weight)
            assert np.sum(eigvals) == pytest.approx(params.variance, abs=1e-10)

    def test_energy_ratio_meets_target_minimally(self):
        g = grid_for_level(2)
        for params in TABLE_PARAMS:
            basis = build_kl_basis(g, params)
            assert basis.energy_ratio >= 0.99
            without_last = basis.energy_ratio - basis.eigenvalues[-1] / params.variance
            assert without_last < 0.99

    def test_fully_correlated_limit_single_mode(self):
        params = MaternParams(nu=0.5, corr_length=1e3, variance=1.0)
        basis = build_kl_basis(grid_for_level(1), params, energy_target=0.99)
        assert basis.n_terms == 1
        assert basis.eigenvalues[0] / params.variance > 0.999

    def test_modes_orthonormal_under_cell_weighting(self):
        g = grid_for_level(1)
        basis = build_kl_basis(g, TABLE_PARAMS[3])
        gram = basis.modes.T @ basis.modes / g.n_cells
        assert np.max(np.abs(gram - np.eye(basis.n_terms))) < 1e-8

    def test_eigenvalues_sorted_nonnegative(self):
        basis = build_kl_basis(grid_for_level(1), TABLE_PARAMS[0])
        assert np.all(np.diff(basis.eigenvalues) <= 0.0)
        assert np.all(basis.eigenvalues >= 0.0)


class TestSampleLogField:
    def test_zero_coefficients_give_unit_field(self):
        basis = build_kl_basis(grid_for_level(1), TABLE_PARAMS[1])
        field = sample_log_field(basis, np.zeros(basis.n_terms))
        assert np.all(field.values == 1.0)

    def test_single_mode_matches_definition(self):
        params = MaternParams(nu=0.5, corr_length=1e3, variance=1.0)
        basis = build_kl_basis(grid_for_level(1), params)
        assert basis.n_terms == 1
        field = sample_log_field(basis, np.array([1.0]))
        expected = np.exp(np.sqrt(basis.eigenvalues[0]) * basis.modes[:, 0]).reshape(8, 8)
        assert np.array_equal(field.values, expected)

    def test_dimension_mismatch_rejected(self):
        basis = build_kl_basis(grid_for_level(1), TABLE_PARAMS[1])
        with pytest.raises(ValueError, match="shape"):
            sample_log_field(basis, np.zeros(basis.n_terms + 1))

    def test_pointwise_log_variance_matches_spectrum(self):
        # Monte Carlo moment oracle: Var[log k](x) = sum_i theta_i phi_i(x)^2
        basis = build_kl_basis(grid_for_level(1), TABLE_PARAMS[0])
        rng = np.random.default_rng(42)
        n = 10_000
        xi = rng.standard_normal((n, basis.n_terms))
        log_fields = (basis.modes * np.sqrt(basis.eigenvalues)) @ xi.T
        sample_var = np.var(log_fields, axis=1, ddof=1)
        predicted = np.sum(basis.eigenvalues * basis.modes ** 2, axis=1)
        rse = np.sqrt(2.0 / (n - 1))
        assert np.all(np.abs(sample_var - predicted) <= 5.0 * predicted * rse)


class TestCoarsening:
    def test_constant_preserved(self):
        field = constant_field(grid_for_level(1), 3.5)
        coarse = coarsen_field(field)
        assert coarse.grid.level == 0
        assert np.all(coarse.values == 3.5)

    def test_hand_checked_injection_map(self):
        # 1-based rule (2I-1, 2J-1): a 4x4 block with v(i,j) = 10 i + j
        vals = np.array([[10 * i + j for j in range(1, 5)] for i in range(1, 5)], dtype=float)
        assert np.array_equal(inject_values(vals), [[11.0, 13.0], [31.0, 33.0]])

    def test_double_injection_selects_every_fourth_cell(self):
        vals = np.arange(64, dtype=float).reshape(8, 8)
        twice = inject_values(inject_values(vals))
        assert np.array_equal(twice, vals[np.ix_([0, 4], [0, 4])])

    def test_composed_from_level_two(self):
        g = grid_for_level(2)
        field = CoefficientField(
            grid=g,
            values=np.arange(1.0, 257.0).reshape(16, 16),
            sample_coords=g.cell_centers(),
        )
        twice = coarsen_field(coarsen_field(field))
        picked = field.values[np.ix_([0, 4, 8, 12], [0, 4, 8, 12])]
        assert np.array_equal(twice.values, picked)

    def test_sample_coords_are_selected_fine_centers(self):
        g = grid_for_level(1)
        basis = build_kl_basis(g, TABLE_PARAMS[1])
        field = sample_log_field(basis, np.zeros(basis.n_terms))
        coarse = coarsen_field(field)
        expected = injected_points(g)
        assert np.array_equal(coarse.sample_coords, expected)
        # the selected points are the coarse centers shifted by -h_c/4
        hc = coarse.grid.cell_width
        shift = coarse.sample_coords - coarse.grid.cell_centers()
        assert np.allclose(shift, -hc / 4.0, atol=1e-15)

    def test_coarsest_grid_cannot_be_coarsened(self):
        with pytest.raises(ValueError):
            coarsen_field(constant_field(grid_for_level(0)))

    def test_odd_size_rejected(self):
        with pytest.raises(ValueError):
            inject_values(np.ones((5, 5)))


class TestInjectedPointConsistency:
    @pytest.mark.parametrize("fine_level", [1, 2, 3])
    def test_covariance_matrix_equality(self, fine_level):
        # the injected point set is a uniform translate of the coarse centers,
        # so the two covariance matrices must agree entry for entry
        fine = grid_for_level(fine_level)
        coarse = grid_for_level(fine_level - 1)
        for params in TABLE_PARAMS[:2] + TABLE_PARAMS[3:]:
            c_inj = matern_covariance(cdist(injected_points(fine), injected_points(fine)), params)
            c_ctr = matern_covariance(cdist(coarse.cell_centers(), coarse.cell_centers()), params)
            assert np.max(np.abs(c_inj - c_ctr)) < 1e-12

    def test_translated_point_sets_same_eigenvalues(self):
        params = TABLE_PARAMS[2]
        pts = grid_for_level(1).cell_centers()
        a = kl_basis_at_points(pts * 0.5 + 0.1, params)
        b = kl_basis_at_points(pts * 0.5 + 0.23, params)
        m = min(a.n_terms, b.n_terms)
        assert np.max(np.abs(a.eigenvalues[:m] - b.eigenvalues[:m])) < 1e-10

    def test_at_cell_centers_matches_grid_basis(self):
        g = grid_for_level(1)
        params = TABLE_PARAMS[1]
        a = build_kl_basis(g, params)
        b = kl_basis_at_points(g.cell_centers(), params, grid=g)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.modes, b.modes)

    def test_duplicate_points_rejected(self):
        pts = np.array([[0.1, 0.1], [0.2, 0.2], [0.1, 0.1]])
        with pytest.raises(ValueError, match="distinct"):
            kl_basis_at_points(pts, TABLE_PARAMS[0])

    def test_coarsened_field_law_matches_injected_basis(self):
        # inject(level-1 sample) and a level-0 field built at the injected
        # coordinates must share mean and variance of log k
        params = TABLE_PARAMS[0]
        fine_grid = grid_for_level(1)
        fine_basis = build_kl_basis(fine_grid, params)
        inj_basis = kl_basis_at_points(injected_points(fine_grid), params,
                                       grid=grid_for_level(0))
        rng = np.random.default_rng(7)
        n = 10_000
        xi_f = rng.standard_normal((n, fine_basis.n_terms))
        log_fine = (fine_basis.modes * np.sqrt(fine_basis.eigenvalues)) @ xi_f.T
        log_injected = log_fine.reshape(8, 8, n)[0::2, 0::2].reshape(16, n)
        xi_c = rng.standard_normal((n, inj_basis.n_terms))
        log_standalone = (inj_basis.modes * np.sqrt(inj_basis.eigenvalues)) @ xi_c.T

        for a, b in [(log_injected, log_standalone)]:
            mean_a, mean_b = a.mean(axis=1), b.mean(axis=1)
            var_a, var_b = a.var(axis=1, ddof=1), b.var(axis=1, ddof=1)
            se_mean = np.sqrt(var_a / n + var_b / n)
            assert np.all(np.abs(mean_a - mean_b) <= 4.0 * se_mean)
            se_var = np.sqrt(2.0 / (n - 1)) * np.sqrt(var_a ** 2 + var_b ** 2)
            assert np.all(np.abs(var_a - var_b) <= 4.0 * se_var)


class TestBasisCacheFile:
    def test_round_trip_bit_identical(self, tmp_path):
        g = grid_for_level(1)
        params = TABLE_PARAMS[2]
        basis = build_kl_basis(g, params)
        path = tmp_path / "basis.npz"
        save_kl_basis(path, basis)
        loaded = load_kl_basis(path)
        assert np.array_equal(loaded.eigenvalues, basis.eigenvalues)
        assert np.array_equal(loaded.modes, basis.modes)
        assert np.array_equal(loaded.points, basis.points)
        assert loaded.params == params
        assert loaded.grid == g
        # cache hits must equal recomputation bit for bit
        recomputed = build_kl_basis(g, params)
        assert np.array_equal(loaded.modes, recomputed.modes)

    def test_version_field_checked(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, format_version=np.int64(99))
        with pytest.raises(ValueError, match="version"):
            load_kl_basis(path)
