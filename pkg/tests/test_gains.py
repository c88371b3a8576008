"""Gain catalog: closed-form values, conditional means, modifiers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from drifttrack import gains, linalg
from drifttrack.models import make_rng


class TestSignalNoise:
    def test_direct(self):
        assert np.array_equal(gains.gain_signal_noise([1.0, 2.0], [3.0, 2.0]),
                              [2.0, 0.0])

    def test_fixed_point_at_truth(self):
        assert np.array_equal(gains.gain_signal_noise([0.7], [0.7]), [0.0])

    def test_scalar(self):
        assert float(gains.gain_signal_noise(0.0, -1.0)) == -1.0


class TestRobbinsMonro:
    def test_direct(self):
        assert float(gains.gain_robbins_monro(3.0, 1.0)) == -2.0

    def test_zero_at_level(self):
        assert float(gains.gain_robbins_monro(2.0, 2.0)) == 0.0

    def test_pushes_toward_root(self):
        # monotone f(v) = 2v, level 2, root at 1: observed 4 at v=2
        assert gains.gain_robbins_monro(4.0, 2.0) < 0


class TestQuantile:
    def test_above(self):
        assert gains.gain_quantile(1.0, 1.2, 0.5) == 0.5

    def test_below(self):
        assert gains.gain_quantile(1.0, 0.9, 0.5) == -0.5

    def test_tie_counts_as_below(self):
        assert math.isclose(gains.gain_quantile(1.0, 1.0, 0.9), -0.1)

    def test_bounded(self):
        for alpha in (0.1, 0.5, 0.9):
            for x in (-5.0, 0.0, 5.0):
                assert abs(gains.gain_quantile(0.0, x, alpha)) \
                    <= max(alpha, 1.0 - alpha)

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            gains.gain_quantile(0.0, 0.0, 1.0)


class TestPoisson:
    def test_exact_intensity(self):
        assert gains.gain_poisson(2.0, 5, 3) == 0.0

    def test_no_increment(self):
        assert gains.gain_poisson(0.0, 4, 4) == 0.0

    def test_direct(self):
        assert gains.gain_poisson(1.5, 7, 3) == 2.5

    def test_rejects_decreasing_counts(self):
        with pytest.raises(ValueError):
            gains.gain_poisson(0.0, 3, 4)


class TestGaussianKnownCov:
    def test_identity_reduces_to_signal_noise(self):
        x = np.array([1.0, -2.0])
        est = np.array([0.5, 0.5])
        assert np.allclose(gains.gain_gaussian_known_cov(est, x, np.eye(2)),
                           gains.gain_signal_noise(est, x))

    def test_diagonal_solve(self):
        got = gains.gain_gaussian_known_cov([0.0, 0.0], [2.0, 4.0],
                                            np.diag([2.0, 4.0]))
        assert np.allclose(got, [1.0, 1.0])

    def test_solve_residual_identity(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3))
        sigma = a @ a.T + 0.1 * np.eye(3)
        x = rng.normal(size=3)
        est = rng.normal(size=3)
        out = gains.gain_gaussian_known_cov(est, x, sigma)
        assert np.allclose(sigma @ out, x - est, atol=1e-12)

    def test_rejects_singular(self):
        with pytest.raises(ValueError):
            gains.gain_gaussian_known_cov([0.0], [1.0], [[0.0]])


class TestArch1:
    def test_direct(self):
        # factor 1/4, residual 9 - 1 - 0.5*4 = 6 -> 1.5
        assert math.isclose(gains.gain_arch1(0.5, 3.0, 2.0, 1.0), 1.5)

    def test_no_truncation_region(self):
        got = gains.gain_arch1(0.3, 1.5, 0.5, 1.0)
        assert math.isclose(got, 1.5 ** 2 - 1.0 - 0.3 * 0.25)

    def test_zero_at_zero_lag(self):
        assert gains.gain_arch1(0.5, 3.0, 0.0, 1.0) == 0.0

    def test_conditional_mean(self):
        # x_k = sqrt(1 + theta * x_prev^2) * eps: MC mean of the gain is
        # -min(x_prev^2, T) (est - theta)
        rng = make_rng(42)
        theta, est, x_prev, trunc = 0.3, 0.7, 2.0, 1.0
        eps = rng.standard_normal(200_000)
        x_k = math.sqrt(1.0 + theta * x_prev ** 2) * eps
        vals = gains.gain_arch1(est, x_k, np.full_like(x_k, x_prev), trunc)
        want = -min(x_prev ** 2, trunc) * (est - theta)
        se = float(np.std(vals)) / math.sqrt(vals.size)
        assert abs(float(np.mean(vals)) - want) <= 4.0 * se


class TestAr1Normalized:
    def test_direct(self):
        assert math.isclose(gains.gain_ar1_normalized(1.0, 2.0, 1.0, 1.0), 0.5)

    def test_zero_lag(self):
        assert gains.gain_ar1_normalized(1.0, 2.0, 0.0, 1.0) == 0.0

    def test_zero_residual(self):
        assert gains.gain_ar1_normalized(0.5, 1.0, 2.0, 1.0) == 0.0

    def test_magnitude_bound(self):
        # |gain| <= |resid| * |x|/(1 + mu x^2) <= |resid| / (2 sqrt(mu))
        rng = np.random.default_rng(1)
        mu = 0.5
        for _ in range(200):
            est, x_k, x_prev = rng.normal(size=3) * 5
            g = gains.gain_ar1_normalized(est, x_k, x_prev, mu)
            resid = abs(x_k - est * x_prev)
            assert abs(g) <= resid / (2.0 * math.sqrt(mu)) + 1e-12


class TestAr1Truncated:
    def test_no_truncation(self):
        assert math.isclose(gains.gain_ar1_truncated(0.0, 1.0, 2.0, 4.0), 2.0)

    def test_truncated(self):
        assert math.isclose(gains.gain_ar1_truncated(0.0, 1.0, 2.0, 1.0), 0.5)

    def test_conditional_mean(self):
        # x_k = theta x_prev + xi: MC mean is -min(x_prev^2, T)(est - theta)
        rng = make_rng(7)
        theta, est, x_prev, trunc = 0.4, -0.2, 1.5, 1.5
        x_k = theta * x_prev + rng.standard_normal(200_000)
        vals = gains.gain_ar1_truncated(est, x_k, np.full_like(x_k, x_prev),
                                        trunc)
        want = -min(x_prev ** 2, trunc) * (est - theta)
        se = float(np.std(vals)) / math.sqrt(vals.size)
        assert abs(float(np.mean(vals)) - want) <= 3.0 * se


class TestKwFiniteDifference:
    def test_quadratic_exact(self):
        oracle = lambda v, rng: -0.5 * float(v @ v)
        got = gains.gain_kw_finite_difference([1.0, 0.0], 0.1, oracle, None)
        assert np.allclose(got, [-1.0, 0.0], atol=1e-12)

    def test_linear_any_step(self):
        a = np.array([2.0, -3.0, 0.5])
        oracle = lambda v, rng: float(a @ v)
        for c in (0.01, 0.5, 2.0):
            got = gains.gain_kw_finite_difference(np.zeros(3), c, oracle, None)
            assert np.allclose(got, a, atol=1e-10)

    def test_quartic_value(self):
        # -(1.1^4 - 0.9^4)/0.2 = -4.04
        oracle = lambda v, rng: -float(v[0]) ** 4
        got = gains.gain_kw_finite_difference([1.0], 0.1, oracle, None)
        assert np.allclose(got, [-4.04])

    def test_oracle_failure_reports_query_point(self):
        def oracle(v, rng):
            raise ZeroDivisionError("boom")
        with pytest.raises(RuntimeError, match="query point"):
            gains.gain_kw_finite_difference([1.0], 0.1, oracle, None)


class TestSpsa:
    def test_linear_fixed_direction(self):
        a = np.array([2.0, -1.0])
        oracle = lambda v, rng: float(a @ v)
        sampler = lambda rng: np.array([1.0, 0.0])
        got = gains.gain_spsa(np.zeros(2), 0.1, oracle, sampler, None)
        assert np.allclose(got, [a[0], 0.0])

    def test_d1_matches_coordinate_difference(self):
        oracle = lambda v, rng: -float(v[0]) ** 4
        for sign in (1.0, -1.0):
            sampler = lambda rng, s=sign: np.array([s])
            got = gains.gain_spsa([1.0], 0.1, oracle, sampler, None)
            kw = gains.gain_kw_finite_difference([1.0], 0.1, oracle, None)
            assert np.allclose(got, kw)  # D^2 = 1 cancels the sign

    def test_sphere_average_recovers_half_gradient(self):
        # E[D D^T] = I/2 on the unit circle, so the averaged gain at
        # v = (1,0) for F = -||v||^2/2 approaches (-0.5, 0)
        rng = make_rng(3)
        oracle = lambda v, r: -0.5 * float(v @ v)

        def sampler(r):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            return np.array([math.cos(ang), math.sin(ang)])

        samples = np.array([gains.gain_spsa([1.0, 0.0], 0.05, oracle,
                                            sampler, None)
                            for _ in range(20_000)])
        mean = samples.mean(axis=0)
        se = samples.std(axis=0) / math.sqrt(samples.shape[0])
        assert abs(mean[0] + 0.5) <= 3.0 * se[0] + 1e-9
        assert abs(mean[1]) <= 3.0 * se[1] + 1e-9

    def test_zero_direction_exhausts_retries(self):
        sampler = lambda rng: np.zeros(2)
        with pytest.raises(RuntimeError):
            gains.gain_spsa(np.zeros(2), 0.1, lambda v, r: 0.0, sampler, None)


class TestArdScore:
    def test_d1_reduction(self):
        # y (x - est*y) / sigma^2
        got = gains.gain_ard_score([0.5], [2.0], [3.0], 2.0)
        assert np.allclose(got, [3.0 * (2.0 - 0.5 * 3.0) / 4.0])

    def test_zero_residual(self):
        theta = np.array([0.3, -0.2])
        y = np.array([1.0, 2.0])
        a = linalg.ar_matrix_a(theta)
        x = np.linalg.solve(a, linalg.ar_matrix_b(theta) @ y)
        assert np.allclose(gains.gain_ard_score(theta, x, y, 1.0),
                           np.zeros(2), atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            d = int(rng.integers(1, 5))
            theta = rng.uniform(-0.4, 0.4, d) / max(1, d - 1)
            x = rng.normal(size=d)
            y = rng.normal(size=d)
            sigma = rng.uniform(0.5, 2.0)
            got = gains.gain_ard_score(theta, x, y, sigma)
            h = 1e-6
            for i in range(d):
                e = np.zeros(d)
                e[i] = h
                fd = (gains.ard_log_density(theta + e, x, y, sigma)
                      - gains.ard_log_density(theta - e, x, y, sigma)) / (2 * h)
                assert abs(got[i] - fd) <= 1e-5 * (1.0 + abs(fd))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gains.gain_ard_score([0.1, 0.2], [1.0], [1.0, 2.0], 1.0)


class TestAverageGainArd:
    def test_zero_at_truth(self):
        got = gains.average_gain_ard([0.3, 0.1], [0.3, 0.1], [1.0, 2.0], 1.0)
        assert np.array_equal(got, np.zeros(2))

    def test_d1_closed_form(self):
        # M = y^2 / sigma^2 = 4
        got = gains.average_gain_ard([0.9], [0.4], [2.0], 1.0)
        assert np.allclose(got, [-4.0 * 0.5])

    def test_matches_mc_score_average_d2(self):
        rng = make_rng(11)
        theta = np.array([0.3, -0.2])
        est = np.array([0.1, 0.25])
        y = np.array([0.8, -1.1])
        sigma = 1.0
        a = linalg.ar_matrix_a(theta)
        mean_x = np.linalg.solve(a, linalg.ar_matrix_b(theta) @ y)
        a_inv = np.linalg.inv(a)
        n = 100_000
        xi = rng.standard_normal((n, 2)) * sigma
        xs = mean_x + xi @ a_inv.T
        samples = np.array([gains.gain_ard_score(est, x, y, sigma) for x in xs])
        want = gains.average_gain_ard(est, theta, y, sigma)
        se = samples.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(samples.mean(axis=0) - want) <= 3.0 * se + 1e-9)


class TestModifiers:
    def test_soft_normalize_values(self):
        assert np.array_equal(gains.modifier_soft_normalize(np.zeros(2)),
                              np.zeros(2))
        assert math.isclose(
            np.linalg.norm(gains.modifier_soft_normalize([1.0])), 0.5)
        assert math.isclose(
            np.linalg.norm(gains.modifier_soft_normalize([3.0])), 0.75)

    def test_norm_truncate_values(self):
        assert np.allclose(gains.modifier_norm_truncate([3.0, 4.0], 1.0),
                           [0.6, 0.8])
        small = np.array([0.1, 0.2])
        assert np.array_equal(gains.modifier_norm_truncate(small, 1.0), small)
        big = np.array([3.0, 4.0])
        assert np.array_equal(gains.modifier_norm_truncate(big, 1e12), big)

    def test_predictable_rescale_values(self):
        g = np.array([2.0, -2.0])
        assert np.array_equal(gains.modifier_predictable_rescale(g, 1.0, 2.0), g)
        assert np.allclose(gains.modifier_predictable_rescale(g, 4.0, 2.0),
                           g / 2.0)
        assert np.array_equal(gains.modifier_predictable_rescale(g, 2.0, 2.0), g)


finite_vectors = hnp.arrays(
    dtype=np.float64,
    shape=st.integers(min_value=1, max_value=6),
    elements=st.floats(min_value=-1e6, max_value=1e6,
                       allow_nan=False, allow_infinity=False),
)


def _direction_factor(out, g):
    """Scalar t with out = t*g, or None if not collinear."""
    g = np.asarray(g, dtype=float)
    norm_g = float(np.linalg.norm(g))
    norm_out = float(np.linalg.norm(out))
    if norm_g == 0.0:
        return 1.0 if norm_out == 0.0 else None
    if norm_out == 0.0:
        return None
    if not np.allclose(out / norm_out, g / norm_g, atol=1e-12):
        return None
    return norm_out / norm_g


TOL = 1e-12  # collinearity factor may exceed 1 by rounding only


@given(g=finite_vectors)
def test_soft_normalize_preserves_direction(g):
    t = _direction_factor(gains.modifier_soft_normalize(g), g)
    assert t is not None and 0.0 < t <= 1.0 + TOL


@given(g=finite_vectors, kappa=st.floats(min_value=1e-6, max_value=1e9))
def test_norm_truncate_preserves_direction(g, kappa):
    out = gains.modifier_norm_truncate(g, kappa)
    t = _direction_factor(out, g)
    assert t is not None and 0.0 < t <= 1.0 + TOL
    assert float(np.linalg.norm(out)) <= kappa * (1.0 + 1e-12)


@given(g=finite_vectors, s=st.floats(min_value=1e-6, max_value=1e9),
       kappa=st.floats(min_value=1e-6, max_value=1e9))
def test_predictable_rescale_preserves_direction(g, s, kappa):
    t = _direction_factor(gains.modifier_predictable_rescale(g, s, kappa), g)
    assert t is not None and 0.0 < t <= 1.0 + TOL


class TestSpecs:
    def test_signal_noise_constants(self):
        spec = gains.signal_noise_spec(2, noise_var=1.0)
        assert spec.constants.lambda1 == 1.0
        assert spec.constants.lambda2 == 1.0
        assert spec.constants.c_g == 2.0

    def test_gaussian_constants_diag(self):
        spec = gains.gaussian_known_cov_spec(np.diag([2.0, 4.0]))
        assert math.isclose(spec.constants.lambda1, 0.25)
        assert math.isclose(spec.constants.lambda2, 0.5)

    def test_evaluators_broadcast_over_rows(self):
        rng = np.random.default_rng(2)
        spec = gains.arch1_spec(trunc=1.0)
        rows = rng.normal(size=(50, 2))
        stacked = spec.evaluator(0.3, rows)
        single = np.array([spec.evaluator(0.3, r) for r in rows])
        assert np.allclose(stacked, single)

    def test_vector_normalized_gain_rank_one_mean(self):
        # conditional mean -x x^T delta / (1 + mu ||x||^2): orthogonal
        # errors produce exactly zero mean gain, so no lower eigenvalue
        # bound can hold at d >= 2
        x = np.array([1.0, 0.5])
        delta = np.array([-0.5, 1.0])  # orthogonal to x
        est = np.array([0.2, 0.1]) + delta
        x_k = float(x @ np.array([0.2, 0.1]))  # noiseless response
        got = gains.ar_normalized_vector_gain(est, x_k, x, mu=1.0)
        assert np.allclose(got, np.zeros(2), atol=1e-12)
