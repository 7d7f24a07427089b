"""Test moment estimation, bounds and the verification checks."""

from pydantic import ValidationError
from tensorjl.config import Family
from tensorjl.config import InputFormat
from tensorjl.errors import InvalidParameterError
from tensorjl.errors import ShapeMismatchError
from tensorjl.sampling import InputSpec
from tensorjl.sampling import ProjectionFamily
from tensorjl.sampling import random_input
from tensorjl.tensors import DenseTensor
from tensorjl.tensors import Shape
from tensorjl.verify import BoundParams
from tensorjl.verify import distortion
from tensorjl.verify import estimate_projection_moments
from tensorjl.verify import exact_order2_check
from tensorjl.verify import is_non_increasing
from tensorjl.verify import isometry_check
from tensorjl.verify import isserlis_check
from tensorjl.verify import isserlis_expected
from tensorjl.verify import k_bound_value
from tensorjl.verify import lemma_check
from tensorjl.verify import min_k_bound
from tensorjl.verify import moment_report
from tensorjl.verify import n1_degeneracy_check
from tensorjl.verify import row_matrix
from tensorjl.verify import squared_norms
from tensorjl.verify import tail_bound_cp
from tensorjl.verify import tail_bound_tt
from tensorjl.verify import tail_check
from tensorjl.verify import TailReport
from tensorjl.verify import tt_variance_exact_order2
from tensorjl.verify import variance_bound
from tensorjl.verify import variance_bound_check
from tensorjl.verify import variance_bound_cp
from tensorjl.verify import variance_bound_tt
from tensorjl.verify import wishart_check
from tensorjl.verify import wishart_expected
import math
import numpy as np
import pytest


def test_moment_report() -> None:
    """Mean and unbiased variance of the samples."""
    samples = np.arange(1.0, 201.0)
    report = moment_report(samples)
    assert report.trials == 200
    assert math.isclose(report.mean, 100.5)
    assert math.isclose(report.variance, float(np.var(samples, ddof=1)))
    assert math.isclose(report.mean_stderr, math.sqrt(report.variance / 200))
    assert 0.0 < report.variance_stderr < math.inf


def test_moment_report_few_samples() -> None:
    """Too few samples for two jackknife blocks give an infinite stderr."""
    report = moment_report(np.array([1.0, 2.0, 4.0]))
    assert report.variance_stderr == math.inf


def test_variance_bounds() -> None:
    """Closed-form bounds at a few points."""
    assert math.isclose(variance_bound_tt(1, 1, 1), 2.0)
    assert math.isclose(variance_bound_cp(1, 1, 1), 2.0)
    assert math.isclose(variance_bound_tt(3, 2, 10), (3.0 * 4.0 - 1.0) / 10)
    assert math.isclose(variance_bound_cp(3, 2, 10), (9.0 * 2.0 - 1.0) / 10)
    shape = Shape.uniform(2, 3)
    gaussian = ProjectionFamily(family=Family.GAUSSIAN, shape=shape, k=4)
    assert math.isclose(variance_bound(gaussian), 0.5)
    with pytest.raises(InvalidParameterError):
        variance_bound(ProjectionFamily(family=Family.VERY_SPARSE, shape=shape, k=4))


def test_exact_order2_variance() -> None:
    """Identity matrix: (2 * 2^2 + 6 * 2) / k."""
    X = DenseTensor(np.eye(2))
    assert math.isclose(tt_variance_exact_order2(X, R=1, k=1), 20.0)
    assert math.isclose(tt_variance_exact_order2(X, R=3, k=2), (8.0 + 4.0) / 2)
    with pytest.raises(ShapeMismatchError):
        tt_variance_exact_order2(DenseTensor(np.ones((2, 2, 2))), R=1, k=1)


def test_min_k_bound() -> None:
    """The bound grows as epsilon shrinks and is larger for CP at N > 1."""
    loose = BoundParams(N=3, R=2, epsilon=0.5, delta=0.1, m=10)
    tight = BoundParams(N=3, R=2, epsilon=0.1, delta=0.1, m=10)
    assert min_k_bound(tight, InputFormat.TT) > min_k_bound(loose, InputFormat.TT)
    assert min_k_bound(loose, InputFormat.CP) > min_k_bound(loose, InputFormat.TT)
    expected = (1.0 + 2.0 / 2) ** 3 * math.log(10 / 0.1) ** 6 / 0.25
    assert min_k_bound(loose, InputFormat.TT) == math.ceil(expected)


def test_min_k_bound_monotonicity() -> None:
    """Fewer k at higher rank, more at higher order or smaller delta."""

    def k_for(**values: float) -> float:
        params = dict(N=3, R=2, epsilon=0.2, delta=0.1, m=10)
        params.update(values)
        return k_bound_value(BoundParams(**params), InputFormat.TT)

    by_rank = [k_for(R=R) for R in (1, 2, 5, 10, 100)]
    by_order = [k_for(N=N) for N in (1, 2, 3, 5, 8)]
    by_delta = [k_for(delta=delta) for delta in (0.5, 0.1, 0.01, 0.001)]
    assert all(a > b for a, b in zip(by_rank, by_rank[1:]))
    assert all(a < b for a, b in zip(by_order, by_order[1:]))
    assert all(a < b for a, b in zip(by_delta, by_delta[1:]))


def test_cp_bounds_dominate_tt() -> None:
    """CP needs at least the TT embedding dimension and variance bound."""
    for N in range(1, 26):
        for R in (1, 2, 5, 10, 25, 100):
            p = BoundParams(N=N, R=R, epsilon=0.5, delta=0.1, m=10)
            assert min_k_bound(p, InputFormat.CP) >= min_k_bound(p, InputFormat.TT)
            if N >= 2:
                tt = variance_bound_tt(N, R, 10)
                assert variance_bound_cp(N, R, 10) >= tt * (1.0 - 1e-12)


def test_exact_order2_tolerance() -> None:
    """Below full scale the band is never narrower than 5% of the target."""
    X = DenseTensor(np.random.default_rng(2).standard_normal((3, 3)))
    result = exact_order2_check(X, 2, 5, 1000, seed=1)
    assert result.tolerance >= 0.05 * result.target
    assert result.name == "exact_order2_R2_k5"


def test_bound_params_validation() -> None:
    """epsilon and delta lie in (0, 1)."""
    with pytest.raises(ValidationError):
        BoundParams(N=2, R=2, epsilon=1.5, delta=0.1)
    with pytest.raises(ValidationError):
        BoundParams(N=2, R=2, epsilon=0.1, delta=0.0)


def test_tail_bounds_decay_in_k() -> None:
    """Concentration bounds shrink as k grows."""
    tt = [tail_bound_tt(3, 2, k, 0.5) for k in (10, 100, 1000)]
    cp = [tail_bound_cp(3, 2, k, 0.5) for k in (10, 100, 1000)]
    assert tt[0] > tt[1] > tt[2]
    assert cp[0] > cp[1] > cp[2]


def test_distortion() -> None:
    """Distortion is the absolute error of ||f(x)||^2 / ||x||^2."""
    x = DenseTensor(np.array([3.0, 4.0]))
    assert math.isclose(distortion(np.array([5.0, 0.0]), x), 0.0, abs_tol=1e-12)
    assert math.isclose(distortion(np.array([0.0, 0.0]), x), 1.0)
    assert math.isclose(distortion(np.array([0.0, 10.0]), x), 3.0)


def test_squared_norms_are_reproducible() -> None:
    """Trials use derived seeds, so worker count does not matter."""
    shape = Shape.uniform(2, 3)
    x = random_input(InputSpec(shape=shape, rank=2), seed=0)
    pf = ProjectionFamily(family=Family.TT, shape=shape, k=4, rank=2)
    sequential = squared_norms(pf, x, 20, seed=5, max_jobs=1)
    parallel = squared_norms(pf, x, 20, seed=5, max_jobs=4)
    assert np.array_equal(sequential, parallel)


def test_moments_need_enough_trials() -> None:
    """Moment estimates need at least 100 trials."""
    shape = Shape.uniform(2, 2)
    x = random_input(InputSpec(shape=shape, rank=2), seed=0)
    pf = ProjectionFamily(family=Family.CP, shape=shape, k=4, rank=2)
    with pytest.raises(InvalidParameterError):
        estimate_projection_moments(pf, x, 10, seed=0)


def test_isometry_and_variance_checks_pass() -> None:
    """Correctly scaled TT and CP maps pass at a small size."""
    shape = Shape.uniform(3, 3)
    x = random_input(InputSpec(shape=shape, rank=2), seed=1)
    for family in (Family.TT, Family.CP):
        pf = ProjectionFamily(family=family, shape=shape, k=10, rank=2)
        assert isometry_check(pf, x, 2000, seed=2).passed
        assert variance_bound_check(pf, x, 2000, seed=2).passed


def test_wrong_interior_variance_fails_isometry() -> None:
    """Doubling the interior core variance doubles E||f(x)||^2."""
    shape = Shape.uniform(3, 3)
    x = random_input(InputSpec(shape=shape, rank=2), seed=1)
    pf = ProjectionFamily(
        family=Family.TT,
        shape=shape,
        k=10,
        rank=2,
        variances=(1.0 / math.sqrt(2.0), 1.0, 1.0 / math.sqrt(2.0)),
    )
    result = isometry_check(pf, x, 2000, seed=2)
    assert not result.passed
    assert result.value > 1.5


def test_lemma_checks() -> None:
    """Monte-Carlo fourth moments match the closed forms."""
    rng = np.random.default_rng(0)
    B = rng.standard_normal((2, 3))
    report = isserlis_check(0.7, B, 20_000, seed=1)
    assert lemma_check("isserlis", report, isserlis_expected(0.7, B)).passed
    report = wishart_check(1.0, B, 3, 20_000, seed=1)
    assert lemma_check("wishart", report, wishart_expected(1.0, B, 3)).passed
    with pytest.raises(InvalidParameterError):
        isserlis_check(1.0, B, 100, seed=1)


def test_tail_check() -> None:
    """Exceedance is a fraction with a binomial stderr and a reported bound."""
    shape = Shape.uniform(2, 3)
    x = random_input(InputSpec(shape=shape, rank=2), seed=0)
    pf = ProjectionFamily(family=Family.TT, shape=shape, k=5, rank=2)
    report = tail_check(pf, x, 20, 0.5, 1000, seed=3)
    assert report.k == 20
    assert 0.0 <= report.exceedance <= 1.0
    assert report.bound == tail_bound_tt(3, 2, 20, 0.5)
    with pytest.raises(InvalidParameterError):
        tail_check(pf, x, 20, 0.5, 10, seed=3)


def test_is_non_increasing() -> None:
    """Small increases within the noise are tolerated."""

    def report(k: int, p: float) -> TailReport:
        return TailReport(k=k, epsilon=0.5, trials=1000, exceedance=p, stderr=0.01)

    assert is_non_increasing([report(5, 0.4), report(10, 0.41), report(20, 0.1)])
    assert not is_non_increasing([report(5, 0.1), report(10, 0.4)])


def test_order_one_maps_reproduce_gaussian_rows() -> None:
    """TT and CP rows at N = 1 are bit-identical to the Gaussian rows."""
    x = DenseTensor(np.random.default_rng(0).standard_normal(6))
    results = {r.name: r for r in n1_degeneracy_check(x, 5, 200, seed=9)}
    assert results["n1_bit_identity_tt"].passed
    assert results["n1_bit_identity_cp"].passed
    pf = ProjectionFamily(family=Family.GAUSSIAN, shape=x.shape, k=5)
    assert row_matrix(pf.sample(0)).shape == (5, 6)


@pytest.mark.slow
def test_isometry_across_grid() -> None:
    """Isometry and variance bounds hold over orders, ranks and k."""
    for N in (2, 4, 8):
        shape = Shape.uniform(2, N)
        x = random_input(InputSpec(shape=shape, rank=3), seed=N)
        for R in (1, 2, 5):
            for k in (10, 50):
                for family in (Family.TT, Family.CP):
                    pf = ProjectionFamily(family=family, shape=shape, k=k, rank=R)
                    assert isometry_check(pf, x, 10_000, seed=R * k).passed
                    assert variance_bound_check(pf, x, 10_000, seed=R * k).passed


@pytest.mark.slow
def test_exact_order2_variance_full_scale() -> None:
    """Empirical TT variance on 6x6 inputs within 5% of the closed form."""
    rng = np.random.default_rng(6)
    for index in range(5):
        X = DenseTensor(rng.standard_normal((6, 6)))
        for R in (1, 3):
            for k in (1, 10):
                seed = index * 100 + R * 10 + k
                result = exact_order2_check(X, R, k, 200_000, seed=seed)
                assert result.tolerance == 0.05 * result.target
                assert result.passed


@pytest.mark.slow
def test_lemma_checks_full_scale() -> None:
    """Fourth-moment identities for 20 fixed matrices at 10^5 trials."""
    rng = np.random.default_rng(5)
    for index in range(20):
        B = rng.standard_normal((3, 4))
        sigma = float(rng.uniform(0.5, 1.5))
        report = isserlis_check(sigma, B, 100_000, seed=index)
        assert lemma_check("isserlis", report, isserlis_expected(sigma, B)).passed
        report = wishart_check(sigma, B, 5, 100_000, seed=index)
        assert lemma_check("wishart", report, wishart_expected(sigma, B, 5)).passed


@pytest.mark.slow
def test_order_one_moments_full_scale() -> None:
    """Order-1 maps match the Gaussian moments at 10^5 trials."""
    x = DenseTensor(np.random.default_rng(1).standard_normal(20))
    assert all(r.passed for r in n1_degeneracy_check(x, 10, 100_000, seed=4))
