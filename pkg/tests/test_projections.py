"""Test projection of dense, TT and CP inputs."""

from functools import reduce
from hypothesis import given
from hypothesis import seed
from hypothesis import settings
from hypothesis import strategies as st
from tensorjl.config import Family
from tensorjl.errors import OracleCapError
from tensorjl.errors import ShapeMismatchError
from tensorjl.projections import averaged_trp_project
from tensorjl.projections import parameter_count
from tensorjl.projections import project
from tensorjl.projections import trp_as_cp_projection
from tensorjl.projections import trp_project
from tensorjl.sampling import InputSpec
from tensorjl.sampling import random_input
from tensorjl.sampling import sample_cp_projection
from tensorjl.sampling import sample_gaussian_rp
from tensorjl.sampling import sample_trp_factors
from tensorjl.sampling import sample_tt_projection
from tensorjl.sampling import sample_very_sparse_rp
from tensorjl.tensors import CPTensor
from tensorjl.tensors import DenseTensor
from tensorjl.tensors import Shape
from tensorjl.tensors import to_dense
from tensorjl.tensors import TTTensor
from typing import List
from typing import Tuple
import math
import numpy as np
import pytest


def inputs(dims: List[int], rank: int, state: int) -> list:
    rng = np.random.default_rng(state)
    ranks = [1] + [rank] * (len(dims) - 1) + [1]
    return [
        TTTensor(
            [
                rng.standard_normal((ranks[n], d, ranks[n + 1]))
                for n, d in enumerate(dims)
            ]
        ),
        CPTensor([rng.standard_normal((d, rank)) for d in dims]),
        DenseTensor(rng.standard_normal(dims)),
    ]


def oracle(p, x) -> Tuple[np.ndarray, float]:  # type: ignore[no-untyped-def]
    """Densify every row and take plain dot products; also a rounding tolerance."""
    flat = to_dense(x).vec()
    rows = np.stack([to_dense(p.row(i)).vec() for i in range(p.k)])
    tolerance = 1e-10 * np.linalg.norm(rows, axis=1).max() * np.linalg.norm(flat)
    return rows @ flat / math.sqrt(p.k), tolerance


@seed(3)
@settings(max_examples=200, deadline=None)
@given(
    dims=st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=6),
    rank=st.integers(min_value=1, max_value=5),
    input_rank=st.integers(min_value=1, max_value=5),
    k=st.integers(min_value=1, max_value=6),
    state=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_tensorized_projection_matches_dense_rows(
    dims: List[int], rank: int, input_rank: int, k: int, state: int
) -> None:
    """TT and CP maps agree with densified rows for every input format."""
    shape = Shape.of(*dims)
    tt_rank = rank if len(dims) > 1 else 1
    maps = [
        sample_tt_projection(shape, R=tt_rank, k=k, seed=state),
        sample_cp_projection(shape, R=rank, k=k, seed=state),
    ]
    for p in maps:
        for x in inputs(dims, input_rank, state):
            expected, tolerance = oracle(p, x)
            assert np.all(np.abs(project(p, x) - expected) <= tolerance)


def test_matrix_baselines_use_vec() -> None:
    """Gaussian and very sparse maps multiply vec(x)."""
    shape = Shape.of(3, 4, 2)
    x = random_input(InputSpec(shape=shape, rank=2), seed=1)
    flat = to_dense(x).vec()
    gaussian = sample_gaussian_rp(shape, k=5, seed=2)
    assert np.allclose(project(gaussian, x), gaussian.matrix @ flat / math.sqrt(5))
    sparse = sample_very_sparse_rp(shape, k=5, seed=2, s=3.0)
    expected = sparse.matrix.toarray() @ flat / math.sqrt(5)
    assert np.allclose(project(sparse, x), expected)


def test_baseline_refuses_large_inputs() -> None:
    """Densifying a low-rank input for a baseline honours the cap."""
    shape = Shape.uniform(4, 3)
    x = random_input(InputSpec(shape=shape, rank=2), seed=1)
    gaussian = sample_gaussian_rp(shape, k=2, seed=2)
    with pytest.raises(OracleCapError):
        project(gaussian, x, cap=32)


def test_projection_rejects_shape_mismatch() -> None:
    """Map and input shapes must match."""
    p = sample_tt_projection(Shape.of(2, 3), R=2, k=3, seed=0)
    x = random_input(InputSpec(shape=Shape.of(3, 2), rank=2), seed=0)
    with pytest.raises(ShapeMismatchError):
        project(p, x)


def test_projection_is_linear() -> None:
    """f(a x + b y) = a f(x) + b f(y)."""
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, 3, 3, 3))
    p = sample_tt_projection(Shape.uniform(3, 3), R=2, k=8, seed=4)
    left = project(p, DenseTensor(2.0 * x - 0.5 * y))
    right = 2.0 * project(p, DenseTensor(x)) - 0.5 * project(p, DenseTensor(y))
    assert np.allclose(left, right)


def test_trp_matches_rank_one_rows() -> None:
    """Row i of a TRP map is the outer product of column i of each factor."""
    shape = Shape.of(2, 3, 4)
    factors = sample_trp_factors(shape, k=5, seed=1)
    x = DenseTensor(np.random.default_rng(1).standard_normal(shape.dims))
    expected = [
        np.sum(reduce(np.multiply.outer, [f[:, i] for f in factors]) * x.values)
        for i in range(5)
    ]
    assert np.allclose(trp_project(factors, x), np.array(expected) / math.sqrt(5))


def test_trp_rejects_mismatched_factors() -> None:
    """Factor row counts must match the input modes."""
    factors = sample_trp_factors(Shape.of(2, 3), k=2, seed=0)
    with pytest.raises(ShapeMismatchError):
        trp_project(factors, DenseTensor(np.zeros((3, 2))))


def test_averaged_trp_is_a_cp_projection() -> None:
    """Averaging T TRP outputs equals the rank-T CP map built from their factors."""
    shape = Shape.of(3, 2, 4)
    factor_sets = [sample_trp_factors(shape, k=6, seed=s) for s in range(4)]
    x = DenseTensor(np.random.default_rng(2).standard_normal(shape.dims))
    averaged = averaged_trp_project([trp_project(fs, x) for fs in factor_sets])
    cp = trp_as_cp_projection(factor_sets)
    assert cp.rank == 4
    assert np.allclose(project(cp, x), averaged)


def test_averaged_trp_of_one_output() -> None:
    """T = 1 returns the single TRP output."""
    e = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(averaged_trp_project([e]), e)
    with pytest.raises(ShapeMismatchError):
        averaged_trp_project([e, np.zeros(2)])


def test_parameter_count() -> None:
    """Stored entries per map family."""
    shape = Shape.uniform(3, 3)
    assert parameter_count(Family.TT, shape, 2, 5) == 120.0
    assert parameter_count(Family.CP, shape, 2, 5) == 90.0
    assert parameter_count(Family.GAUSSIAN, shape, 1, 5) == 135.0
    assert parameter_count(Family.VERY_SPARSE, shape, 1, 5, s=3.0) == 45.0


def test_trp_equivalences_over_seeds() -> None:
    """A TRP is a rank-1 CP map and the T-average is a rank-T CP map."""
    shape = Shape.of(3, 4, 2)
    x = DenseTensor(np.random.default_rng(0).standard_normal(shape.dims))
    for s in range(100):
        factor_sets = [
            sample_trp_factors(shape, k=7, seed=100 * s + t) for t in range(3)
        ]
        single = trp_project(factor_sets[0], x)
        rank_one = project(trp_as_cp_projection(factor_sets[:1]), x)
        atol = 1e-12 * np.abs(single).max()
        assert np.allclose(rank_one, single, rtol=1e-12, atol=atol)
        averaged = averaged_trp_project([trp_project(fs, x) for fs in factor_sets])
        rank_t = project(trp_as_cp_projection(factor_sets), x)
        atol = 1e-12 * np.abs(averaged).max()
        assert np.allclose(rank_t, averaged, rtol=1e-12, atol=atol)
