"""
Seeded sampling of projection maps and random low-rank inputs.

Every draw comes from a counter-based Philox stream. The 128-bit key is
derived from the master seed. Row i of a map reads all of its cores (or its
matrix row) in mode order from the stream starting at counter ``[0, 0, 0, i]``;
TRP factor n uses ``[0, 0, n, 0]``. Streams only ever advance the two low
counter words, so they never overlap and appending rows leaves earlier rows
untouched.
"""

from dataclasses import dataclass
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from scipy import sparse
from tensorjl.config import Family
from tensorjl.config import InputFormat
from tensorjl.errors import DegenerateInputError
from tensorjl.errors import InvalidParameterError
from tensorjl.tensors import CPTensor
from tensorjl.tensors import frobenius_norm
from tensorjl.tensors import scale_in_place
from tensorjl.tensors import Shape
from tensorjl.tensors import TTTensor
from tensorjl.utils import get_logger
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union
import math
import numpy as np


logger = get_logger(__name__)

UINT64 = 2**64


def derive_seed(seed: int, *key: int) -> int:
    """Child seed of ``seed`` for the given index path."""
    state = np.random.SeedSequence(seed % UINT64, spawn_key=tuple(key))
    # 63 bits keep seeds representable as signed 64-bit CSV integers
    return int(state.generate_state(1, dtype=np.uint64)[0]) >> 1


def philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed % UINT64).generate_state(2, dtype=np.uint64)


def substream(key: np.ndarray, row: int, core: int = 0) -> np.random.Generator:
    counter = np.array([0, 0, core, row], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class TTProjection:
    """k TT rows stored core-wise: core n has shape (k, r_{n-1}, d_n, r_n)."""

    cores: List[np.ndarray]

    @property
    def k(self) -> int:
        return self.cores[0].shape[0]

    @property
    def rank(self) -> int:
        return self.cores[0].shape[3] if len(self.cores) > 1 else 1

    @property
    def shape(self) -> Shape:
        return Shape(dims=tuple(c.shape[2] for c in self.cores))

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.k)

    def row(self, i: int) -> TTTensor:
        return TTTensor([c[i].copy() for c in self.cores])


@dataclass(frozen=True)
class CPProjection:
    """k CP rows stored factor-wise: factor n has shape (k, d_n, R)."""

    factors: List[np.ndarray]

    @property
    def k(self) -> int:
        return self.factors[0].shape[0]

    @property
    def rank(self) -> int:
        return self.factors[0].shape[2]

    @property
    def shape(self) -> Shape:
        return Shape(dims=tuple(f.shape[1] for f in self.factors))

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.k)

    def row(self, i: int) -> CPTensor:
        return CPTensor([f[i].copy() for f in self.factors])


@dataclass(frozen=True)
class DenseGaussianProjection:
    matrix: np.ndarray
    shape: Shape

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.k)


@dataclass(frozen=True)
class VerySparseProjection:
    """Entries are +-sqrt(s) with probability 1/(2s) each, zero otherwise."""

    matrix: sparse.csr_matrix
    shape: Shape
    s: float

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.k)


Projection = Union[
    TTProjection, CPProjection, DenseGaussianProjection, VerySparseProjection
]


class InputSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    shape: Shape
    format: InputFormat = InputFormat.TT
    rank: int = Field(default=10, ge=1)
    unit_norm: bool = True


def check_positive(**values: float) -> None:
    for name, value in values.items():
        if value < 1:
            raise InvalidParameterError(f"{name} must be >= 1, got {value}")


def tt_core_variances(N: int, R: int) -> List[float]:
    """Entry variance per core: 1/sqrt(R) at both ends, 1/R inside."""
    if N == 1:
        if R != 1:
            raise InvalidParameterError(f"An order-1 TT projection has rank 1, got {R}")
        return [1.0]
    return [1.0 / math.sqrt(R) if n in (0, N - 1) else 1.0 / R for n in range(N)]


def cp_factor_variance(N: int, R: int) -> float:
    return (1.0 / R) ** (1.0 / N)


def sample_rows(
    key: np.ndarray,
    k: int,
    sizes: Sequence[Tuple[int, ...]],
    stds: Sequence[float],
) -> List[np.ndarray]:
    """
    Blocks of shape (k, *size): row i reads all of its blocks, in order, from
    the single stream ``substream(key, i)``, so row i does not depend on k.
    """
    counts = [math.prod(size) for size in sizes]
    draws = np.stack([substream(key, i).standard_normal(sum(counts)) for i in range(k)])
    blocks = np.split(draws, np.cumsum(counts)[:-1], axis=1)
    return [
        std * block.reshape((k,) + tuple(size))
        for block, size, std in zip(blocks, sizes, stds)
    ]


def sample_tt_projection(
    shape: Shape,
    R: int,
    k: int,
    seed: int,
    variances: Optional[Sequence[float]] = None,
) -> TTProjection:
    check_positive(R=R, k=k)
    N = shape.order
    variances = tt_core_variances(N, R) if variances is None else variances
    assert len(variances) == N, "one variance per core"
    ranks = [1] + [R] * (N - 1) + [1]
    sizes = [(ranks[n], d, ranks[n + 1]) for n, d in enumerate(shape.dims)]
    stds = [math.sqrt(v) for v in variances]
    return TTProjection(sample_rows(philox_key(seed), k, sizes, stds))


def sample_cp_projection(shape: Shape, R: int, k: int, seed: int) -> CPProjection:
    check_positive(R=R, k=k)
    std = math.sqrt(cp_factor_variance(shape.order, R))
    sizes = [(d, R) for d in shape.dims]
    return CPProjection(sample_rows(philox_key(seed), k, sizes, [std] * shape.order))


def sample_gaussian_rp(
    shape: Union[Shape, int], k: int, seed: int
) -> DenseGaussianProjection:
    shape = Shape.of(shape) if isinstance(shape, int) else shape
    check_positive(D=shape.size, k=k)
    key = philox_key(seed)
    matrix = np.stack(
        [substream(key, i).standard_normal(shape.size) for i in range(k)]
    )
    return DenseGaussianProjection(matrix, shape)


def default_sparsity(D: int) -> float:
    return math.sqrt(D)


def sample_very_sparse_rp(
    shape: Union[Shape, int], k: int, seed: int, s: Optional[float] = None
) -> VerySparseProjection:
    """
    Each row draws its nonzero count from Binomial(D, 1/s), places the
    nonzeros uniformly without replacement and gives them random signs,
    which is the three-point law entry by entry.
    """
    shape = Shape.of(shape) if isinstance(shape, int) else shape
    D = shape.size
    s = default_sparsity(D) if s is None else float(s)
    check_positive(D=D, k=k, s=s)
    key = philox_key(seed)
    indptr = [0]
    indices = []
    signs = []
    for i in range(k):
        rng = substream(key, i)
        nnz = int(rng.binomial(D, 1.0 / s))
        columns = np.sort(rng.choice(D, size=nnz, replace=False))
        indices.append(columns)
        signs.append(rng.choice(np.array([-1.0, 1.0]), size=nnz))
        indptr.append(indptr[-1] + nnz)
    matrix = sparse.csr_matrix(
        (
            math.sqrt(s) * np.concatenate(signs),
            np.concatenate(indices),
            np.array(indptr),
        ),
        shape=(k, D),
    )
    return VerySparseProjection(matrix, shape, s)


def _draw_input(spec: InputSpec, rng: np.random.Generator) -> Union[TTTensor, CPTensor]:
    if spec.format == InputFormat.CP:
        return CPTensor([rng.standard_normal((d, spec.rank)) for d in spec.shape.dims])
    N = spec.shape.order
    ranks = [1] + [spec.rank] * (N - 1) + [1]
    return TTTensor(
        [
            rng.standard_normal((ranks[n], d, ranks[n + 1]))
            for n, d in enumerate(spec.shape.dims)
        ]
    )


def random_input(spec: InputSpec, seed: int) -> Union[TTTensor, CPTensor]:
    """Random TT or CP input with i.i.d. N(0, 1) cores, optionally of unit norm."""
    key = philox_key(seed)
    for attempt in range(2):
        t = _draw_input(spec, substream(key, attempt))
        if not spec.unit_norm:
            return t
        norm = frobenius_norm(t)
        if norm > 0.0 and math.isfinite(norm):
            return scale_in_place(t, 1.0 / norm)
        logger.warning("Degenerate input | %s | attempt %s", spec.shape, attempt)
    raise DegenerateInputError(f"Sampled input of shape {spec.shape} has zero norm")


def sample_trp_factors(shape: Shape, k: int, seed: int) -> List[np.ndarray]:
    """Factor matrices (d_n x k) with i.i.d. N(0, 1) entries for a TRP map."""
    check_positive(k=k)
    key = philox_key(seed)
    return [
        substream(key, 0, n).standard_normal((d, k))
        for n, d in enumerate(shape.dims)
    ]


class ProjectionFamily(BaseModel):
    """A projection map family with fixed parameters; ``sample`` draws one map."""

    model_config = ConfigDict(frozen=True)

    family: Family
    shape: Shape
    k: int = Field(ge=1)
    rank: int = Field(default=1, ge=1)
    sparsity: Optional[float] = None
    variances: Optional[Tuple[float, ...]] = None

    @property
    def label(self) -> str:
        if self.family in (Family.TT, Family.CP):
            return f"{self.family.value}_{self.rank}"
        return self.family.value

    def with_k(self, k: int) -> "ProjectionFamily":
        return self.model_copy(update={"k": k})

    def sample(self, seed: int) -> Projection:
        if self.family == Family.TT:
            return sample_tt_projection(
                self.shape, self.rank, self.k, seed, self.variances
            )
        elif self.family == Family.CP:
            return sample_cp_projection(self.shape, self.rank, self.k, seed)
        elif self.family == Family.GAUSSIAN:
            return sample_gaussian_rp(self.shape, self.k, seed)
        return sample_very_sparse_rp(self.shape, self.k, seed, self.sparsity)
