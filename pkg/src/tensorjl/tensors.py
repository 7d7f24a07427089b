"""
Dense, tensor-train (TT) and CP tensors.

Dense tensors are vectorized with the first mode varying fastest (``vec``
concatenates mode-1 fibers). Inner products between low-rank formats never
materialize the dense tensor; they run the left-to-right boundary-matrix
recurrence. The ``contract_*`` kernels take the left operand with a leading
batch axis so the same code serves both single inner products and the k rows
of a projection.
"""

from dataclasses import dataclass
from functools import reduce
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import field_validator
from tensorjl.config import settings
from tensorjl.errors import OracleCapError
from tensorjl.errors import ShapeMismatchError
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union
import math
import numpy as np
import sys


class Shape(BaseModel):
    model_config = ConfigDict(frozen=True)

    dims: Tuple[int, ...]

    @field_validator("dims")
    @classmethod
    def check_dims(cls, dims: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(dims) < 1:
            raise ValueError("a tensor needs at least one mode")
        if any(d < 1 for d in dims):
            raise ValueError(f"mode sizes must be positive: {dims}")
        if math.prod(dims) > sys.maxsize:
            raise ValueError(f"total size of {dims} overflows the index range")
        return dims

    @classmethod
    def of(cls, *dims: int) -> "Shape":
        return cls(dims=tuple(int(d) for d in dims))

    @classmethod
    def uniform(cls, d: int, N: int) -> "Shape":
        return cls(dims=(int(d),) * int(N))

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.dims)


def check_cap(shape: Shape, cap: Optional[int] = None) -> None:
    cap = settings.ORACLE_CAP if cap is None else cap
    if shape.size > cap:
        raise OracleCapError(
            f"Refusing to densify {shape} ({shape.size} elements > cap {cap})"
        )


def check_same_shape(a: Shape, b: Shape) -> None:
    if a.dims != b.dims:
        raise ShapeMismatchError(f"Shape mismatch: {a} != {b}")


@dataclass(frozen=True)
class DenseTensor:
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        assert self.values.ndim >= 1, "dense tensor needs at least one mode"

    @property
    def shape(self) -> Shape:
        return Shape(dims=tuple(self.values.shape))

    def vec(self) -> np.ndarray:
        return np.ravel(self.values, order="F")

    @classmethod
    def from_vec(cls, shape: Shape, flat: np.ndarray) -> "DenseTensor":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != shape.size:
            raise ShapeMismatchError(f"{flat.size} values do not fill {shape}")
        return cls(np.reshape(flat, shape.dims, order="F"))


@dataclass(frozen=True)
class TTTensor:
    """Cores of shape (r_{n-1}, d_n, r_n) with r_0 = r_N = 1."""

    cores: List[np.ndarray]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "cores", [np.asarray(c, dtype=np.float64) for c in self.cores]
        )
        assert len(self.cores) >= 1, "a TT tensor needs at least one core"
        assert all(c.ndim == 3 for c in self.cores), "TT cores are order-3 arrays"
        assert self.cores[0].shape[0] == 1, "left boundary rank must be 1"
        assert self.cores[-1].shape[2] == 1, "right boundary rank must be 1"
        for left, right in zip(self.cores[:-1], self.cores[1:]):
            assert left.shape[2] == right.shape[0], "adjacent TT ranks differ"
        assert (
            len({c.shape[2] for c in self.cores[:-1]}) <= 1
        ), "interior TT ranks must be uniform"

    @property
    def shape(self) -> Shape:
        return Shape(dims=tuple(c.shape[1] for c in self.cores))

    @property
    def rank(self) -> int:
        return self.cores[0].shape[2] if len(self.cores) > 1 else 1


@dataclass(frozen=True)
class CPTensor:
    """Factor matrices of shape (d_n, R)."""

    factors: List[np.ndarray]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "factors", [np.asarray(f, dtype=np.float64) for f in self.factors]
        )
        assert len(self.factors) >= 1, "a CP tensor needs at least one factor"
        assert all(f.ndim == 2 for f in self.factors), "CP factors are matrices"
        assert (
            len({f.shape[1] for f in self.factors}) == 1
        ), "CP factors must share the same column count"

    @property
    def shape(self) -> Shape:
        return Shape(dims=tuple(f.shape[0] for f in self.factors))

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]


AnyTensor = Union[DenseTensor, TTTensor, CPTensor]


def describe(t: AnyTensor) -> str:
    """One-line debug summary of a tensor."""
    if isinstance(t, TTTensor):
        ranks = [1] + [c.shape[2] for c in t.cores]
        return f"TT shape={t.shape} ranks={ranks}"
    elif isinstance(t, CPTensor):
        return f"CP shape={t.shape} rank={t.rank}"
    return f"Dense shape={t.shape}"


def khatri_rao(*matrices: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; the first matrix's row index varies slowest."""
    assert matrices, "khatri_rao needs at least one matrix"
    columns = {m.shape[1] for m in matrices}
    if len(columns) != 1:
        raise ShapeMismatchError(f"Column counts differ: {[m.shape for m in matrices]}")

    def pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], -1)

    return reduce(pair, matrices)


def tt_to_dense(t: TTTensor, cap: Optional[int] = None) -> DenseTensor:
    check_cap(t.shape, cap)
    result = t.cores[0].reshape(t.cores[0].shape[1], -1)
    for core in t.cores[1:]:
        r, d, r_ = core.shape
        result = (result @ core.reshape(r, d * r_)).reshape(-1, r_)
    return DenseTensor(result.reshape(t.shape.dims))


def cp_to_dense(t: CPTensor, cap: Optional[int] = None) -> DenseTensor:
    check_cap(t.shape, cap)
    return DenseTensor(khatri_rao(*t.factors).sum(axis=1).reshape(t.shape.dims))


def to_dense(t: AnyTensor, cap: Optional[int] = None) -> DenseTensor:
    if isinstance(t, TTTensor):
        return tt_to_dense(t, cap)
    elif isinstance(t, CPTensor):
        return cp_to_dense(t, cap)
    return t


# Batched kernels. The left operand carries a leading batch axis of size k:
# TT cores (k, r, d, r'), CP factors (k, d, R), dense rows (k, D). The right
# operand is a single tensor. Each returns the k inner products.


def contract_tt_tt(
    rows: Sequence[np.ndarray], cores: Sequence[np.ndarray]
) -> np.ndarray:
    k = rows[0].shape[0]
    m = np.ones((k, 1, 1))
    for g, h in zip(rows, cores):
        _, ra, d, ra_ = g.shape
        rb, _, rb_ = h.shape
        # (k, rb, d * ra') then regroup to (k, ra', rb * d) and close with h
        t = np.matmul(m.transpose(0, 2, 1), g.reshape(k, ra, d * ra_))
        t = t.reshape(k, rb, d, ra_).transpose(0, 3, 1, 2).reshape(k, ra_, rb * d)
        m = np.matmul(t, h.reshape(rb * d, rb_))
    return m.reshape(k)


def contract_tt_cp(
    rows: Sequence[np.ndarray], factors: Sequence[np.ndarray]
) -> np.ndarray:
    k = rows[0].shape[0]
    m = np.ones((k, 1, factors[0].shape[1]))
    for g, f in zip(rows, factors):
        m = np.einsum("kas,kaic,is->kcs", m, g, f, optimize=True)
    return m.sum(axis=(1, 2))


def contract_cp_tt(
    rows: Sequence[np.ndarray], cores: Sequence[np.ndarray]
) -> np.ndarray:
    k, _, R = rows[0].shape
    m = np.ones((k, R, 1))
    for f, h in zip(rows, cores):
        m = np.einsum("kpa,kip,aic->kpc", m, f, h, optimize=True)
    return m.sum(axis=(1, 2))


def contract_cp_cp(
    rows: Sequence[np.ndarray], factors: Sequence[np.ndarray]
) -> np.ndarray:
    grams = [np.einsum("kir,is->krs", f, g) for f, g in zip(rows, factors)]
    return reduce(np.multiply, grams).sum(axis=(1, 2))


def contract_tt_dense(rows: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    k = rows[0].shape[0]
    w = np.einsum("kib,ir->kbr", rows[0][:, 0], x.reshape(x.shape[0], -1))
    for g in rows[1:]:
        _, r, d, _ = g.shape
        w = np.einsum("kair,kaib->kbr", w.reshape(k, r, d, -1), g)
    return w.reshape(k)


def contract_cp_dense(rows: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    k, _, R = rows[0].shape
    w = np.einsum("kip,ir->kpr", rows[0], x.reshape(x.shape[0], -1))
    for f in rows[1:]:
        w = np.einsum("kpir,kip->kpr", w.reshape(k, R, f.shape[1], -1), f)
    return w.sum(axis=(1, 2))


def dense_inner(a: DenseTensor, b: DenseTensor) -> float:
    check_same_shape(a.shape, b.shape)
    return float(np.dot(a.vec(), b.vec()))


def tt_inner_tt(a: TTTensor, b: TTTensor) -> float:
    check_same_shape(a.shape, b.shape)
    return float(contract_tt_tt([c[None] for c in a.cores], b.cores)[0])


def tt_inner_cp(a: TTTensor, b: CPTensor) -> float:
    check_same_shape(a.shape, b.shape)
    return float(contract_tt_cp([c[None] for c in a.cores], b.factors)[0])


def cp_inner_cp(a: CPTensor, b: CPTensor) -> float:
    check_same_shape(a.shape, b.shape)
    return float(contract_cp_cp([f[None] for f in a.factors], b.factors)[0])


def inner(a: AnyTensor, b: AnyTensor) -> float:
    """Inner product of any two formats through the cheapest routine."""
    check_same_shape(a.shape, b.shape)
    if isinstance(a, DenseTensor) and isinstance(b, DenseTensor):
        return dense_inner(a, b)
    elif isinstance(b, DenseTensor):
        a, b = b, a
    if isinstance(a, DenseTensor):
        if isinstance(b, TTTensor):
            return float(contract_tt_dense([c[None] for c in b.cores], a.values)[0])
        return float(contract_cp_dense([f[None] for f in b.factors], a.values)[0])
    if isinstance(a, TTTensor) and isinstance(b, TTTensor):
        return tt_inner_tt(a, b)
    elif isinstance(a, TTTensor) and isinstance(b, CPTensor):
        return tt_inner_cp(a, b)
    elif isinstance(a, CPTensor) and isinstance(b, TTTensor):
        return tt_inner_cp(b, a)
    elif isinstance(a, CPTensor) and isinstance(b, CPTensor):
        return cp_inner_cp(a, b)
    raise TypeError(f"Unsupported tensor pair: {type(a)}, {type(b)}")


def frobenius_norm(t: AnyTensor) -> float:
    return math.sqrt(max(inner(t, t), 0.0))


def scale_in_place(t: Union[TTTensor, CPTensor], c: float) -> Union[TTTensor, CPTensor]:
    """Scale by c through the first core (TT) or first factor (CP) only."""
    if isinstance(t, TTTensor):
        t.cores[0] *= c
    else:
        t.factors[0] *= c
    return t
