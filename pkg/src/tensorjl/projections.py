"""
Application of projection maps to dense, TT and CP inputs.

Tensorized maps contract all k rows at once against the input through the
format-pair kernels of ``tensorjl.tensors``; the matrix baselines work on
``vec(x)`` and densify low-rank inputs below the oracle cap.
"""

from tensorjl.config import Family
from tensorjl.errors import ShapeMismatchError
from tensorjl.sampling import CPProjection
from tensorjl.sampling import DenseGaussianProjection
from tensorjl.sampling import default_sparsity
from tensorjl.sampling import Projection
from tensorjl.sampling import TTProjection
from tensorjl.sampling import VerySparseProjection
from tensorjl.tensors import AnyTensor
from tensorjl.tensors import check_same_shape
from tensorjl.tensors import contract_cp_cp
from tensorjl.tensors import contract_cp_dense
from tensorjl.tensors import contract_cp_tt
from tensorjl.tensors import contract_tt_cp
from tensorjl.tensors import contract_tt_dense
from tensorjl.tensors import contract_tt_tt
from tensorjl.tensors import CPTensor
from tensorjl.tensors import DenseTensor
from tensorjl.tensors import khatri_rao
from tensorjl.tensors import Shape
from tensorjl.tensors import to_dense
from tensorjl.tensors import TTTensor
from typing import Optional
from typing import Sequence
import math
import numpy as np


# Embeddings are plain float64 vectors of length k.
Embedding = np.ndarray


def project(p: Projection, x: AnyTensor, cap: Optional[int] = None) -> Embedding:
    check_same_shape(p.shape, x.shape)
    if isinstance(p, TTProjection):
        if isinstance(x, TTTensor):
            values = contract_tt_tt(p.cores, x.cores)
        elif isinstance(x, CPTensor):
            values = contract_tt_cp(p.cores, x.factors)
        else:
            values = contract_tt_dense(p.cores, x.values)
    elif isinstance(p, CPProjection):
        if isinstance(x, TTTensor):
            values = contract_cp_tt(p.factors, x.cores)
        elif isinstance(x, CPTensor):
            values = contract_cp_cp(p.factors, x.factors)
        else:
            values = contract_cp_dense(p.factors, x.values)
    elif isinstance(p, (DenseGaussianProjection, VerySparseProjection)):
        values = np.asarray(p.matrix @ to_dense(x, cap).vec()).reshape(-1)
    else:
        raise TypeError(f"Unsupported projection: {type(p)}")
    return p.scale * values


def trp_project(factors: Sequence[np.ndarray], x: DenseTensor) -> Embedding:
    """(1/sqrt(k)) (A^1 kr ... kr A^N)^T vec(x) for factors of shape (d_n, k)."""
    if tuple(f.shape[0] for f in factors) != x.shape.dims:
        raise ShapeMismatchError(
            f"Factor rows {[f.shape[0] for f in factors]} do not match {x.shape}"
        )
    k = factors[0].shape[1]
    # vec(x) runs the first mode fastest, so the first factor goes last in the chain
    return (khatri_rao(*reversed(factors)).T @ x.vec()) / math.sqrt(k)


def averaged_trp_project(outputs: Sequence[Embedding]) -> Embedding:
    lengths = {len(e) for e in outputs}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"Embedding lengths differ: {sorted(lengths)}")
    return np.sum(np.stack(outputs), axis=0) / math.sqrt(len(outputs))


def trp_as_cp_projection(factor_sets: Sequence[Sequence[np.ndarray]]) -> CPProjection:
    """
    CP projection of rank T whose row i stacks column i of the T TRP factor
    sets; factors are rescaled by T^(-1/(2N)) so the map equals the averaged
    TRP exactly.
    """
    T = len(factor_sets)
    N = len(factor_sets[0])
    scale = T ** (-1.0 / (2 * N))
    return CPProjection(
        [
            scale * np.stack([fs[n].T for fs in factor_sets], axis=2)
            for n in range(N)
        ]
    )


def parameter_count(
    family: Family, shape: Shape, R: int, k: int, s: Optional[float] = None
) -> float:
    """Stored parameters of a map; expected nonzeros for the very sparse baseline."""
    dims = shape.dims
    N = len(dims)
    if family == Family.TT:
        ranks = [1] + [R] * (N - 1) + [1]
        return float(k * sum(ranks[n] * d * ranks[n + 1] for n, d in enumerate(dims)))
    elif family == Family.CP:
        return float(k * sum(dims) * R)
    elif family == Family.GAUSSIAN:
        return float(k * shape.size)
    s = default_sparsity(shape.size) if s is None else s
    return k * shape.size / s
