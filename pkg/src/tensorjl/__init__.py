from tensorjl.projections import averaged_trp_project
from tensorjl.projections import project
from tensorjl.projections import trp_project
from tensorjl.sampling import ProjectionFamily
from tensorjl.tensors import CPTensor
from tensorjl.tensors import DenseTensor
from tensorjl.tensors import Shape
from tensorjl.tensors import TTTensor


__all__ = [
    "averaged_trp_project",
    "CPTensor",
    "DenseTensor",
    "project",
    "ProjectionFamily",
    "Shape",
    "trp_project",
    "TTTensor",
]
