"""
CIFAR-10 binary batches.

A batch file is a sequence of 3073-byte records: one label byte followed by
three 32x32 channel planes (red, green, blue), each row-major. The 3072 pixel
bytes of an image fill a 4x4x4x4x4x3 tensor in first-mode-fastest order, so
the channel plane lands on the last (size-3) mode and the 1024 bytes of a
plane fill the five size-4 modes.
"""

from pathlib import Path
from tensorjl.errors import DatasetError
from tensorjl.sampling import philox_key
from tensorjl.sampling import substream
from tensorjl.tensors import DenseTensor
from tensorjl.tensors import Shape
from tensorjl.utils import get_logger
from typing import List
import numpy as np


logger = get_logger(__name__)

LABEL_BYTES = 1
IMAGE_BYTES = 3 * 32 * 32
RECORD_BYTES = LABEL_BYTES + IMAGE_BYTES
CIFAR_SHAPE = Shape(dims=(4, 4, 4, 4, 4, 3))


def image_tensor(pixels: np.ndarray) -> DenseTensor:
    values = np.reshape(pixels.astype(np.float64), CIFAR_SHAPE.dims, order="F")
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise DatasetError("All-zero image cannot be normalized")
    return DenseTensor(values / norm)


def load_cifar10(path: Path, n: int = 50) -> List[DenseTensor]:
    """First ``n`` images of a CIFAR-10 binary batch as unit-norm tensors."""
    data = Path(path).read_bytes()
    complete = len(data) // RECORD_BYTES
    if complete < n:
        raise DatasetError(
            f"Truncated CIFAR-10 batch {path}: {complete} complete records, need {n}",
            offset=complete * RECORD_BYTES,
        )
    if len(data) % RECORD_BYTES:
        raise DatasetError(
            f"Size of {path} ({len(data)} bytes) is not a multiple of the "
            f"{RECORD_BYTES}-byte record size",
            offset=complete * RECORD_BYTES,
        )
    records = np.frombuffer(data, dtype=np.uint8, count=n * RECORD_BYTES)
    images = records.reshape(n, RECORD_BYTES)[:, LABEL_BYTES:]
    logger.info("CIFAR-10 | %s | %s images", path, n)
    return [image_tensor(image) for image in images]


def synthetic_points(n: int, seed: int) -> List[DenseTensor]:
    """Stand-in for the CIFAR images: n random unit tensors of the same shape."""
    rng = substream(philox_key(seed), 0)
    return [
        image_tensor(rng.standard_normal(IMAGE_BYTES)) for _ in range(n)
    ]
