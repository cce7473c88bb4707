"""Fast sum-to-one orthogonal transform.

The transform is built from Kronecker powers of a 4x4 stencil whose rows
each sum to one.  The stencil is symmetric and orthogonal, so every power
is its own inverse: applying the transform twice returns the input.
"""

import numpy as np

from .errors import DimensionError, ResourceLimitError

# 4x4 building block: 1/2 * (ones - 2*eye).  Rows sum to 1, S @ S = I.
STENCIL = 0.5 * np.array(
    [
        [-1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0, -1.0],
    ]
)
STENCIL.setflags(write=False)

DENSE_LEVEL_CAP = 5


def level_of(size):
    """Return k such that size = 4**k, or raise DimensionError."""
    if size < 1:
        raise DimensionError(f"length must be a positive power of 4, got {size}")
    k = 0
    m = size
    while m > 1:
        if m % 4:
            raise DimensionError(f"length must be a power of 4, got {size}")
        m //= 4
        k += 1
    return k


def stone_transform(x):
    """Apply the sum-to-one transform along the last axis.

    The last axis must have length 4**k.  Runs k radix-4 butterfly passes,
    finest stride first; each 4-tuple (a1..a4) maps to
    (a1+a2+a3+a4)/2 - aj.  Cost is O(M log M) for length M.
    """
    v = np.array(x, dtype=np.float64)
    m = v.shape[-1] if v.ndim else v.size
    k = level_of(m)
    out = np.ascontiguousarray(v).reshape(-1)
    stride = 1
    for _ in range(k):
        b = out.reshape(-1, 4, stride)
        # 4-term sum in index order, then reflect around half the sum
        s = b[:, 0] + b[:, 1]
        s += b[:, 2]
        s += b[:, 3]
        s *= 0.5
        for j in range(4):
            np.subtract(s, b[:, j], out=b[:, j])
        stride *= 4
    return out.reshape(v.shape)


def dense_stone(level, cap=DENSE_LEVEL_CAP):
    """Explicit 4**level x 4**level transform matrix (Kronecker powers).

    Reference construction for tests and tiny instances only; ``cap``
    bounds memory (a level-5 matrix is 1024x1024).
    """
    if level < 0:
        raise DimensionError(f"level must be >= 0, got {level}")
    if level > cap:
        raise ResourceLimitError(f"dense transform level {level} exceeds cap {cap}")
    s = np.eye(1)
    for _ in range(level):
        s = np.kron(STENCIL, s)
    return s


def row_pattern(level, row):
    """Signs (+1/-1) of one transform row; the row itself is signs * 2**-level.

    The sign of entry (row, col) is -1 raised to the number of base-4 digit
    positions where row and col agree.  Exact integers, suitable for driving
    binary modulation hardware.
    """
    m = 4**level
    if not 0 <= row < m:
        raise DimensionError(f"row {row} out of range for level {level}")
    cols = np.arange(m)
    matches = np.zeros(m, dtype=np.int64)
    r = row
    c = cols
    for _ in range(level):
        matches += (r % 4) == (c % 4)
        r //= 4
        c = c // 4
    return np.where(matches % 2 == 1, -1, 1).astype(np.int8)
