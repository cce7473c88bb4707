"""Pixel orderings and resolution-change operators.

Images are embedded into vectors with a recursive four-panel ordering:
the square is split into quadrants visited clockwise from top-left, and
each quadrant receives a contiguous quarter of the index range.  Under
this ordering every aligned dyadic patch occupies one contiguous slice of
the vector, which is what makes multi-resolution re-binning possible.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError


def _check_dyadic_side(side):
    if side < 1 or side & (side - 1):
        raise DimensionError(f"image side must be a power of two, got {side}")


@dataclass(frozen=True)
class PixelOrdering:
    """Bijection between (row, col) pixel positions and vector indices."""

    side: int
    table: np.ndarray  # (side, side) -> vector index
    rows: np.ndarray  # vector index -> row
    cols: np.ndarray  # vector index -> col


@lru_cache(maxsize=32)
def build_pixel_ordering(side):
    """Recursive clockwise quadrant ordering of an NxN pixel grid.

    Quadrants are visited top-left, top-right, bottom-right, bottom-left
    at every recursion level.  Equivalently, the base-4 digit of the index
    at level l is (r_bit xor c_bit) + 2*r_bit, taking bit l of the row and
    column coordinates.  Cached; returned arrays are read-only.
    """
    _check_dyadic_side(side)
    rr, cc = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    table = np.zeros((side, side), dtype=np.int64)
    levels = side.bit_length() - 1
    for l in range(levels):
        rb = (rr >> l) & 1
        cb = (cc >> l) & 1
        table |= ((rb ^ cb) + 2 * rb) << (2 * l)
    rows = np.empty(side * side, dtype=np.int64)
    cols = np.empty(side * side, dtype=np.int64)
    flat = table.ravel()
    rows[flat] = rr.ravel()
    cols[flat] = cc.ravel()
    for a in (table, rows, cols):
        a.setflags(write=False)
    return PixelOrdering(side=side, table=table, rows=rows, cols=cols)


def vectorize(img, ordering=None):
    """Flatten a square image into panel order."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise DimensionError(f"expected a square image, got shape {img.shape}")
    if ordering is None:
        ordering = build_pixel_ordering(img.shape[0])
    elif ordering.side != img.shape[0]:
        raise DimensionError(
            f"ordering side {ordering.side} != image side {img.shape[0]}"
        )
    vec = np.empty(img.size, dtype=np.float64)
    vec[ordering.table.ravel()] = img.ravel()
    return vec


def devectorize(vec, ordering=None):
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec, dtype=np.float64)
    side = int(round(np.sqrt(vec.size)))
    if side * side != vec.size:
        raise DimensionError(f"vector length {vec.size} is not a square")
    if ordering is None:
        ordering = build_pixel_ordering(side)
    elif ordering.side != side:
        raise DimensionError(f"ordering side {ordering.side} != vector side {side}")
    img = np.empty((side, side), dtype=np.float64)
    img[ordering.rows, ordering.cols] = vec
    return img


def export_ordering(ordering, path):
    """Write the ordering as text lines "row col index" for golden tests."""
    with open(path, "w") as f:
        for r in range(ordering.side):
            for c in range(ordering.side):
                f.write(f"{r} {c} {ordering.table[r, c]}\n")


@dataclass(frozen=True)
class ProlongationSpec:
    """Resolution pair for prolongation/restriction between dyadic sides."""

    fine_side: int
    coarse_side: int

    def __post_init__(self):
        _check_dyadic_side(self.fine_side)
        _check_dyadic_side(self.coarse_side)
        if self.coarse_side > self.fine_side:
            raise DimensionError(
                f"coarse side {self.coarse_side} exceeds fine side {self.fine_side}"
            )

    @property
    def ratio(self):
        return self.fine_side // self.coarse_side


def prolong(coarse, spec):
    """Replicate each coarse entry over its delta**2-long fine block.

    In the image domain this is nearest-neighbor upsampling by the given
    ratio, thanks to the contiguous-patch property of the panel ordering.
    """
    coarse = np.asarray(coarse, dtype=np.float64)
    n2 = spec.coarse_side * spec.coarse_side
    if coarse.size != n2:
        raise DimensionError(f"expected length {n2}, got {coarse.size}")
    return np.repeat(coarse, spec.ratio * spec.ratio)


def restrict(fine, spec):
    """Block means over contiguous fine blocks; left inverse of prolong.

    Not the exact adjoint: <prolong(x), y> = ratio**2 * <x, restrict(y)>.
    """
    fine = np.asarray(fine, dtype=np.float64)
    big = spec.fine_side * spec.fine_side
    if fine.size != big:
        raise DimensionError(f"expected length {big}, got {fine.size}")
    d2 = spec.ratio * spec.ratio
    return fine.reshape(-1, d2).mean(axis=1)
