"""Direct low-resolution previews from under-sampled transform coefficients.

A window of measurements whose rows cover all n*n coefficient groups is
re-binned (group means) into a complete n x n coefficient set, which one
fast transform turns back into an image.  No iterations involved.
"""

from dataclasses import dataclass

import numpy as np

from .core import stone_transform
from .embedding import build_pixel_ordering, devectorize
from .errors import DimensionError, IncompletePreviewError, WindowError


@dataclass(frozen=True)
class RebinnedCoefficients:
    """Group means of measured values plus per-group sample counts."""

    values: np.ndarray
    counts: np.ndarray
    fine_side: int
    coarse_side: int


@dataclass(frozen=True)
class PreviewImage:
    """An n x n direct reconstruction with its provenance."""

    image: np.ndarray
    source_side: int
    window_start: int
    window_count: int
    bins_hit: int

    @property
    def side(self):
        return self.image.shape[0]


def _check_resolutions(fine_side, coarse_side):
    for s in (fine_side, coarse_side):
        if s < 1 or s & (s - 1):
            raise DimensionError(f"side must be a power of two, got {s}")
    if coarse_side > fine_side:
        raise DimensionError(
            f"preview side {coarse_side} exceeds source side {fine_side}"
        )


def rebin(rows, values, fine_side, coarse_side):
    """Average measured values into the n*n coefficient groups.

    Group of row k is k // delta**2 with delta = N/n.  Every group must
    receive at least one sample; otherwise IncompletePreviewError reports
    the empty groups rather than imputing anything.
    """
    _check_resolutions(fine_side, coarse_side)
    rows = np.asarray(rows, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if rows.shape != values.shape:
        raise DimensionError("rows and values must have matching length")
    if np.any((rows < 0) | (rows >= fine_side * fine_side)):
        raise DimensionError("row index out of range")
    n2 = coarse_side * coarse_side
    d2 = (fine_side // coarse_side) ** 2
    groups = rows // d2
    counts = np.bincount(groups, minlength=n2)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise IncompletePreviewError(empty)
    sums = np.bincount(groups, weights=values, minlength=n2)
    return RebinnedCoefficients(
        values=sums / counts,
        counts=counts,
        fine_side=fine_side,
        coarse_side=coarse_side,
    )


def preview(rebinned, window_start=0, window_count=None):
    """Invert re-binned coefficients into an image with one fast transform."""
    if np.any(rebinned.counts < 1):
        raise IncompletePreviewError(np.flatnonzero(rebinned.counts < 1))
    n = rebinned.coarse_side
    img = devectorize(stone_transform(rebinned.values), build_pixel_ordering(n))
    if window_count is None:
        window_count = int(rebinned.counts.sum())
    return PreviewImage(
        image=img,
        source_side=rebinned.fine_side,
        window_start=window_start,
        window_count=window_count,
        bins_hit=int(np.count_nonzero(rebinned.counts)),
    )


def preview_from_stream(stream, at_position, coarse_side):
    """Preview from the n*n most recent stream records ending at a position.

    The schedule's window property guarantees one sample per group for any
    dyadic n up to the source side, so this never raises
    IncompletePreviewError on schedule-ordered streams.
    """
    _check_resolutions(stream.side, coarse_side)
    n2 = coarse_side * coarse_side
    if at_position < n2 - 1:
        raise WindowError(
            f"position {at_position} is too early for a {coarse_side}x{coarse_side} "
            f"preview ({n2} records needed)"
        )
    rows, values = stream.window(at_position, n2)
    binned = rebin(rows, values, stream.side, coarse_side)
    return preview(binned, window_start=at_position - n2 + 1, window_count=n2)
