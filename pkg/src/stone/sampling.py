"""Measurement scheduling and simulated single-detector acquisition.

The row schedule is built by a recursive shuffle-and-interleave: the index
list is split into four contiguous quarters, the quarters are randomly
permuted, each is reordered recursively, and the results are interleaved
first-of-each, second-of-each, ...  Any n*n consecutive scheduled rows
(wrapping included) then hit n*n distinct coefficient groups for every
dyadic n, so a complete low-resolution preview is available at any time.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import stone_transform
from .embedding import build_pixel_ordering, vectorize
from .errors import DimensionError, StreamFormatError, WindowError

# PRNG identity recorded in stream headers (reserved bytes); schedules and
# noise are reproducible per seed within this implementation only.
GENERATOR_TAG = b"PCG64\x00\x00\x00"

STREAM_MAGIC = b"STO1"
STREAM_VERSION = 1
_HEADER = struct.Struct("<4sIIIIQQdQ8s")
RECORD_DTYPE = np.dtype([("position", "<u8"), ("row_index", "<u4"), ("value", "<f8")])


@dataclass(frozen=True)
class MeasurementSchedule:
    """Permutation of row indices 0..N*N-1 in acquisition order."""

    side: int
    seed: int
    order: np.ndarray

    def group_of(self, rows, coarse_side):
        """Coefficient group of each row when binned for an n x n preview."""
        d2 = (self.side // coarse_side) ** 2
        return np.asarray(rows) // d2


def _order_recursive(indices, rng):
    m = indices.size
    if m == 1:
        return indices
    q = m // 4
    parts = [indices[j * q : (j + 1) * q] for j in range(4)]
    names = rng.permutation(4)
    ordered = [_order_recursive(parts[names[j]], rng) for j in range(4)]
    out = np.empty(m, dtype=indices.dtype)
    for j in range(4):
        out[j::4] = ordered[j]
    return out


def build_schedule(side, seed):
    """Deterministic structured-random schedule for an NxN sensor."""
    if side < 1 or side & (side - 1):
        raise DimensionError(f"side must be a power of two, got {side}")
    rng = np.random.default_rng(seed)
    order = _order_recursive(np.arange(side * side, dtype=np.int64), rng)
    order.setflags(write=False)
    return MeasurementSchedule(side=side, seed=seed, order=order)


@dataclass(frozen=True)
class RowSelector:
    """Set of measured transform rows for one frame."""

    side: int
    rows: np.ndarray


def selector_from_window(schedule, start, count):
    """Rows covered by ``count`` consecutive schedule entries from ``start``.

    Windows wrap around the end of the schedule; count may not exceed the
    schedule length, which also guarantees no duplicates.
    """
    m = schedule.order.size
    if not 0 <= count <= m:
        raise WindowError(f"window count {count} outside 0..{m}")
    idx = (start + np.arange(count)) % m
    rows = np.sort(schedule.order[idx])
    rows.setflags(write=False)
    return RowSelector(side=schedule.side, rows=rows)


@dataclass
class MeasurementStream:
    """Ordered scalar measurements from a scheduled acquisition.

    ``records`` is a structured array of (position, row_index, value);
    positions are strictly increasing and row_index equals
    schedule.order[position mod N*N].
    """

    side: int
    schedule_seed: int
    measurements_per_frame: int
    frame_count: int
    noise_sigma: float
    noise_seed: int
    records: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.records)

    @property
    def positions(self):
        return self.records["position"]

    @property
    def rows(self):
        return self.records["row_index"]

    @property
    def values(self):
        return self.records["value"]

    def window(self, at_position, count):
        """The ``count`` most recent records ending at ``at_position``.

        Returns (rows, values).  Raises WindowError if the stream does not
        contain all of positions at_position-count+1 .. at_position.
        """
        if count < 1:
            raise WindowError(f"window count must be >= 1, got {count}")
        if at_position < count - 1:
            raise WindowError(
                f"position {at_position} has fewer than {count} records of history"
            )
        pos = self.records["position"]
        lo = np.searchsorted(pos, at_position - count + 1)
        hi = np.searchsorted(pos, at_position, side="right")
        if hi - lo != count or pos[hi - 1] != at_position:
            raise WindowError(
                f"stream does not cover positions "
                f"{at_position - count + 1}..{at_position}"
            )
        chunk = self.records[lo:hi]
        return chunk["row_index"].astype(np.int64), chunk["value"].copy()


def acquire(frames, schedule, measurements_per_frame, noise_sigma=0.0, noise_seed=0):
    """Simulate scheduled acquisition of a frame sequence.

    Record at stream position p measures frame p // measurements_per_frame
    with transform row schedule.order[p mod N*N]; each frame is transformed
    once and its coefficients cached.  Gaussian noise of the given sigma is
    added per record from a generator seeded with noise_seed.  The stream
    ends when the frames are exhausted (len(frames) * measurements_per_frame
    records).
    """
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if not frames:
        raise DimensionError("need at least one frame")
    side = schedule.side
    for f in frames:
        if f.shape != (side, side):
            raise DimensionError(
                f"frame shape {f.shape} does not match schedule side {side}"
            )
    if measurements_per_frame < 1:
        raise DimensionError("measurements_per_frame must be >= 1")

    ordering = build_pixel_ordering(side)
    coeffs = [stone_transform(vectorize(f, ordering)) for f in frames]

    total = len(frames) * measurements_per_frame
    positions = np.arange(total, dtype=np.uint64)
    rows = schedule.order[np.arange(total) % (side * side)]
    values = np.empty(total, dtype=np.float64)
    for f in range(len(frames)):
        sel = slice(f * measurements_per_frame, (f + 1) * measurements_per_frame)
        values[sel] = coeffs[f][rows[sel]]
    if noise_sigma > 0.0:
        rng = np.random.default_rng(noise_seed)
        values += noise_sigma * rng.standard_normal(total)

    records = np.empty(total, dtype=RECORD_DTYPE)
    records["position"] = positions
    records["row_index"] = rows
    records["value"] = values
    return MeasurementStream(
        side=side,
        schedule_seed=schedule.seed,
        measurements_per_frame=measurements_per_frame,
        frame_count=len(frames),
        noise_sigma=float(noise_sigma),
        noise_seed=noise_seed,
        records=records,
    )


def write_stream(stream, fileobj):
    """Serialize a stream in the STO1 container format (little-endian)."""
    header = _HEADER.pack(
        STREAM_MAGIC,
        STREAM_VERSION,
        stream.side,
        stream.measurements_per_frame,
        stream.frame_count,
        stream.schedule_seed,
        len(stream.records),
        stream.noise_sigma,
        stream.noise_seed,
        GENERATOR_TAG,
    )
    fileobj.write(header)
    fileobj.write(stream.records.tobytes())


def read_stream(fileobj, validate=True):
    """Parse an STO1 container; optionally verify the consistency invariant.

    Validation rebuilds the schedule from the header seed and checks that
    every record's row_index equals order[position mod N*N] and that
    positions increase strictly.
    """
    raw = fileobj.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise StreamFormatError("truncated stream header")
    (magic, version, side, mpf, frame_count, sched_seed, record_count, noise_sigma,
     noise_seed, _reserved) = _HEADER.unpack(raw)
    if magic != STREAM_MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}")
    if version != STREAM_VERSION:
        raise StreamFormatError(f"unsupported stream version {version}")
    body = fileobj.read(record_count * RECORD_DTYPE.itemsize)
    if len(body) != record_count * RECORD_DTYPE.itemsize:
        raise StreamFormatError("truncated record block")
    records = np.frombuffer(body, dtype=RECORD_DTYPE).copy()

    if validate and record_count:
        pos = records["position"]
        if np.any(np.diff(pos.astype(np.int64)) <= 0):
            raise StreamFormatError("positions are not strictly increasing")
        schedule = build_schedule(side, sched_seed)
        expected = schedule.order[pos % (side * side)]
        if np.any(records["row_index"] != expected):
            raise StreamFormatError("row_index inconsistent with schedule")

    return MeasurementStream(
        side=side,
        schedule_seed=sched_seed,
        measurements_per_frame=mpf,
        frame_count=frame_count,
        noise_sigma=noise_sigma,
        noise_seed=noise_seed,
        records=records,
    )
