"""Compressive imaging toolkit built on a fast sum-to-one transform.

Provides the orthogonal transform and its multi-resolution pixel
embedding, structured-random measurement scheduling with a sliding-window
coverage guarantee, instant low-resolution previews from under-sampled
data, space-time total-variation reconstruction, and a preview-domain
smashed-filter classifier.
"""

from .core import STENCIL, dense_stone, level_of, row_pattern, stone_transform
from .embedding import (
    PixelOrdering,
    ProlongationSpec,
    build_pixel_ordering,
    devectorize,
    export_ordering,
    prolong,
    restrict,
    vectorize,
)
from .errors import (
    DimensionError,
    DivergenceError,
    IncompletePreviewError,
    NotApplicableError,
    ResourceLimitError,
    StoneError,
    StreamFormatError,
    WindowError,
)
from .preview import PreviewImage, RebinnedCoefficients, preview, preview_from_stream, rebin
from .recon import (
    DualField,
    FrameMeasurements,
    SolverConfig,
    SolverDiagnostics,
    data_prox,
    grad3,
    grad3_adjoint,
    objective_value,
    preview_warm_start,
    project_dual,
    segment_stream,
    solve_3dtv,
    solve_single_frame,
    tv3_value,
    write_diagnostics_csv,
)
from .sampling import (
    MeasurementSchedule,
    MeasurementStream,
    RowSelector,
    acquire,
    build_schedule,
    read_stream,
    selector_from_window,
    write_stream,
)
from .smashed import (
    HypothesisCatalog,
    MatchResult,
    compressive_score_equivalence,
    cyclic_shift,
    score_surface,
    smashed_match,
)

__version__ = "0.1.0"
