"""Template matching against low-resolution previews (smashed filter).

Matching under-sampled measurements against a hypothesis catalog reduces,
after re-binning, to plain squared-error matching between the scene
preview and template previews.  All cyclic translations of a template are
scored at once through an FFT cross-correlation.
"""

from dataclasses import dataclass

import numpy as np

from .core import stone_transform
from .embedding import (
    ProlongationSpec,
    build_pixel_ordering,
    devectorize,
    restrict,
    vectorize,
)
from .errors import DimensionError, NotApplicableError
from .preview import PreviewImage, rebin


def cyclic_shift(img, dx, dy):
    """Shift image content dx pixels right and dy pixels down, wrapping."""
    return np.roll(np.asarray(img), shift=(dy, dx), axis=(0, 1))


@dataclass
class HypothesisCatalog:
    """Named full-resolution templates with cached per-resolution previews."""

    templates: dict

    def __post_init__(self):
        if not self.templates:
            raise DimensionError("catalog must contain at least one template")
        sides = set()
        clean = {}
        for name, img in self.templates.items():
            arr = np.asarray(img, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise DimensionError(f"template {name!r} is not square")
            sides.add(arr.shape[0])
            clean[name] = arr
        if len(sides) != 1:
            raise DimensionError(f"templates have mixed sides {sorted(sides)}")
        self.templates = clean
        self.side = sides.pop()
        self._previews = {}

    @property
    def names(self):
        return sorted(self.templates)

    def preview_of(self, name, coarse_side):
        """Block-mean representation of one template at a preview side."""
        key = (name, coarse_side)
        if key not in self._previews:
            spec = ProlongationSpec(fine_side=self.side, coarse_side=coarse_side)
            vec = restrict(vectorize(self.templates[name]), spec)
            self._previews[key] = devectorize(vec, build_pixel_ordering(coarse_side))
        return self._previews[key]


@dataclass(frozen=True)
class MatchResult:
    template: str
    shift: tuple
    score: float
    surfaces: dict = None


def score_surface(scene, template):
    """Squared-error score of every cyclic shift of the template.

    surface[dy, dx] = ||scene - shift(template, dx, dy)||^2, computed as
    ||scene||^2 - 2*crosscorr + ||template||^2 with the cross-correlation
    done by FFT (cyclic shifts preserve the template norm).
    """
    scene = np.asarray(scene, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if scene.shape != template.shape:
        raise DimensionError(
            f"scene shape {scene.shape} != template shape {template.shape}"
        )
    cc = np.fft.ifft2(np.fft.fft2(scene) * np.conj(np.fft.fft2(template))).real
    return np.sum(scene**2) - 2.0 * cc + np.sum(template**2)


def smashed_match(scene_preview, catalog, keep_surfaces=False):
    """Best (template, cyclic shift) match for a scene preview.

    Ties break deterministically: templates in name order, then shifts in
    lexicographic (dx, dy) order.
    """
    scene = (
        scene_preview.image
        if isinstance(scene_preview, PreviewImage)
        else np.asarray(scene_preview, dtype=np.float64)
    )
    n = scene.shape[0]
    if scene.ndim != 2 or scene.shape[1] != n:
        raise DimensionError(f"scene preview must be square, got {scene.shape}")
    if n > catalog.side:
        raise DimensionError(
            f"preview side {n} exceeds catalog template side {catalog.side}"
        )
    best = None
    surfaces = {} if keep_surfaces else None
    for name in catalog.names:
        surface = score_surface(scene, catalog.preview_of(name, n))
        if keep_surfaces:
            surfaces[name] = surface
        # scan dx-major so argmin tie-breaks lexicographically on (dx, dy)
        flat = np.argmin(surface.T)
        dx, dy = divmod(int(flat), n)
        score = float(surface[dy, dx])
        if best is None or score < best.score:
            best = MatchResult(template=name, shift=(dx, dy), score=score,
                               surfaces=surfaces)
    return best


def compressive_score_equivalence(rows, values, fine_side, coarse_side,
                                  template, shift):
    """Check that preview-domain and re-binned coefficient scores agree.

    The window must contain exactly one sample per coefficient group at the
    requested preview side (the uniquely-solvable re-binning case); a window
    with duplicated groups raises NotApplicableError.  Returns
    (preview_score, coefficient_score): the squared error between scene and
    shifted-template previews, and the squared error between the re-binned
    measurement vector and the transformed shifted-template preview.
    Orthogonality of the transform makes them equal.
    """
    rows = np.asarray(rows, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    n = coarse_side
    for s in (fine_side, n):
        if s < 1 or s & (s - 1):
            raise DimensionError(f"side must be a power of two, got {s}")
    if n > fine_side:
        raise DimensionError(f"preview side {n} exceeds source side {fine_side}")
    n2 = n * n
    d2 = (fine_side // n) ** 2
    counts = np.bincount(rows // d2, minlength=n2)
    if np.any(counts > 1):
        raise NotApplicableError(
            "score equivalence requires exactly one sample per group"
        )
    binned = rebin(rows, values, fine_side, n)
    template = np.asarray(template, dtype=np.float64)
    if template.shape != (fine_side, fine_side):
        raise DimensionError(
            f"template shape {template.shape} != ({fine_side}, {fine_side})"
        )
    ordering = build_pixel_ordering(n)
    scene_img = devectorize(stone_transform(binned.values), ordering)

    spec = ProlongationSpec(fine_side=fine_side, coarse_side=n)
    tmpl_img = devectorize(restrict(vectorize(template), spec), ordering)
    shifted = cyclic_shift(tmpl_img, shift[0], shift[1])

    preview_score = float(np.sum((scene_img - shifted) ** 2))
    coeff_score = float(
        np.sum((binned.values - stone_transform(vectorize(shifted, ordering))) ** 2)
    )
    return preview_score, coeff_score
