"""Compressive video reconstruction with a space-time total-variation model.

The model stacks F frames and penalizes isotropic spatial gradients plus
absolute temporal differences, with a quadratic fit to the measured
transform coefficients:

    min_u  TV3(u) + (mu/2) * sum_f || R_f S u_f - b_f ||^2

It is solved by a primal-dual hybrid gradient iteration.  Because the
transform is symmetric and orthogonal, the primal data step has a closed
form: one transform, an elementwise diagonal solve, and one transform back.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .core import stone_transform
from .embedding import (
    ProlongationSpec,
    build_pixel_ordering,
    devectorize,
    prolong,
    vectorize,
)
from .errors import DimensionError, DivergenceError

# ||grad3^T grad3|| <= 8 from 2-D forward differences plus 4 temporal.
GRAD3_NORM_BOUND = 12.0
DEFAULT_STEP = 1.0 / np.sqrt(GRAD3_NORM_BOUND)


@dataclass
class SolverConfig:
    """Step sizes, weights and stopping rules for the primal-dual solver.

    Residuals are RMS-normalized (2-norm divided by the square root of the
    variable size); iteration stops when both fall below ``tol``.  The
    product tau*sigma must satisfy tau*sigma*12 <= 1.  ``projection``
    selects the dual projection: "isotropic" projects spatial pairs onto
    the unit disc and clamps temporal entries, "linf" clamps everything
    elementwise.  ``adaptive`` enables residual-balancing step updates
    (keeps tau*sigma constant); off by default so runs are reproducible.
    """

    mu: float = 500.0
    tau: float = DEFAULT_STEP
    sigma: float = DEFAULT_STEP
    max_iters: int = 2000
    tol: float = 1e-4
    adaptive: bool = False
    projection: str = "isotropic"

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.tau <= 0 or self.sigma <= 0:
            raise ValueError("step sizes must be positive")
        if self.tau * self.sigma * GRAD3_NORM_BOUND > 1.0 + 1e-12:
            raise ValueError(
                f"tau*sigma*{GRAD3_NORM_BOUND:g} must be <= 1, got "
                f"{self.tau * self.sigma * GRAD3_NORM_BOUND:g}"
            )
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.projection not in ("isotropic", "linf"):
            raise ValueError(f"unknown projection mode {self.projection!r}")


@dataclass
class DualField:
    """Dual variable: spatial components per frame, temporal per interface."""

    px: np.ndarray  # (F, N, N)
    py: np.ndarray  # (F, N, N)
    pt: np.ndarray  # (F-1, N, N)

    @classmethod
    def zeros(cls, frames, side):
        shape = (frames, side, side)
        tshape = (max(frames - 1, 0), side, side)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(tshape))

    @property
    def size(self):
        return self.px.size + self.py.size + self.pt.size


def grad3(u):
    """Forward differences in row, column and frame directions.

    Differences are zero at the trailing boundary in each direction; a
    single frame has an empty temporal component.
    """
    u = np.asarray(u, dtype=np.float64)
    px = np.zeros_like(u)
    py = np.zeros_like(u)
    px[:, :-1, :] = u[:, 1:, :] - u[:, :-1, :]
    py[:, :, :-1] = u[:, :, 1:] - u[:, :, :-1]
    pt = u[1:] - u[:-1]
    return DualField(px=px, py=py, pt=pt)


def grad3_adjoint(p):
    """Exact adjoint of :func:`grad3` (negative divergence)."""
    out = np.zeros_like(p.px)
    out[:, :-1, :] -= p.px[:, :-1, :]
    out[:, 1:, :] += p.px[:, :-1, :]
    out[:, :, :-1] -= p.py[:, :, :-1]
    out[:, :, 1:] += p.py[:, :, :-1]
    if p.pt.size:
        out[:-1] -= p.pt
        out[1:] += p.pt
    return out


def tv3_value(u):
    """Isotropic spatial + anisotropic temporal total variation."""
    g = grad3(u)
    return float(np.sum(np.sqrt(g.px**2 + g.py**2)) + np.sum(np.abs(g.pt)))


def project_dual(p, mode="isotropic"):
    """Project the dual field onto its constraint set.

    Isotropic mode scales each spatial pair onto the unit disc and clamps
    temporal entries to [-1, 1]; "linf" clamps every component.
    """
    if mode == "isotropic":
        mag = np.maximum(1.0, np.sqrt(p.px**2 + p.py**2))
        px = p.px / mag
        py = p.py / mag
    elif mode == "linf":
        px = np.clip(p.px, -1.0, 1.0)
        py = np.clip(p.py, -1.0, 1.0)
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    pt = np.clip(p.pt, -1.0, 1.0)
    return DualField(px=px, py=py, pt=pt)


@dataclass(frozen=True)
class FrameMeasurements:
    """Count-weighted measured rows for one frame.

    Duplicate rows are merged: ``counts`` holds multiplicities, ``data_sum``
    the per-row sums of measured values, and ``sum_sq`` the total of squared
    values (needed to evaluate the exact least-squares misfit).
    """

    side: int
    counts: np.ndarray
    data_sum: np.ndarray
    sum_sq: float

    @classmethod
    def from_rows_values(cls, side, rows, values):
        rows = np.asarray(rows, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        n2 = side * side
        if rows.size and (rows.min() < 0 or rows.max() >= n2):
            raise DimensionError("row index out of range")
        counts = np.bincount(rows, minlength=n2).astype(np.float64)
        data_sum = np.bincount(rows, weights=values, minlength=n2)
        return cls(side=side, counts=counts, data_sum=data_sum,
                   sum_sq=float(np.dot(values, values)))

    @classmethod
    def empty(cls, side):
        n2 = side * side
        return cls(side=side, counts=np.zeros(n2), data_sum=np.zeros(n2), sum_sq=0.0)

    @property
    def num_measurements(self):
        return int(self.counts.sum())

    def misfit(self, coeffs):
        """|| R S u - b ||^2 evaluated from the frame's coefficient vector."""
        return float(
            np.dot(coeffs, self.counts * coeffs)
            - 2.0 * np.dot(coeffs, self.data_sum)
            + self.sum_sq
        )


def segment_stream(stream, width=None, stride=None):
    """Split a stream into per-frame measurement windows.

    ``width`` defaults to the stream's measurements_per_frame; a ``stride``
    smaller than the width yields overlapping frame windows.
    """
    if width is None:
        width = stream.measurements_per_frame
    if stride is None:
        stride = width
    if width < 1 or stride < 1:
        raise DimensionError("width and stride must be >= 1")
    if stride > width:
        raise DimensionError("stride may not exceed the window width")
    total = len(stream.records)
    frames = []
    start = 0
    while start + width <= total:
        chunk = stream.records[start : start + width]
        frames.append(
            FrameMeasurements.from_rows_values(
                stream.side,
                chunk["row_index"].astype(np.int64),
                chunk["value"],
            )
        )
        start += stride
    return frames


def _prox_coefficients(coeff_hat, meas, mu, tau):
    """Coefficients of the data-prox output given coefficients of the input."""
    return (coeff_hat / tau + mu * meas.data_sum) / (mu * meas.counts + 1.0 / tau)


def data_prox(u_hat, measurements, mu, tau):
    """Closed-form minimizer of the per-frame quadratic data term.

    Solves argmin_u (mu/2)||R S u - b||^2 + (1/2 tau)||u - u_hat||^2 one
    frame at a time: transform, divide by the diagonal mu*r + 1/tau, and
    transform back (two fast transforms per frame).
    """
    u_hat = np.asarray(u_hat, dtype=np.float64)
    single = u_hat.ndim == 2
    vol = u_hat[None] if single else u_hat
    if isinstance(measurements, FrameMeasurements):
        measurements = [measurements]
    if len(measurements) != vol.shape[0]:
        raise DimensionError(
            f"{len(measurements)} measurement frames for {vol.shape[0]} volume frames"
        )
    side = vol.shape[1]
    for m in measurements:
        if m.side != side:
            raise DimensionError("measurement side does not match volume")
    ordering = build_pixel_ordering(side)
    out = np.empty_like(vol)
    for f, meas in enumerate(measurements):
        c_hat = stone_transform(vectorize(vol[f], ordering))
        w = _prox_coefficients(c_hat, meas, mu, tau)
        out[f] = devectorize(stone_transform(w), ordering)
    return out[0] if single else out


def objective_value(u, measurements, mu):
    """Full model objective TV3(u) + (mu/2) * total least-squares misfit."""
    u = np.asarray(u, dtype=np.float64)
    vol = u[None] if u.ndim == 2 else u
    if isinstance(measurements, FrameMeasurements):
        measurements = [measurements]
    ordering = build_pixel_ordering(vol.shape[1])
    misfit = sum(
        m.misfit(stone_transform(vectorize(vol[f], ordering)))
        for f, m in enumerate(measurements)
    )
    return tv3_value(vol) + 0.5 * mu * misfit


@dataclass
class SolverDiagnostics:
    """Per-iteration traces from a primal-dual solve."""

    iterations: int = 0
    converged: bool = False
    objective: np.ndarray = field(default_factory=lambda: np.empty(0))
    primal_residual: np.ndarray = field(default_factory=lambda: np.empty(0))
    dual_residual: np.ndarray = field(default_factory=lambda: np.empty(0))
    elapsed: np.ndarray = field(default_factory=lambda: np.empty(0))


def write_diagnostics_csv(diag, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["iteration", "objective", "primal_residual", "dual_residual", "elapsed_s"]
        )
        for i in range(diag.iterations):
            w.writerow(
                [
                    i + 1,
                    f"{diag.objective[i]:.12e}",
                    f"{diag.primal_residual[i]:.6e}",
                    f"{diag.dual_residual[i]:.6e}",
                    f"{diag.elapsed[i]:.6f}",
                ]
            )


def solve_3dtv(measurements, config=None, init=None):
    """Reconstruct a frame stack from per-frame measurements.

    Primal-dual iteration with over-relaxation:

        u_hat = u_k - tau * grad3_adjoint(p_k)
        u_{k+1} = data_prox(u_hat)
        u_bar = 2 u_{k+1} - u_k
        p_{k+1} = project(p_k + sigma * grad3(u_bar))

    Stops when both RMS residuals fall below config.tol or at max_iters.
    Returns (volume, SolverDiagnostics).  Raises DivergenceError if the
    iterate stops being finite.
    """
    if config is None:
        config = SolverConfig()
    if isinstance(measurements, FrameMeasurements):
        measurements = [measurements]
    if not measurements:
        raise DimensionError("need at least one frame of measurements")
    side = measurements[0].side
    for m in measurements:
        if m.side != side:
            raise DimensionError("mixed measurement sides")
    frames = len(measurements)
    ordering = build_pixel_ordering(side)

    if init is None:
        u = np.zeros((frames, side, side))
    else:
        u = np.array(init, dtype=np.float64)
        if u.ndim == 2:
            u = u[None]
        if u.shape != (frames, side, side):
            raise DimensionError(
                f"init shape {u.shape} does not match ({frames}, {side}, {side})"
            )
    p = DualField.zeros(frames, side)

    tau, sigma = config.tau, config.sigma
    mu = config.mu
    balance_ratio = 2.0
    balance_step = 0.5
    balance_decay = 0.95

    obj = np.empty(config.max_iters)
    res_p = np.empty(config.max_iters)
    res_d = np.empty(config.max_iters)
    elapsed = np.empty(config.max_iters)
    t0 = time.perf_counter()

    u_scale = np.sqrt(u.size)
    p_scale = np.sqrt(p.size) if p.size else 1.0

    n_done = 0
    converged = False
    for k in range(config.max_iters):
        atp = grad3_adjoint(p)
        u_hat = u - tau * atp

        u_new = np.empty_like(u)
        data_misfit = 0.0
        for f, meas in enumerate(measurements):
            c_hat = stone_transform(vectorize(u_hat[f], ordering))
            w = _prox_coefficients(c_hat, meas, mu, tau)
            if not np.all(np.isfinite(w)):
                raise DivergenceError(k + 1)
            u_new[f] = devectorize(stone_transform(w), ordering)
            data_misfit += meas.misfit(w)

        g_bar = grad3(2.0 * u_new - u)
        p_new = project_dual(
            DualField(
                px=p.px + sigma * g_bar.px,
                py=p.py + sigma * g_bar.py,
                pt=p.pt + sigma * g_bar.pt,
            ),
            config.projection,
        )

        du = u - u_new
        dp = DualField(px=p.px - p_new.px, py=p.py - p_new.py, pt=p.pt - p_new.pt)
        g_du = grad3(du)
        r_p = np.linalg.norm((du / tau - grad3_adjoint(dp)).ravel()) / u_scale
        r_d = np.sqrt(
            np.sum((dp.px / sigma - g_du.px) ** 2)
            + np.sum((dp.py / sigma - g_du.py) ** 2)
            + np.sum((dp.pt / sigma - g_du.pt) ** 2)
        ) / p_scale

        obj[k] = tv3_value(u_new) + 0.5 * mu * data_misfit
        res_p[k] = r_p
        res_d[k] = r_d
        elapsed[k] = time.perf_counter() - t0
        n_done = k + 1

        u = u_new
        p = p_new

        if r_p < config.tol and r_d < config.tol:
            converged = True
            break

        if config.adaptive:
            if r_p > balance_ratio * r_d:
                tau *= 1.0 + balance_step
                sigma /= 1.0 + balance_step
                balance_step *= balance_decay
            elif r_d > balance_ratio * r_p:
                tau /= 1.0 + balance_step
                sigma *= 1.0 + balance_step
                balance_step *= balance_decay

    diag = SolverDiagnostics(
        iterations=n_done,
        converged=converged,
        objective=obj[:n_done].copy(),
        primal_residual=res_p[:n_done].copy(),
        dual_residual=res_d[:n_done].copy(),
        elapsed=elapsed[:n_done].copy(),
    )
    return u, diag


def solve_single_frame(measurements, config=None, init=None):
    """Single-frame reconstruction; temporal terms are structurally absent."""
    if isinstance(measurements, FrameMeasurements):
        measurements = [measurements]
    if len(measurements) != 1:
        raise DimensionError("solve_single_frame expects exactly one frame")
    vol_init = None if init is None else np.asarray(init, dtype=np.float64)[None]
    vol, diag = solve_3dtv(measurements, config, vol_init)
    return vol[0], diag


def preview_warm_start(measurements):
    """Per-frame prolonged previews as a solver starting volume.

    For each frame, re-bins its merged measurements at the largest dyadic
    resolution whose coefficient groups are all covered, inverts, and
    upsamples to full resolution.  A frame with no measurements starts at
    zero.
    """
    if isinstance(measurements, FrameMeasurements):
        measurements = [measurements]
    side = measurements[0].side
    ordering = build_pixel_ordering(side)
    out = np.zeros((len(measurements), side, side))
    for f, meas in enumerate(measurements):
        if meas.num_measurements == 0:
            continue
        n = side
        while n >= 1:
            d2 = (side // n) ** 2
            group_counts = meas.counts.reshape(n * n, d2).sum(axis=1)
            if np.all(group_counts > 0):
                break
            n //= 2
        group_sums = meas.data_sum.reshape(n * n, d2).sum(axis=1)
        coarse = stone_transform(group_sums / group_counts)
        fine = prolong(coarse, ProlongationSpec(fine_side=side, coarse_side=n))
        out[f] = devectorize(fine, ordering)
    return out
