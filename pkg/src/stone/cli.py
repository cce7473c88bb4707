"""Command-line interface: acquisition simulation, previews, reconstruction,
classification and self-tests over the documented file formats.

Exit codes: 0 success, 2 validation error, 3 runtime/numeric error.
"""

import argparse
import io
import json
import os
import sys

import numpy as np

from . import imageio
from .core import DENSE_LEVEL_CAP, dense_stone, stone_transform
from .embedding import build_pixel_ordering, devectorize, vectorize
from .errors import (
    DimensionError,
    DivergenceError,
    IncompletePreviewError,
    NotApplicableError,
    ResourceLimitError,
    StreamFormatError,
    WindowError,
)
from .preview import preview_from_stream
from .recon import (
    DEFAULT_STEP,
    DualField,
    SolverConfig,
    grad3,
    grad3_adjoint,
    preview_warm_start,
    segment_stream,
    solve_3dtv,
    write_diagnostics_csv,
)
from .sampling import acquire, build_schedule, read_stream, selector_from_window, write_stream
from .smashed import HypothesisCatalog, smashed_match

DEFAULTS = {
    "mu": 500.0,
    "tau": DEFAULT_STEP,
    "sigma": DEFAULT_STEP,
    "max_iters": 2000,
    "tol": 1e-4,
    "adaptive": False,
    "projection": "isotropic",
    "noise_sigma": 0.0,
    "noise_seed": 0,
    "schedule_seed": 0,
    "preview_bits": 8,
    "dense_level_cap": DENSE_LEVEL_CAP,
}

_VALIDATION_ERRORS = (
    DimensionError,
    WindowError,
    NotApplicableError,
    ResourceLimitError,
    StreamFormatError,
    IncompletePreviewError,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
    json.JSONDecodeError,
)


def _print_config():
    for key in sorted(DEFAULTS):
        print(f"{key}={DEFAULTS[key]}")


def _load_stream(path):
    with open(path, "rb") as f:
        return read_stream(f)


def cmd_transform(args):
    if args.inverse:
        coeffs, side = imageio.read_raw(args.input)
        if coeffs.size != side * side:
            raise DimensionError("coefficient count does not match side")
        img = devectorize(stone_transform(coeffs), build_pixel_ordering(side))
        imageio.write_image(args.output, img, bits=args.bits)
    else:
        img = imageio.read_image(args.input)
        coeffs = stone_transform(vectorize(img))
        imageio.write_raw(args.output, coeffs, side=img.shape[0], dtype="<f8")
    return 0


def _frame_paths(directory):
    names = sorted(n for n in os.listdir(directory) if n.endswith(".pgm"))
    if not names:
        raise DimensionError(f"no .pgm frames found in {directory}")
    return [os.path.join(directory, n) for n in names]


def cmd_acquire(args):
    frames = [imageio.read_image(p) for p in _frame_paths(args.frames)]
    sides = {f.shape[0] for f in frames}
    if len(sides) != 1:
        raise DimensionError(f"frames have mixed sides {sorted(sides)}")
    if args.measurements_per_frame is not None:
        mpf = args.measurements_per_frame
    elif args.rate_hz is not None and args.fps is not None:
        mpf = int(round(args.rate_hz / args.fps))
    else:
        raise DimensionError(
            "need --measurements-per-frame or both --rate-hz and --fps"
        )
    if mpf < 1:
        raise DimensionError(f"measurements per frame must be >= 1, got {mpf}")
    schedule = build_schedule(sides.pop(), args.seed)
    stream = acquire(frames, schedule, mpf,
                     noise_sigma=args.noise_sigma, noise_seed=args.noise_seed)
    buf = io.BytesIO()
    write_stream(stream, buf)
    imageio.atomic_write_bytes(args.output, buf.getvalue())
    print(f"wrote {len(stream)} records "
          f"({stream.frame_count} frames x {mpf} measurements) to {args.output}")
    return 0


def cmd_preview(args):
    stream = _load_stream(args.stream)
    at = args.at if args.at is not None else int(stream.positions[-1])
    pv = preview_from_stream(stream, at, args.side)
    imageio.write_image(args.output, pv.image, bits=args.bits)
    print(f"{args.side}x{args.side} preview from window "
          f"[{pv.window_start}..{at}] -> {args.output}")
    return 0


def cmd_reconstruct(args):
    stream = _load_stream(args.stream)
    measurements = segment_stream(stream, width=args.width, stride=args.stride)
    os.makedirs(args.output_dir, exist_ok=True)
    diag_path = args.diagnostics or os.path.join(args.output_dir, "diagnostics.csv")
    if not measurements:
        with open(diag_path, "w") as f:
            f.write("iteration,objective,primal_residual,dual_residual,elapsed_s\n")
        print("stream has no complete frame window; nothing to reconstruct")
        return 0
    config = SolverConfig(
        mu=args.mu,
        tau=args.tau,
        sigma=args.sigma,
        max_iters=args.max_iters,
        tol=args.tol,
        adaptive=args.adaptive,
        projection=args.projection,
    )
    init = preview_warm_start(measurements) if args.init == "preview" else None
    volume, diag = solve_3dtv(measurements, config, init)
    ext = ".pgm" if args.format == "pgm" else ".f32"
    for f in range(volume.shape[0]):
        imageio.write_image(
            os.path.join(args.output_dir, f"frame_{f:04d}{ext}"),
            volume[f],
            bits=16,
        )
    write_diagnostics_csv(diag, diag_path)
    status = "converged" if diag.converged else "max iterations"
    print(f"reconstructed {volume.shape[0]} frames in {diag.iterations} "
          f"iterations ({status}); diagnostics -> {diag_path}")
    return 0


def _load_catalog(directory):
    names = sorted(
        n for n in os.listdir(directory) if n.endswith((".pgm", ".f32"))
    )
    if not names:
        raise DimensionError(f"no catalog images found in {directory}")
    templates = {
        os.path.splitext(n)[0]: imageio.read_image(os.path.join(directory, n))
        for n in names
    }
    return HypothesisCatalog(templates)


def cmd_classify(args):
    stream = _load_stream(args.stream)
    catalog = _load_catalog(args.catalog)
    at = args.at if args.at is not None else int(stream.positions[-1])
    pv = preview_from_stream(stream, at, args.side)
    result = smashed_match(pv, catalog)
    payload = json.dumps(
        {
            "template": result.template,
            "dx": result.shift[0],
            "dy": result.shift[1],
            "score": result.score,
        },
        indent=2,
    ) + "\n"
    if args.output:
        imageio.atomic_write_bytes(args.output, payload.encode())
    print(payload, end="")
    return 0


def cmd_selftest(args):
    rng = np.random.default_rng(12345)
    checks = []

    def check(name, fn):
        try:
            ok = bool(fn())
        except Exception as exc:  # report, keep running other checks
            print(f"{name}: FAIL ({exc})")
            checks.append(False)
            return
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
        checks.append(ok)

    def orthogonality():
        for k in range(4):
            s = dense_stone(k)
            m = 4**k
            if np.abs(s.T @ s - np.eye(m)).max() > 1e-12:
                return False
            if np.abs(s.sum(axis=1) - 1.0).max() > 1e-12:
                return False
        return True

    def involution():
        x = rng.standard_normal(256)
        return np.abs(stone_transform(stone_transform(x)) - x).max() < 1e-10

    def fast_vs_dense():
        x = rng.standard_normal(64)
        return np.abs(stone_transform(x) - dense_stone(3) @ x).max() < 1e-10

    def window_property():
        side = 8
        m = side * side
        for seed in (1, 2, 3):
            sched = build_schedule(side, seed)
            for n in (1, 2, 4, 8):
                n2 = n * n
                for start in range(m):
                    sel = selector_from_window(sched, start, n2)
                    if np.unique(sched.group_of(sel.rows, n)).size != n2:
                        return False
        return True

    def adjoint():
        u = rng.standard_normal((4, 8, 8))
        g = grad3(u)
        p = DualField(
            px=rng.standard_normal(g.px.shape),
            py=rng.standard_normal(g.py.shape),
            pt=rng.standard_normal(g.pt.shape),
        )
        lhs = np.sum(g.px * p.px) + np.sum(g.py * p.py) + np.sum(g.pt * p.pt)
        rhs = np.sum(u * grad3_adjoint(p))
        return abs(lhs - rhs) < 1e-10

    def preview_exactness():
        side = 8
        sched = build_schedule(side, 7)
        img = np.zeros((side, side))
        img[:4, :4] = 0.25
        img[4:, 4:] = 0.75
        stream = acquire([img] * 2, sched, side * side)
        for n in (2, 4, 8):
            pv = preview_from_stream(stream, 2 * side * side - 1, n)
            d = side // n
            expect = img.reshape(n, d, n, d).mean(axis=(1, 3))
            if np.abs(pv.image - expect).max() > 1e-10:
                return False
        return True

    check("transform-orthogonality", orthogonality)
    check("transform-involution", involution)
    check("transform-vs-dense", fast_vs_dense)
    check("schedule-window-property", window_property)
    check("gradient-adjoint", adjoint)
    check("preview-exactness", preview_exactness)
    return 0 if all(checks) else 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stone",
        description="Compressive imaging toolkit: sum-to-one transform, "
        "previews, 3DTV reconstruction, smashed-filter classification.",
    )
    parser.add_argument(
        "--print-config", action="store_true",
        help="print all numeric defaults and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("transform", help="transform an image to coefficients or back")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--inverse", action="store_true",
                   help="input is a coefficient file; write an image")
    p.add_argument("--bits", type=int, default=DEFAULTS["preview_bits"],
                   choices=(8, 16))
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("acquire", help="simulate scheduled acquisition of frames")
    p.add_argument("--frames", required=True, help="directory of .pgm frames")
    p.add_argument("--seed", type=int, default=DEFAULTS["schedule_seed"])
    p.add_argument("--measurements-per-frame", type=int, default=None)
    p.add_argument("--rate-hz", type=float, default=None,
                   help="measurement rate; with --fps sets measurements per frame")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=DEFAULTS["noise_sigma"])
    p.add_argument("--noise-seed", type=int, default=DEFAULTS["noise_seed"])
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("preview", help="direct low-resolution preview from a stream")
    p.add_argument("--stream", required=True)
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--at", type=int, default=None,
                   help="stream position; default is the last record")
    p.add_argument("--bits", type=int, default=DEFAULTS["preview_bits"],
                   choices=(8, 16))
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("reconstruct", help="3DTV reconstruction of a stream")
    p.add_argument("--stream", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--width", type=int, default=None,
                   help="records per frame window; default from the stream header")
    p.add_argument("--stride", type=int, default=None,
                   help="window stride; smaller than width overlaps windows")
    p.add_argument("--mu", type=float, default=DEFAULTS["mu"])
    p.add_argument("--tau", type=float, default=DEFAULTS["tau"])
    p.add_argument("--sigma", type=float, default=DEFAULTS["sigma"])
    p.add_argument("--max-iters", type=int, default=DEFAULTS["max_iters"])
    p.add_argument("--tol", type=float, default=DEFAULTS["tol"])
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--projection", choices=("isotropic", "linf"),
                   default=DEFAULTS["projection"])
    p.add_argument("--init", choices=("preview", "zero"), default="preview")
    p.add_argument("--format", choices=("f32", "pgm"), default="f32")
    p.add_argument("--diagnostics", default=None,
                   help="CSV path; default <output-dir>/diagnostics.csv")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("classify", help="smashed-filter match against a catalog")
    p.add_argument("--stream", required=True)
    p.add_argument("--catalog", required=True, help="directory of template images")
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--at", type=int, default=None)
    p.add_argument("--output", default=None, help="write the JSON result here too")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("selftest", help="run the fast invariant checks")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        _print_config()
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - unexpected failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
