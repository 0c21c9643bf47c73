"""Command-line front end.

Exit codes: 0 success, 2 dual-grid threshold not reached, 3 discrepancy
residual never crosses the noise level, 4 input or contract error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .errors import DualGridError, ParameterError
from .imageio import load_image, load_psf, save_image, save_npy, write_text
from .imaging import centered, convolve_periodic
from .metrics import psnr, ssim
from .phantom import SceneSpec, disc_psf, random_scene, reference_scene, render_scene, simulate_measurement
from .select import (
    DEFAULT_ALPHA_RANGE,
    DEFAULT_THRESHOLDS,
    NO_CROSSING,
    AlphaGrid,
    Regularizer,
    SelectionReport,
    _ordered_map,
    discrepancy_select,
    dual_grid_select,
    residual_curve,
    shift_similarity,
)

log = logging.getLogger("dualgrid")

EXIT_OK = 0
EXIT_NOT_REACHED = 2
EXIT_NO_CROSSING = 3
EXIT_ERROR = 4

IMAGE_SUFFIXES = (".png", ".pgm", ".pnm", ".npy")
DEFAULT_HYPOTHESIS_ALPHA = {"tikhonov": 1.0, "tv": 0.1}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _config(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k != "func"}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=lambda o: o.item() if isinstance(o, np.generic) else str(o)) + "\n"


def parse_patches(text) -> list:
    """``"x,y,w,h;x,y,w,h;..."`` to a list of integer 4-tuples."""
    patches = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 4:
            raise ParameterError(f"patch {chunk!r} must have the form x,y,w,h")
        patches.append(tuple(int(v) for v in parts))
    return patches


def _load_input(args):
    if not args.input:
        raise ParameterError("--input is required")
    path = Path(args.input)
    m = load_image(path)
    meta_path = path.parent / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else None
    return m, {"path": str(path), "sha256": _sha256(path), "shape": list(m.shape), "meta": meta}


def _load_psf(args, n):
    if args.psf_file:
        return load_psf(args.psf_file, n), {"file": str(args.psf_file), "sha256": _sha256(args.psf_file)}
    if args.psf_radius is None:
        raise ParameterError("a PSF is required: pass --psf-radius or --psf-file")
    return disc_psf(args.psf_radius, n), {"disc_radius": args.psf_radius}


def _regularizer(args) -> Regularizer:
    return Regularizer(kind=args.reg, max_iters=args.tv_iters, tol=args.tv_tol)


def _grid(args) -> AlphaGrid:
    lo, hi = DEFAULT_ALPHA_RANGE[args.reg]
    return AlphaGrid.logspace(args.alpha_min if args.alpha_min is not None else lo,
                              args.alpha_max if args.alpha_max is not None else hi,
                              args.alpha_count)


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(args, input_info, psf_info) -> dict:
    return {"version": __version__, "config": _config(args), "input": input_info, "psf": psf_info}


def cmd_phantom(args) -> int:
    out = _out(args)
    spec = SceneSpec.load(args.scene).with_size(args.size) if args.scene else reference_scene(args.size)
    f = render_scene(spec)
    m, p = simulate_measurement(f, args.psf_radius, args.noise, args.seed)
    save_image(out / "ground_truth.png", f)
    save_image(out / "measurement.png", m)
    pc = centered(p)
    save_image(out / "psf.png", pc / pc.max())
    save_npy(out / "ground_truth.npy", f)
    save_npy(out / "measurement.npy", m)
    save_npy(out / "psf.npy", pc)
    spec.save(out / "scene.json")
    meta = {
        "version": __version__,
        "config": _config(args),
        "size": args.size,
        "psf_radius": args.psf_radius,
        "noise_level": args.noise,
        "noise_reference": "blurred image",
        "seed": args.seed,
        "psf_layout": "centered at (n//2, n//2), unit sum",
        "psnr_measurement": psnr(m, f),
    }
    write_text(out / "meta.json", _dump(meta))
    if args.plots:
        plotting.plot_images([("ground truth", f), ("blurred + noise", m), ("PSF", pc, "auto")],
                             out / "phantom.png")
    log.info("phantom written to %s", out)
    return EXIT_OK


def cmd_select(args) -> int:
    threshold = args.threshold if args.threshold is not None else DEFAULT_THRESHOLDS[args.reg]
    m, input_info = _load_input(args)
    p, psf_info = _load_psf(args, m.shape[0])
    reg = _regularizer(args)
    report = dual_grid_select(m, p, reg, _grid(args), threshold, early_exit=args.early_exit)
    out = _out(args)
    report.curve.to_csv(out / "dual_grid_curve.csv")
    prov = _provenance(args, input_info, psf_info)
    prov["config"]["threshold"] = threshold
    write_text(out / "selection.json", report.to_json(**prov))
    if report.reconstruction is not None:
        save_npy(out / "reconstruction.npy", report.reconstruction)
        save_image(out / "reconstruction.png", report.reconstruction)
    if args.plots:
        plotting.plot_curves([report.curve], out / "dual_grid_curve.png", threshold=threshold,
                             chosen=report.chosen_alpha, title=f"dual-grid SSIM ({args.reg})")
        if report.reconstruction is not None:
            plotting.plot_images([("measurement", m),
                                  (f"reconstruction, alpha={report.chosen_alpha:.3g}", report.reconstruction)],
                                 out / "reconstruction_panel.png")
    if not report.selected:
        log.warning("no grid alpha reached SSIM threshold %g", threshold)
        return EXIT_NOT_REACHED
    print(f"chosen alpha = {report.chosen_alpha:.6g}")
    return EXIT_OK


def cmd_discrepancy(args) -> int:
    from .select import estimate_noise

    if not args.patches:
        raise ParameterError(
            "--patches is required: give at least four flat regions as 'x,y,w,h;x,y,w,h;...'"
        )
    patches = parse_patches(args.patches)
    m, input_info = _load_input(args)
    p, psf_info = _load_psf(args, m.shape[0])
    reg = _regularizer(args)
    grid = _grid(args)
    sigma_mean, delta = estimate_noise(m, patches)
    noise = {"sigma_mean": sigma_mean, "delta": delta, "patches": patches}
    if delta > 0:
        report = discrepancy_select(m, p, reg, grid, delta, early_exit=args.early_exit, diagnostics=noise)
    else:
        # A zero noise estimate can never be matched by a positive residual.
        curve = residual_curve(m, p, reg, grid)
        report = SelectionReport(method="discrepancy", status=NO_CROSSING, chosen_alpha=None, target=0.0,
                                 curve=curve,
                                 settings={"regularizer": reg.to_dict(), "grid": list(grid.values), "delta": 0.0},
                                 diagnostics=dict(noise, note="estimated noise level is zero"))
    out = _out(args)
    report.curve.to_csv(out / "residual_curve.csv", extra={"delta": delta})
    write_text(out / "discrepancy.json", report.to_json(**_provenance(args, input_info, psf_info)))
    if report.reconstruction is not None:
        save_npy(out / "reconstruction.npy", report.reconstruction)
        save_image(out / "reconstruction.png", report.reconstruction)
    if args.plots:
        plotting.plot_curves([report.curve], out / "residual_curve.png", threshold=delta,
                             chosen=report.chosen_alpha, ylabel=r"$\Psi(\alpha)$", hline_label=r"$\delta$",
                             title=f"discrepancy ({args.reg})")
    if not report.selected:
        log.warning("residual never crosses the noise estimate %g", delta)
        return EXIT_NO_CROSSING
    print(f"chosen alpha = {report.chosen_alpha:.6g} (delta = {delta:.6g})")
    return EXIT_OK


def cmd_deblur(args) -> int:
    if args.report:
        rep = json.loads(Path(args.report).read_text())
        if rep.get("chosen_alpha") is None:
            raise ParameterError(f"{args.report}: report has no chosen alpha")
        cfg = rep.get("config", {})
        args.alpha = rep["chosen_alpha"]
        reg = Regularizer.from_dict(rep["settings"]["regularizer"])
        args.reg = reg.kind
        args.input = args.input or cfg.get("input")
        if args.psf_file is None and args.psf_radius is None:
            args.psf_file = cfg.get("psf_file")
            args.psf_radius = cfg.get("psf_radius")
    else:
        reg = _regularizer(args)
    if args.alpha is None:
        raise ParameterError("--alpha (or --report) is required")
    m, input_info = _load_input(args)
    p, psf_info = _load_psf(args, m.shape[0])
    f, info = reg.solve(m, p, args.alpha)
    out = _out(args)
    save_npy(out / "deblurred.npy", f)
    save_image(out / "deblurred.png", f)
    meta = _provenance(args, input_info, psf_info)
    meta.update(alpha=args.alpha, regularizer=reg.to_dict(), solver=info)
    write_text(out / "deblur.json", _dump(meta))
    if args.plots:
        plotting.plot_images([("measurement", m), (f"{reg.kind}, alpha={args.alpha:.3g}", f)],
                             out / "deblurred_panel.png")
    return EXIT_OK


def cmd_metrics(args) -> int:
    if not (args.input and args.reference):
        raise ParameterError("metrics needs --input and --reference")
    a = load_image(args.input)
    b = load_image(args.reference)
    result = {"input": str(args.input), "reference": str(args.reference),
              "ssim": ssim(a, b), "psnr": psnr(a, b, peak=args.peak)}
    text = _dump(result)
    if args.out_dir:
        write_text(_out(args) / "metrics.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def _square(img):
    n = min(img.shape)
    r0 = (img.shape[0] - n) // 2
    c0 = (img.shape[1] - n) // 2
    return img[r0:r0 + n, c0:c0 + n]


def _corpus(args):
    items = []
    if args.input:
        root = Path(args.input)
        for path in sorted(root.iterdir()):
            if path.suffix.lower() in IMAGE_SUFFIXES:
                items.append((path.name, _square(load_image(path))))
    for k in range(args.phantoms):
        spec = random_scene(args.size, args.seed + k, count=args.shapes)
        items.append((f"phantom_{args.seed + k}", render_scene(spec)))
    if not items:
        raise ParameterError("hypothesis needs images: pass --input DIR and/or --phantoms N")
    return items


def cmd_hypothesis(args) -> int:
    items = _corpus(args)
    tikh = Regularizer("tikhonov")
    tv = Regularizer("tv", max_iters=args.tv_iters, tol=args.tv_tol)

    def row(item):
        name, img = item
        return (name, shift_similarity(img), shift_similarity(img, tikh, args.tikh_alpha),
                shift_similarity(img, tv, args.tv_alpha))

    rows = list(_ordered_map(row, items))
    table = {"raw": [r[1] for r in rows], "tikhonov": [r[2] for r in rows], "tv": [r[3] for r in rows]}
    summary = {k: {"mean": float(np.mean(v)), "std": float(np.std(v))} for k, v in table.items()}
    out = _out(args)
    lines = ["image,raw,tikhonov,tv"] + [f"{n},{a!r},{b!r},{c!r}" for n, a, b, c in rows]
    write_text(out / "hypothesis.csv", "\n".join(lines) + "\n")
    lines = ["variant,mean,std"] + [f"{k},{v['mean']!r},{v['std']!r}" for k, v in summary.items()]
    write_text(out / "hypothesis_summary.csv", "\n".join(lines) + "\n")
    write_text(out / "hypothesis.json", _dump({"version": __version__, "config": _config(args),
                                               "images": len(rows), "summary": summary}))
    if args.plots:
        plotting.plot_hypothesis([r[0] for r in rows], table, out / "hypothesis.png")
    for k, v in summary.items():
        print(f"{k:9s} mean {v['mean']:.4f}  std {v['std']:.4f}")
    return EXIT_OK


def _add_common(p, psf=True, reg=True, grid=True):
    p.add_argument("--input", help="input image (.png, .pgm or .npy) or directory")
    p.add_argument("--out-dir", default=".", help="output directory (default: current)")
    p.add_argument("--no-plots", dest="plots", action="store_false", help="skip figure rendering")
    if psf:
        p.add_argument("--psf-radius", "--radius", type=float, dest="psf_radius", help="disc PSF radius in pixels")
        p.add_argument("--psf-file", help="centred PSF kernel file")
    if reg:
        p.add_argument("--reg", choices=("tikhonov", "tv"), default="tikhonov")
        p.add_argument("--tv-iters", type=int, default=500, help="TV iteration cap")
        p.add_argument("--tv-tol", type=float, default=1e-6, help="TV relative-change tolerance")
    if grid:
        p.add_argument("--alpha-min", type=float)
        p.add_argument("--alpha-max", type=float)
        p.add_argument("--alpha-count", type=int, default=50)
        p.add_argument("--early-exit", action="store_true", help="stop the sweep once a value is chosen")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualgrid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="render the test scene and simulate a blurred noisy measurement")
    _add_common(p, reg=False, grid=False)
    p.set_defaults(psf_radius=4.0)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--noise", type=float, default=0.04, help="noise norm relative to the blurred image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene", help="scene description JSON (default: built-in scene)")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("select", help="dual-grid choice of alpha")
    _add_common(p)
    p.add_argument("--threshold", type=float, help="SSIM target (default 0.985 Tikhonov, 0.97 TV)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("discrepancy", help="discrepancy-principle choice of alpha")
    _add_common(p)
    p.add_argument("--patches", help="flat regions for noise estimation, 'x,y,w,h;...'")
    p.set_defaults(func=cmd_discrepancy)

    p = sub.add_parser("deblur", help="reconstruct at a fixed alpha")
    _add_common(p, grid=False)
    p.add_argument("--alpha", type=float)
    p.add_argument("--report", help="take alpha and solver settings from a selection report")
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("metrics", help="SSIM and PSNR between two images")
    _add_common(p, psf=False, reg=False, grid=False)
    p.set_defaults(out_dir=None)
    p.add_argument("--reference", help="reference image")
    p.add_argument("--peak", type=float, default=1.0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("hypothesis", help="shift similarity of raw and denoised images")
    _add_common(p, psf=False, reg=False, grid=False)
    p.add_argument("--phantoms", type=int, default=0, help="number of random phantom variants to add")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--shapes", type=int, default=200, help="shapes per phantom variant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tikh-alpha", type=float, default=DEFAULT_HYPOTHESIS_ALPHA["tikhonov"])
    p.add_argument("--tv-alpha", type=float, default=DEFAULT_HYPOTHESIS_ALPHA["tv"])
    p.add_argument("--tv-iters", type=int, default=500)
    p.add_argument("--tv-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_hypothesis)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (DualGridError, ValueError, OSError) as exc:
        print(f"dualgrid {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
