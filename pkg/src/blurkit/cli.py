"""Command-line interface.

One executable, one subcommand per pipeline stage.  Every run echoes its
resolved configuration to stderr for reproducibility.  ``--json`` switches
stdout to machine-readable JSON.  Relative output paths are resolved under
``$BLURKIT_OUTPUT_ROOT`` when that variable is set.

Exit codes: 0 success, 1 runtime failure, 2 usage or malformed input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset, evaluate, imaging, kernels

_USAGE_ERRORS = (kernels.KernelError, imaging.ImagingError, dataset.DatasetError,
                 evaluate.EvalError, FileNotFoundError, NotADirectoryError)


def _out_path(path: str) -> Path:
    root = os.environ.get("BLURKIT_OUTPUT_ROOT")
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"blurkit {args.command}: {json.dumps(resolved, default=str)}", file=sys.stderr)


def _emit(payload: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")


def _load_catalog_arg(args) -> kernels.KernelCatalog:
    if getattr(args, "catalog", None):
        return kernels.KernelCatalog.load_text(args.catalog)
    return kernels.build_catalog(args.r_min, args.r_max)


def cmd_catalog(args) -> int:
    catalog = kernels.build_catalog(args.r_min, args.r_max,
                                    include_identity=not args.no_identity)
    out = _out_path(args.out)
    catalog.save_text(out)
    summary = catalog.summary()
    summary["content_hash"] = catalog.content_hash()
    if args.summary:
        with open(_out_path(args.summary), "w", encoding="ascii") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    brief = {k: summary[k] for k in ("total_entries", "r_min", "r_max",
                                     "includes_identity", "examined_lines",
                                     "content_hash")}
    brief["out"] = str(out)
    _emit(brief if not args.json else summary, args.json)
    return 0


def cmd_kernel(args) -> int:
    kernel = kernels.realize_kernel(args.r, args.phi)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(kernel.to_text(), encoding="ascii")
    _emit({"r": kernel.length, "phi": kernel.angle, "height": kernel.height,
           "width": kernel.width, "out": str(out)}, args.json)
    return 0


def cmd_blur(args) -> int:
    image = imaging.load_image(args.image)
    kernel = kernels.realize_kernel(args.r, args.phi)
    blurred = imaging.convolve(image, kernel, boundary=args.boundary, method="fft")
    if args.sigma2 > 0:
        blurred = imaging.add_gaussian_noise(blurred, args.sigma2, args.seed)
    out = _out_path(args.out)
    imaging.save_image(out, blurred)
    _emit({"out": str(out), "r": args.r, "phi": args.phi, "sigma2": args.sigma2,
           "width": blurred.shape[1], "height": blurred.shape[0]}, args.json)
    return 0


def cmd_gen_dataset(args) -> int:
    catalog = _load_catalog_arg(args)
    manifest = dataset.generate_dataset(
        catalog, args.source_dir, _out_path(args.out_dir),
        min_per_length=args.min_per_length, sigma2=args.sigma2, seed=args.seed,
        workers=args.workers, no_blur_count=args.no_blur_count,
        strict=args.strict)
    manifest_path = _out_path(args.manifest)
    manifest.write(manifest_path)
    _emit({"records": len(manifest), "manifest": str(manifest_path),
           "out_dir": str(_out_path(args.out_dir)),
           "catalog_hash": manifest.catalog_hash}, args.json)
    return 0


def cmd_subset(args) -> int:
    manifest = dataset.Manifest.load(args.manifest)
    picked = dataset.subset(manifest, axis=args.axis, k=args.k, seed=args.seed)
    out = _out_path(args.out)
    picked.write(out)
    _emit({"records": len(picked), "axis": args.axis, "k": args.k,
           "manifest": str(out)}, args.json)
    return 0


def cmd_report_dist(args) -> int:
    manifest = dataset.Manifest.load(args.manifest)
    report = dataset.distribution_report(manifest)
    if args.out:
        with open(_out_path(args.out), "w", encoding="ascii") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.json:
        _emit(report, True)
    else:
        lengths = report["per_length"]
        angles = report["per_angle"]
        print(f"records: {report['total_records']}")
        print(f"lengths: {len(lengths)} (min count "
              f"{min(lengths.values())}, max {max(lengths.values())})")
        print(f"angles:  {len(angles)} (min count "
              f"{min(angles.values())}, max {max(angles.values())})")
        if args.out:
            print(f"report: {_out_path(args.out)}")
    return 0


def cmd_deblur(args) -> int:
    blurred = imaging.load_image(args.image)
    kernel = kernels.realize_kernel(args.r, args.phi)
    restored = evaluate.deblur(blurred, kernel, method=args.method, nsr=args.nsr,
                               iterations=args.iterations)
    out = _out_path(args.out)
    imaging.save_image(out, restored)
    _emit({"out": str(out), "method": args.method, "r": args.r, "phi": args.phi},
          args.json)
    return 0


def cmd_eval_error_ratio(args) -> int:
    manifest = dataset.Manifest.load(args.manifest)
    predictions = evaluate.read_predictions(args.pred)
    catalog = _load_catalog_arg(args)
    params = {"nsr": args.nsr} if args.method == "wiener" else {"iterations": args.iterations}
    report = evaluate.evaluate_predictions(
        manifest, predictions, catalog, args.source_dir, args.images_root,
        method=args.method, workers=args.workers, **params)
    payload = report.to_json_dict()
    if args.out:
        with open(_out_path(args.out), "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.ratios_csv:
        with open(_out_path(args.ratios_csv), "w", encoding="ascii", newline="") as fh:
            fh.write("sample_path,ratio,ssd_est,ssd_true\n")
            for r in report.ratios:
                fh.write(f"{r.sample_path},{r.ratio!r},{r.ssd_est!r},{r.ssd_true!r}\n")
    if args.json:
        _emit(payload, True)
    else:
        ratios = [r.ratio for r in report.ratios]
        print(f"r2_length: {report.r2_length}")
        print(f"r2_angle:  {report.r2_angle}")
        print(f"ratios: n={len(ratios)} median={float(np.median(ratios)):.4f} "
              f"max={max(ratios):.4f}")
        print(f"cumulative histogram at 1.0/2.0/3.0: "
              f"{report.cumulative_hist['counts'][0]}/"
              f"{report.cumulative_hist['counts'][4]}/"
              f"{report.cumulative_hist['counts'][8]}")
    return 0


def cmd_eval_r2(args) -> int:
    manifest = dataset.Manifest.load(args.manifest)
    predictions = evaluate.read_predictions(args.pred)
    r2_length, r2_angle = evaluate.r2_from_predictions(manifest, predictions)
    _emit({"r2_length": r2_length, "r2_angle": r2_angle}, args.json)
    return 0


def cmd_canonicalize(args) -> int:
    catalog = _load_catalog_arg(args)
    r, phi = kernels.canonicalize_prediction(args.r, args.phi, catalog)
    _emit({"r": r, "phi": phi}, args.json)
    return 0


def _add_catalog_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--catalog", help="catalog text file (else built from --r-min/--r-max)")
    parser.add_argument("--r-min", type=int, default=2)
    parser.add_argument("--r-max", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blurkit", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="enumerate unique blur kernels")
    p.add_argument("--r-min", type=int, default=2)
    p.add_argument("--r-max", type=int, default=100)
    p.add_argument("--out", required=True, help="catalog text file")
    p.add_argument("--summary", help="JSON summary file")
    p.add_argument("--no-identity", action="store_true")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("kernel", help="render one kernel as a float grid")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--phi", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("blur", help="blur an image with a kernel")
    p.add_argument("--image", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--phi", type=int, required=True)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boundary", choices=["reflect", "replicate", "zero"],
                   default="reflect")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("gen-dataset", help="generate a balanced blurred dataset")
    _add_catalog_source(p)
    p.add_argument("--source-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--min-per-length", type=int, default=175)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-blur-count", type=int, default=None)
    p.add_argument("--strict", action="store_true",
                   help="fail instead of reusing sources once the pool is exhausted")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("subset", help="sample k records per length or angle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--axis", choices=["length", "angle"], required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subset)

    p = sub.add_parser("report-dist", help="per-length/per-angle distribution report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="JSON report file")
    p.set_defaults(func=cmd_report_dist)

    p = sub.add_parser("deblur", help="non-blind deconvolution with a kernel")
    p.add_argument("--image", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--phi", type=int, required=True)
    p.add_argument("--method", choices=["wiener", "rl"], default="wiener")
    p.add_argument("--nsr", type=float, default=1e-4)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("eval-error-ratio", help="deconvolution error ratios for predictions")
    _add_catalog_source(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--source-dir", required=True)
    p.add_argument("--images-root", required=True)
    p.add_argument("--method", choices=["wiener", "rl"], default="wiener")
    p.add_argument("--nsr", type=float, default=1e-4)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="JSON report file")
    p.add_argument("--ratios-csv", help="optional CSV dump of per-image ratios")
    p.set_defaults(func=cmd_eval_error_ratio)

    p = sub.add_parser("eval-r2", help="R2 of predictions against manifest labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_eval_r2)

    p = sub.add_parser("canonicalize", help="snap a real (r, phi) prediction to its catalog label")
    _add_catalog_source(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--phi", type=float, required=True)
    p.set_defaults(func=cmd_canonicalize)

    for sp in sub.choices.values():
        sp.add_argument("--json", action="store_true", help="JSON output on stdout")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run 'blurkit {args.command} --help' for usage", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
