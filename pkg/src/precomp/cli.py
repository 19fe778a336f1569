"""Command-line interface.

Subcommands:
  run       method x quality sweep against a degradation, with reports
  simulate  hold-type display simulation for a video and motion
  encode    single-shot builtin compression of a signal file
  decode    standalone decode of a builtin bitstream
  curves    BD-PSNR between two rate-distortion CSV files
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import admm, codec, experiment, io, metrics


def _parse_degradation(value: str) -> dict:
    value = value.strip()
    if value.startswith("{"):
        return json.loads(value)
    return json.loads(Path(value).read_text())


def _parse_int_list(value: str) -> tuple:
    return tuple(int(tok) for tok in value.replace(",", " ").split())


def _parse_motion(value: str) -> tuple:
    parts = value.replace(",", " ").split()
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("motion must be 'dx,dy'")
    return (float(parts[0]), float(parts[1]))


def _add_run_parser(sub):
    p = sub.add_parser("run", help="rate-distortion sweep over methods")
    p.add_argument("--input", action="append", required=True,
                   help="signal file (.pgm/.y4m/.f64); repeatable")
    p.add_argument("--degradation", required=True,
                   help="operator spec: inline JSON or a JSON file path")
    p.add_argument("--theta-list", type=_parse_int_list, default=None,
                   help="comma-separated quality values (default: full sweep)")
    p.add_argument("--methods", default="regular,proposed",
                   help="comma-separated subset of regular,pinv,proposed")
    p.add_argument("--backend", choices=("builtin", "external"), default="builtin")
    p.add_argument("--codec-cmd", default=None,
                   help="external command template with {input} {bitstream} "
                        "{output} {qp}")
    p.add_argument("--block-size", type=int, default=8)
    p.add_argument("--beta", default="auto",
                   help="coupling weight, or 'auto' for the QP schedule")
    p.add_argument("--mode", choices=("psnr", "smooth"), default="psnr")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--conv-tol", type=float, default=None)
    p.add_argument("--div-tol", type=float, default=None)
    p.add_argument("--solve-method", choices=("auto", "fft", "cg"), default="auto")
    p.add_argument("--margin", type=int, default=experiment.PSNR_MARGIN,
                   help="border pixels excluded from PSNR")
    p.add_argument("--pinv-eps", type=float, default=1e-3)
    p.add_argument("--out-dir", required=True)
    return p


def _cmd_run(args) -> int:
    beta = args.beta if args.beta == "auto" else float(args.beta)
    config = admm.AdmmConfig(
        beta=beta, max_iters=args.max_iters, conv_tol=args.conv_tol,
        div_tol=args.div_tol, mode=args.mode, solve_method=args.solve_method,
    )
    spec = experiment.ExperimentSpec(
        inputs=tuple(args.input),
        degradation=_parse_degradation(args.degradation),
        theta_list=args.theta_list,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        backend=args.backend,
        command=args.codec_cmd,
        block_size=args.block_size,
        admm_config=config,
        margin=args.margin,
        pinv_eps=args.pinv_eps,
        out_dir=args.out_dir,
    )
    bundle = experiment.run_experiment(spec)
    for cell in bundle["cells"]:
        line = f"{cell.method} theta={cell.theta}: "
        if cell.error:
            line += f"FAILED ({cell.error})"
        else:
            bpp = cell.bits / bundle["total_samples"]
            line += f"{bpp:.4f} bpp, {cell.psnr_db:.2f} dB"
            if cell.ssim is not None:
                line += f", ssim {cell.ssim:.4f}"
        print(line)
    for pair, entry in bundle["bd_psnr"].items():
        parts = ", ".join(
            f"{k}: {v:+.3f} dB" for k, v in entry.items()
            if v is not None and not k.endswith("_error")
        )
        print(f"BD-PSNR {pair}: {parts or 'not computable'}")
    print(f"report written to {args.out_dir}")
    return 2 if bundle["all_failed"] else 0


def _cmd_simulate(args) -> int:
    video = io.read_signal(args.input)
    if args.motion is not None:
        degradation = {"type": "motion", "motion": list(args.motion)}
    else:
        degradation = _parse_degradation(args.degradation)
    operator = experiment.build_operator(degradation, video)
    sim = experiment.simulate_display(video, operator, window=args.window)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".y4m" if video.geometry.frames > 1 else ".pgm"
    for name, signal in (("displayed", sim.displayed),
                         ("perceived", sim.perceived),
                         ("difference", sim.difference)):
        io.write_signal(signal, out_dir / f"{name}{suffix}")
    print(f"simulation written to {out_dir} (difference window "
          f"+/-{sim.window:g}/255)")
    return 0


def _cmd_encode(args) -> int:
    signal = io.read_signal(args.input)
    params = codec.CodecParams(theta=args.theta, block_size=args.block_size)
    stream = codec.builtin_encode(signal, params)
    Path(args.output).write_bytes(stream.payload)
    n = signal.geometry.total_samples
    print(f"{stream.bit_count} bits ({stream.bit_count / n:.4f} bpp) "
          f"-> {args.output}")
    return 0


def _cmd_decode(args) -> int:
    payload = Path(args.input).read_bytes()
    signal = codec.builtin_decode(payload)
    io.write_signal(signal, args.output)
    g = signal.geometry
    print(f"decoded {g.width}x{g.height}x{g.frames} -> {args.output}")
    return 0


def _read_curve_csv(path: str, method: str | None) -> metrics.RdCurve:
    points = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if method and row.get("method") and row["method"] != method:
                continue
            ssim_val = row.get("ssim") or None
            points.append(metrics.RdPoint(
                bpp=float(row["bpp"]),
                psnr_db=float(row["psnr_db"]),
                ssim=float(ssim_val) if ssim_val not in (None, "", "inf") else None,
            ))
    label = method or Path(path).stem
    return metrics.RdCurve(label=label, points=tuple(points))


def _cmd_curves(args) -> int:
    curve_a = _read_curve_csv(args.curve_a, args.method_a)
    curve_b = _read_curve_csv(args.curve_b, args.method_b)
    result = {}
    subsets = ("all", "high_rate") if args.subset == "both" else (args.subset,)
    for subset in subsets:
        try:
            result[subset] = metrics.bd_psnr(curve_a, curve_b, subset)
        except ValueError as e:
            result[subset] = None
            result[f"{subset}_error"] = str(e)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0 if all(not k.endswith("_error") for k in result) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="precomp",
        description="Pre-compensating compression for known "
                    "post-decompression linear degradations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_parser(sub)

    p = sub.add_parser("simulate", help="hold-type display blur simulation")
    p.add_argument("--input", required=True)
    p.add_argument("--motion", type=_parse_motion, default=None,
                   help="global motion 'dx,dy' in pixels/frame")
    p.add_argument("--degradation", default=None,
                   help="operator spec JSON (alternative to --motion)")
    p.add_argument("--window", type=float, default=50.0,
                   help="difference visualization saturates at +/- this "
                        "many 8-bit counts")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("encode", help="compress one signal file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--theta", type=int, required=True)
    p.add_argument("--block-size", type=int, default=8)

    p = sub.add_parser("decode", help="decode a bitstream file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("curves", help="BD-PSNR between two curve CSVs")
    p.add_argument("--curve-a", required=True)
    p.add_argument("--curve-b", required=True)
    p.add_argument("--method-a", default=None,
                   help="method column filter for curve A")
    p.add_argument("--method-b", default=None)
    p.add_argument("--subset", choices=("all", "high_rate", "both"),
                   default="both")

    args = parser.parse_args(argv)
    if args.command == "simulate" and args.motion is None and args.degradation is None:
        parser.error("simulate needs --motion or --degradation")
    handlers = {
        "run": _cmd_run,
        "simulate": _cmd_simulate,
        "encode": _cmd_encode,
        "decode": _cmd_decode,
        "curves": _cmd_curves,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
