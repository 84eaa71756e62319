"""Command-line front end.

Subcommands: ``verify`` (invariant suites), ``bench`` (per-stage timing),
``flops`` (analytical cost tables), ``train`` (the demo task).  Reports are
written as JSON with a ``meta`` block holding volatile fields (timestamp,
wall times, environment) and a ``data`` block that is byte-identical across
runs with the same seeds and flags.  Exit codes: 0 ok, 1 check failure,
2 usage or internal error.  ``PHASORCONV_THREADS`` provides the default
worker-count hint.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bench import MIN_ACTIVE, MIN_WARMUP, render_csv, render_table, run_bench
from .convengine import Backend
from .errors import UnsupportedGeometryError
from .flops import (
    CostModel,
    DEFAULT_C_FFT,
    FORM_PHASOR,
    VARIANT_IMPL_L,
    VARIANT_PAPER_N,
    flops_baseline_paper,
    flops_phasor_model,
)
from .nn import TrainConfig, train
from .verify import run_verify

_BACKENDS = {b.value: b for b in Backend}


def _meta(extra: dict | None = None) -> dict:
    meta = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "tool": "phasorconv",
        "version": __version__,
    }
    if extra:
        meta.update(extra)
    return meta


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_backend(name: str) -> Backend:
    if name not in _BACKENDS:
        raise argparse.ArgumentTypeError(
            f"unknown backend {name!r}; choose from direct, rect, phasor"
        )
    return _BACKENDS[name]


def _parse_backends(text: str) -> list[Backend]:
    if text == "all":
        return [Backend.DIRECT_SPATIAL, Backend.SPECTRAL_RECT, Backend.SPECTRAL_PHASOR]
    chosen = []
    for name in text.split(","):
        name = name.strip()
        if name not in _BACKENDS:
            raise argparse.ArgumentTypeError(
                f"unknown backend {name!r}; choose from direct, rect, phasor, all"
            )
        chosen.append(_BACKENDS[name])
    return chosen


def _parse_batches(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad batch list {text!r}") from exc
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("batch sizes must be non-negative integers")
    return values


def _add_geometry_flags(p: argparse.ArgumentParser, batch_list: bool) -> None:
    if batch_list:
        p.add_argument("--batch", type=_parse_batches, default=[32],
                       help="batch size, or comma list for a sweep (default 32)")
    else:
        p.add_argument("--batch", type=int, default=32, help="batch size (default 32)")
    p.add_argument("--in-ch", type=int, default=16, help="input channels f1 (default 16)")
    p.add_argument("--out-ch", type=int, default=16, help="output channels f2 (default 16)")
    p.add_argument("--image", type=int, default=32, help="image side N (default 32)")
    p.add_argument("--kernel", type=int, default=3, help="kernel side K (default 3)")
    p.add_argument("--pad", type=int, default=0, help="padding P (default 0)")


def cmd_verify(args) -> int:
    results, ok = run_verify(args.scale, args.seed, args.sabotage_conj)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        detail = f"  ({r.detail})" if r.detail else ""
        print(f"{status}  {r.name}: measured={r.measured:.3e} tol={r.tolerance:.3e}{detail}")
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    if args.json:
        payload = {
            "meta": _meta({"scale": args.scale}),
            "data": {
                "kind": "verify",
                "scale": args.scale,
                "seed": args.seed,
                "checks": [r.as_dict() for r in results],
                "passed": ok,
            },
        }
        _write_json(args.json, payload)
    return 0 if ok else 1


def cmd_bench(args) -> int:
    backends = args.backend
    try:
        report = run_bench(
            batches=args.batch,
            in_channels=args.in_ch,
            out_channels=args.out_ch,
            image=args.image,
            kernel=args.kernel,
            padding=args.pad,
            backends=backends,
            warmup=args.warmup,
            active=args.active,
            dtype=args.dtype,
            seed=args.seed,
            threads=args.threads,
            input_path=args.input,
        )
    except (UnsupportedGeometryError, ValueError) as exc:
        print(f"invalid geometry: {exc}", file=sys.stderr)
        return 2
    print(render_table(report))
    if args.json:
        payload = {
            "meta": _meta({"environment": report.environment}),
            "data": report.data_dict(),
            "timing": report.timing_dict(),
        }
        _write_json(args.json, payload)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(render_csv(report))
    return 0


def cmd_flops(args) -> int:
    variant = VARIANT_PAPER_N if args.variant == "paper-n" else VARIANT_IMPL_L
    base_model = CostModel(
        b=args.batch, f1=args.in_ch, f2=args.out_ch, n=args.image,
        k=args.kernel, p=args.pad, c_fft=args.c_fft, variant=VARIANT_PAPER_N,
    )
    baseline = flops_baseline_paper(base_model)
    phasor_model = CostModel(
        b=args.batch, f1=args.in_ch, f2=args.out_ch, n=args.image,
        k=args.kernel, p=args.pad, c_fft=args.c_fft, variant=variant,
        form=FORM_PHASOR,
    )
    itemized = flops_phasor_model(phasor_model)

    print(f"geometry: B={args.batch} f1={args.in_ch} f2={args.out_ch} "
          f"N={args.image} K={args.kernel} P={args.pad} L={phasor_model.l}")
    print(f"element basis: {variant} -> {itemized['element_count']} spectral elements")
    print(f"baseline multiply estimate (C={args.c_fft}): {baseline:,.0f}")
    rect = itemized["spectral_product_rect"]
    ph = itemized["spectral_product"]
    print(f"product stage, rect form:   {rect['mul']:,} mul + {rect['add']:,} add")
    print(f"product stage, phasor form: {ph['mul']:,} mul + {ph['add']:,} add")
    cin = itemized["phasor_convert_in"]
    cout = itemized["phasor_convert_out"]
    print(f"conversion in:  {cin['mul']:,} mul + {cin['add']:,} add + "
          f"{cin['sqrt']:,} sqrt + {cin['trig']:,} trig")
    print(f"conversion out: {cout['mul']:,} mul + {cout['trig']:,} trig")
    print(f"reduction factor: {itemized['multiply_reduction']:.2f}x (multiplies), "
          f"{itemized['muladd_reduction']:.2f}x (mul+add)")
    if args.json:
        payload = {
            "meta": _meta(),
            "data": {
                "kind": "flops",
                "geometry": {
                    "batch": args.batch, "in_channels": args.in_ch,
                    "out_channels": args.out_ch, "image": args.image,
                    "kernel": args.kernel, "padding": args.pad,
                    "fft_len": phasor_model.l,
                },
                "variant": variant,
                "c_fft": args.c_fft,
                "baseline_flops": baseline,
                "phasor": itemized,
            },
        }
        _write_json(args.json, payload)
    return 0


def cmd_train(args) -> int:
    backends = args.compare if args.compare else [args.backend]
    traces = {}
    for backend in backends:
        cfg = TrainConfig(
            backend=backend, steps=args.steps, lr=args.lr,
            seed=args.seed, dtype=args.dtype,
        )
        traces[backend] = train(cfg)
    for backend, trace in traces.items():
        print(
            f"{backend.value}: first loss {trace.losses[0]:.6f}, "
            f"last loss {trace.losses[-1]:.6f}, "
            f"holdout accuracy {trace.final_accuracy:.3f}"
        )
    if args.compare:
        rect = np.asarray(traces[args.compare[0]].losses)
        other = np.asarray(traces[args.compare[1]].losses)
        gap = float(np.max(np.abs(rect - other) / np.abs(rect))) if rect.size else 0.0
        t_first = max(sum(traces[args.compare[0]].step_time_ns), 1)
        t_second = max(sum(traces[args.compare[1]].step_time_ns), 1)
        print(f"max per-step relative loss gap: {gap:.3e}")
        print(f"total-time ratio {args.compare[0].value}/{args.compare[1].value}: "
              f"{t_first / t_second:.3f}")
    if args.out:
        first = backends[0]
        payload = {
            "meta": _meta({
                "step_time_ns": traces[first].step_time_ns,
                "total_time_ns": sum(traces[first].step_time_ns),
            }),
            "data": traces[first].data_dict(),
        }
        if args.compare:
            payload["data"]["compare"] = {
                b.value: traces[b].data_dict() for b in backends
            }
        _write_json(args.out, payload)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasorconv",
        description="FFT-based 2-D convolution engine with rectangular and "
                    "phasor spectral-product backends",
    )
    default_threads = int(os.environ.get("PHASORCONV_THREADS", "1"))
    parser.add_argument("--threads", type=int, default=default_threads,
                        help="worker-count hint forwarded to the engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the cross-module invariant suites")
    p_verify.add_argument("--scale", choices=["small", "full-desk"], default="small")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--json", metavar="PATH", help="write a JSON report")
    p_verify.add_argument("--sabotage-conj", action="store_true",
                          help=argparse.SUPPRESS)  # fault injection for the suite itself
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="micro-benchmark the conv pipeline stages")
    _add_geometry_flags(p_bench, batch_list=True)
    p_bench.add_argument("--backend", type=_parse_backends, default=[
        Backend.SPECTRAL_RECT, Backend.SPECTRAL_PHASOR,
    ], help="direct|rect|phasor|all or a comma list (default rect,phasor)")
    p_bench.add_argument("--warmup", type=int, default=4,
                         help=f"warmup repetitions, min {MIN_WARMUP} (default 4)")
    p_bench.add_argument("--active", type=int, default=4,
                         help=f"timed repetitions, min {MIN_ACTIVE} (default 4)")
    p_bench.add_argument("--dtype", choices=["float32", "float64"], default="float32")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--input", metavar="PATH",
                         help="load the input tensor from a .phct fixture")
    p_bench.add_argument("--json", metavar="PATH")
    p_bench.add_argument("--csv", metavar="PATH")
    p_bench.set_defaults(func=cmd_bench)

    p_flops = sub.add_parser("flops", help="analytical cost tables")
    _add_geometry_flags(p_flops, batch_list=False)
    p_flops.add_argument("--variant", choices=["paper-n", "impl-l"], default="impl-l",
                         help="spectral element basis: N^2 or L*(L/2+1)")
    p_flops.add_argument("--c-fft", type=float, default=DEFAULT_C_FFT,
                         help=f"FFT hidden-cost constant (default {DEFAULT_C_FFT})")
    p_flops.add_argument("--json", metavar="PATH")
    p_flops.set_defaults(func=cmd_flops)

    p_train = sub.add_parser("train", help="train the synthetic demo task")
    p_train.add_argument("--backend", type=_parse_backend,
                         default=Backend.SPECTRAL_RECT,
                         metavar="direct|rect|phasor")
    p_train.add_argument("--steps", type=int, default=300)
    p_train.add_argument("--lr", type=float, default=0.05)
    p_train.add_argument("--seed", type=int, default=7)
    p_train.add_argument("--dtype", choices=["float32", "float64"], default="float64")
    p_train.add_argument("--out", metavar="PATH", help="write the trace JSON here")
    p_train.add_argument("--compare", type=_parse_backends, default=None,
                         metavar="A,B", help="run two backends and report the loss gap")
    p_train.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench":
        if args.warmup < MIN_WARMUP:
            parser.error(f"--warmup must be >= {MIN_WARMUP}")
        if args.active < MIN_ACTIVE:
            parser.error(f"--active must be >= {MIN_ACTIVE}")
    if args.command == "train" and args.compare is not None and len(args.compare) != 2:
        parser.error("--compare takes exactly two backends, e.g. rect,phasor")
    try:
        return args.func(args)
    except (OSError, UnsupportedGeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
