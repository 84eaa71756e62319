"""Micro-benchmark harness for the convolution pipeline.

Times each pipeline stage of forward + both backward passes, per backend and
batch size.  Methodology: at least 4 warmup repetitions (plans and caches are
built there), then at least 3 active repetitions; the reported figure is the
median over active reps with the interquartile range as spread.  Wall time
comes from the monotonic clock; fixture I/O and plan construction never land
inside a timed stage, so the stage list contains no "plan" entry.
"""

from __future__ import annotations

import math
import platform
from dataclasses import dataclass

import numpy as np

from .convengine import Backend, ConvParams, backward_input, backward_kernel, forward
from .fixture import read_fixture
from .flops import FlopLedger

__all__ = ["StageStat", "BenchRow", "BenchReport", "run_bench", "MIN_WARMUP", "MIN_ACTIVE"]

MIN_WARMUP = 4
MIN_ACTIVE = 3


@dataclass
class StageStat:
    stage: str
    median_ns: int
    iqr_ns: int
    mul: int
    add: int
    div: int
    sqrt: int
    trig: int
    transforms: int
    wraps: int


@dataclass
class BenchRow:
    backend: str
    batch: int
    in_channels: int
    out_channels: int
    image: int
    kernel: int
    padding: int
    fft_len: int
    stages: list[StageStat]
    total_median_ns: int

    def stage_named(self, name: str) -> StageStat:
        for s in self.stages:
            if s.stage == name:
                return s
        raise KeyError(name)


@dataclass
class BenchReport:
    rows: list[BenchRow]
    warmup: int
    active: int
    dtype: str
    seed: int
    environment: dict
    # rect total / phasor total per batch size, when both backends ran
    speedups: dict[int, float]

    def data_dict(self) -> dict:
        """Deterministic portion: geometry and operation counts, no timings."""
        return {
            "kind": "bench",
            "dtype": self.dtype,
            "seed": self.seed,
            "warmup": self.warmup,
            "active": self.active,
            "rows": [
                {
                    "backend": r.backend,
                    "batch": r.batch,
                    "in_channels": r.in_channels,
                    "out_channels": r.out_channels,
                    "image": r.image,
                    "kernel": r.kernel,
                    "padding": r.padding,
                    "fft_len": r.fft_len,
                    "stages": [
                        {
                            "stage": s.stage,
                            "mul": s.mul,
                            "add": s.add,
                            "div": s.div,
                            "sqrt": s.sqrt,
                            "trig": s.trig,
                            "transforms": s.transforms,
                            "wraps": s.wraps,
                        }
                        for s in r.stages
                    ],
                }
                for r in self.rows
            ],
        }

    def timing_dict(self) -> dict:
        return {
            "rows": [
                {
                    "backend": r.backend,
                    "batch": r.batch,
                    "total_median_ns": r.total_median_ns,
                    "stages": [
                        {
                            "stage": s.stage,
                            "median_ns": s.median_ns,
                            "iqr_ns": s.iqr_ns,
                        }
                        for s in r.stages
                    ],
                }
                for r in self.rows
            ],
            "speedup_rect_over_phasor": {str(k): v for k, v in self.speedups.items()},
        }


def _environment_stamp(dtype: str, threads: int) -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
        "scalar_type": dtype,
        "threads": threads,
        "build_profile": "pure-python",
    }


def _median_iqr(samples: list[int]) -> tuple[int, int]:
    arr = np.sort(np.asarray(samples, dtype=np.int64))
    med = float(np.median(arr))
    q1, q3 = np.percentile(arr, [25, 75])
    return int(med), int(q3 - q1)


def _one_backend(
    params: ConvParams, backend: Backend, x, w, grad, warmup: int, active: int
) -> tuple[list[StageStat], int]:
    ledgers: list[FlopLedger] = []
    for rep in range(warmup + active):
        led = FlopLedger()
        forward(x, w, params, backend, led)
        backward_input(grad, w, params, backend, led)
        backward_kernel(grad, x, params, backend, led)
        if rep >= warmup:
            ledgers.append(led)

    stage_names = sorted(ledgers[0].stages)
    stats = []
    for name in stage_names:
        times = [led.stage(name).time_ns for led in ledgers]
        med, iqr = _median_iqr(times)
        rec = ledgers[0].stage(name)
        stats.append(
            StageStat(
                stage=name,
                median_ns=med,
                iqr_ns=iqr,
                mul=rec.cost.mul,
                add=rec.cost.add,
                div=rec.cost.div,
                sqrt=rec.cost.sqrt,
                trig=rec.cost.trig,
                transforms=rec.transforms,
                wraps=rec.wraps,
            )
        )
    totals = [led.total_time_ns() for led in ledgers]
    total_med, _ = _median_iqr(totals)
    return stats, total_med


def run_bench(
    batches: list[int],
    in_channels: int,
    out_channels: int,
    image: int,
    kernel: int,
    padding: int = 0,
    backends: list[Backend] = (Backend.SPECTRAL_RECT, Backend.SPECTRAL_PHASOR),
    warmup: int = 4,
    active: int = 4,
    dtype: str = "float32",
    seed: int = 0,
    threads: int = 1,
    input_path=None,
) -> BenchReport:
    """Benchmark forward + backward for each (batch, backend) combination.

    ``input_path`` optionally loads the largest batch's input tensor from a
    fixture file (reproducible inputs); reading happens before any timing.
    """
    if warmup < MIN_WARMUP:
        raise ValueError(f"warmup repetitions must be >= {MIN_WARMUP}")
    if active < MIN_ACTIVE:
        raise ValueError(f"active repetitions must be >= {MIN_ACTIVE}")
    nptype = np.dtype(dtype)
    rng = np.random.default_rng(seed)
    max_b = max(batches)
    if input_path is not None:
        x_all = read_fixture(input_path).astype(nptype, copy=False)
        expected = (max_b, in_channels, image, image)
        if x_all.shape != expected:
            raise ValueError(
                f"fixture tensor shape {x_all.shape} does not match geometry {expected}"
            )
    else:
        x_all = rng.standard_normal((max_b, in_channels, image, image)).astype(nptype)
    w = rng.standard_normal((out_channels, in_channels, kernel, kernel)).astype(nptype)

    rows: list[BenchRow] = []
    totals: dict[tuple[int, str], int] = {}
    for b in batches:
        params = ConvParams(
            batch=b,
            in_channels=in_channels,
            out_channels=out_channels,
            image=image,
            kernel=kernel,
            padding=padding,
        )
        v = params.out_side
        x = np.ascontiguousarray(x_all[:b])
        grad = rng.standard_normal((b, out_channels, v, v)).astype(nptype)
        for backend in backends:
            stats, total_med = _one_backend(params, backend, x, w, grad, warmup, active)
            rows.append(
                BenchRow(
                    backend=backend.value,
                    batch=b,
                    in_channels=in_channels,
                    out_channels=out_channels,
                    image=image,
                    kernel=kernel,
                    padding=padding,
                    fft_len=params.plan.fft_len,
                    stages=stats,
                    total_median_ns=total_med,
                )
            )
            totals[(b, backend.value)] = total_med

    speedups: dict[int, float] = {}
    for b in batches:
        rect = totals.get((b, "rect"))
        phasor = totals.get((b, "phasor"))
        if rect is not None and phasor is not None and phasor > 0:
            speedups[b] = rect / phasor
    return BenchReport(
        rows=rows,
        warmup=warmup,
        active=active,
        dtype=dtype,
        seed=seed,
        environment=_environment_stamp(dtype, threads),
        speedups=speedups,
    )


def render_table(report: BenchReport) -> str:
    """Plain-text stage table plus one summary line per batch size."""
    lines = []
    header = (
        f"{'backend':>8} {'B':>4} {'stage':>20} {'median_ns':>12} {'iqr_ns':>10} "
        f"{'mul':>14} {'add':>14} {'sqrt':>12} {'trig':>12}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for row in report.rows:
        for s in row.stages:
            lines.append(
                f"{row.backend:>8} {row.batch:>4} {s.stage:>20} {s.median_ns:>12} "
                f"{s.iqr_ns:>10} {s.mul:>14} {s.add:>14} {s.sqrt:>12} {s.trig:>12}"
            )
        lines.append(
            f"{row.backend:>8} {row.batch:>4} {'TOTAL':>20} {row.total_median_ns:>12}"
        )
    for b, s in sorted(report.speedups.items()):
        if not math.isfinite(s):
            raise RuntimeError(f"non-finite speedup for batch {b}")
        lines.append(f"batch {b}: speedup rect/phasor = {s:.3f}x")
    return "\n".join(lines)


def render_csv(report: BenchReport) -> str:
    """Fixed column layout:
    backend,B,f1,f2,N,K,P,stage,median_ns,iqr_ns,mul,add,div,sqrt,trig
    """
    out = ["backend,B,f1,f2,N,K,P,stage,median_ns,iqr_ns,mul,add,div,sqrt,trig"]
    for row in report.rows:
        for s in row.stages:
            out.append(
                f"{row.backend},{row.batch},{row.in_channels},{row.out_channels},"
                f"{row.image},{row.kernel},{row.padding},{s.stage},{s.median_ns},"
                f"{s.iqr_ns},{s.mul},{s.add},{s.div},{s.sqrt},{s.trig}"
            )
    return "\n".join(out) + "\n"
