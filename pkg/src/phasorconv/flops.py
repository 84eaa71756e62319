"""Analytical cost models and the runtime operation ledger.

``FlopLedger`` is the measurement side: the engine charges real-arithmetic
counts (and wall time) per pipeline stage while it runs.  ``CostModel`` is the
prediction side: closed-form counts for the same stages.  ``reconcile`` lines
the two up; product and conversion stages must match to the integer, FFT
stages are compared against a coarse heuristic and only reported.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from .complexforms import (
    MUL_PHASOR_COST,
    MUL_RECT_COST,
    OpCost,
    RECT_REDUCE_COST,
    TO_PHASOR_COST,
    TO_RECTANGULAR_COST,
)

__all__ = [
    "STAGES",
    "StageRecord",
    "FlopLedger",
    "CostModel",
    "flops_baseline_paper",
    "flops_phasor_model",
    "predicted_stage_counts",
    "reconcile",
]

# Pipeline stages of a spectral convolution call, in execution order, plus the
# sliding-window stage used by the direct backend.
STAGES = (
    "crop_pad",
    "rfft_input",
    "rfft_kernel",
    "phasor_convert_in",
    "spectral_product",
    "phasor_convert_out",
    "channel_reduce",
    "irfft_output",
    "direct",
)


@dataclass
class StageRecord:
    """Counters for one pipeline stage: arithmetic, plane transforms,
    angle wraps, and accumulated wall time."""

    cost: OpCost = field(default_factory=OpCost)
    transforms: int = 0
    wraps: int = 0
    time_ns: int = 0

    def merge(self, other: "StageRecord") -> None:
        self.cost.accumulate(other.cost)
        self.transforms += other.transforms
        self.wraps += other.wraps
        self.time_ns += other.time_ns

    def as_dict(self) -> dict:
        d = self.cost.as_dict()
        d["transforms"] = self.transforms
        d["wraps"] = self.wraps
        return d


class FlopLedger:
    """Per-stage counters charged by a single engine call (single writer).

    Counts only ever increase; merging two ledgers sums them componentwise,
    which is associative and commutative, so parallel slices can keep private
    ledgers and merge at join points.
    """

    def __init__(self) -> None:
        self._stages: dict[str, StageRecord] = {}

    def stage(self, name: str) -> StageRecord:
        rec = self._stages.get(name)
        if rec is None:
            rec = self._stages[name] = StageRecord()
        return rec

    @property
    def stages(self) -> dict[str, StageRecord]:
        return self._stages

    def charge(self, stage: str, cost: OpCost, times: int = 1) -> None:
        if times < 0:
            raise ValueError("charge multiplier must be non-negative")
        self.stage(stage).cost.accumulate(cost, times)

    def count_transforms(self, stage: str, n: int) -> None:
        self.stage(stage).transforms += n

    def count_wraps(self, stage: str, n: int) -> None:
        self.stage(stage).wraps += n

    @contextmanager
    def timed(self, stage: str):
        start = time.perf_counter_ns()
        try:
            yield
        finally:
            self.stage(stage).time_ns += time.perf_counter_ns() - start

    def merged(self, other: "FlopLedger") -> "FlopLedger":
        out = FlopLedger()
        for src in (self, other):
            for name, rec in src._stages.items():
                out.stage(name).merge(rec)
        return out

    def total_cost(self) -> OpCost:
        total = OpCost()
        for rec in self._stages.values():
            total.accumulate(rec.cost)
        return total

    def total_time_ns(self) -> int:
        return sum(rec.time_ns for rec in self._stages.values())

    def as_dict(self) -> dict:
        return {
            name: self._stages[name].as_dict()
            for name in sorted(self._stages)
        }


VARIANT_PAPER_N = "paper-n"
VARIANT_IMPL_L = "impl-l"
FORM_RECT = "rect"
FORM_PHASOR = "phasor"

# Default hidden per-coefficient constant of the FFT cost term.  A knob for
# the analytical model only; never asserted against measurement.
DEFAULT_C_FFT = 2.5


@dataclass(frozen=True)
class CostModel:
    """Closed-form cost model for one convolution layer geometry.

    ``variant`` selects the spectral element count: ``paper-n`` uses N^2 (the
    transform-at-image-size convention), ``impl-l`` uses L*(L//2+1), the
    half-spectrum actually produced at the padded power-of-two length L.
    """

    b: int
    f1: int
    f2: int
    n: int
    k: int
    p: int = 0
    l: int = 0
    c_fft: float = DEFAULT_C_FFT
    variant: str = VARIANT_IMPL_L
    form: str = FORM_RECT

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("batch must be >= 0")
        for name in ("f1", "f2", "n", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.p < 0:
            raise ValueError("padding must be >= 0")
        if self.variant not in (VARIANT_PAPER_N, VARIANT_IMPL_L):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.form not in (FORM_RECT, FORM_PHASOR):
            raise ValueError(f"unknown form {self.form!r}")
        if self.l == 0:
            length = 1
            while length < self.n + 2 * self.p + self.k - 1:
                length *= 2
            object.__setattr__(self, "l", length)

    def element_count(self) -> int:
        if self.variant == VARIANT_PAPER_N:
            return self.n * self.n
        return self.l * (self.l // 2 + 1)


def flops_baseline_paper(model: CostModel) -> float:
    """Classic FFT-convolution multiply estimate at image size N.

    2*C*N^2*log2(N) per 2-D transform, times the number of transforms
    (B*f1 inputs + B*f2 outputs + f2*f1 kernels), plus 4*B*f2*f1*N^2 for the
    rectangular spectral products.
    """
    if model.variant != VARIANT_PAPER_N or model.form != FORM_RECT:
        raise ValueError("baseline estimate is defined for the paper-n/rect variant")
    n2 = float(model.n * model.n)
    fft_term = 2.0 * model.c_fft * n2 * math.log2(model.n) * (
        model.b * model.f1 + model.b * model.f2 + model.f2 * model.f1
    )
    product_term = 4.0 * model.b * model.f2 * model.f1 * n2
    return fft_term + product_term


def flops_phasor_model(model: CostModel) -> dict:
    """Stage-itemized counts for the phasor spectral product and its two
    conversion stages, next to the rectangular product they replace."""
    if model.form != FORM_PHASOR:
        raise ValueError("phasor model requires form='phasor'")
    e = model.element_count()
    pairs = model.b * model.f2 * model.f1 * e
    in_elems = (model.b * model.f1 + model.f2 * model.f1) * e
    return {
        "element_count": e,
        "product_pairs": pairs,
        "spectral_product": MUL_PHASOR_COST.scaled(pairs).as_dict(),
        "spectral_product_rect": MUL_RECT_COST.scaled(pairs).as_dict(),
        "phasor_convert_in": TO_PHASOR_COST.scaled(in_elems).as_dict(),
        "phasor_convert_out": TO_RECTANGULAR_COST.scaled(pairs).as_dict(),
        "multiply_reduction": 4.0,
        "muladd_reduction": 3.0,
    }


def _op_plane_counts(model: CostModel, op: str) -> tuple[int, int, int, int]:
    """(first-operand planes, second-operand planes, output planes, reduced
    axis length) for one of the three convolution operations."""
    b, f1, f2 = model.b, model.f1, model.f2
    if op == "forward":
        return b * f1, f2 * f1, b * f2, f1
    if op == "backward_input":
        return b * f2, f2 * f1, b * f1, f2
    if op == "backward_kernel":
        return b * f1, b * f2, f2 * f1, b
    raise ValueError(f"unknown operation {op!r}")


def predicted_stage_counts(model: CostModel, op: str = "forward") -> dict:
    """Exact per-stage counter predictions for one engine call at geometry
    ``model`` (impl-l element basis, matching what the engine executes)."""
    if model.variant != VARIANT_IMPL_L:
        raise ValueError("stage predictions use the impl-l element basis")
    e = model.l * (model.l // 2 + 1)
    first, second, out, reduced = _op_plane_counts(model, op)
    pairs = model.b * model.f2 * model.f1 * e
    reduce_adds = out * max(reduced - 1, 0) * e

    stages: dict[str, dict] = {}
    if model.form == FORM_PHASOR:
        stages["phasor_convert_in"] = TO_PHASOR_COST.scaled((first + second) * e).as_dict()
        stages["spectral_product"] = MUL_PHASOR_COST.scaled(pairs).as_dict()
        stages["phasor_convert_out"] = TO_RECTANGULAR_COST.scaled(pairs).as_dict()
    else:
        stages["spectral_product"] = MUL_RECT_COST.scaled(pairs).as_dict()
    stages["channel_reduce"] = RECT_REDUCE_COST.scaled(reduce_adds).as_dict()
    stages["_transforms"] = {
        "rfft_input": first,
        "rfft_kernel": second,
        "irfft_output": out,
    }
    return stages


def _fft_heuristic_flops(model: CostModel, transforms: int, inverse: bool) -> float:
    # 5*L*log2(L) combined mul+add per 1-D length-L transform; a forward
    # half-spectrum plane runs L row + (L//2+1) column transforms, an inverse
    # plane runs 2*L.
    l = model.l
    per_1d = 5.0 * l * math.log2(l) if l > 1 else 0.0
    lines = 2 * l if inverse else l + (l // 2 + 1)
    return transforms * lines * per_1d


def reconcile(ledger: FlopLedger, model: CostModel, op: str = "forward") -> list[dict]:
    """Compare a measured ledger against the closed-form predictions.

    Returns one row per (stage, counter): ``exact`` rows carry integer
    predictions that the measurement must equal; FFT rows carry the heuristic
    and are informational.  Raises ``ValueError`` if the ledger's transform
    counts reveal it came from a different geometry or operation.
    """
    predictions = predicted_stage_counts(model, op)
    transforms = predictions.pop("_transforms")
    for stage, expected in transforms.items():
        measured = ledger.stage(stage).transforms
        if measured != expected:
            raise ValueError(
                f"geometry mismatch: stage {stage} ran {measured} plane "
                f"transforms, model predicts {expected}"
            )

    rows: list[dict] = []
    for stage, counters in predictions.items():
        measured_cost = ledger.stage(stage).cost.as_dict()
        for counter, predicted in counters.items():
            measured = measured_cost[counter]
            rows.append(
                {
                    "stage": stage,
                    "counter": counter,
                    "predicted": predicted,
                    "measured": measured,
                    "exact": True,
                    "match": measured == predicted,
                }
            )
    for stage, inverse in (("rfft_input", False), ("rfft_kernel", False), ("irfft_output", True)):
        rec = ledger.stage(stage)
        heuristic = _fft_heuristic_flops(model, transforms[stage], inverse)
        measured = rec.cost.mul + rec.cost.add
        rows.append(
            {
                "stage": stage,
                "counter": "mul+add",
                "predicted": heuristic,
                "measured": measured,
                "exact": False,
                "match": measured == heuristic,
            }
        )
    return rows
