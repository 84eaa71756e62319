"""FFT-based 2-D convolution with rectangular and phasor spectral products."""

__version__ = "0.1.0"

from .complexforms import (
    CPhasor,
    CRect,
    OpCost,
    conj_phasor,
    conj_rect,
    mul_phasor,
    mul_rect,
    normalize_angle,
    to_phasor,
    to_rectangular,
)
from .convengine import (
    Backend,
    ConvParams,
    backward_input,
    backward_kernel,
    convert_spectrum_to_phasor,
    convert_spectrum_to_rect,
    direct_crosscorr,
    direct_fullconv,
    forward,
    reduce_rect_channels,
    spectral_product_phasor,
    spectral_product_rect,
)
from .errors import FixtureFormatError, UnsupportedGeometryError
from .fixture import read_fixture, write_fixture
from .flops import (
    CostModel,
    FlopLedger,
    flops_baseline_paper,
    flops_phasor_model,
    reconcile,
)
from .nn import TrainConfig, TrainTrace, loss_and_grads, make_dataset, sgd_step, train
from .spectral import (
    FftPlan,
    SpectrumPhasor,
    SpectrumRect,
    crop_valid,
    dft_1d_naive,
    fft_1d,
    irfft2,
    pad_embed,
    plan_fft,
    rfft2,
)

__all__ = [
    "__version__",
    "CRect", "CPhasor", "OpCost",
    "to_phasor", "to_rectangular", "mul_rect", "mul_phasor",
    "conj_rect", "conj_phasor", "normalize_angle",
    "FftPlan", "SpectrumRect", "SpectrumPhasor",
    "plan_fft", "dft_1d_naive", "fft_1d", "rfft2", "irfft2",
    "pad_embed", "crop_valid",
    "Backend", "ConvParams",
    "forward", "backward_input", "backward_kernel",
    "spectral_product_rect", "spectral_product_phasor",
    "convert_spectrum_to_phasor", "convert_spectrum_to_rect",
    "reduce_rect_channels", "direct_crosscorr", "direct_fullconv",
    "FlopLedger", "CostModel",
    "flops_baseline_paper", "flops_phasor_model", "reconcile",
    "TrainConfig", "TrainTrace", "train", "loss_and_grads", "sgd_step", "make_dataset",
    "read_fixture", "write_fixture",
    "UnsupportedGeometryError", "FixtureFormatError",
]
