"""The three convolution operations of a conv layer over three backends.

``forward`` is a channel-summed cross-correlation, ``backward_input`` a
channel-transposed full convolution of the output gradient, and
``backward_kernel`` a batch-summed cross-correlation of input against output
gradient.  Each runs on one of:

* ``Backend.DIRECT_SPATIAL`` — sliding-window arithmetic, the oracle;
* ``Backend.SPECTRAL_RECT``  — transform, multiply re/im planes elementwise,
  reduce, transform back;
* ``Backend.SPECTRAL_PHASOR`` — like rect, but the elementwise product runs in
  polar form (1 multiply + 1 angle add per element instead of 4 and 2), at the
  price of converting spectra in and products back out, since sums need the
  rectangular form.

Spectral pipeline per call: embed/pad -> forward transforms (kernel spectra
computed once and reused across the batch) -> [polar conversion] -> elementwise
product -> [rectangular conversion] -> channel reduction -> inverse transform
-> crop.  Every stage charges exact real-op counts and wall time to a
caller-owned ``FlopLedger``.

Cross-correlation is realized in the spectral domain by conjugating the second
operand's spectrum (for real signals, the spectrum of the flipped kernel is the
conjugate of the kernel spectrum); true convolution omits the conjugation.
``forward`` and ``backward_kernel`` conjugate, ``backward_input`` does not —
the unique combination under which all three match their spatial definitions.
"""

from __future__ import annotations

import enum
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .complexforms import (
    MUL_PHASOR_COST,
    MUL_RECT_COST,
    OpCost,
    RECT_REDUCE_COST,
    TO_PHASOR_COST,
    TO_RECTANGULAR_COST,
)
from .errors import UnsupportedGeometryError
from .flops import FlopLedger
from .spectral import (
    FftPlan,
    SpectrumPhasor,
    SpectrumRect,
    crop_region,
    embed_origin,
    irfft2,
    pad_embed,
    plan_fft,
    rfft2,
)

__all__ = [
    "Backend",
    "ConvParams",
    "forward",
    "backward_input",
    "backward_kernel",
    "spectral_product_rect",
    "spectral_product_phasor",
    "convert_spectrum_to_phasor",
    "convert_spectrum_to_rect",
    "reduce_rect_channels",
    "direct_crosscorr",
    "direct_fullconv",
]


class Backend(enum.Enum):
    DIRECT_SPATIAL = "direct"
    SPECTRAL_RECT = "rect"
    SPECTRAL_PHASOR = "phasor"


@dataclass(frozen=True, eq=False)
class ConvParams:
    """Validated conv-layer geometry.  Only stride=dilation=groups=1 square
    layers are supported; anything else raises ``UnsupportedGeometryError`` so
    callers can fall back to a generic implementation."""

    batch: int
    in_channels: int
    out_channels: int
    image: int
    kernel: int
    padding: int = 0
    stride: int = 1
    dilation: int = 1
    groups: int = 1
    plan: FftPlan | None = None

    def __post_init__(self):
        if self.stride != 1 or self.dilation != 1 or self.groups != 1:
            raise UnsupportedGeometryError(
                "only stride=1, dilation=1, groups=1 convolutions are supported"
            )
        if self.kernel > self.image:
            raise UnsupportedGeometryError(
                f"kernel side {self.kernel} exceeds image side {self.image}"
            )
        if self.batch < 0:
            raise ValueError("batch must be >= 0")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.kernel < 1:
            raise ValueError("kernel side must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")
        if self.plan is None:
            object.__setattr__(
                self, "plan", plan_fft(self.image, self.kernel, self.padding)
            )

    @property
    def out_side(self) -> int:
        return self.image + 2 * self.padding - self.kernel + 1


# Upper bound on elements of one broadcast product plane; keeps peak memory of
# the chunked product loop around a few hundred MB in float64.
_CHUNK_ELEMS = 1 << 23

# Test hook: flipping this inverts every spectral conjugation choice, which
# must break equivalence with the spatial oracle (exercised by verify's
# sabotage mode).
_SABOTAGE_CONJ = False


@contextmanager
def _sabotage_conjugation():
    global _SABOTAGE_CONJ
    _SABOTAGE_CONJ = True
    try:
        yield
    finally:
        _SABOTAGE_CONJ = False


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _check_tensor(t: np.ndarray, name: str, shape: tuple) -> None:
    _require(t.ndim == 4, f"{name} must be rank-4, got shape {t.shape}")
    _require(
        t.shape == shape, f"{name} shape {t.shape} does not match expected {shape}"
    )
    if not np.isfinite(t).all():
        raise ValueError(f"{name} contains non-finite values")


# ---------------------------------------------------------------------------
# Spectral slab operations
# ---------------------------------------------------------------------------


def _check_slab_pair(a_shape: tuple, b_shape: tuple) -> None:
    _require(len(a_shape) == 4 and len(b_shape) == 4, "expected 4-D spectrum slabs")
    _require(
        a_shape[1:] == b_shape[1:],
        f"slab shapes {a_shape} and {b_shape} differ beyond the leading axis",
    )


def spectral_product_rect(
    x: SpectrumRect,
    w: SpectrumRect,
    conj_w: bool = False,
    ledger: FlopLedger | None = None,
) -> SpectrumRect:
    """Elementwise rectangular product, reduced over the shared channel axis.

    ``x`` has shape (batch, f1, H, Wc) and ``w`` (f2, f1, H, Wc); the result is
    (batch, f2, H, Wc) with sum over f1.  Each element pair costs 4 real
    multiplies + 2 adds ("spectral_product"); each accumulated term costs 2
    adds ("channel_reduce").  ``conj_w`` negates w's imaginary part, folded
    into the signs so no extra pass runs.
    """
    led = ledger if ledger is not None else FlopLedger()
    _check_slab_pair(x.shape, w.shape)
    a, r, h, wc = x.shape
    q = w.shape[0]
    with led.timed("spectral_product"):
        xr = x.re[:, None]
        xi = x.im[:, None]
        wr = w.re[None]
        wi = w.im[None]
        re = np.empty((a, q, r, h, wc), dtype=x.re.dtype)
        im = np.empty_like(re)
        tmp = np.empty_like(re)
        np.multiply(xr, wr, out=re)
        np.multiply(xi, wi, out=tmp)
        if conj_w:
            re += tmp
        else:
            re -= tmp
        np.multiply(xi, wr, out=im)
        np.multiply(xr, wi, out=tmp)
        if conj_w:
            im -= tmp
        else:
            im += tmp
    led.charge("spectral_product", MUL_RECT_COST, a * q * r * h * wc)
    return reduce_rect_channels(SpectrumRect(re, im), led)


def spectral_product_phasor(
    x: SpectrumPhasor,
    w: SpectrumPhasor,
    conj_w: bool = False,
    ledger: FlopLedger | None = None,
) -> SpectrumPhasor:
    """Elementwise polar product: magnitudes multiply, angles add (subtract
    under ``conj_w``), 1 multiply + 1 add per element pair.

    The channel sum cannot run in polar form, so the result keeps the full
    (batch, f2, f1, H, Wc) shape; convert to rectangular and reduce afterwards.
    The wrap back into (-pi, pi] and the canonical-zero fixup are bookkeeping,
    tracked by the wrap counter rather than the arithmetic ledger.
    """
    led = ledger if ledger is not None else FlopLedger()
    _check_slab_pair(x.shape, w.shape)
    a, r, h, wc = x.shape
    q = w.shape[0]
    n = a * q * r * h * wc
    with led.timed("spectral_product"):
        mag = x.mag[:, None] * w.mag[None]
        if conj_w:
            ang = x.ang[:, None] - w.ang[None]
        else:
            ang = x.ang[:, None] + w.ang[None]
        pi_t = ang.dtype.type(np.pi)
        two_pi = ang.dtype.type(2 * np.pi)
        np.subtract(ang, two_pi, out=ang, where=ang > pi_t)
        np.add(ang, two_pi, out=ang, where=ang <= -pi_t)
        np.copyto(ang, ang.dtype.type(0), where=mag == 0)
    led.charge("spectral_product", MUL_PHASOR_COST, n)
    led.count_wraps("spectral_product", n)
    return SpectrumPhasor(mag, ang)


def convert_spectrum_to_phasor(
    x: SpectrumRect, ledger: FlopLedger | None = None
) -> SpectrumPhasor:
    """Elementwise rect -> polar conversion (pipeline step 2); charges
    2 mul + 1 add + 1 sqrt + 1 trig per element to "phasor_convert_in"."""
    led = ledger if ledger is not None else FlopLedger()
    with led.timed("phasor_convert_in"):
        mag = np.hypot(x.re, x.im)
        ang = np.arctan2(x.im, x.re)
        pi_t = ang.dtype.type(np.pi)
        # arctan2 returns [-pi, pi]; fold the closed lower edge onto +pi and
        # pin the angle of exact zeros.
        np.copyto(ang, pi_t, where=ang <= -pi_t)
        np.copyto(ang, ang.dtype.type(0), where=mag == 0)
    led.charge("phasor_convert_in", TO_PHASOR_COST, mag.size)
    return SpectrumPhasor(mag, ang)


def convert_spectrum_to_rect(
    x: SpectrumPhasor, ledger: FlopLedger | None = None
) -> SpectrumRect:
    """Elementwise polar -> rect conversion (pipeline step 4); charges
    2 mul + 2 trig per element to "phasor_convert_out"."""
    led = ledger if ledger is not None else FlopLedger()
    with led.timed("phasor_convert_out"):
        re = x.mag * np.cos(x.ang)
        im = x.mag * np.sin(x.ang)
    led.charge("phasor_convert_out", TO_RECTANGULAR_COST, re.size)
    return SpectrumRect(re, im)


def reduce_rect_channels(
    x: SpectrumRect, ledger: FlopLedger | None = None
) -> SpectrumRect:
    """Sum a (A, Q, R, H, Wc) rectangular spectrum over its R axis; charges
    2 real adds per accumulated term to "channel_reduce"."""
    led = ledger if ledger is not None else FlopLedger()
    _require(x.re.ndim == 5, f"expected a 5-D product slab, got shape {x.shape}")
    a, q, r, h, wc = x.shape
    with led.timed("channel_reduce"):
        re = x.re.sum(axis=2)
        im = x.im.sum(axis=2)
    led.charge("channel_reduce", RECT_REDUCE_COST, a * q * max(r - 1, 0) * h * wc)
    return SpectrumRect(re, im)


def _combine_spectra(
    first: SpectrumRect,
    second: SpectrumRect,
    conj_second: bool,
    backend: Backend,
    led: FlopLedger,
) -> SpectrumRect:
    """Product-and-reduce of two spectrum stacks, chunked over the leading
    axis of ``first`` to bound peak memory.  first: (A, R, H, Wc), second:
    (Q, R, H, Wc) -> (A, Q, H, Wc) summed over R."""
    a, r, h, wc = first.shape
    q = second.shape[0]
    out_re = np.empty((a, q, h, wc), dtype=first.re.dtype)
    out_im = np.empty_like(out_re)
    chunk = max(1, _CHUNK_ELEMS // max(1, q * r * h * wc))

    if backend is Backend.SPECTRAL_PHASOR:
        first_p = convert_spectrum_to_phasor(first, led)
        second_p = convert_spectrum_to_phasor(second, led)
        for lo in range(0, a, chunk):
            sl = slice(lo, min(lo + chunk, a))
            prod = spectral_product_phasor(first_p[sl], second_p, conj_second, led)
            rect = convert_spectrum_to_rect(prod, led)
            reduced = reduce_rect_channels(rect, led)
            out_re[sl] = reduced.re
            out_im[sl] = reduced.im
    else:
        for lo in range(0, a, chunk):
            sl = slice(lo, min(lo + chunk, a))
            reduced = spectral_product_rect(first[sl], second, conj_second, led)
            out_re[sl] = reduced.re
            out_im[sl] = reduced.im
    return SpectrumRect(out_re, out_im)


# ---------------------------------------------------------------------------
# Direct spatial backend (sliding windows, no transforms)
# ---------------------------------------------------------------------------


def _windows(planes: np.ndarray, side: int) -> np.ndarray:
    # (..., H, W) -> (..., H-side+1, W-side+1, side, side)
    return np.lib.stride_tricks.sliding_window_view(planes, (side, side), axis=(-2, -1))


def direct_crosscorr(plane, kernel, padding: int = 0) -> np.ndarray:
    """Valid sliding-window cross-correlation of one zero-padded plane with
    one kernel plane: out[i, j] = sum_{u,v} x[i+u, j+v] * k[u, v]."""
    plane = np.asarray(plane)
    kernel = np.asarray(kernel)
    _require(plane.ndim == 2 and kernel.ndim == 2, "expected 2-D planes")
    _require(kernel.shape[0] == kernel.shape[1], "expected a square kernel")
    k = kernel.shape[0]
    padded = np.pad(plane, padding)
    if k > padded.shape[0] or k > padded.shape[1]:
        raise ValueError("kernel larger than the padded image")
    wins = _windows(padded, k)
    return np.einsum("ijuv,uv->ij", wins, kernel)


def direct_fullconv(plane, kernel) -> np.ndarray:
    """Full (maximally padded) true convolution: flip the kernel in both axes
    and cross-correlate with K-1 zero padding on every side."""
    kernel = np.asarray(kernel)
    return direct_crosscorr(plane, kernel[::-1, ::-1], padding=kernel.shape[0] - 1)


def _charge_direct(led: FlopLedger, out_elems: int, terms: int) -> None:
    led.charge("direct", OpCost(mul=terms, add=max(terms - 1, 0)), out_elems)


def _direct_forward(x, w, params: ConvParams, led: FlopLedger) -> np.ndarray:
    with led.timed("direct"):
        xp = np.pad(x, ((0, 0), (0, 0), (params.padding,) * 2, (params.padding,) * 2))
        wins = _windows(xp, params.kernel)  # (B, f1, V, V, K, K)
        y = np.einsum("biuvkl,oikl->bouv", wins, w, optimize=True)
    v = params.out_side
    _charge_direct(
        led,
        params.batch * params.out_channels * v * v,
        params.in_channels * params.kernel * params.kernel,
    )
    return y


def _direct_backward_input(grad_y, w, params: ConvParams, led: FlopLedger) -> np.ndarray:
    k, p, n = params.kernel, params.padding, params.image
    with led.timed("direct"):
        gp = np.pad(grad_y, ((0, 0), (0, 0), (k - 1,) * 2, (k - 1,) * 2))
        wins = _windows(gp, k)  # (B, f2, N+2P, N+2P, K, K)
        flipped = w[:, :, ::-1, ::-1]
        full = np.einsum("bouvkl,oikl->biuv", wins, flipped, optimize=True)
        gx = np.ascontiguousarray(full[:, :, p : p + n, p : p + n])
    _charge_direct(
        led,
        params.batch * params.in_channels * n * n,
        params.out_channels * k * k,
    )
    return gx


def _direct_backward_kernel(grad_y, x, params: ConvParams, led: FlopLedger) -> np.ndarray:
    k, v = params.kernel, params.out_side
    with led.timed("direct"):
        xp = np.pad(x, ((0, 0), (0, 0), (params.padding,) * 2, (params.padding,) * 2))
        wins = _windows(xp, v)  # (B, f1, K, K, V, V)
        gw = np.einsum("bikluv,bouv->oikl", wins, grad_y, optimize=True)
    _charge_direct(
        led,
        params.out_channels * params.in_channels * k * k,
        params.batch * v * v,
    )
    return gw


# ---------------------------------------------------------------------------
# The three convolution operations
# ---------------------------------------------------------------------------


def forward(
    x,
    w,
    params: ConvParams,
    backend: Backend = Backend.SPECTRAL_RECT,
    ledger: FlopLedger | None = None,
) -> np.ndarray:
    """Channel-summed cross-correlation: y[b, o] = sum_i xpad[b, i] (*) w[o, i].

    x: (B, f1, N, N), w: (f2, f1, K, K) -> (B, f2, N+2P-K+1, N+2P-K+1).
    Spectral backends conjugate the kernel spectrum (cross-correlation) and
    compute kernel spectra once per call, reused across the whole batch.
    """
    x = np.asarray(x)
    w = np.asarray(w)
    _check_tensor(x, "x", (params.batch, params.in_channels, params.image, params.image))
    _check_tensor(
        w,
        "w",
        (params.out_channels, params.in_channels, params.kernel, params.kernel),
    )
    led = ledger if ledger is not None else FlopLedger()
    if backend is Backend.DIRECT_SPATIAL:
        return _direct_forward(x, w, params, led)
    plan = params.plan
    with led.timed("crop_pad"):
        xp = pad_embed(x, plan)
        wp = embed_origin(w.astype(x.dtype, copy=False), plan)
    xs = rfft2(xp, plan, led, "rfft_input")
    ws = rfft2(wp, plan, led, "rfft_kernel")
    out = _combine_spectra(xs, ws, not _SABOTAGE_CONJ, backend, led)
    y = irfft2(out, plan, led, "irfft_output")
    with led.timed("crop_pad"):
        return crop_region(y, 0, params.out_side)


def backward_input(
    grad_y,
    w,
    params: ConvParams,
    backend: Backend = Backend.SPECTRAL_RECT,
    ledger: FlopLedger | None = None,
) -> np.ndarray:
    """Loss gradient w.r.t. the layer input: a channel-transposed full (true)
    convolution of the output gradient with the kernel, cropped to undo the
    forward padding.  grad_y: (B, f2, V, V) -> (B, f1, N, N)."""
    grad_y = np.asarray(grad_y)
    w = np.asarray(w)
    v = params.out_side
    _check_tensor(grad_y, "grad_y", (params.batch, params.out_channels, v, v))
    _check_tensor(
        w,
        "w",
        (params.out_channels, params.in_channels, params.kernel, params.kernel),
    )
    led = ledger if ledger is not None else FlopLedger()
    if backend is Backend.DIRECT_SPATIAL:
        return _direct_backward_input(grad_y, w, params, led)
    plan = params.plan
    with led.timed("crop_pad"):
        gp = embed_origin(grad_y, plan)
        wp = embed_origin(w.astype(grad_y.dtype, copy=False), plan)
    gs = rfft2(gp, plan, led, "rfft_input")
    ws = rfft2(wp, plan, led, "rfft_kernel")
    # True convolution: no conjugation.  Kernel channel axes transposed.
    out = _combine_spectra(gs, ws.swap_leading(), _SABOTAGE_CONJ, backend, led)
    g = irfft2(out, plan, led, "irfft_output")
    with led.timed("crop_pad"):
        return crop_region(g, params.padding, params.image)


def backward_kernel(
    grad_y,
    x,
    params: ConvParams,
    backend: Backend = Backend.SPECTRAL_RECT,
    ledger: FlopLedger | None = None,
) -> np.ndarray:
    """Loss gradient w.r.t. the kernel: batch-summed cross-correlation of the
    padded input with the output gradient, cropped to K-by-K.
    grad_y: (B, f2, V, V), x: (B, f1, N, N) -> (f2, f1, K, K)."""
    grad_y = np.asarray(grad_y)
    x = np.asarray(x)
    v = params.out_side
    _check_tensor(grad_y, "grad_y", (params.batch, params.out_channels, v, v))
    _check_tensor(x, "x", (params.batch, params.in_channels, params.image, params.image))
    led = ledger if ledger is not None else FlopLedger()
    if backend is Backend.DIRECT_SPATIAL:
        return _direct_backward_kernel(grad_y, x, params, led)
    plan = params.plan
    with led.timed("crop_pad"):
        xp = pad_embed(x, plan)
        gp = embed_origin(grad_y, plan)
    xs = rfft2(xp, plan, led, "rfft_input")
    gs = rfft2(gp, plan, led, "rfft_kernel")
    # Cross-correlation again, so the output-gradient spectrum is conjugated;
    # reduction runs over the batch axis.
    out = _combine_spectra(
        xs.swap_leading(), gs.swap_leading(), not _SABOTAGE_CONJ, backend, led
    )
    g = irfft2(out, plan, led, "irfft_output")  # (f1, f2, L, L)
    with led.timed("crop_pad"):
        gk = crop_region(g, 0, params.kernel)
        return np.ascontiguousarray(gk.transpose(1, 0, 2, 3))
