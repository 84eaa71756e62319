"""Discrete Fourier machinery for real 2-D convolution.

Three layers of trust:

* ``dft_1d_naive`` — the O(n^2) textbook transform, used only as a test oracle.
* ``fft_1d`` — iterative radix-2 Cooley-Tukey with bit-reversal permutation and
  a precomputed twiddle table, batched over leading axes.
* ``rfft2`` / ``irfft2`` — row-column 2-D transforms of real planes keeping only
  the non-redundant half spectrum (floor(L/2)+1 columns); the other half is
  implied by Hermitian symmetry and reconstructed on the way back.

Transforms are unnormalized going forward and carry 1/L per axis going back,
so a roundtrip is the identity.  ``plan_fft`` picks the power-of-two length
L >= N + 2P + K - 1 that makes the circular product equal linear convolution
on the cropped region.

Spectra are stored as paired real planes (structure of arrays): re/im for the
rectangular form, mag/ang for the polar form.  Both forms therefore have
identical memory layout and access patterns.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .complexforms import OpCost
from .errors import UnsupportedGeometryError

__all__ = [
    "FftPlan",
    "SpectrumRect",
    "SpectrumPhasor",
    "plan_fft",
    "dft_1d_naive",
    "fft_1d",
    "rfft2",
    "irfft2",
    "hermitian_expand",
    "pad_embed",
    "embed_origin",
    "crop_valid",
    "crop_region",
    "fft_butterfly_cost",
    "fft_scale_cost",
]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    perm = np.array([0], dtype=np.intp)
    while perm.size < n:
        perm = np.concatenate([2 * perm, 2 * perm + 1])
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=None)
def _twiddles(n: int) -> np.ndarray:
    # e^{-2j*pi*m/n} for m in [0, n/2)
    m = np.arange(n // 2)
    table = np.exp((-2j * np.pi / n) * m)
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class FftPlan:
    """Transform sizing for one conv geometry plus the shared twiddle table.

    ``fft_len`` (L) is the smallest power of two >= spatial_len + kernel_len - 1,
    where spatial_len = N + 2P.  ``valid_out_len`` = N + 2P - K + 1.
    """

    spatial_len: int
    kernel_len: int
    fft_len: int
    valid_out_len: int
    twiddles: np.ndarray  # complex128, shape (fft_len // 2,)


@lru_cache(maxsize=None)
def plan_fft(n: int, k: int, p: int = 0) -> FftPlan:
    """Plan transforms for an n-by-n image, k-by-k kernel, padding p."""
    if n < 1 or k < 1:
        raise ValueError("image and kernel sides must be >= 1")
    if p < 0:
        raise ValueError("padding must be >= 0")
    if k > n:
        raise UnsupportedGeometryError(f"kernel side {k} exceeds image side {n}")
    spatial = n + 2 * p
    length = 1
    while length < spatial + k - 1:
        length *= 2
    return FftPlan(
        spatial_len=spatial,
        kernel_len=k,
        fft_len=length,
        valid_out_len=spatial - k + 1,
        twiddles=_twiddles(length),
    )


def dft_1d_naive(x, direction: str = "forward") -> np.ndarray:
    """O(n^2) reference DFT of a 1-D sequence.  Forward is unnormalized,
    inverse carries 1/n; used as the independent oracle for ``fft_1d``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a non-empty 1-D sequence")
    n = x.size
    k = np.arange(n)
    if direction == "forward":
        sign = -1.0
    elif direction == "inverse":
        sign = 1.0
    else:
        raise ValueError(f"unknown direction {direction!r}")
    matrix = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    out = matrix @ x
    if direction == "inverse":
        out /= n
    return out


def _complex_dtype_for(dtype: np.dtype) -> np.dtype:
    if dtype in (np.float32, np.complex64):
        return np.dtype(np.complex64)
    return np.dtype(np.complex128)


def fft_1d(x, direction: str = "forward", twiddles: np.ndarray | None = None) -> np.ndarray:
    """Radix-2 FFT along the last axis of ``x`` (length must be a power of two).

    Iterative decimation-in-time: bit-reversal permutation, then log2(n)
    butterfly stages using the shared twiddle table.  The inverse conjugates
    the twiddles and scales by 1/n so that inverse(forward(x)) == x.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"fft_1d requires a power-of-two length, got {n}")
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    ctype = _complex_dtype_for(x.dtype)
    table = _twiddles(n) if twiddles is None else twiddles
    if table.shape != (n // 2,):
        raise ValueError("twiddle table does not match transform length")
    if direction == "inverse":
        table = np.conj(table)
    table = table.astype(ctype, copy=False)

    y = np.ascontiguousarray(x[..., _bit_reversal(n)], dtype=ctype)
    half = 1
    while half < n:
        stride = n // (2 * half)
        tw = table[::stride]
        blocks = y.reshape(y.shape[:-1] + (n // (2 * half), 2, half))
        t = blocks[..., 1, :] * tw
        blocks[..., 1, :] = blocks[..., 0, :] - t
        blocks[..., 0, :] += t
        half *= 2
    if direction == "inverse":
        y *= ctype.type(1.0 / n)
    return y


def fft_butterfly_cost(n: int) -> tuple[int, int]:
    """(real mul, real add) of one length-n radix-2 transform as executed:
    (n/2)*log2(n) butterflies, each 4 mul + 6 add."""
    if n <= 1:
        return 0, 0
    stages = n.bit_length() - 1
    butterflies = (n // 2) * stages
    return 4 * butterflies, 6 * butterflies


def fft_scale_cost(n: int) -> int:
    """Real multiplications of the 1/n scaling pass of an inverse transform."""
    return 2 * n


@dataclass(eq=False)
class SpectrumRect:
    """Half spectrum in rectangular form: paired re/im planes of shape
    (..., L, floor(L/2)+1) over a Hermitian-symmetric full spectrum."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise ValueError("re and im planes must have identical shape")

    @property
    def shape(self) -> tuple:
        return self.re.shape

    def __getitem__(self, key) -> "SpectrumRect":
        return SpectrumRect(self.re[key], self.im[key])

    def swap_leading(self) -> "SpectrumRect":
        """View with the two leading axes exchanged."""
        perm = (1, 0) + tuple(range(2, self.re.ndim))
        return SpectrumRect(self.re.transpose(perm), self.im.transpose(perm))

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


@dataclass(eq=False)
class SpectrumPhasor:
    """Half spectrum in polar form: mag >= 0 and ang in (-pi, pi] planes,
    laid out exactly like ``SpectrumRect``.  mag == 0 implies ang == 0."""

    mag: np.ndarray
    ang: np.ndarray

    def __post_init__(self):
        if self.mag.shape != self.ang.shape:
            raise ValueError("mag and ang planes must have identical shape")

    @property
    def shape(self) -> tuple:
        return self.mag.shape

    def __getitem__(self, key) -> "SpectrumPhasor":
        return SpectrumPhasor(self.mag[key], self.ang[key])

    def swap_leading(self) -> "SpectrumPhasor":
        perm = (1, 0) + tuple(range(2, self.mag.ndim))
        return SpectrumPhasor(self.mag.transpose(perm), self.ang.transpose(perm))


def _check_plane(x: np.ndarray, plan: FftPlan, what: str) -> None:
    l = plan.fft_len
    if x.ndim < 2 or x.shape[-2:] != (l, l):
        raise ValueError(f"{what} must have trailing shape ({l}, {l}), got {x.shape}")


def rfft2(x, plan: FftPlan, ledger=None, stage: str | None = None) -> SpectrumRect:
    """2-D transform of real plane(s), keeping columns 0..floor(L/2).

    ``x`` has shape (..., L, L); leading axes are batched.  Row-column
    factorization: a full complex FFT per row, then column FFTs on the
    retained half.  Optionally charges counts and wall time for ``stage``
    ("rfft_input" or "rfft_kernel") on ``ledger``.
    """
    x = np.asarray(x)
    _check_plane(x, plan, "rfft2 input")
    l = plan.fft_len
    cols = l // 2 + 1
    planes = int(np.prod(x.shape[:-2], dtype=np.int64))

    def compute():
        rows = fft_1d(x, "forward", plan.twiddles)
        half = np.ascontiguousarray(np.swapaxes(rows[..., :cols], -1, -2))
        half = fft_1d(half, "forward", plan.twiddles)
        spec = np.swapaxes(half, -1, -2)
        rdtype = np.float32 if spec.dtype == np.complex64 else np.float64
        return (
            np.ascontiguousarray(spec.real, dtype=rdtype),
            np.ascontiguousarray(spec.imag, dtype=rdtype),
        )

    if ledger is not None and stage is not None:
        with ledger.timed(stage):
            re, im = compute()
        mul, add = fft_butterfly_cost(l)
        ledger.charge(stage, OpCost(mul=mul, add=add), planes * (l + cols))
        ledger.count_transforms(stage, planes)
    else:
        re, im = compute()
    return SpectrumRect(re, im)


def hermitian_expand(spec: SpectrumRect, plan: FftPlan) -> np.ndarray:
    """Rebuild the full L-by-L complex spectrum from its non-redundant half
    via X[k1, L-k2] = conj(X[(L-k1) mod L, k2])."""
    l = plan.fft_len
    cols = l // 2 + 1
    if spec.shape[-2:] != (l, cols):
        raise ValueError(
            f"spectrum trailing shape {spec.shape[-2:]} does not match plan ({l}, {cols})"
        )
    half = spec.to_complex()
    full = np.empty(spec.shape[:-1] + (l,), dtype=half.dtype)
    full[..., :cols] = half
    if l > 2:
        row_map = (l - np.arange(l)) % l
        col_map = np.arange(l - cols, 0, -1)
        full[..., cols:] = np.conj(half[..., row_map, :][..., :, col_map])
    return full


def irfft2(spec: SpectrumRect, plan: FftPlan, ledger=None, stage: str | None = None) -> np.ndarray:
    """Inverse of ``rfft2``: expand the Hermitian half, run the inverse 2-D
    transform (1/L^2 total normalization), return the real part."""
    l = plan.fft_len
    planes = int(np.prod(spec.shape[:-2], dtype=np.int64))

    def compute():
        full = hermitian_expand(spec, plan)
        out = fft_1d(full, "inverse", plan.twiddles)
        out = np.ascontiguousarray(np.swapaxes(out, -1, -2))
        out = fft_1d(out, "inverse", plan.twiddles)
        out = np.swapaxes(out, -1, -2)
        rdtype = np.float32 if out.dtype == np.complex64 else np.float64
        return np.ascontiguousarray(out.real, dtype=rdtype)

    if ledger is not None and stage is not None:
        with ledger.timed(stage):
            plane = compute()
        mul, add = fft_butterfly_cost(l)
        per_line = OpCost(mul=mul + fft_scale_cost(l), add=add)
        ledger.charge(stage, per_line, planes * 2 * l)
        ledger.count_transforms(stage, planes)
    else:
        plane = compute()
    return plane


def pad_embed(x, plan: FftPlan) -> np.ndarray:
    """Embed plane(s) of side H at offset (p, p) of a zero L-by-L plane, where
    p = (spatial_len - H) / 2: the symmetric spatial padding is part of the
    embedding, and the padded image occupies rows/cols [0, spatial_len)."""
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        raise ValueError(f"expected square trailing plane, got shape {x.shape}")
    side = x.shape[-1]
    offset2 = plan.spatial_len - side
    if offset2 < 0 or offset2 % 2:
        raise ValueError(
            f"plane side {side} does not fit plan spatial length {plan.spatial_len}"
        )
    p = offset2 // 2
    l = plan.fft_len
    out = np.zeros(x.shape[:-2] + (l, l), dtype=x.dtype)
    out[..., p : p + side, p : p + side] = x
    return out


def embed_origin(x, plan: FftPlan) -> np.ndarray:
    """Embed plane(s) at the origin of a zero L-by-L plane (kernels and
    output gradients, which take no symmetric padding)."""
    x = np.asarray(x)
    side_h, side_w = x.shape[-2], x.shape[-1]
    l = plan.fft_len
    if side_h > l or side_w > l:
        raise ValueError(f"plane shape {x.shape} exceeds FFT length {l}")
    out = np.zeros(x.shape[:-2] + (l, l), dtype=x.dtype)
    out[..., :side_h, :side_w] = x
    return out


def crop_region(y, offset: int, side: int) -> np.ndarray:
    """Contiguous copy of the square region starting at (offset, offset)."""
    y = np.asarray(y)
    if offset < 0 or offset + side > y.shape[-1] or offset + side > y.shape[-2]:
        raise ValueError(
            f"crop [{offset}:{offset + side}) exceeds plane shape {y.shape[-2:]}"
        )
    return np.ascontiguousarray(y[..., offset : offset + side, offset : offset + side])


def crop_valid(y, plan: FftPlan) -> np.ndarray:
    """Extract the linear cross-correlation's valid region: the zero-padding
    headroom guarantees the circular result equals the linear one on
    rows/cols [0, valid_out_len)."""
    y = np.asarray(y)
    if y.shape[-2:] != (plan.fft_len, plan.fft_len):
        raise ValueError(
            f"expected trailing shape ({plan.fft_len}, {plan.fft_len}), got {y.shape}"
        )
    return crop_region(y, 0, plan.valid_out_len)
