"""Cross-module verification suites behind the `verify` subcommand.

One entry point runs every invariant the package claims: scalar form
round-trips and cost exactness, FFT-vs-naive-DFT agreement, transform
round-trips, Parseval, the convolution theorem, backend equivalence against
the sliding-window oracle, finite-difference gradient checks, exact operation
counting, model reconciliation, ledger merge laws, and training parity.
``scale="small"`` runs reduced sample counts (seconds); ``scale="full-desk"``
runs the full acceptance-sized versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import complexforms as cf
from . import convengine as ce
from . import nn
from .flops import CostModel, FlopLedger, FORM_PHASOR, FORM_RECT, reconcile
from .spectral import (
    SpectrumRect,
    dft_1d_naive,
    fft_1d,
    hermitian_expand,
    irfft2,
    pad_embed,
    plan_fft,
    rfft2,
)

__all__ = ["CheckResult", "run_verify"]

_EPS = float(np.finfo(np.float64).eps)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def _result(name, measured, tolerance, detail="") -> CheckResult:
    return CheckResult(name, bool(measured <= tolerance), float(measured), float(tolerance), detail)


def _random_rect(rng, n):
    scale = 10.0 ** rng.uniform(-3, 3, size=n)
    re = rng.standard_normal(n) * scale
    im = rng.standard_normal(n) * scale
    return [cf.CRect(float(a), float(b)) for a, b in zip(re, im)]


def _check_scalar_roundtrip(rng, samples) -> CheckResult:
    worst = 0.0
    for z in _random_rect(rng, samples):
        mag = math.hypot(z.re, z.im)
        if mag == 0.0:
            continue
        back = cf.to_rectangular(cf.to_phasor(z))
        err = max(abs(back.re - z.re), abs(back.im - z.im)) / (mag * _EPS)
        worst = max(worst, err)
    return _result("complexforms.roundtrip", worst, 8.0, "error in units of eps*|z|")


def _check_scalar_product_equiv(rng, samples) -> CheckResult:
    worst = 0.0
    zs1 = _random_rect(rng, samples)
    zs2 = _random_rect(rng, samples)
    for z1, z2 in zip(zs1, zs2):
        direct = cf.mul_rect(z1, z2)
        via = cf.to_rectangular(cf.mul_phasor(cf.to_phasor(z1), cf.to_phasor(z2)))
        scale = math.hypot(z1.re, z1.im) * math.hypot(z2.re, z2.im)
        if scale == 0.0:
            continue
        err = max(abs(via.re - direct.re), abs(via.im - direct.im)) / (scale * _EPS)
        worst = max(worst, err)
    return _result(
        "complexforms.product_equivalence", worst, 16.0, "error in units of eps*|z1||z2|"
    )


def _check_scalar_conj_duality(rng, samples) -> CheckResult:
    worst = 0.0
    for z in _random_rect(rng, samples):
        if z.re == 0.0 and z.im == 0.0:
            continue
        a = cf.to_phasor(cf.conj_rect(z))
        b = cf.conj_phasor(cf.to_phasor(z))
        ang_gap = abs(cf.normalize_angle(a.ang - b.ang))
        mag_gap = abs(a.mag - b.mag) / max(a.mag, b.mag)
        worst = max(worst, ang_gap, mag_gap)
    return _result("complexforms.conjugation_duality", worst, 4 * math.pi * _EPS)


def _check_cost_exactness(rng, samples) -> CheckResult:
    cost_r = cf.OpCost()
    cost_p = cf.OpCost()
    zs1 = _random_rect(rng, samples)
    zs2 = _random_rect(rng, samples)
    for z1, z2 in zip(zs1, zs2):
        cf.mul_rect(z1, z2, cost_r)
        cf.mul_phasor(cf.to_phasor(z1), cf.to_phasor(z2), cost_p)
    ok = (
        cost_r.as_dict() == {"mul": 4 * samples, "add": 2 * samples, "div": 0, "sqrt": 0, "trig": 0}
        and cost_p.mul == samples
        and cost_p.add == samples
    )
    return _result("complexforms.cost_exactness", 0 if ok else 1, 0, f"n={samples}")


def _check_fft_vs_naive(max_len) -> CheckResult:
    rng = np.random.default_rng(11)
    worst = 0.0
    n = 2
    while n <= max_len:
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ref = dft_1d_naive(x, "forward")
        got = fft_1d(x, "forward")
        worst = max(worst, float(np.abs(got - ref).max() / np.abs(ref).max()))
        ref_i = dft_1d_naive(x, "inverse")
        got_i = fft_1d(x, "inverse")
        worst = max(worst, float(np.abs(got_i - ref_i).max() / np.abs(ref_i).max()))
        n *= 2
    return _result("spectral.fft_matches_naive_dft", worst, 1e-10, f"lengths 2..{max_len}")


def _check_rfft2_roundtrip() -> CheckResult:
    rng = np.random.default_rng(12)
    worst = 0.0
    for n in (16, 32):
        plan = plan_fft(n, 1, 0)
        x = rng.standard_normal((n, n))
        back = irfft2(rfft2(x, plan), plan)
        worst = max(worst, float(np.abs(back - x).max()))
    return _result("spectral.rfft2_roundtrip", worst, 1e-12)


def _check_hermitian(rng) -> CheckResult:
    n = 8
    plan = plan_fft(n, 1, 0)
    x = rng.standard_normal((n, n))
    full = hermitian_expand(rfft2(x, plan), plan)
    # reference full transform row-by-row with the naive oracle
    ref = np.array([dft_1d_naive(row) for row in x])
    ref = np.array([dft_1d_naive(col) for col in ref.T]).T
    worst = float(np.abs(full - ref).max())
    sym = full[(n - np.arange(n)) % n][:, (n - np.arange(n)) % n]
    worst = max(worst, float(np.abs(np.conj(sym) - full).max()))
    return _result("spectral.hermitian_symmetry", worst, 1e-10)


def _check_parseval(rng) -> CheckResult:
    n = 16
    plan = plan_fft(n, 1, 0)
    x = rng.standard_normal((n, n))
    full = hermitian_expand(rfft2(x, plan), plan)
    lhs = float((x * x).sum())
    rhs = float((np.abs(full) ** 2).sum()) / (n * n)
    return _result("spectral.parseval", abs(lhs - rhs) / abs(lhs), 1e-9)


def _check_convolution_theorem(rng) -> CheckResult:
    # product of spectra with no conjugation = circular convolution; padding
    # makes it linear on the first n+k-1 rows/cols
    n, k = 12, 5
    plan = plan_fft(n, k, 0)
    x = rng.standard_normal((n, n))
    w = rng.standard_normal((k, k))
    xs = rfft2(pad_embed(x, plan), plan)
    ws = rfft2(np.pad(w, ((0, plan.fft_len - k), (0, plan.fft_len - k))), plan)
    spec = ce.spectral_product_rect(
        SpectrumRect(xs.re[None, None], xs.im[None, None]),
        SpectrumRect(ws.re[None, None], ws.im[None, None]),
    )
    out = irfft2(SpectrumRect(spec.re[0], spec.im[0]), plan)[0]
    ref = ce.direct_fullconv(x, w)  # (n+k-1, n+k-1)
    got = out[: n + k - 1, : n + k - 1]
    return _result(
        "spectral.convolution_theorem", float(np.abs(got - ref).max()), 1e-9
    )


def _random_geometry(rng):
    k = int(rng.choice([1, 2, 3, 5, 7]))
    n = int(rng.integers(k, 33))
    return ce.ConvParams(
        batch=int(rng.integers(1, 5)),
        in_channels=int(rng.integers(1, 9)),
        out_channels=int(rng.integers(1, 9)),
        image=n,
        kernel=k,
        padding=int(rng.integers(0, 3)),
    )


def _backend_equiv(rng, geometries, tol_direct, tol_pair) -> list[CheckResult]:
    worst_direct = 0.0
    worst_pair = 0.0
    worst_bwd = 0.0
    for _ in range(geometries):
        p = _random_geometry(rng)
        x = rng.standard_normal((p.batch, p.in_channels, p.image, p.image))
        w = rng.standard_normal((p.out_channels, p.in_channels, p.kernel, p.kernel))
        ref = ce.forward(x, w, p, ce.Backend.DIRECT_SPATIAL)
        rect = ce.forward(x, w, p, ce.Backend.SPECTRAL_RECT)
        phasor = ce.forward(x, w, p, ce.Backend.SPECTRAL_PHASOR)
        worst_direct = max(
            worst_direct,
            float(np.abs(rect - ref).max()),
            float(np.abs(phasor - ref).max()),
        )
        worst_pair = max(worst_pair, float(np.abs(phasor - rect).max()))
        g = rng.standard_normal(ref.shape)
        gi_ref = ce.backward_input(g, w, p, ce.Backend.DIRECT_SPATIAL)
        gk_ref = ce.backward_kernel(g, x, p, ce.Backend.DIRECT_SPATIAL)
        for backend in (ce.Backend.SPECTRAL_RECT, ce.Backend.SPECTRAL_PHASOR):
            worst_bwd = max(
                worst_bwd,
                float(np.abs(ce.backward_input(g, w, p, backend) - gi_ref).max()),
                float(np.abs(ce.backward_kernel(g, x, p, backend) - gk_ref).max()),
            )
    return [
        _result(
            "convengine.forward_matches_direct",
            worst_direct,
            tol_direct,
            f"{geometries} random geometries",
        ),
        _result("convengine.phasor_matches_rect", worst_pair, tol_pair),
        _result("convengine.backward_matches_direct", worst_bwd, tol_direct),
    ]


def _loss_for_fd(x, w, p, backend):
    y = ce.forward(x, w, p, backend)
    return 0.5 * float((y * y).sum())


def _fd_gradient(fun, arr, h=1e-6):
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = fun()
        flat[i] = orig - h
        lo = fun()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def _check_gradients(rng, instances, tol) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        p = ce.ConvParams(
            batch=int(rng.integers(1, 3)),
            in_channels=int(rng.integers(1, 3)),
            out_channels=int(rng.integers(1, 3)),
            image=int(rng.integers(3, 7)),
            kernel=int(rng.integers(1, 4)),
            padding=int(rng.integers(0, 2)),
        )
        x = rng.standard_normal((p.batch, p.in_channels, p.image, p.image))
        w = rng.standard_normal((p.out_channels, p.in_channels, p.kernel, p.kernel))
        for backend in ce.Backend:
            y = ce.forward(x, w, p, backend)
            gi = ce.backward_input(y, w, p, backend)
            gk = ce.backward_kernel(y, x, p, backend)
            fd_x = _fd_gradient(lambda: _loss_for_fd(x, w, p, backend), x)
            fd_w = _fd_gradient(lambda: _loss_for_fd(x, w, p, backend), w)
            for got, ref in ((gi, fd_x), (gk, fd_w)):
                scale = max(float(np.abs(ref).max()), 1e-8)
                worst = max(worst, float(np.abs(got - ref).max()) / scale)
    return _result(
        "convengine.gradients_match_finite_differences",
        worst,
        tol,
        f"{instances} instances, central differences h=1e-6",
    )


def _check_linearity(rng) -> CheckResult:
    p = ce.ConvParams(batch=2, in_channels=3, out_channels=2, image=9, kernel=3, padding=1)
    x1 = rng.standard_normal((2, 3, 9, 9))
    x2 = rng.standard_normal((2, 3, 9, 9))
    w = rng.standard_normal((2, 3, 3, 3))
    a, b = 1.7, -0.4
    worst = 0.0
    for backend in ce.Backend:
        lhs = ce.forward(a * x1 + b * x2, w, p, backend)
        rhs = a * ce.forward(x1, w, p, backend) + b * ce.forward(x2, w, p, backend)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return _result("convengine.linearity", worst, 1e-9)


def _check_kernel_reuse(rng) -> CheckResult:
    mismatches = 0
    for batch in (1, 3):
        p = ce.ConvParams(batch=batch, in_channels=3, out_channels=4, image=8, kernel=3, padding=1)
        x = rng.standard_normal((batch, 3, 8, 8))
        w = rng.standard_normal((4, 3, 3, 3))
        for backend in (ce.Backend.SPECTRAL_RECT, ce.Backend.SPECTRAL_PHASOR):
            led = FlopLedger()
            ce.forward(x, w, p, backend, led)
            if led.stage("rfft_kernel").transforms != 4 * 3:
                mismatches += 1
    return _result(
        "convengine.kernel_spectrum_reuse",
        mismatches,
        0,
        "kernel-plane transform count is f2*f1 regardless of batch",
    )


def _check_exact_reduction(rng, geometries) -> CheckResult:
    mismatches = 0
    for _ in range(geometries):
        p = _random_geometry(rng)
        x = rng.standard_normal((p.batch, p.in_channels, p.image, p.image))
        w = rng.standard_normal((p.out_channels, p.in_channels, p.kernel, p.kernel))
        led_r = FlopLedger()
        led_p = FlopLedger()
        ce.forward(x, w, p, ce.Backend.SPECTRAL_RECT, led_r)
        ce.forward(x, w, p, ce.Backend.SPECTRAL_PHASOR, led_p)
        rect = led_r.stage("spectral_product").cost
        ph = led_p.stage("spectral_product").cost
        if rect.mul != 4 * ph.mul:
            mismatches += 1
        if (rect.mul + rect.add) != 3 * (ph.mul + ph.add):
            mismatches += 1
    return _result(
        "flops.product_stage_reduction",
        mismatches,
        0,
        "phasor multiplies = 1/4 rect; mul+add = 1/3 rect (integer equality)",
    )


def _check_reconcile(rng, geometries) -> CheckResult:
    mismatches = 0
    params_list = [
        ce.ConvParams(batch=2, in_channels=3, out_channels=4, image=16, kernel=3, padding=1)
    ]
    for _ in range(geometries - 1):
        params_list.append(_random_geometry(rng))
    for p in params_list:
        x = rng.standard_normal((p.batch, p.in_channels, p.image, p.image))
        w = rng.standard_normal((p.out_channels, p.in_channels, p.kernel, p.kernel))
        for backend, form in (
            (ce.Backend.SPECTRAL_RECT, FORM_RECT),
            (ce.Backend.SPECTRAL_PHASOR, FORM_PHASOR),
        ):
            led = FlopLedger()
            ce.forward(x, w, p, backend, led)
            model = CostModel(
                b=p.batch, f1=p.in_channels, f2=p.out_channels,
                n=p.image, k=p.kernel, p=p.padding, form=form,
            )
            for row in reconcile(led, model, "forward"):
                if row["exact"] and not row["match"]:
                    mismatches += 1
    return _result(
        "flops.reconcile_exact_stages",
        mismatches,
        0,
        f"{geometries} geometries, forward op, both spectral backends",
    )


def _check_ledger_merge(rng) -> CheckResult:
    def random_ledger():
        led = FlopLedger()
        for stage in ("spectral_product", "channel_reduce", "rfft_input"):
            led.charge(stage, cf.OpCost(*[int(rng.integers(0, 50)) for _ in range(5)]))
            led.count_transforms(stage, int(rng.integers(0, 5)))
        return led

    a, b, c = random_ledger(), random_ledger(), random_ledger()
    assoc = a.merged(b).merged(c).as_dict() == a.merged(b.merged(c)).as_dict()
    comm = a.merged(b).as_dict() == b.merged(a).as_dict()
    return _result("flops.ledger_merge_laws", 0 if (assoc and comm) else 1, 0)


def _check_training(scale) -> list[CheckResult]:
    steps = 300 if scale == "full-desk" else 60
    results = []
    traces = {}
    for backend in (ce.Backend.SPECTRAL_RECT, ce.Backend.SPECTRAL_PHASOR, ce.Backend.DIRECT_SPATIAL):
        cfg = nn.TrainConfig(backend=backend, steps=steps)
        traces[backend] = nn.train(cfg)
    rect = np.asarray(traces[ce.Backend.SPECTRAL_RECT].losses)
    phasor = np.asarray(traces[ce.Backend.SPECTRAL_PHASOR].losses)
    direct = np.asarray(traces[ce.Backend.DIRECT_SPATIAL].losses)
    gap = float(np.max(np.abs(rect - phasor) / np.abs(rect)))
    results.append(_result("nn.loss_parity_phasor_vs_rect", gap, 1e-3, f"{steps} steps"))
    gap_d = float(np.max(np.abs(rect - direct) / np.abs(rect)))
    results.append(_result("nn.loss_parity_rect_vs_direct", gap_d, 1e-6))
    worst_acc = min(t.final_accuracy for t in traces.values())
    results.append(
        CheckResult("nn.learning_happens", worst_acc >= 0.9, worst_acc, 0.9, "accuracy >= 0.9")
    )
    cfg = nn.TrainConfig(backend=ce.Backend.SPECTRAL_RECT, steps=10)
    t1, t2 = nn.train(cfg), nn.train(cfg)
    same = t1.losses == t2.losses and t1.final_accuracy == t2.final_accuracy
    results.append(_result("nn.determinism", 0 if same else 1, 0, "10-step double run"))
    return results


def run_verify(scale: str = "small", seed: int = 0, sabotage_conj: bool = False):
    """Run every invariant suite; returns (results, all_passed)."""
    if scale not in ("small", "full-desk"):
        raise ValueError(f"unknown scale {scale!r}")
    full = scale == "full-desk"
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    scalar_n = 4000 if full else 800
    results.append(_check_scalar_roundtrip(rng, scalar_n))
    results.append(_check_scalar_product_equiv(rng, scalar_n))
    results.append(_check_scalar_conj_duality(rng, scalar_n))
    results.append(_check_cost_exactness(rng, 257))

    results.append(_check_fft_vs_naive(256 if full else 64))
    results.append(_check_rfft2_roundtrip())
    results.append(_check_hermitian(rng))
    results.append(_check_parseval(rng))
    results.append(_check_convolution_theorem(rng))

    geoms = 200 if full else 25
    if sabotage_conj:
        with ce._sabotage_conjugation():
            results.extend(_backend_equiv(rng, geoms, 1e-9, 1e-10))
    else:
        results.extend(_backend_equiv(rng, geoms, 1e-9, 1e-10))
    results.append(_check_gradients(rng, 20 if full else 4, 1e-6))
    results.append(_check_linearity(rng))
    results.append(_check_kernel_reuse(rng))

    results.append(_check_exact_reduction(rng, 12 if full else 5))
    results.append(_check_reconcile(rng, 10 if full else 4))
    results.append(_check_ledger_merge(rng))

    results.extend(_check_training(scale))

    return results, all(r.passed for r in results)
