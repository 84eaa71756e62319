"""Minimal trainable network for the backend loss-parity demonstration.

Architecture: conv (via the engine, any backend) -> ReLU -> 2x2 average pool
-> dense -> softmax cross-entropy, trained with plain SGD on a synthetic
oriented-bar classification task.  Everything is deterministic given the seed,
so traces from different backends are directly comparable step by step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .convengine import Backend, ConvParams, backward_input, backward_kernel, forward
from .flops import FlopLedger

__all__ = [
    "TinyNet",
    "SyntheticDataset",
    "TrainConfig",
    "TrainTrace",
    "make_dataset",
    "init_net",
    "loss_and_grads",
    "sgd_step",
    "accuracy",
    "train",
]


@dataclass
class TinyNet:
    conv_w: np.ndarray  # (f2, f1, K, K)
    dense_w: np.ndarray  # (classes, f2 * (V/2)^2)
    dense_b: np.ndarray  # (classes,)
    params: ConvParams
    backend: Backend


@dataclass
class SyntheticDataset:
    """Deterministic labelled images: one oriented-bar pattern per class plus
    Gaussian pixel noise, so labels are recoverable by construction."""

    seed: int
    num_classes: int
    images: np.ndarray  # (M, f1, N, N)
    labels: np.ndarray  # (M,)

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def samples(self) -> list:
        return [(self.images[i : i + 1], int(self.labels[i])) for i in range(len(self))]


def _bar_patterns(side: int, channels: int, num_classes: int, dtype) -> np.ndarray:
    if not 1 <= num_classes <= 4:
        raise ValueError("the bar task defines between 1 and 4 classes")
    pats = np.zeros((num_classes, channels, side, side), dtype=dtype)
    mid = side // 2
    idx = np.arange(side)
    for c in range(num_classes):
        plane = np.zeros((side, side), dtype=dtype)
        if c == 0:  # horizontal bar
            plane[mid - 1 : mid + 1, :] = 1.0
        elif c == 1:  # vertical bar
            plane[:, mid - 1 : mid + 1] = 1.0
        elif c == 2:  # main diagonal
            plane[idx, idx] = 1.0
            plane[idx[:-1], idx[1:]] = 1.0
        else:  # anti-diagonal
            plane[idx, side - 1 - idx] = 1.0
            plane[idx[:-1], side - 2 - idx[:-1]] = 1.0
        pats[c] = plane
    return pats


def make_dataset(
    seed: int,
    num_classes: int = 4,
    size: int = 256,
    image: int = 8,
    channels: int = 1,
    noise: float = 0.1,
    dtype=np.float64,
) -> SyntheticDataset:
    rng = np.random.default_rng(seed)
    patterns = _bar_patterns(image, channels, num_classes, np.dtype(dtype))
    labels = rng.integers(0, num_classes, size=size)
    images = patterns[labels] + noise * rng.standard_normal(
        (size, channels, image, image)
    ).astype(dtype, copy=False)
    return SyntheticDataset(seed, num_classes, images.astype(dtype, copy=False), labels)


@dataclass
class TrainConfig:
    backend: Backend = Backend.SPECTRAL_RECT
    steps: int = 300
    lr: float = 0.05
    seed: int = 7
    dtype: str = "float64"
    image: int = 8
    channels: int = 1
    features: int = 6
    kernel: int = 3
    padding: int = 1
    classes: int = 4
    batch: int = 8
    train_size: int = 256
    holdout_size: int = 64
    noise: float = 0.1


@dataclass
class TrainTrace:
    backend: str
    steps: int
    lr: float
    seed: int
    dtype: str
    losses: list[float]
    step_time_ns: list[int]
    step_op_totals: list[dict]
    final_accuracy: float

    def data_dict(self) -> dict:
        """Deterministic portion of the trace (everything but wall time)."""
        return {
            "kind": "train",
            "backend": self.backend,
            "steps": self.steps,
            "lr": self.lr,
            "seed": self.seed,
            "dtype": self.dtype,
            "losses": self.losses,
            "step_op_totals": self.step_op_totals,
            "final_accuracy": self.final_accuracy,
        }


def init_net(cfg: TrainConfig) -> TinyNet:
    dtype = np.dtype(cfg.dtype)
    params = ConvParams(
        batch=cfg.batch,
        in_channels=cfg.channels,
        out_channels=cfg.features,
        image=cfg.image,
        kernel=cfg.kernel,
        padding=cfg.padding,
    )
    v = params.out_side
    if v % 2:
        raise ValueError("conv output side must be even for 2x2 pooling")
    flat = cfg.features * (v // 2) ** 2

    rng = np.random.default_rng([cfg.seed, 0])
    conv_fan = cfg.channels * cfg.kernel * cfg.kernel
    dense_fan = flat
    conv_w = rng.uniform(
        -1 / np.sqrt(conv_fan),
        1 / np.sqrt(conv_fan),
        (cfg.features, cfg.channels, cfg.kernel, cfg.kernel),
    ).astype(dtype)
    dense_w = rng.uniform(
        -1 / np.sqrt(dense_fan), 1 / np.sqrt(dense_fan), (cfg.classes, flat)
    ).astype(dtype)
    dense_b = np.zeros(cfg.classes, dtype=dtype)
    return TinyNet(conv_w, dense_w, dense_b, params, cfg.backend)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(
    net: TinyNet,
    images: np.ndarray,
    labels: np.ndarray,
    ledger: FlopLedger | None = None,
) -> tuple[float, dict]:
    """Mean cross-entropy and gradients for every parameter (plus the input
    gradient, which exercises the input-backward path each step)."""
    led = ledger if ledger is not None else FlopLedger()
    p = net.params
    b = images.shape[0]
    if b != p.batch:
        raise ValueError(f"batch {b} does not match net geometry {p.batch}")

    conv_out = forward(images, net.conv_w, p, net.backend, led)  # (B, f2, V, V)
    relu = np.maximum(conv_out, 0)
    v = p.out_side
    pooled = relu.reshape(b, p.out_channels, v // 2, 2, v // 2, 2).mean(axis=(3, 5))
    flat = pooled.reshape(b, -1)
    logits = flat @ net.dense_w.T + net.dense_b
    probs = _softmax(logits)
    eps = np.finfo(probs.dtype).tiny
    loss = float(-np.log(probs[np.arange(b), labels] + eps).mean())

    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    g_dense_w = dlogits.T @ flat
    g_dense_b = dlogits.sum(axis=0)
    dflat = dlogits @ net.dense_w
    dpool = dflat.reshape(b, p.out_channels, v // 2, v // 2)
    dconv = np.repeat(np.repeat(dpool, 2, axis=2), 2, axis=3) / 4.0
    dconv = dconv * (conv_out > 0)
    dconv = np.ascontiguousarray(dconv)

    g_conv_w = backward_kernel(dconv, images, p, net.backend, led)
    g_input = backward_input(dconv, net.conv_w, p, net.backend, led)
    return loss, {
        "conv_w": g_conv_w,
        "dense_w": g_dense_w,
        "dense_b": g_dense_b,
        "input": g_input,
    }


def sgd_step(net: TinyNet, grads: dict, lr: float) -> TinyNet:
    """Plain gradient descent on every parameter; returns an updated net."""
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    return replace(
        net,
        conv_w=net.conv_w - lr * grads["conv_w"],
        dense_w=net.dense_w - lr * grads["dense_w"],
        dense_b=net.dense_b - lr * grads["dense_b"],
    )


def accuracy(net: TinyNet, dataset: SyntheticDataset) -> float:
    p = net.params
    hits = 0
    for lo in range(0, len(dataset), p.batch):
        chunk = dataset.images[lo : lo + p.batch]
        if chunk.shape[0] < p.batch:  # pad the tail batch to the fixed geometry
            pad = np.zeros((p.batch - chunk.shape[0],) + chunk.shape[1:], chunk.dtype)
            chunk = np.concatenate([chunk, pad])
        conv_out = forward(chunk, net.conv_w, p, net.backend)
        relu = np.maximum(conv_out, 0)
        v = p.out_side
        pooled = relu.reshape(
            chunk.shape[0], p.out_channels, v // 2, 2, v // 2, 2
        ).mean(axis=(3, 5))
        logits = pooled.reshape(chunk.shape[0], -1) @ net.dense_w.T + net.dense_b
        pred = logits.argmax(axis=1)[: min(p.batch, len(dataset) - lo)]
        hits += int((pred == dataset.labels[lo : lo + pred.size]).sum())
    return hits / len(dataset)


def train(cfg: TrainConfig) -> TrainTrace:
    """Run the demo task; returns per-step losses, per-step wall time, per-step
    ledger totals, and the held-out accuracy.  Identical configs give identical
    losses and parameters; only the wall times vary."""
    if cfg.train_size % cfg.batch:
        raise ValueError("train_size must be a multiple of the batch size")
    dtype = np.dtype(cfg.dtype)
    net = init_net(cfg)
    train_ds = make_dataset(
        cfg.seed, cfg.classes, cfg.train_size, cfg.image, cfg.channels, cfg.noise, dtype
    )
    holdout = make_dataset(
        cfg.seed + 9973,
        cfg.classes,
        cfg.holdout_size,
        cfg.image,
        cfg.channels,
        cfg.noise,
        dtype,
    )

    losses: list[float] = []
    times: list[int] = []
    op_totals: list[dict] = []
    if cfg.steps == 0:
        led = FlopLedger()
        loss, _ = loss_and_grads(net, train_ds.images[: cfg.batch], train_ds.labels[: cfg.batch], led)
        losses.append(loss)
        times.append(0)
        op_totals.append(led.total_cost().as_dict())
    for step in range(cfg.steps):
        lo = (step * cfg.batch) % cfg.train_size
        batch_x = train_ds.images[lo : lo + cfg.batch]
        batch_y = train_ds.labels[lo : lo + cfg.batch]
        led = FlopLedger()
        start = time.perf_counter_ns()
        loss, grads = loss_and_grads(net, batch_x, batch_y, led)
        net = sgd_step(net, grads, cfg.lr)
        times.append(time.perf_counter_ns() - start)
        losses.append(loss)
        op_totals.append(led.total_cost().as_dict())

    return TrainTrace(
        backend=cfg.backend.value,
        steps=cfg.steps,
        lr=cfg.lr,
        seed=cfg.seed,
        dtype=cfg.dtype,
        losses=losses,
        step_time_ns=times,
        step_op_totals=op_totals,
        final_accuracy=accuracy(net, holdout),
    )
