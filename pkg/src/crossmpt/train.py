"""Training loop: Adam with step-wise cosine decay on zero-codeword AWGN
batches, BCE loss against the multiplicative-noise target.

Every step draws its batch from ``default_rng([seed, step])``, so a run
can be stopped and resumed from a checkpoint without changing the stream.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .channel import ChannelSample, ebno_to_sigma, noise_target, receive
from .codes import LinearCode, encode
from .model import (ModelConfig, ModelParams, atomic_write_text, build_masks, forward,
                    init_params, load_checkpoint, save_checkpoint)

__all__ = [
    "TrainConfig",
    "TrainRecord",
    "TrainingDiverged",
    "sample_batch",
    "cosine_lr",
    "lr_trace",
    "batch_loss",
    "mean_loss",
    "run_training",
    "write_loss_csv",
]


class TrainingDiverged(RuntimeError):
    def __init__(self, step, loss):
        self.step = step
        super().__init__(f"loss became {loss} at step {step}")


@dataclass(frozen=True)
class TrainConfig:
    """Training recipe. Defaults follow the paper-scale schedule; desk runs
    override ``epochs``/``batches_per_epoch`` (and usually the rates)."""

    epochs: int = 1000
    batches_per_epoch: int = 1000
    batch_size: int = 128
    lr_start: float = 1e-4
    lr_end: float = 5e-7
    ebno_range_db: tuple[float, float] = (3.0, 7.0)
    snr_sampling: str = "integer"
    seed: int = 0
    random_codewords: bool = False
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        lo, hi = self.ebno_range_db
        if hi < lo:
            raise ValueError("empty Eb/N0 range")
        if self.snr_sampling == "integer" and math.floor(hi) < math.ceil(lo):
            raise ValueError("Eb/N0 range holds no integer dB value")
        if not self.lr_start >= self.lr_end > 0:
            raise ValueError("need lr_start >= lr_end > 0")
        if self.snr_sampling not in ("integer", "uniform"):
            raise ValueError("snr_sampling must be 'integer' or 'uniform'")
        if min(self.epochs, self.batches_per_epoch) < 0 or self.batch_size < 1:
            raise ValueError("epochs/batches must be >= 0 and batch_size >= 1")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.batches_per_epoch


@dataclass
class TrainRecord:
    epoch_losses: list[float]
    lr_trace: list[float]
    wall_time: float
    params: ModelParams
    initial_loss: float | None = None
    checkpoints: list[Path] = field(default_factory=list)


# ---------------------------------------------------------------------------

def sample_batch(code: LinearCode, batch_size: int, ebno_range_db, rng: np.random.Generator,
                 snr_sampling: str = "integer", random_codewords: bool = False) -> ChannelSample:
    """Draw a training batch.

    Each frame gets its own Eb/N0 (integer dB grid by default) and the
    received word ``y = 1 + sigma z`` of the all-zero codeword. With
    ``random_codewords`` the same noise is mapped onto a random codeword as
    ``x_s * y``, which leaves |y|, the syndrome and the target unchanged.
    """
    lo, hi = ebno_range_db
    if snr_sampling == "integer":
        grid = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=np.float64)
        ebno = grid[rng.integers(0, grid.size, size=batch_size)]
    else:
        ebno = rng.uniform(lo, hi, size=batch_size)
    sigma = ebno_to_sigma(ebno, code.rate)
    z = rng.standard_normal((batch_size, code.n))
    y = 1.0 + sigma[:, None] * z
    if random_codewords:
        msg_rng = np.random.default_rng(rng.integers(0, 2 ** 63))
        x = encode(msg_rng.integers(0, 2, size=(batch_size, code.k)), code)
        x_s = 1.0 - 2.0 * x
        y = x_s * y
    else:
        x = np.zeros((batch_size, code.n), dtype=np.uint8)
        x_s = np.ones((batch_size, code.n))
    rx = receive(y, code.H)
    return ChannelSample(received=rx, transmitted_bits=x, target=noise_target(y, x_s), ebno_db=ebno)


def cosine_lr(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """Cosine decay from lr_start (step 0) to lr_end (last step)."""
    if total_steps <= 1:
        return lr_start
    frac = step / (total_steps - 1)
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * frac))


def lr_trace(cfg: TrainConfig) -> list[float]:
    """Learning rate at the first step of every epoch."""
    return [cosine_lr(e * cfg.batches_per_epoch, cfg.total_steps, cfg.lr_start, cfg.lr_end)
            for e in range(cfg.epochs)]


def batch_loss(params: ModelParams, model_cfg: ModelConfig, batch: ChannelSample, masks):
    """Mean over frames of the per-frame summed BCE between logits and z~."""
    logits, _ = forward(params, model_cfg, batch.received, masks)
    B = batch.target.shape[0]
    return T.scale(T.bce_with_logits_sum(logits, batch.target), 1.0 / B)


def mean_loss(params: ModelParams, model_cfg: ModelConfig, code: LinearCode, batches: int = 8,
              batch_size: int = 128, ebno_range_db=(3.0, 7.0), seed: int = 12345) -> float:
    """Loss on a fixed set of batches (no gradients), for before/after comparisons."""
    masks = build_masks(model_cfg, code.H)
    total = 0.0
    with T.no_grad():
        for b in range(batches):
            batch = sample_batch(code, batch_size, ebno_range_db, np.random.default_rng([seed, b]))
            total += float(batch_loss(params, model_cfg, batch, masks).data)
    return total / batches


class Adam:
    def __init__(self, params: ModelParams, betas=(0.9, 0.999), eps=1e-8, state=None, t=0):
        self.params = params
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = t
        self.m = {}
        self.v = {}
        for name, p in params.items():
            if state and f"adam.m.{name}" in state:
                self.m[name] = np.array(state[f"adam.m.{name}"], dtype=p.dtype)
                self.v[name] = np.array(state[f"adam.v.{name}"], dtype=p.dtype)
            else:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.b1, self.b2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.m:
            out[f"adam.m.{name}"] = self.m[name]
            out[f"adam.v.{name}"] = self.v[name]
        return out


def run_training(cfg: TrainConfig, code: LinearCode, model_cfg: ModelConfig,
                 params: ModelParams | None = None, resume_from=None, checkpoint_dir=None,
                 checkpoint_every: int = 0, loss_csv=None, progress=None) -> TrainRecord:
    """Train a decoder and return its :class:`TrainRecord`.

    ``resume_from`` names a checkpoint written by an earlier call with the
    same ``cfg``; training continues at the epoch it was saved after. With
    ``checkpoint_dir`` and ``checkpoint_every > 0`` a checkpoint including
    the optimiser state is written every that many epochs.
    """
    start_step = 0
    state = None
    if resume_from is not None:
        ck_cfg, params, state, start_step = load_checkpoint(resume_from)
        if ck_cfg != model_cfg:
            raise ValueError(f"checkpoint config {ck_cfg} does not match {model_cfg}")
        if start_step % max(cfg.batches_per_epoch, 1):
            raise ValueError("can only resume from an epoch boundary")
    elif params is None:
        params = init_params(model_cfg, np.random.default_rng(cfg.seed))
    masks = build_masks(model_cfg, code.H)
    opt = Adam(params, cfg.adam_betas, cfg.adam_eps, state=state, t=start_step)

    t0 = time.perf_counter()
    losses, lrs, ckpts = [], [], []
    initial = None
    first_epoch = start_step // cfg.batches_per_epoch if cfg.batches_per_epoch else 0
    step = start_step
    for epoch in range(first_epoch, cfg.epochs):
        lrs.append(cosine_lr(step, cfg.total_steps, cfg.lr_start, cfg.lr_end))
        acc = 0.0
        for _ in range(cfg.batches_per_epoch):
            rng = np.random.default_rng([cfg.seed, step])
            batch = sample_batch(code, cfg.batch_size, cfg.ebno_range_db, rng,
                                 cfg.snr_sampling, cfg.random_codewords)
            params.zero_grad()
            loss = batch_loss(params, model_cfg, batch, masks)
            val = float(loss.data)
            if not math.isfinite(val):
                raise TrainingDiverged(step, val)
            if initial is None:
                initial = val
            loss.backward()
            opt.step(cosine_lr(step, cfg.total_steps, cfg.lr_start, cfg.lr_end))
            acc += val
            step += 1
        losses.append(acc / max(cfg.batches_per_epoch, 1))
        if progress is not None:
            progress(epoch, losses[-1], lrs[-1])
        if checkpoint_dir is not None and checkpoint_every and (epoch + 1) % checkpoint_every == 0:
            path = Path(checkpoint_dir) / f"epoch_{epoch + 1:04d}.ckpt"
            save_checkpoint(path, params, model_cfg, extra=opt.state(), step=step)
            ckpts.append(path)
        if loss_csv is not None:
            write_loss_csv(loss_csv, losses, lrs, first_epoch)
    if loss_csv is not None:
        write_loss_csv(loss_csv, losses, lrs, first_epoch)
    return TrainRecord(epoch_losses=losses, lr_trace=lrs, wall_time=time.perf_counter() - t0,
                       params=params, initial_loss=initial, checkpoints=ckpts)


def write_loss_csv(path, losses, lrs, first_epoch: int = 0):
    buf = io.StringIO()
    buf.write("epoch,mean_loss,lr\n")
    for i, (loss, lr) in enumerate(zip(losses, lrs)):
        buf.write(f"{first_epoch + i + 1},{loss!r},{lr!r}\n")
    atomic_write_text(path, buf.getvalue())
