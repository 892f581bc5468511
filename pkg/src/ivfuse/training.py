"""Autoencoder-style training.

Each registered pair is blended into two complementary pre-fused images;
the encoder and decoder (never the fusion layer) learn to reconstruct
each of them under the composite loss. Adam with the documented defaults
does the stepping; plain SGD is selectable for ablation. Single-threaded
runs are bit-for-bit reproducible from (seed, config, corpus).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import PairDataset
from .errors import ConfigError, DivergenceError
from .losses import LossConfig, composite_loss_parts
from .network import (FeedbackConfig, ModelParams, PreFusionConfig,
                      init_params, pre_fuse, reconstruct)
from .tensor import Tensor, backward

OPTIMIZERS = ("adam", "sgd")


@dataclass
class TrainConfig:
    # documented full-scale defaults; tests and the demo override these
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 200
    image_size: int = 256
    seed: int = 0
    pre_fusion: PreFusionConfig = field(default_factory=PreFusionConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    dtype: type = np.float32
    # desk-scale controls: hard step cap and optional reconstruction target
    max_steps: int | None = None
    stop_rmse: float | None = None
    eval_interval: int = 50

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")


class Adam:
    """Standard Adam with bias correction; deterministic and in-place."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


class SGD:
    def __init__(self, params: dict[str, Tensor], lr: float):
        self.params = params
        self.lr = lr

    def step(self):
        for p in self.params.values():
            p.data -= (self.lr * p.grad).astype(p.dtype)


class TrainingLog:
    """Per-step loss records, serializable as ``epoch,step,L,L_p,L_ssim,L_ag``."""

    HEADER = "epoch,step,L,L_p,L_ssim,L_ag"

    def __init__(self):
        self.rows: list[tuple[int, int, float, float, float, float]] = []

    def record(self, epoch: int, step: int, parts: dict[str, float]) -> None:
        self.rows.append((epoch, step, parts["L"], parts["L_p"],
                          parts["L_ssim"], parts["L_ag"]))

    def epoch_means(self) -> dict[int, float]:
        sums: dict[int, list[float]] = {}
        for epoch, _, total, *_ in self.rows:
            sums.setdefault(epoch, []).append(total)
        return {e: float(np.mean(v)) for e, v in sums.items()}

    def lines(self) -> list[str]:
        out = [self.HEADER]
        for epoch, step, total, lp, ls, lag in self.rows:
            out.append(f"{epoch},{step},{total!r},{lp!r},{ls!r},{lag!r}")
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.lines()) + "\n")


def prefused_samples(dataset: PairDataset, cfg: PreFusionConfig
                     ) -> list[np.ndarray]:
    """Both complementary blends of every training pair, in corpus order."""
    samples = []
    for pair in dataset.train_pairs():
        iw, vw = pre_fuse(pair.infrared, pair.visible, cfg)
        samples.append(iw)
        samples.append(vw)
    return samples


def reconstruction_rmse(params: ModelParams, samples: list[np.ndarray],
                        fb: FeedbackConfig) -> float:
    """Per-pixel RMSE of the clamped reconstructions over all samples."""
    total = 0.0
    count = 0
    for img in samples:
        x = Tensor(img[np.newaxis, np.newaxis].astype(params.dtype))
        recon = np.clip(reconstruct(x, params, fb).data[0, 0], 0.0, 1.0)
        diff = recon.astype(np.float64) - img
        total += float(np.sum(diff * diff))
        count += diff.size
    return float(np.sqrt(total / count))


def train(dataset: PairDataset, cfg: TrainConfig,
          params: ModelParams | None = None
          ) -> tuple[ModelParams, TrainingLog]:
    """Run the reconstruction training loop.

    Pre-fused samples are fixed up front; every epoch shuffles them with
    the seeded generator and walks them in batches. Raises
    DivergenceError naming the epoch and step if the loss goes non-finite.
    """
    samples = prefused_samples(dataset, cfg.pre_fusion)
    if not samples:
        raise ConfigError("training requires a nonempty train split")
    if params is None:
        params = init_params(cfg.seed, dtype=cfg.dtype)
    if cfg.optimizer == "adam":
        opt = Adam(params.tensors, cfg.learning_rate, cfg.beta1, cfg.beta2,
                   cfg.adam_eps)
    else:
        opt = SGD(params.tensors, cfg.learning_rate)

    rng = np.random.default_rng(cfg.seed)
    log = TrainingLog()
    step = 0
    done = False
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(samples))
        for lo in range(0, len(order), cfg.batch_size):
            batch = [samples[i] for i in order[lo:lo + cfg.batch_size]]
            x = Tensor(np.stack(batch)[:, np.newaxis].astype(cfg.dtype))
            out = reconstruct(x, params, cfg.feedback)
            loss, parts = composite_loss_parts(out, x, cfg.loss)
            if not np.isfinite(parts["L"]):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, step {step}")
            backward(loss)
            opt.step()
            log.record(epoch, step, parts)
            step += 1
            if cfg.max_steps is not None and step >= cfg.max_steps:
                done = True
            if (cfg.stop_rmse is not None and not done
                    and step % cfg.eval_interval == 0):
                rmse = reconstruction_rmse(params, samples, cfg.feedback)
                if rmse < cfg.stop_rmse:
                    done = True
            if done:
                break
        if done:
            break
    return params, log
