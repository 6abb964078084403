"""Desk-scale target generative models: an MLP trajectory GAN and a
DDPM-style diffusion model, with explicit overfitting knobs.

Both expose the white-box surfaces the attacks consume: the GAN
discriminator's confidence and the diffusion model's noise-prediction
network.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib

import numpy as np

from trajaudit import nn
from trajaudit.errors import (
    ConfigError,
    DivergenceError,
    EmptyInputError,
    ShapeError,
    ValidationError,
)
from trajaudit.trajectory import Trajectory

#: clamp applied to discriminator confidences; the logit diverges at 0 and 1
CONFIDENCE_CLAMP = 1e-7


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    lr: float
    seed: int
    hidden: tuple[int, ...] = (128, 64)
    noise_dim: int = 8  # GAN only
    dataset_size: int = 0  # filled in by the trainer

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError(f"bad train config: {self}")


@dataclasses.dataclass(frozen=True)
class NoiseSchedule:
    """Forward-process variance schedule: betas, alphas, cumulative products."""

    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        object.__setattr__(self, "betas", betas)
        if betas.ndim != 1 or betas.size < 1:
            raise ConfigError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ConfigError("every beta must lie in (0, 1)")
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @property
    def t_max(self) -> int:
        return self.betas.size

    def alpha_bar(self, t: int) -> float:
        """Cumulative product up to step t; t=0 returns 1 by convention."""
        if not 0 <= t <= self.t_max:
            raise ValidationError(f"timestep {t} outside [0, {self.t_max}]")
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    @classmethod
    def linear(cls, t_max: int = 100, beta_start: float = 1e-4, beta_end: float = 0.02):
        return cls(np.linspace(beta_start, beta_end, t_max))


@dataclasses.dataclass
class GanTarget:
    generator: nn.Mlp
    discriminator: nn.Mlp
    train_config: TrainConfig
    seq_len: int
    loss_trace: list[tuple[float, float]] = dataclasses.field(default_factory=list)

    family = "gan"


@dataclasses.dataclass
class DiffusionTarget:
    noise_net: nn.Mlp
    schedule: NoiseSchedule
    train_config: TrainConfig
    seq_len: int
    loss_trace: list[float] = dataclasses.field(default_factory=list)

    family = "diffusion"


def forward_noising(
    x0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """Closed-form noising: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    if not 1 <= t <= schedule.t_max:
        raise ValidationError(f"timestep {t} outside [1, {schedule.t_max}]")
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError(f"x0 shape {x0.shape} vs eps shape {eps.shape}")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def _stack(data: list[Trajectory]) -> np.ndarray:
    if not data:
        raise EmptyInputError("no training trajectories")
    seq_len = len(data[0])
    x = np.stack([tr.flat_xy() for tr in data])
    if any(len(tr) != seq_len for tr in data):
        raise ShapeError("training trajectories have mixed lengths")
    return x


def _bce_upstream(p: np.ndarray, target: float, batch: int) -> np.ndarray:
    """d/dp of mean binary cross-entropy, with clamped denominators."""
    p_safe = np.clip(p, CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP)
    if target == 1.0:
        return -1.0 / (batch * p_safe)
    return 1.0 / (batch * (1.0 - p_safe))


def _bce(p: np.ndarray, target: float) -> float:
    p_safe = np.clip(p, CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP)
    if target == 1.0:
        return float(-np.mean(np.log(p_safe)))
    return float(-np.mean(np.log(1.0 - p_safe)))


def train_gan(data: list[Trajectory], config: TrainConfig, dp_config=None) -> GanTarget:
    """Adversarial training: one discriminator step, one generator step per batch.

    With a DpConfig the discriminator's real-data gradient goes through
    per-example clipping plus Gaussian noise (see trajaudit.dp); the
    fake-data and generator gradients touch no training trajectory and
    are left exact.
    """
    x_data = _stack(data)
    if len(data) < config.batch_size:
        raise ConfigError(f"dataset size {len(data)} < batch size {config.batch_size}")
    seq_len = len(data[0])
    dim = 2 * seq_len
    config = dataclasses.replace(config, dataset_size=len(data))

    rng = np.random.default_rng(config.seed)
    gen = nn.init_mlp(
        [config.noise_dim, *config.hidden, dim],
        ["relu"] * len(config.hidden) + ["tanh"],
        rng,
    )
    disc = nn.init_mlp(
        [dim, *config.hidden, 1],
        ["relu"] * len(config.hidden) + ["sigmoid"],
        rng,
    )

    if dp_config is not None:
        from trajaudit import dp as dp_mod

    n = x_data.shape[0]
    bs = config.batch_size
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n - bs + 1, bs):
            real = x_data[order[start : start + bs]]

            # discriminator step
            z = rng.standard_normal((bs, config.noise_dim))
            fake = nn.forward_batch(gen, z)
            p_real, cache_r = nn.forward_batch(disc, real, want_cache=True)
            p_fake, cache_f = nn.forward_batch(disc, fake, want_cache=True)
            d_loss = _bce(p_real, 1.0) + _bce(p_fake, 0.0)
            if dp_config is None:
                g_real, _ = nn.backward_batch(disc, cache_r, _bce_upstream(p_real, 1.0, bs))
            else:
                per_example = []
                for i in range(bs):
                    pi, ci = nn.forward_batch(disc, real[i : i + 1], want_cache=True)
                    gi, _ = nn.backward_batch(disc, ci, _bce_upstream(pi, 1.0, 1))
                    per_example.append(gi)
                g_real = dp_mod.aggregate_private_grads(per_example, dp_config, rng)
            g_fake, _ = nn.backward_batch(disc, cache_f, _bce_upstream(p_fake, 0.0, bs))
            nn.sgd_step(disc, g_real.add_(g_fake), config.lr)

            # generator step (non-saturating loss)
            z = rng.standard_normal((bs, config.noise_dim))
            fake, cache_g = nn.forward_batch(gen, z, want_cache=True)
            p, cache_d = nn.forward_batch(disc, fake, want_cache=True)
            g_loss = _bce(p, 1.0)
            _, d_fake = nn.backward_batch(disc, cache_d, _bce_upstream(p, 1.0, bs))
            g_grads, _ = nn.backward_batch(gen, cache_g, d_fake)
            nn.sgd_step(gen, g_grads, config.lr)

            d_losses.append(d_loss)
            g_losses.append(g_loss)
        ep_d, ep_g = float(np.mean(d_losses)), float(np.mean(g_losses))
        if not (np.isfinite(ep_d) and np.isfinite(ep_g)):
            raise DivergenceError(f"non-finite GAN loss at epoch {epoch}")
        trace.append((ep_d, ep_g))

    return GanTarget(gen, disc, config, seq_len, trace)


def diffusion_input(x_t: np.ndarray, t, t_max: int) -> np.ndarray:
    """Noise-net input: flattened noisy trajectory with t/T_max appended."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    t_col = np.full((x_t.shape[0], 1), 0.0) + np.asarray(t, dtype=np.float64).reshape(-1, 1)
    return np.concatenate([x_t, t_col / t_max], axis=1)


def train_diffusion(
    data: list[Trajectory], config: TrainConfig, schedule: NoiseSchedule
) -> DiffusionTarget:
    """Train the noise-prediction net on the standard denoising objective:
    mean squared error between injected and predicted noise at uniformly
    sampled timesteps."""
    x_data = _stack(data)
    if len(data) < config.batch_size:
        raise ConfigError(f"dataset size {len(data)} < batch size {config.batch_size}")
    seq_len = len(data[0])
    dim = 2 * seq_len
    config = dataclasses.replace(config, dataset_size=len(data))

    rng = np.random.default_rng(config.seed)
    net = nn.init_mlp(
        [dim + 1, *config.hidden, dim],
        ["relu"] * len(config.hidden) + ["identity"],
        rng,
    )

    n = x_data.shape[0]
    bs = config.batch_size
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n - bs + 1, bs):
            x0 = x_data[order[start : start + bs]]
            t = rng.integers(1, schedule.t_max + 1, size=bs)
            eps = rng.standard_normal((bs, dim))
            ab = schedule.alpha_bars[t - 1][:, None]
            x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
            pred, cache = nn.forward_batch(
                net, diffusion_input(x_t, t, schedule.t_max), want_cache=True
            )
            resid = pred - eps
            losses.append(float(np.mean(np.sum(resid * resid, axis=1))))
            grads, _ = nn.backward_batch(net, cache, 2.0 * resid / bs)
            nn.sgd_step(net, grads, config.lr)
        ep_loss = float(np.mean(losses))
        if not np.isfinite(ep_loss):
            raise DivergenceError(f"non-finite diffusion loss at epoch {epoch}")
        trace.append(ep_loss)

    return DiffusionTarget(net, schedule, config, seq_len, trace)


def sample_diffusion(model: DiffusionTarget, n: int, seed: int) -> list[Trajectory]:
    """Ancestral DDPM sampling from pure noise, T_max reverse steps."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    sched = model.schedule
    dim = 2 * model.seq_len
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    for t in range(sched.t_max, 0, -1):
        pred = nn.forward_batch(model.noise_net, diffusion_input(x, np.full(n, t), sched.t_max))
        alpha = sched.alphas[t - 1]
        ab = sched.alpha_bars[t - 1]
        x = (x - sched.betas[t - 1] / np.sqrt(1.0 - ab) * pred) / np.sqrt(alpha)
        if t > 1:
            x = x + np.sqrt(sched.betas[t - 1]) * rng.standard_normal((n, dim))
    x = np.clip(x, -1.0, 1.0)
    width = max(1, len(str(n - 1)))
    t_axis = np.arange(model.seq_len, dtype=np.float64)
    return [
        Trajectory(f"ddpm-{i:0{width}d}", x[i].reshape(model.seq_len, 2), t_axis.copy())
        for i in range(n)
    ]


def discriminator_confidence(model: GanTarget, x: Trajectory) -> float:
    """D(flatten(x)), clamped away from 0 and 1 for the logit transform."""
    if len(x) != model.seq_len:
        raise ShapeError(f"trajectory length {len(x)}, model expects {model.seq_len}")
    p = float(nn.forward(model.discriminator, x.flat_xy())[0])
    return float(np.clip(p, CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP))


# -- checkpointing ----------------------------------------------------------

def save_target(target, out_dir) -> None:
    """Write checkpoint directory: nn .npz files plus a meta.json sidecar."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "family": target.family,
        "seq_len": target.seq_len,
        "train_config": dataclasses.asdict(target.train_config),
        "loss_trace": target.loss_trace,
    }
    if target.family == "gan":
        nn.save_mlp(target.generator, out / "generator.npz")
        nn.save_mlp(target.discriminator, out / "discriminator.npz")
    elif target.family == "diffusion":
        nn.save_mlp(target.noise_net, out / "noise_net.npz")
        meta["schedule_betas"] = target.schedule.betas.tolist()
    else:
        raise ConfigError(f"unknown target family {target.family!r}")
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_target(in_dir):
    path = pathlib.Path(in_dir)
    meta = json.loads((path / "meta.json").read_text())
    cfg = meta["train_config"]
    cfg["hidden"] = tuple(cfg["hidden"])
    config = TrainConfig(**cfg)
    if meta["family"] == "gan":
        return GanTarget(
            nn.load_mlp(path / "generator.npz"),
            nn.load_mlp(path / "discriminator.npz"),
            config,
            meta["seq_len"],
            [tuple(p) for p in meta["loss_trace"]],
        )
    if meta["family"] == "diffusion":
        return DiffusionTarget(
            nn.load_mlp(path / "noise_net.npz"),
            NoiseSchedule(np.array(meta["schedule_betas"])),
            config,
            meta["seq_len"],
            list(meta["loss_trace"]),
        )
    raise ConfigError(f"unknown target family {meta['family']!r}")
