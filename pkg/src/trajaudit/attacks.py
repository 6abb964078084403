"""White-box membership-inference attacks.

Two scoring rules, both oriented "higher = more member-like":
the logit of the GAN discriminator's confidence, and the negated
denoising loss of the diffusion model averaged over randomly probed
timesteps.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib

import numpy as np

from trajaudit import nn, targets
from trajaudit.errors import ConfigError, ValidationError
from trajaudit.trajectory import MembershipDataset, Trajectory

ATTACK_KINDS = ("discriminator", "loss_based")


@dataclasses.dataclass(frozen=True)
class AttackConfig:
    attack_kind: str
    seed: int = 0
    num_probe_timesteps: int = 50  # loss_based only
    noise_draws_per_timestep: int = 1

    def __post_init__(self):
        if self.attack_kind not in ATTACK_KINDS:
            raise ConfigError(f"unknown attack kind {self.attack_kind!r}")
        if self.num_probe_timesteps < 1 or self.noise_draws_per_timestep < 1:
            raise ConfigError(f"bad attack config: {self}")


@dataclasses.dataclass(frozen=True)
class ScoredSample:
    sample_id: str
    score: float
    is_member: bool

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValidationError(f"non-finite score for sample {self.sample_id}")


def logit(p: float) -> float:
    """log(p / (1 - p)); strictly increasing, antisymmetric about 0.5."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"logit domain is (0, 1), got {p}")
    return float(np.log(p) - np.log1p(-p))


def disc_score(model: targets.GanTarget, x: Trajectory) -> float:
    """Discriminator-based membership score: logit of D's confidence."""
    return logit(targets.discriminator_confidence(model, x))


def _sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Per-sample generator so scores are independent of pool ordering."""
    digest = hashlib.sha256(sample_id.encode()).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


def loss_score(model: targets.DiffusionTarget, x0: Trajectory, config: AttackConfig) -> float:
    """Loss-based membership score: negated mean noise-prediction error.

    Probes `num_probe_timesteps` timesteps sampled uniformly without
    replacement, with `noise_draws_per_timestep` Gaussian draws each; the
    squared error is the full L2 norm over the flattened trajectory.
    """
    if config.attack_kind != "loss_based":
        raise ConfigError(f"loss_score needs attack_kind=loss_based, got {config.attack_kind!r}")
    sched = model.schedule
    n_t = config.num_probe_timesteps
    if n_t > sched.t_max:
        raise ConfigError(f"{n_t} probe timesteps > schedule T_max {sched.t_max}")
    if len(x0) != model.seq_len:
        raise ConfigError(f"trajectory length {len(x0)}, model expects {model.seq_len}")

    rng = _sample_rng(config.seed, x0.id)
    timesteps = rng.choice(sched.t_max, size=n_t, replace=False) + 1
    draws = config.noise_draws_per_timestep
    flat = x0.flat_xy()
    dim = flat.size

    total = 0.0
    for t in timesteps:
        eps = rng.standard_normal((draws, dim))
        ab = sched.alpha_bar(int(t))
        x_t = np.sqrt(ab) * flat + np.sqrt(1.0 - ab) * eps
        pred = nn.forward_batch(
            model.noise_net, targets.diffusion_input(x_t, np.full(draws, t), sched.t_max)
        )
        resid = pred - eps
        total += float(np.mean(np.sum(resid * resid, axis=1)))
    return -total / n_t


def run_attack(target, dataset: MembershipDataset, config: AttackConfig) -> list[ScoredSample]:
    """Score every trajectory in both pools against the target model."""
    if config.attack_kind == "discriminator":
        if not isinstance(target, targets.GanTarget):
            raise ConfigError("discriminator attack requires a GAN target")
        score = lambda tr: disc_score(target, tr)
    else:
        if not isinstance(target, targets.DiffusionTarget):
            raise ConfigError("loss-based attack requires a diffusion target")
        score = lambda tr: loss_score(target, tr, config)

    out = []
    for tr in dataset.members:
        out.append(ScoredSample(tr.id, score(tr), True))
    for tr in dataset.non_members:
        out.append(ScoredSample(tr.id, score(tr), False))
    return out


def save_scores(samples: list[ScoredSample], path) -> None:
    """Scored-sample CSV: sample_id,score,is_member, sorted by sample_id."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "score", "is_member"])
        for s in sorted(samples, key=lambda s: s.sample_id):
            writer.writerow([s.sample_id, repr(s.score), int(s.is_member)])


def load_scores(path) -> list[ScoredSample]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "score", "is_member"]:
            raise ValidationError(f"{path}: bad scored-sample header {header!r}")
        for row in reader:
            out.append(ScoredSample(row[0], float(row[1]), bool(int(row[2]))))
    return out
